"""Structure matrices and the closed-form combinatorics built on them.

Labels are 1-based generator indices ``1..N``; ``Q.q(a, b)`` reads the
coupling between generators ``a`` and ``b``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .combinatorics import (
    MAX_PAIRING_SIZE,
    CapExceededError,
    PairPartition,
    SingletonPairPartition,
    crossing_sets_12,
    crossings,
    enumerate_singleton_pair_partitions,
    partition_of_vector,
    refines,
)


class StructureMatrixError(ValueError):
    pass


class NotRefinedWarning(UserWarning):
    """A Wick coefficient was requested for a partition that does not refine sigma(i)."""


@dataclass(frozen=True, eq=False)
class StructureMatrix:
    """Symmetric N x N coupling matrix with entries in [-1, 1]."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def q(self, a: int, b: int) -> float:
        return float(self.entries[a - 1, b - 1])

    def __eq__(self, other):
        return isinstance(other, StructureMatrix) and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"StructureMatrix(N={self.N}, entries={self.entries.tolist()})"

    def to_json(self) -> dict:
        return {"N": self.N, "entries": self.entries.tolist()}

    @classmethod
    def from_json(cls, obj: dict | str) -> "StructureMatrix":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "entries" not in obj:
            raise StructureMatrixError('structure matrix JSON needs an "entries" field')
        Q = validate(obj["entries"])
        if "N" in obj and int(obj["N"]) != Q.N:
            raise StructureMatrixError(f"declared N={obj['N']} but entries are {Q.N}x{Q.N}")
        return Q


def load(path: str | Path) -> StructureMatrix:
    return StructureMatrix.from_json(json.loads(Path(path).read_text()))


def validate(raw) -> StructureMatrix:
    """Check symmetry, range and an explicit diagonal; return a StructureMatrix.

    Diagonal entries given as ``None`` or NaN are rejected rather than defaulted.
    """
    if isinstance(raw, StructureMatrix):
        raw = raw.entries
    rows = [list(r) for r in raw] if not isinstance(raw, np.ndarray) else raw.tolist()
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise StructureMatrixError("structure matrix must be square and nonempty")
    arr = np.array([[np.nan if v is None else float(v) for v in r] for r in rows])
    if np.isnan(np.diag(arr)).any():
        raise StructureMatrixError("diagonal entries q_ii must be given explicitly")
    if np.isnan(arr).any():
        raise StructureMatrixError("missing off-diagonal entries")
    if not np.array_equal(arr, arr.T):
        a, b = np.argwhere(arr != arr.T)[0]
        raise StructureMatrixError(
            f"structure matrix is not symmetric: q[{a + 1},{b + 1}]={arr[a, b]} != q[{b + 1},{a + 1}]={arr[b, a]}"
        )
    if (np.abs(arr) > 1).any():
        a, b = np.argwhere(np.abs(arr) > 1)[0]
        raise StructureMatrixError(f"|q[{a + 1},{b + 1}]| = {abs(arr[a, b])} > 1")
    return StructureMatrix(arr)


def constant(q: float, N: int) -> StructureMatrix:
    return validate(np.full((N, N), float(q)))


def random_structure(N: int, q_max: float, rng: np.random.Generator) -> StructureMatrix:
    """Symmetric Q with entries uniform in [-q_max, q_max], diagonal included."""
    if not 0 <= q_max <= 1:
        raise StructureMatrixError("q_max must lie in [0, 1]")
    a = rng.uniform(-q_max, q_max, (N, N))
    return validate(np.triu(a) + np.triu(a, 1).T)


def _check_range(qs):
    for q in qs:
        if abs(q) > 1:
            raise StructureMatrixError(f"coupling {q} outside [-1, 1]")


def build_free_product(dims: Sequence[int], qs: Sequence[float]) -> StructureMatrix:
    """Free product of q_k-Gaussian blocks: q_k inside block k, 0 across blocks."""
    if len(dims) != len(qs):
        raise StructureMatrixError("dims and qs must have equal length")
    if any(d < 1 for d in dims):
        raise StructureMatrixError("block dimensions must be positive")
    _check_range(qs)
    N = sum(dims)
    out = np.zeros((N, N))
    start = 0
    for d, q in zip(dims, qs):
        out[start : start + d, start : start + d] = q
        start += d
    return validate(out)


def build_tensor_mixed(
    dims: Sequence[int], dims_prime: Sequence[int], qs: Sequence[float], ps: Sequence[float]
) -> StructureMatrix:
    """Tensor product over factors of (q_i-block free with p_i-block).

    Within factor i: q_i on the H-block, p_i on the K-block, 0 between them.
    Entries across different factors are 1 (commuting).
    """
    if not (len(dims) == len(dims_prime) == len(qs) == len(ps)):
        raise StructureMatrixError("dims, dims_prime, qs, ps must have equal length")
    if any(d < 0 for d in list(dims) + list(dims_prime)):
        raise StructureMatrixError("dimensions must be non-negative")
    _check_range(list(qs) + list(ps))
    N = sum(dims) + sum(dims_prime)
    if N == 0:
        raise StructureMatrixError("empty structure matrix")
    out = np.ones((N, N))
    start = 0
    for d, dp, q, p in zip(dims, dims_prime, qs, ps):
        h = slice(start, start + d)
        k = slice(start + d, start + d + dp)
        out[start : start + d + dp, start : start + d + dp] = 0.0
        out[h, h] = q
        out[k, k] = p
        start += d + dp
    return validate(out)


def tensor_identity(Q: StructureMatrix, n: int) -> StructureMatrix:
    """Q (x) ones(n, n): q(i + aN, j + bN) = q(i, j)."""
    if n < 1:
        raise StructureMatrixError("n must be positive")
    return StructureMatrix(np.kron(np.ones((n, n)), Q.entries))


def double(Q: StructureMatrix) -> StructureMatrix:
    return tensor_identity(Q, 2)


# ---------------------------------------------------------------------------
# moments


def _check_labels(Q: StructureMatrix, i: Sequence[int]) -> None:
    for label in i:
        if not 1 <= label <= Q.N:
            raise ValueError(f"label {label} outside 1..{Q.N}")


def compatible_pairings(i: Sequence[int]) -> Iterator[PairPartition]:
    """Pair partitions sigma <= sigma(i), with mismatched pairs pruned as they are formed."""

    def rec(points):
        if not points:
            yield []
            return
        first, rest = points[0], points[1:]
        for n, partner in enumerate(rest):
            if i[first - 1] != i[partner - 1]:
                continue
            for tail in rec(rest[:n] + rest[n + 1 :]):
                yield [(first, partner)] + tail

    if len(i) % 2:
        return
    for pairs in rec(tuple(range(1, len(i) + 1))):
        yield PairPartition(tuple(pairs))


def crossing_weight(Q: StructureMatrix, i: Sequence[int], sigma: PairPartition) -> float:
    """Product of q(i(e_r), i(e_t)) over the crossings {r, t} of sigma."""
    out = 1.0
    for r, t in crossings(sigma):
        out *= Q.q(i[sigma.pairs[r - 1][0] - 1], i[sigma.pairs[t - 1][0] - 1])
    return out


def moment(Q: StructureMatrix, i: Sequence[int]) -> float:
    """Limit moment tau(x_{i_1} ... x_{i_d}): sum over compatible pairings of crossing products."""
    _check_labels(Q, i)
    if len(i) % 2:
        return 0.0
    if len(i) > MAX_PAIRING_SIZE:
        raise CapExceededError(f"d={len(i)} exceeds the enumeration cap {MAX_PAIRING_SIZE}")
    return float(sum(crossing_weight(Q, i, sigma) for sigma in compatible_pairings(i)))


def _matchings(i: Sequence[int], j: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Permutations pi with j[pi(k)] == i[k], as 0-based tuples."""
    s = len(i)
    used = [False] * s
    current: list[int] = []

    def rec(k):
        if k == s:
            yield tuple(current)
            return
        for target in range(s):
            if not used[target] and j[target] == i[k]:
                used[target] = True
                current.append(target)
                yield from rec(k + 1)
                current.pop()
                used[target] = False

    yield from rec(0)


def wick_inner(Q: StructureMatrix, i: Sequence[int], j: Sequence[int]) -> float:
    """<w(i), w(j)>: zero unless i, j agree as multisets; otherwise a sum over label-respecting
    matchings of the q-products over their inversions."""
    _check_labels(Q, i)
    _check_labels(Q, j)
    if sorted(i) != sorted(j):
        return 0.0
    total = 0.0
    s = len(i)
    for pi in _matchings(i, j):
        w = 1.0
        for k in range(s):
            for l in range(k + 1, s):
                if pi[k] > pi[l]:
                    w *= Q.q(i[k], i[l])
        total += w
    return total


def reduced_labels(i: Sequence[int], sigma: SingletonPairPartition) -> tuple[int, ...]:
    """i_np: drop the coordinates that sit in pair blocks, keep order."""
    if sigma.d != len(i):
        raise ValueError(f"partition on [{sigma.d}] does not match |i|={len(i)}")
    return tuple(i[t - 1] for t in sigma.singletons)


def wick_coefficient(Q: StructureMatrix, i: Sequence[int], sigma: SingletonPairPartition) -> float:
    """f_sigma(i): q-products over pair/pair crossings and pairs covering singletons."""
    _check_labels(Q, i)
    if sigma.d != len(i):
        raise ValueError(f"partition on [{sigma.d}] does not match |i|={len(i)}")
    if i and not refines(sigma.to_partition(), partition_of_vector(i)):
        warnings.warn(f"{sigma} does not refine sigma({tuple(i)}); coefficient is 0", NotRefinedWarning)
        return 0.0
    i_p, i_sp = crossing_sets_12(sigma)
    out = 1.0
    for r, t in i_p:
        out *= Q.q(i[sigma.pairs[r - 1][0] - 1], i[sigma.pairs[t - 1][0] - 1])
    for r, t in i_sp:
        out *= Q.q(i[sigma.pairs[r - 1][0] - 1], i[t - 1])
    return out


@dataclass(frozen=True)
class WickTerm:
    reduced: tuple[int, ...]
    coefficient: float
    partition: SingletonPairPartition


@dataclass(frozen=True)
class WickDecomposition:
    """x_{i_1} ... x_{i_d} = sum of coefficient * w(reduced) over the terms."""

    labels: tuple[int, ...]
    terms: tuple[WickTerm, ...]

    def collect(self) -> dict[tuple[int, ...], float]:
        """Merge terms sharing the same reduced word."""
        out: dict[tuple[int, ...], float] = {}
        for term in self.terms:
            out[term.reduced] = out.get(term.reduced, 0.0) + term.coefficient
        return out

    def scalar_part(self) -> float:
        return sum(t.coefficient for t in self.terms if not t.reduced)


def _compatible_singleton_pairings(i: Sequence[int]) -> Iterator[SingletonPairPartition]:
    def rec(points):
        if not points:
            yield [], []
            return
        first, rest = points[0], points[1:]
        for singles, pairs in rec(rest):
            yield [first] + singles, pairs
        for n, partner in enumerate(rest):
            if i[first - 1] != i[partner - 1]:
                continue
            for singles, pairs in rec(rest[:n] + rest[n + 1 :]):
                yield singles, [(first, partner)] + pairs

    for singles, pairs in rec(tuple(range(1, len(i) + 1))):
        yield SingletonPairPartition(tuple(singles), tuple(pairs))


def wick_decompose(Q: StructureMatrix, i: Sequence[int]) -> WickDecomposition:
    """Expand the generator product x_{i_1}...x_{i_d} into special Wick words."""
    _check_labels(Q, i)
    if len(i) > MAX_PAIRING_SIZE:
        raise CapExceededError(f"d={len(i)} exceeds the enumeration cap {MAX_PAIRING_SIZE}")
    terms = tuple(
        WickTerm(reduced_labels(i, sigma), wick_coefficient(Q, i, sigma), sigma)
        for sigma in _compatible_singleton_pairings(i)
    )
    return WickDecomposition(tuple(i), terms)


def wick_decompose_unpruned(Q: StructureMatrix, i: Sequence[int]) -> WickDecomposition:
    """Same expansion, filtering all of P_{1,2}(d) through ``refines``; slower reference path."""
    _check_labels(Q, i)
    sig_i = partition_of_vector(i) if i else None
    terms = []
    for sigma in enumerate_singleton_pair_partitions(len(i)):
        if sig_i is not None and not refines(sigma.to_partition(), sig_i):
            continue
        terms.append(WickTerm(reduced_labels(i, sigma), wick_coefficient(Q, i, sigma), sigma))
    return WickDecomposition(tuple(i), tuple(terms))


def transference_moment_check(
    q: float, Q_tilde: StructureMatrix, i: Sequence[int], tol: float = 1e-12
) -> bool:
    """Check sum_sigma q^{|I(sigma)|} prod q~ == moment(q * Q~, i)."""
    if abs(q) > 1:
        raise StructureMatrixError(f"|q| = {abs(q)} > 1")
    _check_labels(Q_tilde, i)
    lhs = 0.0
    for sigma in compatible_pairings(i):
        lhs += q ** len(crossings(sigma)) * crossing_weight(Q_tilde, i, sigma)
    rhs = moment(StructureMatrix(q * Q_tilde.entries), i)
    return abs(lhs - rhs) <= tol
