"""Random-sign spin matrix model.

Letters are 1-based pairs ``(i, k)``: row ``i`` (generator label) and column
``k`` (copy index).  Generators are self-adjoint involutions with
``x_a x_b = eps(a, b) x_b x_a`` for ``a != b``.  Reduced words are stored as
strictly increasing tuples of letters in lexicographic order.
"""

from __future__ import annotations

import itertools
import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .combinatorics import enumerate_partitions
from .moments import StructureMatrix, validate

Letter = tuple[int, int]
Word = tuple[Letter, ...]

SCHEMES = ("independent", "tensor-repeated")
DENSE_LIMIT = 4096  # base letters above this switch to hash-derived signs
MAX_REPRESENTATION_GENERATORS = 12
DEFAULT_BUDGET = 5_000_000

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


class BudgetExceededError(RuntimeError):
    pass


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _splitmix64_raw(np.asarray(x, dtype=np.uint64))


def _splitmix64_raw(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True, eq=False)
class EpsilonTable:
    """Symmetric sign table on letters of [rows] x [m].

    Signs are drawn for the base rows ``1..Q.N``; with scheme "tensor-repeated"
    row ``i`` reuses the signs of base row ``(i - 1) % Q.N + 1``.  The diagonal
    (including collisions created by the repetition) is -1.
    """

    Q: StructureMatrix
    rows: int
    m: int
    seed: int
    scheme: str = "independent"
    signs: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_base(self) -> int:
        return self.Q.N * self.m

    @property
    def storage(self) -> str:
        return "dense" if self.signs is not None else "lazy"

    def base_index(self, i, k):
        i = np.asarray(i)
        k = np.asarray(k)
        return ((i - 1) % self.Q.N) * self.m + (k - 1)

    def sign_array(self, ia, ka, ib, kb) -> np.ndarray:
        """Vectorised eps((ia, ka), (ib, kb)) over broadcastable integer arrays."""
        a = np.asarray(self.base_index(ia, ka), dtype=np.int64)
        b = np.asarray(self.base_index(ib, kb), dtype=np.int64)
        a, b = np.broadcast_arrays(a, b)
        if self.signs is not None:
            out = self.signs[a, b].astype(np.int64)
        else:
            lo = np.minimum(a, b).astype(np.uint64)
            hi = np.maximum(a, b).astype(np.uint64)
            key = lo * np.uint64(self.n_base) + hi
            h = _splitmix64(key ^ _splitmix64(np.full(key.shape, self.seed, dtype=np.uint64)))
            u = (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)
            qs = self.Q.entries[(a // self.m), (b // self.m)]
            out = np.where(u < (1.0 - qs) / 2.0, -1, 1).astype(np.int64)
        return np.where(a == b, -1, out)

    def sign(self, x: Letter, y: Letter) -> int:
        if self.signs is None:
            return int(self.sign_array(x[0], x[1], y[0], y[1]))
        n0, m = self.Q.N, self.m
        a = ((x[0] - 1) % n0) * m + x[1] - 1
        b = ((y[0] - 1) % n0) * m + y[1] - 1
        return -1 if a == b else int(self.signs[a, b])

    def doubled(self) -> "EpsilonTable":
        """eps' = eps (x) ones(2, 2) on rows 1..2N."""
        return replace(self, rows=2 * self.rows, scheme="tensor-repeated")

    def undoubled(self) -> "EpsilonTable":
        if self.rows % 2:
            raise ValueError("table has an odd number of rows")
        rows = self.rows // 2
        return replace(self, rows=rows, scheme="independent" if rows == self.Q.N else "tensor-repeated")

    def compatible(self, other: "EpsilonTable") -> bool:
        return (
            self.Q == other.Q
            and self.m == other.m
            and self.seed == other.seed
            and (self.signs is other.signs or (self.signs is not None and other.signs is not None and np.array_equal(self.signs, other.signs)))
        )

    def letters(self, rows: int | None = None) -> list[Letter]:
        rows = self.rows if rows is None else rows
        return [(i, k) for i in range(1, rows + 1) for k in range(1, self.m + 1)]

    def dense(self) -> np.ndarray:
        """Base sign table as an (N m) x (N m) int8 array."""
        if self.signs is not None:
            return self.signs
        idx = np.arange(self.n_base)
        i, k = idx // self.m + 1, idx % self.m + 1
        return self.sign_array(i[:, None], k[:, None], i[None, :], k[None, :]).astype(np.int8)

    def dump(self, path: str | Path) -> None:
        """Binary dump: one JSON header line, then packed (sign == -1) bits, row-major."""
        header = {
            "N": self.Q.N,
            "rows": self.rows,
            "m": self.m,
            "scheme": self.scheme,
            "seed": self.seed,
            "Q": self.Q.entries.tolist(),
        }
        bits = np.packbits((self.dense() < 0).ravel())
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(bits.tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EpsilonTable":
        raw = Path(path).read_bytes()
        head, body = raw.split(b"\n", 1)
        h = json.loads(head)
        n = h["N"] * h["m"]
        bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[: n * n].reshape(n, n)
        signs = np.where(bits == 1, -1, 1).astype(np.int8)
        return cls(validate(h["Q"]), h["rows"], h["m"], h["seed"], h["scheme"], signs)


def sample_epsilon(
    Q: StructureMatrix,
    N: int,
    m: int,
    seed: int,
    scheme: str = "independent",
    storage: str = "auto",
) -> EpsilonTable:
    """Draw eps with P(eps(a, b) = -1) = (1 - q(i, j)) / 2, independently up to symmetry.

    For "tensor-repeated", Q is the base matrix and N must be a multiple of Q.N.
    ``storage`` is "dense", "lazy" (counter-hash, O(1) memory) or "auto".
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if m < 1:
        raise ValueError("m must be positive")
    if scheme == "independent" and N != Q.N:
        raise ValueError(f"independent scheme needs N == Q.N ({N} != {Q.N})")
    if scheme == "tensor-repeated" and N % Q.N:
        raise ValueError(f"tensor-repeated scheme needs N to be a multiple of Q.N={Q.N}")
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    n = Q.N * m
    if storage == "auto":
        storage = "dense" if n <= DENSE_LIMIT else "lazy"
    if storage == "lazy":
        return EpsilonTable(Q, N, m, seed, scheme, None)
    if storage != "dense":
        raise ValueError(f"unknown storage {storage!r}")
    rng = np.random.default_rng(seed)
    u = rng.random((n, n))
    qfull = np.kron(Q.entries, np.ones((m, m)))
    s = np.where(u < (1.0 - qfull) / 2.0, -1, 1).astype(np.int8)
    s = np.triu(s, 1)
    s = s + s.T
    np.fill_diagonal(s, -1)
    s.setflags(write=False)
    return EpsilonTable(Q, N, m, seed, scheme, s)


# ---------------------------------------------------------------------------
# word reduction


def reduce(word: Sequence[Letter], eps: EpsilonTable) -> tuple[int, Word]:
    """Bring a word to canonical reduced form; return (sign, reduced letters).

    Letters are inserted one at a time from the left; each new letter moves
    past the larger letters already present, then cancels against an equal one.
    """
    sign = 1
    out: list[Letter] = []
    for x in word:
        x = tuple(x)
        pos = bisect_left(out, x)
        present = pos < len(out) and out[pos] == x
        for y in out[pos + 1 if present else pos :]:
            sign *= eps.sign(x, y)
        if present:
            del out[pos]
        else:
            out.insert(pos, x)
    return sign, tuple(out)


def reduce_with_schedule(word: Sequence[Letter], eps: EpsilonTable, rng: np.random.Generator) -> tuple[int, Word]:
    """Reduce by random adjacent swaps/cancellations (confluence oracle)."""
    w = [tuple(x) for x in word]
    sign = 1
    while True:
        moves = [p for p in range(len(w) - 1) if w[p] >= w[p + 1]]
        if not moves:
            return sign, tuple(w)
        p = moves[int(rng.integers(len(moves)))]
        if w[p] == w[p + 1]:
            del w[p : p + 2]
        else:
            sign *= eps.sign(w[p], w[p + 1])
            w[p], w[p + 1] = w[p + 1], w[p]


def reduce_symbolic(word: Sequence[Letter]) -> tuple[frozenset[tuple[Letter, Letter]], Word]:
    """Reduce keeping eps factors as formal symbols {a, b}; symbols are kept mod 2."""
    symbols: set[tuple[Letter, Letter]] = set()
    out: list[Letter] = []
    for x in word:
        x = tuple(x)
        pos = bisect_left(out, x)
        present = pos < len(out) and out[pos] == x
        for y in out[pos + 1 if present else pos :]:
            symbols ^= {(x, y) if x < y else (y, x)}
        if present:
            del out[pos]
        else:
            out.insert(pos, x)
    return frozenset(symbols), tuple(out)


def trace(word: Sequence[Letter], eps: EpsilonTable) -> float:
    """Normalised trace: the sign if the word reduces to the identity, else 0."""
    sign, rest = reduce(word, eps)
    return float(sign) if not rest else 0.0


def symbol_expectation(symbols: Iterable[tuple[Letter, Letter]], Q: StructureMatrix, scheme: str = "independent") -> float:
    """E of a product of formal eps symbols.

    Independent symbols have mean q(i, j).  Under "tensor-repeated" rows are
    first identified modulo Q.N; a symbol landing on the diagonal is the
    constant -1, and repeated symbols cancel in pairs.
    """
    if scheme == "independent":
        out = 1.0
        for (a, b) in symbols:
            out *= Q.q(a[0], b[0])
        return out
    N0 = Q.N
    parity: set = set()
    value = 1.0
    for (a, b) in symbols:
        a0 = ((a[0] - 1) % N0 + 1, a[1])
        b0 = ((b[0] - 1) % N0 + 1, b[1])
        if a0 == b0:
            value = -value
            continue
        parity ^= {(a0, b0) if a0 < b0 else (b0, a0)}
    for (a, b) in parity:
        value *= Q.q(a[0], b[0])
    return value


def expected_trace(word: Sequence[Letter], Q: StructureMatrix, scheme: str = "independent") -> float:
    """E[trace(word)] from the symbolic reduction (the brute-force oracle)."""
    symbols, rest = reduce_symbolic(word)
    if rest:
        return 0.0
    return symbol_expectation(symbols, Q, scheme)


# ---------------------------------------------------------------------------
# CLT statistics


def falling_factorial(m: int, r: int) -> int:
    out = 1
    for n in range(r):
        out *= m - n
    return out


@dataclass(frozen=True)
class PartitionTerm:
    """Contribution class of k-vectors with sigma(k) = partition."""

    partition: object
    n_blocks: int
    symbols: tuple[tuple[tuple[int, int], tuple[int, int]], ...] | None

    @property
    def vanishes(self) -> bool:
        return self.symbols is None

    @property
    def is_pairing(self) -> bool:
        return all(len(b) == 2 for b in self.partition.blocks)


@lru_cache(maxsize=4096)
def clt_structure(i: tuple[int, ...]) -> tuple[PartitionTerm, ...]:
    """Symbolic trace of x_{i_1}(k_1)...x_{i_d}(k_d) per partition sigma(k).

    The representative word uses k_alpha = (block of alpha); symbols refer to
    letters (row, block).  Partitions with a singleton block are skipped (their
    trace is identically 0).
    """
    terms = []
    for pi in enumerate_partitions(len(i)):
        if any(len(b) == 1 for b in pi.blocks):
            continue
        owner = pi.block_of()
        word = [(i[a - 1], owner[a] + 1) for a in range(1, len(i) + 1)]
        symbols, rest = reduce_symbolic(word)
        terms.append(PartitionTerm(pi, len(pi.blocks), None if rest else tuple(sorted(symbols))))
    return tuple(terms)


def clt_partition_values(i: Sequence[int], m: int, Q: StructureMatrix, scheme: str = "independent") -> list[tuple[PartitionTerm, float]]:
    """Per-partition expected sums: (#k with sigma(k) = pi) * E[trace], unnormalised."""
    out = []
    for term in clt_structure(tuple(i)):
        if term.vanishes:
            out.append((term, 0.0))
            continue
        symbols = [((ra, ba), (rb, bb)) for (ra, ba), (rb, bb) in term.symbols]
        out.append((term, falling_factorial(m, term.n_blocks) * symbol_expectation(symbols, Q, scheme)))
    return out


def _injections(m: int, r: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(1, m + 1), r)), dtype=np.int64).reshape(-1, r)


def clt_statistic(
    i: Sequence[int],
    m: int,
    *,
    Q: StructureMatrix | None = None,
    eps: EpsilonTable | None = None,
    mode: str = "expectation",
    scheme: str = "independent",
    samples: int = 10_000,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
) -> float:
    """tau_m(x~_{i_1}(m) ... x~_{i_d}(m)) with x~_i(m) = m^{-1/2} sum_k x_i(k).

    mode "expectation": E over eps (needs Q; ``scheme`` picks the sign law).
    mode "exact": the value for the given table ``eps``.
    mode "montecarlo": unbiased estimate from ``samples`` uniform k-vectors.
    """
    i = tuple(i)
    d = len(i)
    norm = m ** (d / 2)
    if mode == "expectation":
        if Q is None:
            raise ValueError("expectation mode needs Q")
        return sum(v for _, v in clt_partition_values(i, m, Q, scheme)) / norm
    if eps is None:
        raise ValueError(f"{mode} mode needs an epsilon table")
    if any(not 1 <= a <= eps.rows for a in i):
        raise ValueError(f"labels {i} outside 1..{eps.rows}")
    if mode == "exact":
        terms = [t for t in clt_structure(i) if not t.vanishes]
        cost = sum(falling_factorial(m, t.n_blocks) for t in terms)
        if cost > budget:
            raise BudgetExceededError(f"exact mode needs {cost} k-assignments (budget {budget}); use mode='montecarlo'")
        total = 0
        for t in terms:
            if falling_factorial(m, t.n_blocks) == 0:
                continue
            phi = _injections(m, t.n_blocks)
            prod = np.ones(phi.shape[0], dtype=np.int64)
            for (ra, ba), (rb, bb) in t.symbols:
                prod *= eps.sign_array(ra, phi[:, ba - 1], rb, phi[:, bb - 1])
            total += int(prod.sum())
        return total / norm
    if mode == "montecarlo":
        rng = np.random.default_rng(seed)
        ks = rng.integers(1, m + 1, size=(samples, d))
        vals = [trace(list(zip(i, map(int, k))), eps) for k in ks]
        return float(np.mean(vals)) * m ** (d / 2)
    raise ValueError(f"unknown mode {mode!r}")


def clt_statistic_bruteforce(
    i: Sequence[int],
    m: int,
    *,
    Q: StructureMatrix | None = None,
    eps: EpsilonTable | None = None,
    scheme: str = "independent",
    budget: int = 200_000,
) -> float:
    """Direct sum over all k in [m]^d; expectation mode if Q is given, else exact."""
    d = len(i)
    if m**d > budget:
        raise BudgetExceededError(f"m^d = {m**d} exceeds budget {budget}")
    total = 0.0
    for k in itertools.product(range(1, m + 1), repeat=d):
        word = list(zip(i, k))
        total += expected_trace(word, Q, scheme) if Q is not None else trace(word, eps)
    return total / m ** (d / 2)


# ---------------------------------------------------------------------------
# elements of the algebra


class SpinElement:
    """Finite linear combination of reduced words, tied to a sign table."""

    __slots__ = ("eps", "_terms")

    def __init__(self, eps: EpsilonTable, terms: Mapping[Word, complex] | None = None):
        self.eps = eps
        clean = {}
        for w, c in (terms or {}).items():
            if c != 0:
                clean[tuple(w)] = c
        self._terms = clean

    @classmethod
    def word(cls, eps: EpsilonTable, letters: Sequence[Letter], coeff: complex = 1.0) -> "SpinElement":
        sign, w = reduce(letters, eps)
        return cls(eps, {w: sign * coeff})

    @classmethod
    def scalar(cls, eps: EpsilonTable, c: complex = 1.0) -> "SpinElement":
        return cls(eps, {(): c})

    @property
    def terms(self) -> dict[Word, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def mean(self) -> complex:
        return self._terms.get((), 0.0)

    def letters(self) -> list[Letter]:
        return sorted({x for w in self._terms for x in w})

    def _common(self, other: "SpinElement") -> EpsilonTable:
        if other.eps is self.eps:
            return self.eps
        if not self.eps.compatible(other.eps):
            raise ValueError("elements live over incompatible sign tables")
        return self.eps if self.eps.rows >= other.eps.rows else other.eps

    def __add__(self, other):
        if not isinstance(other, SpinElement):
            other = SpinElement.scalar(self.eps, other)
        eps = self._common(other)
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out.get(w, 0.0) + c
        return SpinElement(eps, out)

    __radd__ = __add__

    def __neg__(self):
        return SpinElement(self.eps, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, SpinElement):
            return SpinElement(self.eps, {w: c * other for w, c in self._terms.items()})
        eps = self._common(other)
        out: dict[Word, complex] = {}
        for w1, c1 in self._terms.items():
            for w2, c2 in other._terms.items():
                sign, w = reduce(w1 + w2, eps)
                out[w] = out.get(w, 0.0) + sign * c1 * c2
        return SpinElement(eps, out)

    def __rmul__(self, other):
        return SpinElement(self.eps, {w: other * c for w, c in self._terms.items()})

    def adjoint(self) -> "SpinElement":
        out: dict[Word, complex] = {}
        for w, c in self._terms.items():
            sign, r = reduce(w[::-1], self.eps)
            out[r] = out.get(r, 0.0) + sign * np.conj(c)
        return SpinElement(self.eps, out)

    def on(self, eps: EpsilonTable) -> "SpinElement":
        """Same coefficients viewed over a compatible (e.g. doubled) table."""
        if not self.eps.compatible(eps):
            raise ValueError("incompatible sign tables")
        return SpinElement(eps, self._terms)

    def __eq__(self, other):
        if not isinstance(other, SpinElement):
            return NotImplemented
        return self._terms == other._terms

    def allclose(self, other: "SpinElement", tol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0.0) - other._terms.get(k, 0.0)) <= tol for k in keys)

    def __repr__(self):
        body = " + ".join(f"{c}*x{list(w)}" for w, c in sorted(self._terms.items()))
        return f"SpinElement({body or '0'})"


def random_element(
    eps: EpsilonTable,
    rng: np.random.Generator,
    letters: Sequence[Letter] | None = None,
    max_len: int = 4,
    n_terms: int | None = None,
    integer: bool = False,
    mean_zero: bool = False,
) -> SpinElement:
    """Gaussian (or small-integer) coefficients over reduced words of length <= max_len.

    With ``n_terms`` only that many words are drawn; otherwise every reduced
    word on ``letters`` of length <= max_len gets a coefficient.
    """
    letters = sorted(letters if letters is not None else eps.letters())
    pool = [w for r in range(max_len + 1) for w in itertools.combinations(letters, r)]
    if mean_zero:
        pool = [w for w in pool if w]
    if n_terms is not None:
        idx = rng.choice(len(pool), size=min(n_terms, len(pool)), replace=False)
        pool = [pool[n] for n in sorted(idx)]
    coeffs = rng.integers(-5, 6, size=len(pool)).astype(float) if integer else rng.standard_normal(len(pool))
    return SpinElement(eps, dict(zip(pool, coeffs)))


def number_operator_spin(f: SpinElement) -> SpinElement:
    return SpinElement(f.eps, {w: len(w) * c for w, c in f.items()})


def sqrt_number_operator_spin(f: SpinElement) -> SpinElement:
    return SpinElement(f.eps, {w: math.sqrt(len(w)) * c for w, c in f.items()})


def ou_spin(f: SpinElement, t: float) -> SpinElement:
    """T_t x_B = exp(-t |B|) x_B."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return SpinElement(f.eps, {w: math.exp(-t * len(w)) * c for w, c in f.items()})


def derivation(f: SpinElement) -> SpinElement:
    """delta: shift one letter at a time to row i + N, summed; lands in the doubled algebra."""
    N = f.eps.rows
    target = f.eps.doubled()
    out = SpinElement(target)
    acc: dict[Word, complex] = {}
    for w, c in f.items():
        for a in range(len(w)):
            shifted = list(w)
            shifted[a] = (w[a][0] + N, w[a][1])
            sign, r = reduce(shifted, target)
            acc[r] = acc.get(r, 0.0) + sign * c
    out = SpinElement(target, acc)
    return out


def conditional_expectation(F: SpinElement, N: int | None = None) -> SpinElement:
    """Keep reduced words whose rows are all <= N (default: half the rows)."""
    N = F.eps.rows // 2 if N is None else N
    base = F.eps.undoubled() if N * 2 == F.eps.rows else replace(F.eps, rows=N)
    return SpinElement(base, {w: c for w, c in F.items() if all(x[0] <= N for x in w)})


def gradient_form(f: SpinElement, g: SpinElement) -> SpinElement:
    """Gamma(f, g) = (A(f*) g + f* A(g) - A(f* g)) / 2."""
    fs = f.adjoint()
    return 0.5 * (number_operator_spin(fs) * g + fs * number_operator_spin(g) - number_operator_spin(fs * g))


def gradient_form_via_derivation(f: SpinElement, g: SpinElement) -> SpinElement:
    """E(delta(f)* delta(g))."""
    return conditional_expectation(derivation(f).adjoint() * derivation(g), f.eps.rows)


# ---------------------------------------------------------------------------
# matrix representation


@dataclass(frozen=True, eq=False)
class Monomial:
    """Signed permutation matrix: M|b> = sign[b] |target[b]>."""

    target: np.ndarray
    sign: np.ndarray

    def __matmul__(self, other: "Monomial") -> "Monomial":
        return Monomial(self.target[other.target], other.sign * self.sign[other.target])

    def toarray(self) -> np.ndarray:
        n = self.target.size
        out = np.zeros((n, n))
        out[self.target, np.arange(n)] = self.sign
        return out


class SpinRepresentation:
    """Pauli Z-chain representation of the generators ``letters`` (canonical order).

    Generator j acts as Z^{eta(1,j)} (x) ... (x) Z^{eta(j-1,j)} (x) X (x) I ... with
    eta = (1 - eps) / 2, on 2^G dimensions (qubit 1 most significant).
    """

    def __init__(self, eps: EpsilonTable, letters: Sequence[Letter] | None = None, cap: int = MAX_REPRESENTATION_GENERATORS):
        self.eps = eps
        self.letters = sorted(letters if letters is not None else eps.letters())
        G = len(self.letters)
        if G > cap:
            raise ValueError(f"{G} generators exceed the representation cap {cap}")
        self.G = G
        self.dim = 2**G
        self.position = {x: n for n, x in enumerate(self.letters)}
        states = np.arange(self.dim)
        bits = (states[:, None] >> (G - 1 - np.arange(G))[None, :]) & 1
        self.generators: list[Monomial] = []
        for j, x in enumerate(self.letters):
            eta = np.array([1 if eps.sign(self.letters[l], x) == -1 else 0 for l in range(j)], dtype=np.int64)
            parity = bits[:, :j] @ eta if j else np.zeros(self.dim, dtype=np.int64)
            self.generators.append(Monomial(states ^ (1 << (G - 1 - j)), np.where(parity % 2, -1.0, 1.0)))
        self._cache: dict[Word, Monomial] = {}
        self._identity = Monomial(states, np.ones(self.dim))

    def word_monomial(self, w: Word) -> Monomial:
        if w not in self._cache:
            out = self._identity
            for x in w:
                out = out @ self.generators[self.position[x]]
            self._cache[w] = out
        return self._cache[w]

    def matrix(self, f: SpinElement) -> np.ndarray:
        dtype = complex if any(isinstance(c, complex) and c.imag for _, c in f.items()) else float
        out = np.zeros((self.dim, self.dim), dtype=dtype)
        cols = np.arange(self.dim)
        for w, c in f.items():
            mono = self.word_monomial(w)
            out[mono.target, cols] += c * mono.sign
        return out

    def generator_matrices(self) -> list[np.ndarray]:
        return [g.toarray() for g in self.generators]


def matrix_representation(eps: EpsilonTable, letters: Sequence[Letter] | None = None) -> list[np.ndarray]:
    """Dense matrices of the generators ``letters`` (default: all letters of eps)."""
    return SpinRepresentation(eps, letters).generator_matrices()
