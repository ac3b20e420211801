"""Truncated mixed q-Fock space over the Wick-word basis.

Vectors are flat arrays over ``FockBasis.words`` (degree 0 first, lexicographic
inside each degree).  Operators keep one dense block per (out-degree, in-degree).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .moments import StructureMatrix, wick_decompose

MAX_BASIS_WORDS = 20_000
GRAM_KERNEL_TOL = 1e-10


class FockCapError(ValueError):
    pass


class GramPositivityError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class FockBasis:
    N: int
    D: int
    words: tuple[tuple[int, ...], ...]
    offsets: tuple[int, ...]
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.words)

    def degree_slice(self, s: int) -> slice:
        return slice(self.offsets[s], self.offsets[s + 1])

    def degree_words(self, s: int) -> np.ndarray:
        """Words of degree s as an (N^s, s) array of 1-based labels."""
        if s == 0:
            return np.zeros((1, 0), dtype=int)
        return np.array(self.words[self.degree_slice(s)], dtype=int)

    def word_index(self, i: Sequence[int]) -> int:
        return self.index[tuple(i)]

    def basis_vector(self, i: Sequence[int]) -> np.ndarray:
        v = np.zeros(self.size)
        v[self.word_index(i)] = 1.0
        return v

    def vacuum(self) -> np.ndarray:
        return self.basis_vector(())


def build_basis(N: int, D: int, cap: int = MAX_BASIS_WORDS) -> FockBasis:
    if N < 1 or D < 0:
        raise ValueError("need N >= 1 and D >= 0")
    total = sum(N**s for s in range(D + 1))
    if total > cap:
        raise FockCapError(f"basis with N={N}, D={D} has {total} words, cap is {cap}")
    words: list[tuple[int, ...]] = []
    offsets = [0]
    for s in range(D + 1):
        words.extend(itertools.product(range(1, N + 1), repeat=s))
        offsets.append(len(words))
    words_t = tuple(words)
    return FockBasis(N, D, words_t, tuple(offsets), {w: n for n, w in enumerate(words_t)})


def _word_codes(words: np.ndarray, N: int) -> np.ndarray:
    """Lexicographic rank of each row within its degree (labels 1..N)."""
    s = words.shape[1]
    if s == 0:
        return np.zeros(words.shape[0], dtype=int)
    weights = N ** np.arange(s - 1, -1, -1)
    return (words - 1) @ weights


@dataclass(eq=False)
class FockOperator:
    """Degree-graded operator: ``blocks[(out_deg, in_deg)]`` is an (N^out, N^in) matrix."""

    basis: FockBasis
    blocks: dict[tuple[int, int], np.ndarray]

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        out: dict[tuple[int, int], np.ndarray] = {}
        for (a, b), x in self.blocks.items():
            for (b2, c), y in other.blocks.items():
                if b == b2:
                    prod = x @ y
                    out[(a, c)] = out[(a, c)] + prod if (a, c) in out else prod
        return FockOperator(self.basis, out)

    def __add__(self, other: "FockOperator") -> "FockOperator":
        out = {k: v.copy() for k, v in self.blocks.items()}
        for k, v in other.blocks.items():
            out[k] = out[k] + v if k in out else v.copy()
        return FockOperator(self.basis, out)

    def __mul__(self, scalar: float) -> "FockOperator":
        return FockOperator(self.basis, {k: scalar * v for k, v in self.blocks.items()})

    __rmul__ = __mul__

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return self + (-1.0) * other

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.basis.size)
        for (a, b), x in self.blocks.items():
            out[self.basis.degree_slice(a)] += x @ v[self.basis.degree_slice(b)]
        return out

    def block(self, out_deg: int, in_deg: int) -> np.ndarray:
        b = self.basis
        shape = (b.N**out_deg, b.N**in_deg)
        return self.blocks.get((out_deg, in_deg), np.zeros(shape))

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.basis.size, self.basis.size))
        for (a, b), x in self.blocks.items():
            out[self.basis.degree_slice(a), self.basis.degree_slice(b)] += x
        return out


def identity(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, {(s, s): np.eye(basis.N**s) for s in range(basis.D + 1)})


@dataclass(frozen=True, eq=False)
class GramMatrix:
    blocks: tuple[np.ndarray, ...]
    min_eigenvalues: tuple[float, ...]
    kernel_dims: tuple[int, ...]

    def inner(self, basis: FockBasis, u: np.ndarray, v: np.ndarray) -> float:
        return float(sum(u[basis.degree_slice(s)] @ g @ v[basis.degree_slice(s)] for s, g in enumerate(self.blocks)))

    def toarray(self) -> np.ndarray:
        n = sum(g.shape[0] for g in self.blocks)
        out = np.zeros((n, n))
        start = 0
        for g in self.blocks:
            out[start : start + g.shape[0], start : start + g.shape[0]] = g
            start += g.shape[0]
        return out


def _inversion_masks(s: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(s))), dtype=int).reshape(-1, s)
    masks = perms[:, :, None] > perms[:, None, :]
    upper = np.triu(np.ones((s, s), dtype=bool), k=1)
    return perms, masks & upper


def gram_block(Q: StructureMatrix, basis: FockBasis, s: int) -> np.ndarray:
    """Degree-s block of <w(i), w(j)>, summing over all permutations at once.

    For a word i and permutation pi the partner word is j with j[pi(k)] = i[k];
    the weight is the product of q(i_k, i_l) over inversions k < l, pi(k) > pi(l).
    """
    N = basis.N
    if s == 0:
        return np.ones((1, 1))
    words = basis.degree_words(s)
    perms, masks = _inversion_masks(s)
    out = np.zeros((N**s, N**s))
    weights_pos = N ** np.arange(s - 1, -1, -1)
    inv_perm = np.argsort(perms, axis=1)
    for row, i in enumerate(words):
        qpair = Q.entries[np.ix_(i - 1, i - 1)]
        w = np.prod(np.where(masks, qpair[None, :, :], 1.0), axis=(1, 2))
        partners = i[inv_perm] - 1
        cols = partners @ weights_pos
        np.add.at(out[row], cols, w)
    return out


def _gram_eig_report(block: np.ndarray) -> tuple[float, int]:
    ev = np.linalg.eigvalsh(block)
    return float(ev.min()), int(np.sum(np.abs(ev) <= GRAM_KERNEL_TOL))


def gram(Q: StructureMatrix, basis: FockBasis, check: bool = True) -> GramMatrix:
    """Per-degree Gram blocks of the Wick inner product.

    Raises GramPositivityError if some eigenvalue is below -1e-10 while all
    |q_ij| < 1, which can only come from a wrong crossing convention.
    """
    if Q.N != basis.N:
        raise ValueError(f"Q is {Q.N}x{Q.N} but basis has N={basis.N}")
    blocks, mins, kernels = [], [], []
    for s in range(basis.D + 1):
        g = gram_block(Q, basis, s)
        lo, ker = _gram_eig_report(g)
        if check and lo < -GRAM_KERNEL_TOL and np.abs(Q.entries).max() < 1:
            raise GramPositivityError(f"degree-{s} Gram block has eigenvalue {lo:.3e}")
        blocks.append(g)
        mins.append(lo)
        kernels.append(ker)
    return GramMatrix(tuple(blocks), tuple(mins), tuple(kernels))


def creation(j: int, basis: FockBasis) -> FockOperator:
    """c_j w(i) = w(j, i); degree D is mapped to 0."""
    if not 1 <= j <= basis.N:
        raise ValueError(f"generator {j} outside 1..{basis.N}")
    N = basis.N
    blocks = {}
    for s in range(basis.D):
        blk = np.zeros((N ** (s + 1), N**s))
        blk[(j - 1) * N**s + np.arange(N**s), np.arange(N**s)] = 1.0
        blocks[(s + 1, s)] = blk
    return FockOperator(basis, blocks)


def annihilation(Q: StructureMatrix, j: int, basis: FockBasis) -> FockOperator:
    """a_j w(i) = sum_l [i_l = j] prod_{r<l} q(i_r, j) w(i minus i_l)."""
    if not 1 <= j <= basis.N:
        raise ValueError(f"generator {j} outside 1..{basis.N}")
    N = basis.N
    blocks = {}
    for s in range(1, basis.D + 1):
        words = basis.degree_words(s)
        blk = np.zeros((N ** (s - 1), N**s))
        cols = np.arange(N**s)
        qrow = Q.entries[:, j - 1]
        for l in range(s):
            hit = words[:, l] == j
            if not hit.any():
                continue
            coeff = np.prod(qrow[words[hit, :l] - 1], axis=1) if l else np.ones(hit.sum())
            rest = np.delete(words[hit], l, axis=1)
            np.add.at(blk, (_word_codes(rest, N), cols[hit]), coeff)
        blocks[(s - 1, s)] = blk
    return FockOperator(basis, blocks)


def generator(Q: StructureMatrix, j: int, basis: FockBasis) -> FockOperator:
    return creation(j, basis) + annihilation(Q, j, basis)


def number_operator(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, {(s, s): s * np.eye(basis.N**s) for s in range(basis.D + 1)})


def ou_semigroup(basis: FockBasis, t: float) -> FockOperator:
    """T_t w(i) = exp(-t |i|) w(i)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return FockOperator(basis, {(s, s): math.exp(-t * s) * np.eye(basis.N**s) for s in range(basis.D + 1)})


@dataclass
class VerificationReport:
    name: str
    tolerance: float
    max_residual: float = 0.0
    violations: list[tuple] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, key: tuple, residual: float) -> None:
        self.max_residual = max(self.max_residual, residual)
        if residual > self.tolerance:
            self.violations.append(key + (residual,))


def verify_commutation(
    Q: StructureMatrix,
    basis: FockBasis,
    annihilators: dict[int, FockOperator] | None = None,
    tol: float = 1e-12,
) -> VerificationReport:
    """Residual of a_k c_j - q(j,k) c_j a_k - delta_jk on degrees 0..D-1.

    ``annihilators`` substitutes custom a_j (used for negative controls).
    Violations are recorded as (j, k, degree, residual).
    """
    if basis.D < 2:
        raise ValueError("commutation check needs D >= 2")
    N = basis.N
    cs = {j: creation(j, basis) for j in range(1, N + 1)}
    ann = annihilators or {j: annihilation(Q, j, basis) for j in range(1, N + 1)}
    report = VerificationReport("commutation", tol)
    for j in range(1, N + 1):
        for k in range(1, N + 1):
            lhs = ann[k] @ cs[j]
            rhs = cs[j] @ ann[k]
            for s in range(basis.D):
                r = lhs.block(s, s) - Q.q(j, k) * rhs.block(s, s)
                if j == k:
                    r = r - np.eye(N**s)
                report.record((j, k, s), float(np.abs(r).max()))
    return report


def verify_adjoint(Q: StructureMatrix, basis: FockBasis, G: GramMatrix | None = None, tol: float = 1e-12) -> VerificationReport:
    """Check c_j^T G_{s+1} = G_s a_j for s <= D-1.

    This is adjointness for the Gram form, so it is also the statement on
    the quotient by the Gram kernel when some |q_ij| = 1.
    """
    G = G or gram(Q, basis, check=False)
    report = VerificationReport("adjoint", tol, notes={"kernel_dims": list(G.kernel_dims)})
    for j in range(1, basis.N + 1):
        c = creation(j, basis)
        a = annihilation(Q, j, basis)
        for s in range(basis.D):
            lhs = c.block(s + 1, s).T @ G.blocks[s + 1]
            rhs = G.blocks[s] @ a.block(s, s + 1)
            scale = max(1.0, float(np.abs(G.blocks[s + 1]).max()))
            report.record((j, s), float(np.abs(lhs - rhs).max()) / scale)
    return report


def apply_word(Q: StructureMatrix, basis: FockBasis, i: Sequence[int], v: np.ndarray | None = None) -> np.ndarray:
    """s_{i_1} ... s_{i_d} v (v defaults to the vacuum)."""
    v = basis.vacuum() if v is None else v
    gens = {j: generator(Q, j, basis) for j in set(i)}
    for j in reversed(i):
        v = gens[j].apply(v)
    return v


def vacuum_expectation(Q: StructureMatrix, basis: FockBasis, i: Sequence[int]) -> float:
    if len(i) > basis.D:
        raise ValueError(f"|i|={len(i)} exceeds the cutoff D={basis.D}")
    return float(apply_word(Q, basis, i)[0])


def wick_vector_residual(Q: StructureMatrix, basis: FockBasis, i: Sequence[int]) -> float:
    if len(i) > basis.D:
        raise ValueError(f"|i|={len(i)} exceeds the cutoff D={basis.D}")
    lhs = apply_word(Q, basis, i)
    rhs = np.zeros(basis.size)
    for term in wick_decompose(Q, i).terms:
        rhs[basis.word_index(term.reduced)] += term.coefficient
    return float(np.abs(lhs - rhs).max())


def wick_vector_check(Q: StructureMatrix, basis: FockBasis, i: Sequence[int], tol: float = 1e-12) -> bool:
    """s_{i_1}...s_{i_d} Omega equals sum_sigma f_sigma(i) w(i_np)."""
    return wick_vector_residual(Q, basis, i) <= tol


def dump_blocks_csv(path: str | Path, blocks: dict[tuple[int, int], np.ndarray] | Iterable[np.ndarray], label: str = "block") -> None:
    """Write blocks row-major, one CSV row per matrix row, tagged by degree."""
    if not isinstance(blocks, dict):
        blocks = {(s, s): b for s, b in enumerate(blocks)}
    with open(path, "w", newline="") as fh:
        fh.write(f"# {label}: columns are out_degree,in_degree,row,values...\n")
        writer = csv.writer(fh)
        for (a, b) in sorted(blocks):
            for r, row in enumerate(np.asarray(blocks[(a, b)])):
                writer.writerow([a, b, r] + [repr(float(x)) for x in row])
