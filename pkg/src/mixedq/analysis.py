"""Normalised Schatten norms on the spin model and the functional-inequality verifiers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import spearmanr

from .moments import StructureMatrix, moment
from .spinmodel import (
    EpsilonTable,
    Letter,
    SpinElement,
    SpinRepresentation,
    clt_statistic,
    conditional_expectation,
    derivation,
    gradient_form,
    sample_epsilon,
    sqrt_number_operator_spin,
)

INEQUALITY_SLACK = 1e-10
IDENTITY_TOL = 1e-12
DEFAULT_MAX_LEN = 4


# ---------------------------------------------------------------------------
# norms


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")


def _norms_from_squares(lam: np.ndarray, p: float) -> np.ndarray:
    """Normalised Schatten p-norms from eigenvalues of f*f (last axis)."""
    lam = np.clip(lam, 0.0, None)
    if math.isinf(p):
        return np.sqrt(lam.max(axis=-1))
    return np.mean(lam ** (p / 2), axis=-1) ** (1 / p)


def squared_spectrum(f: np.ndarray) -> np.ndarray:
    """Eigenvalues of f* f; works on stacks of matrices."""
    fh = np.conj(np.swapaxes(f, -1, -2))
    return np.linalg.eigvalsh(fh @ f)


def schatten_norm(f: np.ndarray, p: float) -> float:
    """(tr|f|^p)^{1/p} with tr the normalised trace (tr I = 1)."""
    _check_p(p)
    return float(_norms_from_squares(squared_spectrum(np.asarray(f)), p))


def psd_root_norm(h: np.ndarray, p: float) -> float:
    """||h^{1/2}||_p for a positive semidefinite Hermitian h."""
    _check_p(p)
    lam = np.linalg.eigvalsh((h + np.conj(h.T)) / 2)
    return float(_norms_from_squares(lam, p))


# ---------------------------------------------------------------------------
# random ensembles on a represented spin model


def spin_model(Q: StructureMatrix, G: int, seed: int, m: int | None = None) -> SpinRepresentation:
    """Represent G generators of a freshly sampled spin model over Q.

    Letters are taken column by column, (1,1), (2,1), ..., (N,1), (1,2), ... so
    that every row of Q is used once G >= N.
    """
    m = m if m is not None else max(1, math.ceil(G / Q.N))
    eps = sample_epsilon(Q, Q.N, m, seed)
    letters = [(i, k) for k in range(1, m + 1) for i in range(1, Q.N + 1)][:G]
    return SpinRepresentation(eps, letters)


def reduced_words(letters: Sequence[Letter], max_len: int) -> list[tuple[Letter, ...]]:
    letters = sorted(letters)
    return [w for r in range(max_len + 1) for w in itertools.combinations(letters, r)]


class Ensemble:
    """Matrices of many elements sharing one word list, built in one pass."""

    def __init__(self, rep: SpinRepresentation, words: Sequence[tuple[Letter, ...]]):
        self.rep = rep
        self.words = list(words)
        self.lengths = np.array([len(w) for w in self.words])
        monos = [rep.word_monomial(w) for w in self.words]
        self.targets = np.stack([mo.target for mo in monos])
        self.signs = np.stack([mo.sign for mo in monos])

    def matrices(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.atleast_2d(coeffs)
        dim = self.rep.dim
        out = np.zeros((coeffs.shape[0], dim, dim), dtype=np.result_type(coeffs, float))
        cols = np.arange(dim)
        for n in range(len(self.words)):
            out[:, self.targets[n], cols] += coeffs[:, n, None] * self.signs[n][None, :]
        return out

    def element(self, coeffs: np.ndarray) -> SpinElement:
        return SpinElement(self.rep.eps, dict(zip(self.words, coeffs)))


def gaussian_coefficients(n_samples: int, n_words: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n_samples, n_words))


# ---------------------------------------------------------------------------
# reports


@dataclass
class InequalityReport:
    """Outcome of one inequality suite at one parameter point."""

    name: str
    params: dict
    samples: int
    seed: int | None
    worst_ratio: float
    worst_gap: float
    violations: int
    tolerance: float
    witness: str = ""
    passed: bool = True
    rows: list[dict] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "name": self.name,
            **self.params,
            "samples": self.samples,
            "seed": self.seed,
            "worst_ratio": self.worst_ratio,
            "worst_gap": self.worst_gap,
            "violations": self.violations,
            "tolerance": self.tolerance,
            "witness": self.witness,
            "passed": self.passed,
        }


def hyper_threshold(p: float, r: float) -> float:
    """(p - 1) / (r - 1), the largest admissible e^{-2t}."""
    if r == 1:
        return 1.0
    return (p - 1) / (r - 1)


def hypercontractivity_check(
    rep: SpinRepresentation,
    p: float,
    r: float,
    t: float,
    samples: int = 500,
    seed: int = 0,
    max_len: int = DEFAULT_MAX_LEN,
    slack: float = INEQUALITY_SLACK,
) -> InequalityReport:
    """Sampled check of ||T_t f||_r <= ||f||_p, plus attainment at f = 1."""
    if not 1 <= p <= r or math.isinf(r):
        raise ValueError(f"need 1 <= p <= r < inf, got p={p}, r={r}")
    if t < 0:
        raise ValueError("t must be non-negative")
    thr = hyper_threshold(p, r)
    if math.exp(-2 * t) > thr * (1 + 1e-12):
        raise ValueError(f"e^(-2t)={math.exp(-2 * t):.6g} exceeds the admissible {thr:.6g}")
    ens = Ensemble(rep, reduced_words(rep.letters, max_len))
    coeffs = gaussian_coefficients(samples, len(ens.words), seed)
    damp = np.exp(-t * ens.lengths)
    lhs = _norms_from_squares(squared_spectrum(ens.matrices(coeffs * damp)), r)
    rhs = _norms_from_squares(squared_spectrum(ens.matrices(coeffs)), p)
    gaps = lhs - rhs
    allowed = slack * np.maximum(1.0, rhs)
    bad = gaps > allowed
    one = np.zeros((1, len(ens.words)))
    one[0, 0] = 1.0
    unit_gap = abs(
        _norms_from_squares(squared_spectrum(ens.matrices(one * damp)), r)[0]
        - _norms_from_squares(squared_spectrum(ens.matrices(one)), p)[0]
    )
    worst = int(np.argmax(gaps / rhs))
    rows = [
        {"p": p, "r": r, "t": t, "sample": n, "lhs": float(lhs[n]), "rhs": float(rhs[n])}
        for n in range(samples)
    ]
    return InequalityReport(
        "hypercontractivity",
        {"p": p, "r": r, "t": t, "G": len(rep.letters)},
        samples,
        seed,
        float((lhs / rhs)[worst]),
        float(gaps.max()),
        int(bad.sum()),
        slack,
        f"sample {worst}; identity gap {unit_gap:.3g}",
        bool(not bad.any() and unit_gap <= IDENTITY_TOL),
        rows,
    )


DEFAULT_S_GRID = tuple(np.concatenate([np.geomspace(1e-3, 1.0, 61), -np.geomspace(1e-3, 1.0, 61)]))


def hypercontractivity_witness(
    rep: SpinRepresentation,
    p: float,
    r: float,
    t: float,
    margin: float = 0.05,
    s_grid: Sequence[float] = DEFAULT_S_GRID,
    tol: float = 1e-13,
) -> InequalityReport:
    """Search f = 1 + s x_1 for a violation of ||T_t f||_r <= ||f||_p beyond the threshold."""
    if not 1 <= p <= r or math.isinf(r):
        raise ValueError(f"need 1 <= p <= r < inf, got p={p}, r={r}")
    if p == r:
        raise ValueError("p == r: the threshold is 1 and T_t is a contraction, no witness exists")
    thr = hyper_threshold(p, r)
    if math.exp(-2 * t) < thr * (1 + margin) * (1 - 1e-12):
        raise ValueError(f"e^(-2t)={math.exp(-2 * t):.6g} is within margin {margin} of the threshold {thr:.6g}")
    ens = Ensemble(rep, [(), (rep.letters[0],)])
    s = np.asarray(s_grid, dtype=float)
    coeffs = np.stack([np.ones_like(s), s], axis=1)
    damp = np.exp(-t * ens.lengths)
    lhs = _norms_from_squares(squared_spectrum(ens.matrices(coeffs * damp)), r)
    rhs = _norms_from_squares(squared_spectrum(ens.matrices(coeffs)), p)
    gaps = lhs - rhs
    best = int(np.argmax(gaps))
    found = gaps[best] > tol
    return InequalityReport(
        "hypercontractivity_witness",
        {"p": p, "r": r, "t": t, "margin": margin},
        len(s),
        None,
        float(lhs[best] / rhs[best]),
        float(gaps[best]),
        int((gaps > tol).sum()),
        tol,
        f"s={s[best]:.6g}" if found else "no witness on grid",
        bool(found),
        [{"s": float(s[n]), "lhs": float(lhs[n]), "rhs": float(rhs[n])} for n in range(len(s))],
    )


def _entropy_gap(lam: np.ndarray) -> np.ndarray:
    """tr(|f|^2 ln|f|^2) - ||f||_2^2 ln ||f||_2^2 from eigenvalues of f*f."""
    lam = np.clip(lam, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(lam > 0, lam * np.log(lam), 0.0)
    norm2 = lam.mean(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(norm2 > 0, norm2 * np.log(norm2), 0.0)
    return ent.mean(axis=-1) - base


def log_sobolev_sides(ens: Ensemble, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(entropy side, 2 tr(f A f*)) for each row of coefficients."""
    coeffs = np.atleast_2d(coeffs)
    lhs = _entropy_gap(squared_spectrum(ens.matrices(coeffs)))
    rhs = 2 * (np.abs(coeffs) ** 2 * ens.lengths).sum(axis=1)
    return lhs, rhs


def log_sobolev_check(
    rep: SpinRepresentation,
    samples: int = 500,
    seed: int = 0,
    max_len: int = DEFAULT_MAX_LEN,
    slack: float = 1e-8,
) -> InequalityReport:
    ens = Ensemble(rep, reduced_words(rep.letters, max_len))
    coeffs = gaussian_coefficients(samples, len(ens.words), seed)
    lhs, rhs = log_sobolev_sides(ens, coeffs)
    gaps = lhs - rhs
    bad = gaps > slack * np.maximum(1.0, rhs)
    worst = int(np.argmax(lhs / rhs))
    return InequalityReport(
        "log_sobolev",
        {"G": len(rep.letters)},
        samples,
        seed,
        float(lhs[worst] / rhs[worst]),
        float(gaps.max()),
        int(bad.sum()),
        slack,
        f"sample {worst}",
        bool(not bad.any()),
        [{"sample": n, "lhs": float(lhs[n]), "rhs": float(rhs[n])} for n in range(samples)],
    )


# ---------------------------------------------------------------------------
# Riesz, Khintchine, Poincare


class RieszRatio(NamedTuple):
    """low = ||A^{1/2} f||_p / ||delta f||_p, high = ||delta f||_p / ||A^{1/2} f||_p.

    Each is an empirical lower bound for the constant on its side of the
    two-sided Riesz inequality.
    """

    low: float
    high: float


def _doubled_representation(f: SpinElement) -> SpinRepresentation:
    N = f.eps.rows
    base = f.letters()
    return SpinRepresentation(f.eps.doubled(), base + [(i + N, k) for i, k in base])


def riesz_ratio(f: SpinElement, p: float, tol: float = 1e-12) -> RieszRatio:
    _check_p(p)
    if abs(f.mean()) > tol:
        raise ValueError("f must have zero mean")
    rep = _doubled_representation(f)
    d = schatten_norm(rep.matrix(derivation(f)), p)
    a = schatten_norm(rep.matrix(sqrt_number_operator_spin(f).on(rep.eps)), p)
    return RieszRatio(a / d, d / a)


def _upper_letter_span(g: SpinElement) -> int:
    """Base row count N for an element of the doubled algebra; checks one upper letter per word."""
    N = g.eps.rows // 2
    for w, _ in g.items():
        if sum(1 for x in w if x[0] > N) != 1:
            raise ValueError(f"word {w} does not have exactly one letter with row > {N}")
    return N


def khintchine_ratio(g: SpinElement, p: float) -> float:
    """||g||_p / max(||E(g*g)^{1/2}||_p, ||E(gg*)^{1/2}||_p) for g spanned by one-upper-letter words."""
    if p < 2:
        raise ValueError("p must be >= 2")
    N = _upper_letter_span(g)
    rep = SpinRepresentation(g.eps, g.letters())
    gs = g.adjoint()
    col = conditional_expectation(gs * g, N).on(g.eps)
    row = conditional_expectation(g * gs, N).on(g.eps)
    rhs = max(psd_root_norm(rep.matrix(col), p), psd_root_norm(rep.matrix(row), p))
    return schatten_norm(rep.matrix(g), p) / rhs


def gradient_matrix(f: SpinElement, g: SpinElement | None = None, rep: SpinRepresentation | None = None) -> np.ndarray:
    g = f if g is None else g
    rep = rep or SpinRepresentation(f.eps, sorted(set(f.letters()) | set(g.letters())))
    return rep.matrix(gradient_form(f, g))


def gradient_square_matrix(f: SpinElement, rep: SpinRepresentation) -> np.ndarray:
    """Gamma(f, f) as sum_j (d_j f)* (d_j f), d_j f being the part of f whose words contain letter j.

    Equivalent to gradient_form(f, f) because Gamma(x_B, x_C) = |B n C| x_B* x_C.
    """
    out = np.zeros((rep.dim, rep.dim), dtype=complex)
    for x in f.letters():
        part = rep.matrix(SpinElement(f.eps, {w: c for w, c in f.items() if x in w}))
        out += np.conj(part.T) @ part
    return out if np.iscomplexobj(rep.matrix(f)) else out.real


def poincare_ratio(f: SpinElement, p: float) -> float:
    """||f - tau(f)||_p / max(||Gamma(f,f)^{1/2}||_p, ||Gamma(f*,f*)^{1/2}||_p)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    rep = SpinRepresentation(f.eps, f.letters())
    centred = f - f.mean()
    rhs = max(psd_root_norm(gradient_square_matrix(f, rep), p), psd_root_norm(gradient_square_matrix(f.adjoint(), rep), p))
    return schatten_norm(rep.matrix(centred), p) / rhs


# ---------------------------------------------------------------------------
# CLT convergence


@dataclass
class ConvergenceStudy:
    rows: list[dict]
    expectation_exponent: float
    variance_exponent: float
    variances: dict[int, float]
    spearman_rho: float


def _loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    pts = [(math.log(x), math.log(y)) for x, y in zip(xs, ys) if y > 0]
    if len(pts) < 2:
        return float("nan")
    a = np.array(pts)
    return float(np.polyfit(a[:, 0], a[:, 1], 1)[0])


def clt_convergence_study(
    Q: StructureMatrix,
    i: Sequence[int],
    m_grid: Sequence[int],
    seeds: Sequence[int],
    scheme: str = "independent",
    budget: int | None = None,
) -> ConvergenceStudy:
    """Exact-mode values per (m, seed) against the expectation-mode value and the moment."""
    i = tuple(i)
    target = moment(Q, i)
    rows = []
    variances = {}
    exp_err = []
    for m in m_grid:
        expect = clt_statistic(i, m, Q=Q, mode="expectation")
        exp_err.append(abs(expect - target))
        vals = []
        for seed in seeds:
            eps = sample_epsilon(Q, Q.N, m, seed, scheme)
            kw = {} if budget is None else {"budget": budget}
            v = clt_statistic(i, m, eps=eps, mode="exact", **kw)
            vals.append(v)
            rows.append(
                {
                    "m": m,
                    "seed": seed,
                    "exact": v,
                    "expectation": expect,
                    "moment": target,
                    "exact_error": abs(v - target),
                    "expectation_error": abs(expect - target),
                }
            )
        variances[m] = float(np.var(vals, ddof=1)) if len(vals) > 1 else 0.0
    ms = list(m_grid)
    vs = [variances[m] for m in ms]
    rho = float(spearmanr(ms, vs)[0]) if len(ms) > 1 and len(set(vs)) > 1 else float("nan")
    rows.sort(key=lambda row: (row["m"], row["seed"]))
    return ConvergenceStudy(rows, _loglog_slope(ms, exp_err), _loglog_slope(ms, vs), variances, rho)
