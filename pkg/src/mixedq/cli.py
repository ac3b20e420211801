"""Command-line experiment runner.

Every command takes a structure matrix (``--q-file``, inline ``--q``, or a
seeded random draw), runs one verification suite and writes a table.  CSV
output starts with ``#`` header lines echoing the effective configuration.
Exit codes: 0 pass, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis, fock
from .combinatorics import CapExceededError
from .moments import StructureMatrix, StructureMatrixError, constant, load, moment, random_structure, validate
from .spinmodel import BudgetExceededError, SCHEMES, random_element

COMMANDS = ("moments", "fock-verify", "clt", "hyper", "logsob", "riesz", "poincare")

_P_GRIDS = {"hyper": [1.5, 2.0, 3.0, 4.0], "riesz": [1.5, 2.0, 4.0, 8.0], "poincare": [2.0, 4.0, 8.0, 16.0]}
_SAMPLES = {"hyper": 500, "logsob": 500, "riesz": 50, "poincare": 500}
_G = {"riesz": 4}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    q: object = None
    q_file: str | None = None
    q_max: float = 0.9
    N: int = 2
    D: int = 4
    G: int | None = None
    seed: int = 0
    samples: int | None = None
    i: list = field(default_factory=list)
    max_d: int = 4
    m_grid: list = field(default_factory=lambda: [4, 8, 16, 32])
    seeds: int = 10
    scheme: str = "independent"
    p_grid: list | None = None
    r_grid: list | None = None
    t_offsets: list = field(default_factory=lambda: [0.0, 0.1, 0.5])
    t_grid: list | None = None
    witness_factors: list = field(default_factory=lambda: [1.05, 1.5])
    margin: float = 0.05
    max_len: int = 4
    negative_control: bool = False
    out: str | None = None
    format: str = "csv"

    def resolved(self) -> "RunConfig":
        """Fill command-specific defaults and validate."""
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.G is None:
            self.G = _G.get(self.command, 6)
        if self.samples is None:
            self.samples = _SAMPLES.get(self.command, 100)
        if self.p_grid is None:
            self.p_grid = list(_P_GRIDS.get(self.command, [2.0]))
        if self.r_grid is None:
            self.r_grid = list(self.p_grid)
        if self.N < 1 or self.D < 0 or self.G < 1 or self.samples < 1 or self.seeds < 1:
            raise ConfigError("N, G, samples and seeds must be positive and D non-negative")
        if not 0 <= self.seed < 2**63:
            raise ConfigError("seed must be a non-negative 63-bit integer")
        self.i = [list(map(int, v)) for v in self.i]
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


def _parse_list(text: str, kind=float) -> list:
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixedq", description="Mixed q-Gaussian verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--q-file", help="structure matrix JSON ({'N':..,'entries':[[..]]})")
        p.add_argument("--q", help="inline Q: a number (constant q) or a JSON matrix/object")
        p.add_argument("--q-max", type=float, help="bound for the random Q drawn when no Q is given")
        p.add_argument("--N", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"])
        if name == "moments":
            p.add_argument("--i", action="append", help="label vector, e.g. 1,2,1,2 (repeatable)")
            p.add_argument("--max-d", type=int, help="enumerate all label vectors up to this length")
        if name == "fock-verify":
            p.add_argument("--D", type=int, help="degree cutoff")
            p.add_argument("--negative-control", action="store_true", default=None,
                           help="use annihilators built from a corrupted Q (expected to fail)")
        if name == "clt":
            p.add_argument("--i", action="append", help="label vector (repeatable)")
            p.add_argument("--m-grid")
            p.add_argument("--seeds", type=int, help="number of sign tables per m")
            p.add_argument("--scheme", choices=list(SCHEMES))
        if name in ("hyper", "logsob", "riesz", "poincare"):
            p.add_argument("--G", type=int, help="number of represented generators")
            p.add_argument("--samples", type=int)
            p.add_argument("--max-len", type=int, help="maximal word length of random elements")
        if name in ("hyper", "riesz", "poincare"):
            p.add_argument("--p-grid")
        if name == "hyper":
            p.add_argument("--r-grid")
            p.add_argument("--t-offsets", help="t - t_threshold values for the sampled check")
            p.add_argument("--t-grid", help="absolute t values; overrides offsets and witness factors")
            p.add_argument("--witness-factors", help="e^(-2t) / threshold values for the witness search")
            p.add_argument("--margin", type=float)
    return parser


_LIST_FLAGS = {"m_grid": int, "p_grid": float, "r_grid": float, "t_offsets": float, "t_grid": float, "witness_factors": float}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(base) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base["command"] = args.command
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        if key in _LIST_FLAGS:
            value = _parse_list(value, _LIST_FLAGS[key])
        elif key == "i":
            value = [_parse_list(v, int) for v in value]
        base[key] = value
    try:
        return RunConfig(**base).resolved()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def resolve_Q(cfg: RunConfig) -> StructureMatrix:
    if cfg.q_file is not None:
        return load(cfg.q_file)
    if cfg.q is not None:
        raw = cfg.q
        if isinstance(raw, str):
            try:
                raw = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"cannot parse --q: {exc}") from None
        if isinstance(raw, (int, float)):
            return constant(float(raw), cfg.N)
        if isinstance(raw, dict):
            return StructureMatrix.from_json(raw)
        return validate(raw)
    return random_structure(cfg.N, cfg.q_max, np.random.default_rng(cfg.seed))


# ---------------------------------------------------------------------------
# commands: each returns (rows, summary, passed)


def cmd_moments(cfg: RunConfig, Q: StructureMatrix):
    vectors = [tuple(v) for v in cfg.i] or [
        v for d in range(1, cfg.max_d + 1) for v in itertools.product(range(1, Q.N + 1), repeat=d)
    ]
    rows = [{"i": " ".join(map(str, v)), "d": len(v), "moment": moment(Q, v)} for v in vectors]
    rows.sort(key=lambda r: (r["d"], r["i"]))
    return rows, {"vectors": len(rows)}, True


def _corrupted(Q: StructureMatrix) -> StructureMatrix:
    e = Q.entries.copy()
    return validate(np.where(e >= 0.75, e - 0.25, e + 0.25))


def cmd_fock_verify(cfg: RunConfig, Q: StructureMatrix):
    basis = fock.build_basis(Q.N, cfg.D)
    ann = None
    if cfg.negative_control:
        bad = _corrupted(Q)
        ann = {j: fock.annihilation(bad, j, basis) for j in range(1, Q.N + 1)}
    comm = fock.verify_commutation(Q, basis, ann)
    adj = fock.verify_adjoint(Q, basis)
    rows = []
    for report in (comm, adj):
        bad_keys = {v[:-1] for v in report.violations}
        rows.append({"check": report.name, "key": "max", "residual": report.max_residual, "passed": report.passed})
        for key in sorted(bad_keys):
            rows.append({"check": report.name, "key": " ".join(map(str, key)), "residual": None, "passed": False})
    vectors = [v for d in range(1, cfg.D + 1) for v in itertools.product(range(1, Q.N + 1), repeat=d)]
    if len(vectors) > 500:
        rng = np.random.default_rng(cfg.seed)
        vectors = [vectors[n] for n in sorted(rng.choice(len(vectors), 500, replace=False))]
    wick_ok = True
    for v in vectors:
        res = fock.wick_vector_residual(Q, basis, v)
        ok = res <= 1e-12
        wick_ok &= ok
        rows.append({"check": "wick", "key": " ".join(map(str, v)), "residual": res, "passed": ok})
    summary = {"kernel_dims": adj.notes["kernel_dims"], "wick_vectors": len(vectors)}
    return rows, summary, comm.passed and adj.passed and wick_ok


def cmd_clt(cfg: RunConfig, Q: StructureMatrix):
    rows, summary = [], {}
    seeds = [cfg.seed + n for n in range(cfg.seeds)]
    for v in [tuple(v) for v in cfg.i] or [(1, 1, 1, 1)]:
        study = analysis.clt_convergence_study(Q, v, cfg.m_grid, seeds, cfg.scheme)
        label = " ".join(map(str, v))
        rows += [{"i": label, **r} for r in study.rows]
        summary[label] = {
            "expectation_exponent": study.expectation_exponent,
            "variance_exponent": study.variance_exponent,
            "spearman_rho": study.spearman_rho,
        }
    rows.sort(key=lambda r: (r["i"], r["m"], r["seed"]))
    return rows, summary, True


def _hyper_row(kind: str, rep: analysis.InequalityReport) -> dict:
    return {
        "kind": kind,
        "p": rep.params["p"],
        "r": rep.params["r"],
        "t": rep.params["t"],
        "worst_ratio": rep.worst_ratio,
        "worst_gap": rep.worst_gap,
        "violations": rep.violations,
        "witness": rep.witness,
        "passed": rep.passed,
    }


def cmd_hyper(cfg: RunConfig, Q: StructureMatrix):
    model = analysis.spin_model(Q, cfg.G, cfg.seed)
    rows = []
    for p, r in itertools.product(cfg.p_grid, cfg.r_grid):
        if p > r or p < 1:
            continue
        thr = analysis.hyper_threshold(p, r)
        t_star = -0.5 * math.log(thr)
        if cfg.t_grid is not None:
            plan = []
            for t in cfg.t_grid:
                e = math.exp(-2 * t)
                if e <= thr * (1 + 1e-12):
                    plan.append(("check", t))
                elif p < r and e >= thr * (1 + cfg.margin):
                    plan.append(("witness", t))
        else:
            plan = [("check", t_star + off) for off in cfg.t_offsets if t_star + off >= 0]
            if p < r:
                plan += [("witness", -0.5 * math.log(c * thr)) for c in cfg.witness_factors if c * thr <= 1]
        for kind, t in plan:
            if kind == "check":
                rep = analysis.hypercontractivity_check(model, p, r, t, cfg.samples, cfg.seed, cfg.max_len)
            else:
                rep = analysis.hypercontractivity_witness(model, p, r, t, cfg.margin)
            rows.append(_hyper_row(kind, rep))
    rows.sort(key=lambda r: (r["kind"], r["p"], r["r"], r["t"]))
    passed = all(r["passed"] for r in rows)
    return rows, {"points": len(rows), "failed": sum(not r["passed"] for r in rows)}, passed


def cmd_logsob(cfg: RunConfig, Q: StructureMatrix):
    model = analysis.spin_model(Q, cfg.G, cfg.seed)
    rep = analysis.log_sobolev_check(model, cfg.samples, cfg.seed, cfg.max_len)
    rows = [{"kind": "sample", **r} for r in rep.rows]
    ens = analysis.Ensemble(model, [(), (model.letters[0],)])
    lhs, rhs = analysis.log_sobolev_sides(ens, np.array([[1.0, 0.01]]))
    rows.append({"kind": "two-point", "sample": -1, "lhs": float(lhs[0]), "rhs": float(rhs[0])})
    rows.sort(key=lambda r: (r["kind"], r["sample"]))
    summary = {"worst_ratio": rep.worst_ratio, "violations": rep.violations, "two_point_ratio": float(lhs[0] / rhs[0])}
    return rows, summary, rep.passed


def _random_elements(cfg: RunConfig, model, mean_zero: bool):
    rng = np.random.default_rng(cfg.seed)
    return [
        random_element(model.eps, rng, model.letters, min(cfg.max_len, len(model.letters)), mean_zero=mean_zero)
        for _ in range(cfg.samples)
    ]


def cmd_riesz(cfg: RunConfig, Q: StructureMatrix):
    model = analysis.spin_model(Q, cfg.G, cfg.seed)
    rows = []
    for n, f in enumerate(_random_elements(cfg, model, mean_zero=True)):
        for p in cfg.p_grid:
            low, high = analysis.riesz_ratio(f, p)
            rows.append({"sample": n, "p": p, "low": low, "high": high})
    rows.sort(key=lambda r: (r["p"], r["sample"]))
    summary = {
        str(p): {"max_low": max(r["low"] for r in rows if r["p"] == p), "max_high": max(r["high"] for r in rows if r["p"] == p)}
        for p in cfg.p_grid
    }
    finite = all(0 < r["low"] < math.inf and 0 < r["high"] < math.inf for r in rows)
    exact2 = all(abs(r["high"] - 1) <= 1e-10 for r in rows if r["p"] == 2)
    return rows, summary, finite and exact2


def cmd_poincare(cfg: RunConfig, Q: StructureMatrix):
    model = analysis.spin_model(Q, cfg.G, cfg.seed)
    rows = []
    for n, f in enumerate(_random_elements(cfg, model, mean_zero=False)):
        for p in cfg.p_grid:
            ratio = analysis.poincare_ratio(f, p)
            rows.append({"sample": n, "p": p, "ratio": ratio, "ratio_over_sqrt_p": ratio / math.sqrt(p)})
    rows.sort(key=lambda r: (r["p"], r["sample"]))
    summary = {str(p): max(r["ratio_over_sqrt_p"] for r in rows if r["p"] == p) for p in cfg.p_grid}
    finite = all(math.isfinite(r["ratio"]) for r in rows)
    gap = all(r["ratio"] <= 1 + 1e-10 for r in rows if r["p"] == 2)
    return rows, summary, finite and gap


DISPATCH = {
    "moments": cmd_moments,
    "fock-verify": cmd_fock_verify,
    "clt": cmd_clt,
    "hyper": cmd_hyper,
    "logsob": cmd_logsob,
    "riesz": cmd_riesz,
    "poincare": cmd_poincare,
}


# ---------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(cfg: RunConfig, Q: StructureMatrix, rows: list[dict], summary: dict, passed: bool) -> str:
    if cfg.format == "json":
        doc = {"config": asdict(cfg), "Q": Q.to_json(), "summary": summary, "passed": passed, "rows": rows}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# mixedq {cfg.command}\n")
    buf.write(f"# config {cfg.to_json()}\n")
    buf.write(f"# Q {json.dumps(Q.to_json(), sort_keys=True, separators=(',', ':'))}\n")
    buf.write(f"# summary {json.dumps(summary, sort_keys=True, separators=(',', ':'))}\n")
    buf.write(f"# passed {_cell(passed)}\n")
    if rows:
        header = list(rows[0])
        for r in rows[1:]:
            header += [k for k in r if k not in header]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([_cell(r.get(k)) for k in header])
    return buf.getvalue()


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a resolved config; return (exit code, rendered output)."""
    try:
        Q = resolve_Q(cfg)
        rows, summary, passed = DISPATCH[cfg.command](cfg, Q)
    except (ConfigError, StructureMatrixError, CapExceededError, BudgetExceededError, OSError) as exc:
        return 2, f"error: {exc}\n"
    except ValueError as exc:
        return 2, f"error: {exc}\n"
    return (0 if passed else 1), render(cfg, Q, rows, summary, passed)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code, text = run(cfg)
    if code == 2:
        print(text, end="", file=sys.stderr)
        return code
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
