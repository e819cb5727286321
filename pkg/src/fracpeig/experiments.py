"""Experiment configs, run bundles and the four command drivers.

A run bundle is a directory holding ``eigenpairs.json`` (or
``monotonicity.json`` / ``verify.json``), one CSV per eigenfunction and a
``manifest.json``. Nothing time- or host-dependent goes into any file, so
reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .eigensolvers import (
    EigenPair,
    SolverConfig,
    check_simplicity,
    compute_monotonicity_constant,
    p2_oracle_spectrum,
    solve_lambda1,
    solve_lambda2_path,
)
from .energy import (
    WeightField,
    gagliardo_energy,
    gagliardo_gradient,
    weighted_lp_energy,
    weighted_lp_gradient,
)
from .grid import Domain, DomainSpec, build_grid, spec_from_mapping
from .inequalities import run_all_sweeps
from .kernel import FractionalKernel, assemble_kernel, check_parameters

log = logging.getLogger(__name__)

OUTPUT_ENV = "FRACPEIG_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"
WEIGHT_KINDS = ("constant", "step", "singular", "csv")
_DOMAIN_KEYS = {"shape", "n", "cells_per_axis", "box_lo", "box_hi"}

# Test hook: ``verify`` passes its kernel through this before checking it.
kernel_hook: Callable[[FractionalKernel], FractionalKernel] | None = None


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


# -- config ------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    domain: DomainSpec = field(default_factory=lambda: DomainSpec.interval(0.0, 1.0, 32))
    s: float = 0.4
    p: float = 2.0
    weight: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    weight_tilde: dict | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str | None = None
    report_format: str = "json"
    oracle_count: int = 2
    base_dir: Path = field(default=Path("."), repr=False)

    @classmethod
    def from_mapping(cls, data: dict, base_dir=".") -> "ExperimentConfig":
        cfg = cls(base_dir=Path(base_dir))
        known = {"domain", "problem", "weight", "weight_tilde", "solver", "output", "oracle"}
        for key in data:
            if key not in known:
                raise ConfigError(key, f"unknown section (expected one of {sorted(known)})")
        if "domain" in data:
            for key in data["domain"]:
                if key not in _DOMAIN_KEYS:
                    raise ConfigError(f"domain.{key}", f"unknown field (expected one of {sorted(_DOMAIN_KEYS)})")
            try:
                cfg.domain = spec_from_mapping(dict(data["domain"]))
            except (TypeError, ValueError) as exc:
                raise ConfigError("domain", str(exc)) from exc
        problem = data.get("problem", {})
        for key in problem:
            if key not in ("s", "p"):
                raise ConfigError(f"problem.{key}", "unknown field")
        cfg.s = _number(problem, "s", cfg.s, "problem")
        cfg.p = _number(problem, "p", cfg.p, "problem")
        if "weight" in data:
            cfg.weight = dict(data["weight"])
        if "weight_tilde" in data:
            cfg.weight_tilde = dict(data["weight_tilde"])
        overrides = dict(data.get("solver", {}))
        names = {f.name for f in dataclasses.fields(SolverConfig)}
        for key in overrides:
            if key not in names:
                raise ConfigError(f"solver.{key}", "unknown field")
        try:
            cfg.solver = SolverConfig(**overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError("solver", str(exc)) from exc
        out = data.get("output", {})
        cfg.output_dir = out.get("dir")
        cfg.report_format = out.get("format", "json")
        cfg.oracle_count = int(data.get("oracle", {}).get("count", 2))
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("--config", f"not valid TOML: {exc}") from exc
        return cls.from_mapping(data, base_dir=path.parent)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, solver=self.solver.with_seed(seed))

    def as_manifest(self) -> dict:
        d = self.domain
        out = {
            "domain": {
                "shape": d.shape,
                "box_lo": list(d.box_lo),
                "box_hi": list(d.box_hi),
                "cells_per_axis": list(d.cells_per_axis),
            },
            "s": self.s,
            "p": self.p,
            "weight": dict(self.weight),
            "solver": {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self.solver).items()},
            "seed": self.solver.seed,
            "version": __version__,
        }
        if self.weight_tilde is not None:
            out["weight_tilde"] = dict(self.weight_tilde)
        return out

    def digest(self) -> str:
        text = json.dumps(self.as_manifest(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def _number(table: dict, key: str, default: float, section: str) -> float:
    if key not in table:
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}", f"expected a number, got {value!r}")
    return float(value)


def build_weight(domain: Domain, spec: dict, s: float, p: float, base_dir=Path("."), where="weight") -> WeightField:
    """Construct a :class:`WeightField` from a config table, naming the bad field on error."""
    spec = dict(spec)
    kind = spec.pop("kind", "constant")
    allowed = {
        "constant": {"value"},
        "step": {"threshold", "left", "right", "axis"},
        "singular": {"alpha", "coeff", "offset", "center", "samples"},
        "csv": {"path"},
    }
    if kind not in allowed:
        raise ConfigError(f"{where}.kind", f"unknown weight kind {kind!r}; expected one of {WEIGHT_KINDS}")
    for key in spec:
        if key not in allowed[kind]:
            raise ConfigError(f"{where}.{key}", f"not a field of a {kind} weight")
    try:
        if kind == "constant":
            return WeightField.constant(domain, spec.get("value", 1.0))
        if kind == "step":
            return WeightField.step(domain, **spec)
        if kind == "singular":
            if "alpha" not in spec:
                raise ConfigError(f"{where}.alpha", "singular weight needs alpha")
            return WeightField.singular(domain, s, p, **spec)
        if "path" not in spec:
            raise ConfigError(f"{where}.path", "csv weight needs a path")
        return WeightField.from_csv(domain, Path(base_dir) / spec["path"])
    except ConfigError:
        raise
    except (OSError, TypeError, ValueError) as exc:
        field_path = f"{where}.alpha" if "integrability" in str(exc) else where
        raise ConfigError(field_path, str(exc)) from exc


@dataclass
class Problem:
    config: ExperimentConfig
    domain: Domain
    kernel: FractionalKernel
    weight: WeightField
    weight_tilde: WeightField | None = None


def prepare(config: ExperimentConfig, need_tilde: bool = False) -> Problem:
    """Validate everything, then assemble. Raises :class:`ConfigError` before any heavy work."""
    if config.report_format not in ("json", "csv"):
        raise ConfigError("output.format", f"expected 'json' or 'csv', got {config.report_format!r}")
    try:
        domain = build_grid(config.domain)
    except ValueError as exc:
        raise ConfigError("domain", str(exc)) from exc
    try:
        check_parameters(domain.dim, config.s, config.p)
    except ValueError as exc:
        raise ConfigError("problem", str(exc)) from exc
    weight = build_weight(domain, config.weight, config.s, config.p, config.base_dir)
    tilde = None
    if need_tilde:
        if config.weight_tilde is None:
            raise ConfigError("weight_tilde", "monotonicity needs a [weight_tilde] table")
        tilde = build_weight(domain, config.weight_tilde, config.s, config.p, config.base_dir, "weight_tilde")
        bad = np.nonzero(weight.values > tilde.values)[0]
        if bad.size:
            raise ConfigError("weight_tilde", f"need m <= m_tilde at every cell; fails at {bad.size} cells (first {int(bad[0])})")
    if config.oracle_count < 1:
        raise ConfigError("oracle.count", "must be >= 1")
    kernel = assemble_kernel(domain, config.s, config.p)
    return Problem(config, domain, kernel, weight, tilde)


# -- output ------------------------------------------------------------------

def _clean(obj: Any):
    # JSON-safe, deterministic: numpy scalars to Python, non-finite to None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def write_eigenfunction(path: Path, domain: Domain, u: np.ndarray) -> None:
    names = ["x", "y"][: domain.dim]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, "value"])
        for c, v in zip(domain.cell_centers, u):
            writer.writerow([*(repr(float(x)) for x in c), repr(float(v))])


def write_pairs_csv(path: Path, rows: list[dict]) -> None:
    keys = ["index", "lambda", "residual", "iterations", "converged"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for i, row in enumerate(rows, start=1):
            writer.writerow({"index": i, **{k: row[k] for k in keys[1:]}})


def resolve_run_dir(config: ExperimentConfig, command: str, out: str | None = None) -> Path:
    if out is not None:
        path = Path(out)
    elif config.output_dir is not None:
        path = config.base_dir / config.output_dir
    else:
        root = Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT_ROOT))
        path = root / f"{command}-{config.digest()}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _bundle(run_dir: Path, problem: Problem, command: str, pairs: list[EigenPair], extra: dict | None = None) -> dict:
    files = {}
    for k, pair in enumerate(pairs, start=1):
        name = f"eigenfunction_{k}.csv"
        write_eigenfunction(run_dir / name, problem.domain, pair.u)
        files[f"eigenfunction_{k}"] = name
    manifest = {"command": command, **problem.config.as_manifest(), "n_cells": problem.domain.n_cells}
    if extra:
        manifest.update(extra)
    write_json(run_dir / "manifest.json", manifest)
    files["manifest"] = "manifest.json"
    rows = [pair.as_dict() for pair in pairs]
    if problem.config.report_format == "csv":
        write_pairs_csv(run_dir / "eigenpairs.csv", rows)
        files["eigenpairs_csv"] = "eigenpairs.csv"
    report = {"manifest": manifest, "eigenpairs": rows, "files": files}
    write_json(run_dir / "eigenpairs.json", report)
    return report


# -- drivers -----------------------------------------------------------------

@dataclass
class Spectrum:
    first: EigenPair
    second: EigenPair

    @property
    def converged(self) -> bool:
        return self.first.converged and self.second.converged


def solve_spectrum(kernel: FractionalKernel, weight: WeightField, p: float, config: SolverConfig) -> Spectrum:
    """``lambda_1`` and the odd-loop ``lambda_2`` with the loop's top point as eigenfunction."""
    first = solve_lambda1(kernel, weight, p, config)
    estimate, path = solve_lambda2_path(kernel, weight, p, first.u, config)
    second = EigenPair(estimate, path.max_point.copy(), path.residual, path.iterations, path.converged)
    return Spectrum(first, second)


def run_solve(config: ExperimentConfig, out: str | None = None, with_oracle: bool = False, dump_kernel: bool = False):
    """Solve for the first two eigenpairs and write the bundle.

    Returns ``(run_dir, report, exit_code)``; the code is 3 when a solver
    did not converge (the files are still written).
    """
    problem = prepare(config)
    run_dir = resolve_run_dir(config, "solve", out)
    if dump_kernel:
        problem.kernel.to_csv(run_dir / "kernel.csv")
    spec = solve_spectrum(problem.kernel, problem.weight, config.p, config.solver)
    extra = {}
    if with_oracle:
        if config.p != 2:
            raise ConfigError("problem.p", "--oracle needs p = 2")
        oracle = p2_oracle_spectrum(problem.kernel, problem.weight, 2)
        oracle_report = _oracle_bundle(run_dir / "oracle", problem, oracle)
        extra["oracle"] = {
            "file": "oracle/eigenpairs.json",
            "relative_difference": [
                abs(mine.lam / ref.lam - 1.0) for mine, ref in zip((spec.first, spec.second), oracle)
            ],
            "lambda": [row["lambda"] for row in oracle_report["eigenpairs"]],
        }
    report = _bundle(run_dir, problem, "solve", [spec.first, spec.second], extra)
    code = 0 if spec.converged else 3
    if code:
        log.error("solver did not converge; partial results kept in %s", run_dir)
    return run_dir, report, code


def _oracle_bundle(run_dir: Path, problem: Problem, pairs) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    extra = {"oracle_requested": pairs.requested, "oracle_truncated": pairs.truncated}
    return _bundle(run_dir, problem, "oracle", list(pairs), extra)


def run_oracle(config: ExperimentConfig, out: str | None = None, count: int | None = None, dump_kernel: bool = False):
    if config.p != 2:
        raise ConfigError("problem.p", f"the oracle needs p = 2, got {config.p}")
    if count is not None:
        config = dataclasses.replace(config, oracle_count=count)
    problem = prepare(config)
    run_dir = resolve_run_dir(config, "oracle", out)
    if dump_kernel:
        problem.kernel.to_csv(run_dir / "kernel.csv")
    pairs = p2_oracle_spectrum(problem.kernel, problem.weight, config.oracle_count)
    report = _oracle_bundle(run_dir, problem, pairs)
    return run_dir, report, 0


@dataclass
class MonotonicityReport:
    m: str
    m_tilde: str
    lambda1_m: float
    lambda1_mt: float
    lambda2_m: float
    lambda2_mt: float
    constant: float
    strictly_below: bool
    differs: bool
    claim_i: bool
    claim_ii: bool | None
    claim_iii: bool | None
    margins: dict
    tol: float
    oracle: dict | None = None
    converged: bool = True

    @property
    def holds(self) -> bool:
        return self.claim_i and self.claim_ii is not False and self.claim_iii is not False

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def monotonicity_report(
    kernel: FractionalKernel,
    m: WeightField,
    m_tilde: WeightField,
    p: float,
    config: SolverConfig,
    tol: float = 1e-8,
    margin: float = 1e-6,
) -> MonotonicityReport:
    """Spectra of both weights, ``C(m, mt, lambda_2(m) + 1)`` and the three ordering claims.

    Claim (ii) is evaluated only when the weights differ somewhere and claim
    (iii) only when ``m < mt`` at every cell; otherwise the field is None.
    """
    a = solve_spectrum(kernel, m, p, config)
    b = solve_spectrum(kernel, m_tilde, p, config)
    below = bool(np.all(m.values < m_tilde.values))
    differs = bool(np.any(m.values != m_tilde.values))
    if differs:
        C = compute_monotonicity_constant(kernel, m, m_tilde, p, a.second.lam + 1.0, config, e1=a.first.u)
    else:
        C = 1.0
    d1 = a.first.lam - b.first.lam
    d2 = a.second.lam - b.second.lam
    margins = {
        "lambda1": d1,
        "lambda2": d2,
        "lambda1_relative": d1 / a.first.lam,
        "lambda2_relative": d2 / a.second.lam,
        "constant_bound": a.second.lam / C - b.second.lam,
    }
    oracle = None
    if p == 2:
        oa, ob = p2_oracle_spectrum(kernel, m, 2), p2_oracle_spectrum(kernel, m_tilde, 2)
        oracle = {"lambda_m": [q.lam for q in oa], "lambda_m_tilde": [q.lam for q in ob]}
    return MonotonicityReport(
        m=m.description,
        m_tilde=m_tilde.description,
        lambda1_m=a.first.lam,
        lambda1_mt=b.first.lam,
        lambda2_m=a.second.lam,
        lambda2_mt=b.second.lam,
        constant=C,
        strictly_below=below,
        differs=differs,
        claim_i=bool(d1 >= -tol * a.first.lam and d2 >= -tol * a.second.lam),
        claim_ii=bool(d1 > margin * a.first.lam) if differs else None,
        claim_iii=bool(d2 > margin * a.second.lam) if below else None,
        margins=margins,
        tol=tol,
        oracle=oracle,
        converged=a.converged and b.converged,
    )


def run_monotonicity(config: ExperimentConfig, out: str | None = None):
    problem = prepare(config, need_tilde=True)
    run_dir = resolve_run_dir(config, "monotonicity", out)
    report = monotonicity_report(problem.kernel, problem.weight, problem.weight_tilde, config.p, config.solver)
    manifest = {"command": "monotonicity", **config.as_manifest(), "n_cells": problem.domain.n_cells}
    write_json(run_dir / "manifest.json", manifest)
    write_json(run_dir / "monotonicity.json", {"manifest": manifest, "report": report.as_dict()})
    if not report.converged:
        return run_dir, report, 3
    return run_dir, report, 0 if report.holds else 1


# -- verify ------------------------------------------------------------------

@dataclass
class SuiteResult:
    suite: str
    count: int
    worst: float
    passed: bool
    detail: str = ""


def _fd_suite(kernel, weight, p, rng, points=20, step=1e-5, rtol=1e-6) -> SuiteResult:
    worst = 0.0
    n = kernel.n_cells
    for _ in range(points):
        u = rng.standard_normal(n)
        for energy, grad, obj in (
            (gagliardo_energy, gagliardo_gradient, kernel),
            (weighted_lp_energy, weighted_lp_gradient, weight),
        ):
            g = grad(obj, p, u)
            fd = np.empty(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = step
                fd[i] = (energy(obj, p, u + e) - energy(obj, p, u - e)) / (2 * step)
            worst = max(worst, float(np.linalg.norm(fd - g) / np.linalg.norm(g)))
    return SuiteResult(f"gradient_fd_p{p:g}", points, worst, worst < rtol)


def _symmetry_suite(kernel) -> SuiteResult:
    W = kernel.pair_weights
    asym = float(np.max(np.abs(W - W.T)) / np.max(np.abs(W)))
    ok = asym <= 1e-14 and bool(np.all(kernel.exterior_coeff > 0)) and bool(np.all(np.diag(W) == 0))
    return SuiteResult("kernel_symmetry", W.size, asym, ok)


def run_verify(config: ExperimentConfig | None = None, ps=(1.5, 2.0, 3.0), samples: int | None = None):
    """Run every check and return ``(rows, exit_code)``; the code is 1 if any suite fails."""
    config = config or ExperimentConfig(domain=DomainSpec.interval(0.0, 1.0, 16), s=0.3)
    seed = config.solver.seed
    rows: list[SuiteResult] = []
    for o in run_all_sweeps(seed, samples):
        rows.append(SuiteResult(o.name, o.samples, o.worst_gap, o.passed, o.worst_inputs))
    domain = build_grid(config.domain)
    for p in ps:
        try:
            check_parameters(domain.dim, config.s, p)
        except ValueError as exc:
            raise ConfigError("problem.s", f"verify runs p = {p:g}: {exc}") from exc
        kernel = assemble_kernel(domain, config.s, p)
        if kernel_hook is not None:
            kernel = kernel_hook(kernel)
        weight = build_weight(domain, config.weight, config.s, p, config.base_dir)
        rng = np.random.default_rng([seed, int(round(100 * p))])
        sym = _symmetry_suite(kernel)
        if p == ps[0]:
            rows.append(sym)
        elif not sym.passed:
            rows.append(dataclasses.replace(sym, suite=f"kernel_symmetry_p{p:g}"))
        if not sym.passed:
            # gradients of an asymmetric kernel do not match its energy, so
            # the solvers would only burn their iteration budget
            rows.append(SuiteResult(f"solvers_p{p:g}", 0, float("nan"), False, "skipped: kernel not symmetric"))
            continue
        rows.append(_fd_suite(kernel, weight, p, rng))
        rows.extend(_homogeneity_and_simplicity(kernel, weight, p, config.solver))
    code = 0 if all(r.passed for r in rows) else 1
    for r in rows:
        if not r.passed:
            log.error("suite %s failed (worst %.3e)", r.suite, r.worst)
    return rows, code


def _homogeneity_and_simplicity(kernel, weight, p, solver: SolverConfig):
    try:
        base = solve_lambda1(kernel, weight, p, solver)
        worst = 0.0
        for t in (0.5, 2.0, 10.0):
            other = solve_lambda1(kernel, weight.scaled(t), p, solver)
            worst = max(worst, abs(other.lam * t / base.lam - 1.0))
        hom = SuiteResult(f"homogeneity_p{p:g}", 3, worst, worst < 1e-6 and base.converged)
        rep = check_simplicity(kernel, weight, p, solver, trials=5)
        spread = rep.eigenvalue_spread / base.lam
        simp = SuiteResult(
            f"simplicity_p{p:g}", rep.trials, max(spread, rep.eigenfunction_distance),
            spread < 1e-8 and rep.eigenfunction_distance < 1e-4 and bool(np.all(base.u > 0)),
        )
    except (RuntimeError, ArithmeticError, ValueError) as exc:
        return [SuiteResult(f"solvers_p{p:g}", 0, float("nan"), False, str(exc))]
    return [hom, simp]


def format_table(rows: list[SuiteResult]) -> str:
    lines = [f"{'suite':<22} {'count':>7} {'worst':>12}  result"]
    for r in rows:
        lines.append(f"{r.suite:<22} {r.count:>7d} {r.worst:>12.3e}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)


def write_verify(rows: list[SuiteResult], config: ExperimentConfig, out: str | None = None) -> Path:
    run_dir = resolve_run_dir(config, "verify", out)
    manifest = {"command": "verify", **config.as_manifest()}
    write_json(run_dir / "verify.json", {"manifest": manifest, "suites": [dataclasses.asdict(r) for r in rows]})
    return run_dir
