"""Runs, sweeps over h, convergence-order fits and report files."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .asymptotics import MomentSet, correction_inner_product, moments, resonance_first_order
from .config import RunConfig
from .domain import build_domain, discretize
from .errors import ConfigError, DegenerateEigenvalueWarning
from .inversion import InversionProblem, invert
from .operators import assemble_T0, assemble_Th, operator_norm
from .oracles import ball_mode_table
from .spectral_linear import eigen_spectrum
from .spectral_nonlinear import solve_resonance

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("h", "re_lambda_full", "im_lambda_full", "re_lambda_asym", "im_lambda_asym",
                 "re_lambda_inner", "im_lambda_inner", "abs_err_asym", "norm_diff",
                 "iterations", "n_nodes")


def fmt(x) -> str:
    """17 significant digits, lowercase exponent; integers verbatim."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.16e" % float(x)


def fit_order(h: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of ``log(err)`` against ``log(h)``; ``inf`` if any error is 0."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.shape != err.shape or h.ndim != 1 or len(h) < 3:
        raise ValueError("need at least three (h, err) pairs of equal length")
    if np.any(h <= 0) or np.any(err < 0):
        raise ValueError("h must be positive and errors nonnegative")
    if np.any(err == 0):
        return math.inf
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


def _c(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _z(d: dict) -> complex:
    return complex(d["re"], d["im"])


@dataclass
class SweepRow:
    h: float
    lambda_full: complex
    lambda_asym: complex
    lambda_inner: complex
    norm_diff: float
    iterations: int
    n_nodes: int
    converged: bool = True
    residual: float = 0.0
    u_h: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def abs_err_asym(self) -> float:
        return abs(self.lambda_full - self.lambda_asym)

    def csv_fields(self) -> list[str]:
        vals = [self.h, self.lambda_full.real, self.lambda_full.imag, self.lambda_asym.real,
                self.lambda_asym.imag, self.lambda_inner.real, self.lambda_inner.imag,
                self.abs_err_asym, self.norm_diff, int(self.iterations), int(self.n_nodes)]
        return [fmt(v) for v in vals]

    def to_dict(self) -> dict:
        return {"h": self.h, "lambda_full": _c(self.lambda_full), "lambda_asym": _c(self.lambda_asym),
                "lambda_inner": _c(self.lambda_inner), "abs_err_asym": self.abs_err_asym,
                "norm_diff": self.norm_diff, "iterations": self.iterations,
                "n_nodes": self.n_nodes, "converged": self.converged, "residual": self.residual}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRow":
        return cls(d["h"], _z(d["lambda_full"]), _z(d["lambda_asym"]), _z(d["lambda_inner"]),
                   d["norm_diff"], d["iterations"], d["n_nodes"], d["converged"], d["residual"])


@dataclass
class SweepReport:
    rows: list
    lambda0: float
    moments: MomentSet
    fitted_slopes: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    def refit(self) -> None:
        hs = [r.h for r in self.rows]
        if len(hs) >= 3:
            self.fitted_slopes = {
                "operator_norm_slope": fit_order(hs, [r.norm_diff for r in self.rows]),
                "asym_error_slope": fit_order(hs, [r.abs_err_asym for r in self.rows]),
            }
        else:
            self.fitted_slopes = {"operator_norm_slope": None, "asym_error_slope": None}

    def csv_text(self) -> str:
        lines = [",".join(SWEEP_COLUMNS)] + [",".join(r.csv_fields()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "lambda0": self.lambda0,
                "moments": {"U0": self.moments.U0, "Uk": list(self.moments.Uk)},
                "fitted_slopes": self.fitted_slopes, "warnings": self.warnings,
                "config": self.config}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        return cls([SweepRow.from_dict(r) for r in d["rows"]], d["lambda0"],
                   MomentSet(d["moments"]["U0"], tuple(d["moments"]["Uk"])),
                   d["fitted_slopes"], d["warnings"], d["config"])


@dataclass
class Table:
    """Generic tabular result for the spectrum, resonance, asym and oracle modes."""

    columns: tuple
    rows: list
    extra: dict = field(default_factory=dict)
    converged: bool = True

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(map(_jsonable, r)) for r in self.rows],
                **self.extra}


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


class _Setup:
    """Grid, T0 and the selected limiting eigenpair shared by a run."""

    def __init__(self, config: RunConfig, base_dir: Path | None = None):
        self.spec = config.domain_spec(base_dir)
        self.grid = discretize(build_domain(self.spec), config.effective_resolution)
        self.etas = self.spec.etas
        self.T0 = assemble_T0(self.grid, self.etas)
        self.warnings: list[str] = []
        count = config.eigen_index + 1
        if config.mode == "spectrum":
            count = max(count, config.count)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateEigenvalueWarning)
            self.pairs = eigen_spectrum(self.T0, count, config.tolerances.eigen_residual)
        self.pair = self.pairs[config.eigen_index]
        for p in self.pairs:
            if not p.simple and (p.index == config.eigen_index or config.mode == "spectrum"):
                msg = f"eigenvalue {p.index} (mu={p.mu:.10g}) is not simple: relative gap {p.gap:.2e}"
                self.warnings.append(msg)
                log.warning("%s", msg)
        self.moments = moments(self.grid, self.pair.vector)


def _sweep_row(setup: _Setup, config: RunConfig, h: float) -> SweepRow:
    grid, etas, pair = setup.grid, setup.etas, setup.pair
    res = solve_resonance(grid, etas, h, pair.lambda0, pair.vector,
                          max_iter=config.max_iterations,
                          step_tol=config.tolerances.nonlinear_step)
    asym = resonance_first_order(pair.lambda0, etas, setup.moments, h)
    th = assemble_Th(grid, etas, h, pair.lambda0)
    inner = correction_inner_product(setup.T0, th, pair.vector, pair.lambda0, grid)
    norm = operator_norm(th.matrix - setup.T0.matrix, tol=config.tolerances.norm_estimate)
    log.info("h=%g: lambda_h=%s asym=%s iterations=%d", h, res.lambda_h, asym.lambda_h, res.iterations)
    return SweepRow(h, res.lambda_h, asym.lambda_h, inner, float(norm), res.iterations,
                    grid.size, res.converged, res.residual, res.u_h)


def run_sweep(config: RunConfig, base_dir: Path | None = None) -> SweepReport:
    setup = _Setup(config, base_dir)
    hs = list(config.h_values)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            rows = list(pool.map(lambda h: _sweep_row(setup, config, h), hs))
    else:
        rows = [_sweep_row(setup, config, h) for h in hs]
    report = SweepReport(rows, setup.pair.lambda0, setup.moments, warnings=setup.warnings,
                         config=config.model_dump(mode="json"))
    report.refit()
    return report


def run(config: RunConfig, base_dir: Path | None = None):
    """Dispatch on ``config.mode``."""
    mode = config.mode
    if mode == "oracle":
        o = config.oracle
        modes = ball_mode_table(o.eta0, o.l_max, o.n_max)
        return Table(("l", "n", "k_root", "lambda0"), [(m.l, m.n, m.k_root, m.lambda0) for m in modes])
    if mode == "sweep":
        return run_sweep(config, base_dir)
    if mode == "invert":
        return run_invert(config, base_dir)
    setup = _Setup(config, base_dir)
    extra = {"warnings": setup.warnings, "n_nodes": setup.grid.size,
             "config": config.model_dump(mode="json")}
    if mode == "spectrum":
        rows = [(p.index, p.mu, p.lambda0, p.gap) for p in setup.pairs[: config.count]]
        return Table(("index", "mu", "lambda0", "gap"), rows, extra)
    if mode == "asym":
        rows = []
        for h in config.h_values:
            a = resonance_first_order(setup.pair.lambda0, setup.etas, setup.moments, h)
            rows.append((h, a.lambda_h.real, a.lambda_h.imag, a.first_order_coeff.imag))
        extra.update(lambda0=setup.pair.lambda0,
                     moments={"U0": setup.moments.U0, "Uk": list(setup.moments.Uk)})
        return Table(("h", "re_lambda_asym", "im_lambda_asym", "im_coeff"), rows, extra)
    if mode == "resonance":
        rows, ok = [], True
        for h in config.h_values:
            r = solve_resonance(setup.grid, setup.etas, h, setup.pair.lambda0, setup.pair.vector,
                                max_iter=config.max_iterations,
                                step_tol=config.tolerances.nonlinear_step)
            ok &= r.converged
            rows.append((h, r.lambda_h.real, r.lambda_h.imag, r.iterations, r.residual, int(r.converged)))
        extra.update(lambda0=setup.pair.lambda0)
        return Table(("h", "re_lambda", "im_lambda", "iterations", "residual", "converged"),
                     rows, extra, converged=ok)
    raise ValueError(f"unknown mode {mode}")


def read_measurements(path) -> tuple[list, list | None]:
    """CSV with header ``h, re_lambda, im_lambda[, weight]``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        missing = {"h", "re_lambda", "im_lambda"} - set(fields)
        if missing:
            raise ValueError(f"measurement CSV lacks columns {sorted(missing)}")
        meas, weights = [], []
        for row in reader:
            row = {k.strip(): v for k, v in row.items()}
            meas.append((float(row["h"]), complex(float(row["re_lambda"]), float(row["im_lambda"]))))
            if "weight" in fields and row.get("weight") not in (None, ""):
                weights.append(float(row["weight"]))
    if weights and len(weights) != len(meas):
        raise ValueError("weight column must be filled for every row or none")
    return meas, (weights or None)


def run_invert(config: RunConfig, base_dir: Path | None = None):
    inv = config.inversion
    path = Path(inv.measurements_csv)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    try:
        meas, weights = read_measurements(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read measurements {path}: {exc}") from exc
    problem = InversionProblem(
        measurements=meas, domain=config.domain_spec(base_dir), unknowns=tuple(inv.unknowns),
        weights=None if weights is None else tuple(weights),
        initial_eta0=None if inv.initial_eta0 is None else tuple(inv.initial_eta0),
        initial_scale=inv.initial_scale, resolution=config.effective_resolution,
        eigen_index=config.eigen_index, use_solver=inv.use_solver)
    return invert(problem, max_iter=inv.max_iterations)


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def emit_report(report, paths: dict) -> None:
    """Write ``paths['csv']`` and/or ``paths['json']`` atomically."""
    if paths.get("csv") and hasattr(report, "csv_text"):
        atomic_write(paths["csv"], report.csv_text())
    if paths.get("json"):
        atomic_write(paths["json"], report_json(report))
