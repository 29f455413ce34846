"""Sweep execution and result serialization."""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import json
import math
import os
import time
import warnings

import numpy as np

from . import __version__
from .bath import BathContext, SpectralDensity, SpectralKind, TailPolicy
from .config import K_B, ScenarioConfig
from .error_model import ETA_MEASURE, eps_cumulants, eps_region, error_report
from .errors import ConvergenceError, NoBarrierError, NumericError, StabilityError, UndefinedRelativeError
from .lha_core import GridPolicy, SeriesConfig, assemble_density, default_q_grid
from .observables import cumulants, diagonal_moments, well_population
from .oracle import classical_moments, gibbs_converged
from .potential import barrier_position, potential_from_config

__all__ = ["COLUMNS", "PointResult", "RunResult", "compute_point", "reference_rows", "run_scenario", "write_outputs"]

COLUMNS = ("sweep_var", "value", "kappa2", "kappa4", "pop_right", "eps_T",
           "eps_kappa2", "eps_kappa4", "eps_pop", "stability_flags")

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_NUMERIC = 0, 1, 2, 3

NAN = float("nan")


@dataclasses.dataclass
class PointResult:
    index: int
    row: dict
    grid: dict = dataclasses.field(default_factory=dict)
    diagnostics: list = dataclasses.field(default_factory=list)
    sensitivity: dict = dataclasses.field(default_factory=dict)
    failure: str | None = None


@dataclasses.dataclass
class RunResult:
    rows: list
    manifest: dict
    exit_code: int


def _potential(cfg: ScenarioConfig, value):
    params = dict(cfg.potential)
    if cfg.sweep_var == "b":
        params["b"] = value
    return potential_from_config(params)


def _context(cfg: ScenarioConfig, value, gamma=None, omega_c=None):
    sd = SpectralDensity(
        SpectralKind(cfg.bath_kind),
        cfg.gamma_at(value) if gamma is None else gamma,
        cfg.omega_c if omega_c is None else omega_c,
        cfg.mass,
    )
    return BathContext(cfg.beta_at(value), sd, cfg.n_terms, TailPolicy(cfg.tail_policy))


def _policy(cfg: ScenarioConfig):
    return GridPolicy(n_q=cfg.n_q, n_eta=cfg.n_eta, tail_ratio=cfg.tail_ratio,
                      eta_sigmas=cfg.eta_sigmas, q_bounds=cfg.q_bounds)


def _barrier(cfg, pm, q_grid):
    if cfg.q_b == "none":
        return None
    if cfg.q_b != "auto":
        return float(cfg.q_b)
    lo, hi = cfg.bracket if cfg.bracket else (q_grid[1], q_grid[-2])
    return barrier_position(pm, (lo, hi), shoulder=True)


def _blank(cfg, value, flag):
    row = {c: NAN for c in COLUMNS}
    row.update(sweep_var=cfg.sweep_var, value=value, stability_flags=flag)
    return row


def compute_point(cfg: ScenarioConfig, index: int, value: float) -> PointResult:
    """LHA observables and error estimates for one sweep point."""
    pm = _potential(cfg, value)
    ctx = _context(cfg, value)
    series = SeriesConfig(n_terms=cfg.n_terms)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            dens = assemble_density(pm, ctx, cfg=series, policy=_policy(cfg))
        except StabilityError as exc:
            return PointResult(index, _blank(cfg, value, "stability_error"), failure=f"stability: {exc}")
        except NumericError as exc:
            return PointResult(index, _blank(cfg, value, "numeric_error"), failure=f"numeric: {exc}")
    report = error_report(dens)
    k2, k4 = cumulants(diagonal_moments(dens, 4))
    try:
        e2, e4 = eps_cumulants(dens, report)
    except UndefinedRelativeError:
        e2, e4 = report.per_observable.get("kappa2", NAN), NAN
    try:
        q_b = _barrier(cfg, pm, dens.q_grid)
    except NoBarrierError:
        q_b = None
    pop, e_pop = NAN, NAN
    if q_b is not None and dens.q_grid[0] <= q_b <= dens.q_grid[-1]:
        pop = well_population(dens, q_b, "right")
        try:
            e_pop = eps_region(dens, report, q_b, "right")
        except UndefinedRelativeError:
            e_pop = NAN
    n_masked = int(dens.unstable_mask.sum())
    flag = f"masked:{n_masked}" if n_masked else "ok"
    row = dict(sweep_var=cfg.sweep_var, value=value, kappa2=k2, kappa4=k4, pop_right=pop,
               eps_T=report.eps_t, eps_kappa2=e2, eps_kappa4=e4, eps_pop=e_pop, stability_flags=flag)
    grid = dens.summary()
    grid["q_b"] = q_b
    grid["beta"] = ctx.beta
    grid["gamma"] = ctx.spectral.gamma
    sens = {}
    if cfg.sensitivity_omegas and q_b is not None and math.isfinite(pop):
        vals = {repr(cfg.omega_c): pop}
        for om in cfg.sensitivity_omegas:
            alt = _context(cfg, value, omega_c=om)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                try:
                    d_alt = assemble_density(pm, alt, cfg=series, policy=_policy(cfg))
                    vals[repr(om)] = well_population(d_alt, q_b, "right")
                except (StabilityError, NumericError):
                    vals[repr(om)] = NAN
        dev = max(abs(v / pop - 1.0) for v in vals.values()) if pop else NAN
        sens = {"pop_right_by_omega_c": vals, "max_relative_deviation": dev,
                "converged": bool(dev < cfg.sensitivity_tolerance)}
    return PointResult(index, row, grid, list(dens.diagnostics), sens)


def _reference_points(cfg: ScenarioConfig):
    """(value column, beta, potential) triples needing reference rows."""
    if cfg.sweep_var == "gamma":
        return [(None, cfg.beta_at(None), _potential(cfg, None))]
    return [(v, cfg.beta_at(v), _potential(cfg, v)) for v in cfg.sweep_values]


def reference_rows(cfg: ScenarioConfig):
    """Zero-coupling Gibbs and classical rows mirroring the limit lines.

    Returns ``(rows, info, failures)``.
    """
    rows, info, failures = [], [], []
    for value, beta, pm in _reference_points(cfg):
        ctx0 = _context(cfg, value if value is not None else 0.0, gamma=0.0)
        ctx0 = BathContext(beta, ctx0.spectral, min(cfg.n_terms, 10_000))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            q = default_q_grid(pm, ctx0, None, _policy(cfg))
        # margin keeps the hard-wall Gibbs state clear of the edge check
        pad = 0.25 * (q[-1] - q[0])
        bounds = (q[0] - pad, q[-1] + pad)
        try:
            q_b = _barrier(cfg, pm, q)
        except NoBarrierError:
            q_b = None
        tag_value = (lambda x: value) if value is not None else (lambda x: x)
        if cfg.gibbs_reference:
            try:
                g = gibbs_converged(pm, cfg.mass, beta, bounds, q_b=q_b, rtol=cfg.gibbs_rtol,
                                    n_max=cfg.gibbs_max_points)
                obs = g.observables
                row = _blank(cfg, tag_value(0.0), "ref_gibbs_gamma0")
                row.update(kappa2=obs["kappa2"], kappa4=obs["kappa4"], pop_right=obs.get("pop_right", NAN))
                rows.append(row)
                info.append({"kind": "gibbs_gamma0", "value": tag_value(0.0), "n_points": g.spec.n_points,
                             "q_min": bounds[0], "q_max": bounds[1],
                             "richardson_max": max(g.richardson.values())})
            except ConvergenceError as exc:
                failures.append(f"gibbs reference at {tag_value(0.0)}: {exc}")
                rows.append(_blank(cfg, tag_value(0.0), "ref_gibbs_gamma0:convergence_error"))
        if cfg.usc_reference:
            c = classical_moments(pm, beta, bounds, q_b=q_b)
            row = _blank(cfg, tag_value(math.inf), "ref_usc")
            row.update(kappa2=c["kappa2"], kappa4=c["kappa4"], pop_right=c.get("pop_right", NAN))
            rows.append(row)
            info.append({"kind": "usc", "value": tag_value(math.inf), "q_min": bounds[0], "q_max": bounds[1]})
    return rows, info, failures


def _fmt(v):
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    f = float(v)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_csv(cfg: ScenarioConfig, rows):
    buf = io.StringIO()
    buf.write(f"# scenario={cfg.scenario}\n")
    buf.write(f"# config_sha256={cfg.digest()}\n")
    buf.write(f"# version={__version__}\n")
    buf.write(f"# n_terms={cfg.n_terms} tail={cfg.tail_policy}\n")
    buf.write(f"# bath={cfg.bath_kind} omega_c={cfg.omega_c!r} mass={cfg.mass!r}\n")
    buf.write(f"# eta_measure={ETA_MEASURE}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def _map_points(cfg, workers):
    args = list(enumerate(cfg.sweep_values))
    if workers <= 1 or len(args) <= 1:
        return [compute_point(cfg, i, v) for i, v in args]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(compute_point, cfg, i, v) for i, v in args]
        done = [f.result() for f in futures]
    return sorted(done, key=lambda p: p.index)


def run_scenario(cfg: ScenarioConfig, workers=None, oracle_only=False) -> RunResult:
    """Evaluate every sweep point plus the reference rows."""
    t0 = time.perf_counter()
    workers = cfg.workers if workers is None else workers
    points = [] if oracle_only else _map_points(cfg, workers)
    ref_rows, ref_info, ref_fail = reference_rows(cfg)
    rows = [p.row for p in points] + ref_rows
    failures = [f"point {p.index} ({cfg.sweep_var}={p.row['value']!r}): {p.failure}" for p in points if p.failure]
    failures += ref_fail
    sens = {repr(p.row["value"]): p.sensitivity for p in points if p.sensitivity}
    code = EXIT_OK
    if any(p.failure and p.failure.startswith("numeric") for p in points) or ref_fail:
        code = EXIT_NUMERIC
    if any(p.failure and p.failure.startswith("stability") for p in points):
        code = EXIT_STABILITY
    manifest = {
        "scenario": cfg.scenario,
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "version": __version__,
        "series": {"n_terms": cfg.n_terms, "tail_policy": cfg.tail_policy},
        "columns": list(COLUMNS),
        "eta_measure": ETA_MEASURE,
        "temperature_unit": "kelvin" if cfg.sweep_var == "temperature_K" else "E_h",
        "k_B": K_B,
        "points": [{"index": p.index, "value": p.row["value"], "grid": p.grid,
                    "diagnostics": p.diagnostics, "failure": p.failure} for p in points],
        "references": ref_info,
        "sensitivity": sens,
        "sensitivity_converged": all(s.get("converged", True) for s in sens.values()) if sens else None,
        "failures": failures,
        "exit_code": code,
        "wall_time_s": time.perf_counter() - t0,
    }
    return RunResult(rows, _jsonable(manifest), code)


def write_outputs(cfg: ScenarioConfig, result: RunResult, out_dir, stem=None):
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or cfg.scenario
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    man_path = os.path.join(out_dir, f"{stem}.manifest.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(cfg, result.rows))
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, man_path
