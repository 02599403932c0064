"""End-to-end experiment: build, solve, score against references, export."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .auglag import HISTORY_COLUMNS, LagrangianModel, SolveResult, build_layout, solve
from .config import ExperimentConfig
from .errors import RunError
from .fourier import save_surfaces
from .metrics import MetricSet, control_metrics, cost_pct_error
from .quadrature import make_grid
from .reference import (
    Trajectory,
    direct_transcription_reference,
    lq_analytic_control,
    lq_analytic_cost,
    lq_analytic_state,
    rk4_simulate,
    rps_shooting_reference,
)

log = logging.getLogger(__name__)

METRICS_COLUMNS = (
    "method", "M", "N", "k", "ell", "MSE", "MAPE", "MAE", "eps", "Jerr",
    "sMAPE", "J_sim", "J_surrogate", "J_star", "outer_iterations", "inner_iterations", "nu", "converged",
)


@dataclass
class ReferenceSet:
    """Optimal controls and costs for every training IC."""

    provenance: str
    trajectories: list
    j_star: list
    extra: dict = field(default_factory=dict)

    def control(self, j: int, t: np.ndarray) -> np.ndarray:
        tr = self.trajectories[j]
        return np.interp(t, tr.times, tr.control)


@dataclass
class ExperimentReport:
    metrics: MetricSet
    solve: SolveResult
    reference: ReferenceSet
    per_ic: list
    gamma_min: float
    config: dict
    files: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def gamma_ok(self) -> Optional[bool]:
        """``gamma_hat >= -1`` on the scoring grid (replicator problems only)."""
        if self.config.get("problem") != "rps":
            return None
        return self.gamma_min >= -1.0

    @property
    def j_pct_error(self) -> float:
        return float(self.metrics.j_pct_error)

    def summary(self) -> dict:
        m = self.metrics
        return {
            "MSE": m.mse, "MAE": m.mae, "MAPE": m.mape, "sMAPE": m.smape,
            "Jerr": m.j_pct_error, "points": m.points, "excluded_zeros": m.excluded_zeros,
            "provenance": m.provenance,
        }


def compute_references(cfg: ExperimentConfig) -> ReferenceSet:
    p = cfg.problem
    steps = cfg.ref_steps
    trajs, costs = [], []
    extra: dict = {}
    if p.name == "lq":
        xT = p.terminal
        times = np.linspace(0.0, p.horizon, steps + 1)
        for ic in cfg.ics:
            states = lq_analytic_state(times, ic, xT, p.horizon)
            gamma = lq_analytic_control(times, ic, xT, p.horizon)
            cost = lq_analytic_cost(ic, xT, p.control_weight, p.horizon)
            trajs.append(Trajectory(times, states, np.asarray(gamma, dtype=float), cost))
            costs.append(cost)
        return ReferenceSet("analytic", trajs, costs)
    residuals, transcription = [], []
    for ic in cfg.ics:
        sol = rps_shooting_reference(p, ic, steps=steps)
        trajs.append(sol.trajectory)
        costs.append(sol.cost)
        residuals.append(sol.terminal_residual)
        if cfg.transcription:
            transcription.append(direct_transcription_reference(p, ic, intervals=steps)[0])
    extra["terminal_residual"] = residuals
    if transcription:
        extra["transcription_J"] = transcription
    return ReferenceSet("shooting", trajs, costs, extra)


def _surrogate_cost(cfg: ExperimentConfig, surfaces, grid, ic) -> float:
    t = grid.points
    gamma = surfaces[0](t, ic)
    u = [s(t, ic) for s in surfaces[1:]]
    run = np.broadcast_to(np.asarray(cfg.problem.running_cost(u, gamma, t), dtype=float), t.shape)
    return float(grid.weights @ run)


def score(cfg: ExperimentConfig, surfaces: list, reference: ReferenceSet, grid=None):
    """Metrics of the control surface plus per-IC achieved and optimal costs."""
    if grid is None:
        grid = make_grid(0.0, cfg.problem.horizon, cfg.quad_nodes, cfg.quad_rule)
    t = grid.points
    gamma_hat = surfaces[0]
    approx = np.array([gamma_hat(t, ic) for ic in cfg.ics])
    ref = np.array([reference.control(j, t) for j in range(len(cfg.ics))])
    metrics = control_metrics(approx, ref, reference.provenance)
    per_ic = []
    j_sim = []
    for j, ic in enumerate(cfg.ics):
        sim = rk4_simulate(cfg.problem, ic, lambda s, ic=ic: gamma_hat(s, ic), cfg.ref_steps)
        j_sim.append(sim.cost)
        row = {
            "ic": [float(v) for v in ic],
            "J_sim": sim.cost,
            "J_surrogate": _surrogate_cost(cfg, surfaces, grid, ic),
            "J_star": reference.j_star[j],
            "final_state": [float(v) for v in sim.states[-1]],
        }
        row["Jerr"] = cost_pct_error([row["J_sim"]], [row["J_star"]])
        per_ic.append(row)
    metrics.j_pct_error = cost_pct_error(j_sim, reference.j_star)
    metrics.j_sim = j_sim
    metrics.j_star = list(reference.j_star)
    metrics.j_surrogate = [r["J_surrogate"] for r in per_ic]
    gamma_min = float(approx.min())
    return metrics, per_ic, gamma_min


# ---------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_history(path: Path, history) -> None:
    _write_csv(path, HISTORY_COLUMNS, [row.as_list() for row in history])


def write_metrics(path: Path, cfg: ExperimentConfig, metrics: MetricSet, result: SolveResult) -> None:
    row = [
        cfg.opt.method, cfg.M, cfg.N, cfg.opt.kmax, cfg.auglag.ell_lim,
        metrics.mse, metrics.mape, metrics.mae, cfg.opt.eps, metrics.j_pct_error,
        metrics.smape, float(np.mean(metrics.j_sim)), float(np.mean(metrics.j_surrogate)),
        float(np.mean(metrics.j_star)), result.outer_iterations, result.inner_iterations,
        result.nu, result.converged,
    ]
    _write_csv(path, METRICS_COLUMNS, [row])


def _grid_rows(surfaces: list, t: np.ndarray, ics: np.ndarray) -> np.ndarray:
    cols = [s(t, ics) for s in surfaces]
    return np.column_stack([t, ics] + cols)


def export_surface_grid(
    path: Path,
    surfaces: list,
    points: int = 101,
    fixed: Optional[dict] = None,
    free_axis: Optional[int] = None,
) -> Path:
    """CSV ``t,u0_1..u0_d,gamma_hat,u_hat_1..u_hat_d`` on a ``points x points`` grid.

    ``free_axis`` (0-based state index) is swept over its training range;
    every other IC axis is held at ``fixed[axis]``, defaulting to the middle
    of its range.  Without a free axis only time is swept.
    """
    dom = surfaces[0].domain
    d = dom.ic_dim
    fixed = dict(fixed or {})
    base = np.array([fixed.get(i, 0.5 * (dom.ic_lo[i] + dom.ic_hi[i])) for i in range(d)])
    t = np.linspace(0.0, dom.horizon, points)
    if free_axis is None:
        tt = t
        ics = np.repeat(base[None, :], points, axis=0)
    else:
        u = np.linspace(dom.ic_lo[free_axis], dom.ic_hi[free_axis], points)
        tt, uu = (a.ravel() for a in np.meshgrid(t, u, indexing="ij"))
        ics = np.repeat(base[None, :], tt.size, axis=0)
        ics[:, free_axis] = uu
    data = _grid_rows(surfaces, tt, ics)
    header = ["t"] + [f"u0_{i + 1}" for i in range(d)] + ["gamma_hat"] + [f"u_hat_{i + 1}" for i in range(d)]
    _write_csv(path, header, data.tolist())
    return path


def export_grids(cfg: ExperimentConfig, surfaces: list, outdir: Path) -> dict:
    dom = surfaces[0].domain
    varying = [i for i in range(dom.ic_dim) if not dom.degenerate(i)]
    files = {}
    points = cfg.export_points
    free = varying[0] if varying else None
    files["surface_grid"] = export_surface_grid(outdir / "surface_grid.csv", surfaces, points, free_axis=free)
    if cfg.slice_axis is not None:
        axis = cfg.slice_axis - 1
        others = [i for i in varying if i != axis]
        free = others[0] if others else None
        for v in cfg.slice_values:
            name = f"surface_grid_u{cfg.slice_axis}_{v:g}.csv"
            if not dom.ic_lo[axis] <= v <= dom.ic_hi[axis]:
                log.warning("slice %s = %g lies outside the training range; values are extrapolated", axis + 1, v)
            files[name[:-4]] = export_surface_grid(outdir / name, surfaces, points, {axis: v}, free)
    return files


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# driver


def build_model(cfg: ExperimentConfig) -> LagrangianModel:
    layout = build_layout(cfg.problem, cfg.ics, cfg.M, cfg.N, cfg.half_basis)
    grid = make_grid(0.0, cfg.problem.horizon, cfg.quad_nodes, cfg.quad_rule)
    return LagrangianModel(cfg.problem, cfg.ics, layout, grid)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Solve, score and (optionally) write every output file.

    Raises :class:`RunError` on solver failure after flushing the history
    collected so far to ``history.csv``.
    """
    start = time.perf_counter()
    outdir = Path(cfg.output_dir)
    if write:
        outdir.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    log.info(
        "problem %s: %d ICs, orders %s, %d unknowns",
        cfg.problem.name, len(cfg.ics), model.layout.orders, model.layout.size,
    )
    try:
        result = solve(model, cfg.auglag, cfg.opt, seed=cfg.seed)
    except RunError as exc:
        if write and getattr(exc, "history", None):
            write_history(outdir / "history.csv", exc.history)
        raise
    reference = compute_references(cfg)
    metrics, per_ic, gamma_min = score(cfg, result.surfaces, reference, model.grid)
    report = ExperimentReport(metrics, result, reference, per_ic, gamma_min, cfg.echo())
    report.wall_time = time.perf_counter() - start
    if write:
        files = {}
        save_surfaces(outdir / "coefficients.txt", result.surfaces)
        files["coefficients"] = outdir / "coefficients.txt"
        write_history(outdir / "history.csv", result.history)
        files["history"] = outdir / "history.csv"
        write_metrics(outdir / "metrics.csv", cfg, metrics, result)
        files["metrics"] = outdir / "metrics.csv"
        files.update(export_grids(cfg, result.surfaces, outdir))
        for j, tr in enumerate(reference.trajectories):
            p = outdir / f"reference_{j + 1}.csv"
            tr.to_csv(p)
            files[f"reference_{j + 1}"] = p
        files["report"] = outdir / "report.json"
        files["timing"] = outdir / "timing.json"
        report.files = {k: Path(v).name for k, v in files.items()}
        (outdir / "report.json").write_text(json.dumps(_clean(report_dict(report)), indent=2, sort_keys=True) + "\n")
        (outdir / "timing.json").write_text(json.dumps({"wall_time_s": report.wall_time}) + "\n")
    return report


def report_dict(report: ExperimentReport) -> dict:
    res = report.solve
    return {
        "config": report.config,
        "metrics": report.summary(),
        "per_ic": report.per_ic,
        "residuals": res.residuals,
        "solver": {
            "outer_iterations": res.outer_iterations,
            "inner_iterations": res.inner_iterations,
            "inner_statuses": res.inner_statuses,
            "converged": res.converged,
            "branches": res.branches,
            "upsilon": res.state.upsilon,
            "mu": res.state.mu,
            "nu": res.nu,
            "running_cost": res.running_cost,
        },
        "reference": {"provenance": report.reference.provenance, **report.reference.extra},
        "gamma_min": report.gamma_min,
        # the game input is only meaningful for gamma >= -1; checked, not enforced
        "gamma_ge_minus_one": report.gamma_ok,
        "files": report.files,
    }


def write_reference_files(cfg: ExperimentConfig) -> tuple[ReferenceSet, list]:
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    refs = compute_references(cfg)
    paths = []
    for j, tr in enumerate(refs.trajectories):
        p = outdir / f"reference_{j + 1}.csv"
        tr.to_csv(p)
        paths.append(p)
    return refs, paths


__all__ = [
    "ExperimentReport", "ReferenceSet", "run_experiment", "compute_references", "score",
    "export_surface_grid", "build_model", "write_reference_files", "report_dict",
]

