"""Experiment configuration: TOML file -> validated, fully resolved settings.

Top-level keys::

    problem = "lq" | "rps"
    T, r            horizon and control weight
    terminal        target state (lq only)
    ic              one entry per state component: a number, a fraction
                    string such as "7/30", a list of values, or a table
                    {start, stop, step}; U0 is the Cartesian product
    seed, output_dir

Sections ``[orders]``, ``[opt]``, ``[auglag]``, ``[quadrature]``, ``[rps]``,
``[reference]`` and ``[export]`` override the defaults listed in
``DEFAULTS``.  Unknown keys are rejected so typos cannot pass silently.
"""
from __future__ import annotations

import copy
import itertools
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .auglag import AugLagSettings
from .errors import ArgumentError, ConfigError
from .optimizers import OptimizerConfig
from .problems import OcpDefinition, build_circulant_game, lq_particle_problem, rps_problem

DEFAULTS: dict[str, Any] = {
    "problem": None,
    "T": None,
    "r": 1.0,
    "terminal": None,
    "ic": None,
    "seed": 0,
    "output_dir": "output",
    "orders": {"M": 4, "N": 4, "half_basis": False},
    "opt": {"method": "lbfgs", "eps": 1e-5, "kmax": 1000, "alpha": 1e-3, "memory": 10},
    "auglag": {
        "ell_lim": 30,
        "tau": 1e-4,
        "upsilon0": 1.0,
        "mu0": 10.0,
        "reduction": 0.25,
        "penalty_factor": 10.0,
        "multiplier_factor": 1.0,
        "multiplier_rule": "classic",
        "mu_max": 1e8,
        "init_jitter": 0.0,
    },
    "quadrature": {"rule": "simpson", "nodes": 201},
    "rps": {"N": 3},
    "reference": {"steps": 2000, "transcription": False},
    "export": {"points": 101, "slice_axis": None, "slice_values": []},
}


@dataclass
class ExperimentConfig:
    raw: dict
    problem: OcpDefinition
    ics: np.ndarray
    ic_axes: list
    M: int
    N: int
    half_basis: bool
    opt: OptimizerConfig
    auglag: AugLagSettings
    quad_rule: str
    quad_nodes: int
    ref_steps: int
    transcription: bool
    export_points: int
    slice_axis: int | None
    slice_values: list
    seed: int
    output_dir: Path
    source: str = ""
    notes: list = field(default_factory=list)

    def echo(self) -> dict:
        """Every setting the run uses, defaults included."""
        out = copy.deepcopy(self.raw)
        out["ic"] = [list(map(float, axis)) for axis in self.ic_axes]
        out["output_dir"] = str(self.output_dir)
        return out


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{name!r} must be a table")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def _number(v, what: str) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"{what}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{what}: cannot parse {v!r} as a number") from None
    raise ConfigError(f"{what}: expected a number, got {type(v).__name__}")


def parse_ic_axis(spec, what: str = "ic") -> list[float]:
    """Values of one IC component from a number, fraction string, list or range table."""
    if isinstance(spec, dict):
        missing = {"start", "stop", "step"} - set(spec)
        extra = set(spec) - {"start", "stop", "step"}
        if missing or extra:
            raise ConfigError(f"{what}: range table needs exactly start, stop, step")
        a, b, h = (_number(spec[k], what) for k in ("start", "stop", "step"))
        if not h > 0 or b < a:
            raise ConfigError(f"{what}: need step > 0 and stop >= start")
        n = int(np.floor((b - a) / h + 1e-9)) + 1
        return [a + i * h for i in range(n)]
    if isinstance(spec, list):
        if not spec:
            raise ConfigError(f"{what}: empty list")
        return [_number(v, what) for v in spec]
    return [_number(spec, what)]


def _int(v, what: str, lo: int = 0) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < lo:
        raise ConfigError(f"{what}: expected an integer >= {lo}, got {v!r}")
    return int(v)


def _error_position(exc: Exception, text: str) -> tuple[int, int]:
    """Line and column of a TOML error, also for parsers without ``lineno``."""
    if getattr(exc, "lineno", None):
        return exc.lineno, exc.colno
    m = re.search(r"line (\d+), column (\d+)", str(exc))
    if m:
        return int(m.group(1)), int(m.group(2))
    return text.count("\n") + 1, len(text) - text.rfind("\n")


def load_config(path: str | Path, seed: int | None = None, output_dir: str | Path | None = None) -> ExperimentConfig:
    """Read and validate a config file; raises :class:`ConfigError`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = _error_position(exc, text)
        msg = getattr(exc, "msg", str(exc))
        raise ConfigError(f"{path}:{line}:{col}: {msg}") from None
    cfg = resolve_config(data, seed=seed, output_dir=output_dir)
    cfg.source = str(path)
    return cfg


def resolve_config(data: dict, seed: int | None = None, output_dir: str | Path | None = None) -> ExperimentConfig:
    raw = _merge(DEFAULTS, data)
    if seed is not None:
        raw["seed"] = seed
    if output_dir is not None:
        raw["output_dir"] = str(output_dir)
    kind = raw["problem"]
    if kind not in ("lq", "rps"):
        raise ConfigError("problem must be 'lq' or 'rps'")
    if raw["T"] is None:
        raise ConfigError("T is required")
    T = _number(raw["T"], "T")
    r = _number(raw["r"], "r")
    if not T > 0:
        raise ConfigError("T must be positive")
    if not r > 0:
        raise ConfigError("r must be positive")
    if raw["ic"] is None:
        raise ConfigError("ic is required")

    try:
        if kind == "lq":
            if raw["terminal"] is None:
                raise ConfigError("terminal is required for problem 'lq'")
            term = [_number(v, "terminal") for v in raw["terminal"]]
            problem = lq_particle_problem(T, r, term)
        else:
            if raw["terminal"] is not None:
                raise ConfigError("terminal is not used by problem 'rps'")
            n = _int(raw["rps"]["N"], "rps.N", 3)
            problem = rps_problem(build_circulant_game(n), T, r)
    except ArgumentError as exc:
        raise ConfigError(str(exc)) from None

    if not isinstance(raw["ic"], list) or len(raw["ic"]) != problem.state_dim:
        raise ConfigError(f"ic must list one entry per state component ({problem.state_dim})")
    axes = [parse_ic_axis(spec, f"ic[{i}]") for i, spec in enumerate(raw["ic"])]
    ics = np.array(list(itertools.product(*axes)), dtype=float)
    if problem.simplex:
        bad = np.abs(ics.sum(axis=1) - 1.0) > 1e-9
        if bad.any() or np.any(ics < 0):
            raise ConfigError("replicator initial conditions must lie on the unit simplex")

    orders = raw["orders"]
    M = _int(orders["M"], "orders.M")
    N = _int(orders["N"], "orders.N")
    if not isinstance(orders["half_basis"], bool):
        raise ConfigError("orders.half_basis must be true or false")

    o = raw["opt"]
    a = raw["auglag"]
    try:
        opt = OptimizerConfig(
            method=o["method"], eps=_number(o["eps"], "opt.eps"), kmax=_int(o["kmax"], "opt.kmax", 1),
            alpha=_number(o["alpha"], "opt.alpha"), memory=_int(o["memory"], "opt.memory", 1),
        )
        auglag = AugLagSettings(
            upsilon0=_number(a["upsilon0"], "auglag.upsilon0"),
            mu0=_number(a["mu0"], "auglag.mu0"),
            reduction=_number(a["reduction"], "auglag.reduction"),
            penalty_factor=_number(a["penalty_factor"], "auglag.penalty_factor"),
            multiplier_factor=_number(a["multiplier_factor"], "auglag.multiplier_factor"),
            tau=_number(a["tau"], "auglag.tau"),
            ell_lim=_int(a["ell_lim"], "auglag.ell_lim", 1),
            multiplier_rule=a["multiplier_rule"],
            mu_max=_number(a["mu_max"], "auglag.mu_max"),
            init_jitter=_number(a["init_jitter"], "auglag.init_jitter"),
        )
    except ArgumentError as exc:
        raise ConfigError(str(exc)) from None

    q = raw["quadrature"]
    if q["rule"] not in ("simpson", "trapezoid"):
        raise ConfigError("quadrature.rule must be 'simpson' or 'trapezoid'")
    nodes = _int(q["nodes"], "quadrature.nodes", 3)
    if nodes % 2 == 0:
        raise ConfigError("quadrature.nodes must be odd")

    ref = raw["reference"]
    steps = _int(ref["steps"], "reference.steps", 10)
    if not isinstance(ref["transcription"], bool):
        raise ConfigError("reference.transcription must be true or false")

    ex = raw["export"]
    points = _int(ex["points"], "export.points", 2)
    slice_axis = ex["slice_axis"]
    if slice_axis is not None:
        slice_axis = _int(slice_axis, "export.slice_axis", 1)
        if slice_axis > problem.state_dim:
            raise ConfigError(f"export.slice_axis must be between 1 and {problem.state_dim}")
    if not isinstance(ex["slice_values"], list):
        raise ConfigError("export.slice_values must be a list")
    slice_values = [_number(v, "export.slice_values") for v in ex["slice_values"]]
    if slice_values and slice_axis is None:
        raise ConfigError("export.slice_values needs export.slice_axis")

    seed_v = _int(raw["seed"], "seed")
    return ExperimentConfig(
        raw=raw, problem=problem, ics=ics, ic_axes=axes, M=M, N=N, half_basis=orders["half_basis"],
        opt=opt, auglag=auglag, quad_rule=q["rule"], quad_nodes=nodes, ref_steps=steps,
        transcription=ref["transcription"], export_points=points, slice_axis=slice_axis,
        slice_values=slice_values, seed=seed_v, output_dir=Path(raw["output_dir"]),
    )
