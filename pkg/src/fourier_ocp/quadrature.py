"""Fixed-grid composite quadrature (trapezoid / Simpson)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DataError

RULES = ("trapezoid", "simpson")


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    rule: str
    nodes: int
    lo: float
    hi: float
    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.nodes


def make_grid(lo: float, hi: float, nodes: int = 201, rule: str = "simpson") -> QuadratureGrid:
    """Build a uniform grid on ``[lo, hi]`` with composite-rule weights.

    ``nodes`` must be odd and at least 3 for both rules so that the same
    grid can be switched between rules without changing the collocation set.
    """
    if rule not in RULES:
        raise ArgumentError(f"unknown quadrature rule {rule!r}; expected one of {RULES}")
    if nodes < 3 or nodes % 2 == 0:
        raise ArgumentError(f"quadrature needs an odd node count >= 3, got {nodes}")
    if not hi >= lo:
        raise ArgumentError(f"empty interval [{lo}, {hi}]")
    points = np.linspace(lo, hi, nodes)
    h = (hi - lo) / (nodes - 1)
    if rule == "trapezoid":
        weights = np.full(nodes, h)
        weights[0] = weights[-1] = h / 2
    else:
        weights = np.empty(nodes)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        weights[0] = weights[-1] = 1.0
        weights *= h / 3
    points.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureGrid(rule, nodes, float(lo), float(hi), points, weights)


def _check_finite(samples: np.ndarray, where: str) -> None:
    bad = ~np.isfinite(samples)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DataError(f"non-finite integrand sample at node {idx} ({where})")


def integrate(f: Callable[[np.ndarray], np.ndarray] | np.ndarray, grid: QuadratureGrid) -> float:
    """Weighted sum of ``f`` over the grid.

    ``f`` may be a vectorised callable or an array of samples at
    ``grid.points``.
    """
    samples = np.asarray(f(grid.points) if callable(f) else f, dtype=float)
    if samples.shape != grid.points.shape:
        samples = np.broadcast_to(samples, grid.points.shape)
    _check_finite(samples, f"grid [{grid.lo}, {grid.hi}]")
    return float(grid.weights @ samples)


def tensor_integrate(f: Callable[..., np.ndarray], grids: Sequence[QuadratureGrid]) -> float:
    """Product-rule integral of ``f(x1, x2, ...)`` over a box.

    ``f`` is called once on the full ``ij``-indexed mesh.
    """
    if not grids:
        raise ArgumentError("tensor_integrate needs at least one grid")
    mesh = np.meshgrid(*(g.points for g in grids), indexing="ij")
    samples = np.broadcast_to(np.asarray(f(*mesh), dtype=float), mesh[0].shape)
    _check_finite(samples, "tensor grid")
    out = samples
    for g in reversed(grids):
        out = out @ g.weights
    return float(out)
