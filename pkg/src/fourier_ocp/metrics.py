"""Error measures between an approximate control and a reference."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError

PROVENANCE = ("analytic", "shooting", "transcription-oracle")


@dataclass
class MetricSet:
    """Control errors averaged over every grid point of every IC.

    ``mape`` is the raw mean absolute percentage error over points where
    the reference is not exactly zero; ``smape`` is the symmetric
    companion ``|diff| / ((|ref| + |approx|) / 2)``.
    """

    mse: float
    mae: float
    mape: float
    smape: float
    points: int
    excluded_zeros: int = 0
    provenance: str = "analytic"
    j_pct_error: Optional[float] = None
    j_sim: list = field(default_factory=list)
    j_star: list = field(default_factory=list)
    j_surrogate: list = field(default_factory=list)


def control_metrics(
    approx,
    reference,
    provenance: str = "analytic",
) -> MetricSet:
    """Metrics from sampled values; both arguments have the same shape.

    Pass one row per initial condition (or a flat vector) of values on
    the evaluation grid.
    """
    if provenance not in PROVENANCE:
        raise ArgumentError(f"provenance must be one of {PROVENANCE}")
    a = np.asarray(approx, dtype=float).ravel()
    r = np.asarray(reference, dtype=float).ravel()
    if a.size == 0:
        raise ArgumentError("empty evaluation grid")
    if a.shape != r.shape:
        raise ArgumentError(f"shape mismatch: {a.shape} vs {r.shape}")
    diff = a - r
    nz = r != 0
    mape = float(np.mean(np.abs(diff[nz]) / np.abs(r[nz])) * 100) if nz.any() else float("nan")
    denom = (np.abs(r) + np.abs(a)) / 2
    pos = denom > 0
    smape = float(np.sum(np.abs(diff[pos]) / denom[pos]) / a.size * 100)
    return MetricSet(
        mse=float(np.mean(diff**2)),
        mae=float(np.mean(np.abs(diff))),
        mape=mape,
        smape=smape,
        points=int(a.size),
        excluded_zeros=int((~nz).sum()),
        provenance=provenance,
    )


def surface_metrics(
    gamma_hat: Callable[[np.ndarray, np.ndarray], np.ndarray],
    gamma_ref: Callable[[np.ndarray, np.ndarray], np.ndarray],
    times: np.ndarray,
    ics: Sequence[Sequence[float]],
    provenance: str = "analytic",
) -> MetricSet:
    """:func:`control_metrics` on the grid ``times x ics``.

    Both callables take ``(times, ic)`` and return values at ``times``.
    """
    ics = list(ics)
    if len(ics) == 0 or np.size(times) == 0:
        raise ArgumentError("empty evaluation grid")
    approx = np.array([gamma_hat(times, ic) for ic in ics])
    ref = np.array([gamma_ref(times, ic) for ic in ics])
    return control_metrics(approx, ref, provenance)


def cost_pct_error(j_hat: Sequence[float], j_star: Sequence[float]) -> float:
    """Mean over ICs of ``|J_hat - J*| / J* * 100``.

    ICs with ``J* = 0`` are skipped when ``J_hat`` is also 0 and make the
    result undefined (NaN) otherwise.
    """
    jh = np.asarray(j_hat, dtype=float).ravel()
    js = np.asarray(j_star, dtype=float).ravel()
    if jh.shape != js.shape or jh.size == 0:
        raise ArgumentError("J_hat and J_star must be non-empty and the same length")
    if np.any(js < 0):
        raise ArgumentError("optimal costs must be non-negative")
    zero = js == 0
    if np.any(zero & (jh != 0)):
        return float("nan")
    keep = ~zero
    if not keep.any():
        return 0.0
    return float(np.mean(np.abs(jh[keep] - js[keep]) / js[keep]) * 100)
