"""Truncation-error bounds for Fourier approximations of bounded-variation functions.

For a function with total variation ``C`` over one period ``[0, 2T]`` the
complex coefficients obey ``|c_k| <= C / (2 pi |k|)``, which gives

    1-D:  MSE(K)    <= T C^2 / (pi^2 K)
    2-D:  MSE(K, L) <= 4 T U C^2 / (pi^4 K L)

where the MSE is the mean square residual over the period box.  This
module sizes orders from a tolerance, estimates ``C`` numerically and
checks the bounds empirically.  It also holds a small named corpus of
continuous periodic test functions used by the CLI and the tests.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError, DataError
from .fourier import DomainBox, FourierSurface, evaluate, project_function
from .quadrature import make_grid


@dataclass
class BoundReport:
    C: float
    T: float
    K: int
    bound_value: float
    empirical_mse: float
    satisfied: bool
    U: Optional[float] = None
    L: Optional[int] = None
    parseval_tail: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def _check_tol(eps: float) -> None:
    if not eps > 0:
        raise ArgumentError(f"tolerance must be positive, got {eps}")


def _check_finite(vals: np.ndarray) -> None:
    if not np.all(np.isfinite(vals)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(vals))[0])
        raise DataError(f"non-finite sample at grid index {idx}")


# ---------------------------------------------------------------------------
# total variation


def total_variation(f: Callable, lo: float, hi: float, nodes: int = 20001) -> float:
    """``int_lo^hi |f'|`` with ``f'`` from central differences at cell midpoints."""
    if not hi > lo:
        raise ArgumentError("need hi > lo")
    x = np.linspace(lo, hi, nodes)
    v = np.asarray(f(x), dtype=float)
    _check_finite(v)
    # midpoint rule on (f(x+h/2) - f(x-h/2)) / h collapses to a sum of jumps
    return float(np.sum(np.abs(np.diff(v))))


def total_variation_2d(
    f: Callable,
    box: Sequence[tuple[float, float]],
    nodes: int = 801,
) -> float:
    """``iint |grad f|`` over a rectangle, central differences and trapezoid rule."""
    (t0, t1), (u0, u1) = box
    if not (t1 > t0 and u1 > u0):
        raise ArgumentError("box must have positive extent")
    gt = make_grid(t0, t1, nodes, "trapezoid")
    gu = make_grid(u0, u1, nodes, "trapezoid")
    tt, uu = np.meshgrid(gt.points, gu.points, indexing="ij")
    v = np.asarray(f(tt, uu), dtype=float)
    _check_finite(v)
    ft, fu = np.gradient(v, gt.points, gu.points, edge_order=2)
    return float(gt.weights @ np.hypot(ft, fu) @ gu.weights)


# ---------------------------------------------------------------------------
# sizing


def bound_1d(T: float, C: float, K: int) -> float:
    if K < 1:
        raise ArgumentError("K must be at least 1")
    return T * C * C / (math.pi**2 * K)


def bound_2d(T: float, U: float, C: float, K: int, L: int) -> float:
    if K < 1 or L < 1:
        raise ArgumentError("K and L must be at least 1")
    return 4 * T * U * C * C / (math.pi**4 * K * L)


def coefficients_for_tolerance_1d(T: float, C: float, eps: float) -> int:
    """Smallest ``K`` with ``T C^2 / (pi^2 K) <= eps``."""
    _check_tol(eps)
    if not (T > 0 and C >= 0):
        raise ArgumentError("need T > 0 and C >= 0")
    return int(math.ceil(T * C * C / (math.pi**2 * eps) - 1e-12))


def coefficients_for_tolerance_2d(T: float, U: float, C: float, eps: float) -> tuple[int, int]:
    """``(KL, K)``: the required product and a balanced split ``K = L``."""
    _check_tol(eps)
    if not (T > 0 and U > 0 and C >= 0):
        raise ArgumentError("need T, U > 0 and C >= 0")
    kl = int(math.ceil(4 * T * U * C * C / (math.pi**4 * eps) - 1e-12))
    return kl, int(math.ceil(math.sqrt(kl)))


def coefficients_for_tolerance_nd(halves: Sequence[float], C: float, eps: float) -> int:
    """Heuristic product ``K_1...K_n`` from ``2^n T_1...T_n C^2 / (pi^(2n) prod K)``.

    An unproven generalisation of the 1-D/2-D bounds; no guarantee.
    """
    _check_tol(eps)
    n = len(halves)
    if n == 0 or any(not h > 0 for h in halves) or C < 0:
        raise ArgumentError("need positive half-periods and C >= 0")
    val = 2**n * math.prod(halves) * C * C / (math.pi ** (2 * n) * eps)
    return int(math.ceil(val - 1e-12))


# ---------------------------------------------------------------------------
# empirical checks


def _mse_1d(f: Callable, T: float, K: int, nodes: int) -> tuple[float, FourierSurface]:
    surf = project_function(f, DomainBox(T), (K,), nodes=nodes)
    g = make_grid(0.0, 2 * T, 2 * nodes - 1, "trapezoid")
    resid = np.asarray(f(g.points), dtype=float) - evaluate(surf, g.points)
    return float(g.weights @ resid**2 / (2 * T)), surf


def parseval_tail(f: Callable, T: float, K: int, upto: Optional[int] = None, samples: Optional[int] = None) -> float:
    """``sum_{K < |k| <= upto} |c_k|^2`` from an FFT of periodic samples (default ``upto = 20K``)."""
    upto = 20 * max(K, 1) if upto is None else upto
    n = samples or max(8192, 8 * upto)
    t = 2 * T * np.arange(n) / n
    v = np.asarray(f(t), dtype=float)
    _check_finite(v)
    c = np.fft.rfft(v) / n
    k = np.arange(c.size)
    sel = (k > K) & (k <= upto)
    return float(2 * np.sum(np.abs(c[sel]) ** 2))


def empirical_truncation_mse(
    f: Callable,
    T: float,
    K: int,
    nodes: int = 4001,
) -> float:
    """Mean square residual over ``[0, 2T]`` of the order-``K`` projection of ``f``."""
    if K < 0:
        raise ArgumentError("K must be non-negative")
    return _mse_1d(f, T, K, nodes)[0]


def empirical_truncation_mse_2d(f: Callable, T: float, U: float, K: int, L: int, nodes: int = 401) -> float:
    """2-D analogue over ``[0, 2T] x [0, 2U]``; ``f(t, u)`` takes mesh arrays."""
    dom = DomainBox(T, (0.0,), (U,))
    surf = project_function(f, dom, (K, L), nodes=nodes)
    gt = make_grid(0.0, 2 * T, nodes, "trapezoid")
    gu = make_grid(0.0, 2 * U, nodes, "trapezoid")
    tt, uu = np.meshgrid(gt.points, gu.points, indexing="ij")
    approx = evaluate(surf, tt.ravel(), uu.ravel()[:, None]).reshape(tt.shape)
    resid = np.asarray(f(tt, uu), dtype=float) - approx
    return float(gt.weights @ resid**2 @ gu.weights / (4 * T * U))


def check_bound_1d(f: Callable, T: float, K: int, C: Optional[float] = None, nodes: int = 4001) -> BoundReport:
    """Empirical MSE against ``T C^2 / (pi^2 K)``, with the Parseval tail attached."""
    if C is None:
        C = total_variation(f, 0.0, 2 * T)
    mse = empirical_truncation_mse(f, T, K, nodes)
    bound = bound_1d(T, C, K)
    return BoundReport(C, T, K, bound, mse, mse <= bound, parseval_tail=parseval_tail(f, T, K))


def check_bound_2d(
    f: Callable, T: float, U: float, K: int, L: int, C: Optional[float] = None, nodes: int = 401
) -> BoundReport:
    if C is None:
        C = total_variation_2d(f, [(0.0, 2 * T), (0.0, 2 * U)])
    mse = empirical_truncation_mse_2d(f, T, U, K, L, nodes)
    bound = bound_2d(T, U, C, K, L)
    return BoundReport(C, T, K, bound, mse, mse <= bound, U=U, L=L)


def smallest_sufficient_order(f: Callable, T: float, eps: float, k_max: int = 256) -> Optional[int]:
    """Smallest ``K`` whose empirical MSE is at most ``eps`` (None if above ``k_max``)."""
    _check_tol(eps)
    for K in range(0, k_max + 1):
        if empirical_truncation_mse(f, T, K) <= eps:
            return K
    return None


def surface_variation(surface: FourierSurface, ic: Sequence[float] = (), nodes: int = 20001) -> float:
    """Variation of a solver surface's even extension in time (twice the variation on ``[0, T]``)."""
    T = surface.domain.horizon
    return 2.0 * total_variation(lambda t: evaluate(surface, t, list(ic)), 0.0, T, nodes)


# ---------------------------------------------------------------------------
# named test functions; every one is continuous as a 2T-periodic function


def _corpus_1d(T: float) -> dict[str, Callable]:
    w = math.pi / T
    return {
        "parabola": lambda t: t * (2 * T - t) / T**2,
        "quartic": lambda t: (t * (2 * T - t) / T**2) ** 2,
        "cubic": lambda t: t * (t - T) * (t - 2 * T) / T**3,
        "abs_sin": lambda t: np.abs(np.sin(w * t)),
        "half_wave": lambda t: np.maximum(np.sin(w * t), 0.0),
        "triangle": lambda t: 1.0 - np.abs(t / T - 1.0),
        "double_triangle": lambda t: 1.0 - np.abs(2.0 * np.mod(t / T, 1.0) - 1.0),
        "smooth_step": lambda t: 1.0 / (1.0 + np.exp(-8.0 * np.sin(w * t))),
        "exp_sin": lambda t: np.exp(np.sin(w * t)),
        "bump": lambda t: np.exp(-(((t - T) / (0.2 * T)) ** 2)),
    }


def _corpus_2d(T: float, U: float) -> dict[str, Callable]:
    one = _corpus_1d(T)
    two = _corpus_1d(U)
    wt, wu = math.pi / T, math.pi / U
    return {
        "triangle*triangle": lambda t, u: one["triangle"](t) * two["triangle"](u),
        "parabola*abs_sin": lambda t, u: one["parabola"](t) * two["abs_sin"](u),
        "smooth_step*bump": lambda t, u: one["smooth_step"](t) * two["bump"](u),
        "exp_sin*half_wave": lambda t, u: one["exp_sin"](t) * two["half_wave"](u),
        "quartic*double_triangle": lambda t, u: one["quartic"](t) * two["double_triangle"](u),
        "abs_sin_sum": lambda t, u: np.abs(np.sin(wt * t / 2 + wu * u / 2)),
        "exp_sin_cos": lambda t, u: np.exp(np.sin(wt * t) * np.cos(wu * u)),
        "diagonal_triangle": lambda t, u: 1.0 - np.abs(2.0 * np.mod(t / (2 * T) + u / (2 * U), 1.0) - 1.0),
    }


def corpus_1d(T: float = 1.0) -> dict[str, Callable]:
    """Ten 1-D bounded-variation functions on ``[0, 2T]``."""
    return _corpus_1d(float(T))


def corpus_2d(T: float = 1.0, U: float = 1.0) -> dict[str, Callable]:
    """Five separable and three non-separable functions on ``[0, 2T] x [0, 2U]``."""
    return _corpus_2d(float(T), float(U))
