"""First-order minimizers used by the inner loop of the augmented Lagrangian.

All three methods take an oracle ``fg(x) -> (value, gradient)`` over a flat
float vector.  CG and LBFGS share a strong-Wolfe line search (bracketing
plus zoom with safeguarded cubic interpolation); plain gradient descent
keeps a fixed step length.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError, RunError

log = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], tuple[float, np.ndarray]]

METHODS = ("gd", "cg", "lbfgs")
STATUSES = ("converged", "k_max_reached", "linesearch_failed")


@dataclass
class OptimizerConfig:
    """Inner-loop settings.

    ``c2`` left as ``None`` resolves to 0.1 for CG and 0.9 otherwise.
    """

    method: str = "lbfgs"
    eps: float = 1e-5
    kmax: int = 1000
    alpha: float = 1e-3
    memory: int = 10
    c1: float = 1e-4
    c2: Optional[float] = None
    max_linesearch: int = 40

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ArgumentError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.eps > 0:
            raise ArgumentError(f"eps must be positive, got {self.eps}")
        if int(self.kmax) != self.kmax or self.kmax < 1:
            raise ArgumentError(f"kmax must be a positive integer, got {self.kmax}")
        self.kmax = int(self.kmax)
        if not self.alpha > 0:
            raise ArgumentError(f"alpha must be positive, got {self.alpha}")
        if self.memory < 1:
            raise ArgumentError(f"memory must be at least 1, got {self.memory}")
        if not 0 < self.c1 < self.curvature < 1:
            raise ArgumentError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.curvature}")
        if self.max_linesearch < 2:
            raise ArgumentError("max_linesearch must be at least 2")

    @property
    def curvature(self) -> float:
        if self.c2 is not None:
            return float(self.c2)
        return 0.1 if self.method == "cg" else 0.9


@dataclass
class LineSearchResult:
    step: float
    value: float
    grad: np.ndarray
    direction: np.ndarray
    evaluations: int
    ok: bool
    reset: bool = False


@dataclass
class OptimizeResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    evaluations: int
    status: str
    restarts: int = 0
    values: list = field(default_factory=list)

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad))

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _cubic_min(a, fa, da, b, fb, db) -> Optional[float]:
    """Minimiser of the cubic through two points with slopes, or None."""
    if a == b:
        return None
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0 or not math.isfinite(disc):
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def wolfe_line_search(
    fg: Oracle,
    x: np.ndarray,
    direction: np.ndarray,
    cfg: OptimizerConfig,
    value: Optional[float] = None,
    grad: Optional[np.ndarray] = None,
    step: float = 1.0,
) -> LineSearchResult:
    """Find a step satisfying the strong Wolfe conditions along ``direction``.

    A non-descent direction (``g.d >= 0``) is replaced by ``-g`` and the
    result is flagged with ``reset=True``.  Trial points with a non-finite
    value are treated as overshoots.  On failure the result carries
    ``ok=False`` together with the best sufficient-decrease point seen, or
    step 0 if there was none.
    """
    x = np.asarray(x, dtype=float)
    if value is None or grad is None:
        value, grad = fg(x)
    d = np.asarray(direction, dtype=float)
    slope0 = float(grad @ d)
    reset = False
    if not slope0 < 0:
        d = -grad
        slope0 = -float(grad @ grad)
        reset = True
    if slope0 == 0:
        return LineSearchResult(0.0, value, grad, d, 0, True, reset)
    c1, c2 = cfg.c1, cfg.curvature
    evals = 0
    best = (0.0, value, grad)

    def phi(a):
        nonlocal evals, best
        evals += 1
        with np.errstate(all="ignore"):
            f, g = fg(x + a * d)
        f = float(f)
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            return math.inf, g, math.nan
        if f <= value + c1 * a * slope0 and f < best[1]:
            best = (a, f, g)
        return f, g, float(g @ d)

    def done(a, f, g):
        return LineSearchResult(a, f, g, d, evals, True, reset)

    def failed():
        a, f, g = best
        return LineSearchResult(a, f, g, d, evals, False, reset)

    def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi):
        while evals < cfg.max_linesearch:
            width = hi - lo
            if abs(width) <= 1e-16 * max(1.0, abs(lo)):
                break
            trial = None
            if math.isfinite(f_hi) and math.isfinite(d_hi):
                trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            lo_edge, hi_edge = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if trial is None or not lo_edge <= trial <= hi_edge:
                trial = lo + 0.5 * width
            f, g, dp = phi(trial)
            if f > value + c1 * trial * slope0 or f >= f_lo:
                hi, f_hi, d_hi = trial, f, dp
                continue
            if abs(dp) <= -c2 * slope0:
                return done(trial, f, g)
            if dp * (hi - lo) >= 0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = trial, f, dp
        return failed()

    a_prev, f_prev, d_prev = 0.0, float(value), slope0
    a = float(step)
    first = True
    while evals < cfg.max_linesearch:
        f, g, dp = phi(a)
        if f > value + c1 * a * slope0 or (not first and f >= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, f, dp)
        if abs(dp) <= -c2 * slope0:
            return done(a, f, g)
        if dp >= 0:
            return zoom(a, f, dp, a_prev, f_prev, d_prev)
        a_prev, f_prev, d_prev = a, f, dp
        a *= 2.0
        first = False
    return failed()


def _secant_refine(
    fg: Oracle, x: np.ndarray, value: float, grad: np.ndarray, ls: LineSearchResult, cfg: OptimizerConfig
) -> tuple[LineSearchResult, int]:
    """One secant step on the directional derivative after a Wolfe step.

    Conjugacy of CG directions relies on near-exact line minimisation; on
    a quadratic the secant point is the exact minimiser along the line.
    The refined point is kept only if it lowers the value and still meets
    sufficient decrease.  Returns the result and the extra oracle calls.
    """
    d = ls.direction
    s0 = float(grad @ d)
    sa = float(ls.grad @ d)
    if not s0 < sa or abs(sa) <= 1e-12 * abs(s0):
        return ls, 0
    a = ls.step * s0 / (s0 - sa)
    if not 0 < a < 10 * ls.step or abs(a - ls.step) <= 1e-3 * ls.step:
        return ls, 0
    with np.errstate(all="ignore"):
        f, g = fg(x + a * d)
    f = float(f)
    if math.isfinite(f) and np.all(np.isfinite(g)) and f < ls.value and f <= value + cfg.c1 * a * s0:
        return LineSearchResult(a, f, g, d, ls.evaluations + 1, True, ls.reset), 1
    return ls, 1


def _two_loop(grad: np.ndarray, pairs) -> np.ndarray:
    """``-H grad`` from stored ``(s, y, rho)`` pairs; ``-grad`` when empty."""
    q = grad.copy()
    if not pairs:
        return -q
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize(
    fg: Oracle,
    x0,
    cfg: OptimizerConfig,
    callback: Optional[Callable[[int, np.ndarray, float, float], None]] = None,
) -> OptimizeResult:
    """Minimise ``fg`` from ``x0`` until ``|grad| < eps`` or ``kmax`` steps.

    ``callback(k, x, value, grad_norm)`` is called after every accepted step.
    Raises :class:`RunError` when the oracle is non-finite at an accepted
    iterate.
    """
    x = np.array(x0, dtype=float)
    value, grad = fg(x)
    value = float(value)
    evals = 1
    if not (math.isfinite(value) and np.all(np.isfinite(grad))):
        raise RunError("objective is not finite at the starting point")
    values = [value]
    status = "k_max_reached"
    restarts = 0
    pairs: deque = deque(maxlen=cfg.memory)
    d = -grad
    prev_slope = None
    last_step = None
    k = 0
    while True:
        gnorm = float(np.linalg.norm(grad))
        if gnorm < cfg.eps:
            status = "converged"
            break
        if k >= cfg.kmax:
            break

        if cfg.method == "gd":
            x_new = x - cfg.alpha * grad
            with np.errstate(all="ignore"):
                f_new, g_new = fg(x_new)
            evals += 1
            f_new = float(f_new)
            if not (math.isfinite(f_new) and np.all(np.isfinite(g_new))):
                raise RunError(f"gradient descent diverged at iteration {k + 1}; reduce alpha")
            x, value, grad = x_new, f_new, g_new
        else:
            if cfg.method == "lbfgs":
                d = _two_loop(grad, pairs)
                step0 = 1.0 if pairs else min(1.0, 1.0 / gnorm)
            else:
                slope = float(grad @ d)
                if slope >= -1e-12 * gnorm * float(np.linalg.norm(d)):
                    log.debug("cg restart at iteration %d", k)
                    restarts += 1
                    d = -grad
                    slope = -gnorm * gnorm
                if last_step is None:
                    step0 = min(1.0, 1.0 / gnorm)
                else:
                    step0 = min(1.0, 1.01 * last_step * prev_slope / slope)
            ls = wolfe_line_search(fg, x, d, cfg, value, grad, step0)
            evals += ls.evaluations
            if not ls.ok and ls.step == 0 and not ls.reset:
                # one retry along steepest descent
                restarts += 1
                pairs.clear()
                ls = wolfe_line_search(fg, x, -grad, cfg, value, grad, min(1.0, 1.0 / gnorm))
                evals += ls.evaluations
            if ls.step == 0:
                status = "linesearch_failed"
                break
            if cfg.method == "cg" and ls.ok:
                ls, extra = _secant_refine(fg, x, value, grad, ls, cfg)
                evals += extra
            s = ls.step * ls.direction
            x_new = x + s
            y = ls.grad - grad
            if cfg.method == "lbfgs":
                sy = float(s @ y)
                if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                    pairs.append((s, y, 1.0 / sy))
            else:
                gg = float(grad @ grad)
                beta = max(0.0, float(ls.grad @ y) / gg)
                prev_slope = float(grad @ ls.direction)
                last_step = ls.step
                d = -ls.grad + beta * ls.direction
                prev_slope = prev_slope if prev_slope < 0 else -gg
            x, value, grad = x_new, ls.value, ls.grad
            if not ls.ok:
                log.debug("line search accepted a sufficient-decrease step only at iteration %d", k + 1)
        k += 1
        values.append(value)
        if callback is not None:
            callback(k, x, value, float(np.linalg.norm(grad)))
    return OptimizeResult(x, value, grad, k, evals, status, restarts, values)
