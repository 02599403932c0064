"""Augmented Lagrangian over Fourier coefficients.

The control and every state component are Fourier surfaces over
``(t, u0)``.  Integrals over ``[0, T]`` use one fixed quadrature grid that
is also the collocation grid for the integrated residuals, and every term
is summed over the training initial conditions ``U0``.  Precomputed
design matrices turn each surface into a single matrix-vector product, so
one tape evaluates the whole Lagrangian for all of ``U0`` at once.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .errors import ArgumentError, DataError, RunError
from .fourier import (
    DomainBox,
    FourierSurface,
    coeff_shape,
    combination_bits,
    design_matrix,
    half_basis_mask,
    structural_mask,
)
from .optimizers import OptimizerConfig, minimize
from .problems import OcpDefinition
from .quadrature import QuadratureGrid, make_grid

log = logging.getLogger(__name__)

MULTIPLIER_RULES = ("classic", "proportional")
HISTORY_COLUMNS = (
    "outer", "inner", "L", "f", "h_dynamics", "h_nonneg_max", "h_simplex",
    "h_initial", "h_terminal", "grad_norm", "nu",
)


# ---------------------------------------------------------------------------
# coefficient layout


def time_order_mask(orders: Sequence[int], sin_order: int, cos_order: int) -> np.ndarray:
    """Keep sine-in-time terms up to ``sin_order`` and cosine-in-time up to ``cos_order``."""
    mask = np.ones(coeff_shape(orders), dtype=bool)
    for b, bits in enumerate(combination_bits(len(orders))):
        cap = cos_order if bits[0] else sin_order
        mask[b, cap + 1:] = False
    return mask


@dataclass(frozen=True, eq=False)
class SurfaceLayout:
    """Shared domain, orders and active-coefficient mask of all surfaces.

    Surface 0 is the control; surfaces ``1..d`` are the state components.
    """

    domain: DomainBox
    orders: tuple[int, ...]
    mask: np.ndarray
    n_surfaces: int

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def size(self) -> int:
        return self.n_active * self.n_surfaces

    def split(self, theta: np.ndarray) -> list[np.ndarray]:
        return list(np.asarray(theta, dtype=float).reshape(self.n_surfaces, self.n_active))

    def surfaces(self, theta: np.ndarray) -> list[FourierSurface]:
        out = []
        for part in self.split(theta):
            coeffs = np.zeros(coeff_shape(self.orders))
            coeffs[self.mask] = part
            out.append(FourierSurface(self.domain, self.orders, coeffs))
        return out

    def pack(self, surfaces: Sequence[FourierSurface]) -> np.ndarray:
        if len(surfaces) != self.n_surfaces:
            raise ArgumentError(f"expected {self.n_surfaces} surfaces, got {len(surfaces)}")
        return np.concatenate([s.coeffs[self.mask] for s in surfaces])


def build_layout(
    problem: OcpDefinition,
    ics: np.ndarray,
    M: int,
    N: int,
    half_basis: bool = False,
) -> SurfaceLayout:
    """Orders and mask for a problem trained on the initial conditions ``ics``.

    Every state component is an IC axis; axes on which ``U0`` does not vary
    are degenerate and get order 0.  Varying axes use order ``N`` and time
    uses order ``M``.  With no varying axis the surfaces are functions of
    time alone, and ``M``/``N`` become the sine/cosine orders in time.
    """
    ics = _check_ics(problem, ics)
    if int(M) != M or int(N) != N or M < 0 or N < 0:
        raise ArgumentError(f"orders must be non-negative integers, got M={M}, N={N}")
    lo, hi = ics.min(axis=0), ics.max(axis=0)
    domain = DomainBox(problem.horizon, tuple(lo), tuple(hi))
    varying = [not domain.degenerate(i) for i in range(domain.ic_dim)]
    if any(varying):
        orders = (int(M),) + tuple(int(N) if v else 0 for v in varying)
        mask = structural_mask(domain, orders)
    else:
        orders = (max(int(M), int(N)),) + (0,) * domain.ic_dim
        mask = structural_mask(domain, orders) & time_order_mask(orders, int(M), int(N))
    if half_basis:
        mask &= half_basis_mask(orders)
    if not mask.any():
        raise ArgumentError("no active coefficients for these orders")
    return SurfaceLayout(domain, orders, mask, 1 + problem.state_dim)


def _check_ics(problem: OcpDefinition, ics) -> np.ndarray:
    ics = np.atleast_2d(np.asarray(ics, dtype=float))
    if ics.shape[1] != problem.state_dim or ics.shape[0] == 0:
        raise ArgumentError(
            f"initial conditions must have shape (n, {problem.state_dim}), got {ics.shape}"
        )
    if not np.all(np.isfinite(ics)):
        raise ArgumentError("initial conditions must be finite")
    return ics


# ---------------------------------------------------------------------------
# state of the outer loop


@dataclass
class AugLagSettings:
    upsilon0: float = 1.0
    mu0: float = 10.0
    reduction: float = 0.25  # violation reduction factor lambda
    penalty_factor: float = 10.0  # lambda^j
    multiplier_factor: float = 1.0  # lambda_j (proportional rule only)
    tau: float = 1e-4
    ell_lim: int = 30
    multiplier_rule: str = "classic"
    mu_max: float = 1e8
    upsilon_min: float = 1e-12
    init_jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.multiplier_rule not in MULTIPLIER_RULES:
            raise ArgumentError(f"multiplier_rule must be one of {MULTIPLIER_RULES}")
        if not (self.upsilon0 > 0 and self.mu0 > 0):
            raise ArgumentError("initial multipliers and penalties must be positive")
        if not 0 < self.reduction <= 1:
            raise ArgumentError(f"reduction factor must lie in (0, 1], got {self.reduction}")
        if not self.penalty_factor >= 1:
            raise ArgumentError("penalty_factor must be at least 1")
        if not self.multiplier_factor > 0:
            raise ArgumentError("multiplier_factor must be positive")
        if not self.tau >= 0:
            raise ArgumentError("tau must be non-negative")
        if int(self.ell_lim) != self.ell_lim or self.ell_lim < 1:
            raise ArgumentError(f"ell_lim must be a positive integer, got {self.ell_lim}")
        self.ell_lim = int(self.ell_lim)
        if not self.mu_max >= self.mu0:
            raise ArgumentError("mu_max must be at least mu0")
        if not self.init_jitter >= 0:
            raise ArgumentError("init_jitter must be non-negative")


@dataclass
class AugLagState:
    names: tuple[str, ...]
    upsilon: np.ndarray
    mu: np.ndarray
    settings: AugLagSettings
    nu: float = math.inf
    nu_prev: float = math.inf
    ell: int = 0

    @classmethod
    def initial(cls, names: Sequence[str], settings: AugLagSettings) -> "AugLagState":
        n = len(names)
        return cls(tuple(names), np.full(n, settings.upsilon0), np.full(n, settings.mu0), settings)


def outer_update(state: AugLagState, h: np.ndarray) -> str:
    """One outer-iteration update in place; returns the branch taken.

    If the worst violation dropped below ``reduction * nu_prev`` the
    multipliers move (``multiplier``), otherwise the penalties of the
    residuals still above that level grow (``penalty``).
    """
    s = state.settings
    h = np.asarray(h, dtype=float)
    nu = float(h.max()) if h.size else 0.0
    if nu < s.reduction * state.nu_prev:
        branch = "multiplier"
        if s.multiplier_rule == "proportional":
            state.upsilon = np.maximum(s.multiplier_factor * state.upsilon * h, s.upsilon_min)
        else:
            state.upsilon = state.upsilon + 2.0 * state.mu * h
    else:
        branch = "penalty"
        offending = h >= s.reduction * state.nu_prev
        state.mu = np.where(offending, np.minimum(state.mu * s.penalty_factor, s.mu_max), state.mu)
    state.nu = nu
    state.nu_prev = nu
    state.ell += 1
    return branch


# ---------------------------------------------------------------------------
# the Lagrangian


class LagrangianModel:
    """Residuals and Lagrangian of one problem on one set of training ICs."""

    def __init__(
        self,
        problem: OcpDefinition,
        ics,
        layout: SurfaceLayout,
        grid: Optional[QuadratureGrid] = None,
    ) -> None:
        self.problem = problem
        self.ics = _check_ics(problem, ics)
        self.layout = layout
        if grid is None:
            grid = make_grid(0.0, problem.horizon)
        if grid.lo != 0.0 or abs(grid.hi - problem.horizon) > 1e-12 * problem.horizon:
            raise ArgumentError("quadrature grid must span [0, T]")
        self.grid = grid
        n_ic = self.ics.shape[0]
        nq = len(grid)
        t = np.tile(grid.points, n_ic)
        ic = np.repeat(self.ics, nq, axis=0)
        cols = layout.mask.ravel()
        dom, orders = layout.domain, layout.orders
        self.t_points = t
        self.weights = np.tile(grid.weights, n_ic)
        self.phi = design_matrix(dom, orders, t, ic)[:, cols]
        self.dphi = design_matrix(dom, orders, t, ic, derivative=True)[:, cols]
        self.phi0 = design_matrix(dom, orders, np.zeros(n_ic), self.ics)[:, cols]
        self.phiT = design_matrix(dom, orders, np.full(n_ic, problem.horizon), self.ics)[:, cols]
        d = problem.state_dim
        names = ["dynamics"]
        if problem.nonneg:
            names += [f"nonneg({i + 1})" for i in range(d)]
        if problem.simplex:
            names.append("simplex")
        names.append("initial")
        self.terminal_components: list[int] = []
        if problem.terminal is not None:
            self.terminal_components = [i for i, v in enumerate(problem.terminal) if v is not None]
            if self.terminal_components:
                names.append("terminal")
        self.residual_names = tuple(names)

    # ---- assembly shared by tape and plain evaluation ------------------
    def _terms(self, parts):
        """``(f, [h_j])`` for coefficient blocks that are arrays or AD values."""
        problem = self.problem
        d = problem.state_dim
        w = self.weights
        gamma = ad.matvec(self.phi, parts[0])
        u = [ad.matvec(self.phi, parts[i + 1]) for i in range(d)]
        du = [ad.matvec(self.dphi, parts[i + 1]) for i in range(d)]
        f = ad.dot(w, problem.running_cost(u, gamma, self.t_points))
        rhs = problem.dynamics_rhs(u, gamma)
        gap = None
        for i in range(d):
            sq = ad.square(du[i] - rhs[i])
            gap = sq if gap is None else gap + sq
        hs = [ad.dot(w, 0.5 * gap)]
        if problem.nonneg:
            hs += [ad.dot(w, ad.max0(-u[i])) for i in range(d)]
        if problem.simplex:
            s = u[0]
            for i in range(1, d):
                s = s + u[i]
            hs.append(ad.dot(w, 0.5 * ad.square(s - 1.0)))
        init = None
        for i in range(d):
            sq = ad.square(ad.matvec(self.phi0, parts[i + 1]) - self.ics[:, i])
            init = sq if init is None else init + sq
        hs.append(0.5 * ad.total(init))
        if self.terminal_components:
            term = None
            for i in self.terminal_components:
                target = float(problem.terminal[i])
                sq = ad.square(ad.matvec(self.phiT, parts[i + 1]) - target)
                term = sq if term is None else term + sq
            hs.append(0.5 * ad.total(term))
        return f, hs

    def residuals(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """Plain evaluation: running cost ``f`` and residual vector ``h``."""
        parts = self.layout.split(theta)
        with np.errstate(all="ignore"):
            f, hs = self._terms(parts)
        h = np.array([float(v) for v in hs])
        f = float(f)
        for name, v in zip(self.residual_names, h):
            if not math.isfinite(v):
                raise DataError(f"residual {name} is not finite")
        if not math.isfinite(f):
            raise DataError("running cost is not finite")
        return f, h

    def violations(self, theta: np.ndarray) -> tuple[np.ndarray, float]:
        """Residual vector and ``nu = max_j h_j``."""
        _, h = self.residuals(theta)
        return h, float(h.max())

    def lagrangian_value(self, theta: np.ndarray, upsilon, mu) -> tuple[ad.AdValue, ad.Tape]:
        """The Lagrangian as the output node of a fresh tape."""
        tape = ad.Tape()
        parts = [tape.input(p) for p in self.layout.split(theta)]
        f, hs = self._terms(parts)
        total = f
        for j, h in enumerate(hs):
            total = total + float(upsilon[j]) * h + float(mu[j]) * ad.square(h)
        return total, tape

    def value_and_grad(self, theta: np.ndarray, upsilon, mu) -> tuple[float, np.ndarray]:
        with np.errstate(all="ignore"):
            out, tape = self.lagrangian_value(theta, upsilon, mu)
            value = float(out.value)
            if not math.isfinite(value):
                return math.inf, np.full(self.layout.size, np.nan)
            return value, tape.gradient_vector(out)

    def lagrangian_plain(self, theta: np.ndarray, upsilon, mu) -> float:
        f, h = self.residuals(theta)
        return float(f + np.dot(upsilon, h) + np.dot(mu, h * h))

    # ---- initialisation ------------------------------------------------
    def initial_coefficients(self, jitter: float = 0.0, seed: Optional[int] = None) -> np.ndarray:
        """Zero control; each state starts at the mean of its ICs over ``U0``."""
        lay = self.layout
        shape = coeff_shape(lay.orders)
        # all-cosine combination, every index 0: the constant basis function
        idx = (2 ** len(lay.orders) - 1,) + (0,) * len(lay.orders)
        surfaces = []
        for s in range(lay.n_surfaces):
            c = np.zeros(shape)
            if s > 0:
                c[idx] = self.ics[:, s - 1].mean()
            surfaces.append(FourierSurface(lay.domain, lay.orders, c))
        theta = lay.pack(surfaces)
        if jitter > 0:
            rng = np.random.default_rng(seed)
            theta = theta + rng.uniform(-jitter, jitter, size=theta.size)
        return theta


# ---------------------------------------------------------------------------
# Algorithm driver


@dataclass
class HistoryRow:
    outer: int
    inner: int
    L: float
    f: float
    h_dynamics: float
    h_nonneg_max: float
    h_simplex: float
    h_initial: float
    h_terminal: float
    grad_norm: float
    nu: float

    def as_list(self) -> list:
        return [getattr(self, c) for c in HISTORY_COLUMNS]


@dataclass
class SolveResult:
    theta: np.ndarray
    surfaces: list
    state: AugLagState
    history: list
    residuals: dict
    running_cost: float
    outer_iterations: int
    inner_iterations: int
    inner_statuses: list
    converged: bool
    wall_time: float
    branches: list = field(default_factory=list)

    @property
    def nu(self) -> float:
        return float(max(self.residuals.values()))


def _history_row(model: LagrangianModel, outer: int, inner: int, theta, state, grad_norm) -> HistoryRow:
    f, h = model.residuals(theta)
    named = dict(zip(model.residual_names, h))
    nonneg = [v for k, v in named.items() if k.startswith("nonneg")]
    L = float(f + state.upsilon @ h + state.mu @ (h * h))
    return HistoryRow(
        outer, inner, L, f,
        named.get("dynamics", 0.0),
        max(nonneg) if nonneg else 0.0,
        named.get("simplex", 0.0),
        named.get("initial", 0.0),
        named.get("terminal", 0.0),
        float(grad_norm),
        float(h.max()),
    )


def solve(
    model: LagrangianModel,
    settings: AugLagSettings,
    opt: OptimizerConfig,
    theta0: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
    callback: Optional[Callable[[HistoryRow, np.ndarray], None]] = None,
) -> SolveResult:
    """Outer augmented-Lagrangian loop.

    Each outer iteration minimises the Lagrangian to ``|grad| < eps`` or
    ``kmax`` steps, then stops if ``nu <= tau`` and otherwise updates the
    multipliers or penalties.  At most ``ell_lim`` outer iterations run.
    ``callback(row, theta)`` sees every history row with its coefficients.
    A non-finite Lagrangian raises :class:`RunError` with the history so
    far attached.
    """
    start = time.perf_counter()
    state = AugLagState.initial(model.residual_names, settings)
    theta = model.initial_coefficients(settings.init_jitter, seed) if theta0 is None else np.array(theta0, dtype=float)
    if theta.shape != (model.layout.size,):
        raise ArgumentError(f"theta0 must have {model.layout.size} entries")
    history: list[HistoryRow] = []
    g0 = model.value_and_grad(theta, state.upsilon, state.mu)[1]
    history.append(_history_row(model, 0, 0, theta, state, np.linalg.norm(g0)))
    if callback:
        callback(history[-1], theta)
    statuses, branches = [], []
    inner_total = 0
    converged = False
    outer = 0
    while outer < settings.ell_lim:
        outer += 1
        ups, mu = state.upsilon.copy(), state.mu.copy()

        def fg(x, ups=ups, mu=mu):
            return model.value_and_grad(x, ups, mu)

        try:
            res = minimize(fg, theta, opt)
        except RunError as exc:
            exc.history = history
            raise
        theta = res.x
        inner_total += res.iterations
        statuses.append(res.status)
        row = _history_row(model, outer, res.iterations, theta, state, res.grad_norm)
        history.append(row)
        if callback:
            callback(row, theta)
        log.info(
            "outer %d: L=%.6g f=%.6g nu=%.3e inner=%d (%s)",
            outer, row.L, row.f, row.nu, res.iterations, res.status,
        )
        h, nu = model.violations(theta)
        if nu <= settings.tau:
            state.nu = nu
            converged = True
            break
        branches.append(outer_update(state, h))
    f, h = model.residuals(theta)
    return SolveResult(
        theta=theta,
        surfaces=model.layout.surfaces(theta),
        state=state,
        history=history,
        residuals=dict(zip(model.residual_names, h.tolist())),
        running_cost=f,
        outer_iterations=outer,
        inner_iterations=inner_total,
        inner_statuses=statuses,
        converged=converged,
        wall_time=time.perf_counter() - start,
        branches=branches,
    )


def settings_dict(settings: AugLagSettings) -> dict:
    return asdict(settings)
