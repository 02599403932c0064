"""Benchmark optimal control problems.

State and control quantities are passed around as *lists of components*
(one array or :class:`~fourier_ocp.autodiff.AdValue` per state dimension)
so the same dynamics and cost code serves plain numpy simulation and the
taped Lagrangian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArgumentError


def lincomb(weights: Sequence[float], items: Sequence):
    """``sum_j w_j * items[j]`` skipping zero weights and unit multiplies."""
    acc = None
    for w, x in zip(weights, items):
        if w == 0:
            continue
        term = x if w == 1 else (-x if w == -1 else w * x)
        acc = term if acc is None else acc + term
    return 0.0 if acc is None else acc


@dataclass(frozen=True, eq=False)
class CirculantGame:
    n: int
    payoff: np.ndarray  # L_N
    actuation: np.ndarray  # M_N

    @property
    def target(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)


def circulant(first_row: Sequence[float]) -> np.ndarray:
    """Row ``i+1`` is row ``i`` cyclically shifted one place to the right."""
    r = np.asarray(first_row, dtype=float)
    return np.array([np.roll(r, i) for i in range(len(r))])


def build_circulant_game(n: int) -> CirculantGame:
    """Odd-circulant game with ``n`` strategies.

    The payoff first row alternates ``0, -1, 1, -1, 1, ...`` (each strategy
    beats the ones an even number of steps behind it); the actuation matrix
    has a 1 exactly where the payoff matrix has a 1.
    """
    if int(n) != n or n < 3 or n % 2 == 0:
        raise ArgumentError(f"circulant game needs an odd N >= 3, got {n}")
    n = int(n)
    row = np.array([0.0] + [(-1.0) ** k for k in range(1, n)])
    payoff = circulant(row)
    actuation = (payoff == 1.0).astype(float)
    return CirculantGame(n, payoff, actuation)


def quadratic_form_field(a: np.ndarray, u: Sequence):
    """Components ``u_i((e_i - u)^T A u)``; works on arrays or AD values."""
    au = [lincomb(a[i], u) for i in range(len(u))]
    uau = lincomb([1.0] * len(u), [ui * aui for ui, aui in zip(u, au)])
    return [ui * (aui - uau) for ui, aui in zip(u, au)]


def replicator_rhs(game: CirculantGame, u, gamma):
    """``F(u) + gamma * G(u)``.

    ``u`` is either an ``(N,)`` / ``(N, P)`` array or a list of N components;
    the return type follows the input.
    """
    as_array = isinstance(u, np.ndarray)
    comps = list(u) if not as_array else [u[i] for i in range(u.shape[0])]
    if len(comps) != game.n:
        raise ArgumentError(f"state has {len(comps)} components, game has {game.n} strategies")
    f = quadratic_form_field(game.payoff, comps)
    g = quadratic_form_field(game.actuation, comps)
    out = [fi + gamma * gi for fi, gi in zip(f, g)]
    return np.array(out) if as_array else out


def quadratic_form_array(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`quadratic_form_field` for ``u`` of shape (N,) or (N, K)."""
    au = a @ u
    return u * (au - np.sum(u * au, axis=0))


def quadratic_form_vjp(a: np.ndarray, u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``J(u)^T lam`` for the field above, columnwise for (N, K) inputs."""
    au = a @ u
    uau = np.sum(u * au, axis=0)
    grad_uau = (a + a.T) @ u
    return lam * (au - uau) + a.T @ (lam * u) - grad_uau * np.sum(lam * u, axis=0)


def replicator_array(game: CirculantGame, u: np.ndarray, gamma) -> np.ndarray:
    return quadratic_form_array(game.payoff, u) + gamma * quadratic_form_array(game.actuation, u)


def quadratic_form_jacobian(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Jacobian of ``u -> [u_i((e_i - u)^T A u)]_i`` at a point."""
    au = a @ u
    uau = u @ au
    grad_uau = (a + a.T) @ u
    return np.diag(au - uau) + u[:, None] * (a - grad_uau[None, :])


@dataclass(frozen=True, eq=False)
class OcpDefinition:
    """A continuous-time OCP in the form the solver consumes.

    ``dynamics_rhs(u, gamma)`` and ``running_cost(u, gamma, t)`` take state
    component lists.  ``terminal`` holds target values per component, with
    ``None`` for free components (or is ``None`` altogether).
    """

    name: str
    state_dim: int
    horizon: float
    control_weight: float
    dynamics_rhs: Callable
    running_cost: Callable
    target: Optional[np.ndarray] = None
    terminal: Optional[tuple] = None
    simplex: bool = False
    nonneg: bool = False
    game: Optional[CirculantGame] = None
    params: dict = field(default_factory=dict)
    array_rhs: Optional[Callable] = None

    def rhs_array(self, u: np.ndarray, gamma) -> np.ndarray:
        """Dynamics on a state array of shape ``(d,)`` or ``(d, P)``."""
        if self.array_rhs is not None:
            return self.array_rhs(u, gamma)
        return np.array(self.dynamics_rhs([u[i] for i in range(self.state_dim)], gamma))

    def cost_array(self, u: np.ndarray, gamma, t=None):
        return self.running_cost([u[i] for i in range(self.state_dim)], gamma, t)


def lq_particle_problem(horizon: float, r: float, terminal: Sequence[float]) -> OcpDefinition:
    """Unit mass on a line, ``x'' = gamma``, cost ``int r*gamma^2``, fixed end state."""
    if not horizon > 0:
        raise ArgumentError(f"horizon must be positive, got {horizon}")
    if not r > 0:
        raise ArgumentError(f"control weight must be positive, got {r}")
    if len(terminal) != 2:
        raise ArgumentError("terminal state must have two components (position, velocity)")

    def rhs(u, gamma):
        return [u[1], gamma]

    def cost(u, gamma, t=None):
        return r * (gamma * gamma)

    def rhs_fast(u, gamma):
        return np.stack([u[1], np.broadcast_to(gamma, np.shape(u[1])).astype(float)])

    return OcpDefinition(
        name="lq",
        state_dim=2,
        horizon=float(horizon),
        control_weight=float(r),
        dynamics_rhs=rhs,
        running_cost=cost,
        terminal=tuple(float(v) for v in terminal),
        params={"T": float(horizon), "r": float(r), "terminal": [float(v) for v in terminal]},
        array_rhs=rhs_fast,
    )


def rps_problem(game: CirculantGame, horizon: float, r: float) -> OcpDefinition:
    """Steer an odd-circulant replicator population to the barycentre.

    Cost ``int 1/2 |u - u*|^2 + r/2 gamma^2``, free terminal state, with
    simplex and non-negativity residuals switched on.
    """
    if not horizon > 0:
        raise ArgumentError(f"horizon must be positive, got {horizon}")
    if not r > 0:
        raise ArgumentError(f"control weight must be positive, got {r}")
    target = game.target

    def rhs(u, gamma):
        return replicator_rhs(game, list(u), gamma)

    def cost(u, gamma, t=None):
        dev = [ui - ti for ui, ti in zip(u, target)]
        sq = lincomb([1.0] * len(dev), [e * e for e in dev])
        return 0.5 * sq + (0.5 * r) * (gamma * gamma)

    return OcpDefinition(
        name="rps",
        state_dim=game.n,
        horizon=float(horizon),
        control_weight=float(r),
        dynamics_rhs=rhs,
        running_cost=cost,
        target=target,
        simplex=True,
        nonneg=True,
        game=game,
        params={"T": float(horizon), "r": float(r), "N": game.n},
        array_rhs=lambda u, gamma: replicator_array(game, u, gamma),
    )
