"""Ground-truth solutions used to score the Fourier solver.

* closed-form optimum of the particle problem,
* fixed-step RK4 forward simulation under an arbitrary control,
* indirect single shooting on the Pontryagin system of the replicator
  problem, and an independent direct-transcription optimum used to
  cross-check it.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import ArgumentError, RunError
from .problems import OcpDefinition, quadratic_form_array, quadratic_form_vjp
from .quadrature import QuadratureGrid

log = logging.getLogger(__name__)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray  # (n+1,)
    states: np.ndarray  # (n+1, d)
    control: np.ndarray  # (n+1,)
    cost: float

    def to_csv(self, path) -> None:
        d = self.states.shape[1]
        header = "t," + ",".join(f"u{i + 1}" for i in range(d)) + ",gamma"
        data = np.column_stack([self.times, self.states, self.control])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def _path_integral(samples: np.ndarray, h: float) -> float:
    """Simpson on an even number of intervals, trapezoid otherwise."""
    n = samples.size - 1
    if n % 2 == 0 and n >= 2:
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float(h / 3 * (w @ samples))
    return float(h * (samples.sum() - 0.5 * (samples[0] + samples[-1])))


# ---------------------------------------------------------------------------
# particle problem


def _lq_coefficients(x0, xT, horizon: float) -> tuple[float, float]:
    """``gamma*(t) = alpha + beta * t``."""
    if not horizon > 0:
        raise ArgumentError(f"horizon must be positive, got {horizon}")
    T = float(horizon)
    x0 = np.asarray(x0, dtype=float)
    xT = np.asarray(xT, dtype=float)
    gap = xT - np.array([[1.0, T], [0.0, 1.0]]) @ x0
    alpha = 6.0 / T**2 * gap[0] - 2.0 / T * gap[1]
    beta = -12.0 / T**3 * gap[0] + 6.0 / T**2 * gap[1]
    return float(alpha), float(beta)


def lq_analytic_control(t, x0, xT, horizon: float):
    """Minimum-effort acceleration steering ``x0`` to ``xT`` in time ``horizon``."""
    alpha, beta = _lq_coefficients(x0, xT, horizon)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > horizon):
        raise ArgumentError("t outside [0, T]")
    out = alpha + beta * t
    return float(out) if out.ndim == 0 else out


def lq_analytic_state(t, x0, xT, horizon: float) -> np.ndarray:
    """Optimal (position, velocity) at times ``t``; shape (len(t), 2)."""
    alpha, beta = _lq_coefficients(x0, xT, horizon)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    p0, v0 = float(x0[0]), float(x0[1])
    v = v0 + alpha * t + beta * t**2 / 2
    x = p0 + v0 * t + alpha * t**2 / 2 + beta * t**3 / 6
    return np.column_stack([x, v])


def lq_analytic_cost(x0, xT, r: float, horizon: float) -> float:
    """``int_0^T r * gamma*(t)^2 dt`` in closed form."""
    alpha, beta = _lq_coefficients(x0, xT, horizon)
    T = float(horizon)
    return float(r * (alpha**2 * T + alpha * beta * T**2 + beta**2 * T**3 / 3))


# ---------------------------------------------------------------------------
# forward simulation


def rk4_simulate(
    problem: OcpDefinition,
    u0: Sequence[float],
    control: Callable[[np.ndarray], np.ndarray] | float,
    step_count: int = 2000,
) -> Trajectory:
    """Classical fixed-step RK4 under an open-loop control ``gamma(t)``.

    ``control`` must accept an array of times.  The achieved cost is the
    composite-rule integral of the running cost at the step nodes.
    """
    if step_count < 10:
        raise ArgumentError(f"step_count must be at least 10, got {step_count}")
    T = problem.horizon
    h = T / step_count
    half_times = np.linspace(0.0, T, 2 * step_count + 1)
    if callable(control):
        g_half = np.asarray(control(half_times), dtype=float).reshape(-1)
    else:
        g_half = np.full(half_times.size, float(control))
    u = np.array(u0, dtype=float)
    if u.shape != (problem.state_dim,):
        raise ArgumentError(f"initial state must have {problem.state_dim} components")
    states = np.empty((step_count + 1, problem.state_dim))
    states[0] = u
    rhs = problem.rhs_array
    for k in range(step_count):
        g0, gm, g1 = g_half[2 * k], g_half[2 * k + 1], g_half[2 * k + 2]
        k1 = rhs(u, g0)
        k2 = rhs(u + 0.5 * h * k1, gm)
        k3 = rhs(u + 0.5 * h * k2, gm)
        k4 = rhs(u + h * k3, g1)
        u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise RunError(f"non-finite state at t = {(k + 1) * h:.6g}")
        states[k + 1] = u
    times = half_times[::2]
    gamma = g_half[::2]
    running = np.asarray(problem.cost_array(states.T, gamma, times), dtype=float)
    running = np.broadcast_to(running, times.shape)
    return Trajectory(times, states, gamma, _path_integral(running, h))


def rk4_simulate_on_grid(problem, u0, control, grid: QuadratureGrid, substeps: int = 10) -> Trajectory:
    """:func:`rk4_simulate` with steps nested inside ``grid`` (cost uses the fine steps)."""
    return rk4_simulate(problem, u0, control, (grid.nodes - 1) * substeps)


# ---------------------------------------------------------------------------
# replicator problem: Pontryagin shooting


def _pontryagin_rhs(problem: OcpDefinition, u: np.ndarray, lam: np.ndarray):
    """State/costate derivatives and the minimising control, columnwise."""
    game = problem.game
    r = problem.control_weight
    f = quadratic_form_array(game.payoff, u)
    g = quadratic_form_array(game.actuation, u)
    gamma = -np.sum(lam * g, axis=0) / r
    du = f + gamma * g
    dlam = -(u - problem.target[:, None]) - (
        quadratic_form_vjp(game.payoff, u, lam) + gamma * quadratic_form_vjp(game.actuation, u, lam)
    )
    return du, dlam, gamma


def integrate_pontryagin(problem: OcpDefinition, u0, lam0: np.ndarray, steps: int, keep: bool = False):
    """RK4 on the state/costate system; ``lam0`` may hold several columns."""
    T = problem.horizon
    h = T / steps
    lam = np.array(lam0, dtype=float)
    single = lam.ndim == 1
    if single:
        lam = lam[:, None]
    u = np.repeat(np.asarray(u0, dtype=float)[:, None], lam.shape[1], axis=1)
    if keep:
        us, lams = [u.copy()], [lam.copy()]
    for _ in range(steps):
        a1, b1, _ = _pontryagin_rhs(problem, u, lam)
        a2, b2, _ = _pontryagin_rhs(problem, u + 0.5 * h * a1, lam + 0.5 * h * b1)
        a3, b3, _ = _pontryagin_rhs(problem, u + 0.5 * h * a2, lam + 0.5 * h * b2)
        a4, b4, _ = _pontryagin_rhs(problem, u + h * a3, lam + h * b3)
        u = u + (h / 6) * (a1 + 2 * a2 + 2 * a3 + a4)
        lam = lam + (h / 6) * (b1 + 2 * b2 + 2 * b3 + b4)
        if keep:
            us.append(u.copy())
            lams.append(lam.copy())
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(lam))):
        raise RunError("non-finite state/costate during shooting integration")
    if keep:
        return np.array(us), np.array(lams)
    return (u[:, 0], lam[:, 0]) if single else (u, lam)


@dataclass(eq=False)
class ShootingResult:
    trajectory: Trajectory
    costate: np.ndarray  # (n+1, d)
    costate0: np.ndarray
    terminal_residual: float
    newton_iterations: int
    start: np.ndarray

    @property
    def cost(self) -> float:
        return self.trajectory.cost

    def hamiltonian(self, problem: OcpDefinition) -> np.ndarray:
        u = self.trajectory.states.T
        lam = self.costate.T
        gamma = self.trajectory.control
        run = 0.5 * np.sum((u - problem.target[:, None]) ** 2, axis=0) + 0.5 * problem.control_weight * gamma**2
        return run + np.sum(lam * problem.rhs_array(u, gamma), axis=0)

    def control_gradient(self, problem: OcpDefinition) -> np.ndarray:
        """``dH/dgamma = r*gamma + lam^T G(u)`` at every node."""
        u = self.trajectory.states.T
        g = quadratic_form_array(problem.game.actuation, u)
        return problem.control_weight * self.trajectory.control + np.sum(self.costate.T * g, axis=0)


def _newton_shoot(problem, u0, lam0, steps, tol, max_iter, fd_step):
    d = problem.state_dim
    lam0 = np.array(lam0, dtype=float)
    eye = np.eye(d) * fd_step
    it = 0
    try:
        with np.errstate(all="ignore"):
            _, lam_t = integrate_pontryagin(problem, u0, lam0, steps)
    except RunError:
        return lam0, np.inf, it
    res = np.linalg.norm(lam_t)
    while res > tol and it < max_iter:
        it += 1
        cols = np.column_stack([lam0[:, None] + eye, lam0[:, None] - eye])
        try:
            with np.errstate(all="ignore"):
                _, lt = integrate_pontryagin(problem, u0, cols, steps)
        except RunError:
            return lam0, res, it
        jac = (lt[:, :d] - lt[:, d:]) / (2 * fd_step)
        try:
            step = np.linalg.solve(jac, -lam_t)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(jac, lam_t, rcond=None)[0]
        alpha = 1.0
        while True:
            trial = lam0 + alpha * step
            try:
                with np.errstate(all="ignore"):
                    _, lt_trial = integrate_pontryagin(problem, u0, trial, steps)
                r_trial = np.linalg.norm(lt_trial)
            except RunError:
                lt_trial, r_trial = None, np.inf
            if np.isfinite(r_trial) and r_trial < (1 - 1e-4 * alpha) * res:
                break
            if alpha < 1e-8:
                return lam0, res, it
            alpha *= 0.5
        lam0, lam_t, res = trial, lt_trial, r_trial
        log.debug("shooting iter %d: |lambda(T)| = %.3e (damping %.3g)", it, res, alpha)
    return lam0, res, it


def rps_shooting_reference(
    problem: OcpDefinition,
    u0: Sequence[float],
    steps: int = 2000,
    tol: float = 1e-10,
    max_iter: int = 50,
    fd_step: float = 1e-6,
    multistart: bool = False,
) -> ShootingResult:
    """Optimal control of the replicator problem from the necessary conditions.

    Solves ``lambda(T) = 0`` for ``lambda(0)`` by damped Newton with central
    finite-difference sensitivities.  Starts from ``lambda(0) = 0`` and falls
    back to the grid ``{-1, 0, 1}^d`` if that fails; with ``multistart=True``
    every grid start is run and the lowest-cost converged solution wins.
    """
    if problem.game is None:
        raise ArgumentError("shooting reference needs a replicator problem")
    d = problem.state_dim
    u0 = np.asarray(u0, dtype=float)
    starts = [np.zeros(d)] + [np.array(p, dtype=float) for p in itertools.product((-1.0, 0.0, 1.0), repeat=d) if any(p)]
    best: Optional[ShootingResult] = None
    for start in starts:
        lam0, res, it = _newton_shoot(problem, u0, start, steps, tol, max_iter, fd_step)
        if res > tol:
            log.info("shooting from %s did not converge (|lambda(T)| = %.2e)", start, res)
            continue
        us, lams = integrate_pontryagin(problem, u0, lam0, steps, keep=True)
        states, costate = us[:, :, 0], lams[:, :, 0]
        g = quadratic_form_array(problem.game.actuation, states.T)
        gamma = -np.sum(costate.T * g, axis=0) / problem.control_weight
        times = np.linspace(0.0, problem.horizon, steps + 1)
        running = problem.cost_array(states.T, gamma, times)
        traj = Trajectory(times, states, gamma, _path_integral(np.asarray(running), problem.horizon / steps))
        result = ShootingResult(traj, costate, lam0, res, it, start)
        if best is None or result.cost < best.cost:
            best = result
        if not multistart:
            break
    if best is None:
        raise RunError("shooting did not converge from any start; try more Newton iterations or multistart")
    return best


# ---------------------------------------------------------------------------
# replicator problem: direct transcription cross-check


def direct_transcription_reference(
    problem: OcpDefinition,
    u0: Sequence[float],
    intervals: int = 2000,
    gtol: float = 1e-12,
    maxiter: int = 2000,
) -> tuple[float, np.ndarray]:
    """Optimal cost with piecewise-constant control, minimised by L-BFGS-B.

    One RK4 step per interval; the state cost uses the trapezoid rule and
    the control cost is exact for the piecewise-constant control.  The
    gradient is the discrete adjoint of the RK4 recursion.  Returns
    ``(J, gamma_per_interval)``.
    """
    if problem.game is None:
        raise ArgumentError("transcription reference needs a replicator problem")
    game = problem.game
    L, M = game.payoff, game.actuation
    r = problem.control_weight
    target = problem.target
    n = intervals
    h = problem.horizon / n
    wts = np.full(n + 1, h)
    wts[0] = wts[-1] = h / 2
    x0 = np.asarray(u0, dtype=float)
    c = (h / 6) * np.array([1.0, 2.0, 2.0, 1.0])

    def fg(gam):
        xs = np.empty((n + 1, x0.size))
        stages = np.empty((n, 4, x0.size))
        xs[0] = x0
        x = x0
        for k in range(n):
            g = gam[k]
            s1 = x
            k1 = quadratic_form_array(L, s1) + g * quadratic_form_array(M, s1)
            s2 = x + 0.5 * h * k1
            k2 = quadratic_form_array(L, s2) + g * quadratic_form_array(M, s2)
            s3 = x + 0.5 * h * k2
            k3 = quadratic_form_array(L, s3) + g * quadratic_form_array(M, s3)
            s4 = x + h * k3
            k4 = quadratic_form_array(L, s4) + g * quadratic_form_array(M, s4)
            x = x + c[0] * k1 + c[1] * k2 + c[2] * k3 + c[3] * k4
            stages[k] = (s1, s2, s3, s4)
            xs[k + 1] = x
        dev = xs - target
        J = 0.5 * float(wts @ np.sum(dev**2, axis=1)) + 0.5 * r * h * float(gam @ gam)
        grad = r * h * gam.copy()
        p = wts[n] * dev[n]

        def vjp(s, g, b):
            return quadratic_form_vjp(L, s, b) + g * quadratic_form_vjp(M, s, b)

        for k in range(n - 1, -1, -1):
            g = gam[k]
            s1, s2, s3, s4 = stages[k]
            b4 = c[3] * p
            q4 = vjp(s4, g, b4)
            b3 = c[2] * p + h * q4
            q3 = vjp(s3, g, b3)
            b2 = c[1] * p + 0.5 * h * q3
            q2 = vjp(s2, g, b2)
            b1 = c[0] * p + 0.5 * h * q2
            q1 = vjp(s1, g, b1)
            grad[k] += (
                quadratic_form_array(M, s1) @ b1 + quadratic_form_array(M, s2) @ b2
                + quadratic_form_array(M, s3) @ b3 + quadratic_form_array(M, s4) @ b4
            )
            p = p + q1 + q2 + q3 + q4 + wts[k] * dev[k]
        return J, grad

    res = optimize.minimize(
        fg, np.zeros(n), jac=True, method="L-BFGS-B",
        options={"gtol": gtol, "ftol": 1e-15, "maxiter": maxiter, "maxcor": 20},
    )
    return float(res.fun), res.x
