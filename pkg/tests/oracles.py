"""Independent numerical oracles shared by the tests."""
from __future__ import annotations

import numpy as np


def five_point_gradient(fn, x: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences; valid where ``fn`` is smooth on ``[x - 2h, x + 2h]``."""
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h)
    return g


def gradient_mismatch(ad_grad: np.ndarray, fd_grad: np.ndarray, abs_tol: float = 1e-6, rel_tol: float = 1e-6) -> float:
    """Largest componentwise error in units of ``max(abs_tol, rel_tol * |fd|)``; pass when <= 1."""
    allowed = np.maximum(abs_tol, rel_tol * np.abs(fd_grad))
    return float(np.max(np.abs(ad_grad - fd_grad) / allowed))


def random_lagrangian_points(model, count: int, scale: float, seed: int):
    """``(theta, upsilon, mu)`` triples around the solver's starting point."""
    rng = np.random.default_rng(seed)
    n = len(model.residual_names)
    base = model.initial_coefficients()
    for _ in range(count):
        theta = base + rng.normal(scale=scale, size=base.size)
        yield theta, rng.uniform(0.5, 2.0, n), rng.uniform(1.0, 100.0, n)


def min_state(model, theta: np.ndarray) -> float:
    """Smallest state value on the training grid (distance from the max0 kink)."""
    parts = model.layout.split(theta)
    return float(min((model.phi @ p).min() for p in parts[1:]))
