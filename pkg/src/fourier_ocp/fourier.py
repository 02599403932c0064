"""Truncated multidimensional half-range Fourier series.

A surface over ``(t, u0_1, ..., u0_d)`` is the sum of every sin/cos
product of the per-axis harmonics

    time axis:  theta_m = m*pi*t/T,                m = 0..M
    IC axis i:  phi_n   = n*pi*(u0_i - lo_i)/U_i,  n = 0..N_i,  U_i = hi_i - lo_i

Basis combinations are numbered with the time axis as the most significant
bit and ``1`` meaning cosine, so for two axes the combinations 0..3 are
(sin, sin), (sin, cos), (cos, sin), (cos, cos).  An IC axis with ``U_i = 0``
is degenerate: its sine factor is identically 0 and its cosine factor is
1 for ``n = 0`` and 0 otherwise.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DataError
from .quadrature import make_grid

FORMAT_HEADER = "fourier-surface v1"


@dataclass(frozen=True)
class DomainBox:
    horizon: float
    ic_lo: tuple[float, ...] = ()
    ic_hi: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "ic_lo", tuple(float(v) for v in self.ic_lo))
        object.__setattr__(self, "ic_hi", tuple(float(v) for v in self.ic_hi))
        if not self.horizon > 0:
            raise ArgumentError(f"horizon must be positive, got {self.horizon}")
        if len(self.ic_lo) != len(self.ic_hi):
            raise ArgumentError("ic_lo and ic_hi differ in length")
        for i, (lo, hi) in enumerate(zip(self.ic_lo, self.ic_hi)):
            if not lo <= hi:
                raise ArgumentError(f"IC axis {i}: lo {lo} > hi {hi}")

    @property
    def ic_dim(self) -> int:
        return len(self.ic_lo)

    @property
    def spans(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.ic_lo, self.ic_hi))

    def degenerate(self, axis: int) -> bool:
        return self.ic_hi[axis] == self.ic_lo[axis]

    def contains(self, t: float, ic: Sequence[float]) -> bool:
        return 0 <= t <= self.horizon and all(
            lo <= v <= hi for v, lo, hi in zip(ic, self.ic_lo, self.ic_hi)
        )


def n_combinations(d_in: int) -> int:
    return 2**d_in


def combination_bits(d_in: int) -> list[tuple[int, ...]]:
    """Per-axis cos flags of every basis combination, time axis first."""
    return [tuple(int(b) for b in bits) for bits in itertools.product((0, 1), repeat=d_in)]


def coeff_shape(orders: Sequence[int]) -> tuple[int, ...]:
    return (n_combinations(len(orders)),) + tuple(int(o) + 1 for o in orders)


def structural_mask(domain: DomainBox, orders: Sequence[int]) -> np.ndarray:
    """Coefficients that can influence evaluation.

    Excludes sine terms with index 0 on any axis and, on degenerate IC
    axes, everything except the ``n = 0`` cosine term.
    """
    _check_orders(domain, orders)
    mask = np.ones(coeff_shape(orders), dtype=bool)
    for b, bits in enumerate(combination_bits(len(orders))):
        for axis, is_cos in enumerate(bits):
            sl = [b] + [slice(None)] * len(orders)
            if axis > 0 and domain.degenerate(axis - 1):
                if not is_cos:
                    mask[b] = False
                else:
                    sl[axis + 1] = slice(1, None)
                    mask[tuple(sl)] = False
            elif not is_cos:
                sl[axis + 1] = 0
                mask[tuple(sl)] = False
    return mask


def half_basis_mask(orders: Sequence[int]) -> np.ndarray:
    """Keep only combinations with an even number of sine factors.

    This is one fixed choice of "half the basis functions"; for two axes it
    keeps (sin, sin) and (cos, cos).
    """
    mask = np.zeros(coeff_shape(orders), dtype=bool)
    for b, bits in enumerate(combination_bits(len(orders))):
        if (len(bits) - sum(bits)) % 2 == 0:
            mask[b] = True
    return mask


def time_cos_cap_mask(orders: Sequence[int], cos_order: int) -> np.ndarray:
    """Drop cosine-in-time terms with ``m > cos_order``."""
    mask = np.ones(coeff_shape(orders), dtype=bool)
    for b, bits in enumerate(combination_bits(len(orders))):
        if bits[0] == 1:
            mask[b, cos_order + 1:] = False
    return mask


def _check_orders(domain: DomainBox, orders: Sequence[int]) -> None:
    if len(orders) != 1 + domain.ic_dim:
        raise ArgumentError(
            f"need {1 + domain.ic_dim} orders (time + {domain.ic_dim} IC axes), got {len(orders)}"
        )
    if any(int(o) != o or o < 0 for o in orders):
        raise ArgumentError(f"orders must be non-negative integers, got {tuple(orders)}")


@dataclass(eq=False)
class FourierSurface:
    domain: DomainBox
    orders: tuple[int, ...]
    coeffs: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.orders = tuple(int(o) for o in self.orders)
        _check_orders(self.domain, self.orders)
        shape = coeff_shape(self.orders)
        if self.coeffs is None:
            self.coeffs = np.zeros(shape)
        else:
            self.coeffs = np.array(self.coeffs, dtype=float).reshape(shape)

    @property
    def d_in(self) -> int:
        return len(self.orders)

    def __call__(self, t: float, ic: Sequence[float] = ()) -> float:
        return evaluate(self, t, ic)

    def derivative(self, t: float, ic: Sequence[float] = ()) -> float:
        return evaluate_time_derivative(self, t, ic)

    def copy(self) -> "FourierSurface":
        return FourierSurface(self.domain, self.orders, self.coeffs.copy())

    def linear_combination(self, alpha: float, other: "FourierSurface", beta: float) -> "FourierSurface":
        if other.orders != self.orders or other.domain != self.domain:
            raise ArgumentError("surfaces differ in orders or domain")
        return FourierSurface(self.domain, self.orders, alpha * self.coeffs + beta * other.coeffs)


# ---------------------------------------------------------------------------
# evaluation


def _axis_tables(x: np.ndarray, order: int, period_half: float, lo: float, time: bool, deriv: bool):
    """(sin, cos) factor tables of shape (P, order+1) for one axis."""
    n = np.arange(order + 1)
    if period_half == 0:
        s = np.zeros((x.size, order + 1))
        c = np.zeros((x.size, order + 1))
        c[:, 0] = 1.0
        return s, c
    arg = np.outer(x - lo, n * (math.pi / period_half))
    s, c = np.sin(arg), np.cos(arg)
    if time and deriv:
        w = n * (math.pi / period_half)
        s, c = c * w, -s * w
    return s, c


def _points(domain: DomainBox, t, ic) -> tuple[np.ndarray, np.ndarray]:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ic = np.asarray(ic, dtype=float)
    if domain.ic_dim == 0:
        if ic.size not in (0,):
            raise ArgumentError(f"time-only surface takes no IC values, got {ic.size}")
        return t, np.zeros((t.size, 0))
    ic = np.atleast_2d(ic)
    if ic.shape[-1] != domain.ic_dim:
        raise ArgumentError(f"expected {domain.ic_dim} IC values per point, got {ic.shape[-1]}")
    if ic.shape[0] == 1 and t.size > 1:
        ic = np.repeat(ic, t.size, axis=0)
    if t.size == 1 and ic.shape[0] > 1:
        t = np.repeat(t, ic.shape[0])
    if ic.shape[0] != t.size:
        raise ArgumentError("t and ic have different numbers of points")
    return t, ic


def design_matrix(domain: DomainBox, orders: Sequence[int], t, ic=(), derivative: bool = False) -> np.ndarray:
    """Matrix ``Phi`` with ``Phi @ coeffs.ravel()`` = surface values at the points.

    ``t`` has shape (P,) and ``ic`` (P, d) (or a single row broadcast to all
    points).  With ``derivative=True`` the rows give the time derivative.
    """
    _check_orders(domain, orders)
    t, ic = _points(domain, t, ic)
    tables = [_axis_tables(t, orders[0], domain.horizon, 0.0, True, derivative)]
    for i in range(domain.ic_dim):
        tables.append(_axis_tables(ic[:, i], orders[i + 1], domain.spans[i], domain.ic_lo[i], False, False))
    blocks = []
    for bits in combination_bits(len(orders)):
        row = tables[0][bits[0]]
        for axis in range(1, len(orders)):
            f = tables[axis][bits[axis]]
            row = (row[:, :, None] * f[:, None, :]).reshape(t.size, -1)
        blocks.append(row)
    return np.concatenate(blocks, axis=1)


def _check_coeffs(surface: FourierSurface) -> None:
    if not np.all(np.isfinite(surface.coeffs)):
        raise DataError("surface has non-finite coefficients")


def evaluate(surface: FourierSurface, t, ic=()):
    """Surface value at one point (float) or many points (array)."""
    _check_coeffs(surface)
    phi = design_matrix(surface.domain, surface.orders, t, ic)
    out = phi @ surface.coeffs.ravel()
    return float(out[0]) if out.size == 1 and np.ndim(t) == 0 else out


def evaluate_time_derivative(surface: FourierSurface, t, ic=()):
    """Exact term-by-term time derivative of the series."""
    _check_coeffs(surface)
    phi = design_matrix(surface.domain, surface.orders, t, ic, derivative=True)
    out = phi @ surface.coeffs.ravel()
    return float(out[0]) if out.size == 1 and np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# projection


def project_function(
    f: Callable[..., np.ndarray],
    domain: DomainBox,
    orders: Sequence[int],
    nodes: int | Sequence[int] = 2001,
    extension: str = "periodic",
) -> FourierSurface:
    """Orthogonal projection of ``f`` onto the truncated basis.

    Inner products are taken over the doubled box ``[0, 2T] x [lo, lo+2U]...``
    where the half-range basis is orthogonal, using the composite trapezoid
    rule (spectrally accurate for smooth periodic integrands).
    ``extension="periodic"`` samples ``f`` on the doubled box as-is;
    ``"even"`` reflects each coordinate about the box's upper edge so that
    ``f`` is only ever evaluated on the original box.  ``f`` is called on
    an ``ij`` mesh: ``f(t, u1, ..., ud)``.
    """
    _check_orders(domain, orders)
    if extension not in ("periodic", "even"):
        raise ArgumentError(f"unknown extension {extension!r}")
    d_in = len(orders)
    if isinstance(nodes, (int, np.integer)):
        nodes = [int(nodes)] * d_in
    halves = (domain.horizon,) + domain.spans
    los = (0.0,) + domain.ic_lo
    grids, samples_at = [], []
    for axis in range(d_in):
        half, lo = halves[axis], los[axis]
        if half == 0:
            grids.append((np.array([lo]), np.array([1.0])))
            samples_at.append(np.array([lo]))
            continue
        g = make_grid(lo, lo + 2 * half, nodes[axis], "trapezoid")
        pts = g.points
        if extension == "even":
            pts = np.where(pts <= lo + half, pts, 2 * (lo + half) - pts)
        grids.append((g.points, g.weights / (2 * half)))
        samples_at.append(pts)
    mesh = np.meshgrid(*samples_at, indexing="ij")
    vals = np.broadcast_to(np.asarray(f(*mesh), dtype=float), mesh[0].shape)
    if not np.all(np.isfinite(vals)):
        idx = tuple(int(i) for i in np.argwhere(~np.isfinite(vals))[0])
        raise DataError(f"non-finite sample of f at grid index {idx}")

    coeffs = np.zeros(coeff_shape(orders))
    tables = []
    for axis in range(d_in):
        pts, w = grids[axis]
        s, c = _axis_tables(pts, orders[axis], halves[axis], los[axis], False, False)
        # normalisation: mean of sin^2 / cos^2 over a full period is 1/2 (cos_0: 1)
        norm = np.full(orders[axis] + 1, 0.5)
        norm[0] = 1.0
        if halves[axis] == 0:
            norm[:] = 1.0
        s_w = s * w[:, None] / norm
        c_w = c * w[:, None] / norm
        s_w[:, 0] = 0.0
        tables.append((s_w, c_w))
    for b, bits in enumerate(combination_bits(d_in)):
        out = vals
        for axis in range(d_in - 1, -1, -1):
            out = np.tensordot(out, tables[axis][bits[axis]], axes=([axis], [0]))
            # tensordot appends the contracted axis' modes last; move back in place
            out = np.moveaxis(out, -1, axis)
        coeffs[b] = out
    coeffs[~structural_mask(domain, orders)] = 0.0
    return FourierSurface(domain, tuple(orders), coeffs)


# ---------------------------------------------------------------------------
# complex exponential form (1-D)


@dataclass(eq=False)
class ComplexSeries1D:
    """``sum_{k=-K..K} c_k exp(i*pi*k*t/T)``, coefficients stored for k = -K..K."""

    period_half: float
    coeffs: np.ndarray

    @property
    def order(self) -> int:
        return (len(self.coeffs) - 1) // 2

    def coefficient(self, k: int) -> complex:
        return complex(self.coeffs[k + self.order])

    def __call__(self, t) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        k = np.arange(-self.order, self.order + 1)
        vals = np.exp(1j * math.pi * np.multiply.outer(t, k) / self.period_half) @ self.coeffs
        return vals.real if np.ndim(t) else float(vals.real)

    def is_conjugate_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), atol=tol, rtol=0))


def to_complex(surface: FourierSurface) -> ComplexSeries1D:
    if surface.d_in != 1:
        raise ArgumentError("complex form is only defined for time-only surfaces")
    a = surface.coeffs[0]  # sin
    b = surface.coeffs[1]  # cos
    order = surface.orders[0]
    c = np.zeros(2 * order + 1, dtype=complex)
    c[order] = b[0]
    for m in range(1, order + 1):
        c[order + m] = (b[m] - 1j * a[m]) / 2
        c[order - m] = (b[m] + 1j * a[m]) / 2
    return ComplexSeries1D(surface.domain.horizon, c)


def from_complex(series: ComplexSeries1D, tol: float = 1e-12) -> FourierSurface:
    if not series.is_conjugate_symmetric(tol):
        raise DataError("complex coefficients are not conjugate symmetric; series is not real")
    order = series.order
    coeffs = np.zeros((2, order + 1))
    c = series.coeffs
    coeffs[1, 0] = c[order].real
    for m in range(1, order + 1):
        coeffs[1, m] = (c[order + m] + c[order - m]).real
        coeffs[0, m] = (1j * (c[order + m] - c[order - m])).real
    return FourierSurface(DomainBox(series.period_half), (order,), coeffs)


# ---------------------------------------------------------------------------
# persistence


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps_surfaces(surfaces: Sequence[FourierSurface]) -> str:
    """Text blocks, one per surface, in the ``fourier-surface v1`` format."""
    lines = []
    for s in surfaces:
        dom = s.domain
        lines.append(FORMAT_HEADER)
        lines.append(f"dims {s.d_in}")
        lines.append("orders " + " ".join(str(o) for o in s.orders))
        bounds = [f"{_fmt(lo)} {_fmt(hi)}" for lo, hi in zip(dom.ic_lo, dom.ic_hi)]
        lines.append("domain " + " ".join([_fmt(dom.horizon)] + bounds))
        for idx in np.ndindex(s.coeffs.shape):
            lines.append(" ".join(str(i) for i in idx) + " " + _fmt(s.coeffs[idx]))
    return "\n".join(lines) + "\n"


def save_surfaces(path: str | Path, surfaces: Sequence[FourierSurface]) -> None:
    Path(path).write_text(dumps_surfaces(surfaces), newline="\n")


def loads_surfaces(text: str) -> list[FourierSurface]:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    out, pos = [], 0

    def expect(prefix: str) -> list[str]:
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix):
            got = lines[pos] if pos < len(lines) else "end of file"
            raise DataError(f"expected {prefix!r} at record {pos + 1}, got {got!r}")
        fields = lines[pos][len(prefix):].split()
        pos += 1
        return fields

    while pos < len(lines):
        expect(FORMAT_HEADER)
        d_in = int(expect("dims")[0])
        orders = tuple(int(v) for v in expect("orders"))
        dom = [float(v) for v in expect("domain")]
        if len(orders) != d_in or len(dom) != 1 + 2 * (d_in - 1):
            raise DataError("dims, orders and domain lines disagree")
        domain = DomainBox(dom[0], dom[1::2], dom[2::2])
        coeffs = np.zeros(coeff_shape(orders))
        for _ in range(coeffs.size):
            if pos >= len(lines):
                raise DataError("truncated coefficient block")
            parts = lines[pos].split()
            pos += 1
            if len(parts) != d_in + 2:
                raise DataError(f"malformed coefficient line {parts!r}")
            coeffs[tuple(int(p) for p in parts[:-1])] = float(parts[-1])
        out.append(FourierSurface(domain, orders, coeffs))
    return out


def load_surfaces(path: str | Path) -> list[FourierSurface]:
    return loads_surfaces(Path(path).read_text())
