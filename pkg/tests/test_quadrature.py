import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourier_ocp.errors import ArgumentError, DataError
from fourier_ocp.quadrature import integrate, make_grid, tensor_integrate


class TestOneDimensional:
    @pytest.mark.parametrize("rule", ["simpson", "trapezoid"])
    def test_constant(self, rule):
        assert integrate(lambda t: np.ones_like(t), make_grid(0.0, 2.0, 11, rule)) == pytest.approx(2.0, abs=1e-14)

    def test_cubic_simpson_five_nodes(self):
        assert abs(integrate(lambda t: t**3, make_grid(0.0, 1.0, 5)) - 0.25) < 1e-12

    def test_sine_simpson(self):
        assert abs(integrate(lambda t: np.sin(math.pi * t), make_grid(0.0, 1.0, 201)) - 2 / math.pi) < 1e-8

    def test_sample_array_input(self):
        g = make_grid(0.0, 1.0, 21)
        assert integrate(g.points**2, g) == pytest.approx(1 / 3, abs=1e-12)

    def test_refinement_never_worse(self):
        exact = {
            "exp": (np.exp, math.e - 1),
            "sin": (lambda t: np.sin(3 * t), (1 - math.cos(3)) / 3),
            "poly": (lambda t: t**5 - t, 1 / 6 - 1 / 2),
        }
        for f, v in exact.values():
            errs = [abs(integrate(f, make_grid(0.0, 1.0, n)) - v) for n in (5, 9, 17, 33, 65)]
            assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))

    def test_even_simpson_nodes_rejected(self):
        with pytest.raises(ArgumentError):
            make_grid(0.0, 1.0, 10)

    def test_bad_interval(self):
        with pytest.raises(ArgumentError):
            make_grid(1.0, 0.0)

    def test_non_finite_sample(self):
        with pytest.raises(DataError):
            integrate(lambda t: np.where(t == 0.5, np.nan, t), make_grid(0.0, 1.0, 5))

    @settings(max_examples=40, deadline=None)
    @given(
        a=st.floats(-5, 5), b=st.floats(-5, 5),
        c=st.floats(-3, 3), k=st.integers(1, 5),
    )
    def test_linearity(self, a, b, c, k):
        g = make_grid(0.0, 2.0, 101)
        f1 = lambda t: np.cos(k * t) + c * t
        f2 = lambda t: t**k
        lhs = integrate(lambda t: a * f1(t) + b * f2(t), g)
        rhs = a * integrate(f1, g) + b * integrate(f2, g)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestTensor:
    def test_constant(self):
        g = make_grid(0.0, 1.0, 11)
        assert tensor_integrate(lambda t, u: np.ones_like(t), [g, g]) == pytest.approx(1.0, abs=1e-14)

    def test_bilinear(self):
        g = make_grid(0.0, 1.0, 11)
        assert abs(tensor_integrate(lambda t, u: t * u, [g, g]) - 0.25) < 1e-10

    def test_separable_sines(self):
        g = make_grid(0.0, 1.0, 201)
        val = tensor_integrate(lambda t, u: np.sin(math.pi * t) * np.sin(math.pi * u), [g, g])
        assert abs(val - 4 / math.pi**2) < 1e-8
