import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourier_ocp import bounds as bd
from fourier_ocp.errors import ArgumentError, DataError
from fourier_ocp.fourier import DomainBox, FourierSurface


def triangle(t):
    return 1.0 - np.abs(t - 1.0)


class TestTotalVariation:
    def test_sine(self):
        assert abs(bd.total_variation(np.sin, 0.0, 2 * math.pi) - 4.0) < 1e-4

    def test_constant(self):
        assert bd.total_variation(lambda t: np.full_like(t, 3.0), 0.0, 1.0) == 0.0

    def test_ramp(self):
        assert abs(bd.total_variation(lambda t: t, 0.0, 1.0) - 1.0) < 1e-6

    def test_two_dimensional_plane(self):
        c = bd.total_variation_2d(lambda t, u: 3 * t + 4 * u, [(0, 1), (0, 2)])
        assert c == pytest.approx(10.0, rel=1e-9)

    def test_non_finite(self):
        with pytest.raises(DataError):
            bd.total_variation(lambda t: np.where(t == t[3], np.nan, t), 0.0, 1.0, 11)

    def test_bad_interval(self):
        with pytest.raises(ArgumentError):
            bd.total_variation(np.sin, 1.0, 1.0)


class TestSizing:
    def test_one_dimensional_example(self):
        assert bd.coefficients_for_tolerance_1d(1.0, math.pi, 0.1) == 10

    def test_zero_variation(self):
        assert bd.coefficients_for_tolerance_1d(1.0, 0.0, 0.1) == 0
        assert bd.coefficients_for_tolerance_2d(1.0, 1.0, 0.0, 0.1) == (0, 0)

    def test_doubling_horizon(self):
        k1 = bd.coefficients_for_tolerance_1d(1.0, math.pi, 0.1)
        k2 = bd.coefficients_for_tolerance_1d(2.0, math.pi, 0.1)
        assert k2 == 2 * k1
        assert bd.bound_1d(2.0, 1.0, 5) == pytest.approx(2 * bd.bound_1d(1.0, 1.0, 5))

    def test_two_dimensional_example(self):
        assert bd.coefficients_for_tolerance_2d(1.0, 1.0, math.pi**2, 1.0) == (4, 2)

    def test_two_dimensional_halving(self):
        kl1, _ = bd.coefficients_for_tolerance_2d(1.0, 1.0, math.pi**2, 1.0)
        kl2, _ = bd.coefficients_for_tolerance_2d(1.0, 1.0, math.pi**2, 0.5)
        assert kl2 == 2 * kl1

    def test_nd_reduces_to_1d(self):
        assert bd.coefficients_for_tolerance_nd([1.0], math.pi, 0.1) == 20

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_bad_tolerance(self, eps):
        with pytest.raises(ArgumentError):
            bd.coefficients_for_tolerance_1d(1.0, 1.0, eps)
        with pytest.raises(ArgumentError):
            bd.coefficients_for_tolerance_2d(1.0, 1.0, 1.0, eps)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10), st.floats(0.0, 10), st.floats(1e-4, 1.0))
    def test_sized_order_meets_tolerance(self, T, C, eps):
        K = bd.coefficients_for_tolerance_1d(T, C, eps)
        if K > 0:
            assert bd.bound_1d(T, C, K) <= eps * (1 + 1e-9)
            if K > 1:
                assert bd.bound_1d(T, C, K - 1) > eps


class TestEmpirical:
    def test_exact_series(self):
        s = FourierSurface(DomainBox(1.0), (3,), np.array([[0, 0.4, 0, -0.2], [0.1, 0, 0.3, 0]]))
        f = lambda t: s(t)
        assert bd.empirical_truncation_mse(f, 1.0, 3) < 1e-10

    def test_triangle_order_eight(self):
        rep = bd.check_bound_1d(triangle, 1.0, 8)
        assert rep.C == pytest.approx(2.0, rel=1e-6)
        assert rep.satisfied

    def test_triangle_sweep_decreasing(self):
        errs = []
        for K in (2, 4, 8, 16):
            rep = bd.check_bound_1d(triangle, 1.0, K)
            assert rep.satisfied
            errs.append(rep.empirical_mse)
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_parseval_tail_matches(self):
        rep = bd.check_bound_1d(triangle, 1.0, 5)
        assert rep.parseval_tail == pytest.approx(rep.empirical_mse, rel=0.05)

    def test_smallest_order(self):
        K = bd.smallest_sufficient_order(triangle, 1.0, 1e-4)
        assert K is not None
        assert bd.empirical_truncation_mse(triangle, 1.0, K) <= 1e-4
        assert bd.empirical_truncation_mse(triangle, 1.0, K - 1) > 1e-4

    def test_corpus_sizes(self):
        assert len(bd.corpus_1d()) == 10
        assert len(bd.corpus_2d()) == 8

    def test_surface_variation(self):
        s = FourierSurface(DomainBox(1.0), (1,), np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert bd.surface_variation(s) == pytest.approx(4.0, rel=1e-6)
