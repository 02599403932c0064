import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourier_ocp import autodiff as ad
from fourier_ocp.errors import ArgumentError, DataError


def grad1(fn, x):
    tape = ad.Tape()
    v = tape.input(x)
    out = fn(v)
    return float(tape.backward(out)[0])


def central(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


class TestScalarRules:
    def test_identity(self):
        assert grad1(lambda x: x, 3.0) == 1.0

    def test_constant_output(self):
        tape = ad.Tape()
        x = tape.input(3.0)
        c = tape.lift(5.0)
        out = c * 1.0 + x * 0.0
        assert tape.backward(out)[0] == 0.0

    def test_square(self):
        assert grad1(lambda x: x * x, 3.0) == 6.0

    def test_sin_at_zero(self):
        assert grad1(ad.sin, 0.0) == 1.0

    def test_max0_branches(self):
        assert grad1(lambda x: ad.max0(-x), 0.5) == 0.0
        assert grad1(lambda x: ad.max0(-x), -0.5) == -1.0

    def test_sin_cos_product(self):
        g = grad1(lambda x: ad.sin(x) * ad.cos(x), 0.3)
        assert abs(g - math.cos(0.6)) < 1e-12

    def test_division_and_powers(self):
        assert grad1(lambda x: 1.0 / x, 2.0) == pytest.approx(-0.25, abs=1e-15)
        assert grad1(lambda x: ad.pow_int(x, 3), 2.0) == pytest.approx(12.0, abs=1e-12)
        assert grad1(lambda x: x**-2, 2.0) == pytest.approx(-0.25, abs=1e-15)
        assert grad1(ad.sqrt, 4.0) == pytest.approx(0.25, abs=1e-15)
        assert grad1(ad.exp, 1.0) == pytest.approx(math.e, abs=1e-14)

    def test_reused_node_accumulates(self):
        assert grad1(lambda x: x * x * x + x, 2.0) == pytest.approx(13.0, abs=1e-12)


class TestVectorGradients:
    def test_linear_two_inputs(self):
        tape = ad.Tape()
        x, y = tape.input(0.7), tape.input(-1.3)
        g = tape.backward(x + 2 * y)
        assert [float(v) for v in g] == [1.0, 2.0]

    def test_sum_of_squares(self):
        tape = ad.Tape()
        x = tape.input([1.0, 2.0, 3.0])
        out = ad.total(ad.square(x))
        np.testing.assert_array_equal(tape.gradient_vector(out), [2.0, 4.0, 6.0])

    def test_structured_ops_match_fd(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(7, 4))
        w = rng.normal(size=7)

        def plain(x):
            y = a @ x
            return float(w @ np.sin(y) ** 2 + np.sum(np.maximum(y, 0)) + y[[0, 2, 2]].sum())

        def traced(x):
            tape = ad.Tape()
            v = tape.input(x)
            y = ad.matvec(a, v)
            out = ad.dot(w, ad.square(ad.sin(y))) + ad.total(ad.max0(y)) + ad.total(ad.take(y, [0, 2, 2]))
            return tape.gradient_vector(out)

        x = rng.normal(size=4)
        g = traced(x)
        fd = central(plain, x)
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)

    def test_mixed_with_plain_arrays(self):
        assert np.allclose(ad.sin(np.array([0.0])), [0.0])
        assert ad.matvec(np.eye(2), np.array([1.0, 2.0])).tolist() == [1.0, 2.0]
        assert float(ad.value_of(3.0)) == 3.0


class TestTapeContract:
    def test_vector_output_rejected(self):
        tape = ad.Tape()
        x = tape.input([1.0, 2.0])
        with pytest.raises(ArgumentError):
            tape.backward(x * 2.0)

    def test_foreign_output_rejected(self):
        t1, t2 = ad.Tape(), ad.Tape()
        x = t1.input(1.0)
        t2.input(1.0)
        with pytest.raises(ArgumentError):
            t2.backward(x)

    def test_non_finite_input(self):
        with pytest.raises(DataError):
            ad.Tape().input(float("nan"))

    def test_division_by_zero(self):
        tape = ad.Tape()
        x = tape.input(0.0)
        with pytest.raises(DataError):
            _ = 1.0 / x

    def test_replay_reproduces_values(self):
        tape = ad.Tape()
        x = tape.input([0.2, -0.4])
        out = ad.total(ad.exp(x) * ad.cos(x) - x / 3.0)
        vals = tape.replay()
        for node, v in zip(tape.nodes, vals):
            np.testing.assert_array_equal(node.value, v)
        assert float(vals[out.index]) == float(out.value)

    def test_determinism(self):
        def run():
            tape = ad.Tape()
            x = tape.input(np.linspace(-1, 1, 9))
            out = ad.dot(np.arange(9.0), ad.square(ad.sin(x)) + ad.max0(x))
            return len(tape), tape.gradient_vector(out)

        (n1, g1), (n2, g2) = run(), run()
        assert n1 == n2
        assert np.array_equal(g1, g2)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
    def test_composite_matches_fd(self, xs):
        x = np.array(xs)

        def plain(v):
            return float(np.sum(np.sin(v) * np.exp(0.5 * v) + v**3 / (2.0 + v * v)))

        tape = ad.Tape()
        v = tape.input(x)
        out = ad.total(ad.sin(v) * ad.exp(0.5 * v) + ad.pow_int(v, 3) / (2.0 + v * v))
        g = tape.gradient_vector(out)
        fd = central(plain, x)
        assert np.all(np.abs(g - fd) <= np.maximum(1e-6, 1e-6 * np.abs(fd)))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-8))
    def test_max0_away_from_kink(self, x):
        g = grad1(lambda v: ad.max0(v) * v, x)
        assert g == pytest.approx(2 * x if x > 0 else 0.0, abs=1e-12)
