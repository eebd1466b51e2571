import numpy as np
import pytest

from tvspline import (
    DIRAC_STREAM_COEFF,
    MeasurementVector,
    PeriodicSpline,
    TrigPolynomial,
    ZeroMeanMeasure,
    apply_adjoint,
    green_closed_form,
    green_eval,
    measure,
    measure_atoms,
    spline_eval,
    spline_profile,
    tv_norm,
)
from tvspline.fourier import green_tail_bound

TWO_PI = 2 * np.pi


class TestGreen:
    def test_sawtooth_closed_form(self):
        # sum 2 sin(kx)/k = pi - x on (0, 2pi)
        assert green_eval(1, np.pi / 2, 10**6) == pytest.approx(np.pi / 2, abs=1e-5)

    def test_order2_value_at_zero(self):
        val = green_eval(2, 0.0, 10**4)
        assert abs(val - (-np.pi**2 / 3)) <= green_tail_bound(2, 10**4)
        assert green_eval(2, 0.0, 2 * 10**7) == pytest.approx(-np.pi**2 / 3, abs=1e-7)

    def test_closed_forms_match_series(self):
        for order in (1, 2):
            for x in (0.3, 1.7, 5.1):
                tol = 1e-5 if order == 1 else green_tail_bound(2, 10**6)
                assert green_eval(order, x, 10**6) == pytest.approx(
                    green_closed_form(order, x), abs=max(tol, 1e-8)
                )

    def test_zero_mean_quadrature(self):
        # Uniform quadrature of the truncated series is exact once the node
        # count exceeds twice the truncation.
        n, trunc = 512, 200
        xs = (np.arange(n) + 0.5) * (TWO_PI / n)
        for order in (2, 3):
            vals = np.array([green_eval(order, x, trunc) for x in xs])
            assert abs(vals.mean()) < 1e-8
        dense = (np.arange(1 << 16) + 0.5) * (TWO_PI / (1 << 16))
        for order in (1, 2):
            assert abs(np.mean(green_closed_form(order, dense))) < 1e-8

    def test_order1_discontinuity_raises(self):
        with pytest.raises(ValueError):
            green_eval(1, 0.0, 100)
        with pytest.raises(ValueError):
            green_eval(1, TWO_PI, 100)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            green_eval(2, 1.0, 0)
        with pytest.raises(ValueError):
            green_eval(0, 1.0, 10)


class TestSplineEval:
    def test_constant_spline(self):
        s = PeriodicSpline.constant(1, 3.5)
        assert spline_eval(s, 1.234) == 3.5

    def test_two_knot_order2_value(self):
        # g2(pi/2) - g2(-pi/2) with g2 even: exactly zero.
        s = PeriodicSpline(2, 0.0, [0.0, np.pi], [1.0, -1.0])
        g = green_closed_form(2, np.pi / 2) - green_closed_form(2, 3 * np.pi / 2)
        assert spline_eval(s, np.pi / 2) == pytest.approx(g, abs=1e-12)
        assert g == pytest.approx(0.0, abs=1e-12)

    def test_order1_knot_right_limit(self):
        s = PeriodicSpline(1, 0.0, [0.0, np.pi], [1.0, -1.0])
        just_after = spline_eval(s, 1e-9)
        assert spline_eval(s, 0.0) == pytest.approx(just_after, abs=1e-6)

    def test_higher_order_series_matches_profile(self):
        rng = np.random.default_rng(3)
        amps = rng.standard_normal(4)
        amps -= amps.mean()
        s = PeriodicSpline(3, 0.2, rng.uniform(0, TWO_PI, 4), amps)
        xs = (np.arange(16) / 16) * TWO_PI
        direct = spline_eval(s, xs)
        prof = spline_profile(s, 16)
        np.testing.assert_allclose(direct, prof, atol=1e-8)


class TestMeasure:
    def test_constant_measures(self):
        y = measure(PeriodicSpline.constant(2, 1.0), 3)
        assert y.mean == 1.0
        np.testing.assert_allclose(y.coeffs, 0.0)

    def test_two_knot_order1_coefficient(self):
        s = PeriodicSpline(1, 0.0, [0.0, np.pi], [1.0, -1.0])
        y = measure(s, 1)
        assert y.coeffs[0] == pytest.approx(-2j, abs=1e-12)

    def test_hermitian_against_quadrature(self):
        rng = np.random.default_rng(7)
        amps = rng.standard_normal(3)
        amps -= amps.mean()
        s = PeriodicSpline(2, 0.4, rng.uniform(0, TWO_PI, 3), amps)
        n = 10**4
        xs = np.arange(n) * (TWO_PI / n)
        fx = spline_eval(s, xs)
        y = measure(s, 4)
        for k in range(1, 5):
            plus = np.mean(fx * np.exp(-1j * k * xs))
            minus = np.mean(fx * np.exp(1j * k * xs))
            assert plus == pytest.approx(y.coeffs[k - 1], abs=1e-6)
            assert minus == pytest.approx(np.conj(y.coeffs[k - 1]), abs=1e-6)

    def test_quadrature_consistency_order1(self):
        rng = np.random.default_rng(11)
        amps = 0.5 * rng.standard_normal(3)
        amps -= amps.mean()
        s = PeriodicSpline(1, 0.1, rng.uniform(0, TWO_PI, 3), amps)
        n = 1 << 22
        xs = (np.arange(n) + 0.5) * (TWO_PI / n)
        fx = spline_eval(s, xs)
        y = measure(s, 2)
        for k in (1, 2):
            quad = np.mean(fx * np.exp(-1j * k * xs))
            assert quad == pytest.approx(y.coeffs[k - 1], abs=1e-6)

    def test_derivative_coefficients_match_atom_sums(self):
        # (ik)^M fhat[k] equals the plain exponential sums of the amplitudes.
        rng = np.random.default_rng(5)
        for order in (1, 2, 3):
            amps = rng.standard_normal(4)
            amps -= amps.mean()
            s = PeriodicSpline(order, rng.standard_normal(), rng.uniform(0, TWO_PI, 4), amps)
            y = measure(s, 20)
            for k in range(1, 21):
                lhs = (1j * k) ** order * y.coeffs[k - 1]
                rhs = np.sum(s.amplitudes * np.exp(-1j * k * s.knots))
                assert lhs == pytest.approx(rhs, abs=1e-9)


class TestAdjoint:
    def test_zero_residual(self):
        eta = apply_adjoint(MeasurementVector.zeros(4), 2)
        np.testing.assert_allclose(eta.coeffs, 0.0)
        assert eta.mean == 0.0

    def test_single_frequency_shape(self):
        z = MeasurementVector(0.0, np.array([1.0 + 0j]))
        eta = apply_adjoint(z, 2)
        xs = np.linspace(0, TWO_PI, 512, endpoint=False)
        vals = eta(xs)
        # Proportional to -cos: max at pi, min at 0.
        assert xs[np.argmax(vals)] == pytest.approx(np.pi, abs=0.02)
        assert xs[np.argmin(vals)] == pytest.approx(0.0, abs=0.02)

    @staticmethod
    def _fidelity(locs, wts, y, order):
        w = ZeroMeanMeasure(locs, wts)
        r = y.zero_mean() - measure_atoms(w, order, y.cutoff)
        return 0.5 * r.norm_sq()

    def test_gradient_check_100_pairs(self):
        rng = np.random.default_rng(2024)
        eps = 1e-5
        for _ in range(100):
            order = int(rng.integers(1, 4))
            cutoff = int(rng.integers(1, 6))
            y = MeasurementVector(
                rng.standard_normal(),
                rng.standard_normal(cutoff) + 1j * rng.standard_normal(cutoff),
            )
            locs = rng.uniform(0, TWO_PI, 4)
            wts = rng.standard_normal(4)
            wts -= wts.mean()
            dir_locs = rng.uniform(0, TWO_PI, 2)
            dir_wts = np.array([1.0, -1.0]) * rng.standard_normal()
            w = ZeroMeanMeasure(locs, wts)
            eta = apply_adjoint(measure_atoms(w, order, cutoff) - y.zero_mean(), order)
            analytic = float(np.dot(dir_wts, eta(dir_locs)))

            def shifted(s):
                return self._fidelity(
                    np.concatenate([locs, dir_locs]),
                    np.concatenate([wts, s * dir_wts]),
                    y,
                    order,
                )

            fd = (shifted(eps) - shifted(-eps)) / (2 * eps)
            assert analytic == pytest.approx(fd, rel=1e-4, abs=1e-12)


class TestMeasures:
    def test_tv_norm_examples(self):
        assert tv_norm(ZeroMeanMeasure.empty()) == 0.0
        w = ZeroMeanMeasure([1.0, 2.0], [2.0, -2.0])
        assert tv_norm(w) == 4.0

    def test_duplicate_cancellation(self):
        w = ZeroMeanMeasure([1.0, 1.0], [1.0, -1.0])
        assert w.n_atoms == 0
        assert tv_norm(w) == 0.0

    def test_triangle_inequality(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            l1 = rng.uniform(0, TWO_PI, 3)
            w1 = rng.standard_normal(3)
            w1 -= w1.mean()
            l2 = np.concatenate([l1[:1], rng.uniform(0, TWO_PI, 2)])
            w2 = rng.standard_normal(3)
            w2 -= w2.mean()
            a = ZeroMeanMeasure(l1, w1)
            b = ZeroMeanMeasure(l2, w2)
            assert tv_norm(a.combine(b)) <= tv_norm(a) + tv_norm(b) + 1e-12

    def test_zero_sum_validation(self):
        with pytest.raises(ValueError):
            ZeroMeanMeasure([0.5, 1.5], [1.0, -0.5])
        with pytest.raises(ValueError):
            PeriodicSpline(1, 0.0, [0.5, 1.5], [1.0, -0.5])

    def test_distinct_knots_validation(self):
        with pytest.raises(ValueError):
            PeriodicSpline(1, 0.0, [0.5, 0.5], [1.0, -1.0])


class TestTrigPolynomial:
    def test_real_valued_and_hermitian(self):
        rng = np.random.default_rng(1)
        p = TrigPolynomial(0.3, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        xs = rng.uniform(0, TWO_PI, 16)
        vals = p(xs)
        assert np.all(np.isreal(vals))
        # Matches the explicit Hermitian expansion.
        k = np.arange(1, 5)
        direct = p.mean + np.sum(
            p.coeffs * np.exp(1j * np.outer(xs, k))
            + np.conj(p.coeffs) * np.exp(-1j * np.outer(xs, k)),
            axis=1,
        )
        np.testing.assert_allclose(vals, direct.real, atol=1e-12)

    def test_derivative(self):
        p = TrigPolynomial(1.0, np.array([0.5, 0.25j]))
        d = p.derivative()
        xs = np.linspace(0, TWO_PI, 7)
        h = 1e-6
        fd = (p(xs + h) - p(xs - h)) / (2 * h)
        np.testing.assert_allclose(d(xs), fd, atol=1e-6)
