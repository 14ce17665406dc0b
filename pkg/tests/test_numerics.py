import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sp
from scipy.integrate import quad

from tcopula import numerics as nm


class TestStudentT:
    def test_cdf_symmetry_center(self):
        assert nm.student_t_cdf(0.0, 5) == pytest.approx(0.5, abs=1e-15)

    def test_cdf_cauchy_closed_form(self):
        assert nm.student_t_cdf(1.0, 1) == pytest.approx(0.5 + math.atan(1.0) / math.pi, abs=1e-14)

    def test_cdf_normal_limit(self):
        assert nm.student_t_cdf(1.96, 1e6) == pytest.approx(sp.ndtr(1.96), abs=1e-6)

    def test_cdf_domain_errors(self):
        with pytest.raises(ValueError):
            nm.student_t_cdf(np.nan, 5)
        with pytest.raises(ValueError):
            nm.student_t_cdf(0.0, -1)
        with pytest.raises(ValueError):
            nm.student_t_cdf(0.0, np.inf)

    def test_quantile_median_and_cauchy(self):
        assert nm.student_t_quantile(0.5, 7) == pytest.approx(0.0, abs=1e-12)
        assert nm.student_t_quantile(0.75, 1) == pytest.approx(math.tan(math.pi * 0.25), abs=1e-10)

    def test_quantile_roundtrip_via_bisection_oracle(self):
        # independent oracle: bisection on the CDF
        target, nu = 0.99, 4.0
        lo, hi = 0.0, 100.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if nm.student_t_cdf(mid, nu) < target:
                lo = mid
            else:
                hi = mid
        assert nm.student_t_quantile(target, nu) == pytest.approx(0.5 * (lo + hi), abs=1e-9)

    def test_quantile_domain(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ValueError):
                nm.student_t_quantile(bad, 3)

    @given(
        x=st.floats(-20, 20),
        nu=st.sampled_from([0.5, 1.0, 2.0, 5.0, 10.0, 50.0]),
    )
    @settings(max_examples=120, deadline=None)
    def test_cdf_quantile_roundtrip(self, x, nu):
        u = nm.student_t_cdf(x, nu)
        if 0.0 < u < 1.0:
            # a double near {0, 1} resolves x only to ulp(u)/pdf(x); below
            # that the round trip is representation-limited, not a solver
            # error (large nu puts deep-tail x beyond the 1e-9 target)
            floor = 4.0 * np.spacing(max(u, 1.0 - u, 0.5)) / max(nm.student_t_pdf(x, nu), 1e-300)
            assert nm.student_t_quantile(u, nu) == pytest.approx(x, abs=max(1e-9, floor))

    @given(x=st.floats(-30, 30), nu=st.sampled_from([0.7, 2.0, 6.0, 33.0]))
    @settings(max_examples=80, deadline=None)
    def test_cdf_reflection_and_pdf_symmetry(self, x, nu):
        assert nm.student_t_cdf(x, nu) + nm.student_t_cdf(-x, nu) == pytest.approx(1.0, abs=1e-14)
        assert nm.student_t_pdf(x, nu) == pytest.approx(nm.student_t_pdf(-x, nu), rel=1e-13)

    def test_pdf_cauchy_value_and_normalization(self):
        assert nm.student_t_pdf(0.0, 1) == pytest.approx(1.0 / math.pi, abs=1e-15)
        res = nm.integrate(lambda x: nm.student_t_pdf(x, 3.5), -np.inf, np.inf)
        assert res.value == pytest.approx(1.0, abs=1e-8)


class TestChiSquare:
    def test_quantile_endpoints_and_exponential(self):
        assert nm.chisq_quantile(0.0, 3) == 0.0
        assert nm.chisq_quantile(0.5, 2) == pytest.approx(2.0 * math.log(2.0), rel=1e-13)

    def test_quantile_roundtrip_via_quadrature_oracle(self):
        v = nm.chisq_quantile(0.95, 1)
        cdf = nm.integrate(lambda t: nm.chisq_pdf(t, 1.0), 1e-300, v).value
        assert cdf == pytest.approx(0.95, abs=1e-9)

    def test_quantile_monotone(self):
        grid = np.linspace(0.05, 0.95, 10)
        vals = nm.chisq_quantile(grid, 4.2)
        assert (np.diff(vals) > 0).all()

    def test_pdf_values(self):
        assert nm.chisq_pdf(0.0, 2) == pytest.approx(0.5, abs=1e-15)
        assert nm.chisq_pdf(1.0, 1) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-13)
        res = nm.integrate(lambda t: nm.chisq_pdf(t, 5.0), 0.0, np.inf)
        assert res.value == pytest.approx(1.0, abs=1e-8)

    def test_pdf_domain(self):
        with pytest.raises(ValueError):
            nm.chisq_pdf(-0.5, 3)
        with pytest.raises(ValueError):
            nm.chisq_pdf(0.0, 1.5)
        with pytest.raises(ValueError):
            nm.chisq_quantile(1.0, 3)


class TestMixingScale:
    def test_value_at_exponential_median(self):
        assert nm.w_mixing(0.5, 2) == pytest.approx(math.sqrt(2.0 / (2.0 * math.log(2.0))), rel=1e-12)

    def test_unit_point(self):
        # chi2inv(s) = nu there, so the scale is exactly one
        nu = 3.7
        s = quad(lambda t: nm.chisq_pdf(t, nu), 0, nu)[0]
        assert nm.w_mixing(s, nu) == pytest.approx(1.0, abs=1e-10)

    @given(nu=st.sampled_from([0.5, 2.0, 7.0, 40.0]))
    @settings(max_examples=20, deadline=None)
    def test_strictly_decreasing(self, nu):
        s = np.linspace(0.1, 0.9, 17)
        w = nm.w_mixing(s, nu)
        assert (np.diff(w) < 0).all()

    def test_endpoint_domain(self):
        for bad in (0.0, 1.0):
            with pytest.raises(ValueError):
                nm.w_mixing(bad, 2)


class TestBvnCdf:
    def test_total_and_margins(self):
        assert nm.bvn_cdf(np.inf, np.inf, 0.7) == 1.0
        assert nm.bvn_cdf(1.0, np.inf, 0.7) == pytest.approx(sp.ndtr(1.0), abs=1e-15)
        assert nm.bvn_cdf(-np.inf, 0.3, -0.2) == 0.0

    def test_orthant_values(self):
        assert nm.bvn_cdf(0, 0, 0.0) == pytest.approx(0.25, abs=1e-15)
        assert nm.bvn_cdf(0, 0, 0.7) == pytest.approx(0.25 + math.asin(0.7) / (2 * math.pi), abs=1e-14)

    def test_independence_factorizes(self):
        a, b = np.meshgrid(np.linspace(-3, 3, 7), np.linspace(-3, 3, 7))
        got = nm.bvn_cdf(a, b, 0.0)
        assert np.abs(got - sp.ndtr(a) * sp.ndtr(b)).max() < 1e-12

    def test_symmetry_in_arguments(self):
        for rho in (-0.95, -0.4, 0.3, 0.8, 0.97):
            assert nm.bvn_cdf(0.7, -1.1, rho) == pytest.approx(nm.bvn_cdf(-1.1, 0.7, rho), abs=1e-15)

    @pytest.mark.parametrize(
        "a,b,rho,expected",
        [
            # frozen from 30-digit quadrature of the conditional-normal form
            (0.5, -0.3, 0.7, 0.3567836347968547),
            (2.0, 1.0, 0.95, 0.8413361470328712),
            (0.2, 0.1, 0.926, 0.4966335785683776),
            (3.0, -3.0, 0.5, 0.0013498979601551),
            (-1.0, -1.0, -0.5, 0.003782302072854264),
        ],
    )
    def test_high_accuracy_spot_values(self, a, b, rho, expected):
        assert nm.bvn_cdf(a, b, rho) == pytest.approx(expected, abs=5e-15)

    def test_degenerate_correlation(self):
        with pytest.raises(ValueError):
            nm.bvn_cdf(0, 0, 1.0)
        with pytest.warns(RuntimeWarning):
            val = nm.bvn_cdf(0.5, 0.6, 1 - 1e-15)
        assert val == pytest.approx(sp.ndtr(0.5), abs=1e-6)


class TestMvnPdf:
    def test_standard_values(self):
        assert nm.mvn_pdf(np.zeros(2), np.eye(2)) == pytest.approx(1 / (2 * math.pi), abs=1e-16)
        assert nm.mvn_pdf(np.array([1.0]), np.eye(1)) == pytest.approx(
            math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-14
        )

    def test_bivariate_hand_formula(self):
        rho = 0.7
        chol = np.linalg.cholesky([[1, rho], [rho, 1]])
        z1 = z2 = 1.0
        expected = math.exp(-(z1**2 - 2 * rho * z1 * z2 + z2**2) / (2 * (1 - rho**2))) / (
            2 * math.pi * math.sqrt(1 - rho**2)
        )
        assert nm.mvn_pdf(np.array([z1, z2]), chol) == pytest.approx(expected, rel=1e-13)

    def test_maximised_at_origin_and_shape_error(self):
        chol = np.linalg.cholesky([[1, 0.3], [0.3, 1]])
        assert nm.mvn_pdf(np.zeros(2), chol) > nm.mvn_pdf(np.array([0.5, -0.2]), chol)
        with pytest.raises(ValueError):
            nm.mvn_pdf(np.zeros(3), chol)
        with pytest.raises(ValueError):
            nm.mvn_pdf(np.zeros(2), -np.eye(2))


class TestIntegrate:
    def test_constant_and_singularity(self):
        assert nm.integrate(lambda s: 1.0, 0, 1).value == pytest.approx(1.0, abs=1e-14)
        res = nm.integrate(lambda s: s**-0.5, 0, 1)
        assert res.value == pytest.approx(2.0, abs=1e-9)
        assert res.evaluations >= 1 and res.abs_error_estimate >= 0

    def test_semi_infinite_chi2_normalization(self):
        res = nm.integrate(lambda t: nm.chisq_pdf(t, 3.0), 0, np.inf)
        assert res.value == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize(
        "f,a,b,exact",
        [
            (lambda x: x**3 - 2 * x, 0.0, 2.0, 0.0),
            (lambda x: math.exp(-x), 0.0, np.inf, 1.0),
            (lambda x: math.log(x), 0.0, 1.0, -1.0),
            (lambda x: 1 / (1 + x * x), -np.inf, np.inf, math.pi),
        ],
    )
    def test_analytic_battery(self, f, a, b, exact):
        res = nm.integrate(f, a, b)
        assert res.value == pytest.approx(exact, abs=max(1e-10, 1e-10 * abs(exact)))

    def test_failure_carries_best_estimate(self):
        # oscillatory integrand with a tiny budget cannot converge
        with pytest.raises(nm.QuadratureError) as err:
            nm.integrate(lambda x: math.sin(1 / x) if x > 0 else 0.0, 0, 1, eval_budget=300)
        assert isinstance(err.value.result, nm.QuadratureResult)
        assert np.isfinite(err.value.result.value)

    def test_invalid_tolerances(self):
        with pytest.raises(ValueError):
            nm.integrate(lambda x: x, 0, 1, rel_tol=0.0)
