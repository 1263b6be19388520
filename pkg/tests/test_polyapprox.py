import math

import numpy as np
import pytest

from whitney_lab.functions import CapabilityError, get_function
from whitney_lab.geometry import Parallelepiped, lp_norm
from whitney_lab.polyapprox import (
    LEGENDRE,
    MONOMIAL,
    TensorPolynomial,
    _cc_weights,
    _legendre_matrix,
    best_approx,
    derivative_inequality_ratios,
    equioscillation_count,
    taylor_poly,
    taylor_remainder_bound,
)

INF = math.inf


class TestTensorPolynomial:
    def test_zero_coefficients_evaluate_to_zero(self, unit_box_2d):
        poly = TensorPolynomial((2, 2), np.zeros((2, 2)), LEGENDRE, unit_box_2d)
        pts = np.array([[0.1, 0.2], [0.9, 0.4]])
        assert np.all(poly(pts) == 0.0)

    def test_monomial_one_plus_x(self, unit_box_1d):
        poly = TensorPolynomial((2,), np.array([1.0, 1.0]), MONOMIAL, unit_box_1d,
                                center=(0.0,))
        assert float(poly([[0.5]])[0]) == pytest.approx(1.5)

    def test_monomial_bilinear(self, unit_box_2d):
        coef = np.zeros((2, 2))
        coef[1, 1] = 1.0
        poly = TensorPolynomial((2, 2), coef, MONOMIAL, unit_box_2d, center=(0.0, 0.0))
        assert float(poly([[0.3, 0.4]])[0]) == pytest.approx(0.12)

    def test_basis_round_trip(self, unit_box_2d):
        rng = np.random.default_rng(11)
        coef = rng.normal(size=(3, 4))
        poly = TensorPolynomial((3, 4), coef, MONOMIAL, unit_box_2d, center=(0.2, 0.7))
        back = poly.to_legendre().to_monomial((0.2, 0.7))
        assert np.max(np.abs(back.coefficients - coef)) < 1e-10 * (
            1 + np.max(np.abs(coef)))
        pts = rng.uniform(0, 1, size=(20, 2))
        assert np.allclose(poly(pts), poly.to_legendre()(pts), rtol=1e-11, atol=1e-12)

    def test_shape_validation(self, unit_box_1d):
        with pytest.raises(ValueError):
            TensorPolynomial((3,), np.zeros(2), LEGENDRE, unit_box_1d)

    def test_membership_differencing_annihilates(self, unit_box_1d):
        from whitney_lab.differences import mixed_difference

        poly = TensorPolynomial((3,), np.array([0.3, -1.0, 2.0]), LEGENDRE, unit_box_1d)
        vals = mixed_difference(poly, (3,), (0.2,), np.linspace(0, 0.4, 7).reshape(-1, 1))
        assert np.max(np.abs(vals)) < 1e-12


def test_legendre_basis_orthonormal(unit_box_1d, quad_1d):
    from whitney_lab.geometry import tensor_quadrature

    pts, wts = tensor_quadrature(unit_box_1d, quad_1d)
    V = _legendre_matrix(pts[:, 0], 5, 0.0, 1.0)
    gram = V.T @ (wts[:, None] * V)
    assert np.max(np.abs(gram - np.eye(5))) < 1e-12


def test_clenshaw_curtis_weights_positive_and_exact():
    for n in (9, 17, 33):
        w = _cc_weights(n)
        assert np.all(w > 0)
        assert w.sum() == pytest.approx(2.0, rel=1e-13)
        # exact for a mid-degree even power
        from whitney_lab.geometry import _chebyshev_lobatto

        x = _chebyshev_lobatto(n)
        assert float(w @ x ** 6) == pytest.approx(2.0 / 7.0, rel=1e-12)


class TestBestApprox:
    def test_reproduces_own_class_p2(self, unit_box_2d, quad_2d_fast):
        f = get_function("poly_d2_deg11")
        _, err = best_approx(f, (2, 2), 2.0, unit_box_2d, quad=quad_2d_fast)
        assert err <= 1e-10

    @pytest.mark.parametrize("p", [1.0, INF])
    def test_reproduces_own_class_p1_inf(self, unit_box_1d, quad_1d, p):
        f = get_function("poly_d1_deg3")
        _, err = best_approx(f, (4,), p, unit_box_1d, quad=quad_1d)
        assert err <= 1e-8

    def test_linear_minimax_constant_half(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        poly, err = best_approx(f, (1,), INF, unit_box_1d, quad=quad_1d)
        assert err == pytest.approx(0.5, abs=1e-10)
        assert float(poly([[0.3]])[0]) == pytest.approx(0.5, abs=1e-9)

    def test_linear_l2_closed_form(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        poly, err = best_approx(f, (1,), 2.0, unit_box_1d, quad=quad_1d)
        assert err == pytest.approx((1.0 / 12.0) ** 0.5, rel=1e-12)
        assert float(poly([[0.8]])[0]) == pytest.approx(0.5, abs=1e-12)

    def test_chebyshev_equioscillation(self, quad_1d):
        box = Parallelepiped([-1.0], [1.0])
        f = lambda q: q[:, 0] ** 2
        poly, err = best_approx(f, (2,), INF, box, quad=quad_1d)
        assert err == pytest.approx(0.5, abs=1e-10)
        count = equioscillation_count(lambda q: f(q) - poly(q), err, box)
        assert count >= 3

    def test_error_bounded_by_norm(self, unit_box_1d, quad_1d):
        f = get_function("runge_d1")
        for p in (1.0, 2.0, INF):
            _, err = best_approx(f, (2,), p, unit_box_1d, quad=quad_1d)
            assert err <= lp_norm(f, unit_box_1d, p, quad_1d) + 1e-12

    def test_p2_residual_orthogonality(self, unit_box_2d, quad_2d):
        from whitney_lab.geometry import tensor_quadrature
        from whitney_lab.polyapprox import _legendre_matrix as legmat

        f = get_function("exp_d2")
        poly, _ = best_approx(f, (2, 2), 2.0, unit_box_2d, quad=quad_2d)
        pts, wts = tensor_quadrature(unit_box_2d, quad_2d)
        res = f(pts) - poly(pts)
        V1 = legmat(pts[:, 0], 2, 0.0, 1.0)
        V2 = legmat(pts[:, 1], 2, 0.0, 1.0)
        for a in range(2):
            for b in range(2):
                inner = float(np.sum(wts * res * V1[:, a] * V2[:, b]))
                assert abs(inner) <= 1e-9

    def test_affine_covariance(self, quad_1d):
        # mapping the box affinely onto [0,1] leaves the sup error unchanged
        # and scales the L_p error by the Jacobian factor
        f = get_function("runge_d1")
        big = Parallelepiped([0.0], [0.5])
        unit = Parallelepiped([0.0], [1.0])
        mapped = lambda q: f(0.5 * q)  # pulled back to the unit box
        for p, factor in [(INF, 1.0), (2.0, 0.5 ** 0.5), (1.0, 0.5)]:
            _, err_box = best_approx(f, (2,), p, big, quad=quad_1d)
            _, err_unit = best_approx(mapped, (2,), p, unit, quad=quad_1d)
            assert err_box == pytest.approx(factor * err_unit, rel=1e-8)

    def test_unsupported_p(self, unit_box_1d):
        with pytest.raises(ValueError):
            best_approx(get_function("exp_d1"), (1,), 1.5, unit_box_1d)

    def test_grid_too_coarse(self, unit_box_1d):
        with pytest.raises(ValueError):
            best_approx(get_function("exp_d1"), (3,), INF, unit_box_1d, grid=(5,))


class TestTaylor:
    def test_reproduces_polynomials(self, unit_box_2d, quad_2d_fast):
        f = get_function("poly_d2_deg11")
        tp = taylor_poly(f, (2, 2), (0.0, 0.0), unit_box_2d)
        err = lp_norm(lambda q: f(q) - tp(q), unit_box_2d, INF, quad_2d_fast)
        assert err < 1e-12

    def test_exponential_maclaurin(self, unit_box_1d):
        tp = taylor_poly(get_function("exp_d1"), (2,), (0.0,), unit_box_1d)
        xs = np.linspace(0, 1, 9).reshape(-1, 1)
        assert np.max(np.abs(tp(xs) - (1.0 + xs[:, 0]))) < 1e-12

    def test_anchor_outside_box_rejected(self, unit_box_1d):
        with pytest.raises(ValueError):
            taylor_poly(get_function("exp_d1"), (2,), (2.0,), unit_box_1d)

    def test_lp_only_rejected(self, unit_box_1d):
        with pytest.raises(CapabilityError):
            taylor_poly(get_function("abspow_d1"), (1,), (0.5,), unit_box_1d)

    def test_remainder_bound_polynomial_zero(self, unit_box_2d, quad_2d_fast):
        f = get_function("poly_d2_deg11")
        assert taylor_remainder_bound(f, (2, 2), INF, unit_box_2d, quad_2d_fast) < 1e-12

    def test_remainder_bound_exponential(self, unit_box_1d, quad_1d):
        got = taylor_remainder_bound(get_function("exp_d1"), (1,), INF,
                                     unit_box_1d, quad_1d)
        assert got == pytest.approx(math.e, rel=1e-12)

    def test_remainder_bound_bilinear_three_terms(self, unit_box_2d, quad_2d):
        got = taylor_remainder_bound(get_function("poly_d2_deg11"), (1, 1), INF,
                                     unit_box_2d, quad_2d)
        assert got == pytest.approx(3.0, rel=1e-12)


class TestDerivativeInequalityRatios:
    def test_constant_k0_ratio_bounded_by_one(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg0")
        lp, sup = derivative_inequality_ratios(f, 1, 0, 1.0, INF, unit_box_1d, quad_1d)
        assert lp <= 1.0 + 1e-12 and sup <= 1.0 + 1e-12

    @pytest.mark.parametrize("fid", ["sin_d1", "exp_d1", "poly_d1_deg3"])
    @pytest.mark.parametrize("p", [1.0, 2.0, INF])
    def test_ratios_bounded_over_halving_sweep(self, unit_box_1d, quad_1d, fid, p):
        f = get_function(fid)
        r = 2
        for k in range(r):
            for j in range(7):
                t = 1.0 / 2 ** j
                lp, sup = derivative_inequality_ratios(f, r, k, t, p, unit_box_1d,
                                                       quad_1d)
                assert np.isfinite(lp) and np.isfinite(sup)
                assert lp < 50 and sup < 50  # loose sanity bound, constants are O(1)
