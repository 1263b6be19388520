import itertools
import math

import numpy as np
import pytest

from whitney_lab.differences import (
    ModulusRequest,
    mixed_difference,
    modulus,
    p_mean_modulus,
    total_modulus,
    total_p_mean_modulus,
    whitney_constant_sum,
)
from whitney_lab.functions import get_function, tensor_polynomial_spec
from whitney_lab.geometry import (
    Parallelepiped,
    SubsetMask,
    lp_norm,
    shifted_domain,
)

INF = math.inf
X2 = lambda p: p[:, 0] ** 2


class TestMixedDifference:
    def test_first_order_two_point(self):
        got = mixed_difference(X2, (1,), (0.5,), [[0.0]])
        assert float(got[0]) == pytest.approx(0.25)

    def test_second_difference_of_square(self):
        # three-term sum: f(2) - 2 f(1) + f(0) = 4 - 2 = 2
        got = mixed_difference(X2, (2,), (1.0,), [[0.0]])
        assert float(got[0]) == pytest.approx(2.0)

    def test_mixed_bilinear_gives_h1_h2(self):
        f = get_function("poly_d2_deg11")
        for h in [(0.2, 0.3), (0.5, 0.1)]:
            for x in ([0.0, 0.0], [0.1, 0.4]):
                got = mixed_difference(f, (1, 1), h, [x])
                assert float(got[0]) == pytest.approx(h[0] * h[1], rel=1e-12)

    def test_annihilates_polynomial_class(self):
        f = get_function("poly_d2_deg32")  # degrees (3, 2)
        pts = np.random.default_rng(0).uniform(0, 0.2, size=(8, 2))
        got = mixed_difference(f, (4, 3), (0.1, 0.15), pts)
        assert np.max(np.abs(got)) < 1e-12

    def test_inactive_axes_ignore_step(self):
        f = get_function("exp_d2")
        x = np.array([[0.2, 0.3]])
        a = mixed_difference(f, (2, 0), (0.1, 99.0), x)
        b = mixed_difference(f, (2, 0), (0.1, 0.0), x)
        assert float(a[0]) == float(b[0])


class TestModulus:
    def test_polynomial_annihilation(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        req = ModulusRequest(f, (2,), SubsetMask(1, [0]), (1.0,), INF,
                             unit_box_1d, 17, quad_1d)
        assert modulus(req) < 1e-12

    def test_linear_sup_modulus_reaches_one(self, unit_box_1d, quad_1d):
        # at h = 1 the shifted domain is the single point {0} where the
        # difference still equals 1
        f = get_function("poly_d1_deg1")
        req = ModulusRequest(f, (1,), SubsetMask(1, [0]), (1.0,), INF,
                             unit_box_1d, 33, quad_1d)
        assert modulus(req) == pytest.approx(1.0, abs=1e-12)

    def test_linear_l1_modulus_quarter(self, unit_box_1d, quad_1d):
        # ||h||_{1,[0,1-h]} = h (1 - h), maximized at h = 1/2
        f = get_function("poly_d1_deg1")
        req = ModulusRequest(f, (1,), SubsetMask(1, [0]), (1.0,), 1.0,
                             unit_box_1d, 33, quad_1d)
        assert modulus(req) == pytest.approx(0.25, abs=1e-10)

    def test_empty_subset_rejected(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        req = ModulusRequest(f, (1,), SubsetMask.empty(1), (1.0,), INF,
                             unit_box_1d, 9, quad_1d)
        with pytest.raises(ValueError):
            modulus(req)

    def test_step_bound_clamped_to_box(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        req = ModulusRequest(f, (1,), SubsetMask(1, [0]), (7.0,), INF,
                             unit_box_1d, 9, quad_1d)
        assert req.t.entries == (1.0,)

    def test_signed_step_search_matches_nonnegative_grid(self, quad_2d_fast):
        # brute force over every sign pattern; the change of variables makes
        # the non-negative restriction lossless
        box = Parallelepiped([0.0, 0.0], [1.0, 1.0])
        t = (0.4, 0.3)
        for fid, e, r, p in [
            ("exp_d2", [0], (2, 1), 1.0),
            ("sinprod_d2", [0, 1], (1, 2), INF),
            ("abspow_d2", [1], (2, 2), 1.0),
        ]:
            f = get_function(fid)
            mask = SubsetMask(2, e)
            got = modulus(ModulusRequest(f, r, mask, t, p, box, 5, quad_2d_fast))
            r_e = mask.project(r)
            active = [i for i in range(2) if r_e[i] > 0]
            best = 0.0
            grids = [np.linspace(0, t[i], 5) for i in active]
            for signs in itertools.product([1, -1], repeat=len(active)):
                for combo in itertools.product(*grids):
                    h = np.zeros(2)
                    for i, s, hi in zip(active, signs, combo):
                        h[i] = s * hi
                    dom = shifted_domain(box, r_e.array() * h)
                    if dom is None:
                        continue
                    val = lp_norm(lambda q: mixed_difference(f, r_e, h, q),
                                  dom, p, quad_2d_fast)
                    best = max(best, val)
            assert got == pytest.approx(best, rel=1e-10, abs=1e-12)


class TestTotalModulus:
    def test_polynomial_gives_zero(self, unit_box_2d, quad_2d_fast):
        f = get_function("poly_d2_deg11")
        got = total_modulus(f, (2, 2), (1.0, 1.0), INF, unit_box_2d, 9, quad_2d_fast)
        assert got < 1e-12

    def test_d1_total_is_single_term(self, unit_box_1d, quad_1d):
        f = get_function("exp_d1")
        total = total_modulus(f, (2,), (0.5,), 2.0, unit_box_1d, 17, quad_1d)
        single = modulus(ModulusRequest(f, (2,), SubsetMask(1, [0]), (0.5,), 2.0,
                                        unit_box_1d, 17, quad_1d))
        assert total == single

    def test_bilinear_total_is_three(self, unit_box_2d, quad_2d):
        f = get_function("poly_d2_deg11")
        got = total_modulus(f, (1, 1), (1.0, 1.0), INF, unit_box_2d, 17, quad_2d)
        assert got == pytest.approx(3.0, abs=1e-10)

    def test_monotone_in_t(self, unit_box_1d, quad_1d):
        # the step-grid discretization of the sup can dip by a grid-resolution
        # amount when the maximizer is interior, so allow a small relative slack
        f = get_function("runge_d1")
        values = [total_modulus(f, (2,), (t,), 2.0, unit_box_1d, 17, quad_1d)
                  for t in (0.1, 0.2, 0.4, 0.8, 1.0)]
        assert all(a <= b * 1.02 + 1e-12 for a, b in zip(values, values[1:]))
        # at sup-norm the exp maximizer sits at the endpoint step, which every
        # grid contains, so there the discretized sup is exactly monotone
        exact = [total_modulus(get_function("exp_d1"), (1,), (t,), INF,
                               unit_box_1d, 17, quad_1d)
                 for t in (0.1, 0.2, 0.4, 0.8, 1.0)]
        assert all(a <= b + 1e-12 for a, b in zip(exact, exact[1:]))

    def test_bounded_by_difference_sum(self, unit_box_1d, quad_1d):
        f = get_function("sin_d1")
        r = (3,)
        got = modulus(ModulusRequest(f, r, SubsetMask(1, [0]), (1.0,), INF,
                                     unit_box_1d, 17, quad_1d))
        bound = 2.0 ** 3 * lp_norm(f, unit_box_1d, INF, quad_1d)
        assert got <= bound + 1e-10

    def test_subadditive_and_homogeneous(self, unit_box_1d, quad_1d):
        f = get_function("exp_d1")
        g = get_function("sin_d1")
        e = SubsetMask(1, [0])

        def make(spec):
            return ModulusRequest(spec, (2,), e, (0.7,), INF, unit_box_1d, 17, quad_1d)

        both = modulus(ModulusRequest(lambda q: f(q) + g(q), (2,), e, (0.7,), INF,
                                      unit_box_1d, 17, quad_1d))
        assert both <= modulus(make(f)) + modulus(make(g)) + 1e-10
        c = -3.7
        scaled = modulus(ModulusRequest(lambda q: c * f(q), (2,), e, (0.7,), INF,
                                        unit_box_1d, 17, quad_1d))
        assert scaled == pytest.approx(abs(c) * modulus(make(f)), rel=1e-10)

    def test_adding_polynomial_leaves_modulus_unchanged(self, unit_box_1d, quad_1d):
        f = get_function("runge_d1")
        phi = tensor_polynomial_spec("shift", [[5.0, -2.0, 3.0]])  # degree 2 < r = 3
        e = SubsetMask(1, [0])
        base = modulus(ModulusRequest(f, (3,), e, (0.6,), 2.0, unit_box_1d, 17, quad_1d))
        shifted = modulus(ModulusRequest(lambda q: f(q) + phi(q), (3,), e, (0.6,),
                                         2.0, unit_box_1d, 17, quad_1d))
        assert shifted == pytest.approx(base, rel=1e-8)


class TestPMeanModulus:
    def test_polynomial_gives_zero(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        assert p_mean_modulus(f, (2,), (1.0,), 1.0, unit_box_1d, quad_1d) < 1e-12

    def test_linear_l1_closed_form(self, unit_box_1d, quad_1d):
        # (1/t) int_{-1}^{1} int_{Q_h} |h| dx dh = 2 int_0^1 h (1-h) dh = 1/3
        f = get_function("poly_d1_deg1")
        got = p_mean_modulus(f, (1,), (1.0,), 1.0, unit_box_1d, quad_1d)
        assert got == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_p_inf_coincides_with_sup_modulus(self, unit_box_1d, quad_1d):
        f = get_function("runge_d1")
        sup = modulus(ModulusRequest(f, (2,), SubsetMask(1, [0]), (0.5,), INF,
                                     unit_box_1d, 33, quad_1d))
        mean = p_mean_modulus(f, (2,), (0.5,), INF, unit_box_1d, quad_1d, h_grid=33)
        assert mean == sup

    def test_zero_scale_limit_convention(self, unit_box_1d, quad_1d):
        f = get_function("exp_d1")
        assert p_mean_modulus(f, (1,), (0.0,), 2.0, unit_box_1d, quad_1d) == 0.0

    def test_total_p_mean_linear_single_term(self, unit_box_1d, quad_1d):
        f = get_function("poly_d1_deg1")
        got = total_p_mean_modulus(f, (1,), (1.0,), 1.0, unit_box_1d, quad_1d)
        assert got == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_total_p_mean_at_inf_equals_total(self, unit_box_2d, quad_2d_fast):
        f = get_function("sinprod_d2")
        t = (0.5, 0.5)
        a = total_p_mean_modulus(f, (1, 1), t, INF, unit_box_2d, quad_2d_fast,
                                 h_grid=9)
        b = total_modulus(f, (1, 1), t, INF, unit_box_2d, 9, quad_2d_fast)
        assert a == b

    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_mean_bounded_by_scaled_sup_per_term(self, unit_box_1d, quad_1d, p):
        # the signed step box has measure 2t per active axis while the
        # normalization divides by t, so the sharp termwise bound carries a
        # factor 2^(|e|/p)
        f = get_function("exp_d1")
        mean = p_mean_modulus(f, (1,), (0.8,), p, unit_box_1d, quad_1d)
        sup = modulus(ModulusRequest(f, (1,), SubsetMask(1, [0]), (0.8,), p,
                                     unit_box_1d, 33, quad_1d))
        assert mean <= 2.0 ** (1.0 / p) * sup + 1e-10


def test_whitney_constant_sum_values():
    assert whitney_constant_sum((1,)) == 3.0          # 1 + 2
    assert whitney_constant_sum((2,)) == 5.0          # 1 + 4
    assert whitney_constant_sum((1, 1)) == 9.0        # 1 + 2 + 2 + 4
    assert whitney_constant_sum((2, 3)) == 45.0       # (1+4)(1+8)
