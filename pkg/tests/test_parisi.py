"""Tests for the Parisi functional: leaf, recursion, corrections, saddle."""

import math

import numpy as np
import pytest
from scipy import integrate

from lvglass.gibbs import TiltedBaseMeasure
from lvglass.parisi import (
    CovarianceFns,
    MeanFieldModel,
    MuBetaLeaf,
    ParisiArgs,
    ParisiMeasure,
    QuadratureDoublingError,
    _leaf_log_integral_quad,
    a_ray_profile,
    inner_minimize,
    objective,
    parisi_value,
    quadratic_correction,
    quadratic_correction_theta,
    recursion_x0,
    saddle_search,
    x_leaf,
)

MODEL = MeanFieldModel(beta=2.0, kappa=0.3, alpha=0.0, phi=1.0)

# frozen regression point for the level-1 saddle of MODEL
ANCHOR_VALUE = 1.7709144924762792
ANCHOR_A = 7.45667942527126
ANCHOR_D = 2.955352035054247


class TestTypes:
    def test_measure_weights_sum_to_one(self):
        z = ParisiMeasure(lambdas=(0.2, 0.7), atoms=(0.0, 1.0, 3.0))
        w = z.weights
        assert w.shape == (3,)
        np.testing.assert_allclose(w, [0.2, 0.5, 0.3])
        assert z.levels == 2
        assert z.d_max == 3.0

    def test_measure_single(self):
        z = ParisiMeasure.single(0.4, 2.5)
        assert z.lambdas == (0.4,)
        assert z.atoms == (0.0, 2.5)

    @pytest.mark.parametrize(
        "lambdas,atoms",
        [
            ((0.0,), (0.0, 1.0)),
            ((1.0,), (0.0, 1.0)),
            ((0.5, 0.4), (0.0, 1.0, 2.0)),
            ((0.5,), (0.0, 1.0, 2.0)),
            ((0.5,), (0.1, 1.0)),
            ((0.2, 0.6), (0.0, 1.0, 1.0)),
        ],
    )
    def test_measure_rejects_bad_input(self, lambdas, atoms):
        with pytest.raises(ValueError):
            ParisiMeasure(lambdas=lambdas, atoms=atoms)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            MeanFieldModel(beta=2.0, kappa=-0.1, alpha=0.0, phi=1.0)
        with pytest.raises(ValueError):
            MeanFieldModel(beta=0.5, kappa=0.3, alpha=0.0, phi=1.0)

    def test_args_validation(self):
        with pytest.raises(ValueError):
            ParisiArgs(a=0.0, h=0.0, gamma=0.0, model=MODEL)
        with pytest.raises(ValueError):
            ParisiArgs(a=1.0, h=-0.5, gamma=0.0, model=MODEL)

    def test_covariance_shapes(self):
        cov = MODEL.covariance
        x = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(cov.xi(x), 0.5 * 0.36 * x**2)
        np.testing.assert_allclose(cov.theta(x), cov.xi(x))
        np.testing.assert_allclose(cov.xi_prime(x), 0.36 * x)


class TestLeaf:
    @pytest.mark.parametrize(
        "a,gamma,s",
        [(2.0, 0.0, 0.0), (5.0, -3.0, 2.0), (15.0, 1.5, -4.0),
         (0.5, 50.0, -2.0), (10.0, 0.3, 12.0)],
    )
    def test_vectorized_matches_adaptive(self, a, gamma, s):
        leaf = MuBetaLeaf.build(a, MODEL, gamma, s_max=abs(s))
        ref = _leaf_log_integral_quad(a, MODEL, gamma, s)
        assert abs(float(leaf.value(np.array(s))) - ref) < 5e-9

    def test_neutral_leaf_is_log_mass(self):
        # at a=15 the discarded tail is far below double precision
        z = ParisiMeasure.single(0.4, 1.5)
        args = ParisiArgs(a=15.0, h=0.0, gamma=0.0, model=MODEL)
        v = x_leaf(args, [0.0], z)
        mass = TiltedBaseMeasure(beta=2.0, phi=1.0, tilt=2.0).log_mass()
        assert abs(v - mass) < 1e-10

    def test_leaf_batch_shape(self):
        leaf = MuBetaLeaf.build(4.0, MODEL, 0.1)
        s = np.linspace(-2, 2, 12).reshape(3, 4)
        out = leaf.value(s)
        assert out.shape == (3, 4)
        assert np.all(np.diff(out, axis=1) > 0)  # increasing in the tilt

    def test_moment_fraction_against_quad(self):
        leaf = MuBetaLeaf.build(6.0, MODEL, -0.2)
        s = 0.7
        p = MODEL.phi * MODEL.beta - 1.0

        def f(x, order):
            return x ** (p + order) * math.exp(
                -x * x + (MODEL.beta + s) * x - 0.2 * x * x
            )

        den = integrate.quad(f, 0, 6.0, args=(0,), limit=100)[0]
        num = integrate.quad(f, 0, 6.0, args=(2,), limit=100)[0]
        assert abs(leaf.moment_fraction(np.array(s), 2) - num / den) < 1e-10

    def test_x_leaf_validates_z_count(self):
        z = ParisiMeasure(lambdas=(0.3, 0.6), atoms=(0.0, 1.0, 2.0))
        args = ParisiArgs(a=5.0, h=0.0, gamma=0.0, model=MODEL)
        with pytest.raises(ValueError):
            x_leaf(args, [0.1], z)

    def test_x_leaf_matches_vectorized(self):
        z = ParisiMeasure(lambdas=(0.3, 0.6), atoms=(0.0, 1.0, 2.0))
        args = ParisiArgs(a=8.0, h=0.4, gamma=-0.3,
                          model=MeanFieldModel(beta=2.0, kappa=0.4,
                                               alpha=-0.5, phi=1.0))
        m = args.model
        for zs in ([0.0, 0.0], [1.2, -0.7], [-2.0, 0.5]):
            direct = x_leaf(args, zs, z)
            db = np.sqrt(np.diff(z.atoms))
            s = m.beta * m.kappa * float(np.dot(zs, db)) \
                + m.beta * m.alpha * args.h
            leaf = MuBetaLeaf.build(args.a, m, args.gamma, s_max=abs(s))
            assert abs(direct - float(leaf.value(np.array(s)))) < 1e-9


class LinearLeaf:
    """Injected leaf with X at the bottom level exactly c z + m."""

    def __init__(self, c, m, scale):
        self.c, self.m, self.scale = c, m, scale
        self.n_nodes = 0

    def value(self, s):
        return self.m + self.c * np.asarray(s) / self.scale


class TestRecursion:
    def test_linear_leaf_closed_form(self):
        for lam0 in (0.12, 0.5, 0.93):
            for c, m, d in [(0.7, -0.3, 2.0), (2.1, 1.4, 0.8)]:
                scale = MODEL.beta * MODEL.kappa * math.sqrt(d)
                z = ParisiMeasure.single(lam0, d)
                args = ParisiArgs(a=1.0, h=0.0, gamma=0.0, model=MODEL)
                x0 = recursion_x0(z, args, leaf=LinearLeaf(c, m, scale))
                assert abs(x0 - (m + lam0 * c * c / 2)) < 1e-9

    def test_kappa_zero_ignores_measure(self):
        m0 = MeanFieldModel(beta=2.0, kappa=0.0, alpha=-0.5, phi=1.0)
        args = ParisiArgs(a=8.0, h=0.7, gamma=-0.2, model=m0)
        vals = [
            recursion_x0(ParisiMeasure(lambdas=lams, atoms=atoms), args)
            for lams, atoms in [
                ((0.3,), (0.0, 1.0)),
                ((0.6,), (0.0, 5.0)),
                ((0.2, 0.7), (0.0, 0.5, 3.0)),
            ]
        ]
        assert max(vals) - min(vals) < 1e-12

    def test_nondecreasing_in_each_lambda(self):
        # (1/lam) log E exp(lam X) is a log L^lam norm, nondecreasing in lam
        args = ParisiArgs(a=10.0, h=0.0, gamma=0.1, model=MODEL)
        atoms = (0.0, 0.8, 2.0)
        for k in (0, 1):
            prev = None
            for lamk in np.linspace(0.05, 0.95, 8):
                lams = [0.3, 0.6]
                lams[k] = lamk
                if not lams[0] < lams[1]:
                    continue
                v = recursion_x0(
                    ParisiMeasure(lambdas=tuple(lams), atoms=atoms), args
                )
                if prev is not None:
                    assert v >= prev - 1e-12
                prev = v

    def test_degenerate_insertion_is_exact(self):
        args = ParisiArgs(a=10.0, h=0.0, gamma=0.05, model=MODEL)
        strict = ParisiMeasure.single(0.35, 1.7)
        v1 = recursion_x0(strict, args)
        v2 = recursion_x0(((0.35, 0.62), (0.0, 1.7, 1.7)), args)
        assert abs(v1 - v2) < 1e-12

    def test_degenerate_merge_is_exact(self):
        args = ParisiArgs(a=10.0, h=0.0, gamma=0.05, model=MODEL)
        v3 = recursion_x0(((0.2, 0.5, 0.8), (0.0, 0.9, 0.9, 2.2)), args)
        v2 = recursion_x0(((0.2, 0.8), (0.0, 0.9, 2.2)), args)
        assert abs(v3 - v2) < 1e-12

    def test_rejects_bad_raw_measures(self):
        args = ParisiArgs(a=5.0, h=0.0, gamma=0.0, model=MODEL)
        with pytest.raises(ValueError):
            recursion_x0(((0.5, 0.4), (0.0, 1.0, 2.0)), args)
        with pytest.raises(ValueError):
            recursion_x0(((0.5,), (0.0, 2.0, 1.0)), args)

    def test_doubling_check(self):
        z = ParisiMeasure.single(0.45, 1.2)
        args = ParisiArgs(a=12.0, h=0.0, gamma=0.0, model=MODEL)
        with pytest.raises(QuadratureDoublingError):
            recursion_x0(z, args, n_hermite=2, check=True)
        v = recursion_x0(z, args, check=True)
        assert math.isfinite(v)

    def test_four_level_path_matches_at_kappa_zero(self):
        # with kappa=0 every path must return the bare leaf value
        m0 = MeanFieldModel(beta=2.0, kappa=0.0, alpha=0.0, phi=1.0)
        args = ParisiArgs(a=8.0, h=0.0, gamma=0.1, model=m0)
        z4 = ParisiMeasure(
            lambdas=(0.15, 0.35, 0.55, 0.8),
            atoms=(0.0, 0.4, 0.9, 1.5, 2.0),
        )
        z1 = ParisiMeasure.single(0.5, 2.0)
        assert abs(recursion_x0(z4, args) - recursion_x0(z1, args)) < 1e-10

    def test_gamma_convex(self):
        z = ParisiMeasure.single(0.45, 1.2)
        gammas = np.linspace(-2.0, 2.0, 9)
        vals = [
            recursion_x0(z, ParisiArgs(a=12.0, h=0.0, gamma=g, model=MODEL))
            for g in gammas
        ]
        assert np.all(np.diff(vals, 2) > -1e-10)


class TestValueAndCorrections:
    def test_two_forms_agree_on_random_measures(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            k = int(rng.integers(1, 4))
            lams = np.sort(rng.uniform(0.01, 0.99, k))
            while np.any(np.diff(lams) < 1e-3):
                lams = np.sort(rng.uniform(0.01, 0.99, k))
            atoms = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 25.0, k))])
            cov = CovarianceFns(
                beta=rng.uniform(0.5, 3.0), kappa=rng.uniform(0.0, 0.8)
            )
            z = ParisiMeasure(lambdas=tuple(lams), atoms=tuple(atoms))
            a = quadratic_correction(z, cov)
            b = quadratic_correction_theta(z, cov)
            assert abs(a - b) < 1e-12

    def test_parisi_value_subtracts_correction(self):
        z = ParisiMeasure.single(0.45, 1.2)
        args = ParisiArgs(a=12.0, h=0.0, gamma=0.0, model=MODEL)
        x0 = recursion_x0(z, args)
        corr = quadratic_correction(z, MODEL.covariance)
        assert abs(parisi_value(z, args) - (x0 - corr)) < 1e-14

    def test_objective_requires_matching_support_end(self):
        z = ParisiMeasure.single(0.45, 1.2)
        args = ParisiArgs(a=12.0, h=0.0, gamma=0.0, model=MODEL)
        with pytest.raises(ValueError):
            objective(z, args, 2.0)

    def test_gamma_derivative_matches_independent_quadrature(self):
        lam0, d, a = 0.45, 1.2, 12.0
        z = ParisiMeasure.single(lam0, d)

        def obj(g):
            return objective(
                z, ParisiArgs(a=a, h=0.0, gamma=g, model=MODEL), d
            )

        eps = 1e-5
        fd = (obj(eps) - obj(-eps)) / (2 * eps)

        bk = MODEL.beta * MODEL.kappa * math.sqrt(d)
        p = MODEL.phi * MODEL.beta - 1.0

        def leaf_parts(s):
            den = integrate.quad(
                lambda x: x**p * math.exp(-x * x + (2.0 + s) * x),
                0, a, limit=200,
            )[0]
            num = integrate.quad(
                lambda x: x ** (p + 2) * math.exp(-x * x + (2.0 + s) * x),
                0, a, limit=200,
            )[0]
            return den, num / den

        def ratio(weight_fn):
            return integrate.quad(
                lambda zv: math.exp(-zv * zv / 2)
                / math.sqrt(2 * math.pi)
                * weight_fn(*leaf_parts(bk * zv)),
                -9, 9, limit=200,
            )[0]

        num = ratio(lambda den, m2: den**lam0 * m2)
        den = ratio(lambda den, m2: den**lam0)
        assert abs(fd - (num / den - d)) < 1e-6


class TestOptimization:
    def test_inner_two_levels_never_worse(self):
        r1 = inner_minimize(MODEL, a=12.0, d=1.2, k_levels=1)
        r2 = inner_minimize(MODEL, a=12.0, d=1.2, k_levels=2)
        assert r2.value <= r1.value + 1e-8

    def test_inner_requires_h_for_positive_alpha(self):
        m = MeanFieldModel(beta=2.0, kappa=0.3, alpha=0.3, phi=1.0)
        with pytest.raises(ValueError):
            inner_minimize(m, a=5.0, d=1.0, k_levels=1)

    def test_inner_h_stationary_when_alpha_negative(self):
        m = MeanFieldModel(beta=2.0, kappa=0.3, alpha=-0.8, phi=1.0)
        r = inner_minimize(m, a=8.0, d=1.5, k_levels=1)
        assert r.converged
        eps = 1e-4

        def at_h(h):
            args = ParisiArgs(a=8.0, h=h, gamma=r.gamma, model=m)
            return objective(r.zeta, args, 1.5)

        grad = (at_h(r.h + eps) - at_h(r.h - eps)) / (2 * eps)
        assert abs(grad) < 1e-3

    def test_a_ceiling_invariance(self):
        ra = inner_minimize(MODEL, a=15.0, d=1.2, k_levels=1)
        rb = inner_minimize(MODEL, a=30.0, d=1.2, k_levels=1)
        assert abs(ra.value - rb.value) < 1e-8

    def test_decoupled_saddle_recovers_base_measure_mass(self):
        m = MeanFieldModel(beta=2.0, kappa=1e-6, alpha=0.0, phi=1.0)
        res = saddle_search(m, k_levels=1, outer_maxfev=200)
        target = TiltedBaseMeasure(beta=2.0, phi=1.0, tilt=2.0).log_mass()
        assert abs(res.value - target) < 1e-4
        assert abs(res.gamma) < 1e-4
        assert res.converged

    def test_anchor_regression(self):
        res = saddle_search(MODEL, k_levels=1, outer_maxfev=400)
        assert abs(res.value - ANCHOR_VALUE) < 1e-6
        assert abs(res.a - ANCHOR_A) < 1e-2
        assert abs(res.d - ANCHOR_D) < 1e-3
        assert res.converged
        assert max(abs(v) for v in res.residuals.values()) < 1e-4

    def test_saddle_rejects_unrealizable_models(self):
        with pytest.raises(ValueError):
            saddle_search(MeanFieldModel(beta=2.0, kappa=0.8, alpha=0.0,
                                         phi=1.0))
        with pytest.raises(ValueError):
            saddle_search(MeanFieldModel(beta=2.0, kappa=0.0, alpha=1.2,
                                         phi=1.0))

    def test_positive_alpha_branch(self):
        m = MeanFieldModel(beta=2.0, kappa=0.3, alpha=0.3, phi=1.0)
        res = saddle_search(m, k_levels=1, outer_maxfev=150)
        assert res.h > 0
        assert res.h <= math.sqrt(res.d) + 1e-9
        assert max(abs(v) for v in res.residuals.values()) < 1e-3

    def test_a_ray_profile_saturates_here(self):
        prof = a_ray_profile(MODEL, 1, [2.0, 5.0, 10.0])
        vals = [v for _, v in prof]
        assert vals[0] <= vals[1] <= vals[2] + 1e-10
        assert abs(vals[2] - ANCHOR_VALUE) < 1e-3
