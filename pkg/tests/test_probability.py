"""Beta parameter model: densities, quantiles, sampling and quadrature training sets."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import betainc

from wrom.errors import InvalidArgument
from wrom.probability import (
    STUDY_SHAPES,
    BetaParams,
    ParameterBox,
    beta_cdf,
    beta_inverse_cdf,
    beta_pdf,
    jacobi_families,
    quadrature_training_set,
    sample,
    spawn_seeds,
)
from wrom.quadrature import gauss_jacobi, smolyak_grid, tensor_grid

# Lanczos (g=7, n=9) coefficients: an independent log-Gamma for the density oracle
_LANCZOS = (0.99999999999980993, 676.5203681218851, -1259.1392167224028,
            771.32342877765313, -176.61502916214059, 12.507343278686905,
            -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7)


def lanczos_lgamma(z):
    if z < 0.5:
        return math.log(math.pi / abs(math.sin(math.pi * z))) - lanczos_lgamma(1.0 - z)
    z -= 1.0
    x = _LANCZOS[0] + sum(c / (z + i) for i, c in enumerate(_LANCZOS[1:], start=1))
    t = z + 7.5
    return 0.5 * math.log(2 * math.pi) + (z + 0.5) * math.log(t) - t + math.log(x)


class TestDensity:
    def test_symmetric_quadratic(self):
        assert beta_pdf(0.5, BetaParams(2, 2)) == pytest.approx(1.5, rel=1e-14)

    def test_uniform(self):
        assert beta_pdf(0.5, BetaParams(1, 1)) == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("x", [0.25, 1e-6, 0.5, 0.999])
    @pytest.mark.parametrize("shape", STUDY_SHAPES)
    def test_log_gamma_oracle(self, x, shape):
        a, b = shape
        log_b = lanczos_lgamma(a) + lanczos_lgamma(b) - lanczos_lgamma(a + b)
        expected = math.exp((a - 1) * math.log(x) + (b - 1) * math.log1p(-x) - log_b)
        assert beta_pdf(x, BetaParams(a, b)) == pytest.approx(expected, rel=1e-11)

    def test_endpoints(self):
        assert beta_pdf(0.0, BetaParams(2, 3)) == 0.0
        assert beta_pdf(1.0, BetaParams(2, 3)) == 0.0
        assert beta_pdf(1.0, BetaParams(20, 1)) == pytest.approx(20.0)
        with pytest.raises(InvalidArgument):
            beta_pdf(0.0, BetaParams(0.03, 0.03))
        with pytest.raises(InvalidArgument):
            beta_pdf(1.0, BetaParams(0.03, 0.03))

    @pytest.mark.parametrize("x", [-0.1, 1.0000001])
    def test_outside(self, x):
        with pytest.raises(InvalidArgument):
            beta_pdf(x, BetaParams(2, 2))

    def test_invalid_shapes(self):
        with pytest.raises(InvalidArgument):
            BetaParams(0.0, 1.0)
        with pytest.raises(InvalidArgument):
            BetaParams(1.0, -2.0)

    def test_matches_scipy(self):
        for a, b in STUDY_SHAPES:
            for x in np.linspace(0.01, 0.99, 13):
                assert beta_pdf(x, BetaParams(a, b)) == pytest.approx(
                    stats.beta.pdf(x, a, b), rel=1e-10)


class TestQuantile:
    def test_symmetric_median(self):
        assert beta_inverse_cdf(0.5, BetaParams(2, 2)) == pytest.approx(0.5, abs=1e-14)

    def test_uniform(self):
        assert beta_inverse_cdf(0.25, BetaParams(1, 1)) == pytest.approx(0.25, abs=1e-15)

    def test_power_law(self):
        assert beta_inverse_cdf(0.9, BetaParams(20, 1)) == pytest.approx(0.9 ** (1 / 20), rel=1e-14)

    @pytest.mark.parametrize("shape", STUDY_SHAPES)
    def test_round_trip(self, shape):
        """cdf(inverse_cdf(u)) = u on a 99-point grid.

        Where the exact quantile lies within half an ulp of 1 it is not
        representable; there the returned value must be exactly 1.0 and the
        round trip is checked through the reflected law, whose quantile
        1 - x is representable.  Where the CDF is so steep that one ulp of x
        moves it by more than the tolerance, x must be correct to one ulp.
        """
        a, b = shape
        p = BetaParams(a, b)
        u = np.arange(1, 100) / 100.0
        x = beta_inverse_cdf(u, p)
        for ui, xi in zip(u, x):
            z = beta_inverse_cdf(1.0 - ui, BetaParams(b, a))  # = 1 - x exactly
            if z < 2.0 ** -54:
                assert xi == 1.0
                assert abs((1.0 - betainc(b, a, z)) - ui) < 1e-10
            elif abs(beta_cdf(xi, p) - ui) >= 1e-10:
                below = beta_cdf(np.nextafter(xi, 0.0), p)
                above = beta_cdf(np.nextafter(xi, 1.0), p)
                assert below - 1e-13 <= ui <= above + 1e-13

    @pytest.mark.parametrize("shape", STUDY_SHAPES)
    def test_matches_scipy(self, shape):
        a, b = shape
        u = np.linspace(0.001, 0.999, 51)
        np.testing.assert_allclose(beta_inverse_cdf(u, BetaParams(a, b)),
                                   stats.beta.ppf(u, a, b), rtol=1e-10, atol=1e-300)

    def test_scalar_in_scalar_out(self):
        assert isinstance(beta_inverse_cdf(0.3, BetaParams(3, 4)), float)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.5])
    def test_outside(self, u):
        with pytest.raises(InvalidArgument):
            beta_inverse_cdf(u, BetaParams(2, 2))


class TestBox:
    def test_defaults(self):
        box = ParameterBox()
        np.testing.assert_array_equal(box.lo, [0.2] * 5)
        np.testing.assert_array_equal(box.hi, [1.9, 2.0, 1.9, 2.0, 20.0])

    def test_empty_range(self):
        with pytest.raises(InvalidArgument):
            ParameterBox(((1.0, 1.0),), ((1.0, 1.0),))

    @pytest.mark.parametrize("shape", [(10.0, 10.0), (20.0, 1.0), (75.0, 75.0)])
    def test_density_integrates_to_one(self, shape):
        """Density integrated with an independent Gauss-Legendre rule on the box."""
        box = ParameterBox.with_shape(*shape)
        x, w = np.polynomial.legendre.leggauss(80)
        total = 1.0
        for (lo, hi), law in zip(box.ranges, box.laws):
            t = lo + (hi - lo) * (x + 1) / 2
            vals = [box_density_1d(ti, lo, hi, law) for ti in t]
            total *= (hi - lo) / 2 * np.dot(w, vals)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_joint_density_is_product(self):
        box = ParameterBox.with_shape(10, 10)
        y = box.center + 0.1
        expected = math.prod(stats.beta.pdf((yi - lo) / (hi - lo), 10, 10) / (hi - lo)
                             for yi, (lo, hi) in zip(y, box.ranges))
        assert box.density(y) == pytest.approx(expected, rel=1e-10)

    def test_clamp(self):
        box = ParameterBox.with_shape(0.03, 0.03)
        y = box.clamp(box.lo)
        assert np.all(y > box.lo) and box.contains(y)
        assert np.isfinite(box.density(y))


def box_density_1d(t, lo, hi, law):
    return beta_pdf((t - lo) / (hi - lo), law) / (hi - lo)


class TestSampling:
    def test_single_uniform_draw(self):
        s = sample(ParameterBox(), 0, 1)
        np.testing.assert_array_equal(s.weights, [1.0])

    def test_study_cardinality(self):
        s = sample(ParameterBox.with_shape(75, 75), 3, 240)
        assert len(s) == 240 and s.points.shape == (240, 5)
        np.testing.assert_array_equal(s.weights, np.full(240, 1 / 240))

    def test_mean(self):
        box = ParameterBox.with_shape(75, 75)
        s = sample(box, 12, 10000)
        sd = (box.hi[0] - box.lo[0]) * math.sqrt(75 * 75 / (150**2 * 151))
        assert abs(s.points[:, 0].mean() - 1.05) < 3 * sd / math.sqrt(10000)

    def test_reproducible(self):
        box = ParameterBox.with_shape(10, 10)
        np.testing.assert_array_equal(sample(box, 5, 30).points, sample(box, 5, 30).points)
        assert not np.array_equal(sample(box, 5, 30).points, sample(box, 6, 30).points)

    def test_paired_streams(self):
        """Uniform and Beta draws from one seed are quantile transforms of the same stream."""
        box = ParameterBox.with_shape(20, 1)
        b = sample(box, 9, 50, law="beta")
        u = sample(box, 9, 50, law="uniform")
        x = box.to_unit(b.points)
        np.testing.assert_allclose(beta_cdf(x, BetaParams(20, 1)), box.to_unit(u.points),
                                   atol=1e-12)

    def test_uniform_shape_equals_uniform_law(self):
        box = ParameterBox.with_shape(1, 1)
        np.testing.assert_allclose(sample(box, 4, 20).points,
                                   sample(box, 4, 20, law="uniform").points, atol=1e-15)

    @pytest.mark.parametrize("shape", STUDY_SHAPES)
    def test_bounds_and_distribution(self, shape):
        box = ParameterBox.with_shape(*shape)
        s = sample(box, 1, 100_000)
        assert np.all((s.points >= box.lo) & (s.points <= box.hi))
        # chi-square on quartile bins of one coordinate; the bin edges stay far
        # above the resolution of the physical box even for U-shaped laws
        x = box.to_unit(s.points)[:, 4]
        edges = stats.beta.ppf([0.25, 0.5, 0.75], *shape)
        counts = np.bincount(np.searchsorted(edges, x), minlength=4)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            sample(ParameterBox(), 0, 0)
        with pytest.raises(InvalidArgument):
            sample(ParameterBox(), 0, 5, law="normal")

    def test_spawned_seeds_differ(self):
        seeds = spawn_seeds(42, 4)
        assert len(set(seeds)) == 4 and seeds == spawn_seeds(42, 4)


class TestQuadratureSets:
    def test_one_node_center(self):
        box = ParameterBox.with_shape(1, 1)
        grid = tensor_grid([f.rule(1) for f in jacobi_families(box)])
        s = quadrature_training_set(box, grid)
        np.testing.assert_allclose(s.points, [box.center], rtol=1e-15)
        np.testing.assert_allclose(s.weights, [1.0], rtol=1e-14)

    def test_one_dimensional_mass(self):
        box = ParameterBox(((0.0, 1.0),), ((2.0, 2.0),))
        s = quadrature_training_set(box, tensor_grid([gauss_jacobi(3, 1.0, 1.0)]))
        assert abs(s.weights.sum() - 1.0) < 1e-12

    def test_two_dimensional_constant(self):
        box = ParameterBox(((0.0, 1.0), (2.0, 5.0)), ((3.0, 2.0), (0.5, 4.0)))
        grid = tensor_grid([f.rule(4) for f in jacobi_families(box)])
        s = quadrature_training_set(box, grid)
        assert abs(s.weights.sum() - 1.0) < 1e-12

    def test_exponent_orientation(self):
        """A Beta(20,1) training set integrates the law's mean exactly."""
        box = ParameterBox(((0.0, 1.0),), ((20.0, 1.0),))
        grid = tensor_grid([jacobi_families(box)[0].rule(2)])
        s = quadrature_training_set(box, grid)
        assert s.weights @ s.points[:, 0] == pytest.approx(20 / 21, rel=1e-13)
        assert s.weights @ s.points[:, 0] ** 3 == pytest.approx(
            stats.beta.moment(3, 20, 1), rel=1e-12)

    @pytest.mark.parametrize("shape", STUDY_SHAPES)
    def test_normalization(self, shape):
        box = ParameterBox.with_shape(*shape)
        fams = jacobi_families(box)
        for grid in (tensor_grid([f.rule(3) for f in fams]), smolyak_grid(5, 8, fams)):
            s = quadrature_training_set(box, grid)
            assert abs(s.weights.sum() - 1.0) < 1e-10
            assert np.all((s.points >= box.lo) & (s.points <= box.hi))

    def test_smolyak_signs_preserved(self):
        box = ParameterBox.with_shape(10, 10)
        grid = smolyak_grid(5, 7, jacobi_families(box))
        s = quadrature_training_set(box, grid)
        np.testing.assert_array_equal(np.sign(s.weights), np.sign(grid.weights))

    def test_mismatched_exponents(self):
        box = ParameterBox.with_shape(10, 10)
        grid = tensor_grid([gauss_jacobi(2, 1.0, 1.0)] * 5)
        with pytest.raises(InvalidArgument):
            quadrature_training_set(box, grid)

    def test_quadrature_agrees_with_monte_carlo(self):
        box = ParameterBox.with_shape(10, 10)

        def f(y):
            x = box.to_unit(y)
            return np.exp(np.atleast_2d(x) @ np.array([0.3, -0.2, 0.5, 0.1, -0.4]))

        grid = tensor_grid([fam.rule(4) for fam in jacobi_families(box)])
        s = quadrature_training_set(box, grid)
        quad = s.weights @ f(s.points)
        mc = f(sample(box, 21, 100_000).points)
        assert abs(quad - mc.mean()) < 3 * mc.std() / math.sqrt(len(mc))
