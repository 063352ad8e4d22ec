import math

import numpy as np
import pytest

from haarquant import alloc, fquant, haar, quant1d
from haarquant.alloc import AllocationPlan
from haarquant.errors import ResolutionError
from haarquant.haar import PathSample, TimeGrid
from haarquant.procsim import Brownian, Stable, simulate_paths
from haarquant.rng import StreamFactory


@pytest.fixture(scope="module")
def bm_coeffs():
    return fquant.coefficient_samples(Brownian(), 4, n_train=20_000, level=8, rng=StreamFactory(5))


@pytest.fixture(scope="module")
def bm_paths():
    return simulate_paths(Brownian(), TimeGrid(1.0, 8), 4000, rng=StreamFactory(6), purpose="eval")


def trained(bm_coeffs, sizes, N=None):
    return fquant.build(AllocationPlan(sizes, N or math.prod(sizes)), bm_coeffs, r=2.0)


class TestBuild:
    def test_all_ones_quantizes_to_zero(self, bm_coeffs, bm_paths):
        q = trained(bm_coeffs, (1, 1, 1))
        path = PathSample(TimeGrid(1.0, 8), bm_paths[0])
        out, codes = fquant.quantize_path(q, path)
        np.testing.assert_array_equal(out.values, 0.0)
        np.testing.assert_array_equal(codes, 0)
        rep = fquant.distortion_on_paths(q, bm_paths, 2.0, 2.0)
        direct = np.mean(haar.grid_lp_norm(bm_paths, 1.0, 2.0) ** 2) ** 0.5
        assert rep.estimate == pytest.approx(direct, rel=1e-12)

    def test_first_book_symmetric(self, bm_coeffs):
        q = trained(bm_coeffs, (3, 1), 4)
        pts = q.codebooks[0].points
        assert pts.size == 3
        assert pts[0] == pytest.approx(-pts[2], abs=0.02)
        assert pts[1] == pytest.approx(0.0, abs=0.02)

    def test_point_mass_family(self):
        grid = TimeGrid(1.0, 4)
        coeffs = np.array([0.4, -1.0, 0.25, 2.0])
        x = haar.reconstruct_values(coeffs, 1.0, grid.levels)
        samples = np.tile(haar.forward_coeffs(x, 1.0, 1), (50, 1))
        q = fquant.build(AllocationPlan((1, 1, 1, 1), 1), samples, center_singletons=True)
        assert fquant.distortion_on_paths(q, x[None, :], 2.0, 2.0).estimate == pytest.approx(0.0, abs=1e-14)

    def test_single_codebook_on_constant_path(self):
        c, T = 0.8, 4.0
        q = fquant.ProductQuantizer(AllocationPlan((2,), 2), [quant1d.Codebook1D([-c, c])], T=T)
        out, _ = fquant.quantize_path(q, PathSample(TimeGrid(T, 3), np.full(9, 3.0)))
        np.testing.assert_allclose(out.values, c / math.sqrt(T))

    def test_plan_size_mismatch(self, bm_coeffs):
        with pytest.raises(ValueError):
            fquant.ProductQuantizer(AllocationPlan((2,), 2), [quant1d.Codebook1D([0.0, 1.0, 2.0])])

    def test_cardinality_within_budget(self, bm_coeffs):
        for N in (2, 7, 50, 300):
            q = fquant.build(alloc.allocate_phi(alloc.power_weights(0.5), N), bm_coeffs)
            assert q.cardinality <= N
            codes = q.quantize_coeffs(bm_coeffs[:500, : q.depth])[1]
            assert len({tuple(c) for c in codes}) <= N


class TestQuantize:
    def test_idempotent(self, bm_coeffs, bm_paths):
        q = trained(bm_coeffs, (4, 3, 2))
        path = PathSample(TimeGrid(1.0, 8), bm_paths[1])
        once, codes = fquant.quantize_path(q, path)
        twice, codes2 = fquant.quantize_path(q, once)
        np.testing.assert_array_equal(codes, codes2)
        np.testing.assert_array_equal(once.values, twice.values)

    def test_decode_matches_quantize(self, bm_coeffs, bm_paths):
        q = trained(bm_coeffs, (4, 3, 2))
        path = PathSample(TimeGrid(1.0, 8), bm_paths[2])
        out, codes = fquant.quantize_path(q, path)
        np.testing.assert_allclose(q.decode(codes, 8), out.values, atol=1e-14)

    def test_scale_equivariance(self, bm_coeffs, bm_paths):
        q = trained(bm_coeffs, (5, 3, 2, 2))
        for lam in (0.1, 3.0, 17.0):
            a = fquant.distortion_on_paths(q, bm_paths, 2.0, 2.0).estimate
            b = fquant.distortion_on_paths(q.scaled(lam), lam * bm_paths, 2.0, 2.0).estimate
            assert b == pytest.approx(lam * a, rel=1e-12)

    def test_translation_covariance(self, bm_coeffs, bm_paths):
        q = trained(bm_coeffs, (5, 3, 2, 2))
        xi_coeffs = np.array([0.3, -0.7, 1.1, 0.05])
        xi = haar.reconstruct_values(xi_coeffs, 1.0, 8)
        a = fquant.distortion_on_paths(q, bm_paths, 2.0, 1.0).estimate
        b = fquant.distortion_on_paths(q.shifted(xi_coeffs), bm_paths + xi, 2.0, 1.0).estimate
        assert b == pytest.approx(a, rel=1e-12)

    def test_lp_ordering_per_path(self, bm_coeffs, bm_paths):
        q = trained(bm_coeffs, (4, 2))
        e1 = fquant.path_errors(q, bm_paths, 1.0, 1.0)
        e2 = fquant.path_errors(q, bm_paths, 1.0, 2.0)
        e3 = fquant.path_errors(q, bm_paths, 1.0, 3.0)
        assert np.all(e1 <= e2 * (1 + 1e-12))
        assert np.all(e2 <= e3 * (1 + 1e-12))

    def test_resolution_guard(self, bm_coeffs):
        q = trained(bm_coeffs, (2, 2, 2, 2, 2))
        with pytest.raises(ResolutionError):
            fquant.quantize_path(q, PathSample(TimeGrid(1.0, 2), np.zeros(5)))


class TestEstimate:
    def test_brownian_zero_quantizer(self):
        q = fquant.ProductQuantizer(AllocationPlan((1,), 1), [quant1d.Codebook1D([0.0])])
        rep = fquant.estimate_distortion(q, Brownian(), 2.0, 2.0, 100_000, rng=7, level=8)
        assert rep.estimate == pytest.approx(math.sqrt(0.5), rel=0.02)
        assert rep.n_paths == 100_000

    def test_adding_a_point_never_hurts(self, bm_coeffs):
        q = trained(bm_coeffs, (3, 2))
        spec = Brownian()
        d = fquant.estimate_distortion(q, spec, 2.0, 2.0, 5000, rng=8)
        bigger = list(q.codebooks)
        bigger[1] = quant1d.Codebook1D(np.sort(np.r_[bigger[1].points, 0.0]))
        q2 = fquant.ProductQuantizer(AllocationPlan((3, 3), 9), bigger)
        d2 = fquant.estimate_distortion(q2, spec, 2.0, 2.0, 5000, rng=8)
        assert d2.estimate <= d.estimate + 2 * d.stderr

    def test_curve_decreasing(self):
        curve, qs = fquant.distortion_curve(
            Stable(alpha=1.5), 2 / 3, 1.0, 1.0, [4, 16, 64, 256], 3000, rng=9, n_train=20_000, return_quantizers=True
        )
        for a, b in zip(curve, curve[1:]):
            assert b.estimate <= a.estimate + 2 * math.hypot(a.stderr, b.stderr)
        for q in qs:
            assert q.meta["train_stream"] != StreamFactory(9).stream_id("eval")
            assert q.cardinality <= q.plan.N

    def test_budgets_must_increase(self):
        with pytest.raises(ValueError):
            fquant.distortion_curve(Brownian(), 0.5, 2.0, 2.0, [16, 8], 10)
