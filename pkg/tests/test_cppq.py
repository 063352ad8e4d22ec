import math

import numpy as np
import pytest

from haarquant import cppq, quant1d
from haarquant.cppq import PoissonQuantizer
from haarquant.errors import BudgetError, DomainError
from haarquant.haar import TimeGrid, grid_lp_norm
from haarquant.procsim import (
    CompoundPoisson,
    JumpLaw,
    JumpRecord,
    Poisson,
    erlang_tail_bound,
    erlang_tail_prob,
    jump_paths_on_grid,
    simulate_jump_batch,
    truncated_arrival_samples,
)
from haarquant.rng import StreamFactory


def manual_quantizer(books, lam=1.0, T=1.0):
    lamT = lam * T
    cbs = [quant1d.Codebook1D(b, 1.0, censor=lamT) for b in books]
    N = math.prod(len(b) for b in books)
    return PoissonQuantizer(cbs, [], None, lam, T, 1.0, 1.0, 0.5, N, N, 1)


@pytest.fixture(scope="module")
def poisson_q():
    return cppq.build_poisson_quantizer(1.0, 1.0, 1.0, 1.0, 0.5, 2**10, n_train=20_000, rng=StreamFactory(1))


@pytest.fixture(scope="module")
def compound_q():
    law = JumpLaw("gaussian")
    return cppq.build_poisson_quantizer(2.0, 1.0, 2.0, 1.0, 0.5, 2**12, law, n_train=20_000, rng=StreamFactory(2))


class TestBuild:
    def test_unit_budget_is_zero_quantizer(self):
        q = cppq.build_poisson_quantizer(1.0, 1.0, 1.0, 1.0, 0.5, 1, n_train=1000, rng=3)
        assert all(cb.size == 1 and cb.points[0] == 1.0 for cb in q.time_books)
        rep = cppq.estimate_distortion(q, Poisson(lam=1.0), 1.0, 1.0, 50_000, rng=4)
        assert rep.estimate == pytest.approx(0.5, rel=0.03)

    def test_sentinel_is_max(self, poisson_q):
        for cb in poisson_q.time_books:
            assert cb.points[-1] == 1.0
            assert cb.censor == 1.0
            if cb.size == 1:
                np.testing.assert_array_equal(cb.points, [1.0])

    def test_first_book_free_point(self):
        gen = StreamFactory(5).generator("check")
        s = truncated_arrival_samples(1, 1.0, gen, 10_000)
        book = cppq._time_book(s, 2, 1.0, 1.0)
        oracle = quant1d.train_dp_oracle(s, 1, 1)
        assert book.points[0] == pytest.approx(oracle.points[0], rel=0.01)

    def test_budgets(self, poisson_q, compound_q):
        assert poisson_q.cardinality <= poisson_q.N1 <= poisson_q.N
        q = compound_q
        assert q.time_cardinality <= q.N1
        assert q.size_cardinality <= q.N2
        assert q.N1 * q.N2 <= q.N
        assert q.cardinality <= q.N

    def test_split_exponents(self):
        r, p, eps = 2.0, 1.0, 0.05
        c = 1 / math.sqrt(p * r) - eps
        N = 10**6
        N1, N2 = cppq.budget_split(N, r, p, eps)
        assert N1 == math.floor(N ** (r * c * c / (1 + r * c * c)))
        assert N2 == math.floor(N ** (1 / (1 + r * c * c)))

    def test_erlang_bound_over_depth(self, poisson_q):
        for n in range(1, poisson_q.time_depth + 1):
            assert erlang_tail_prob(n, poisson_q.lamT) <= erlang_tail_bound(n, poisson_q.lamT) + 1e-12

    def test_size_books_from_size_stream_only(self):
        law = JumpLaw("exponential")
        f = StreamFactory(6)
        q = cppq.build_poisson_quantizer(1.5, 1.0, 1.0, 1.0, 0.5, 4096, law, n_train=5000, rng=f)
        u = law.sample(f.generator("train-sizes"), 5000)
        for cb in q.size_books:
            np.testing.assert_array_equal(cb.points, quant1d.train_lloyd(u, cb.size, 1.0).points)

    def test_preconditions(self):
        with pytest.raises(DomainError):
            cppq.build_poisson_quantizer(1.0, 1.0, 1.0, 2.0, 0.5, 64)
        with pytest.raises(BudgetError):
            cppq.build_poisson_quantizer(1.0, 1.0, 1.0, 1.0, 0.5, 0)
        with pytest.raises(DomainError):
            cppq.budget_split(64, 4.0, 4.0, 0.5)


class TestQuantizeJumpPath:
    def test_empty_record(self, poisson_q):
        grid = TimeGrid(1.0, 6)
        out = cppq.quantize_jump_path(poisson_q, JumpRecord(np.empty(0), np.empty(0), 1.0, 1.0), grid)
        assert not out.active.any()
        np.testing.assert_array_equal(out.values, 0.0)

    def test_hand_example(self):
        q = manual_quantizer([[0.35, 1.0]], lam=2.0, T=0.5)
        grid = TimeGrid(0.5, 10)
        out = cppq.quantize_jump_path(q, JumpRecord(np.array([0.4]), np.array([1.0]), 2.0, 0.5), grid)
        assert out.arrivals[0] == 0.35
        expect = jump_paths_on_grid(np.array([[0.35]]), np.array([[1.0]]), 2.0, grid)[0]
        np.testing.assert_array_equal(out.values, expect)

    def test_censored_arrivals_map_to_sentinel(self, compound_q):
        batch = simulate_jump_batch(CompoundPoisson(lam=2.0, jump=JumpLaw("gaussian")), 3000, rng=7)
        s_hat = compound_q.quantize_arrivals(batch.S)
        S = batch.arrivals_to(compound_q.time_depth)
        assert np.all(s_hat[S > batch.lamT] == batch.lamT)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_single_jump_distance(self, p):
        lam, T = 3.0, 2.0
        rng = np.random.default_rng(8)
        for _ in range(50):
            s, s_hat = rng.uniform(0, 1.2 * lam * T, 2)
            times = np.array([[min(s, lam * T) / lam, min(s_hat, lam * T) / lam]])
            d = cppq.step_lp_norm(times, np.array([[1.0, -1.0]]), T, p)[0]
            expect = (abs(min(s, lam * T) - min(s_hat, lam * T)) / lam) ** (1 / p)
            assert d == pytest.approx(expect, rel=1e-12, abs=1e-15)

    def test_exact_norm_matches_grid(self, compound_q):
        batch = simulate_jump_batch(CompoundPoisson(lam=2.0, jump=JumpLaw("gaussian")), 200, rng=9)
        exact = cppq.path_errors(compound_q, batch, 2.0)
        grid = TimeGrid(1.0, 14)
        truth = jump_paths_on_grid(batch.S, batch.U, 2.0, grid)
        s_hat = compound_q.quantize_arrivals(batch.S)
        u_hat = compound_q.quantize_sizes(batch.U, compound_q.time_depth)
        active = s_hat < batch.lamT
        approx = jump_paths_on_grid(np.where(active, s_hat, np.inf), np.where(active, u_hat, 0.0), 2.0, grid)
        np.testing.assert_allclose(exact, grid_lp_norm(truth - approx, 1.0, 2.0), atol=0.02)


class TestDistortion:
    def test_decoupling_bound(self, compound_q):
        batch = simulate_jump_batch(CompoundPoisson(lam=2.0, jump=JumpLaw("gaussian")), 5000, rng=10)
        total, sizes, times = cppq.decoupled_errors(compound_q, batch, 1.0)
        assert np.all(total <= sizes + times + 1e-12)
        r = compound_q.r
        norm = lambda x: np.mean(x**r) ** (1 / r)
        assert norm(total) <= norm(sizes) + norm(times) + 1e-12
        np.testing.assert_allclose(total, cppq.path_errors(compound_q, batch, 1.0), rtol=1e-12)

    def test_curve_decreasing(self):
        curve, qs = cppq.cpp_distortion_curve(
            1.0, 1.0, None, 1.0, 1.0, 0.5, [16, 64, 256, 1024], 5000, rng=11, n_train=20_000, return_quantizers=True
        )
        for a, b in zip(curve, curve[1:]):
            assert b.estimate <= a.estimate + 2 * math.hypot(a.stderr, b.stderr)
        assert all(q.cardinality <= q.N for q in qs)

    def test_curve_validation(self):
        with pytest.raises(BudgetError):
            cppq.cpp_distortion_curve(1.0, 1.0, None, 1.0, 1.0, 0.5, [1, 4], 10)
        with pytest.raises(ValueError):
            cppq.cpp_distortion_curve(1.0, 1.0, None, 1.0, 1.0, 0.5, [8, 4], 10)

    def test_deterministic(self):
        a = cppq.cpp_distortion_curve(1.0, 1.0, JumpLaw("uniform"), 1.0, 1.0, 0.5, [16, 64], 1000, rng=12, n_train=2000)
        b = cppq.cpp_distortion_curve(1.0, 1.0, JumpLaw("uniform"), 1.0, 1.0, 0.5, [16, 64], 1000, rng=12, n_train=2000)
        assert [x.estimate for x in a] == [x.estimate for x in b]
