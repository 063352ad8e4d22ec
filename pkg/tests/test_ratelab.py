import numpy as np
import pytest

from haarquant import fquant, ratelab
from haarquant.errors import DomainError, InsufficientPointsError
from haarquant.procsim import FBM, Brownian, CompoundPoisson, JumpLaw, Poisson, Stable

BUDGETS = [2**k for k in range(6, 15)]


@pytest.fixture(scope="module")
def brownian_curve():
    return fquant.distortion_curve(Brownian(), 0.5, 2.0, 2.0, BUDGETS, 4000, rng=21, n_train=20_000)


class TestFits:
    def test_exact_polylog(self):
        N = np.array([2.0**k for k in range(3, 12)])
        fit = ratelab.fit_polylog(np.column_stack([N, np.log(N) ** -0.5]))
        assert fit.param == pytest.approx(0.5, abs=1e-10)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_exact_polylog_with_constant(self):
        N = np.array([10.0, 100.0, 1e3, 1e4, 1e5])
        fit = ratelab.fit_polylog(np.column_stack([N, 3 * np.log(N) ** -0.75]))
        assert fit.param == pytest.approx(0.75, abs=1e-12)
        assert fit.C == pytest.approx(3.0, abs=1e-10)
        np.testing.assert_allclose(fit.predict(N), 3 * np.log(N) ** -0.75, rtol=1e-10)

    def test_exact_subexp(self):
        N = np.array([2.0**k for k in range(4, 20, 2)])
        L = np.log(N)
        fit = ratelab.fit_subexp(np.column_stack([N, np.exp(-0.6 * np.sqrt(L * np.log(L)))]))
        assert fit.param == pytest.approx(0.6, abs=1e-10)
        assert fit.C == pytest.approx(1.0, abs=1e-10)

    def test_too_few_points(self):
        with pytest.raises(InsufficientPointsError):
            ratelab.fit_polylog([(16, 0.5), (64, 0.4), (256, 0.3)])

    def test_domain(self):
        with pytest.raises(DomainError):
            ratelab.fit_polylog([(2, 0.5), (16, 0.4), (64, 0.3), (256, 0.2)])
        with pytest.raises(DomainError):
            ratelab.fit_subexp([(8, 0.5), (16, 0.4), (64, 0.3), (256, 0.2)])
        with pytest.raises(DomainError):
            ratelab.fit_polylog([(8, 0.5), (16, 0.0), (64, 0.3), (256, 0.2)])

    def test_accepts_reports(self, brownian_curve):
        a = ratelab.fit_polylog(brownian_curve)
        b = ratelab.fit_polylog([(c.N, c.estimate) for c in brownian_curve])
        assert a.param == b.param
        assert a.N_range == (64, 2**14)


class TestBrownianCurveFits:
    def test_polylog_exponent(self, brownian_curve):
        assert 0.35 <= ratelab.fit_polylog(brownian_curve).param <= 0.65

    def test_model_discrimination(self, brownian_curve):
        assert ratelab.fit_subexp(brownian_curve).r2 < ratelab.fit_polylog(brownian_curve).r2

    def test_drop_smallest_budget(self, brownian_curve):
        full = ratelab.fit_polylog(brownian_curve).param
        trimmed = ratelab.fit_polylog(brownian_curve[1:]).param
        assert abs(full - trimmed) < 0.1


class TestRegularity:
    def test_brownian(self):
        est = ratelab.estimate_regularity(Brownian(), 2.0, n_paths=1000, rng=1)
        assert est.b == pytest.approx(0.5, abs=0.05)
        assert est.h.size == 9 and est.half_width > 0

    def test_poisson(self):
        assert ratelab.estimate_regularity(Poisson(lam=1.0), 1.0, n_paths=2000, rng=2).b == pytest.approx(1.0, abs=0.1)

    def test_stable(self):
        assert ratelab.estimate_regularity(Stable(alpha=1.5), 1.0, n_paths=2000, rng=3).b == pytest.approx(2 / 3, abs=0.07)

    def test_running_supremum_dominates(self):
        ladder = [2.0**-k for k in range(2, 8)]
        plain = ratelab.estimate_regularity(Brownian(), 1.0, ladder, 500, rng=4)
        sup = ratelab.estimate_regularity(Brownian(), 0.999, ladder, 500, rng=4)
        assert np.all(sup.phi >= plain.phi * 0.99)

    def test_ladder_validation(self):
        with pytest.raises(DomainError):
            ratelab.estimate_regularity(Brownian(), 2.0, [0.5, 0.25, 0.125, 0.0625])
        with pytest.raises(DomainError):
            ratelab.estimate_regularity(Brownian(), 2.0, [0.25, 0.2, 0.1, 0.05])
        with pytest.raises(InsufficientPointsError):
            ratelab.estimate_regularity(Brownian(), 2.0, [0.25, 0.125, 0.0625])


class TestReport:
    def test_brownian_agrees(self):
        rep = ratelab.regularity_rate_report(Brownian(), 2.0, 2.0, 2.0, BUDGETS, rng=5, n_paths=4000, n_train=20_000, reg_paths=500)
        assert rep.agreement
        row = rep.row().split(",")
        assert len(row) == len(ratelab.REPORT_HEADER.split(","))
        assert row[0] == "brownian" and row[-1] == "true"

    def test_fbm_low_hurst(self):
        rep = ratelab.regularity_rate_report(FBM(H=0.25), 2.0, 2.0, 2.0, BUDGETS, rng=6, n_paths=4000, n_train=20_000, reg_paths=500)
        assert rep.regularity.b == pytest.approx(0.25, abs=0.05)
        assert rep.polylog.param == pytest.approx(0.25, abs=0.15)

    def test_compound_poisson_disagrees(self):
        # the gap only opens past N ~ 2**16 for gaussian jumps; big budgets are cheap here
        spec = CompoundPoisson(lam=1.0, jump=JumpLaw("gaussian"))
        budgets = [2**k for k in range(4, 41, 4)]
        rep = ratelab.regularity_rate_report(spec, 1.0, 1.0, 1.0, budgets, rng=7, n_paths=4000, n_train=20_000, reg_paths=1000)
        assert not rep.agreement
        assert rep.subexp is not None and rep.subexp.param > 0

    def test_standard_poisson_disagrees(self):
        budgets = [2**k for k in range(4, 17, 2)]
        rep = ratelab.regularity_rate_report(Poisson(lam=1.0), 1.0, 1.0, 1.0, budgets, rng=8, n_paths=4000, n_train=20_000, reg_paths=1000)
        assert not rep.agreement
        assert rep.polylog.param > 1.5
