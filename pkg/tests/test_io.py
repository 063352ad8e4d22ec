import numpy as np
import pytest

from haarquant import alloc, cppq, fquant, io, quant1d
from haarquant.alloc import AllocationPlan
from haarquant.fquant import DistortionReport
from haarquant.procsim import JumpLaw


class TestRecords:
    def test_fmt_round_trips(self):
        rng = np.random.default_rng(0)
        for x in np.r_[rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, 200), 0.1, 1 / 3]:
            assert float(io.fmt(x)) == x

    def test_codebook_round_trip(self):
        cb = quant1d.Codebook1D(np.array([-1 / 3, 2.0**-40, 0.1]), 1.5)
        back = io.parse_codebook(io.codebook_text(cb))
        np.testing.assert_array_equal(back.points, cb.points)
        assert back.r == 1.5 and back.censor is None

    def test_censored_codebook(self, tmp_path):
        cb = quant1d.Codebook1D(np.array([0.25, 0.7, 1.3]), 1.0, censor=1.3)
        back = io.read_codebook(io.write_codebook(cb, tmp_path / "x.book"))
        assert back.censor == 1.3

    def test_plan_round_trip(self):
        plan = alloc.allocate_phi(alloc.power_weights(0.5), 1000)
        back = io.parse_plan(io.plan_text(plan))
        assert back.sizes == plan.sizes and back.N == plan.N

    def test_plan_length_mismatch(self):
        with pytest.raises(ValueError):
            io.parse_plan("N=8\nm=3\n2\n2\n")

    def test_curve_csv(self):
        reps = [DistortionReport(64, 2.0, 2.0, 0.123456789012345678, 1e-4, 100), DistortionReport(256, 2.0, 2.0, 0.1, 2e-4, 100)]
        text = io.curve_csv(reps)
        assert text.splitlines()[0] == io.CURVE_HEADER
        assert io.parse_curve_csv(text) == reps

    def test_git_blob_hash(self):
        # `git hash-object` of an empty file and of "hello\n"
        assert io.git_blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
        assert io.git_blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


class TestQuantizerDirs:
    def test_product_quantizer(self, tmp_path):
        rng = np.random.default_rng(1)
        samples = rng.standard_normal((2000, 4))
        q = fquant.build(AllocationPlan((5, 3, 2, 1), 30), samples, r=2.0)
        io.save_product_quantizer(q, tmp_path)
        back = io.load_product_quantizer(tmp_path)
        assert back.plan.sizes == q.plan.sizes
        for a, b in zip(q.codebooks, back.codebooks):
            np.testing.assert_array_equal(a.points, b.points)
        x = rng.standard_normal((50, 4))
        np.testing.assert_array_equal(q.quantize_coeffs(x)[1], back.quantize_coeffs(x)[1])

    @pytest.mark.parametrize("law", [None, JumpLaw("exponential")])
    def test_poisson_quantizer(self, tmp_path, law):
        q = cppq.build_poisson_quantizer(1.5, 2.0, 1.0, 1.0, 0.5, 512, law, n_train=3000, rng=2)
        io.save_poisson_quantizer(q, tmp_path)
        back = io.load_poisson_quantizer(tmp_path)
        assert (back.N, back.N1, back.N2, back.lam, back.T) == (q.N, q.N1, q.N2, q.lam, q.T)
        for a, b in zip(q.time_books + q.size_books, back.time_books + back.size_books):
            np.testing.assert_array_equal(a.points, b.points)
        S = np.random.default_rng(3).uniform(0, 4, (20, q.time_depth))
        np.testing.assert_array_equal(q.quantize_arrivals(S), back.quantize_arrivals(S))
