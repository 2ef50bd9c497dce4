import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from acnn_kspace.metrics import MetricsReport, nmse, psnr, rankdata, ssim, wilcoxon_rank_sum
from oracles import nmse_direct, psnr_direct, rank_sum_exact_p, ssim_direct

positive_images = st.lists(st.floats(0.01, 10.0), min_size=4, max_size=64).map(np.array)


class TestImageMetrics:
    def test_against_direct_formulas(self, rng):
        for _ in range(100):
            v = rng.uniform(0, 1, (8, 8))
            vhat = v + 0.1 * rng.standard_normal((8, 8))
            assert abs(ssim(vhat, v) - ssim_direct(vhat, v)) < 1e-10
            assert abs(psnr(vhat, v) - psnr_direct(vhat, v)) < 1e-10
            assert abs(nmse(vhat, v) - nmse_direct(vhat, v)) < 1e-10

    def test_identities(self, rng):
        v = rng.uniform(0.1, 1, (8, 8))
        assert ssim(v, v) == pytest.approx(1.0, abs=1e-15)
        assert nmse(v, v) == 0.0
        assert psnr(v, v) == math.inf
        assert ssim(v + 0.3, v) < 1
        assert nmse(np.zeros_like(v), v) == pytest.approx(1.0)
        assert nmse(2 * v, v) == pytest.approx(1.0)

    def test_psnr_values(self):
        v = np.zeros((10, 10))
        v[0, 0] = 1.0
        vhat = v.copy()
        vhat.ravel()[1:] = 0.1 * np.sqrt(100 / 99)  # MSE = 0.01
        assert psnr(vhat, v) == pytest.approx(20.0)
        assert psnr(v + 1.0, v) == pytest.approx(0.0)

    def test_non_squared_stabilisers(self):
        v = np.linspace(0, 2, 16)
        vhat = v[::-1].copy()
        L = 2.0
        mu = v.mean()
        var = v.var()
        cov = np.mean((vhat - mu) * (v - mu))
        want = ((2 * mu * mu + 0.01 * L) * (2 * cov + 0.03 * L)) / ((2 * mu**2 + 0.01 * L) * (2 * var + 0.03 * L))
        assert ssim(vhat, v) == pytest.approx(want, rel=1e-12)

    def test_windowed_variant(self, rng):
        v = rng.uniform(0.1, 1, (16, 16))
        assert ssim(v, v, windowed=True) == pytest.approx(1.0)
        assert ssim(v + 0.2 * rng.standard_normal(v.shape), v, windowed=True) < 1

    def test_errors(self):
        with pytest.raises(ValueError):
            ssim(np.ones(4), np.zeros(4))
        with pytest.raises(ValueError):
            psnr(np.ones(4), -np.ones(4))
        with pytest.raises(ValueError):
            nmse(np.ones(4), np.zeros(4))
        with pytest.raises(ValueError):
            ssim(np.ones(4), np.ones(5))

    @settings(max_examples=50, deadline=None)
    @given(positive_images, st.floats(0.1, 100.0), st.integers(0, 1000))
    def test_properties(self, v, alpha, seed):
        noise = np.random.default_rng(seed).standard_normal(v.shape)
        vhat = v + 0.1 * noise
        assert ssim(v, v) == pytest.approx(1.0)
        assert ssim(vhat, v) <= 1 + 1e-12
        assert nmse(vhat, v) >= 0
        if np.any(vhat != v):
            assert psnr(alpha * vhat, alpha * v) == pytest.approx(psnr(vhat, v), abs=1e-8)


class TestRankSum:
    def test_textbook_example(self):
        assert wilcoxon_rank_sum([1, 2], [3, 4]) == pytest.approx(2 / 6)

    def test_identical(self):
        assert wilcoxon_rank_sum([1, 2, 3], [3, 2, 1]) == pytest.approx(1.0)
        assert wilcoxon_rank_sum([5, 5], [5, 5, 5]) == 1.0

    def test_midranks(self):
        np.testing.assert_array_equal(rankdata([10, 20, 20, 30]), [1, 2.5, 2.5, 4])

    def test_exact_matches_enumeration_all_sizes(self):
        rng = np.random.default_rng(0)
        for n1 in range(1, 10):
            for n2 in range(1, 11 - n1):
                for _ in range(3):
                    a = rng.integers(0, 6, n1).astype(float)  # ties on purpose
                    b = rng.integers(0, 6, n2).astype(float)
                    if np.all(np.r_[a, b] == a[0]):
                        continue
                    assert wilcoxon_rank_sum(a, b) == pytest.approx(rank_sum_exact_p(a, b), abs=1e-12)

    def test_normal_approximation_close_to_exact(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(40):
            a, b = rng.standard_normal(6), rng.standard_normal(6) + rng.uniform(0, 1.5)
            worst = max(worst, abs(wilcoxon_rank_sum(a, b, exact=False) - rank_sum_exact_p(a, b)))
        assert worst < 0.02

    def test_large_sample_matches_scipy(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = np.round(rng.standard_normal(30), 1)
            b = np.round(rng.standard_normal(25) + 0.3, 1)
            want = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True).pvalue
            assert wilcoxon_rank_sum(a, b) == pytest.approx(want, rel=1e-9)

    def test_errors(self):
        with pytest.raises(ValueError):
            wilcoxon_rank_sum([], [1.0])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=8),
           st.lists(st.integers(0, 20), min_size=1, max_size=8))
    def test_symmetry_and_range(self, a, b):
        p = wilcoxon_rank_sum(a, b)
        assert 0 < p <= 1
        assert p == pytest.approx(wilcoxon_rank_sum(b, a))


class TestReport:
    def make(self, rng):
        truth = rng.uniform(0.1, 1, (6, 8, 8))
        report = MetricsReport()
        report.add("good", truth + 0.01 * rng.standard_normal(truth.shape), truth)
        report.add("bad", truth + 0.2 * rng.standard_normal(truth.shape), truth)
        report.compare("good", "bad")
        return report, truth

    def test_perfect_reconstruction_rows(self, rng):
        truth = rng.uniform(0.1, 1, (3, 8, 8))
        report = MetricsReport().add("same", truth, truth)
        for s, p, e in report.per_slice["same"]:
            assert s == pytest.approx(1.0) and e == 0.0 and p == math.inf

    def test_identical_groups_p_one(self, rng):
        truth = rng.uniform(0.1, 1, (5, 8, 8))
        recon = truth + 0.05 * rng.standard_normal(truth.shape)
        report = MetricsReport().add("a", recon, truth).add("b", recon, truth)
        assert all(p == 1.0 for p in report.compare("a", "b").values())

    def test_totals_recompute_from_rows(self, rng, tmp_path):
        report, _ = self.make(rng)
        report.write(tmp_path / "m.csv")
        back = MetricsReport.read_rows(tmp_path / "m.csv")
        for method in ("good", "bad"):
            for metric in MetricsReport.METRICS:
                col = back.column(method, metric)
                mean, std = report.aggregate(method)[metric]
                assert abs(col.mean() - mean) < 1e-9 and abs(col.std() - std) < 1e-9
        text = (tmp_path / "m.csv").read_text()
        assert text.startswith("method,slice,ssim,nmse,psnr\n")
        summary = [l for l in text.splitlines() if l.startswith("good,") and l.count(",") > 5]
        assert summary and summary[0].endswith(",bad")
