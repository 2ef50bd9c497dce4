"""Image-quality metrics (SSIM, PSNR, NMSE) and the Wilcoxon rank-sum test.

SSIM is computed from global image statistics with stabilisers ``c1 = k1 * L``
and ``c2 = k2 * L`` (not squared), ``L = max(v)``, and population variances.
"""

import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.stats import norm

from .validation import check_same_shape

K1, K2 = 0.01, 0.03
EXACT_LIMIT = 12


def _pair(vhat, v):
    vhat, v = check_same_shape(vhat, v, ("reconstruction", "reference"))
    return vhat.astype(np.float64), v.astype(np.float64)


def ssim(vhat, v, k1=K1, k2=K2, windowed=False, win_size=7):
    """Structural similarity of ``vhat`` against reference ``v``.

    ``windowed=True`` switches to the usual local-window average of the same
    expression (uniform ``win_size`` window); the default is the global form.
    """
    vhat, v = _pair(vhat, v)
    L = v.max()
    if L <= 0:
        raise ValueError("SSIM undefined: reference maximum L = max(v) must be positive")
    c1, c2 = k1 * L, k2 * L
    if windowed:
        mu_a = uniform_filter(vhat, win_size)
        mu_b = uniform_filter(v, win_size)
        var_a = uniform_filter(vhat * vhat, win_size) - mu_a**2
        var_b = uniform_filter(v * v, win_size) - mu_b**2
        cov = uniform_filter(vhat * v, win_size) - mu_a * mu_b
    else:
        mu_a, mu_b = vhat.mean(), v.mean()
        var_a, var_b = vhat.var(), v.var()
        cov = np.mean((vhat - mu_a) * (v - mu_b))
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def psnr(vhat, v):
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    vhat, v = _pair(vhat, v)
    peak = v.max()
    if peak <= 0:
        raise ValueError("PSNR undefined: reference maximum must be positive")
    mse = np.mean((vhat - v) ** 2)
    if mse == 0:
        return math.inf
    return float(10 * np.log10(peak**2 / mse))


def nmse(vhat, v):
    """``||vhat - v||^2 / ||v||^2``."""
    vhat, v = _pair(vhat, v)
    ref = np.sum(v * v)
    if ref == 0:
        raise ValueError("NMSE undefined for an all-zero reference")
    return float(np.sum((vhat - v) ** 2) / ref)


def rankdata(values):
    """Ranks starting at 1, ties replaced by their mean rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1
        i = j + 1
    return ranks


def _exact_p(ranks, n1, observed):
    """Two-sided p from the full permutation distribution of the rank sum."""
    expected = n1 * (len(ranks) + 1) / 2.0
    dev = abs(observed - expected) - 1e-9
    hits = total = 0
    for combo in itertools.combinations(range(len(ranks)), n1):
        total += 1
        if abs(sum(ranks[i] for i in combo) - expected) >= dev:
            hits += 1
    return hits / total


def wilcoxon_rank_sum(a, b, exact=None):
    """Two-sided Wilcoxon rank-sum test; returns the p-value.

    Uses exact enumeration when ``len(a) + len(b) <= 12`` (or ``exact=True``)
    and otherwise a normal approximation with tie-corrected variance and a
    0.5 continuity correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n1, n2 = a.size, b.size
    n = n1 + n2
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return 1.0
    ranks = rankdata(pooled)
    w = ranks[:n1].sum()
    if exact is None:
        exact = n <= EXACT_LIMIT
    if exact:
        return _exact_p(ranks, n1, w)
    mean = n1 * (n + 1) / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tie = np.sum(counts**3 - counts)
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, 2 * norm.sf(z)))


@dataclass
class MetricsReport:
    """Per-slice metrics for one or more named methods plus pairwise p-values."""

    per_slice: dict = field(default_factory=dict)  # method -> list of (ssim, psnr, nmse)
    comparisons: dict = field(default_factory=dict)  # (method, reference) -> {metric: p}

    METRICS = ("ssim", "psnr", "nmse")

    def add(self, method, recon, truth):
        """Score every slice of ``recon`` against ``truth`` (both ``(S, H, W)``)."""
        rows = self.per_slice.setdefault(method, [])
        for r, t in zip(np.asarray(recon), np.asarray(truth)):
            rows.append((ssim(r, t), psnr(r, t), nmse(r, t)))
        return self

    def column(self, method, metric):
        return np.array([row[self.METRICS.index(metric)] for row in self.per_slice[method]])

    def aggregate(self, method):
        return {m: (float(self.column(method, m).mean()), float(self.column(method, m).std()))
                for m in self.METRICS}

    def compare(self, method, reference):
        self.comparisons[(method, reference)] = {
            m: wilcoxon_rank_sum(self.column(method, m), self.column(reference, m))
            for m in self.METRICS
        }
        return self.comparisons[(method, reference)]

    def to_text(self):
        buf = io.StringIO()
        buf.write("method,slice,ssim,nmse,psnr\n")
        for method, rows in self.per_slice.items():
            for i, (s, p, e) in enumerate(rows):
                buf.write(f"{method},{i},{s!r},{e!r},{p!r}\n")
        buf.write("\n# summary: mean +- std (p-value vs reference)\n")
        buf.write("method,nmse_mean,nmse_std,nmse_p,psnr_mean,psnr_std,psnr_p,ssim_mean,ssim_std,ssim_p,reference\n")
        refs = {m: r for (m, r) in self.comparisons}
        for method in self.per_slice:
            agg = self.aggregate(method)
            ref = refs.get(method)
            pv = self.comparisons.get((method, ref), {})
            cells = [method]
            for m in ("nmse", "psnr", "ssim"):
                mean, std = agg[m]
                cells += [f"{mean!r}", f"{std!r}", f"{pv[m]:.3g}" if m in pv else "-"]
            cells.append(ref or "-")
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def write(self, path):
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def read_rows(cls, path):
        """Parse the per-slice section back into a report (comparisons are recomputed on demand)."""
        report = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines()[1:]:
            if not line or line.startswith("#"):
                break
            method, _, s, e, p = line.split(",")
            report.per_slice.setdefault(method, []).append((float(s), float(p), float(e)))
        return report
