"""Slow, independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np


def centered_dft2(img):
    """Orthonormal 2D DFT with DC at (H//2, W//2), by explicit summation."""
    img = np.asarray(img, dtype=complex)
    h, w = img.shape
    ys, xs = np.arange(h) - h // 2, np.arange(w) - w // 2
    ey = np.exp(-2j * np.pi * np.outer(ys, ys) / h)
    ex = np.exp(-2j * np.pi * np.outer(xs, xs) / w)
    return ey @ img @ ex.T / math.sqrt(h * w)


def nudft2(img, points):
    """Type-2 nonuniform DFT of an N x N image at (kx, ky) points in cycles/FOV.

    Same sign and scaling as the centered orthonormal FFT, so on integer
    frequencies ``points * N`` it reproduces that FFT exactly.
    """
    img = np.asarray(img, dtype=complex)
    n = img.shape[-1]
    pos = np.arange(n) - n // 2
    out = np.empty(len(points), dtype=complex)
    for m, (kx, ky) in enumerate(points):
        ex = np.exp(-2j * np.pi * kx * pos)
        ey = np.exp(-2j * np.pi * ky * pos)
        out[m] = ey @ img @ ex
    return out / n


def ssim_direct(a, b, k1=0.01, k2=0.03):
    a = [float(x) for x in np.ravel(a)]
    b = [float(x) for x in np.ravel(b)]
    n = len(a)
    mu_a = sum(a) / n
    mu_b = sum(b) / n
    var_a = sum((x - mu_a) ** 2 for x in a) / n
    var_b = sum((x - mu_b) ** 2 for x in b) / n
    cov = sum((x - mu_a) * (y - mu_b) for x, y in zip(a, b)) / n
    L = max(b)
    c1, c2 = k1 * L, k2 * L
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))


def psnr_direct(a, b):
    a, b = np.ravel(a).tolist(), np.ravel(b).tolist()
    mse = sum((x - y) ** 2 for x, y in zip(a, b)) / len(a)
    return 10 * math.log10(max(b) ** 2 / mse)


def nmse_direct(a, b):
    a, b = np.ravel(a).tolist(), np.ravel(b).tolist()
    return sum((x - y) ** 2 for x, y in zip(a, b)) / sum(y * y for y in b)


def mse_two_loops(a, b):
    total = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            total += (float(a[i, j]) - float(b[i, j])) ** 2
    return total / a.size


def _midrank(values, v):
    less = sum(1 for x in values if x < v)
    equal = sum(1 for x in values if x == v)
    return less + (equal + 1) / 2.0


def rank_sum_exact_p(a, b):
    """Two-sided p by enumerating every assignment of pooled values to group a."""
    pooled = list(a) + list(b)
    n1 = len(a)
    ranks = [_midrank(pooled, v) for v in pooled]
    expected = n1 * (len(pooled) + 1) / 2.0
    observed = abs(sum(ranks[:n1]) - expected)
    hits = total = 0
    for combo in itertools.combinations(range(len(pooled)), n1):
        total += 1
        if abs(sum(ranks[i] for i in combo) - expected) >= observed - 1e-9:
            hits += 1
    return hits / total


def conv2d_loops(x, w, b=None, pad=1):
    """Cross-correlation, stride 1, zero padding, by explicit loops."""
    bsz, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = h + 2 * pad - k + 1, wd + 2 * pad - k + 1
    out = np.zeros((bsz, o, ho, wo))
    for n in range(bsz):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    out[n, oc, i, j] = np.sum(xp[n, :, i : i + k, j : j + k] * w[oc])
            if b is not None:
                out[n, oc] += b[oc]
    return out
