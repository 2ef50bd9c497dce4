"""Undersampling plans: Cartesian line masks, radial trajectories and KB gridding.

Radial k-space is simulated with a type-2 NUFFT (oversampled FFT followed by
Kaiser-Bessel interpolation) and brought back onto a Cartesian grid with
density-compensated Kaiser-Bessel gridding. Trajectory coordinates are in
cycles per pixel, so a grid of ``N`` pixels covers ``[-0.5, 0.5)`` with
spacing ``1/N``.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import i0

from .kspace import IMAGE, KSPACE, ComplexVolume, fft2c
from .validation import ShapeError, check_finite

MASK_MAGIC = b"MSK1"
MASK_VERSION = 1


@dataclass
class CartesianMask:
    """Binary phase-encode mask; every column is either fully kept or dropped."""

    bits: np.ndarray
    seed: int | None = None
    acceleration: float = 1.0

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def lines(self):
        """Indices of the sampled columns."""
        return np.flatnonzero(self.bits[0])


def make_cartesian_mask(height, width, acceleration, seed=None):
    """Random Gaussian line mask keeping ``floor(width / acceleration)`` columns.

    Lines are drawn without replacement with probability proportional to a
    Gaussian of standard deviation ``width / 6`` centred on the DC column,
    which is always included.
    """
    if acceleration < 1:
        raise ValueError(f"acceleration must be >= 1, got {acceleration}")
    if acceleration > width:
        raise ValueError(f"acceleration {acceleration} exceeds width {width}")
    n_lines = int(np.floor(width / acceleration))
    center = width // 2
    rng = np.random.default_rng(seed)

    cols = np.arange(width)
    others = cols[cols != center]
    pdf = np.exp(-0.5 * ((others - center) / (width / 6.0)) ** 2)
    pdf /= pdf.sum()
    picked = rng.choice(others, size=n_lines - 1, replace=False, p=pdf)

    bits = np.zeros((height, width), dtype=np.uint8)
    bits[:, center] = 1
    bits[:, picked] = 1
    return CartesianMask(bits=bits, seed=seed, acceleration=float(acceleration))


def write_mask(path, mask):
    bits = np.asarray(getattr(mask, "bits", mask), dtype=np.uint8)
    if bits.ndim != 2 or not np.isin(bits, (0, 1)).all():
        raise ValueError("mask must be a 2D array of 0/1 values")
    h, w = bits.shape
    with open(path, "wb") as fh:
        fh.write(MASK_MAGIC)
        fh.write(struct.pack("<HII", MASK_VERSION, h, w))
        fh.write(np.ascontiguousarray(bits).tobytes())


def read_mask(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MASK_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}, expected {MASK_MAGIC!r}")
    if len(blob) < 14:
        raise ValueError(f"{path}: truncated header")
    version, h, w = struct.unpack("<HII", blob[4:14])
    if version != MASK_VERSION:
        raise ValueError(f"{path}: unsupported mask version {version}")
    payload = blob[14:]
    if len(payload) < h * w:
        raise ValueError(f"{path}: truncated payload ({len(payload)} of {h * w} bytes)")
    bits = np.frombuffer(payload[: h * w], dtype=np.uint8).reshape(h, w).copy()
    width = max(int(bits[0].sum()), 1)
    return CartesianMask(bits=bits, acceleration=w / width)


@dataclass
class RadialTrajectory:
    n_spokes: int
    n_readout: int
    coords: np.ndarray = field(repr=False)  # (n_spokes, n_readout, 2) as (kx, ky)

    @property
    def flat(self):
        return self.coords.reshape(-1, 2)

    @property
    def n_samples(self):
        return self.n_spokes * self.n_readout


def make_radial_trajectory(n_spokes, n_readout):
    """Uniformly spaced diameters; spoke ``k`` has angle ``k * pi / n_spokes``.

    Readout sample ``r`` sits at radius ``(r - n_readout // 2) / n_readout`` so
    every spoke crosses DC exactly and stays inside ``[-0.5, 0.5)``.
    """
    if n_spokes < 1:
        raise ValueError("n_spokes must be >= 1")
    if n_readout < 2:
        raise ValueError("n_readout must be >= 2")
    angles = np.arange(n_spokes) * np.pi / n_spokes
    radius = (np.arange(n_readout) - n_readout // 2) / n_readout
    kx = radius[None, :] * np.cos(angles)[:, None]
    ky = radius[None, :] * np.sin(angles)[:, None]
    return RadialTrajectory(n_spokes, n_readout, np.stack([kx, ky], axis=-1))


def beatty_beta(kernel_width, oversampling):
    """Kaiser-Bessel shape parameter minimising aliasing for a given width/ratio."""
    w, a = kernel_width, oversampling
    return np.pi * np.sqrt((w / a) ** 2 * (a - 0.5) ** 2 - 0.8)


@dataclass
class GriddingConfig:
    kernel_width: float = 5.0
    oversampling: float = 2.0
    beta: float | None = None
    target_size: int = 256

    def __post_init__(self):
        if self.kernel_width < 2:
            raise ValueError("kernel_width must be >= 2")
        if self.oversampling <= 1:
            raise ValueError("oversampling must be > 1")
        if self.beta is None:
            self.beta = float(beatty_beta(self.kernel_width, self.oversampling))

    def grid_size(self, n):
        k = int(np.ceil(self.oversampling * n))
        return k + (k % 2)


def kb_kernel(u, cfg):
    """Normalised Kaiser-Bessel window, ``w(0) = 1``, zero beyond half-width."""
    u = np.asarray(u, dtype=np.float64)
    x = 2.0 * u / cfg.kernel_width
    inside = np.abs(x) <= 1.0
    arg = cfg.beta * np.sqrt(np.clip(1.0 - x**2, 0.0, None))
    return np.where(inside, i0(arg) / i0(cfg.beta), 0.0)


def kb_transform(nu, cfg):
    """Continuous Fourier transform of :func:`kb_kernel` at ``nu`` cycles per grid cell."""
    w, beta = cfg.kernel_width, cfg.beta
    z = np.sqrt((beta**2 - (np.pi * w * np.asarray(nu, dtype=np.float64)) ** 2).astype(complex))
    small = np.abs(z) < 1e-8
    ratio = np.where(small, 1.0, np.sinh(z) / np.where(small, 1.0, z))
    return (w * ratio.real) / i0(beta)


def _interp_matrix(points, n, cfg):
    """Sparse KB interpolation matrix from the oversampled ``K x K`` grid to ``points``."""
    k = cfg.grid_size(n)
    half = cfg.kernel_width / 2.0
    taps = int(np.floor(cfg.kernel_width)) + 1
    pos = points * k + k // 2  # (M, 2) fractional grid coordinates (x, y)
    start = np.ceil(pos - half).astype(int)
    offs = np.arange(taps)
    jx = start[:, 0:1] + offs  # (M, taps)
    jy = start[:, 1:2] + offs
    wx = kb_kernel(pos[:, 0:1] - jx, cfg)
    wy = kb_kernel(pos[:, 1:2] - jy, cfg)
    weights = wy[:, :, None] * wx[:, None, :]  # (M, taps_y, taps_x)
    cols = (jy[:, :, None] % k) * k + (jx[:, None, :] % k)
    rows = np.broadcast_to(np.arange(len(points))[:, None, None], cols.shape)
    mat = sparse.coo_matrix(
        (weights.ravel(), (rows.ravel(), cols.ravel())), shape=(len(points), k * k)
    )
    return mat.tocsr()


def _deapodization(n, cfg):
    k = cfg.grid_size(n)
    x = np.arange(n) - n // 2
    apod = kb_transform(x / k, cfg)
    return np.outer(apod, apod)


def _check_traj(traj):
    pts = traj.flat if isinstance(traj, RadialTrajectory) else np.asarray(traj).reshape(-1, 2)
    if np.any(pts < -0.5) or np.any(pts >= 0.5):
        raise ValueError("trajectory coordinates must lie in [-0.5, 0.5)")
    return pts


class NufftPlan:
    """Precomputed type-2 NUFFT for one trajectory and image size.

    ``forward`` maps ``(..., N, N)`` images to ``(..., M)`` samples;
    ``adjoint`` is its exact adjoint.
    """

    def __init__(self, traj, n, cfg=None):
        self.cfg = cfg or GriddingConfig(target_size=n)
        self.n = n
        self.k = self.cfg.grid_size(n)
        self.points = _check_traj(traj)
        self.interp = _interp_matrix(self.points, n, self.cfg)
        self.apod = _deapodization(n, self.cfg)

    def _pad(self, img):
        k, n = self.k, self.n
        lo = k // 2 - n // 2
        out = np.zeros(img.shape[:-2] + (k, k), dtype=complex)
        out[..., lo : lo + n, lo : lo + n] = img
        return out

    def _crop(self, grid):
        lo = self.k // 2 - self.n // 2
        return grid[..., lo : lo + self.n, lo : lo + self.n]

    def forward(self, img):
        img = np.asarray(img)
        if img.shape[-2:] != (self.n, self.n):
            raise ShapeError(f"image must be {self.n}x{self.n}, got {img.shape[-2:]}")
        lead = img.shape[:-2]
        g = self._pad(img / self.apod)
        G = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(g, axes=(-2, -1))), axes=(-2, -1))
        flat = G.reshape(-1, self.k * self.k).T
        out = (self.interp @ flat).T / self.n
        return out.reshape(lead + (len(self.points),))

    def adjoint(self, samples):
        samples = np.asarray(samples)
        if samples.shape[-1] != len(self.points):
            raise ShapeError(
                f"expected {len(self.points)} samples per image, got {samples.shape[-1]}"
            )
        lead = samples.shape[:-1]
        flat = samples.reshape(-1, len(self.points)).T
        G = (self.interp.T @ flat).T.reshape(lead + (self.k, self.k))
        g = np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(G, axes=(-2, -1))), axes=(-2, -1))
        g *= self.k * self.k
        return self._crop(g) / self.apod / self.n


def density_compensation(traj, n):
    """Ramp weights scaled so a uniform Cartesian grid of ``n`` pixels has weight 1.

    Each radial sample gets its Voronoi area ``pi * |k| * dr / n_spokes``. The
    samples at DC share the area of the central disc of radius ``dr / 2``.
    """
    dr = 1.0 / traj.n_readout
    r = np.hypot(traj.flat[:, 0], traj.flat[:, 1])
    w = np.pi * r * dr / traj.n_spokes
    dc = r < 1e-12
    w[dc] = np.pi * (dr / 2) ** 2 / dc.sum()
    return w * n * n


def nufft_degrid(img, traj, cfg=None):
    """Sample image(s) on the trajectory with a type-2 NUFFT.

    ``img`` is a square image-domain :class:`ComplexVolume` or an array
    ``(..., N, N)``. Scaling matches :func:`~acnn_kspace.kspace.fft2c`.
    """
    a = img.data if isinstance(img, ComplexVolume) else np.asarray(img)
    if isinstance(img, ComplexVolume) and img.domain != IMAGE:
        raise ValueError("nufft_degrid expects an image-domain volume")
    if a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"image must be square, got {a.shape[-2:]}")
    check_finite(a, "nufft input")
    n = a.shape[-1]
    cfg = cfg or GriddingConfig(target_size=n)
    return NufftPlan(traj, n, cfg).forward(a)


def grid_radial(samples, traj, cfg=None, plan=None):
    """Density-compensated KB gridding onto a ``target_size`` Cartesian k-space.

    Returns a k-space :class:`ComplexVolume` when ``samples`` is
    ``(n_slices, n_coils, M)``, otherwise a bare array.
    """
    cfg = cfg or GriddingConfig()
    samples = np.asarray(samples)
    if samples.shape[-1] != traj.n_samples:
        raise ShapeError(
            f"got {samples.shape[-1]} samples per image, trajectory has {traj.n_samples}"
        )
    n = cfg.target_size
    plan = plan or NufftPlan(traj, n, cfg)
    dcf = density_compensation(traj, n)
    img = plan.adjoint(samples * dcf)
    k = fft2c(img)
    if k.ndim == 4:
        return ComplexVolume(k, KSPACE)
    return k

