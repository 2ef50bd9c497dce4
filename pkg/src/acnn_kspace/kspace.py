"""Complex k-space containers, centered FFTs, masking and channel packing.

Arrays follow the layout ``(slice, coil, row, column)``. Channel tensors fed to
the networks are real ``(batch, channel, height, width)`` arrays whose channel
axis is ordered slice offset (-s .. +s), then coil, then (real, imaginary).
"""

from dataclasses import dataclass

import numpy as np

from .validation import ShapeError, check_finite, check_ndim

KSPACE = "kspace"
IMAGE = "image"
_DOMAINS = (KSPACE, IMAGE)


@dataclass
class ComplexVolume:
    """A stack of multi-coil complex slices.

    Parameters
    ----------
    data : ndarray of shape (n_slices, n_coils, height, width)
        Complex samples, stored single precision.
    domain : {"kspace", "image"}
    """

    data: np.ndarray
    domain: str = KSPACE

    def __post_init__(self):
        if self.domain not in _DOMAINS:
            raise ValueError(f"domain must be one of {_DOMAINS}, got {self.domain!r}")
        data = check_ndim(self.data, 4, "volume data")
        check_finite(data, "volume data")
        self.data = np.asarray(data, dtype=np.complex64)

    @property
    def n_slices(self):
        return self.data.shape[0]

    @property
    def n_coils(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[2]

    @property
    def width(self):
        return self.data.shape[3]

    @property
    def shape(self):
        return self.data.shape

    def copy(self):
        return ComplexVolume(self.data.copy(), self.domain)


def _as_array(x):
    if isinstance(x, ComplexVolume):
        return x.data
    return np.asarray(x)


def fft2c(x):
    """Centered, orthonormal 2D DFT over the last two axes.

    Accepts a :class:`ComplexVolume` in the image domain (returns a k-space
    volume) or any array with at least two dimensions (returns an array).
    """
    if isinstance(x, ComplexVolume) and x.domain != IMAGE:
        raise ValueError("fft2c expects an image-domain volume")
    a = _as_array(x)
    if a.ndim < 2 or a.shape[-1] < 1 or a.shape[-2] < 1:
        raise ShapeError(f"fft2c needs a non-empty 2D trailing shape, got {a.shape}")
    check_finite(a, "fft2c input")
    out = np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(a, axes=(-2, -1)), norm="ortho"), axes=(-2, -1)
    )
    if isinstance(x, ComplexVolume):
        return ComplexVolume(out, KSPACE)
    return out


def ifft2c(x):
    """Inverse of :func:`fft2c` (centered, orthonormal)."""
    if isinstance(x, ComplexVolume) and x.domain != KSPACE:
        raise ValueError("ifft2c expects a k-space volume")
    a = _as_array(x)
    if a.ndim < 2 or a.shape[-1] < 1 or a.shape[-2] < 1:
        raise ShapeError(f"ifft2c needs a non-empty 2D trailing shape, got {a.shape}")
    check_finite(a, "ifft2c input")
    out = np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(a, axes=(-2, -1)), norm="ortho"), axes=(-2, -1)
    )
    if isinstance(x, ComplexVolume):
        return ComplexVolume(out, IMAGE)
    return out


def apply_mask(k, mask):
    """Zero every k-space sample where ``mask`` is 0.

    ``mask`` is a ``(height, width)`` binary array or anything with a ``bits``
    attribute (e.g. :class:`~acnn_kspace.sampling.CartesianMask`). It is
    broadcast over the leading slice and coil axes.
    """
    bits = np.asarray(getattr(mask, "bits", mask))
    a = _as_array(k)
    if bits.shape != a.shape[-2:]:
        raise ShapeError(f"mask shape {bits.shape} does not match k-space {a.shape[-2:]}")
    out = np.where(bits.astype(bool), a, np.zeros((), dtype=a.dtype))
    if isinstance(k, ComplexVolume):
        return ComplexVolume(out, k.domain)
    return out


def pack_channels(neighborhood):
    """Stack a slice neighborhood of complex coil data into real channels.

    Parameters
    ----------
    neighborhood : sequence of arrays of shape (n_coils, H, W), or an array of
        shape (2s+1, n_coils, H, W)

    Returns
    -------
    ndarray of shape (2 * (2s+1) * n_coils, H, W), float32
    """
    groups = [np.asarray(g) for g in neighborhood]
    if not groups:
        raise ShapeError("neighborhood is empty")
    first = groups[0].shape
    for i, g in enumerate(groups):
        if g.ndim != 3:
            raise ShapeError(f"slice group {i} must be (coils, H, W), got {g.shape}")
        if g.shape[0] != first[0]:
            raise ShapeError(
                f"inconsistent coil counts: group 0 has {first[0]}, group {i} has {g.shape[0]}"
            )
        if g.shape != first:
            raise ShapeError(f"slice group {i} shape {g.shape} differs from {first}")
    stacked = np.stack(groups)  # (G, n, H, W)
    ri = np.stack([stacked.real, stacked.imag], axis=2)  # (G, n, 2, H, W)
    return ri.reshape(-1, first[1], first[2]).astype(np.float32)


def unpack_channels(t):
    """Inverse of :func:`pack_channels` for a single slice: ``(2n, H, W)`` -> ``(n, H, W)``.

    A leading batch axis is kept if present.
    """
    t = np.asarray(t)
    if t.ndim not in (3, 4):
        raise ShapeError(f"expected (2n, H, W) or (B, 2n, H, W), got {t.shape}")
    c = t.shape[-3]
    if c % 2:
        raise ShapeError(f"channel count must be even, got {c}")
    pairs = t.reshape(t.shape[:-3] + (c // 2, 2) + t.shape[-2:])
    out = pairs[..., 0, :, :] + 1j * pairs[..., 1, :, :]
    return out.astype(np.complex64 if t.dtype == np.float32 else np.complex128)


def rss_combine(img, coil_axis=-3):
    """Root-sum-of-squares coil combination of complex coil images."""
    a = _as_array(img)
    if isinstance(img, ComplexVolume):
        if img.domain != IMAGE:
            raise ValueError("rss_combine expects an image-domain volume")
        coil_axis = 1
    check_finite(a, "rss input")
    return np.sqrt(np.sum(a.real**2 + a.imag**2, axis=coil_axis))
