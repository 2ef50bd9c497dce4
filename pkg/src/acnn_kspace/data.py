"""Synthetic multi-coil phantoms, slice neighborhoods, splits and the KSPV file format."""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kspace import IMAGE, KSPACE, ComplexVolume
from .validation import ShapeError, check_positive_int

KSPV_MAGIC = b"KSPV"
KSPV_VERSION = 1
_HEADER = struct.Struct("<4sHBIIII")
_DOMAIN_CODES = {KSPACE: 0, IMAGE: 1}

# Adjacent slices keep a correlation above 0.9 while the drift stays below this.
MAX_CORRELATED_DRIFT = 0.02


class VolumeFormatError(ValueError):
    """A KSPV file could not be decoded."""


@dataclass
class PhantomSpec:
    n_slices: int = 8
    height: int = 64
    width: int = 64
    n_coils: int = 2
    n_ellipses: int = 6
    seed: int = 0
    slice_drift: float = 0.01

    def __post_init__(self):
        for name in ("n_slices", "height", "width", "n_coils", "n_ellipses"):
            check_positive_int(getattr(self, name), name)
        if self.height != self.width:
            raise ValueError(f"phantoms must be square, got {self.height}x{self.width}")


def coil_sensitivities(n_coils, size, width=0.45):
    """Gaussian receive profiles centred on the border, normalised to unit RSS.

    Coil ``j`` sits at angle ``2 pi j / n_coils`` on a circle of radius 0.5 (in
    units of the field of view) and carries a constant phase ``pi j / n_coils``.
    A single coil has sensitivity identically 1.
    """
    if n_coils == 1:
        return np.ones((1, size, size), dtype=np.complex128)
    y, x = (np.mgrid[:size, :size] - size // 2) / size
    maps = []
    for j in range(n_coils):
        theta = 2 * np.pi * j / n_coils
        cx, cy = 0.5 * np.cos(theta), 0.5 * np.sin(theta)
        mag = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2))
        maps.append(mag * np.exp(1j * np.pi * j / n_coils))
    maps = np.array(maps)
    return maps / np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))


def _ellipse_params(rng, n):
    return {
        "center": rng.uniform(-0.25, 0.25, size=(n, 2)),
        "axes": rng.uniform(0.08, 0.35, size=(n, 2)),
        "angle": rng.uniform(0, np.pi, size=n),
        "intensity": rng.uniform(0.2, 1.0, size=n),
        "velocity": rng.standard_normal((n, 2)),
        "growth": rng.standard_normal((n, 2)),
    }


def _render_slice(p, z, drift, size, edge=0.02):
    y, x = (np.mgrid[:size, :size] - size // 2) / size
    img = np.zeros((size, size))
    for i in range(len(p["angle"])):
        cx, cy = p["center"][i] + drift * z * p["velocity"][i]
        ax, ay = p["axes"][i] * (1 + drift * z * p["growth"][i])
        ax, ay = max(ax, 0.02), max(ay, 0.02)
        c, s = np.cos(p["angle"][i]), np.sin(p["angle"][i])
        u = (x - cx) * c + (y - cy) * s
        v = -(x - cx) * s + (y - cy) * c
        rho = np.sqrt((u / ax) ** 2 + (v / ay) ** 2)
        # soft edge keeps the spectrum compact enough for radial regridding
        img += p["intensity"][i] / (1 + np.exp((rho - 1) / (edge / min(ax, ay))))
    return img


def gen_phantom(spec):
    """Image-domain multi-coil ellipse phantom; a pure function of ``spec``."""
    rng = np.random.default_rng(spec.seed)
    size = spec.height
    params = _ellipse_params(rng, spec.n_ellipses)
    phase_coef = rng.uniform(-1.0, 1.0, size=3)
    sens = coil_sensitivities(spec.n_coils, size)
    y, x = (np.mgrid[:size, :size] - size // 2) / size

    data = np.empty((spec.n_slices, spec.n_coils, size, size), dtype=np.complex64)
    for z in range(spec.n_slices):
        mag = _render_slice(params, z, spec.slice_drift, size)
        a, b, c = phase_coef * (1 + 0.05 * z)
        phase = np.pi * (a * x**2 + b * y**2 + c * x * y)
        data[z] = sens * (mag * np.exp(1j * phase))
    return ComplexVolume(data, IMAGE)


def neighborhood_indices(slice_index, s, n_slices):
    if not 0 <= slice_index < n_slices:
        raise IndexError(f"slice {slice_index} outside volume of {n_slices} slices")
    return [min(max(j, 0), n_slices - 1) for j in range(slice_index - s, slice_index + s + 1)]


def make_neighborhood(vol, slice_index, s):
    """Slices ``i - s .. i + s`` of ``vol``, replicating the edge slice past either end."""
    data = vol.data if isinstance(vol, ComplexVolume) else np.asarray(vol)
    return [data[j] for j in neighborhood_indices(slice_index, s, data.shape[0])]


def zero_pad_to(x, height, width):
    """Centre ``x`` in a zero array whose trailing two dims are ``(height, width)``."""
    x = np.asarray(x)
    h, w = x.shape[-2:]
    if h > height or w > width:
        raise ShapeError(f"cannot pad {h}x{w} down to {height}x{width}")
    out = np.zeros(x.shape[:-2] + (height, width), dtype=x.dtype)
    top, left = (height - h) // 2, (width - w) // 2
    out[..., top : top + h, left : left + w] = x
    return out


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int | None = None

    def write(self, path):
        lines = []
        for name in ("train", "validation", "test"):
            lines.append(f"[{name}]")
            lines.extend(str(i) for i in getattr(self, name))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path):
        sections = {"train": [], "validation": [], "test": []}
        current = None
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                if current not in sections:
                    raise ValueError(f"unknown split section {current!r}")
            elif current is None:
                raise ValueError("identifier before any section header")
            else:
                sections[current].append(line)
        return cls(**sections)


def split_dataset(ids, fractions=(0.75, 0.05, 0.2), seed=0):
    """Shuffle ``ids`` and cut them into train/validation/test by ``fractions``.

    Counts are floored and the leftover ids go to the parts with the largest
    fractional remainders, so the sizes always add up to ``len(ids)``.
    """
    ids = list(ids)
    if not ids:
        raise ValueError("cannot split an empty corpus")
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0) or not np.isclose(fractions.sum(), 1):
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(ids)
    exact = fractions * n
    counts = np.floor(exact + 1e-9).astype(int)
    for i in np.argsort(-(exact - counts), kind="stable")[: n - counts.sum()]:
        counts[i] += 1
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    a, b = counts[0], counts[0] + counts[1]
    return DatasetSplit(shuffled[:a], shuffled[a:b], shuffled[b:], seed)


def write_volume(path, vol):
    data = np.ascontiguousarray(vol.data, dtype=np.complex64)
    s, c, h, w = data.shape
    header = _HEADER.pack(KSPV_MAGIC, KSPV_VERSION, _DOMAIN_CODES[vol.domain], s, c, h, w)
    with open(path, "wb") as fh:
        fh.write(header)
        # complex64 is already interleaved (re, im) float32; force little-endian
        fh.write(data.view(np.float32).astype("<f4").tobytes())


def read_volume(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != KSPV_MAGIC:
        raise VolumeFormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < _HEADER.size:
        raise VolumeFormatError(f"{path}: truncated header")
    _, version, domain, s, c, h, w = _HEADER.unpack(blob[: _HEADER.size])
    if version != KSPV_VERSION:
        raise VolumeFormatError(f"{path}: version mismatch (file {version}, reader {KSPV_VERSION})")
    codes = {v: k for k, v in _DOMAIN_CODES.items()}
    if domain not in codes:
        raise VolumeFormatError(f"{path}: unknown domain tag {domain}")
    n_floats = 2 * s * c * h * w
    payload = blob[_HEADER.size :]
    if len(payload) < 4 * n_floats:
        raise VolumeFormatError(
            f"{path}: truncated payload ({len(payload)} bytes, header declares {4 * n_floats})"
        )
    floats = np.frombuffer(payload[: 4 * n_floats], dtype="<f4").astype(np.float32)
    data = floats.view(np.complex64).reshape(s, c, h, w)
    return ComplexVolume(data.copy(), codes[domain])
