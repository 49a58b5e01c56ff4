"""Hypercube and RGB data model, HSC1 file I/O, and spectral preprocessing.

Cubes are stored channel-last, ``data[h, w, c]``, so each pixel spectrum is
contiguous.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ._io import atomic_write, write_csv
from .errors import AxisError, FormatError, IoError, ShapeError, TruncationError, ValidationError

MAGIC = b"HSC1"
VERSION = 1
_HEADER = struct.Struct("<4sBIII")
HEADER_SIZE = _HEADER.size  # 17 bytes

VISIBLE_MIN_NM = 400.0
VISIBLE_MAX_NM = 680.0

# Nominal labels used when an RGB image is stored as a 3-channel HSC1 file.
# Channels are written blue-first so the axis stays strictly increasing.
RGB_FILE_WAVELENGTHS = (460.0, 540.0, 620.0)

# (lo, hi) nm per output channel, in R, G, B order.
DEFAULT_BANDS = ((580.0, 680.0), (490.0, 590.0), (400.0, 510.0))


def _check_axis(wavelengths):
    wl = np.asarray(wavelengths, dtype=np.float64)
    if wl.ndim != 1 or wl.size == 0:
        raise AxisError("wavelength axis must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(wl)):
        raise AxisError("wavelengths must be finite")
    if wl.size > 1 and not np.all(np.diff(wl) > 0):
        raise AxisError("wavelengths must be strictly increasing")
    return wl


@dataclass(frozen=True, eq=False)
class Hypercube:
    """H x W x C reflectance volume on a strictly increasing wavelength axis (nm)."""

    data: np.ndarray
    wavelengths: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ShapeError(f"cube data must be H x W x C with all dims >= 1, got {data.shape}")
        wl = _check_axis(self.wavelengths)
        if wl.size != data.shape[2]:
            raise AxisError(f"{wl.size} wavelengths for {data.shape[2]} channels")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "wavelengths", wl)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def validate(self):
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("cube contains non-finite values")
        return self

    def with_data(self, data):
        return Hypercube(data, self.wavelengths)


@dataclass(frozen=True, eq=False)
class RgbImage:
    """H x W x 3 image with values in [0, 1], channels ordered R, G, B."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if data.ndim != 3 or data.shape[2] != 3 or min(data.shape) < 1:
            raise ShapeError(f"RGB data must be H x W x 3, got {data.shape}")
        if not (np.all(data >= 0) and np.all(data <= 1)):
            raise ValidationError("RGB values must lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class RangeMask:
    kind: str
    indices: np.ndarray

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class CameraResponse:
    """Three non-negative response curves (R, G, B) sampled on a wavelength grid."""

    wavelengths: np.ndarray
    curves: np.ndarray

    def __post_init__(self):
        wl = _check_axis(self.wavelengths)
        curves = np.asarray(self.curves, dtype=np.float64)
        if curves.shape != (3, wl.size):
            raise AxisError(f"response curves must have shape (3, {wl.size}), got {curves.shape}")
        if np.any(curves < 0) or not np.all(np.isfinite(curves)):
            raise AxisError("response curves must be finite and non-negative")
        if np.any(curves.sum(axis=1) <= 0):
            raise AxisError("every response curve needs positive total sensitivity")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "curves", curves)


def boxcar_response(wavelengths, bands=DEFAULT_BANDS):
    """Flat response per channel over inclusive ``(lo, hi)`` nm bands."""
    wl = _check_axis(wavelengths)
    curves = np.array([((wl >= lo) & (wl <= hi)).astype(np.float64) for lo, hi in bands])
    return CameraResponse(wl, curves)


# -- file I/O -----------------------------------------------------------------

def save_cube(cube, path):
    """Write ``cube`` as HSC1. Values are stored as little-endian float32."""
    cube.validate()
    wl32 = cube.wavelengths.astype("<f4")
    if wl32.size > 1 and not np.all(np.diff(wl32) > 0):
        raise AxisError("wavelengths collapse when stored as float32")
    h, w, c = cube.shape
    payload = b"".join(
        (
            _HEADER.pack(MAGIC, VERSION, h, w, c),
            wl32.tobytes(),
            np.ascontiguousarray(cube.data, dtype="<f4").tobytes(),
        )
    )
    try:
        with atomic_write(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        if isinstance(exc, IoError):
            raise
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_cube(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"{path}: not an HSC1 file")
    if len(buf) < HEADER_SIZE:
        raise TruncationError(f"{path}: header truncated")
    _, version, h, w, c = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported HSC1 version {version}")
    if min(h, w, c) < 1:
        raise FormatError(f"{path}: zero dimension in header ({h}, {w}, {c})")
    need = HEADER_SIZE + 4 * c + 4 * h * w * c
    if len(buf) < need:
        raise TruncationError(f"{path}: expected {need} bytes, found {len(buf)}")
    if len(buf) > need:
        raise FormatError(f"{path}: {len(buf) - need} trailing bytes")
    wl = np.frombuffer(buf, dtype="<f4", count=c, offset=HEADER_SIZE).astype(np.float32)
    data = np.frombuffer(buf, dtype="<f4", count=h * w * c, offset=HEADER_SIZE + 4 * c)
    return Hypercube(data.astype(np.float32).reshape(h, w, c), wl)


def save_rgb(rgb, path):
    cube = Hypercube(np.ascontiguousarray(rgb.data[:, :, ::-1]), RGB_FILE_WAVELENGTHS)
    save_cube(cube, path)


def load_rgb(path):
    cube = load_cube(path)
    if cube.channels != 3:
        raise FormatError(f"{path}: RGB file must have 3 channels, has {cube.channels}")
    return RgbImage(np.ascontiguousarray(cube.data[:, :, ::-1]))


# -- preprocessing ------------------------------------------------------------

def l1_normalize(cube):
    """Scale each pixel spectrum so its absolute values sum to 1.

    All-zero spectra are passed through unchanged.
    """
    norms = np.abs(cube.data).sum(axis=2, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return cube.with_data(cube.data / safe)


def synthesize_rgb(cube, response):
    """Response-weighted mean of each pixel spectrum per RGB channel, clamped to [0, 1]."""
    if response.wavelengths.shape != cube.wavelengths.shape or not np.array_equal(
        response.wavelengths, cube.wavelengths
    ):
        raise AxisError("camera response is not sampled on the cube's wavelength grid")
    weights = response.curves / response.curves.sum(axis=1, keepdims=True)
    rgb = np.clip(cube.data.astype(np.float64) @ weights.T, 0.0, 1.0)
    return RgbImage(rgb.astype(cube.data.dtype))


def make_range_masks(wavelengths):
    """Return (full, visible, extended) channel masks; visible is 400-680 nm inclusive."""
    wl = _check_axis(wavelengths)
    idx = np.arange(wl.size)
    vis = (wl >= VISIBLE_MIN_NM) & (wl <= VISIBLE_MAX_NM)
    return (
        RangeMask("full", idx),
        RangeMask("visible", idx[vis]),
        RangeMask("extended", idx[~vis]),
    )


def histogram_equalize(cube):
    """Map every channel through its own empirical CDF, ``#(values <= v) / N``."""
    h, w, c = cube.shape
    flat = cube.data.reshape(h * w, c)
    out = np.empty(flat.shape, dtype=np.float64)
    n = h * w
    for ch in range(c):
        col = flat[:, ch]
        ranks = np.searchsorted(np.sort(col), col, side="right")
        out[:, ch] = ranks / n
    return cube.with_data(out.reshape(h, w, c).astype(cube.data.dtype, copy=False))


def extract_spectrum(cube, h, w):
    if not (0 <= h < cube.height and 0 <= w < cube.width):
        raise IndexError(f"pixel ({h}, {w}) outside {cube.height} x {cube.width} cube")
    return cube.data[h, w, :].copy()


def write_spectrum_csv(path, wavelengths, values):
    write_csv(path, ["wavelength_nm", "value"], zip(wavelengths, values))
