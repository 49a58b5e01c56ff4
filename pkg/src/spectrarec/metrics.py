"""Reconstruction-quality metrics for hyperspectral cubes.

MAE, RMSE, PSNR and MRAE are micro-averages: every masked element of the
H x W x C volume carries equal weight. SAM is the mean per-pixel spectral
angle. SSIM uses a sliding Gaussian window per channel.

Every metric accepts either :class:`~spectrarec.cube.Hypercube` objects or
plain ``(H, W, C)`` arrays, and an optional :class:`~spectrarec.cube.RangeMask`
restricting the channels taken into account.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .cube import Hypercube, make_range_masks
from .errors import DegenerateError, ShapeError

PSNR_CAP_DB = 300.0
SAM_NORM_EPS = 1e-12
MRAE_EPS = 1e-8
METRIC_NAMES = ("mae", "rmse", "psnr", "sam", "ssim", "mrae")
RANGE_KINDS = ("full", "visible", "extended")


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    window_sigma: float = 1.5
    data_range: float = 1.0
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("SSIM window must be odd and >= 3")
        if self.window_sigma <= 0 or self.data_range <= 0:
            raise ValueError("SSIM sigma and data range must be positive")

    @property
    def c1(self):
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self):
        return (self.k2 * self.data_range) ** 2

    def kernel(self):
        r = np.arange(self.window) - (self.window - 1) / 2
        g = np.exp(-(r**2) / (2 * self.window_sigma**2))
        k = np.outer(g, g)
        return k / k.sum()


def _values(x):
    return x.data if isinstance(x, Hypercube) else np.asarray(x)


def _pair(y, yhat, mask=None):
    a = np.asarray(_values(y), dtype=np.float64)
    b = np.asarray(_values(yhat), dtype=np.float64)
    if a.shape != b.shape or a.ndim != 3:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if mask is not None:
        idx = np.asarray(mask.indices, dtype=np.intp)
        if idx.size and (idx.min() < 0 or idx.max() >= a.shape[2]):
            raise ShapeError(f"mask indices out of range for {a.shape[2]} channels")
        a, b = a[..., idx], b[..., idx]
    if a.size == 0:
        raise DegenerateError("mask selects no elements")
    return a, b


def mae(y, yhat, mask=None):
    a, b = _pair(y, yhat, mask)
    return float(np.mean(np.abs(a - b)))


def mse(y, yhat, mask=None):
    a, b = _pair(y, yhat, mask)
    return float(np.mean((a - b) ** 2))


def rmse(y, yhat, mask=None):
    return math.sqrt(mse(y, yhat, mask))


def _psnr_from_mse(err, max_value):
    if err == 0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(max_value**2 / err), PSNR_CAP_DB)


def psnr(y, yhat, mask=None, max_value=1.0):
    """Peak signal-to-noise ratio in dB, capped at ``PSNR_CAP_DB`` (also for zero error)."""
    if max_value <= 0:
        raise ValueError("max_value must be positive")
    return _psnr_from_mse(mse(y, yhat, mask), max_value)


def spectral_angles(y, yhat, mask=None, eps=SAM_NORM_EPS):
    """Per-pixel angle (radians) between spectra; NaN where either norm is <= eps.

    Uses ``2 atan2(|u - v|, |u + v|)`` on unit vectors, which equals the arccos
    of the normalised dot product but stays accurate for nearly parallel spectra.
    """
    a, b = _pair(y, yhat, mask)
    a = a.reshape(-1, a.shape[2])
    b = b.reshape(-1, b.shape[2])
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ok = (na > eps) & (nb > eps)
    out = np.full(a.shape[0], np.nan)
    ua = a[ok] / na[ok, None]
    ub = b[ok] / nb[ok, None]
    out[ok] = 2.0 * np.arctan2(np.linalg.norm(ua - ub, axis=1), np.linalg.norm(ua + ub, axis=1))
    return out


def sam(y, yhat, mask=None, eps=SAM_NORM_EPS, degrees=False):
    angles = spectral_angles(y, yhat, mask, eps)
    valid = angles[~np.isnan(angles)]
    if valid.size == 0:
        raise DegenerateError("every pixel has a zero-norm spectrum")
    value = float(np.mean(valid))
    return math.degrees(value) if degrees else value


def _window_mean(x, kernel):
    k = kernel.shape[0]
    win = sliding_window_view(x, (k, k), axis=(0, 1))
    return np.einsum("hwcij,ij->hwc", win, kernel, optimize=True)


def ssim_map(y, yhat, params=SsimParams()):
    """SSIM at every valid window position, shape (H - k + 1, W - k + 1, C)."""
    a, b = _pair(y, yhat)
    k = params.window
    if a.shape[0] < k or a.shape[1] < k:
        raise ShapeError(f"image {a.shape[:2]} smaller than SSIM window {k}")
    kernel = params.kernel()
    mu_a = _window_mean(a, kernel)
    mu_b = _window_mean(b, kernel)
    var_a = _window_mean(a * a, kernel) - mu_a * mu_a
    var_b = _window_mean(b * b, kernel) - mu_b * mu_b
    cov = _window_mean(a * b, kernel) - mu_a * mu_b
    c1, c2 = params.c1, params.c2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(y, yhat, params=SsimParams()):
    return float(np.mean(ssim_map(y, yhat, params)))


def mrae(y, yhat, mask=None, epsilon=MRAE_EPS):
    """Mean of ``|y - yhat| / max(|y|, epsilon)``; ``y`` is the label."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a, b = _pair(y, yhat, mask)
    return float(np.mean(np.abs(a - b) / np.maximum(np.abs(a), epsilon)))


def per_channel_curves(y, yhat, max_value=1.0):
    """Per-channel MAE and PSNR, each over that channel's H x W elements."""
    a, b = _pair(y, yhat)
    d = a - b
    mae_c = np.mean(np.abs(d), axis=(0, 1))
    mse_c = np.mean(d * d, axis=(0, 1))
    psnr_c = np.array([_psnr_from_mse(float(m), max_value) for m in mse_c])
    return mae_c, psnr_c


# -- per-image evaluation and aggregation -------------------------------------

@dataclass
class ImageMetrics:
    mae: float
    rmse: float
    psnr: float
    sam: float
    ssim: float
    mrae: float
    mae_per_channel: np.ndarray
    psnr_per_channel: np.ndarray
    range_mae: dict = field(default_factory=dict)
    range_channels: dict = field(default_factory=dict)


def evaluate_image(y, yhat, wavelengths=None, ssim_params=SsimParams(), max_value=1.0,
                   mrae_epsilon=MRAE_EPS):
    """Every metric for one (label, prediction) pair.

    Range MAEs need a wavelength axis, taken from ``y`` when it is a Hypercube.
    An empty range yields NaN for that entry.
    """
    if wavelengths is None and isinstance(y, Hypercube):
        wavelengths = y.wavelengths
    mae_c, psnr_c = per_channel_curves(y, yhat, max_value)
    range_mae, range_channels = {}, {}
    if wavelengths is not None:
        for m in make_range_masks(wavelengths):
            range_channels[m.kind] = len(m)
            range_mae[m.kind] = mae(y, yhat, m) if len(m) else math.nan
    return ImageMetrics(
        mae=mae(y, yhat),
        rmse=rmse(y, yhat),
        psnr=psnr(y, yhat, max_value=max_value),
        sam=sam(y, yhat),
        ssim=ssim(y, yhat, ssim_params),
        mrae=mrae(y, yhat, epsilon=mrae_epsilon),
        mae_per_channel=mae_c,
        psnr_per_channel=psnr_c,
        range_mae=range_mae,
        range_channels=range_channels,
    )


@dataclass
class MetricReport:
    """Mean and population std over an image set.

    ``metrics`` maps metric name to ``(mean, std)``; ``per_range`` maps range
    kind to the ``(mean, std)`` of its MAE; the per-channel arrays mirror the
    channel-wise MAE/PSNR curves.
    """

    n_images: int
    metrics: dict
    per_range: dict
    range_channels: dict
    mae_mean: np.ndarray
    mae_std: np.ndarray
    psnr_mean: np.ndarray
    psnr_std: np.ndarray
    wavelengths: np.ndarray | None = None


def _mean_std(values):
    # fsum keeps the result independent of image order
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def _column_stats(rows):
    arr = np.asarray(rows, dtype=np.float64)
    stats = [_mean_std(arr[:, j].tolist()) for j in range(arr.shape[1])]
    return np.array([s[0] for s in stats]), np.array([s[1] for s in stats])


def aggregate_reports(per_image, wavelengths=None):
    per_image = list(per_image)
    if not per_image:
        raise DegenerateError("cannot aggregate an empty image set")
    metrics = {name: _mean_std([getattr(m, name) for m in per_image]) for name in METRIC_NAMES}
    kinds = [k for k in RANGE_KINDS if k in per_image[0].range_mae]
    per_range = {k: _mean_std([m.range_mae[k] for m in per_image]) for k in kinds}
    mae_mean, mae_std = _column_stats([m.mae_per_channel for m in per_image])
    psnr_mean, psnr_std = _column_stats([m.psnr_per_channel for m in per_image])
    return MetricReport(
        n_images=len(per_image),
        metrics=metrics,
        per_range=per_range,
        range_channels=dict(per_image[0].range_channels),
        mae_mean=mae_mean,
        mae_std=mae_std,
        psnr_mean=psnr_mean,
        psnr_std=psnr_std,
        wavelengths=None if wavelengths is None else np.asarray(wavelengths, dtype=np.float64),
    )
