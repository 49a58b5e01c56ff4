"""Synthetic paired RGB/hypercube scenes built from known endmember mixtures."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cube import Hypercube, synthesize_rgb
from .dataset import Dataset, Sample
from .errors import DatasetError, GenerationError
from .metrics import sam

# (lambda_min, lambda_max, step) in nm
HEIPOR_GRID = (500.0, 995.0, 5.0)
MSI_BRAIN_GRID = (460.0, 720.0, 10.0)
MIN_ENDMEMBER_ANGLE = 0.1
ABUNDANCE_FLOOR = 0.02


def wavelength_grid(lambda_min, lambda_max, step):
    if step <= 0 or lambda_max < lambda_min:
        raise GenerationError("wavelength grid needs step > 0 and max >= min")
    n = int(np.floor((lambda_max - lambda_min) / step + 1e-9)) + 1
    return lambda_min + step * np.arange(n)


@dataclass(frozen=True, eq=False)
class Endmember:
    name: str
    spectrum: np.ndarray


@dataclass(frozen=True, eq=False)
class SceneSpec:
    height: int
    width: int
    grid: tuple
    endmembers: tuple
    blob_count: int = 6
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise GenerationError("scene must be at least 1 x 1")
        if self.blob_count < 1:
            raise GenerationError("blob_count must be >= 1")
        if self.noise_sigma < 0:
            raise GenerationError("noise_sigma must be >= 0")
        if not self.endmembers:
            raise GenerationError("a scene needs at least one endmember")
        c = len(self.wavelengths)
        if any(len(e.spectrum) != c for e in self.endmembers):
            raise GenerationError("endmember spectra do not match the wavelength grid")

    @property
    def wavelengths(self):
        return wavelength_grid(*self.grid)


def _bump_spectrum(wl, rng):
    lo, hi = wl[0], wl[-1]
    span = max(hi - lo, 1.0)
    n = rng.integers(2, 5)
    centers = rng.uniform(lo - 0.1 * span, hi + 0.1 * span, size=n)
    widths = rng.uniform(0.05, 0.3, size=n) * span
    amps = rng.uniform(0.2, 1.0, size=n)
    s = (amps[:, None] * np.exp(-((wl[None, :] - centers[:, None]) ** 2) / (2 * widths[:, None] ** 2))).sum(axis=0)
    return s / s.sum()


def make_endmembers(wavelengths, k, seed, min_angle=MIN_ENDMEMBER_ANGLE, max_tries=500):
    """``k`` smooth, L1-normalised spectra, each a sum of 2-4 Gaussian bumps.

    Candidates closer than ``min_angle`` radians to an accepted spectrum are
    redrawn.
    """
    if k < 1:
        raise GenerationError("need at least one endmember")
    wl = np.asarray(wavelengths, dtype=np.float64)
    rng = np.random.default_rng(seed)
    accepted = []
    for _ in range(max_tries):
        s = _bump_spectrum(wl, rng)
        if all(sam(s[None, None, :], a[None, None, :]) >= min_angle for a in accepted):
            accepted.append(s)
            if len(accepted) == k:
                return tuple(Endmember(f"em{i}", s) for i, s in enumerate(accepted))
    raise GenerationError(f"could not place {k} endmembers {min_angle} rad apart in {max_tries} draws")


def render_abundances(height, width, k, blob_count, rng):
    """Smooth per-pixel mixing weights, non-negative and summing to one."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    fields = np.full((height, width, k), ABUNDANCE_FLOOR)
    size = min(height, width)
    for _ in range(blob_count):
        e = rng.integers(k)
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        r = rng.uniform(0.1, 0.35) * size + 0.5
        amp = rng.uniform(0.5, 1.5)
        fields[..., e] += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
    return fields / fields.sum(axis=2, keepdims=True)


def render_scene(scene):
    """Return (cube, abundances) for one scene; noise is Gaussian, clipped at zero."""
    rng = np.random.default_rng(scene.seed)
    ems = np.stack([e.spectrum for e in scene.endmembers])
    abundances = render_abundances(scene.height, scene.width, len(ems), scene.blob_count, rng)
    data = abundances @ ems
    if scene.noise_sigma > 0:
        data = np.clip(data + rng.normal(0.0, scene.noise_sigma, size=data.shape), 0.0, None)
    return Hypercube(data, scene.wavelengths), abundances


def split_sizes(n, fractions):
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    n_train = int(round(fractions[0] * n))
    n_val = min(int(round(fractions[1] * n)), n - n_train)
    if n_train < 1:
        raise DatasetError("split leaves the training set empty")
    return n_train, n_val, n - n_train - n_val


def make_dataset(scene_count, scene, response, splits=(0.6, 0.1, 0.3)):
    """Render ``scene_count`` scenes with distinct seeds derived from ``scene.seed``.

    Cubes are stored as float32; each RGB image is ``synthesize_rgb`` of its
    float32 cube. Scenes are shuffled by the master seed, then split.
    """
    if scene_count < 1:
        raise DatasetError("scene_count must be >= 1")
    n_train, n_val, _ = split_sizes(scene_count, splits)
    rng = np.random.default_rng(scene.seed)
    seeds = rng.choice(2**31 - 1, size=scene_count, replace=False)
    order = rng.permutation(scene_count)
    samples = []
    for i, s in enumerate(seeds):
        cube, _ = render_scene(replace(scene, seed=int(s)))
        cube = cube.with_data(cube.data.astype(np.float32))
        samples.append(Sample(f"scene_{i:04d}", synthesize_rgb(cube, response), cube, int(s)))
    ordered = [samples[i] for i in order]
    return Dataset(
        scene.wavelengths,
        train=ordered[:n_train],
        val=ordered[n_train:n_train + n_val],
        test=ordered[n_train + n_val:],
    )


PRESETS = {"msi_brain": MSI_BRAIN_GRID, "heipor": HEIPOR_GRID}
SCENE_DEFAULTS = {
    "preset": "msi_brain",
    "height": "64",
    "width": "64",
    "endmembers": "3",
    "blob_count": "6",
    "noise_sigma": "0",
    "seed": "0",
    "scene_count": "20",
    "splits": "0.6,0.1,0.3",
}
SCENE_KEYS = set(SCENE_DEFAULTS) | {"lambda_min", "lambda_max", "step", "endmember_seed"}


@dataclass(frozen=True, eq=False)
class GenerationConfig:
    scene: SceneSpec
    scene_count: int
    splits: tuple


def generation_config(values):
    """Build a GenerationConfig from flat string values.

    The grid comes from ``preset`` unless all of ``lambda_min``,
    ``lambda_max`` and ``step`` are given. Endmembers are drawn with
    ``endmember_seed`` (default: ``seed``).
    """
    unknown = set(values) - SCENE_KEYS
    if unknown:
        raise GenerationError(f"unknown scene keys: {', '.join(sorted(unknown))}")
    v = {**SCENE_DEFAULTS, **values}
    try:
        explicit = [k for k in ("lambda_min", "lambda_max", "step") if k in v]
        if explicit and len(explicit) != 3:
            raise GenerationError("give all of lambda_min, lambda_max and step, or none")
        if explicit:
            grid = (float(v["lambda_min"]), float(v["lambda_max"]), float(v["step"]))
        elif v["preset"] in PRESETS:
            grid = PRESETS[v["preset"]]
        else:
            raise GenerationError(f"unknown preset {v['preset']!r}; choose from {', '.join(PRESETS)}")
        seed = int(v["seed"])
        em_seed = int(v.get("endmember_seed", seed))
        splits = tuple(float(x) for x in v["splits"].split(","))
        k, count = int(v["endmembers"]), int(v["scene_count"])
        height, width, blobs = int(v["height"]), int(v["width"]), int(v["blob_count"])
        noise = float(v["noise_sigma"])
    except ValueError as exc:
        raise GenerationError(f"bad scene config value: {exc}") from None
    wl = wavelength_grid(*grid)
    scene = SceneSpec(height, width, grid, make_endmembers(wl, k, em_seed), blobs, noise, seed)
    split_sizes(count, splits)
    return GenerationConfig(scene, count, splits)
