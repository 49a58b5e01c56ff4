"""Losses, optimiser, schedule, augmentation and the training loop."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from ._io import parse_kv, read_csv, write_csv
from .cube import Hypercube, RgbImage
from .errors import ConfigError, DatasetError, NumericsError, RangeError, ShapeError
from .metrics import MRAE_EPS
from .nn.model import backward_cached, forward, forward_cached
from .nn.weights import Weights, init_weights, replace_head

LOSSES = ("l1", "mrae", "auto")
MAX_FINE_TUNE_EPOCHS = 50


@dataclass(frozen=True)
class AugmentConfig:
    target_h: int = 288
    target_w: int = 480
    flip_prob: float = 0.5
    shift_frac: float = 0.1
    scale_range: tuple = (0.9, 1.1)
    rotate_deg: float = 15.0

    def __post_init__(self):
        if self.target_h < 1 or self.target_w < 1:
            raise ConfigError("augmentation target size must be >= 1")
        if not 0 <= self.flip_prob <= 1:
            raise ConfigError("flip_prob must lie in [0, 1]")
        if not 0 <= self.shift_frac <= 1:
            raise ConfigError("shift_frac must lie in [0, 1]")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ConfigError("scale_range must satisfy 0 < lo <= hi")
        if self.rotate_deg < 0:
            raise ConfigError("rotate_deg must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr0: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eta_min: float = 1e-6
    adam_eps: float = 1e-8
    loss: str = "auto"
    mrae_epsilon: float = MRAE_EPS
    batch_size: int = 1
    seed: int = 0
    augment: AugmentConfig | None = None
    fine_tune_epochs: int = MAX_FINE_TUNE_EPOCHS
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0 < self.eta_min <= self.lr0:
            raise ConfigError("need 0 < eta_min <= lr0")
        for name in ("beta1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}")
        if self.mrae_epsilon <= 0 or self.adam_eps <= 0:
            raise ConfigError("epsilons must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 1 <= self.fine_tune_epochs <= MAX_FINE_TUNE_EPOCHS:
            raise ConfigError(f"fine_tune_epochs must lie in [1, {MAX_FINE_TUNE_EPOCHS}]")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")


# -- losses -------------------------------------------------------------------

def _loss_pair(y, yhat):
    a = y.data if isinstance(y, Hypercube) else np.asarray(y)
    b = yhat.data if isinstance(yhat, Hypercube) else np.asarray(yhat)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def loss_l1(y, yhat):
    """Mean absolute error and its gradient with respect to ``yhat``."""
    a, b = _loss_pair(y, yhat)
    d = b - a
    n = d.size
    return float(np.mean(np.abs(d, dtype=np.float64))), (np.sign(d) / n).astype(b.dtype, copy=False)


def loss_mrae(y, yhat, epsilon=MRAE_EPS):
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a, b = _loss_pair(y, yhat)
    d = b - a
    denom = np.maximum(np.abs(a), epsilon)
    value = float(np.mean(np.abs(d, dtype=np.float64) / denom))
    return value, (np.sign(d) / (d.size * denom)).astype(b.dtype, copy=False)


def resolve_loss(config, dataset):
    """Pick the loss; ``auto`` uses MRAE only when labels stay clear of zero.

    "Clear of zero" means every training label magnitude is at least 1% of
    the mean label magnitude.
    """
    if config.loss != "auto":
        return config.loss
    mins, means = [], []
    for s in dataset.train:
        a = np.abs(s.cube.data)
        mins.append(float(a.min()))
        means.append(float(a.mean()))
    return "mrae" if min(mins) >= 0.01 * float(np.mean(means)) else "l1"


def _loss_fn(name, config):
    if name == "l1":
        return loss_l1
    return lambda y, yhat: loss_mrae(y, yhat, config.mrae_epsilon)


# -- optimiser and schedule ---------------------------------------------------

@dataclass(eq=False)
class OptimizerState:
    step: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros_like(cls, params):
        return cls(0, np.zeros_like(params), np.zeros_like(params))


def adam_step(state, weights, grad, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns new (state, weights)."""
    grad = np.asarray(grad)
    if grad.shape != weights.params.shape or state.m.shape != grad.shape:
        raise ShapeError("gradient, moments and weights must have equal length")
    if not np.all(np.isfinite(grad)):
        raise NumericsError("non-finite gradient")
    t = state.step + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    params = weights.params - lr * m_hat / (np.sqrt(v_hat) + eps)
    dtype = weights.params.dtype
    return (
        OptimizerState(t, m.astype(dtype, copy=False), v.astype(dtype, copy=False)),
        Weights(params.astype(dtype, copy=False), weights.index),
    )


def cosine_lr(iteration, total_iterations, lr0=1e-4, eta_min=1e-6):
    if total_iterations < 1:
        raise RangeError("total_iterations must be >= 1")
    if not 0 <= iteration <= total_iterations:
        raise RangeError(f"iteration {iteration} outside [0, {total_iterations}]")
    if iteration == 0:
        return lr0
    if iteration == total_iterations:
        return eta_min
    return eta_min + 0.5 * (lr0 - eta_min) * (1 + math.cos(math.pi * iteration / total_iterations))


# -- augmentation -------------------------------------------------------------

@dataclass(frozen=True)
class GeometricTransform:
    flip_h: bool = False
    flip_v: bool = False
    scale: float = 1.0
    angle_deg: float = 0.0
    shift_y: float = 0.0
    shift_x: float = 0.0


def draw_transform(rng, config):
    lo, hi = config.scale_range
    return GeometricTransform(
        flip_h=bool(rng.random() < config.flip_prob),
        flip_v=bool(rng.random() < config.flip_prob),
        scale=float(rng.uniform(lo, hi)) if hi > lo else float(lo),
        angle_deg=float(rng.uniform(-config.rotate_deg, config.rotate_deg)) if config.rotate_deg else 0.0,
        shift_y=float(rng.uniform(-config.shift_frac, config.shift_frac)) if config.shift_frac else 0.0,
        shift_x=float(rng.uniform(-config.shift_frac, config.shift_frac)) if config.shift_frac else 0.0,
    )


def source_coords(transform, in_shape, out_shape):
    """Fractional input (row, col) sampled by every output pixel.

    The output frame is stretched over the input frame, then the inverse of
    flip -> scale -> rotate -> shift is applied about the image centre.
    """
    hin, win = in_shape
    hout, wout = out_shape
    i = np.arange(hout, dtype=np.float64)[:, None]
    j = np.arange(wout, dtype=np.float64)[None, :]
    y = (i + 0.5) * (hin / hout) - hin / 2 - transform.shift_y * hin
    x = (j + 0.5) * (win / wout) - win / 2 - transform.shift_x * win
    y, x = np.broadcast_arrays(y, x)
    if transform.angle_deg:
        t = math.radians(transform.angle_deg)
        c, s = math.cos(t), math.sin(t)
        y, x = c * y - s * x, s * y + c * x
    y = y / transform.scale
    x = x / transform.scale
    if transform.flip_v:
        y = -y
    if transform.flip_h:
        x = -x
    return y + hin / 2 - 0.5, x + win / 2 - 0.5


def _reflect(idx, n):
    idx = np.mod(idx, 2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def sample_nearest(image, ys, xs):
    h, w = image.shape[:2]
    yi = _reflect(np.floor(ys + 0.5).astype(np.int64), h)
    xi = _reflect(np.floor(xs + 0.5).astype(np.int64), w)
    return image[yi, xi]


def sample_bilinear(image, ys, xs):
    h, w = image.shape[:2]
    y0, x0 = np.floor(ys), np.floor(xs)
    fy, fx = (ys - y0)[..., None], (xs - x0)[..., None]
    y0, x0 = y0.astype(np.int64), x0.astype(np.int64)
    ya, yb = _reflect(y0, h), _reflect(y0 + 1, h)
    xa, xb = _reflect(x0, w), _reflect(x0 + 1, w)
    top = image[ya, xa] * (1 - fx) + image[ya, xb] * fx
    bottom = image[yb, xa] * (1 - fx) + image[yb, xb] * fx
    return (top * (1 - fy) + bottom * fy).astype(image.dtype, copy=False)


def augment_pair(rgb, cube, config, rng):
    """Apply one random geometric transform to an RGB/cube pair.

    RGB is resampled bilinearly, the cube by nearest neighbour so no spectra
    are blended; out-of-frame samples are mirrored back in.
    """
    if (rgb.height, rgb.width) != cube.shape[:2]:
        raise ShapeError("RGB and cube spatial sizes differ")
    t = draw_transform(rng, config)
    ys, xs = source_coords(t, cube.shape[:2], (config.target_h, config.target_w))
    rgb_out = np.clip(sample_bilinear(rgb.data, ys, xs), 0, 1)
    return RgbImage(rgb_out), cube.with_data(sample_nearest(cube.data, ys, xs))


# -- training loop ------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class History:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    loss: str = "l1"

    def __len__(self):
        return len(self.records)


def evaluate_loss(spec, weights, samples, loss_fn):
    vals = [loss_fn(s.cube.data, forward(spec, weights, s.rgb))[0] for s in samples]
    return float(np.mean(vals))


def train_model(spec, dataset, config=TrainConfig(), initial_weights=None, on_epoch=None):
    """Train with Adam and cosine annealing; keep the best-validation weights.

    The schedule runs over ``epochs * batches_per_epoch`` iterations and is
    stepped once per batch. ``on_epoch`` receives each EpochRecord as it is
    completed. Returns ``(best_weights, history)``.
    """
    if not dataset.train:
        raise DatasetError("training split is empty")
    if not dataset.val:
        raise DatasetError("validation split is empty")
    if dataset.channels != spec.output_channels:
        raise DatasetError(f"model predicts {spec.output_channels} channels, dataset has {dataset.channels}")
    dtype = np.dtype(config.dtype)
    rng = np.random.default_rng(config.seed)
    if initial_weights is None:
        weights = init_weights(spec, config.seed, dtype=dtype)
    else:
        weights = initial_weights.astype(dtype)
    loss_name = resolve_loss(config, dataset)
    loss_fn = _loss_fn(loss_name, config)
    state = OptimizerState.zeros_like(weights.params)
    n_train = len(dataset.train)
    batches = math.ceil(n_train / config.batch_size)
    total = config.epochs * batches
    history = History(loss=loss_name)
    best = weights.copy()
    it = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        epoch_losses = []
        lr = config.lr0
        for b in range(batches):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            grad = np.zeros_like(weights.params)
            batch_loss = 0.0
            for k in idx:
                s = dataset.train[k]
                rgb, cube = s.rgb, s.cube
                if config.augment is not None:
                    rgb, cube = augment_pair(rgb, cube, config.augment, rng)
                out, inputs = forward_cached(spec, weights, rgb)
                value, g_out = loss_fn(cube.data.astype(dtype, copy=False), out)
                if not math.isfinite(value):
                    raise NumericsError(f"non-finite training loss in epoch {epoch}", epoch=epoch)
                gw, _ = backward_cached(spec, weights, inputs, g_out)
                grad += gw
                batch_loss += value
            grad /= len(idx)
            lr = cosine_lr(it, total, config.lr0, config.eta_min)
            try:
                state, weights = adam_step(state, weights, grad, lr, config.beta1, config.beta2, config.adam_eps)
            except NumericsError as exc:
                raise NumericsError(f"{exc} in epoch {epoch}", epoch=epoch) from exc
            it += 1
            epoch_losses.append(batch_loss / len(idx))
        val = evaluate_loss(spec, weights, dataset.val, loss_fn)
        if not math.isfinite(val):
            raise NumericsError(f"non-finite validation loss in epoch {epoch}", epoch=epoch)
        record = EpochRecord(epoch, float(np.mean(epoch_losses)), val, lr)
        history.records.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if val < history.best_val_loss:
            history.best_val_loss, history.best_epoch = val, epoch
            best = weights.copy()
    return best, history


def fine_tune(spec, pretrained_weights, new_dataset, config=TrainConfig(), head_seed=None, on_epoch=None):
    """Replace the head to fit the new dataset's channel count, then retrain.

    Runs ``config.fine_tune_epochs`` (at most 50) epochs. Returns
    ``(new_spec, weights, history)``.
    """
    seed = config.seed if head_seed is None else head_seed
    new_spec, weights = replace_head(spec, pretrained_weights, new_dataset.channels, seed)
    cfg = dataclasses.replace(config, epochs=config.fine_tune_epochs)
    best, history = train_model(new_spec, new_dataset, cfg, initial_weights=weights, on_epoch=on_epoch)
    return new_spec, best, history


# -- config and history files -------------------------------------------------

HISTORY_HEADER = ["epoch", "train_loss", "val_loss", "lr"]


def write_history_csv(history, path):
    write_csv(path, HISTORY_HEADER, [(r.epoch, r.train_loss, r.val_loss, r.lr) for r in history.records])


def read_history_csv(path):
    header, rows = read_csv(path)
    if header != HISTORY_HEADER:
        raise ConfigError(f"unexpected history header {header}")
    return [EpochRecord(int(e), float(t), float(v), float(lr)) for e, t, v, lr in rows]


def _convert(value, default, key):
    try:
        if isinstance(default, bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(float(v) for v in value.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def train_config_from_mapping(values):
    """Build a TrainConfig from string values.

    Augmentation is enabled by ``augment = true`` and tuned with
    ``augment.<field>`` keys.
    """
    values = dict(values)
    defaults = TrainConfig()
    aug_default = AugmentConfig()
    aug_kwargs = {}
    for key in [k for k in values if k.startswith("augment.")]:
        name = key.split(".", 1)[1]
        if name not in {f.name for f in dataclasses.fields(AugmentConfig)}:
            raise ConfigError(f"unknown key {key!r}")
        aug_kwargs[name] = _convert(values.pop(key), getattr(aug_default, name), key)
    enabled = _convert(values.pop("augment", "false"), False, "augment")
    kwargs = {}
    names = {f.name for f in dataclasses.fields(TrainConfig)} - {"augment"}
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f"unknown key {key!r}")
        kwargs[key] = _convert(value, getattr(defaults, key), key)
    if aug_kwargs and not enabled:
        raise ConfigError("augment.* keys given but augment is not enabled")
    augment = AugmentConfig(**aug_kwargs) if enabled else None
    return TrainConfig(augment=augment, **kwargs)


def load_train_config(path):
    with open(path, encoding="utf-8") as fh:
        return train_config_from_mapping(parse_kv(fh.read()))


def format_train_config(config):
    lines = []
    for f in dataclasses.fields(TrainConfig):
        value = getattr(config, f.name)
        if f.name == "augment":
            lines.append(f"augment = {'true' if value is not None else 'false'}")
            if value is not None:
                for af in dataclasses.fields(AugmentConfig):
                    v = getattr(value, af.name)
                    text = ",".join(repr(float(x)) for x in v) if isinstance(v, tuple) else repr(v)
                    lines.append(f"augment.{af.name} = {text}")
        else:
            lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
