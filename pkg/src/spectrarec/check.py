"""Built-in verification suite run by ``spectrarec check``.

Every check compares library output with an independent reference (naive
loops, finite differences, closed forms). Setting ``SPECTRAREC_INJECT_FAULT``
to a check name (``gradient``, ``metrics``, ``param_count``, ``schedule`` or
``serialization``) perturbs that check so the failure path can be exercised.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import metrics as M
from .cube import Hypercube, load_cube, make_range_masks, save_cube
from .nn import LayerSpec, ModelSpec, build_model, init_weights, param_count
from .nn.checkpoint import decode_checkpoint, encode_checkpoint
from .nn.gradcheck import check_model_gradients, numeric_gradient, relative_error
from .train import cosine_lr, loss_l1, loss_mrae

FAULT_ENV = "SPECTRAREC_INJECT_FAULT"
EXPECTED_COUNTS = {
    ("pixel_feature_net", 27): 1611,
    ("pixel_feature_net", 100): 4020,
    ("local_feature_net", 27): 6923,
    ("local_feature_net", 100): 9332,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _fault(name):
    return os.environ.get(FAULT_ENV, "") == name


# -- naive references ---------------------------------------------------------

def _ref_metrics(y, yhat):
    h, w, c = y.shape
    abs_sum = sq_sum = rel_sum = angle_sum = 0.0
    for i in range(h):
        for j in range(w):
            dot = nu = nv = 0.0
            for k in range(c):
                d = float(y[i, j, k]) - float(yhat[i, j, k])
                abs_sum += abs(d)
                sq_sum += d * d
                rel_sum += abs(d) / max(abs(float(y[i, j, k])), M.MRAE_EPS)
                dot += float(y[i, j, k]) * float(yhat[i, j, k])
                nu += float(y[i, j, k]) ** 2
                nv += float(yhat[i, j, k]) ** 2
            cos = dot / max(math.sqrt(nu) * math.sqrt(nv), 1e-300)
            angle_sum += math.acos(min(1.0, max(-1.0, cos)))
    n = h * w * c
    mse = sq_sum / n
    return {
        "mae": abs_sum / n,
        "rmse": math.sqrt(mse),
        "psnr": min(10 * math.log10(1.0 / mse), M.PSNR_CAP_DB) if mse > 0 else M.PSNR_CAP_DB,
        "mrae": rel_sum / n,
        "sam": angle_sum / (h * w),
    }


def check_param_counts():
    results = []
    for (name, c), expected in EXPECTED_COUNTS.items():
        got = param_count(build_model(name, c))
        if _fault("param_count"):
            got += 1
        results.append(CheckResult(f"param_count {name} C={c}", got == expected, str(got)))
    return results


def check_metric_oracles(n=100, seed=0):
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in ("mae", "rmse", "psnr", "mrae", "sam")}
    for _ in range(n):
        shape = tuple(int(v) for v in rng.integers(1, (9, 9, 8)))
        y = rng.uniform(0.05, 1.0, shape)
        yhat = np.clip(y + rng.normal(0, 0.1, shape), 0.01, 1.0)
        ref = _ref_metrics(y, yhat)
        got = {"mae": M.mae(y, yhat), "rmse": M.rmse(y, yhat), "psnr": M.psnr(y, yhat),
               "mrae": M.mrae(y, yhat), "sam": M.sam(y, yhat)}
        if _fault("metrics"):
            got["mae"] *= 1.001
        for name in worst:
            worst[name] = max(worst[name], abs(got[name] - ref[name]) / max(abs(ref[name]), 1e-300))
    return [CheckResult(f"metric_oracle {name}", err <= 1e-10, f"max rel err {err:.2e}")
            for name, err in worst.items()]


def check_ssim_constant():
    # constant images: means are the constants, variances and covariance vanish
    p = M.SsimParams()
    ok, worst = True, 0.0
    for a, b in ((0.2, 0.2), (0.3, 0.7), (0.0, 1.0)):
        y = np.full((12, 12, 2), a)
        yhat = np.full((12, 12, 2), b)
        expect = (2 * a * b + p.c1) / (a * a + b * b + p.c1)
        err = abs(M.ssim(y, yhat, p) - expect)
        worst = max(worst, err)
        ok &= err <= 1e-12
    return [CheckResult("ssim_constant_images", ok, f"max abs err {worst:.2e}")]


def check_identity(seed=1):
    rng = np.random.default_rng(seed)
    wl = 460.0 + 10.0 * np.arange(27)
    y = rng.uniform(0.05, 1.0, (16, 16, 27))
    vals = {"mae": M.mae(y, y), "rmse": M.rmse(y, y), "sam": M.sam(y, y), "mrae": M.mrae(y, y)}
    ok = all(v == 0 for v in vals.values()) and M.ssim(y, y) == 1.0 and M.psnr(y, y) == M.PSNR_CAP_DB
    yhat = rng.uniform(0.0, 1.0, y.shape)
    full, vis, ext = make_range_masks(wl)
    combined = (len(vis) * M.mae(y, yhat, vis) + len(ext) * M.mae(y, yhat, ext)) / len(full)
    err = abs(combined - M.mae(y, yhat, full))
    return [
        CheckResult("identity_prediction", ok, "zero errors, SSIM 1, PSNR at cap" if ok else str(vals)),
        CheckResult("range_mask_consistency", err <= 1e-12, f"abs err {err:.2e}"),
    ]


def _single(kind, cin, cout, heads=1):
    return ModelSpec("custom", (LayerSpec(kind, cin, cout, heads),), cout)


def check_gradients(instances=5, seed=2):
    rng = np.random.default_rng(seed)
    cases = {
        "dense": lambda: _single("dense", 3, 4),
        "conv3": lambda: _single("conv3", 2, 3),
        "conv1": lambda: _single("conv1", 3, 2),
        "relu": lambda: ModelSpec("custom", (LayerSpec("dense", 3, 4), LayerSpec("relu", 4, 4)), 4),
        "spectral_attention": lambda: _single("spectral_attention", 4, 4, 2),
    }
    def bump(g):
        g = g.copy()
        g[0] += 1e-2 * (abs(g[0]) + 1)
        return g

    perturb = bump if _fault("gradient") else None
    results = []
    for kind, make in cases.items():
        worst = 0.0
        for _ in range(instances):
            spec = make()
            w = init_weights(spec, int(rng.integers(1 << 30)))
            w.params[:] += rng.normal(0, 0.1, w.params.shape)
            x = rng.normal(size=(4, 5, spec.input_channels))
            g = rng.normal(size=(4, 5, spec.output_channels))
            worst = max(worst, *check_model_gradients(spec, w, x, g, perturb=perturb))
        results.append(CheckResult(f"gradient {kind}", worst <= 1e-5, f"max rel err {worst:.2e}"))
    for name, fn in (("l1", loss_l1), ("mrae", loss_mrae)):
        worst = 0.0
        for _ in range(instances):
            y = rng.uniform(0.1, 1.0, (3, 3, 4))
            yhat = y + rng.choice([-1, 1], y.shape) * rng.uniform(0.01, 0.3, y.shape)
            worst = max(worst, relative_error(fn(y, yhat)[1], numeric_gradient(lambda p: fn(y, p)[0], yhat)))
        results.append(CheckResult(f"gradient loss_{name}", worst <= 1e-5, f"max rel err {worst:.2e}"))
    return results


def check_schedule():
    total = 1200
    lr0 = cosine_lr(0, total)
    end = cosine_lr(total, total)
    if _fault("schedule"):
        end *= 1.5
    lrs = [cosine_lr(int(i), total) for i in np.linspace(0, total, 1000).round()]
    mono = all(a >= b for a, b in zip(lrs, lrs[1:]))
    return [
        CheckResult("schedule endpoints", lr0 == 1e-4 and end == 1e-6, f"lr(0)={lr0!r} lr(T)={end!r}"),
        CheckResult("schedule monotone", mono, "non-increasing at 1000 points"),
    ]


def check_serialization(n=20, seed=3):
    rng = np.random.default_rng(seed)
    ok_cube = ok_ckpt = True
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "c.hsc")
        for _ in range(n):
            h, w, c = (int(v) for v in rng.integers(1, (6, 6, 6)))
            cube = Hypercube(rng.normal(size=(h, w, c)).astype(np.float32), (np.cumsum(rng.uniform(1, 5, c)) + 400).astype(np.float32))
            save_cube(cube, path)
            back = load_cube(path)
            data = back.data
            if _fault("serialization"):
                data = data + np.float32(1e-3)
            ok_cube &= np.array_equal(data, cube.data) and np.array_equal(back.wavelengths, cube.wavelengths)
    for name in ("pixel_feature_net", "local_feature_net", "spectral_attention_net"):
        spec = build_model(name, int(rng.integers(1, 40)))
        w = init_weights(spec, int(rng.integers(1 << 30)), dtype=np.float32)
        spec2, w2 = decode_checkpoint(encode_checkpoint(spec, w))
        ok_ckpt &= spec2 == spec and np.array_equal(w2.params, w.params)
    return [
        CheckResult("serialization HSC1", bool(ok_cube), f"{n} round trips"),
        CheckResult("serialization HSW1", bool(ok_ckpt), "3 models"),
    ]


CHECKS = (check_param_counts, check_metric_oracles, check_ssim_constant, check_identity,
          check_gradients, check_schedule, check_serialization)


def run_checks(out=None):
    """Run every check, printing one line each; returns the list of results."""
    results = []
    for fn in CHECKS:
        for r in fn():
            results.append(r)
            if out is not None:
                print(r.line(), file=out, flush=True)
    return results
