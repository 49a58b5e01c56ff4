"""Slow, obviously-correct reference implementations used only by the tests.

Each walks the cube element by element in plain Python; none of them shares
code with the package.
"""
import math

import numpy as np


def _elements(y, yhat, channels=None):
    h, w, c = y.shape
    chans = range(c) if channels is None else channels
    for i in range(h):
        for j in range(w):
            for k in chans:
                yield float(y[i, j, k]), float(yhat[i, j, k])


def mae(y, yhat, channels=None):
    total = n = 0
    for a, b in _elements(y, yhat, channels):
        total += abs(a - b)
        n += 1
    return total / n


def rmse(y, yhat, channels=None):
    total = n = 0
    for a, b in _elements(y, yhat, channels):
        total += (a - b) ** 2
        n += 1
    return math.sqrt(total / n)


def psnr(y, yhat, max_value=1.0, channels=None):
    m = rmse(y, yhat, channels) ** 2
    return 10 * math.log10(max_value**2 / m)


def mrae(y, yhat, eps=1e-8, channels=None):
    total = n = 0
    for a, b in _elements(y, yhat, channels):
        total += abs(a - b) / max(abs(a), eps)
        n += 1
    return total / n


def sam(y, yhat, eps=1e-12):
    h, w, c = y.shape
    angles = []
    for i in range(h):
        for j in range(w):
            dot = sa = sb = 0.0
            for k in range(c):
                a, b = float(y[i, j, k]), float(yhat[i, j, k])
                dot += a * b
                sa += a * a
                sb += b * b
            na, nb = math.sqrt(sa), math.sqrt(sb)
            if na <= eps or nb <= eps:
                continue
            angles.append(math.acos(max(-1.0, min(1.0, dot / (na * nb)))))
    return sum(angles) / len(angles)


def ssim_single_window(y, yhat, weights, c1, c2):
    """SSIM of one weighted window per channel, averaged over channels."""
    h, w, c = y.shape
    vals = []
    for k in range(c):
        mu_a = mu_b = 0.0
        for i in range(h):
            for j in range(w):
                mu_a += weights[i, j] * y[i, j, k]
                mu_b += weights[i, j] * yhat[i, j, k]
        va = vb = cov = 0.0
        for i in range(h):
            for j in range(w):
                da, db = y[i, j, k] - mu_a, yhat[i, j, k] - mu_b
                va += weights[i, j] * da * da
                vb += weights[i, j] * db * db
                cov += weights[i, j] * da * db
        vals.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2)))
    return sum(vals) / len(vals)


def gaussian_window(size, sigma):
    g = [math.exp(-((i - (size - 1) / 2) ** 2) / (2 * sigma * sigma)) for i in range(size)]
    w = np.array([[a * b for b in g] for a in g])
    return w / w.sum()


def ssim_sliding(y, yhat, size, sigma, c1, c2):
    h, w, _ = y.shape
    weights = gaussian_window(size, sigma)
    vals = []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            vals.append(ssim_single_window(y[i:i + size, j:j + size], yhat[i:i + size, j:j + size], weights, c1, c2))
    return sum(vals) / len(vals)


def central_difference(f, x, step=1e-6):
    """Gradient of scalar ``f`` at flat float64 vector ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        old = x.flat[i]
        x.flat[i] = old + step
        fp = f(x)
        x.flat[i] = old - step
        fm = f(x)
        x.flat[i] = old
        g.flat[i] = (fp - fm) / (2 * step)
    return g


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)
