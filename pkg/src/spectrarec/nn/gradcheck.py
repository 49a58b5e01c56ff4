"""Central finite-difference verification of analytic gradients."""
import numpy as np

from .model import backward, forward
from .weights import Weights


def numeric_gradient(f, x, step=1e-6):
    """Central-difference gradient of scalar ``f`` at array ``x`` (float64)."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * step)
    return grad


def relative_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def check_model_gradients(spec, weights, x, grad_out, step=1e-6, perturb=None):
    """Compare analytic weight and input gradients with finite differences.

    ``perturb`` optionally edits the analytic weight gradient before the
    comparison (fault injection for the self-check). Returns
    ``(weight_rel_err, input_rel_err)``.
    """
    w64 = weights.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    gw, gx = backward(spec, w64, x, g)
    if perturb is not None:
        gw = perturb(gw)

    def f_w(p):
        return float(np.sum(g * forward(spec, Weights(p, w64.index), x)))

    def f_x(xx):
        return float(np.sum(g * forward(spec, w64, xx)))

    return (
        relative_error(gw, numeric_gradient(f_w, w64.params, step)),
        relative_error(gx, numeric_gradient(f_x, x, step)),
    )
