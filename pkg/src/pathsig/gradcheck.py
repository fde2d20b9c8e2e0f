"""Central finite-difference checks of the handwritten backward passes."""

from __future__ import annotations

import numpy as np

from .backward import signature_backward
from .logsignature import logsignature, logsignature_backward
from .signature import signature

__all__ = ["FD_STEP", "GRAD_TOL", "max_relative_error", "finite_difference_grad", "gradient_check"]

FD_STEP = 1e-6
GRAD_TOL = 1e-5


def max_relative_error(analytic, numeric) -> float:
    """``max|analytic - numeric| / max|numeric|`` (infinity-norm relative error)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(float(np.abs(numeric).max(initial=0.0)), np.finfo(float).tiny)
    return float(np.abs(analytic - numeric).max(initial=0.0)) / scale


def finite_difference_grad(fn, x, step=FD_STEP) -> np.ndarray:
    """Central differences of a scalar function at every entry of ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = fn(x)
        flat[i] = orig - step
        down = fn(x)
        flat[i] = orig
        out[i] = (up - down) / (2 * step)
    return grad


def gradient_check(
    channels: int,
    depth: int,
    length: int,
    seed: int = 0,
    *,
    logsig: bool = False,
    mode: str = "words",
    batch: int = 1,
    step: float = FD_STEP,
    backward=None,
    **options,
) -> float:
    """Max relative error of the backward pass against central differences.

    A random stream with entries in [-1, 1] and a random linear functional
    of the (log)signature are drawn from ``seed``. ``backward`` overrides
    the backward function under test (same signature as
    :func:`signature_backward` or :func:`logsignature_backward`).
    """
    rng = np.random.default_rng(seed)
    path = rng.uniform(-1.0, 1.0, size=(batch, length, channels))
    if logsig:
        forward = lambda p: logsignature(p, depth, mode, **options)  # noqa: E731
    else:
        forward = lambda p: signature(p, depth, **options).data  # noqa: E731
    weights = rng.standard_normal(forward(path).shape)

    def loss(p):
        return float(np.sum(weights * forward(p)))

    if logsig:
        bwd = backward or logsignature_backward
        analytic = bwd(weights, path, depth, mode, **options).grad_stream
    else:
        bwd = backward or signature_backward
        analytic = bwd(weights, path, depth, **options).grad_stream
    numeric = finite_difference_grad(loss, path, step)
    return max_relative_error(analytic, numeric)
