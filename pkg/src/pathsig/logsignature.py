"""Logsignature transform in three output bases, and its backward pass.

``mode="expanded"`` returns the full tensor-algebra logarithm (length
``sum d**k``). ``mode="brackets"`` returns coefficients with respect to the
Lyndon-bracket basis, and ``mode="words"`` (the default) returns the
coefficients of the Lyndon words in the expanded logarithm, which is a
basis related to the bracket one by a unitriangular change of basis.
Both compact modes have length ``witt_dimension(d, N)``, ordered by
(length, lexicographic) Lyndon word.
"""

from __future__ import annotations

import numpy as np

from .backward import SignatureGradient, _mul_backward_levels, _stream_backward
from .lyndon import LyndonBasisIndex, _triangular_solve_adjoint, basis_index, lyndon_triangular_solve, psi_project
from .signature import signature
from .tensor_algebra import FreeTensor, TruncationSpec, _join, _mul_levels, _split, tensor_log

__all__ = ["LOGSIG_MODES", "logsignature", "logsignature_backward", "project_log", "logsignature_channels"]

LOGSIG_MODES = ("expanded", "brackets", "words")


def _check_mode(mode):
    if mode not in LOGSIG_MODES:
        raise ValueError(f"mode must be one of {LOGSIG_MODES}, got {mode!r}")


def logsignature_channels(channels: int, depth: int, mode: str = "words") -> int:
    """Output length of :func:`logsignature` for a given mode."""
    _check_mode(mode)
    spec = TruncationSpec(channels, depth)
    if mode == "expanded":
        return spec.size
    return basis_index(spec).dimension


def project_log(log_tensor: FreeTensor, mode: str = "words", index: LyndonBasisIndex | None = None) -> np.ndarray:
    """Express an expanded logarithm in the requested output basis."""
    _check_mode(mode)
    if mode == "expanded":
        return log_tensor.data
    index = index if index is not None else basis_index(log_tensor.spec)
    if mode == "words":
        return psi_project(log_tensor, index)
    return lyndon_triangular_solve(log_tensor, index)


def logsignature(
    path,
    depth: int,
    mode: str = "words",
    *,
    stream: bool = False,
    basepoint=False,
    initial: FreeTensor | None = None,
    inverse: bool = False,
    parallelism: str = "serial",
    workers: int | None = None,
) -> np.ndarray:
    """Logarithm of :func:`~pathsig.signature.signature`, projected by ``mode``.

    The keyword options behave as for the signature; with ``inverse`` the
    result is the logarithm of the inverted signature.
    """
    _check_mode(mode)
    sig = signature(
        path,
        depth,
        stream=stream,
        basepoint=basepoint,
        initial=initial,
        inverse=inverse,
        parallelism=parallelism,
        workers=workers,
    )
    return project_log(tensor_log(sig), mode)


def _log_backward_levels(g, x, depth):
    """Adjoint of the truncated ``log(1 + x)`` series.

    The powers ``x**k`` are rebuilt on demand instead of being kept from
    the forward sweep.
    """

    def power(k):
        p = x
        for _ in range(k - 1):
            p = _mul_levels(p, x, depth, scalars=False)
        return p

    gx = [gk.copy() for gk in g]
    if depth < 2:
        return gx
    # running gradient with respect to x**k, starting from the top power
    gp = [((1.0 if depth % 2 else -1.0) / depth) * gk for gk in g]
    for k in range(depth, 1, -1):
        gprev, gpart = _mul_backward_levels(gp, power(k - 1), x, depth, scalars=False)
        for a, b in zip(gx, gpart):
            a += b
        if k - 1 == 1:
            for a, b in zip(gx, gprev):
                a += b
        else:
            c = (1.0 if (k - 1) % 2 else -1.0) / (k - 1)
            gp = [c * gk + gpk for gk, gpk in zip(g, gprev)]
    return gx


def _mode_adjoint(grad_row, mode, spec, index):
    """Gradient with respect to the expanded logarithm, shape (B, size)."""
    if mode == "expanded":
        return grad_row
    full = np.zeros(grad_row.shape[:-1] + (spec.size,))
    if mode == "brackets":
        grad_row = _triangular_solve_adjoint(grad_row, index)
    full[..., index.offsets] = grad_row
    return full


def logsignature_backward(
    grad_out,
    path,
    depth: int,
    mode: str = "words",
    *,
    stream: bool = False,
    basepoint=False,
    initial: FreeTensor | None = None,
    inverse: bool = False,
    saved: FreeTensor | None = None,
) -> SignatureGradient:
    """Vector-Jacobian product of :func:`logsignature`.

    ``saved`` is the signature the logarithm was taken of, i.e. the output
    of :func:`~pathsig.signature.signature` with the same options; it is
    recomputed when omitted.
    """
    _check_mode(mode)
    grad_out = np.asarray(grad_out, dtype=np.float64)

    def make_hook(spec, bsz, n):
        index = basis_index(spec) if mode != "expanded" else None
        width = grad_out.shape[-1]
        data = grad_out.reshape((bsz, n, width) if stream else (bsz, width))
        o = spec.level_offsets

        def hook(i, value):
            row = data[:, i] if stream else data
            full = _mode_adjoint(row, mode, spec, index)
            g = [full[:, o[k] : o[k + 1]].T for k in range(spec.depth)]
            return _log_backward_levels(g, value, spec.depth)

        return hook

    return _stream_backward(
        path,
        depth,
        stream=stream,
        basepoint=basepoint,
        initial=initial,
        inverse=inverse,
        saved=saved,
        make_hook=make_hook,
    )


def _tensor_log_backward(grad_out, sig: FreeTensor) -> FreeTensor:
    """Adjoint of :func:`~pathsig.tensor_algebra.tensor_log` at ``sig``."""
    levels, shape = _split(sig)
    g = FreeTensor(sig.spec, np.broadcast_to(np.asarray(grad_out, dtype=np.float64), sig.data.shape))
    gl, _ = _split(g)
    out = _log_backward_levels(gl, levels, sig.spec.depth)
    return _join(sig.spec, out, shape)
