"""Handwritten vector-Jacobian products for the signature transform.

The backward pass along a stream never stores the prefix signatures.
Starting from the saved final signature it recovers each earlier prefix
with one fused step along the negated increment,
``Sig(x_1..x_i) = Sig(x_1..x_{i+1}) * exp(x_i - x_{i+1})``,
so auxiliary storage stays at a fixed number of tensors whatever the
stream length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signature import _as_path, _check_initial, _has_basepoint, _increment_steps, _prepend_basepoint, signature
from .tensor_algebra import (
    FreeTensor,
    TruncationSpec,
    _as_increment,
    _fused_exp_mul_levels,
    _fused_mul_exp_levels,
    _inverse_levels,
    _join,
    _mul_levels,
    _scaled_increments,
    _split,
    _vectors,
)

__all__ = [
    "SignatureGradient",
    "mul_backward",
    "fused_mul_exp_backward",
    "fused_exp_mul_backward",
    "signature_backward",
]


@dataclass
class SignatureGradient:
    """Gradients with respect to the inputs of a signature computation.

    ``grad_stream`` has the shape of the input path. ``grad_initial`` and
    ``grad_basepoint`` are set only when an initial tensor or an explicit
    basepoint vector was supplied.
    """

    grad_stream: np.ndarray
    grad_initial: FreeTensor | None = None
    grad_basepoint: np.ndarray | None = None


# --------------------------------------------------------------------------
# level-list kernels on (d**k, B) blocks, batch axis last
# --------------------------------------------------------------------------


def _mul_backward_levels(g, a, b, depth, scalars=True):
    """Adjoint of ``_mul_levels`` with respect to both factors."""
    if scalars:
        ga = [gk.copy() for gk in g]
        gb = [gk.copy() for gk in g]
    else:
        ga = [np.zeros_like(gk) for gk in g]
        gb = [np.zeros_like(gk) for gk in g]
    for k in range(2, depth + 1):
        gk = g[k - 1]
        for i in range(1, k):
            j = k - i
            block = gk.reshape(a[i - 1].shape[0], b[j - 1].shape[0], -1)
            ga[i - 1] += np.einsum("ijb,jb->ib", block, b[j - 1])
            gb[j - 1] += np.einsum("ijb,ib->jb", block, a[i - 1])
    return ga, gb


def _collect_scaled(gs, spec):
    recip = spec.reciprocals
    gz = gs[1].copy()
    for j in range(2, spec.depth + 1):
        gz += recip[j] * gs[j]
    return gz


def _fused_mul_exp_backward_levels(g, a, z, spec):
    """Reverse sweep through the nested Horner evaluation of ``a * exp(z)``."""
    d = spec.channels
    bsz = z.shape[1]
    scaled = _scaled_increments(z, spec)
    ga = [np.zeros_like(lv) for lv in g]
    gs = [None] + [np.zeros_like(z) for _ in range(spec.depth)]
    ga[0] += g[0]
    gs[1] += g[0]
    for k in range(2, spec.depth + 1):
        # rebuild the partial products of this level; t[j] has d**j rows
        t = [None, scaled[k] + a[0]]
        for j in range(1, k - 1):
            nxt = (t[j][:, None, :] * scaled[k - j][None, :, :]).reshape(-1, bsz)
            nxt += a[j]
            t.append(nxt)
        gt = g[k - 1]
        for j in range(k - 1, 0, -1):
            ga[j] += gt
            block = gt.reshape(-1, d, bsz)
            gs[k - j] += np.einsum("ijb,ib->jb", block, t[j])
            gt = np.einsum("ijb,jb->ib", block, scaled[k - j])
        ga[0] += gt
        gs[k] += gt
    return ga, _collect_scaled(gs, spec)


def _fused_exp_mul_backward_levels(g, z, a, spec):
    """Reverse sweep through the mirrored evaluation of ``exp(z) * a``."""
    d = spec.channels
    bsz = z.shape[1]
    scaled = _scaled_increments(z, spec)
    ga = [np.zeros_like(lv) for lv in g]
    gs = [None] + [np.zeros_like(z) for _ in range(spec.depth)]
    ga[0] += g[0]
    gs[1] += g[0]
    for k in range(2, spec.depth + 1):
        t = [None, scaled[k] + a[0]]
        for j in range(1, k - 1):
            nxt = (scaled[k - j][:, None, :] * t[j][None, :, :]).reshape(-1, bsz)
            nxt += a[j]
            t.append(nxt)
        gt = g[k - 1]
        for j in range(k - 1, 0, -1):
            ga[j] += gt
            block = gt.reshape(d, -1, bsz)
            gs[k - j] += np.einsum("ijb,jb->ib", block, t[j])
            gt = np.einsum("ijb,ib->jb", block, scaled[k - j])
        ga[0] += gt
        gs[k] += gt
    return _collect_scaled(gs, spec), ga


# --------------------------------------------------------------------------
# public single-operation backwards
# --------------------------------------------------------------------------


def _grad_levels(grad_out, spec, batch_shape):
    if not isinstance(grad_out, FreeTensor):
        grad_out = FreeTensor(spec, grad_out)
    if grad_out.spec != spec:
        raise ValueError(f"spec mismatch: grad {grad_out.spec} vs {spec}")
    data = np.broadcast_to(grad_out.data, tuple(batch_shape) + (spec.size,))
    return _split(FreeTensor(spec, data))[0]


def mul_backward(grad_out, a: FreeTensor, b: FreeTensor) -> tuple[FreeTensor, FreeTensor]:
    """Gradients of ``<grad_out, a * b>`` with respect to ``a`` and ``b``."""
    if a.spec != b.spec:
        raise ValueError(f"spec mismatch: {a.spec} vs {b.spec}")
    shape = np.broadcast_shapes(a.batch_shape, b.batch_shape)
    spec = a.spec
    la = _grad_levels(a, spec, shape)
    lb = _grad_levels(b, spec, shape)
    g = _grad_levels(grad_out, spec, shape)
    ga, gb = _mul_backward_levels(g, la, lb, spec.depth)
    return _join(spec, ga, shape), _join(spec, gb, shape)


def fused_mul_exp_backward(grad_out, a: FreeTensor, z) -> tuple[FreeTensor, np.ndarray]:
    """Gradients of ``<grad_out, a * exp(z)>`` with respect to ``a`` and ``z``."""
    spec = a.spec
    z = _as_increment(z, spec)
    shape = np.broadcast_shapes(a.batch_shape, z.shape[:-1])
    la = _grad_levels(a, spec, shape)
    g = _grad_levels(grad_out, spec, shape)
    zf = _vectors(np.broadcast_to(z, shape + (spec.channels,)), spec.channels)
    ga, gz = _fused_mul_exp_backward_levels(g, la, zf, spec)
    return _join(spec, ga, shape), gz.T.reshape(shape + (spec.channels,))


def fused_exp_mul_backward(grad_out, z, a: FreeTensor) -> tuple[np.ndarray, FreeTensor]:
    """Gradients of ``<grad_out, exp(z) * a>`` with respect to ``z`` and ``a``."""
    spec = a.spec
    z = _as_increment(z, spec)
    shape = np.broadcast_shapes(a.batch_shape, z.shape[:-1])
    la = _grad_levels(a, spec, shape)
    g = _grad_levels(grad_out, spec, shape)
    zf = _vectors(np.broadcast_to(z, shape + (spec.channels,)), spec.channels)
    gz, ga = _fused_exp_mul_backward_levels(g, zf, la, spec)
    return gz.T.reshape(shape + (spec.channels,)), _join(spec, ga, shape)


# --------------------------------------------------------------------------
# backward along a stream
# --------------------------------------------------------------------------


def _zeros_like_levels(levels):
    return [np.zeros_like(lv) for lv in levels]


def _add_into(acc, other):
    for x, y in zip(acc, other):
        x += y


def _right_fold_backward(z, spec, final, hook, stream, has_init):
    """Backward of ``S_i = S_{i-1} * exp(z_i)`` from the saved last ``S``.

    ``hook(i, S_i)`` returns the output gradient for entry ``i`` (every entry
    in stream mode, the last one otherwise). Returns ``(grad_z, grad_S_0)``.
    """
    n = z.shape[0]
    cur = final
    gcur = _zeros_like_levels(final)
    gz = np.empty_like(z)
    for i in range(n - 1, -1, -1):
        if stream or i == n - 1:
            _add_into(gcur, hook(i, cur))
        if i > 0 or has_init:
            prev = _fused_mul_exp_levels(cur, -z[i], spec)
        else:
            prev = _zeros_like_levels(cur)
        gprev, gz[i] = _fused_mul_exp_backward_levels(gcur, prev, z[i], spec)
        cur, gcur = prev, gprev
    return gz, (gcur if has_init else None)


def _left_fold_backward(z, spec, final_out, hook, init):
    """Backward of the stream-mode inverse: ``R_i = exp(-z_i) * R_{i-1}``, outputs ``init * R_i``."""
    n = z.shape[0]
    if init is not None:
        r = _mul_levels(_inverse_levels(init, spec.depth), final_out, spec.depth)
        ginit = _zeros_like_levels(init)
    else:
        r = final_out
        ginit = None
    gr = _zeros_like_levels(r)
    gz = np.empty_like(z)
    for i in range(n - 1, -1, -1):
        if init is not None:
            out = _mul_levels(init, r, spec.depth)
            gi, gri = _mul_backward_levels(hook(i, out), init, r, spec.depth)
            _add_into(ginit, gi)
            _add_into(gr, gri)
        else:
            _add_into(gr, hook(i, r))
        if i > 0:
            prev = _fused_exp_mul_levels(z[i], r, spec)
        else:
            prev = _zeros_like_levels(r)
        gneg, gprev = _fused_exp_mul_backward_levels(gr, -z[i], prev, spec)
        gz[i] = -gneg
        r, gr = prev, gprev
    return gz, ginit


def _stream_backward(path, depth, *, stream, basepoint, initial, inverse, saved, make_hook):
    """Shared driver for signature and logsignature backward passes.

    ``make_hook(spec, batch_size, n_increments)`` returns ``hook(i, value)``,
    the gradient (a level list) entering the walk at entry ``i`` of a
    stream-mode output, or at the final output when not in stream mode.
    ``value`` is the forward value at that point.
    """
    path = _as_path(path)
    spec = TruncationSpec(path.shape[-1], depth)
    full = _prepend_basepoint(path, basepoint)
    if full.shape[-2] < 2:
        raise ValueError("stream too short; need at least 2 points (or 1 with a basepoint)")
    z = np.diff(full, axis=-2)
    batch_shape = z.shape[:-2]
    n = z.shape[-2]
    zs = _increment_steps(z, spec.channels)
    bsz = zs.shape[2]
    init = _check_initial(initial, spec, batch_shape)
    init_levels = _split(init)[0] if init is not None else None

    if saved is None:
        saved = signature(path, depth, stream=stream, basepoint=basepoint, initial=initial, inverse=inverse)
    if not isinstance(saved, FreeTensor):
        saved = FreeTensor(spec, saved)
    if saved.spec != spec:
        raise ValueError(f"saved signature has spec {saved.spec}, expected {spec}")
    expected = batch_shape + ((n,) if stream else ())
    if saved.batch_shape != expected:
        raise ValueError(f"saved signature has batch shape {saved.batch_shape}, expected {expected}")
    final = saved.data[..., -1, :] if stream else saved.data
    final_levels = _split(FreeTensor(spec, final.reshape(bsz, spec.size)))[0]

    hook = make_hook(spec, bsz, n)
    if stream and inverse:
        gz, ginit = _left_fold_backward(zs, spec, final_levels, hook, init_levels)
    elif inverse:
        gz_rev, ginit = _right_fold_backward(-zs[::-1], spec, final_levels, hook, stream, init is not None)
        gz = -gz_rev[::-1]
    else:
        gz, ginit = _right_fold_backward(zs, spec, final_levels, hook, stream, init is not None)

    gz = gz.transpose(2, 0, 1).reshape(z.shape)
    gfull = np.zeros(full.shape)
    gfull[..., 1:, :] += gz
    gfull[..., :-1, :] -= gz
    result = SignatureGradient(grad_stream=gfull)
    if _has_basepoint(basepoint):
        result.grad_stream = gfull[..., 1:, :].copy()
        if basepoint is not True:
            result.grad_basepoint = _sum_to_shape(gfull[..., 0, :], np.shape(basepoint))
    if ginit is not None:
        data = _join(spec, ginit, batch_shape).data
        shape = initial.data.shape if isinstance(initial, FreeTensor) else np.shape(initial)
        result.grad_initial = FreeTensor(spec, _sum_to_shape(data, shape))
    return result


def _sum_to_shape(grad, shape):
    """Adjoint of broadcasting an array of ``shape`` up to ``grad.shape``."""
    lead = grad.ndim - len(shape)
    grad = grad.sum(axis=tuple(range(lead))) if lead else grad
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    return grad.sum(axis=axes, keepdims=True) if axes else grad


def signature_backward(
    grad_out,
    path,
    depth: int,
    *,
    stream: bool = False,
    basepoint=False,
    initial: FreeTensor | None = None,
    inverse: bool = False,
    saved: FreeTensor | None = None,
) -> SignatureGradient:
    """Vector-Jacobian product of :func:`~pathsig.signature.signature`.

    ``grad_out`` matches the forward output (a FreeTensor or raw array).
    ``saved`` is the forward output for the same arguments; it is recomputed
    when omitted. Consistency between ``saved`` and ``path`` is not checked.
    """

    def make_hook(spec, bsz, n):
        shape = (bsz, n, spec.size) if stream else (bsz, spec.size)
        data = grad_out.data if isinstance(grad_out, FreeTensor) else np.asarray(grad_out, dtype=np.float64)
        data = data.reshape(shape)
        o = spec.level_offsets

        def hook(i, _value):
            row = data[:, i] if stream else data
            return [row[:, o[k] : o[k + 1]].T for k in range(spec.depth)]

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
