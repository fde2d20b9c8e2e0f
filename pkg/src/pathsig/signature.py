"""Forward signature transform of streams and batches of streams."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .tensor_algebra import (
    FreeTensor,
    TruncationSpec,
    _exp_levels,
    _fused_exp_mul_levels,
    _fused_mul_exp_levels,
    _join,
    _join_seq,
    _mul_levels,
    _split,
    group_mul,
)

__all__ = [
    "SignatureOptions",
    "increments",
    "signature",
    "batch_signature",
    "signature_combine",
    "multi_signature_combine",
    "num_workers",
    "PARALLELISM",
    "MIN_CHUNK",
]

PARALLELISM = ("serial", "batch_parallel", "batch_and_stream_parallel")

# shortest chunk of increments worth a separate reduction
MIN_CHUNK = 8

WORKERS_ENV = "PATHSIG_NUM_THREADS"


def num_workers() -> int:
    """Worker count from ``PATHSIG_NUM_THREADS``, else the logical core count."""
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            n = int(value)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SignatureOptions:
    """Keyword options shared by the signature and logsignature transforms.

    ``basepoint`` is ``False``/``None`` (none), ``True`` (the origin) or an
    explicit vector (or batch of vectors) prepended to every stream.
    ``initial`` left-multiplies every result. ``inverse`` returns inverted
    signatures; in stream mode these are inverses of the expanding prefixes.
    """

    stream: bool = False
    basepoint: object = False
    initial: FreeTensor | None = None
    inverse: bool = False


def _as_path(path) -> np.ndarray:
    path = np.asarray(path, dtype=np.float64)
    if path.ndim < 2:
        raise ValueError(f"path must have shape (..., length, channels), got {path.shape}")
    return path


def _has_basepoint(basepoint) -> bool:
    if basepoint is None or basepoint is False:
        return False
    return True


def _prepend_basepoint(path: np.ndarray, basepoint) -> np.ndarray:
    if not _has_basepoint(basepoint):
        return path
    d = path.shape[-1]
    if basepoint is True:
        point = np.zeros(path.shape[:-2] + (d,))
    else:
        point = np.asarray(basepoint, dtype=np.float64)
        if point.shape[-1:] != (d,):
            raise ValueError(f"basepoint must have trailing dimension {d}, got shape {point.shape}")
        point = np.broadcast_to(point, path.shape[:-2] + (d,))
    return np.concatenate([point[..., None, :], path], axis=-2)


def increments(path, basepoint=False) -> np.ndarray:
    """Differences ``x_{i+1} - x_i`` along the stream axis.

    >>> increments([[0.0], [1.0], [3.0]]).ravel().tolist()
    [1.0, 2.0]
    """
    path = _prepend_basepoint(_as_path(path), basepoint)
    if path.shape[-2] < 2:
        raise ValueError(
            f"stream of length {path.shape[-2]} is too short; need at least 2 points "
            "(or 1 point with a basepoint)"
        )
    return np.diff(path, axis=-2)


def _check_initial(initial, spec: TruncationSpec, batch_shape):
    if initial is None:
        return None
    if not isinstance(initial, FreeTensor):
        initial = FreeTensor(spec, initial)
    if initial.spec != spec:
        raise ValueError(f"initial has spec {initial.spec}, expected {spec}")
    data = np.broadcast_to(initial.data, tuple(batch_shape) + (spec.size,))
    return FreeTensor(spec, data)


# --------------------------------------------------------------------------
# level-list reductions: z has shape (n, d, B), one (d, B) increment per step
# --------------------------------------------------------------------------


def _right_fold(z, spec, init=None, stream=False):
    """``init * exp(z_0) * exp(z_1) * ...``; one exp then fused steps.

    Returns a level list, or a list of level lists in stream mode.
    """
    if init is None:
        acc = _exp_levels(z[0], spec)
    else:
        acc = _fused_mul_exp_levels(init, z[0], spec)
    outs = [acc]
    for i in range(1, z.shape[0]):
        acc = _fused_mul_exp_levels(acc, z[i], spec)
        if stream:
            outs.append(acc)
    return outs if stream else acc


def _left_fold_inverse(z, spec, init=None):
    """Inverted expanding prefixes ``exp(-z_i) * ... * exp(-z_0)``, left-multiplied by ``init``."""
    acc = _exp_levels(-z[0], spec)
    outs = [acc]
    for i in range(1, z.shape[0]):
        acc = _fused_exp_mul_levels(-z[i], acc, spec)
        outs.append(acc)
    if init is not None:
        outs = [_mul_levels(init, o, spec.depth) for o in outs]
    return outs


def _chunked_right_fold(z, spec, init, n_chunks, executor):
    n = z.shape[0]
    bounds = np.linspace(0, n, n_chunks + 1).round().astype(int)

    def run(c):
        return _right_fold(z[bounds[c] : bounds[c + 1]], spec, init if c == 0 else None)

    if executor is None:
        pieces = [run(c) for c in range(n_chunks)]
    else:
        pieces = list(executor.map(run, range(n_chunks)))
    acc = pieces[0]
    for piece in pieces[1:]:
        acc = _mul_levels(acc, piece, spec.depth)
    return acc


def _forward_levels(z, spec, init, stream, inverse, n_chunks=1, executor=None):
    """Dispatch on options; returns a level list (a list of them in stream mode)."""
    if stream and inverse:
        return _left_fold_inverse(z, spec, init)
    if inverse:
        z = -z[::-1]
    if stream or n_chunks <= 1:
        return _right_fold(z, spec, init, stream)
    return _chunked_right_fold(z, spec, init, n_chunks, executor)


def _increment_steps(z, d):
    """(..., n, d) increments as an (n, d, B) array."""
    n = z.shape[-2]
    return np.ascontiguousarray(z.reshape(-1, n, d).transpose(1, 2, 0))


def _stream_chunks(n_increments, workers):
    return max(1, min(workers, math.ceil(n_increments / MIN_CHUNK)))


def signature(
    path,
    depth: int,
    *,
    stream: bool = False,
    basepoint=False,
    initial: FreeTensor | None = None,
    inverse: bool = False,
    parallelism: str = "serial",
    workers: int | None = None,
) -> FreeTensor:
    """Depth-``depth`` signature of ``path`` of shape ``(..., L, d)``.

    Returns a :class:`FreeTensor` with batch shape ``path.shape[:-2]``, or
    ``path.shape[:-2] + (L - 1,)`` in stream mode (one expanding prefix per
    entry, starting with the prefix of two points).

    With ``initial``, every result is ``initial * Sig``. With ``inverse``,
    results are ``Sig**-1``, computed as the signature of the reversed
    stream. ``parallelism`` is one of :data:`PARALLELISM`; results agree
    across settings up to floating point reassociation.
    """
    if parallelism not in PARALLELISM:
        raise ValueError(f"parallelism must be one of {PARALLELISM}, got {parallelism!r}")
    path = _as_path(path)
    spec = TruncationSpec(path.shape[-1], depth)
    z = increments(path, basepoint)
    batch_shape = z.shape[:-2]
    n = z.shape[-2]
    init = _check_initial(initial, spec, batch_shape)

    zs = _increment_steps(z, spec.channels)
    init_levels = _split(init)[0] if init is not None else None
    workers = workers if workers is not None else num_workers()

    def finish(result):
        if stream:
            return _join_seq(spec, result, batch_shape)
        return _join(spec, result, batch_shape)

    if parallelism == "serial" or workers == 1:
        n_chunks = _stream_chunks(n, workers) if parallelism == "batch_and_stream_parallel" else 1
        return finish(_forward_levels(zs, spec, init_levels, stream, inverse, n_chunks))

    b = zs.shape[2]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        if parallelism == "batch_and_stream_parallel" and not stream:
            n_chunks = _stream_chunks(n, workers)
            return finish(_forward_levels(zs, spec, init_levels, stream, inverse, n_chunks, executor))
        splits = np.array_split(np.arange(b), min(workers, b))

        def run(idx):
            sub_init = [lv[:, idx] for lv in init_levels] if init_levels is not None else None
            return _forward_levels(zs[:, :, idx], spec, sub_init, stream, inverse)

        parts = list(executor.map(run, splits))
    if stream:
        result = [
            [np.concatenate([p[i][k] for p in parts], axis=1) for k in range(spec.depth)]
            for i in range(n)
        ]
    else:
        result = [np.concatenate([p[k] for p in parts], axis=1) for k in range(spec.depth)]
    return finish(result)


def batch_signature(batch, depth: int, *, parallelism: str = "serial", workers: int | None = None, **options):
    """:func:`signature` for an explicit ``(b, L, d)`` batch."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3:
        raise ValueError(f"batch must have shape (b, L, d), got {batch.shape}")
    return signature(batch, depth, parallelism=parallelism, workers=workers, **options)


def signature_combine(a: FreeTensor, b: FreeTensor) -> FreeTensor:
    """Signature of the concatenation of two adjacent intervals."""
    return group_mul(a, b)


def multi_signature_combine(tensors) -> FreeTensor:
    """Left-to-right product of a non-empty sequence of signatures."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("multi_signature_combine needs at least one signature")
    acc = tensors[0]
    for t in tensors[1:]:
        acc = group_mul(acc, t)
    return acc
