"""Arithmetic in the depth-truncated tensor algebra.

Elements are stored level-major: level ``k`` is a block of ``d**k``
coefficients, with the coefficient of the word ``(j_1, ..., j_k)`` (0-based
letters) at offset ``sum(j_m * d**(k - m))`` inside its block. The scalar
term is never stored. Group elements (signatures) carry an implicit scalar
of 1, Lie elements (logsignatures) an implicit scalar of 0; which one
applies is part of each operation's contract.

All kernels accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "TruncationSpec",
    "FreeTensor",
    "signature_length",
    "outer_product",
    "group_mul",
    "tensor_exp",
    "tensor_log",
    "group_inverse",
    "fused_mul_exp",
    "fused_exp_mul",
]


def signature_length(channels: int, depth: int) -> int:
    """Number of stored coefficients, ``d + d**2 + ... + d**N``."""
    return sum(channels**k for k in range(1, depth + 1))


@dataclass(frozen=True)
class TruncationSpec:
    """Channel count ``channels`` (d) and truncation depth ``depth`` (N)."""

    channels: int
    depth: int

    def __post_init__(self):
        for name in ("channels", "depth"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        object.__setattr__(self, "channels", int(self.channels))
        object.__setattr__(self, "depth", int(self.depth))

    @cached_property
    def level_sizes(self) -> tuple[int, ...]:
        return tuple(self.channels**k for k in range(1, self.depth + 1))

    @cached_property
    def level_offsets(self) -> tuple[int, ...]:
        """Start offset of each level; has ``depth + 1`` entries."""
        return tuple(np.concatenate([[0], np.cumsum(self.level_sizes)]).tolist())

    @property
    def size(self) -> int:
        return self.level_offsets[-1]

    @cached_property
    def reciprocals(self) -> np.ndarray:
        """``1/j`` for ``j = 0..depth`` (entry 0 unused)."""
        out = np.zeros(self.depth + 1)
        out[1:] = 1.0 / np.arange(1, self.depth + 1)
        return out

    def word_offset(self, word) -> int:
        """Flat offset of a 0-based word in the full level-major layout."""
        k = len(word)
        if not 1 <= k <= self.depth:
            raise ValueError(f"word length {k} outside 1..{self.depth}")
        index = 0
        for letter in word:
            if not 0 <= letter < self.channels:
                raise ValueError(f"letter {letter} outside 0..{self.channels - 1}")
            index = index * self.channels + int(letter)
        return self.level_offsets[k - 1] + index

    def offset_word(self, offset: int) -> tuple[int, ...]:
        """Inverse of :meth:`word_offset`."""
        if not 0 <= offset < self.size:
            raise ValueError(f"offset {offset} outside 0..{self.size - 1}")
        k = int(np.searchsorted(self.level_offsets, offset, side="right"))
        index = offset - self.level_offsets[k - 1]
        letters = []
        for _ in range(k):
            index, letter = divmod(index, self.channels)
            letters.append(letter)
        return tuple(reversed(letters))


@dataclass(frozen=True)
class FreeTensor:
    """A (possibly batched) element of the truncated tensor algebra.

    ``data`` has shape ``batch_shape + (spec.size,)``.
    """

    spec: TruncationSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 0 or data.shape[-1] != self.spec.size:
            raise ValueError(
                f"expected trailing dimension {self.spec.size} for {self.spec}, "
                f"got shape {data.shape}"
            )
        object.__setattr__(self, "data", data)

    @classmethod
    def identity(cls, spec: TruncationSpec, batch_shape=()) -> FreeTensor:
        return cls(spec, np.zeros(tuple(batch_shape) + (spec.size,)))

    @classmethod
    def from_levels(cls, spec: TruncationSpec, levels) -> FreeTensor:
        return cls(spec, np.concatenate([np.asarray(lv, dtype=np.float64) for lv in levels], axis=-1))

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.data.shape[:-1]

    @property
    def levels(self) -> list[np.ndarray]:
        """Views onto each level block, ``levels[k - 1]`` is level ``k``."""
        o = self.spec.level_offsets
        return [self.data[..., o[k] : o[k + 1]] for k in range(self.spec.depth)]

    def level(self, k: int) -> np.ndarray:
        o = self.spec.level_offsets
        return self.data[..., o[k - 1] : o[k]]

    def __getitem__(self, item) -> FreeTensor:
        if not self.batch_shape:
            raise IndexError("cannot index an unbatched FreeTensor")
        return FreeTensor(self.spec, self.data[item])

    def __len__(self):
        if not self.batch_shape:
            raise TypeError("unbatched FreeTensor has no len()")
        return self.batch_shape[0]

    def __matmul__(self, other: FreeTensor) -> FreeTensor:
        return group_mul(self, other)

    def allclose(self, other: FreeTensor, rtol=1e-12, atol=0.0) -> bool:
        return self.spec == other.spec and np.allclose(self.data, other.data, rtol=rtol, atol=atol)


# --------------------------------------------------------------------------
# level-list kernels
#
# These operate on lists of arrays of shape (d**k, B), batch axis last so the
# innermost loops of every outer product run over the batch. ``counter`` (a
# one-element list) tallies scalar multiplications per tensor, i.e. per batch
# element.
# --------------------------------------------------------------------------


def _split(t: FreeTensor):
    batch_shape = t.batch_shape
    flat = t.data.reshape(-1, t.spec.size)
    o = t.spec.level_offsets
    return [np.ascontiguousarray(flat[:, o[k] : o[k + 1]].T) for k in range(t.spec.depth)], batch_shape


def _join(spec, levels, batch_shape) -> FreeTensor:
    data = np.concatenate(levels, axis=0).T
    return FreeTensor(spec, data.reshape(tuple(batch_shape) + (spec.size,)))


def _join_seq(spec, seq, batch_shape) -> FreeTensor:
    """Join a sequence of level lists into batch shape ``batch_shape + (n,)``."""
    data = np.stack([np.concatenate(levels, axis=0) for levels in seq], axis=0)
    data = data.transpose(2, 0, 1)
    return FreeTensor(spec, data.reshape(tuple(batch_shape) + (len(seq), spec.size)))


def _vectors(z, d):
    """(..., d) increments as a (d, B) array."""
    return np.ascontiguousarray(z.reshape(-1, d).T)


def _outer(a: np.ndarray, b: np.ndarray, counter=None) -> np.ndarray:
    """Batched outer product of (m, B) and (n, B) into (m*n, B)."""
    out = (a[:, None, :] * b[None, :, :]).reshape(-1, a.shape[-1])
    if counter is not None:
        counter[0] += out.shape[0]
    return out


def _check_same_spec(a: FreeTensor, b: FreeTensor):
    if a.spec != b.spec:
        raise ValueError(f"spec mismatch: {a.spec} vs {b.spec}")


def _broadcast_pair(a: FreeTensor, b: FreeTensor):
    shape = np.broadcast_shapes(a.batch_shape, b.batch_shape)
    if a.batch_shape != shape:
        a = FreeTensor(a.spec, np.broadcast_to(a.data, shape + (a.spec.size,)))
    if b.batch_shape != shape:
        b = FreeTensor(b.spec, np.broadcast_to(b.data, shape + (b.spec.size,)))
    return a, b


def _mul_levels(a, b, depth, counter=None, scalars=True):
    """Level list of ``a * b``; with ``scalars`` both carry implicit scalar 1."""
    out = []
    for k in range(1, depth + 1):
        if scalars:
            acc = a[k - 1] + b[k - 1]
        else:
            acc = np.zeros_like(a[k - 1])
        for i in range(1, k):
            acc += _outer(a[i - 1], b[k - i - 1], counter)
        out.append(acc)
    return out


def _exp_levels(z, spec, counter=None):
    recip = spec.reciprocals
    levels = [z.copy()]
    for k in range(2, spec.depth + 1):
        scaled = z * recip[k]
        if counter is not None:
            counter[0] += spec.channels
        levels.append(_outer(levels[-1], scaled, counter))
    return levels


def _scaled_increments(z, spec, counter=None):
    """``[None, z, z/2, ..., z/N]`` using precomputed reciprocals."""
    recip = spec.reciprocals
    scaled = [None, z]
    for j in range(2, spec.depth + 1):
        scaled.append(z * recip[j])
    if counter is not None:
        counter[0] += spec.channels * (spec.depth - 1)
    return scaled


def _fused_mul_exp_levels(a, z, spec, counter=None):
    """Level list of ``a * exp(z)`` by the nested Horner evaluation.

    Level k is ``((z/k + a_1) (x) z/(k-1) + a_2) (x) ... (x) z + a_k``; its
    outer products have sizes d**2, ..., d**k.
    """
    scaled = _scaled_increments(z, spec, counter)
    out = [a[0] + z]
    for k in range(2, spec.depth + 1):
        t = scaled[k] + a[0]
        for j in range(1, k):
            t = _outer(t, scaled[k - j], counter)
            t += a[j]
        out.append(t)
    return out


def _fused_exp_mul_levels(z, a, spec, counter=None):
    """Level list of ``exp(z) * a``, the mirror image of the right kernel.

    Level k is ``z (x) (z/2 (x) (... (z/k + a_1) ...) + a_{k-1}) + a_k``
    built from the innermost bracket outward.
    """
    scaled = _scaled_increments(z, spec, counter)
    out = [a[0] + z]
    for k in range(2, spec.depth + 1):
        t = scaled[k] + a[0]
        for j in range(1, k):
            t = _outer(scaled[k - j], t, counter)
            t += a[j]
        out.append(t)
    return out


def _log_levels(x, depth, counter=None):
    """Truncated ``log(1 + x)`` for a level list ``x`` with zero scalar."""
    result = [lv.copy() for lv in x]
    power = x
    for k in range(2, depth + 1):
        power = _mul_levels(power, x, depth, counter, scalars=False)
        coeff = (1.0 if k % 2 else -1.0) / k
        for m in range(k, depth + 1):
            result[m - 1] += coeff * power[m - 1]
    return result


def _inverse_levels(x, depth):
    """Truncated ``(1 + x)**-1 = sum_k (-x)**k`` for zero-scalar ``x``."""
    neg = [-lv for lv in x]
    result = [lv.copy() for lv in neg]
    power = neg
    for _ in range(2, depth + 1):
        power = _mul_levels(power, neg, depth, scalars=False)
        for m in range(depth):
            result[m] += power[m]
    return result


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


def outer_product(a, b, spec: TruncationSpec) -> np.ndarray:
    """Tensor product of a level-i block and a level-j block.

    Blocks may carry leading batch dimensions, which must broadcast.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = spec.channels
    i = _block_level(a.shape[-1], d)
    j = _block_level(b.shape[-1], d)
    if i + j > spec.depth:
        raise ValueError(f"level overflow: {i} + {j} > depth {spec.depth}")
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (d ** (i + j),))


def _block_level(n, d):
    if d == 1:
        # every level has one entry; the caller's level is ambiguous, treat as 1
        if n != 1:
            raise ValueError(f"block of length {n} is not a level block for d=1")
        return 1
    k, size = 0, 1
    while size < n:
        size *= d
        k += 1
    if size != n or k == 0:
        raise ValueError(f"block of length {n} is not a power of {d}")
    return k


def group_mul(a: FreeTensor, b: FreeTensor) -> FreeTensor:
    """The truncated product of two group elements (implicit scalar 1)."""
    _check_same_spec(a, b)
    a, b = _broadcast_pair(a, b)
    la, shape = _split(a)
    lb, _ = _split(b)
    return _join(a.spec, _mul_levels(la, lb, a.spec.depth), shape)


def _as_increment(z, spec):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 0 or z.shape[-1] != spec.channels:
        raise ValueError(f"expected trailing dimension {spec.channels}, got shape {z.shape}")
    return z


def tensor_exp(z, spec: TruncationSpec) -> FreeTensor:
    """``(z, z**2/2!, ..., z**N/N!)`` for a vector (or batch of vectors) ``z``."""
    z = _as_increment(z, spec)
    shape = z.shape[:-1]
    return _join(spec, _exp_levels(_vectors(z, spec.channels), spec), shape)


def tensor_log(a: FreeTensor) -> FreeTensor:
    """Truncated logarithm of a group element; the result is a Lie element."""
    la, shape = _split(a)
    return _join(a.spec, _log_levels(la, a.spec.depth), shape)


def group_inverse(a: FreeTensor) -> FreeTensor:
    la, shape = _split(a)
    return _join(a.spec, _inverse_levels(la, a.spec.depth), shape)


def fused_mul_exp(a: FreeTensor, z) -> FreeTensor:
    """``a * exp(z)`` in one pass, without forming ``exp(z)``."""
    z = _as_increment(z, a.spec)
    shape = np.broadcast_shapes(a.batch_shape, z.shape[:-1])
    a = FreeTensor(a.spec, np.broadcast_to(a.data, shape + (a.spec.size,)))
    z = _vectors(np.broadcast_to(z, shape + (a.spec.channels,)), a.spec.channels)
    la, _ = _split(a)
    return _join(a.spec, _fused_mul_exp_levels(la, z, a.spec), shape)


def fused_exp_mul(z, a: FreeTensor) -> FreeTensor:
    """``exp(z) * a`` in one pass; the left-multiplying counterpart."""
    z = _as_increment(z, a.spec)
    shape = np.broadcast_shapes(a.batch_shape, z.shape[:-1])
    a = FreeTensor(a.spec, np.broadcast_to(a.data, shape + (a.spec.size,)))
    z = _vectors(np.broadcast_to(z, shape + (a.spec.channels,)), a.spec.channels)
    la, _ = _split(a)
    return _join(a.spec, _fused_exp_mul_levels(z, la, a.spec), shape)
