"""Precomputed prefix signatures for constant-time interval queries.

Indexing is 0-based with both ends inclusive: ``query_signature(i, j)``
is the signature of points ``x[i], ..., x[j]`` for ``0 <= i < j < L``.
Internally prefix entry ``p`` holds the signature of ``x[0..p+1]``.

Queries combine an inverted prefix with a forward prefix, so their
accuracy degrades for long streams where the prefixes grow large;
:meth:`PathIndex.stability_error` reports how far ``inverted * forward``
has drifted from the identity.
"""

from __future__ import annotations

import warnings

import numpy as np

from .lyndon import basis_index
from .logsignature import _check_mode, project_log
from .tensor_algebra import (
    FreeTensor,
    TruncationSpec,
    _exp_levels,
    _fused_exp_mul_levels,
    _fused_mul_exp_levels,
    _mul_levels,
    group_mul,
    tensor_log,
)

__all__ = ["PathIndex"]

# prefix length after which build() warns about query conditioning
LONG_STREAM_WARNING = 100_000


class PathIndex:
    """Stream plus its forward and inverted prefix signatures.

    Instances are immutable; :meth:`update` returns a new index.

    Parameters
    ----------
    path : array of shape (L, d), L >= 2
    depth : truncation depth
    inverted : bool, default True
        Also keep inverted prefixes. Without them only queries starting at
        point 0 are possible, at half the storage.
    """

    def __init__(self, path, depth: int, inverted: bool = True):
        path = np.array(path, dtype=np.float64)
        if path.ndim != 2:
            raise ValueError(f"path must have shape (L, d), got {path.shape}")
        if path.shape[0] < 2:
            raise ValueError("path needs at least 2 points")
        self.spec = TruncationSpec(path.shape[1], depth)
        self.has_inverted = bool(inverted)
        self.n_exponentials = 0
        self.n_fused_ops = 0
        z = np.diff(path, axis=0)
        first = _exp_levels(z[0][:, None], self.spec)
        self.n_exponentials += 1
        forward = self._extend_forward(np.concatenate(first)[:, 0], z[1:])
        inverse = None
        if self.has_inverted:
            first = _exp_levels(-z[0][:, None], self.spec)
            self.n_exponentials += 1
            inverse = self._extend_inverted(np.concatenate(first)[:, 0], z[1:])
        self._set(path, forward, inverse)
        if len(path) > LONG_STREAM_WARNING and self.has_inverted:
            warnings.warn(
                "interval queries on long streams may lose accuracy; "
                "check PathIndex.stability_error()",
                RuntimeWarning,
                stacklevel=2,
            )

    def _set(self, path, forward, inverse):
        self._path = path
        self._path.setflags(write=False)
        forward.setflags(write=False)
        self._forward = forward
        if inverse is not None:
            inverse.setflags(write=False)
        self._inverted = inverse

    def _levels(self, row):
        o = self.spec.level_offsets
        return [row[o[k] : o[k + 1], None] for k in range(self.spec.depth)]

    def _extend_forward(self, last, z):
        rows = [last]
        cur = self._levels(last)
        for inc in z:
            cur = _fused_mul_exp_levels(cur, inc[:, None], self.spec)
            self.n_fused_ops += 1
            rows.append(np.concatenate(cur)[:, 0])
        return np.stack(rows)

    def _extend_inverted(self, last, z):
        rows = [last]
        cur = self._levels(last)
        for inc in z:
            cur = _fused_exp_mul_levels(-inc[:, None], cur, self.spec)
            self.n_fused_ops += 1
            rows.append(np.concatenate(cur)[:, 0])
        return np.stack(rows)

    # --- accessors -----------------------------------------------------

    @property
    def path(self) -> np.ndarray:
        return self._path

    @property
    def depth(self) -> int:
        return self.spec.depth

    @property
    def channels(self) -> int:
        return self.spec.channels

    def __len__(self):
        return self._path.shape[0]

    @property
    def forward(self) -> FreeTensor:
        """Signatures of ``x[0..j]`` for ``j = 1..L-1``."""
        return FreeTensor(self.spec, self._forward)

    @property
    def inverted(self) -> FreeTensor:
        """Inverted signatures of ``x[0..j]`` for ``j = 1..L-1``."""
        if self._inverted is None:
            raise ValueError("this index was built with inverted=False")
        return FreeTensor(self.spec, self._inverted)

    @property
    def n_stored_tensors(self) -> int:
        return self._forward.shape[0] + (0 if self._inverted is None else self._inverted.shape[0])

    # --- queries -------------------------------------------------------

    def _check_interval(self, start, end):
        length = len(self)
        if not (0 <= start < length and 0 <= end < length):
            raise IndexError(f"interval ({start}, {end}) outside 0..{length - 1}")
        if end <= start:
            raise ValueError(f"interval needs end > start, got ({start}, {end})")

    def query_signature(self, start: int, end: int) -> FreeTensor:
        """Signature of ``x[start..end]`` (both inclusive) in O(1) in ``L``."""
        start, end = int(start), int(end)
        self._check_interval(start, end)
        fwd = FreeTensor(self.spec, self._forward[end - 1])
        if start == 0:
            return fwd
        if self._inverted is None:
            raise ValueError("queries not starting at 0 need inverted prefixes")
        return group_mul(FreeTensor(self.spec, self._inverted[start - 1]), fwd)

    def query_logsignature(self, start: int, end: int, mode: str = "words") -> np.ndarray:
        _check_mode(mode)
        log = tensor_log(self.query_signature(start, end))
        index = basis_index(self.spec) if mode != "expanded" else None
        return project_log(log, mode, index)

    # --- maintenance ---------------------------------------------------

    def update(self, new_points) -> PathIndex:
        """Index of the stream extended by ``new_points`` (shape (M, d))."""
        new_points = np.asarray(new_points, dtype=np.float64)
        if new_points.size == 0:
            new_points = new_points.reshape(0, self.channels)
        if new_points.ndim != 2 or new_points.shape[1] != self.channels:
            raise ValueError(f"new points must have shape (M, {self.channels}), got {new_points.shape}")
        if new_points.shape[0] == 0:
            return self
        out = object.__new__(PathIndex)
        out.spec = self.spec
        out.has_inverted = self.has_inverted
        out.n_exponentials = self.n_exponentials
        out.n_fused_ops = self.n_fused_ops
        z = np.diff(np.concatenate([self._path[-1:], new_points]), axis=0)
        forward = np.concatenate([self._forward, out._extend_forward(self._forward[-1], z)[1:]])
        inverse = None
        if self._inverted is not None:
            inverse = np.concatenate([self._inverted, out._extend_inverted(self._inverted[-1], z)[1:]])
        out._set(np.concatenate([self._path, new_points]), forward, inverse)
        return out

    def stability_error(self) -> float:
        """Max over prefixes of ``|| inverted * forward - identity ||_inf``."""
        if self._inverted is None:
            raise ValueError("this index was built with inverted=False")
        o = self.spec.level_offsets
        fwd = [self._forward[:, o[k] : o[k + 1]].T for k in range(self.depth)]
        inv = [self._inverted[:, o[k] : o[k + 1]].T for k in range(self.depth)]
        prod = _mul_levels(inv, fwd, self.depth)
        return float(max(np.abs(p).max() for p in prod))

    def __repr__(self):
        return f"PathIndex(length={len(self)}, channels={self.channels}, depth={self.depth})"
