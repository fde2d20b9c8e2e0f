"""Scalar multiplication counts for one ``A * exp(z)`` step.

``conventional_cost`` is the cost of forming ``exp(z)`` (credited with the
cheaper symmetric-tensor count) followed by a dense product;
``fused_cost`` is the cost of the nested Horner evaluation.
All counts are exact Python integers, capped at ``MAX_COUNT``.
"""

from __future__ import annotations

from math import comb

import numpy as np

from .tensor_algebra import FreeTensor, TruncationSpec, _as_increment, _fused_mul_exp_levels, _join, _split, _vectors

__all__ = [
    "MAX_COUNT",
    "conventional_cost",
    "fused_cost",
    "fused_cost_closed_form",
    "counted_fused_mul_exp",
]

# counts must fit a signed 128-bit integer
MAX_COUNT = 2**127 - 1


def _checked(value: int, spec: TruncationSpec) -> int:
    if value > MAX_COUNT:
        raise OverflowError(f"multiplication count for {spec} exceeds 128-bit range")
    return value


def _spec(spec_or_channels, depth=None) -> TruncationSpec:
    if isinstance(spec_or_channels, TruncationSpec):
        return spec_or_channels
    return TruncationSpec(spec_or_channels, depth)


def conventional_cost(spec_or_channels, depth=None) -> int:
    """Symmetric exponential plus naive product.

    >>> conventional_cost(2, 2)
    9
    """
    spec = _spec(spec_or_channels, depth)
    d, n = spec.channels, spec.depth
    exp_part = sum(d + comb(d + k - 1, k) for k in range(2, n + 1))
    mul_part = sum((k - 1) * d**k for k in range(1, n + 1))
    return _checked(exp_part + mul_part, spec)


def fused_cost(spec_or_channels, depth=None) -> int:
    """Reciprocal scaling plus the Horner outer products of every level.

    >>> fused_cost(3, 2)
    12
    """
    spec = _spec(spec_or_channels, depth)
    d, n = spec.channels, spec.depth
    total = d * (n - 1) + sum(d**i for k in range(1, n + 1) for i in range(2, k + 1))
    return _checked(total, spec)


def fused_cost_closed_form(spec_or_channels, depth=None) -> int:
    """Closed form of :func:`fused_cost`, valid for ``channels >= 2``."""
    spec = _spec(spec_or_channels, depth)
    d, n = spec.channels, spec.depth
    if d < 2:
        raise ValueError("closed form requires channels >= 2")
    num = d ** (n + 2) - d**3 - (n - 1) * d**2 + (n - 1) * d
    q, r = divmod(num, (d - 1) ** 2)
    assert r == 0
    return _checked(q, spec)


def counted_fused_mul_exp(a: FreeTensor, z) -> tuple[FreeTensor, int]:
    """:func:`~pathsig.tensor_algebra.fused_mul_exp` plus its per-tensor multiplication tally."""
    z = _as_increment(z, a.spec)
    shape = np.broadcast_shapes(a.batch_shape, z.shape[:-1])
    a = FreeTensor(a.spec, np.broadcast_to(a.data, shape + (a.spec.size,)))
    z = _vectors(np.broadcast_to(z, shape + (a.spec.channels,)), a.spec.channels)
    la, _ = _split(a)
    counter = [0]
    levels = _fused_mul_exp_levels(la, z, a.spec, counter)
    return _join(a.spec, levels, shape), counter[0]
