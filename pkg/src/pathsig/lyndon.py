"""Lyndon words, their standard bracketing, and Witt's dimension formula.

Letters are 1-based here (``1..d``), matching the alphabet ``a_1 < ... < a_d``.
Everything that touches the flat tensor layout converts to 0-based channel
indices by subtracting one.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cost_model import MAX_COUNT
from .tensor_algebra import FreeTensor, TruncationSpec

__all__ = [
    "mobius",
    "witt_dimension",
    "is_lyndon",
    "enumerate_lyndon_words",
    "standard_factorization",
    "phi_expand",
    "psi_project",
    "lyndon_triangular_solve",
    "lyndon_reconstruct",
    "LyndonBasisIndex",
    "basis_index",
]


def mobius(n: int) -> int:
    if n < 1:
        raise ValueError(f"mobius is defined for n >= 1, got {n}")
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def _divisors(n):
    return [i for i in range(1, n + 1) if n % i == 0]


def witt_dimension(spec_or_channels, depth=None) -> int:
    """Dimension of the free Lie algebra truncated at ``depth``."""
    spec = spec_or_channels if isinstance(spec_or_channels, TruncationSpec) else TruncationSpec(spec_or_channels, depth)
    d = spec.channels
    total = 0
    for k in range(1, spec.depth + 1):
        inner = sum(mobius(k // i) * d**i for i in _divisors(k))
        q, r = divmod(inner, k)
        assert r == 0, "necklace count must be an integer"
        total += q
    if total > MAX_COUNT:
        raise OverflowError(f"Witt dimension for {spec} exceeds 128-bit range")
    return total


def is_lyndon(word) -> bool:
    """Strictly smaller than every nontrivial rotation."""
    word = tuple(word)
    if not word:
        return False
    return all(word < word[i:] + word[:i] for i in range(1, len(word)))


def _duval(d, n):
    # Duval's generation: yields every Lyndon word of length <= n in lex order
    w = [0]
    while w:
        yield tuple(letter + 1 for letter in w)
        m = len(w)
        while len(w) < n:
            w.append(w[len(w) - m])
        while w and w[-1] == d - 1:
            w.pop()
        if w:
            w[-1] += 1


def enumerate_lyndon_words(spec_or_channels, depth=None) -> list[tuple[int, ...]]:
    """All Lyndon words of length <= depth, sorted by (length, lexicographic)."""
    spec = spec_or_channels if isinstance(spec_or_channels, TruncationSpec) else TruncationSpec(spec_or_channels, depth)
    return sorted(_duval(spec.channels, spec.depth), key=lambda w: (len(w), w))


def standard_factorization(word) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split at the longest proper Lyndon suffix."""
    word = tuple(word)
    if len(word) < 2:
        raise ValueError("standard factorization needs a word of length >= 2")
    if not is_lyndon(word):
        raise ValueError(f"{word} is not a Lyndon word")
    for j in range(1, len(word)):
        if is_lyndon(word[j:]):
            return word[:j], word[j:]
    raise AssertionError("unreachable: the last letter is always Lyndon")


def _concat(a: dict, b: dict) -> dict:
    out: dict = {}
    for wa, ca in a.items():
        for wb, cb in b.items():
            key = wa + wb
            out[key] = out.get(key, 0) + ca * cb
    return out


@lru_cache(maxsize=None)
def _phi_cached(word):
    if len(word) == 1:
        return {word: 1}
    left, right = standard_factorization(word)
    pl, pr = _phi_cached(left), _phi_cached(right)
    out = _concat(pl, pr)
    for key, c in _concat(pr, pl).items():
        out[key] = out.get(key, 0) - c
    return {k: v for k, v in out.items() if v != 0}


def phi_expand(word) -> dict[tuple[int, ...], int]:
    """Integer word expansion of the Lyndon bracket of ``word``.

    >>> phi_expand((1, 2)) == {(1, 2): 1, (2, 1): -1}
    True
    """
    return dict(_phi_cached(tuple(word)))


@dataclass(frozen=True, eq=False)
class LyndonBasisIndex:
    """Lyndon words for a spec with their positions in the flat layout.

    ``matrices[k - 1]`` is the square block of ``psi . phi`` restricted to
    degree ``k``: entry ``[r, c]`` is the coefficient of Lyndon word ``r``
    in the expansion of Lyndon word ``c`` (lower unitriangular).
    """

    spec: TruncationSpec
    words: tuple[tuple[int, ...], ...]
    offsets: np.ndarray
    degree_slices: tuple[slice, ...]
    matrices: tuple[np.ndarray, ...]
    # per Lyndon word: flat offsets and integer coefficients of phi(word)
    expansions: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def dimension(self) -> int:
        return len(self.words)

    def __len__(self):
        return len(self.words)


def _build_index(spec: TruncationSpec) -> LyndonBasisIndex:
    words = enumerate_lyndon_words(spec)
    offsets = np.array([spec.word_offset([c - 1 for c in w]) for w in words], dtype=np.intp)
    position = {w: i for i, w in enumerate(words)}
    slices, matrices, expansions = [], [], []
    start = 0
    for k in range(1, spec.depth + 1):
        stop = start
        while stop < len(words) and len(words[stop]) == k:
            stop += 1
        slices.append(slice(start, stop))
        block = np.zeros((stop - start, stop - start))
        for col in range(start, stop):
            for w, c in _phi_cached(words[col]).items():
                row = position.get(w)
                if row is not None:
                    block[row - start, col - start] = c
        matrices.append(block)
        start = stop
    for w in words:
        expansion = _phi_cached(w)
        keys = sorted(expansion)
        expansions.append(
            (
                np.array([spec.word_offset([c - 1 for c in key]) for key in keys], dtype=np.intp),
                np.array([expansion[key] for key in keys], dtype=np.float64),
            )
        )
    return LyndonBasisIndex(
        spec=spec,
        words=tuple(words),
        offsets=offsets,
        degree_slices=tuple(slices),
        matrices=tuple(matrices),
        expansions=tuple(expansions),
    )


_index_cache: dict[TruncationSpec, LyndonBasisIndex] = {}
_index_lock = threading.Lock()


def basis_index(spec_or_channels, depth=None) -> LyndonBasisIndex:
    """Shared, lazily built :class:`LyndonBasisIndex` for a spec."""
    spec = spec_or_channels if isinstance(spec_or_channels, TruncationSpec) else TruncationSpec(spec_or_channels, depth)
    index = _index_cache.get(spec)
    if index is None:
        with _index_lock:
            index = _index_cache.get(spec)
            if index is None:
                index = _build_index(spec)
                _index_cache[spec] = index
    return index


def _check_index(tensor: FreeTensor, index: LyndonBasisIndex):
    if tensor.spec != index.spec:
        raise ValueError(f"spec mismatch: tensor {tensor.spec} vs index {index.spec}")


def psi_project(tensor: FreeTensor, index: LyndonBasisIndex | None = None) -> np.ndarray:
    """Coefficients of ``tensor`` at the Lyndon words, in basis order."""
    index = index if index is not None else basis_index(tensor.spec)
    _check_index(tensor, index)
    return tensor.data[..., index.offsets]


def lyndon_triangular_solve(tensor: FreeTensor, index: LyndonBasisIndex | None = None) -> np.ndarray:
    """Lyndon-bracket coefficients ``alpha`` with ``sum alpha_l phi(l) == tensor``.

    Only the Lyndon-word coordinates of ``tensor`` are read. Within each
    degree, words are visited in lexicographic order and solved by forward
    substitution against the unit lower triangular block.
    """
    index = index if index is not None else basis_index(tensor.spec)
    _check_index(tensor, index)
    rhs = psi_project(tensor, index)
    alpha = np.empty_like(rhs)
    for sl, block in zip(index.degree_slices, index.matrices):
        for r in range(block.shape[0]):
            row = sl.start + r
            alpha[..., row] = rhs[..., row] - alpha[..., sl.start : row] @ block[r, :r]
    return alpha


def _triangular_solve_adjoint(grad_alpha, index: LyndonBasisIndex) -> np.ndarray:
    """Adjoint of :func:`lyndon_triangular_solve` with respect to its Lyndon coordinates."""
    grad = np.array(grad_alpha, dtype=np.float64, copy=True)
    out = np.empty_like(grad)
    for sl, block in zip(index.degree_slices, index.matrices):
        n = block.shape[0]
        # back substitution with the transposed block
        for r in range(n - 1, -1, -1):
            row = sl.start + r
            out[..., row] = grad[..., row] - out[..., row + 1 : sl.stop] @ block[r + 1 :, r]
    return out


def lyndon_reconstruct(alpha, index: LyndonBasisIndex) -> FreeTensor:
    """``sum alpha_l phi(l)`` as a (Lie) FreeTensor."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape[-1] != index.dimension:
        raise ValueError(f"expected {index.dimension} coefficients, got {alpha.shape[-1]}")
    data = np.zeros(alpha.shape[:-1] + (index.spec.size,))
    for i, (offs, coeffs) in enumerate(index.expansions):
        data[..., offs] += alpha[..., i, None] * coeffs
    return FreeTensor(index.spec, data)
