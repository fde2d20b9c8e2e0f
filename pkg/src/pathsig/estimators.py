"""scikit-learn transformers wrapping the signature and logsignature.

Input ``X`` is a 3-d array of shape ``(n_samples, length, channels)``; each
sample is one stream. Output is a 2-d feature matrix, so the transformers
slot into :class:`sklearn.pipeline.Pipeline` ahead of any linear model.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .logsignature import LOGSIG_MODES, logsignature, logsignature_channels
from .lyndon import basis_index
from .signature import PARALLELISM, signature
from .tensor_algebra import TruncationSpec

__all__ = ["check_streams", "SignatureTransformer", "LogSignatureTransformer"]


def check_streams(X, *, min_length: int = 2, n_channels: int | None = None) -> np.ndarray:
    """Validate a batch of streams and return it as float64 ``(n, L, d)``.

    Raises ``ValueError`` for the wrong rank, non-finite entries, streams
    shorter than ``min_length``, or a channel count other than
    ``n_channels`` when that is given.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected a 3-d array (n_samples, length, channels), got shape {X.shape}")
    if X.shape[0] < 1:
        raise ValueError("need at least one sample")
    if X.shape[1] < min_length:
        raise ValueError(f"streams of length {X.shape[1]} are too short; need >= {min_length}")
    if X.shape[2] < 1:
        raise ValueError("streams need at least one channel")
    if not np.isfinite(X).all():
        raise ValueError("input contains NaN or infinity")
    if n_channels is not None and X.shape[2] != n_channels:
        raise ValueError(f"X has {X.shape[2]} channels, but this transformer was fitted with {n_channels}")
    return X


def _check_params(est):
    if isinstance(est.depth, bool) or not isinstance(est.depth, (int, np.integer)) or est.depth < 1:
        raise ValueError(f"depth must be a positive integer, got {est.depth!r}")
    if est.parallelism not in PARALLELISM:
        raise ValueError(f"parallelism must be one of {PARALLELISM}, got {est.parallelism!r}")


def _word_name(word, prefix):
    return prefix + "_".join(str(c) for c in word)


class _BaseSignatureTransformer(TransformerMixin, BaseEstimator):
    def _min_length(self):
        return 1 if self.basepoint is not False and self.basepoint is not None else 2

    def fit(self, X, y=None):
        """Validate parameters and record the channel count of ``X``."""
        _check_params(self)
        X = check_streams(X, min_length=self._min_length())
        self.n_channels_in_ = X.shape[2]
        self.spec_ = TruncationSpec(self.n_channels_in_, self.depth)
        self.n_features_out_ = self._n_out()
        return self

    def _validated(self, X):
        check_is_fitted(self, "spec_")
        return check_streams(X, min_length=self._min_length(), n_channels=self.n_channels_in_)

    def _options(self):
        return dict(basepoint=self.basepoint, inverse=self.inverse, parallelism=self.parallelism)


class SignatureTransformer(_BaseSignatureTransformer):
    """Depth-truncated signature features.

    Parameters
    ----------
    depth : int, default=3
    basepoint : bool or array-like, default=False
        ``True`` prepends the origin; a vector prepends that point.
    inverse : bool, default=False
    parallelism : {"serial", "batch_parallel", "batch_and_stream_parallel"}
    """

    def __init__(self, depth=3, basepoint=False, inverse=False, parallelism="serial"):
        self.depth = depth
        self.basepoint = basepoint
        self.inverse = inverse
        self.parallelism = parallelism

    def _n_out(self):
        return self.spec_.size

    def transform(self, X):
        X = self._validated(X)
        return signature(X, self.depth, **self._options()).data

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "spec_")
        names = [_word_name(self.spec_.offset_word(i), "S") for i in range(self.spec_.size)]
        return np.asarray(names, dtype=object)


class LogSignatureTransformer(_BaseSignatureTransformer):
    """Depth-truncated logsignature features.

    Parameters
    ----------
    depth : int, default=3
    mode : {"words", "brackets", "expanded"}, default="words"
    basepoint, inverse, parallelism : as :class:`SignatureTransformer`
    """

    def __init__(self, depth=3, mode="words", basepoint=False, inverse=False, parallelism="serial"):
        self.depth = depth
        self.mode = mode
        self.basepoint = basepoint
        self.inverse = inverse
        self.parallelism = parallelism

    def fit(self, X, y=None):
        if self.mode not in LOGSIG_MODES:
            raise ValueError(f"mode must be one of {LOGSIG_MODES}, got {self.mode!r}")
        return super().fit(X, y)

    def _n_out(self):
        return logsignature_channels(self.n_channels_in_, self.depth, self.mode)

    def transform(self, X):
        X = self._validated(X)
        return logsignature(X, self.depth, self.mode, **self._options())

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "spec_")
        if self.mode == "expanded":
            words = [self.spec_.offset_word(i) for i in range(self.spec_.size)]
        else:
            words = [tuple(c - 1 for c in w) for w in basis_index(self.spec_).words]
        return np.asarray([_word_name(w, "L") for w in words], dtype=object)
