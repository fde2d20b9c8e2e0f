import warnings

import numpy as np
import pytest

import oracles
from pathsig import LOGSIG_MODES, FreeTensor, PathIndex, TruncationSpec, logsignature, signature, tensor_exp, witt_dimension
from pathsig import path as path_mod


@pytest.fixture
def stream(rng):
    return oracles.random_path(rng, 12, 3)


def test_two_points(rng):
    x = rng.normal(size=(2, 2))
    index = PathIndex(x, 3)
    spec = TruncationSpec(2, 3)
    np.testing.assert_allclose(index.forward.data[0], tensor_exp(x[1] - x[0], spec).data, rtol=1e-15)
    np.testing.assert_allclose(index.inverted.data[0], tensor_exp(x[0] - x[1], spec).data, rtol=1e-15)


def test_constant_stream_is_identity(rng):
    index = PathIndex(np.tile(rng.normal(size=2), (5, 1)), 3)
    assert not index.forward.data.any() and not index.inverted.data.any()


def test_forward_prefixes_match_direct(stream):
    index = PathIndex(stream, 4)
    for j in range(len(stream) - 1):
        assert oracles.rel_err(index.forward.data[j], signature(stream[: j + 2], 4).data) <= 1e-11
        product = index.inverted[j] @ index.forward[j]
        assert np.abs(product.data).max() <= 1e-10


def test_shape_and_counts(stream):
    index = PathIndex(stream, 3)
    length = len(stream)
    assert len(index) == length
    assert index.forward.batch_shape == index.inverted.batch_shape == (length - 1,)
    assert index.n_stored_tensors == 2 * (length - 1)
    assert index.n_exponentials == 2
    assert index.n_fused_ops == 2 * (length - 1) - 2


def test_all_intervals(rng):
    x = oracles.random_path(rng, 20, 3)
    index = PathIndex(x, 4)
    for i in range(20):
        for j in range(i + 1, 20):
            assert oracles.rel_err(index.query_signature(i, j).data, signature(x[i : j + 1], 4).data) <= 1e-9


def test_query_shortcuts(stream):
    index = PathIndex(stream, 3)
    last = len(stream) - 1
    np.testing.assert_array_equal(index.query_signature(0, last).data, index.forward.data[-1])
    pair = index.query_signature(4, 5)
    assert oracles.rel_err(pair.data, tensor_exp(stream[5] - stream[4], pair.spec).data) <= 1e-12


@pytest.mark.parametrize("mode", LOGSIG_MODES)
def test_query_logsignature(stream, mode):
    index = PathIndex(stream, 3)
    out = index.query_logsignature(2, 9, mode)
    np.testing.assert_allclose(out, logsignature(stream[2:10], 3, mode), rtol=1e-10, atol=1e-13)
    pair = index.query_logsignature(3, 4, "expanded")
    np.testing.assert_allclose(pair[:3], stream[4] - stream[3], rtol=1e-12)
    assert np.abs(pair[3:]).max() <= 1e-13


def test_brackets_length(stream):
    assert PathIndex(stream, 4).query_logsignature(0, 5, "brackets").shape == (witt_dimension(3, 4),)


@pytest.mark.parametrize("start, end, error", [(3, 3, ValueError), (5, 2, ValueError), (-1, 4, IndexError), (0, 12, IndexError)])
def test_bad_intervals(stream, start, end, error):
    with pytest.raises(error):
        PathIndex(stream, 2).query_signature(start, end)


def test_too_short():
    with pytest.raises(ValueError):
        PathIndex([[1.0, 2.0]], 2)
    with pytest.raises(ValueError):
        PathIndex([1.0, 2.0, 3.0], 2)


def test_without_inverted(stream):
    index = PathIndex(stream, 3, inverted=False)
    assert index.n_stored_tensors == len(stream) - 1
    index.query_signature(0, 6)
    with pytest.raises(ValueError):
        index.query_signature(1, 6)
    with pytest.raises(ValueError):
        index.inverted


def test_immutable(stream):
    index = PathIndex(stream, 2)
    with pytest.raises(ValueError):
        index.forward.data[0, 0] = 1.0
    with pytest.raises(ValueError):
        index.path[0, 0] = 1.0


def test_update(rng, stream):
    extra = rng.uniform(-1, 1, size=(5, 3))
    index = PathIndex(stream, 4)
    updated = index.update(extra)
    full = np.vstack([stream, extra])
    assert len(updated) == len(full) and len(index) == len(stream)
    assert oracles.rel_err(updated.query_signature(0, len(full) - 1).data, signature(full, 4).data) <= 1e-10
    rebuilt = PathIndex(full, 4)
    assert np.abs(updated.forward.data - rebuilt.forward.data).max() <= 1e-12
    assert np.abs(updated.inverted.data - rebuilt.inverted.data).max() <= 1e-12
    assert updated.n_fused_ops == index.n_fused_ops + 2 * len(extra)
    assert index.update(np.empty((0, 3))) is index
    with pytest.raises(ValueError):
        index.update(np.zeros((2, 2)))


def test_stability_diagnostic(stream):
    assert PathIndex(stream, 4).stability_error() <= 1e-12


def test_long_stream_warns(rng, monkeypatch):
    monkeypatch.setattr(path_mod, "LONG_STREAM_WARNING", 10)
    with pytest.warns(RuntimeWarning):
        PathIndex(rng.normal(size=(11, 2)), 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PathIndex(rng.normal(size=(11, 2)), 2, inverted=False)


def test_repr_and_types(stream):
    index = PathIndex(stream, 2)
    assert "length=12" in repr(index)
    assert isinstance(index.query_signature(1, 3), FreeTensor)
