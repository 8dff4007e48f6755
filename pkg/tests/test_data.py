import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tlnmemory.data import (bundled_mnist, corrupt, load_idx, load_model, model_bytes,
                            sample_sequence, save_model, synthetic_patterns, write_idx)
from tlnmemory.errors import (BadMagicError, ChecksumError, CountMismatchError, ParameterError,
                              TruncatedFileError, UnsupportedVersionError)
from tlnmemory.memory import MemoryModel, bind_sequence
from tlnmemory.network import CstlnParams, build_network


@pytest.fixture
def two_images(tmp_path):
    imgs = np.zeros((2, 2, 2), dtype=np.uint8)
    imgs[0] = [[255, 0], [0, 0]]
    imgs[1] = [[0, 255], [255, 0]]
    pi, pl = tmp_path / "img.idx", tmp_path / "lab.idx"
    write_idx(pi, imgs, pl, [3, 7])
    return pi, pl


def test_idx_roundtrip(two_images):
    pi, pl = two_images
    assert pi.stat().st_size == 16 + 8
    assert pl.stat().st_size == 8 + 2
    ps = load_idx(pi, pl)
    np.testing.assert_allclose(ps.patterns, [[1, 0, 0, 0], [0, 1 / np.sqrt(2), 1 / np.sqrt(2), 0]])
    assert ps.labels.tolist() == [3, 7]
    raw = load_idx(pi, normalize=False)
    np.testing.assert_allclose(raw.patterns[1], [0, 1, 1, 0])


def test_idx_bad_magic(tmp_path, two_images):
    pi, _ = two_images
    buf = bytearray(pi.read_bytes())
    buf[:4] = struct.pack(">I", 0x802)
    bad = tmp_path / "bad.idx"
    bad.write_bytes(bytes(buf))
    with pytest.raises(BadMagicError, match="0x00000802"):
        load_idx(bad)


def test_idx_truncated_reports_offset(tmp_path, two_images):
    pi, _ = two_images
    cut = tmp_path / "cut.idx"
    cut.write_bytes(pi.read_bytes()[:21])
    with pytest.raises(TruncatedFileError) as exc:
        load_idx(cut)
    assert exc.value.offset == 21


def test_idx_count_mismatch(tmp_path, two_images):
    pi, _ = two_images
    pl = tmp_path / "lab3.idx"
    write_idx(tmp_path / "unused.idx", np.zeros((1, 1, 1)), pl, [1, 2, 3])
    with pytest.raises(CountMismatchError):
        load_idx(pi, pl)


def test_idx_zero_image_rejected(tmp_path):
    pi = tmp_path / "z.idx"
    write_idx(pi, np.zeros((1, 2, 2)))
    with pytest.raises(ParameterError):
        load_idx(pi)


def test_bundled_mnist():
    ps = bundled_mnist()
    assert ps.patterns.shape == (200, 784)
    np.testing.assert_allclose(np.linalg.norm(ps.patterns, axis=1), 1.0)
    assert np.all(ps.patterns >= 0)
    assert np.bincount(ps.labels).tolist() == [20] * 10


def test_synthetic_deterministic_and_spread():
    a = synthetic_patterns(6, 100, seed=3)
    b = synthetic_patterns(6, 100, seed=3)
    np.testing.assert_array_equal(a.patterns, b.patterns)
    G = a.patterns @ a.patterns.T
    assert np.max(G[np.triu_indices(6, 1)]) < 0.5
    np.testing.assert_allclose(np.diag(G), 1.0)
    assert np.all(a.patterns >= 0)


def test_synthetic_impossible_raises():
    # nonnegative unit vectors in d = 1 are all equal
    with pytest.raises(ParameterError):
        synthetic_patterns(2, 1, max_draws=100)


def test_corrupt_radius_zero_and_norm(rng):
    p = rng.random(20)
    np.testing.assert_array_equal(corrupt(p, 0.0, 1), p)
    q = corrupt(p, 0.3, rng)
    assert np.linalg.norm(q - p) == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(ParameterError):
        corrupt(p, -1.0)


def test_corrupt_is_unbiased():
    rng = np.random.default_rng(8)
    p = np.zeros(10)
    eta = np.array([corrupt(p, 1.0, rng) for _ in range(100_000)])
    assert np.linalg.norm(eta.mean(axis=0)) < 1e-2


@settings(max_examples=40, deadline=None)
@given(r=st.floats(1e-6, 10.0), seed=st.integers(0, 2 ** 31))
def test_corrupt_norm_property(r, seed):
    p = np.ones(5)
    assert np.linalg.norm(corrupt(p, r, seed) - p) == pytest.approx(r, rel=1e-12)


def test_sample_sequence_distinct():
    ps = bundled_mnist()
    seq = sample_sequence(ps, 6, np.random.default_rng(2))
    assert len(set(seq.labels.tolist())) == 6
    G = seq.patterns @ seq.patterns.T
    assert np.max(G[np.triu_indices(6, 1)]) < 0.8
    np.testing.assert_array_equal(ps.patterns[seq.indices], seq.patterns)
    with pytest.raises(ParameterError):
        sample_sequence(ps, 11, np.random.default_rng(0), max_tries=5)


@pytest.fixture
def model():
    p = CstlnParams(5, 0.8, 2.0, 1.0)
    net = build_network(p)
    return bind_sequence(MemoryModel(p, 12), net, synthetic_patterns(3, 12, 1).patterns)


def test_model_save_load_save_identical(tmp_path, model):
    f1, f2 = tmp_path / "a.tlnm", tmp_path / "b.tlnm"
    save_model(f1, model)
    m2 = load_model(f1)
    save_model(f2, m2)
    assert f1.read_bytes() == f2.read_bytes()
    np.testing.assert_array_equal(m2.W_E, model.W_E)
    assert [e.support for e in m2.registry] == [e.support for e in model.registry]


def test_model_checksum(tmp_path, model):
    buf = bytearray(model_bytes(model))
    buf[-3] ^= 0x01
    f = tmp_path / "c.tlnm"
    f.write_bytes(bytes(buf))
    with pytest.raises(ChecksumError):
        load_model(f)


def test_model_old_version(tmp_path, model):
    buf = model_bytes(model)
    buf = buf.replace(b'"version": 1', b'"version": 0')
    f = tmp_path / "v.tlnm"
    f.write_bytes(buf)
    with pytest.raises(UnsupportedVersionError, match="re-run"):
        load_model(f)


def test_model_not_a_model(tmp_path):
    f = tmp_path / "x.tlnm"
    f.write_bytes(b"NOPE")
    with pytest.raises(BadMagicError):
        load_model(f)
