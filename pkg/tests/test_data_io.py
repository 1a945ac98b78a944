import csv
import json
import struct
import zipfile

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ttdisc.data import (
    LabeledTensorSet,
    SyntheticSpec,
    class_mean_distances,
    generate_synthetic,
    per_class_split,
)
from ttdisc.io import (
    load_chain,
    load_dataset,
    load_model,
    read_pgm,
    read_tten,
    save_chain,
    save_dataset,
    save_model,
    tten_bytes,
    tten_from_bytes,
    write_pgm,
    write_tten,
)
from ttdisc.tt import tt_svd

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)


@given(arrays(np.float64, shapes, elements=st.floats(allow_nan=False)))
def test_tten_round_trip(t):
    back = tten_from_bytes(tten_bytes(t))
    assert back.shape == t.shape
    assert np.array_equal(back, t)


def test_tten_layout():
    t = np.arange(6.0).reshape(2, 3)
    buf = tten_bytes(t)
    assert buf[:4] == b"TTEN" and buf[4] == 1
    assert struct.unpack_from("<I", buf, 5)[0] == 2
    assert struct.unpack_from("<2Q", buf, 9) == (2, 3)
    values = struct.unpack_from("<6d", buf, 25)
    # first mode fastest
    assert values == (0.0, 3.0, 1.0, 4.0, 2.0, 5.0)


def test_tten_errors(tmp_path):
    with pytest.raises(ValueError):
        tten_from_bytes(b"XXXX" + bytes(20))
    buf = bytearray(tten_bytes(np.ones(2)))
    buf[4] = 2
    with pytest.raises(ValueError):
        tten_from_bytes(bytes(buf))
    with pytest.raises(ValueError):
        tten_from_bytes(tten_bytes(np.ones(3))[:-8])
    p = tmp_path / "a.tten"
    write_tten(p, np.ones((2, 2)))
    assert np.array_equal(read_tten(p), np.ones((2, 2)))


def test_chain_round_trip(tmp_path):
    t = np.random.default_rng(0).standard_normal((3, 4, 2))
    chain = tt_svd(t, tau=1e-12)
    save_chain(tmp_path / "c.ttc", chain)
    back = load_chain(tmp_path / "c.ttc")
    assert back.ranks == chain.ranks
    for a, b in zip(chain.cores, back.cores):
        assert np.array_equal(a, b)
    header = json.loads(zipfile.ZipFile(tmp_path / "c.ttc").read("header.json"))
    assert header["n_factors"] == 3 and header["ranks"] == list(chain.ranks)
    assert len(header["left_orthogonal"]) == 3


def test_model_round_trip(tmp_path):
    chain = tt_svd(np.random.default_rng(1).standard_normal((2, 3)), tau=1e-12)
    save_model(tmp_path / "m", [chain, chain], {"lambda": np.float64(2.0), "seed": 3},
               {"extra": np.eye(2)})
    chains, manifest, arrays_ = load_model(tmp_path / "m")
    assert len(chains) == 2 and manifest["lambda"] == 2.0 and manifest["n_branches"] == 2
    assert np.array_equal(arrays_["extra"], np.eye(2))


def test_pgm_scaling(tmp_path):
    img = np.array([[0, 255], [128, 64]], dtype=np.uint8)
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P5\n# comment\n2 2\n255\n" + img.tobytes())
    out = read_pgm(p)
    assert out[0, 0] == 0.0 and out[0, 1] == 1.0
    assert out[1, 0] == pytest.approx(128 / 255)
    q = tmp_path / "y.pgm"
    q.write_bytes(b"P2\n2 1\n255\n255 0\n")
    assert np.array_equal(read_pgm(q), [[1.0, 0.0]])
    write_pgm(tmp_path / "z.pgm", out)
    assert np.allclose(read_pgm(tmp_path / "z.pgm"), out, atol=1 / 255)


def test_pgm_errors(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(ValueError):
        read_pgm(p)


def test_tten_directory_dataset(tmp_path):
    g = np.random.default_rng(2)
    X = g.standard_normal((6, 2, 3))
    y = np.array([0, 1, 0, 1, 0, 1])
    save_dataset(tmp_path / "d", LabeledTensorSet(X, y))
    data = load_dataset(tmp_path / "d")
    assert len(data.classes) == 2 and list(data.class_sizes) == [3, 3]
    assert np.array_equal(data.X, X) and np.array_equal(data.y, y)
    rows = list(csv.reader(open(tmp_path / "d" / "labels.csv")))
    assert rows[0] == ["filename", "class"]


def test_pgm_folder_dataset_and_reshape(tmp_path):
    g = np.random.default_rng(3)
    for c in ("a", "b"):
        (tmp_path / c).mkdir()
        for k in range(2):
            write_pgm(tmp_path / c / f"{k}.pgm", g.random((64, 64)))
    data = load_dataset(tmp_path, reshape=(8, 8, 8, 8))
    raw = load_dataset(tmp_path)
    assert data.shape == (8, 8, 8, 8) and raw.shape == (64, 64)
    for s in range(len(data)):
        assert np.array_equal(data.X[s].reshape(-1, order="F"), raw.X[s].reshape(-1, order="F"))
    assert list(data.y) == ["a", "a", "b", "b"]


def test_dataset_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing")
    (tmp_path / "t").mkdir()
    write_tten(tmp_path / "t" / "s.tten", np.ones(2))
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "t")
    save_dataset(tmp_path / "u", LabeledTensorSet(np.ones((2, 3)), [0, 1]))
    write_tten(tmp_path / "u" / "sample_0000.tten", np.ones(4))
    with pytest.raises(ValueError):
        load_dataset(tmp_path / "u")
    with pytest.raises(ValueError):
        LabeledTensorSet(np.ones((2, 3)), [0]).reshape((4,))
    with pytest.raises(ValueError):
        LabeledTensorSet(np.ones((2, 3)), [0, 1]).reshape((4,))


def test_synthetic_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=3))
    b = generate_synthetic(SyntheticSpec(seed=3))
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    c = generate_synthetic(SyntheticSpec(seed=4))
    assert not np.array_equal(a.X, c.X)


def test_synthetic_shape_and_means():
    spec = SyntheticSpec()
    data = generate_synthetic(spec)
    assert data.X.shape == (60, 4, 4, 4, 4)
    assert list(data.class_sizes) == [20, 20, 20]
    d = class_mean_distances(data)
    off = d[~np.eye(3, dtype=bool)]
    # unit-norm means scaled by the separation: distances cannot exceed 2 * separation
    assert off.max() <= 2 * spec.separation + 6 * spec.sigma
    # empirical means sit well outside the noise of a single coordinate
    assert off.min() > 6 * spec.sigma


def test_synthetic_mean_margin_claim():
    spec = SyntheticSpec()
    data = generate_synthetic(spec)
    d = class_mean_distances(data)
    margin = 6 * spec.sigma * np.sqrt(np.prod(spec.shape))
    assert d[~np.eye(3, dtype=bool)].min() > margin


def test_synthetic_noiseless_limit():
    data = generate_synthetic(SyntheticSpec(sigma=1e-300))
    for c in data.classes:
        block = data.samples(c)
        assert np.allclose(block, block[0], atol=0)


def test_synthetic_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(sigma=0)
    with pytest.raises(ValueError):
        SyntheticSpec(separation=-1)
    with pytest.raises(ValueError):
        SyntheticSpec(ranks=(1, 2, 2, 1))
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(shape=(2, 2), ranks=(1, 5, 1)))


def test_per_class_split():
    y = np.repeat([0, 1, 2], 10)
    tr, te = per_class_split(y, fraction=0.5, rng=0)
    assert len(tr) == 15 and len(te) == 15 and not set(tr) & set(te)
    for c in range(3):
        assert np.sum(y[tr] == c) == 5
    tr2, _ = per_class_split(y, fraction=0.5, rng=0)
    assert np.array_equal(tr, tr2)
    tr3, te3 = per_class_split(y, n_train=2, rng=1)
    assert len(tr3) == 6 and len(te3) == 24
    with pytest.raises(ValueError):
        per_class_split(y)
