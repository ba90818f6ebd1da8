"""Binary model files: bit-exact round trips, sparse-vs-dense sizing, and
the distinct corruption error kinds."""

import numpy as np
import pytest

from perturbnet import nn, store
from perturbnet.models import Network
from perturbnet.perturb import sparsity


def random_network(seed, zero_fraction=0.0, layer_dims=((6, 9), (4, 6), (9, 4))):
    rng = np.random.default_rng(seed)
    layers = []
    for out_dim, in_dim in layer_dims:
        layer = nn.init_layer(out_dim, in_dim, "relu", rng)
        if zero_fraction > 0:
            drop = rng.random(layer.W.shape) < zero_fraction
            layer.W = np.where(drop, 0.0, layer.W)
            layer.mask = np.where(drop, 0.0, 1.0)
        layers.append(layer)
    return Network(kind="basic_dae", layers=layers, encoder_len=len(layers), dropout_layers=())


def assert_bit_identical(a: Network, b: Network):
    assert len(a.layers) == len(b.layers)
    for la, lb in zip(a.layers, b.layers):
        assert la.activation == lb.activation
        np.testing.assert_array_equal(la.W.view(np.uint64), lb.W.view(np.uint64))
        np.testing.assert_array_equal(la.b.view(np.uint64), lb.b.view(np.uint64))
        np.testing.assert_array_equal(la.mask, lb.mask)


class TestRoundTrip:
    def test_dense_model_roundtrip(self, tmp_path):
        net = random_network(0)
        info = store.save_model(net, tmp_path / "m.ptrb", task="binary", seed=7)
        assert info.layer_encodings == ["dense"] * 3
        loaded, header = store.load_model(tmp_path / "m.ptrb")
        assert_bit_identical(net, loaded)
        assert header["kind"] == "basic_dae"
        assert header["task"] == "binary"
        assert header["seed"] == 7

    def test_sparse_model_roundtrip_and_smaller(self, tmp_path):
        net = random_network(1, zero_fraction=0.4)
        info = store.save_model(net, tmp_path / "s.ptrb")
        assert info.layer_encodings == ["sparse"] * 3
        dense_info = store.save_model(net, tmp_path / "d.ptrb", force_dense=True)
        assert info.num_bytes < dense_info.num_bytes
        loaded, _ = store.load_model(tmp_path / "s.ptrb")
        assert_bit_identical(net, loaded)
        assert sparsity(loaded.layers) == sparsity(net.layers)

    def test_negative_zero_survives_sparse_encoding(self, tmp_path):
        net = random_network(2, zero_fraction=0.5)
        net.layers[0].W[0, 0] = -0.0
        store.save_model(net, tmp_path / "z.ptrb")
        loaded, _ = store.load_model(tmp_path / "z.ptrb")
        assert_bit_identical(net, loaded)
        assert np.signbit(loaded.layers[0].W[0, 0])

    def test_empty_model_header_only(self, tmp_path):
        net = Network(kind="encoder", layers=[], encoder_len=0, dropout_layers=())
        store.save_model(net, tmp_path / "e.ptrb")
        loaded, header = store.load_model(tmp_path / "e.ptrb")
        assert loaded.layers == []
        assert header["layer_count"] == 0

    def test_save_load_save_byte_identical(self, tmp_path):
        net = random_network(3, zero_fraction=0.25)
        store.save_model(net, tmp_path / "a.ptrb")
        loaded, _ = store.load_model(tmp_path / "a.ptrb")
        store.save_model(loaded, tmp_path / "b.ptrb")
        assert (tmp_path / "a.ptrb").read_bytes() == (tmp_path / "b.ptrb").read_bytes()

    def test_threshold_boundary_encodings(self, tmp_path):
        # 10x10 layer: 9 zeros stays dense, 10 zeros flips to sparse
        for zeros, expected in ((9, "dense"), (10, "sparse")):
            rng = np.random.default_rng(zeros)
            layer = nn.init_layer(10, 10, "relu", rng)
            flat = layer.W.reshape(-1)
            flat[:zeros] = 0.0
            net = Network(kind="encoder", layers=[layer], encoder_len=1, dropout_layers=())
            info = store.save_model(net, tmp_path / f"t{zeros}.ptrb")
            assert info.layer_encodings == [expected]

    def test_nonfinite_rejected(self, tmp_path):
        net = random_network(4)
        net.layers[1].W[0, 0] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            store.save_model(net, tmp_path / "x.ptrb")


class TestErrors:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.ptrb"
        p.write_bytes(b"NOPE!" + b"\x00" * 40)
        with pytest.raises(store.BadMagicError):
            store.load_model(p)

    def test_version_mismatch(self, tmp_path):
        net = random_network(5)
        p = tmp_path / "v.ptrb"
        store.save_model(net, p)
        raw = bytearray(p.read_bytes())
        raw[5] = 99  # version byte follows the 5-byte magic
        p.write_bytes(bytes(raw))
        with pytest.raises(store.VersionMismatchError):
            store.load_model(p)

    def test_truncated_payload(self, tmp_path):
        net = random_network(6)
        p = tmp_path / "t.ptrb"
        store.save_model(net, p)
        raw = p.read_bytes()
        p.write_bytes(raw[: len(raw) - 17])
        with pytest.raises(store.TruncatedFileError):
            store.load_model(p)

    def test_error_kinds_are_distinct(self):
        kinds = {store.BadMagicError, store.VersionMismatchError, store.TruncatedFileError}
        assert len(kinds) == 3
        for k in kinds:
            assert issubclass(k, store.ModelFileError)


class TestInspect:
    def test_inspect_reports_sparsity(self, tmp_path):
        net = random_network(7, zero_fraction=0.3)
        p = tmp_path / "i.ptrb"
        store.save_model(net, p)
        header = store.inspect_model(p)
        assert abs(header["sparsity_pct"] - sparsity(net.layers)) < 1e-12
        assert header["current_sparsity_pct"] == header["sparsity_pct"]
        assert header["layer_count"] == 3
        assert header["file_bytes"] == p.stat().st_size
