"""Binary container round trips and integrity checks."""

import numpy as np
import pytest

from rgtn.checkpoint import (
    CheckpointError,
    load_checkpoint,
    load_tensor,
    load_tt,
    save_checkpoint,
    save_tensor,
    save_tt,
)


class TestRoundTrip:
    def test_bit_exact_arrays(self, tmp_path):
        rng = np.random.default_rng(0)
        arrays = {
            "w_x": rng.standard_normal((3, 4)),
            "scalar": np.asarray(np.pi),
            "core": rng.standard_normal((2, 3, 2, 1)) * 1e-12,
        }
        path = str(tmp_path / "model.rgtn")
        save_checkpoint(path, arrays, {"kind": "model", "config": {"seed": 3}})
        loaded, meta = load_checkpoint(path)
        assert meta["kind"] == "model"
        assert meta["format_version"] == 1
        assert meta["config"] == {"seed": 3}
        for name, arr in arrays.items():
            assert np.array_equal(loaded[name], np.asarray(arr, float))
            assert loaded[name].dtype == np.float64

    def test_double_round_trip_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        arrays = {"a": rng.standard_normal((5, 2))}
        p1, p2 = str(tmp_path / "a.rgtn"), str(tmp_path / "b.rgtn")
        save_checkpoint(p1, arrays, {"kind": "model"})
        loaded, meta = load_checkpoint(p1)
        meta.pop("format_version")
        save_checkpoint(p2, loaded, meta)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_tensor_file(self, tmp_path):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 4, 5))
        path = str(tmp_path / "x.rgtn")
        save_tensor(path, x)
        assert np.array_equal(load_tensor(path), x)

    def test_tt_file(self, tmp_path):
        rng = np.random.default_rng(3)
        cores = [rng.standard_normal((1, 3, 2)), rng.standard_normal((2, 4, 1))]
        path = str(tmp_path / "tt.rgtn")
        save_tt(path, cores, {"ranks": [1, 2, 1]})
        loaded, meta = load_tt(path)
        assert meta["ranks"] == [1, 2, 1]
        for got, expect in zip(loaded, cores):
            assert np.array_equal(got, expect)


class TestIntegrity:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.rgtn"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(str(path))

    def test_corrupted_payload(self, tmp_path):
        path = str(tmp_path / "model.rgtn")
        save_checkpoint(path, {"w": np.ones(4)}, {"kind": "model"})
        blob = bytearray(open(path, "rb").read())
        blob[-3] ^= 0xFF
        open(path, "wb").write(bytes(blob))
        with pytest.raises(CheckpointError, match="digest"):
            load_checkpoint(path)

    def test_future_version_rejected(self, tmp_path):
        import struct

        path = str(tmp_path / "model.rgtn")
        save_checkpoint(path, {"w": np.ones(2)}, {"kind": "model"})
        blob = bytearray(open(path, "rb").read())
        blob[8:12] = struct.pack("<I", 99)
        open(path, "wb").write(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_wrong_kind_helpers(self, tmp_path):
        path = str(tmp_path / "t.rgtn")
        save_tensor(path, np.ones(3))
        with pytest.raises(CheckpointError):
            load_tt(path)
