"""IDX/CSV ingestion, record emission, and config round-trips."""

import json
import struct

import numpy as np
import pytest

from plap.datasets import (
    ExperimentConfig,
    load_csv_dataset,
    load_idx,
    write_csv_dataset,
    write_idx_images,
    write_idx_labels,
    write_records,
)
from plap.errors import ConfigError, DataError, IdxError
from plap.records import ConvergenceRecord


class TestIdx:
    def test_single_saturated_image(self, tmp_path):
        path = tmp_path / "img.idx"
        write_idx_images(path, np.ones((1, 4)))
        out = load_idx(path)
        np.testing.assert_array_equal(out, np.ones((1, 4)))

    def test_labels_roundtrip(self, tmp_path):
        path = tmp_path / "lab.idx"
        write_idx_labels(path, np.arange(10))
        out = load_idx(path)
        np.testing.assert_array_equal(out, np.arange(10))
        assert out.dtype == np.uint8

    def test_pixel_scaling(self, tmp_path):
        path = tmp_path / "img.idx"
        with open(path, "wb") as fh:
            fh.write(struct.pack(">IIII", 0x803, 1, 2, 2))
            fh.write(bytes([0, 51, 102, 255]))
        out = load_idx(path)
        np.testing.assert_allclose(out, [[0.0, 0.2, 0.4, 1.0]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">II", 0xDEADBEEF, 3))
        with pytest.raises(IdxError) as ei:
            load_idx(path)
        assert ei.value.code == "bad-magic"

    def test_truncated_header_and_payload(self, tmp_path):
        path = tmp_path / "trunc.idx"
        path.write_bytes(struct.pack(">I", 0x803) + b"\x00\x00")
        with pytest.raises(IdxError) as ei:
            load_idx(path)
        assert ei.value.code == "truncated"
        path.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + b"\x00" * 3)
        with pytest.raises(IdxError) as ei:
            load_idx(path)
        assert ei.value.code == "truncated"

    def test_dimension_overflow(self, tmp_path):
        path = tmp_path / "big.idx"
        path.write_bytes(struct.pack(">IIII", 0x803, 2**31 - 1, 2**20, 2**20))
        with pytest.raises(IdxError) as ei:
            load_idx(path)
        assert ei.value.code == "dim-overflow"


class TestCsv:
    def test_roundtrip_with_partial_labels(self, tmp_path):
        path = tmp_path / "d.csv"
        feats = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        write_csv_dataset(path, feats, labels={0: 1, 2: 0})
        out_f, out_l = load_csv_dataset(path)
        np.testing.assert_array_equal(out_f, feats)
        assert out_l == {0: 1, 2: 0}

    def test_numeric_roundtrip_without_labels(self, tmp_path):
        path = tmp_path / "plain.csv"
        feats = np.array([[0.25, -1.5], [2.0, 3.5]])
        write_csv_dataset(path, feats)
        out_f, out_l = load_csv_dataset(path)
        np.testing.assert_array_equal(out_f, feats)
        assert out_l is None

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("x0,x1\n1.0,2.0\n3.0\n")
        with pytest.raises(DataError, match="cells"):
            load_csv_dataset(path)

    def test_non_numeric_cell_rejected(self, tmp_path):
        path = tmp_path / "text.csv"
        path.write_text("x0,label\noops,1\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_csv_dataset(path)


class TestWriteRecords:
    def test_emits_csv_and_dat(self, tmp_path):
        rec = ConvergenceRecord(series="dIRLS")
        rec.append(1, 1.0, -1.0, 0.5, float("nan"), 3, 0.01)
        rec.append(2, 0.5, -0.9, 0.1, 0.2, 2, 0.01)
        paths = write_records({"run": rec}, tmp_path)
        assert sorted(p.name for p in paths) == ["run.csv", "run.dat"]
        table = np.genfromtxt(tmp_path / "run.dat", skip_header=1)
        assert table.shape == (2, 7)


class TestExperimentConfig:
    def test_json_roundtrip(self):
        cfg = ExperimentConfig(p_values=[10.0], seeds=[1, 2], m=40, n=30)
        back = ExperimentConfig.from_json(cfg.to_json())
        assert back == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_json(json.dumps({"surprise": 1}))

    def test_bad_json_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("{nope")

    def test_unregularized_high_p_rejected(self):
        cfg = ExperimentConfig(delta=None, p_values=[10.0])
        with pytest.raises(ConfigError, match="relaxation"):
            cfg.validate()

    def test_bad_interval_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(delta=(0.0, 1.0)).validate()

    def test_unknown_solver_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(solvers=["mldivide"]).validate()

    def test_echo_writes_effective_config(self, tmp_path):
        cfg = ExperimentConfig(out_dir=str(tmp_path / "out"))
        cfg.echo()
        text = (tmp_path / "out" / "config.json").read_text()
        assert ExperimentConfig.from_json(text) == cfg
