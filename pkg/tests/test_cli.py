"""End-to-end command-line runs on tiny configurations."""

import json

import numpy as np
import pytest

from plap.cli import main
from plap.datasets import ExperimentConfig, write_csv_dataset


def small_regress_args(tmp_path, **extra):
    args = [
        "regress",
        "--m", "24", "--n", "18",
        "--p", "10",
        "--seed", "1",
        "--out", str(tmp_path / "out"),
    ]
    for key, val in extra.items():
        args += [key, str(val)]
    return args


class TestRegress:
    def test_quadratic_single_iteration(self, tmp_path, capsys):
        code = main(
            ["regress", "--m", "20", "--n", "12", "--p", "2", "--seed", "3",
             "--out", str(tmp_path / "o")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "converged (1 iterations" in out

    def test_emits_tables_and_config_echo(self, tmp_path):
        code = main(small_regress_args(tmp_path))
        assert code == 0
        out = tmp_path / "out"
        assert (out / "config.json").exists()
        assert (out / "summary.json").exists()
        assert (out / "regress_p10_seed1_dirls.csv").exists()
        dat = out / "distance_p10_seed1.dat"
        header = dat.read_text().splitlines()[0].split()
        assert header[:2] == ["iter", "dIRLS"]

    def test_unreachable_tolerance_reports_nonconvergence(self, tmp_path, capsys):
        code = main(small_regress_args(tmp_path, **{"--gap-tol": "1e-300",
                                                    "--max-iters": "3"}))
        assert code == 4
        assert "did not converge" in capsys.readouterr().out

    def test_deterministic_outputs(self, tmp_path):
        main(small_regress_args(tmp_path / "a"))
        main(small_regress_args(tmp_path / "b"))
        one = (tmp_path / "a" / "out" / "regress_p10_seed1_dirls.csv").read_text()
        two = (tmp_path / "b" / "out" / "regress_p10_seed1_dirls.csv").read_text()
        # timing columns differ between runs; numeric columns must not
        strip = lambda text: [
            ",".join(line.split(",")[:-1]) for line in text.splitlines()
        ]
        assert strip(one) == strip(two)

    def test_config_file_plus_override(self, tmp_path):
        cfg = ExperimentConfig(m=24, n=18, p_values=[4.0], seeds=[2],
                               out_dir=str(tmp_path / "from_file"))
        path = tmp_path / "cfg.json"
        path.write_text(cfg.to_json())
        code = main(["regress", "--config", str(path), "--p", "10"])
        assert code == 0
        echoed = json.loads((tmp_path / "from_file" / "config.json").read_text())
        assert echoed["p_values"] == [10.0]

    def test_bad_config_exit_code(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["regress", "--config", str(path)]) == 2


class TestSsl:
    def test_csv_dataset_roundtrip(self, tmp_path, capsys):
        rng = np.random.default_rng(5)
        half = 30
        pts = np.concatenate(
            [rng.normal(0, 0.4, (half, 3)), rng.normal(2.5, 0.4, (half, 3))]
        )
        labels = {i: (0 if i < half else 1) for i in range(2 * half)}
        data = tmp_path / "blobs.csv"
        write_csv_dataset(data, pts, labels)
        out = tmp_path / "ssl_out"
        code = main(
            ["ssl", "--dataset", str(data), "--p", "10", "--knn", "5",
             "--seed", "0", "--out", str(out)]
        )
        assert code == 0
        assert (out / "accuracy.dat").exists()
        lines = (out / "predictions.csv").read_text().splitlines()
        assert lines[0] == "vertex,predicted,truth"
        assert len(lines) == 61
        table = np.genfromtxt(out / "accuracy.dat", skip_header=1)
        assert table.reshape(-1, 2).shape[1] == 2

    def test_synthetic_fallback(self, tmp_path):
        out = tmp_path / "syn"
        code = main(
            ["ssl", "--p", "10", "--n-vertices", "80", "--knn", "6",
             "--seed", "1", "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_vertices"] == 80

    def test_missing_labels_is_data_error(self, tmp_path):
        data = tmp_path / "unlabeled.csv"
        write_csv_dataset(data, np.random.default_rng(0).normal(size=(10, 2)))
        assert main(["ssl", "--dataset", str(data), "--out", str(tmp_path / "x")]) == 3

    def test_idx_pair_with_subsample_and_pca(self, tmp_path):
        from plap.datasets import write_idx_images, write_idx_labels

        rng = np.random.default_rng(11)
        half = 40
        # two image classes: bright top half vs bright bottom half, 4x4
        imgs = np.zeros((2 * half, 16))
        imgs[:half, :8] = 0.9
        imgs[half:, 8:] = 0.9
        imgs += rng.uniform(0, 0.1, imgs.shape)
        labels = np.array([0] * half + [1] * half, dtype=np.uint8)
        img_path, lab_path = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx_images(img_path, imgs)
        write_idx_labels(lab_path, labels)
        out = tmp_path / "idx_out"
        code = main(
            ["ssl", "--dataset", f"{img_path}:{lab_path}", "--subsample", "60",
             "--pca-dims", "3", "--p", "10", "--knn", "5", "--seed", "0",
             "--out", str(out)]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_vertices"] == 60
        assert summary["accuracy_final"] >= 0.9


class TestBench:
    def test_sweep_table(self, tmp_path, capsys):
        code = main(
            ["bench", "--m", "24", "--n", "18", "--p", "10", "--p", "20",
             "--seed", "1", "--solver", "dirls", "--out", str(tmp_path / "b")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "solver" in out and "dirls" in out

    def test_high_exponent_newton_never_crashes(self, tmp_path, capsys):
        """Newton may stall at large p; the run completes and reports it."""
        code = main(
            ["regress", "--m", "24", "--n", "18", "--p", "80", "--seed", "1",
             "--solver", "newton", "--max-iters", "8",
             "--out", str(tmp_path / "n80")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "newton:" in out
        assert (tmp_path / "n80" / "regress_p80_seed1_newton.csv").exists()


class TestVerify:
    def test_list_names(self, capsys):
        assert main(["verify", "--list"]) == 0
        names = capsys.readouterr().out.split()
        assert "conjugate-identity" in names
        assert len(names) == 10

    def test_single_fast_check(self, capsys):
        assert main(["verify", "--only", "conjugate-identity"]) == 0
        assert "PASS conjugate-identity" in capsys.readouterr().out

    def test_unknown_check_is_config_error(self):
        assert main(["verify", "--only", "nope"]) == 2
