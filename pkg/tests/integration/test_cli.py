"""Command-line round trips through temporary directories."""
import numpy as np
import pytest

from app.cli.main import EXIT_OK, EXIT_USAGE, main

SCENARIO = """\
# three identities, oracle detections
synth_identities=3
synth_frames=30
synth_width=320
synth_height=240
synth_embedding_dim=8
"""

TINY_NETWORK = """\
synth_identities=2
synth_frames=3
synth_width=64
synth_height=64
synth_embedding_dim=4
backbone_channels=8
num_heads=2
num_keys=2
embed_dim=8
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text(SCENARIO)
    return path


@pytest.fixture
def synth_dir(tmp_path, scenario_file):
    out = tmp_path / "seq"
    assert main(["synth", "--config", str(scenario_file), "--out-dir", str(out)]) == EXIT_OK
    return out


class TestSynthTrackEval:
    """Oracle scenario through all three commands."""

    def test_synth_writes_files(self, synth_dir):
        assert (synth_dir / "gt.txt").is_file()
        assert (synth_dir / "det.txt").is_file()
        rows = np.load(synth_dir / "det_embeddings.npy")
        assert rows.shape == (90, 8)

    def test_perfect_scores(self, synth_dir, tmp_path, capsys):
        pred = tmp_path / "pred.txt"
        assert main(["track", "--in", str(synth_dir / "det.txt"), "--out", str(pred)]) == EXIT_OK
        capsys.readouterr()

        assert main(["eval", "--gt", str(synth_dir / "gt.txt"), "--pred", str(pred)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "MOTA=1.000" in out
        assert "IDF1=1.000" in out
        assert "IDS=0" in out

    def test_eval_identical_files(self, synth_dir, capsys):
        gt = str(synth_dir / "gt.txt")
        assert main(["eval", "--gt", gt, "--pred", gt]) == EXIT_OK
        assert "MOTA=1.000" in capsys.readouterr().out

    def test_track_several_inputs_into_directory(self, synth_dir, tmp_path):
        second = tmp_path / "other.txt"
        second.write_text((synth_dir / "gt.txt").read_text())
        out = tmp_path / "results"
        assert main(["track", "--in", str(synth_dir / "det.txt"), str(second), "--out", str(out), "--workers", "2"]) == EXIT_OK
        assert (out / "det.txt").is_file()
        assert (out / "other.txt").is_file()

    def test_sidecar_row_mismatch(self, synth_dir, tmp_path, capsys):
        np.save(synth_dir / "det_embeddings.npy", np.zeros((5, 8)))
        assert main(["track", "--in", str(synth_dir / "det.txt"), "--out", str(tmp_path / "p.txt")]) == EXIT_USAGE
        assert "5 rows" in capsys.readouterr().err


class TestUsageErrors:
    """Bad input maps to exit code 2."""

    def test_malformed_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("1,1,0,0,10\n")
        assert main(["eval", "--gt", str(bad), "--pred", str(bad)]) == EXIT_USAGE
        assert "line 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        missing = str(tmp_path / "nope.txt")
        assert main(["eval", "--gt", missing, "--pred", missing]) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("max_lost=5\ncolour=red\n")
        assert main(["config", "--config", str(cfg)]) == EXIT_USAGE
        assert "unknown key 'colour'" in capsys.readouterr().err

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["dance"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_required_argument(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--gt", "a.txt"])
        assert exc.value.code == EXIT_USAGE

    def test_unknown_gradient_case(self, capsys):
        assert main(["gradcheck", "--seeds", "1", "--case", "conv3d"]) == EXIT_USAGE
        assert "conv3d" in capsys.readouterr().err


class TestConfigCommand:
    def test_echo_includes_file_values(self, scenario_file, capsys):
        assert main(["config", "--config", str(scenario_file)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "synth_identities=3\n" in out
        assert "synth_width=320\n" in out

    def test_echo_reloads_to_same_text(self, scenario_file, tmp_path, capsys):
        main(["config", "--config", str(scenario_file)])
        first = capsys.readouterr().out
        echoed = tmp_path / "echo.cfg"
        echoed.write_text(first)
        main(["config", "--config", str(echoed)])
        assert capsys.readouterr().out == first


class TestVerificationCommands:
    def test_gradcheck_single_case(self, capsys):
        assert main(["gradcheck", "--seeds", "1", "--case", "layer_norm"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "layer_norm" in out
        assert "ok" in out

    def test_viz(self, tmp_path, capsys):
        tensor = tmp_path / "map.npy"
        np.save(tensor, np.random.default_rng(0).random((8, 8, 4)))
        image = tmp_path / "map.ppm"
        assert main(["viz", "--tensor", str(tensor), "--out", str(image), "--scale", "2"]) == EXIT_OK
        assert image.read_bytes().startswith(b"P6\n16 16\n255\n")

    def test_viz_missing_tensor(self, tmp_path):
        assert main(["viz", "--tensor", str(tmp_path / "x.npy"), "--out", str(tmp_path / "x.ppm")]) == EXIT_USAGE


class TestNeuralPath:
    """Tiny fit, then tracking on rendered frames."""

    def test_fit_then_track(self, tmp_path, capsys):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_NETWORK)
        weights = tmp_path / "weights.npz"
        assert main(["fit", "--config", str(cfg), "--out", str(weights), "--steps", "2"]) == EXIT_OK
        assert weights.is_file()
        assert "after 2 steps" in capsys.readouterr().out

        dumps = tmp_path / "dumps"
        pred = tmp_path / "pred.txt"
        args = ["track", "--config", str(cfg), "--in", str(cfg), "--out", str(pred),
                "--weights", str(weights), "--dump-dir", str(dumps)]
        assert main(args) == EXIT_OK
        assert pred.is_file()
        for name in ("backbone", "det", "reid", "heatmap"):
            assert (dumps / f"000001_{name}.npy").is_file()
        assert np.load(dumps / "000003_heatmap.npy").shape == (16, 16)

    def test_fit_frame_outside_scenario(self, tmp_path):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY_NETWORK)
        args = ["fit", "--config", str(cfg), "--out", str(tmp_path / "w.npz"), "--steps", "1", "--frames", "9"]
        assert main(args) == EXIT_USAGE

    def test_weights_with_detection_file(self, synth_dir, tmp_path):
        args = ["track", "--in", str(synth_dir / "det.txt"), "--out", str(tmp_path / "p.txt"),
                "--weights", str(tmp_path / "w.npz")]
        assert main(args) == EXIT_USAGE

    def test_fit_saves_configured_precision(self, tmp_path):
        cfg = tmp_path / "tiny64.cfg"
        cfg.write_text(TINY_NETWORK + "dtype=float64\n")
        weights = tmp_path / "weights.npz"
        assert main(["fit", "--config", str(cfg), "--out", str(weights), "--steps", "1"]) == EXIT_OK
        with np.load(weights) as archive:
            assert {archive[name].dtype for name in archive.files} == {np.dtype(np.float64)}
