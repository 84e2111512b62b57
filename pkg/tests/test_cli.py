"""
Tests for the command-line interface
"""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from blindspot_cartographer.cli import cli
from blindspot_cartographer.main import main

TINY_SCENE = """
name = "tiny"
fps = 5.0

[camera]
fx = 16.0
fy = 16.0
cx = 15.5
cy = 11.5
width = 32
height = 24

[[boxes]]
footprint = [1.5, 6.0]
size = [1.2, 1.5, 2.0]

[trajectory]
frames = 12
speed = 2.0
"""


def stdout_values(result):
    """key=value pairs printed on stdout"""
    values = {}
    for line in result.stdout.splitlines():
        for token in line.split():
            if "=" in token:
                key, _, value = token.partition("=")
                values[key] = value
    return values


@pytest.fixture
def runner():
    # click < 8.2 mixes stderr into stdout unless told otherwise
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_SCENE)
    return path


@pytest.fixture
def synth_dir(runner, scene_file, tmp_path):
    out = tmp_path / "synth"
    result = runner.invoke(cli, ["synth-gen", str(scene_file), str(out), "--oracle-window", "5"])
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def generated_dir(runner, synth_dir, tmp_path):
    out = tmp_path / "generated"
    result = runner.invoke(cli, ["generate", str(synth_dir), str(out), "--t-seconds", "1",
                                 "--min-area", "1"])
    assert result.exit_code == 0, result.output
    return out


class TestSynthGen:

    def test_writes_sequence_and_oracle(self, runner, scene_file, tmp_path):
        out = tmp_path / "synth"
        result = runner.invoke(cli, ["synth-gen", str(scene_file), str(out),
                                     "--oracle-window", "5"])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values["scene"] == "tiny"
        assert values["frames"] == "12"
        assert values["oracle_frames"] == "7"
        assert len(list((out / "oracle" / "blindspot").glob("*.png"))) == 7
        assert (out / "poses.txt").exists()

    def test_unknown_scene(self, runner, tmp_path):
        result = runner.invoke(cli, ["synth-gen", "no_such_scene", str(tmp_path / "x")])
        assert result.exit_code == 7


class TestGenerate:

    def test_generate_counts_frames(self, runner, synth_dir, tmp_path):
        out = tmp_path / "gen"
        result = runner.invoke(cli, ["generate", str(synth_dir), str(out), "--t-seconds", "1",
                                     "--min-area", "1", "--debug-rasters", "--overlays"])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values == {"window": "5", "frames_written": "7", "frames_skipped": "5",
                          "last_index": "6"}
        assert len(list((out / "blindspot").glob("*.png"))) == 7
        assert len(list((out / "visibility").glob("*.png"))) == 7
        assert (out / "debug" / "aggregated_depth" / "000000.png").exists()
        assert (out / "overlay" / "000006.png").exists()

    def test_parallel_output_matches_serial(self, runner, synth_dir, generated_dir, tmp_path):
        out = tmp_path / "parallel"
        result = runner.invoke(cli, ["generate", str(synth_dir), str(out), "--t-seconds", "1",
                                     "--min-area", "1", "--jobs", "3"])
        assert result.exit_code == 0, result.output
        for path in sorted((generated_dir / "blindspot").glob("*.png")):
            assert path.read_bytes() == (out / "blindspot" / path.name).read_bytes()

    def test_window_longer_than_sequence(self, runner, synth_dir, tmp_path):
        result = runner.invoke(cli, ["generate", str(synth_dir), str(tmp_path / "out")])
        assert result.exit_code == 3

    def test_missing_sequence(self, runner, tmp_path):
        result = runner.invoke(cli, ["generate", str(tmp_path / "nowhere"), str(tmp_path / "out")])
        assert result.exit_code == 10

    def test_malformed_poses(self, runner, synth_dir, tmp_path):
        (synth_dir / "poses.txt").write_text("1 0 0\n")
        result = runner.invoke(cli, ["generate", str(synth_dir), str(tmp_path / "out")])
        assert result.exit_code == 12

    def test_environment_sets_options(self, runner, synth_dir, tmp_path):
        result = runner.invoke(
            cli, ["generate", str(synth_dir), str(tmp_path / "out"), "--min-area", "1"],
            env={"BLINDSPOT_GENERATE_T_SECONDS": "1"},
        )
        assert result.exit_code == 0, result.output
        assert stdout_values(result)["window"] == "5"


class TestEvaluate:

    def test_generated_against_oracle(self, runner, synth_dir, generated_dir, tmp_path):
        report = tmp_path / "report.json"
        result = runner.invoke(cli, ["evaluate", str(generated_dir), str(synth_dir / "oracle"),
                                     "--report", str(report)])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values["frames"] == "7"
        assert 0.0 <= float(values["iou"]) <= 1.0
        payload = json.loads(report.read_text())
        assert payload["frames"] == 7
        assert payload["tp"] == int(values["tp"])

    def test_self_evaluation_is_perfect(self, runner, synth_dir):
        oracle = synth_dir / "oracle"
        result = runner.invoke(cli, ["evaluate", str(oracle), str(oracle)])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values["fp"] == "0"
        assert values["fn"] == "0"

    def test_threshold_and_sweep_are_exclusive(self, runner, synth_dir, generated_dir):
        result = runner.invoke(cli, ["evaluate", str(generated_dir), str(synth_dir / "oracle"),
                                     "--threshold", "0.5", "--sweep"])
        assert result.exit_code == 2

    def test_probability_maps_with_sweep(self, runner, synth_dir, generated_dir, tmp_path):
        probs = tmp_path / "probs"
        probs.mkdir()
        for path in sorted((generated_dir / "blindspot").glob("*.png")):
            np.save(probs / (path.stem + ".npy"), np.full((24, 32), 0.3))
        result = runner.invoke(cli, ["evaluate", str(probs), str(synth_dir / "oracle"),
                                     "--sweep", "--sparse-gt"])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values["precision_applicable"] == "false"
        assert values["threshold"] == "0.100000"

    def test_detection_baseline(self, runner, synth_dir, tmp_path):
        pred = tmp_path / "baseline"
        result = runner.invoke(cli, ["evaluate", str(pred), str(synth_dir / "oracle"),
                                     "--baseline", "detection2d", "--sequence", str(synth_dir)])
        assert result.exit_code == 0, result.output
        assert len(list((pred / "blindspot").glob("*.png"))) == 7

    def test_baseline_needs_a_sequence(self, runner, synth_dir, tmp_path):
        result = runner.invoke(cli, ["evaluate", str(tmp_path), str(synth_dir / "oracle"),
                                     "--baseline", "detection2d"])
        assert result.exit_code == 2

    def test_missing_predictions(self, runner, synth_dir, tmp_path):
        empty = tmp_path / "empty"
        (empty / "blindspot").mkdir(parents=True)
        result = runner.invoke(cli, ["evaluate", str(empty), str(synth_dir / "oracle")])
        assert result.exit_code == 11


class TestOverlay:

    def test_draws_every_frame(self, runner, synth_dir, generated_dir, tmp_path):
        out = tmp_path / "overlays"
        result = runner.invoke(cli, ["overlay", str(generated_dir), str(out),
                                     "--sequence", str(synth_dir)])
        assert result.exit_code == 0, result.output
        assert stdout_values(result)["overlays"] == "7"
        assert len(list(out.glob("*.png"))) == 7

    def test_base_images_match_the_sequence_rgb(self, runner, synth_dir, generated_dir, tmp_path):
        from_sequence = tmp_path / "from_sequence"
        from_base = tmp_path / "from_base"
        assert runner.invoke(cli, ["overlay", str(generated_dir), str(from_sequence),
                                   "--sequence", str(synth_dir)]).exit_code == 0
        result = runner.invoke(cli, ["overlay", str(generated_dir), str(from_base),
                                     "--base", str(synth_dir / "rgb")])
        assert result.exit_code == 0, result.output
        for path in sorted(from_sequence.glob("*.png")):
            assert path.read_bytes() == (from_base / path.name).read_bytes()

    def test_missing_base_image(self, runner, generated_dir, tmp_path):
        result = runner.invoke(cli, ["overlay", str(generated_dir), str(tmp_path / "o"),
                                     "--base", str(tmp_path / "no_images")])
        assert result.exit_code == 7

    def test_base_and_sequence_are_exclusive(self, runner, synth_dir, generated_dir, tmp_path):
        result = runner.invoke(cli, ["overlay", str(generated_dir), str(tmp_path / "o"),
                                     "--sequence", str(synth_dir), "--base", str(synth_dir / "rgb")])
        assert result.exit_code == 2


class TestSelfChecks:

    def test_losses_check(self, runner):
        result = runner.invoke(cli, ["losses-check", "--instances", "2"])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values["checks"] == "6"
        assert values["failed"] == "0"

    def test_losses_check_from_environment(self, runner):
        result = runner.invoke(cli, ["losses-check"], env={"BLINDSPOT_LOSSES_CHECK_INSTANCES": "1"})
        assert result.exit_code == 0, result.output
        assert stdout_values(result)["checks"] == "3"

    def test_profile_flag(self, runner):
        result = runner.invoke(cli, ["--profile", "losses-check", "--instances", "1"])
        assert result.exit_code == 0, result.output

    def test_align_fit_accepts_consistent_landmarks(self, runner, tmp_path):
        path = tmp_path / "landmarks.txt"
        mono = np.linspace(0.05, 0.5, 10)
        path.write_text("".join(
            f"0 {i} {i} {1.0 / (2.0 * m + 0.1):.17g} {m:.17g}\n" for i, m in enumerate(mono)
        ))
        report = tmp_path / "fit.json"
        result = runner.invoke(cli, ["align-fit", str(path), "--report", str(report)])
        assert result.exit_code == 0, result.output
        values = stdout_values(result)
        assert values["decision"] == "accept"
        assert float(values["scale"]) == pytest.approx(2.0, rel=1e-6)
        assert float(values["shift"]) == pytest.approx(0.1, rel=1e-6)
        assert json.loads(report.read_text())["accepted"] is True

    def test_align_fit_rejection(self, runner, tmp_path):
        path = tmp_path / "landmarks.txt"
        path.write_text("0 0 0 2 1\n0 0 0 10 2\n0 0 0 2 3\n0 0 0 10 4\n")
        result = runner.invoke(cli, ["align-fit", str(path)])
        assert result.exit_code == 0, result.output
        assert stdout_values(result)["decision"] == "reject"

        result = runner.invoke(cli, ["align-fit", str(path), "--fail-on-reject"])
        assert result.exit_code == 6

    def test_align_fit_degenerate(self, runner, tmp_path):
        path = tmp_path / "landmarks.txt"
        path.write_text("0 0 0 2 1\n0 0 0 3 1\n")
        result = runner.invoke(cli, ["align-fit", str(path), "--domain", "depth"])
        assert result.exit_code == 4

    def test_oracle_eval_rows(self, runner, scene_file):
        result = runner.invoke(cli, ["oracle-eval", str(scene_file), "--window", "2",
                                     "--window", "4"])
        assert result.exit_code == 0, result.output
        rows = [line for line in result.stdout.splitlines() if line.startswith("window=")]
        assert [row.split()[0] for row in rows] == ["window=2", "window=4"]
        assert "frames=9" in rows[0].split()


class TestMain:

    def test_exit_code_of_a_failing_command(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["generate", str(tmp_path / "nowhere"), str(tmp_path / "out")])
        assert info.value.code == 10

    def test_success(self):
        with pytest.raises(SystemExit) as info:
            main(["losses-check", "--instances", "1"])
        assert info.value.code == 0

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["generate"])
        assert info.value.code == 2
