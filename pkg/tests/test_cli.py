import filecmp
import json
import logging

import pytest

from ptav import cli
from ptav.benchmark import evaluate, load_sequence
from ptav.geometry import BoundingBox


@pytest.fixture(scope="module")
def seq_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    spec = root / "spec.txt"
    spec.write_text("n_frames = 25\nframe_width = 120\nframe_height = 120\nseed = 4\n")
    assert cli.main(["synth", str(spec), "--out", str(root / "seq")]) == 0
    return root / "seq"


def same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.diff_files or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(same_tree(a / d, b / d) for d in cmp.common_dirs)


class TestSynth:
    def test_layout(self, seq_dir):
        images = list((seq_dir / "img").iterdir())
        lines = (seq_dir / "groundtruth_rect.txt").read_text().splitlines()
        assert len(images) == len(lines) == 25

    def test_teleport(self, tmp_path):
        spec = tmp_path / "t.txt"
        spec.write_text("n_frames = 12\nteleport_frame = 6\nteleport_x = 150\nteleport_y = 20\n")
        assert cli.main(["synth", str(spec), "--out", str(tmp_path / "s")]) == 0
        gt = load_sequence(tmp_path / "s").ground_truth
        assert gt[6].x == pytest.approx(150.0) and gt[5].x == pytest.approx(65.0)

    def test_same_seed_identical(self, tmp_path):
        for name in ("a", "b"):
            assert cli.main(["synth", "--out", str(tmp_path / name), "--seed", "3"]) == 0
        assert same_tree(tmp_path / "a", tmp_path / "b")

    def test_invalid_spec_names_field(self, tmp_path, caplog):
        spec = tmp_path / "bad.txt"
        spec.write_text("object_width = 500\n")
        with caplog.at_level(logging.ERROR, logger="ptav"):
            assert cli.main(["synth", str(spec), "--out", str(tmp_path / "x")]) != 0
        assert "object_width" in caplog.text


class TestTrack:
    def test_outputs(self, seq_dir, tmp_path, capsys):
        assert cli.main(["track", str(seq_dir), "--out", str(tmp_path)]) == 0
        for suffix in ("_report.json", "_frames.csv", "_events.log"):
            assert (tmp_path / f"seq{suffix}").is_file()
        out = capsys.readouterr().out
        for key in ("DPR@20=", "OSR@0.5=", "AUC=", "fps="):
            assert key in out

    def test_missing_groundtruth(self, seq_dir, tmp_path, caplog):
        broken = tmp_path / "broken"
        (broken / "img").mkdir(parents=True)
        for p in (seq_dir / "img").iterdir():
            (broken / "img" / p.name).write_bytes(p.read_bytes())
        with caplog.at_level(logging.ERROR, logger="ptav"):
            assert cli.main(["track", str(broken), "--out", str(tmp_path / "o")]) != 0
        assert str(broken / "groundtruth_rect.txt") in caplog.text

    def test_deterministic_reports_identical(self, seq_dir, tmp_path):
        for name in ("a", "b"):
            args = ["track", str(seq_dir), "--out", str(tmp_path / name), "--mode", "deterministic", "--seed", "7"]
            assert cli.main(args) == 0
        assert same_tree(tmp_path / "a", tmp_path / "b")

    def test_flags_reach_config(self, seq_dir, tmp_path):
        args = ["track", str(seq_dir), "--out", str(tmp_path), "--V", "4", "--tau1", "0.8", "--tau2", "1.7",
                "--beta", "2.0", "--verifier-delay-ms", "1", "--no-verifier", "--mode", "parallel"]
        assert cli.main(args) == 0
        doc = json.loads((tmp_path / "seq_report.json").read_text())
        cfg = doc["config"]
        assert (cfg["V"], cfg["tau1"], cfg["tau2"], cfg["beta"], cfg["verifier"]) == (4, 0.8, 1.7, 2.0, "none")
        assert "fps" in doc  # timing kept outside deterministic mode
        assert doc["events"].get("request", 0) == 0

    def test_effective_config_round_trip(self, seq_dir, tmp_path):
        assert cli.main(["track", str(seq_dir), "--out", str(tmp_path / "a"), "--V", "6"]) == 0
        dumped = tmp_path / "a" / cli.CONFIG_FILENAME
        assert cli.main(["track", str(seq_dir), "--out", str(tmp_path / "b"), "--config", str(dumped)]) == 0
        assert same_tree(tmp_path / "a", tmp_path / "b")


class TestBench:
    def test_mean_of_sequences(self, tmp_path, monkeypatch):
        for name in ("a", "b"):
            (tmp_path / "data" / name).mkdir(parents=True)
        gt = [BoundingBox(0, 0, 10, 10)] * 2
        fake = {"a": [gt[0], gt[1]], "b": [gt[0], gt[1].shifted(50, 50)]}
        monkeypatch.setattr(cli, "load_sequence", lambda p: p.name)
        monkeypatch.setattr(cli, "run_ope", lambda name, cfg: evaluate(name, fake[name], gt, elapsed=0.1))
        assert cli.main(["bench", str(tmp_path / "data"), "--out", str(tmp_path / "out")]) == 0
        agg = json.loads((tmp_path / "out" / "aggregate.json").read_text())
        assert agg["mean_dpr_at_20px"] == 0.75

    def test_empty_dataset(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert cli.main(["bench", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) != 0

    def test_skips_unreadable(self, seq_dir, tmp_path, caplog):
        data = tmp_path / "data"
        for name in ("one", "two"):
            cli.main(["synth", "--out", str(data / name), "--seed", "1"])
        (data / "bad" / "img").mkdir(parents=True)
        with caplog.at_level(logging.WARNING, logger="ptav"):
            assert cli.main(["bench", str(data), "--out", str(tmp_path / "o")]) == 0
        assert "skipping" in caplog.text and "bad" in caplog.text
        agg = json.loads((tmp_path / "o" / "aggregate.json").read_text())
        assert agg["sequences"] == ["one", "two"] and agg["skipped"] == 1

    def test_all_fail(self, tmp_path):
        (tmp_path / "data" / "bad" / "img").mkdir(parents=True)
        assert cli.main(["bench", str(tmp_path / "data"), "--out", str(tmp_path / "o")]) != 0
