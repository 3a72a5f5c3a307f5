import json

import numpy as np
import pytest

from charconductor import checkpoint as ckpt_io
from charconductor.checkpoint import param_count
from charconductor.cli import WeightSchedule, main
from charconductor.lstm import ModelArchitecture


def write_corpus(tmp_path, name="pattern.txt", text=None):
    p = tmp_path / name
    p.write_text(text or "hello world\n" * 90)
    return p


class TestTrainCommand:
    def test_train_writes_checkpoint_and_report(self, tmp_path):
        corpus = write_corpus(tmp_path)
        out = tmp_path / "model.ckpt"
        report = tmp_path / "report.json"
        code = main(
            [
                "train",
                "--corpus", str(corpus),
                "--layers", "8",
                "--steps", "30",
                "--seq-len", "16",
                "--batch-size", "2",
                "--out", str(out),
                "--report", str(report),
            ]
        )
        assert code == 0
        ckpt = ckpt_io.load(out)
        assert ckpt.metadata["corpus"] == "pattern"
        assert ckpt.metadata["training_steps"] == 30
        rows = json.loads(report.read_text())["rows"]
        assert rows[-1]["step"] == 30
        # stats sidecar appears next to the corpus
        assert (tmp_path / "pattern.txt.stats.json").exists()

    def test_missing_corpus_is_usage_error(self, tmp_path):
        code = main(
            ["train", "--corpus", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "x")]
        )
        assert code == 2

    def test_same_seed_identical_checkpoints(self, tmp_path):
        corpus = write_corpus(tmp_path)
        outs = []
        for name in ("a.ckpt", "b.ckpt"):
            out = tmp_path / name
            code = main(
                [
                    "train",
                    "--corpus", str(corpus),
                    "--layers", "8",
                    "--steps", "25",
                    "--seq-len", "16",
                    "--batch-size", "2",
                    "--seed", "5",
                    "--out", str(out),
                ]
            )
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_bad_flag_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--nonsense"])
        assert exc.value.code == 2


class TestGenerateCommand:
    def test_exact_char_count_and_determinism(self, checkpoint_dir, tmp_path):
        manifest = checkpoint_dir / "manifest.json"
        outputs = []
        for name in ("t1.txt", "t2.txt"):
            transcript = tmp_path / name
            log = tmp_path / (name + ".jsonl")
            code = main(
                [
                    "generate",
                    "--manifest", str(manifest),
                    "--chars", "120",
                    "--seed-text", "hello",
                    "--rng-seed", "3",
                    "--transcript", str(transcript),
                    "--event-log", str(log),
                ]
            )
            assert code == 0
            assert len(transcript.read_text()) == 120
            outputs.append((transcript.read_bytes(), log.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_one_hot_weights_match_single_model_manifest(self, checkpoint_dir, tmp_path):
        single = {
            "session": "solo",
            "models": [{"name": "beta", "checkpoint": "beta.ckpt"}],
        }
        solo_manifest = checkpoint_dir / "solo.json"
        solo_manifest.write_text(json.dumps(single))

        t_ens = tmp_path / "ens.txt"
        t_solo = tmp_path / "solo.txt"
        assert main(
            [
                "generate",
                "--manifest", str(checkpoint_dir / "manifest.json"),
                "--weights", "0,1,0",
                "--chars", "150",
                "--seed-text", "abc",
                "--rng-seed", "11",
                "--transcript", str(t_ens),
            ]
        ) == 0
        assert main(
            [
                "generate",
                "--manifest", str(solo_manifest),
                "--chars", "150",
                "--seed-text", "abc",
                "--rng-seed", "11",
                "--transcript", str(t_solo),
            ]
        ) == 0
        assert t_ens.read_bytes() == t_solo.read_bytes()

    def test_schedule_echoed_in_event_log(self, checkpoint_dir, tmp_path):
        schedule = tmp_path / "schedule.jsonl"
        schedule.write_text(
            json.dumps({"step": 0, "weights": [1, 0, 0]})
            + "\n"
            + json.dumps({"step": 10, "weights": [0, 0, 1]})
            + "\n"
        )
        log = tmp_path / "events.jsonl"
        code = main(
            [
                "generate",
                "--manifest", str(checkpoint_dir / "manifest.json"),
                "--schedule", str(schedule),
                "--chars", "20",
                "--rng-seed", "0",
                "--transcript", str(tmp_path / "t.txt"),
                "--event-log", str(log),
            ]
        )
        assert code == 0
        lines = [json.loads(line) for line in log.read_text().splitlines()]
        assert lines[0]["pi"] == [1.0, 0.0, 0.0]
        assert lines[5]["pi"] == [0.5, 0.0, 0.5]
        assert lines[15]["pi"] == [0.0, 0.0, 1.0]
        assert all(line["type"] == "event" for line in lines)

    def test_wrong_weight_vector_length(self, checkpoint_dir, tmp_path):
        code = main(
            [
                "generate",
                "--manifest", str(checkpoint_dir / "manifest.json"),
                "--weights", "1,0",
                "--chars", "5",
                "--transcript", str(tmp_path / "t.txt"),
            ]
        )
        assert code == 2

    def test_beam_mode_runs(self, checkpoint_dir, tmp_path):
        transcript = tmp_path / "beam.txt"
        code = main(
            [
                "generate",
                "--manifest", str(checkpoint_dir / "manifest.json"),
                "--chars", "30",
                "--beam",
                "--beam-depth", "2",
                "--beam-width", "3",
                "--rng-seed", "1",
                "--transcript", str(transcript),
            ]
        )
        assert code == 0
        assert len(transcript.read_text()) == 30


class TestInspectCommand:
    def test_param_count_closed_form(self, tmp_path, capsys):
        from conftest import make_random_checkpoint

        ckpt = make_random_checkpoint(layer_sizes=(256,), seed=0)
        path = tmp_path / "m.ckpt"
        ckpt_io.save(ckpt, path)
        assert main(["inspect", str(path)]) == 0
        out = capsys.readouterr().out
        expected = 4 * (128 * 256 + 256 * 256 + 256) + 128 * 256 + 128
        assert str(expected) in out
        assert param_count(ModelArchitecture(layer_sizes=(256,))) == expected

    def test_truncated_checkpoint_is_runtime_error(self, tmp_path):
        from conftest import make_random_checkpoint

        path = tmp_path / "m.ckpt"
        ckpt_io.save(make_random_checkpoint(), path)
        path.write_bytes(path.read_bytes()[:-40])
        assert main(["inspect", str(path)]) == 1

    def test_missing_checkpoint_is_usage_error(self, tmp_path):
        assert main(["inspect", str(tmp_path / "ghost.ckpt")]) == 2

    def test_save_load_inspect_stable(self, tmp_path, capsys):
        from conftest import make_random_checkpoint

        p1 = tmp_path / "a.ckpt"
        p2 = tmp_path / "b.ckpt"
        ckpt_io.save(make_random_checkpoint(seed=3), p1)
        ckpt_io.save(ckpt_io.load(p1), p2)
        assert main(["inspect", str(p1)]) == 0
        first = capsys.readouterr().out.splitlines()[1:]
        assert main(["inspect", str(p2)]) == 0
        second = capsys.readouterr().out.splitlines()[1:]
        assert first == second


class TestBenchCommand:
    def test_csv_output_shape(self, checkpoint_dir, capsys):
        code = main(
            [
                "bench",
                "--manifest", str(checkpoint_dir / "manifest.json"),
                "--models", "1,2,3",
                "--steps", "30",
                "--repeats", "1",
            ]
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "models,chars_per_second,ms_per_char,steps"
        rows = [line.split(",") for line in lines[1:]]
        assert [r[0] for r in rows] == ["1", "2", "3"]
        for r in rows:
            assert float(r[1]) > 0

    def test_too_many_models_requested(self, checkpoint_dir):
        code = main(
            ["bench", "--manifest", str(checkpoint_dir / "manifest.json"), "--models", "9"]
        )
        assert code == 2
