"""End-to-end tests of emphman.py commands and exit codes."""

import json

import pytest

from emphman import EXIT_INVALID, EXIT_OK, main


@pytest.fixture(scope="module")
def trained_model(small_dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.json"
    code = main(["train", "--manifest", str(small_dataset.manifest_path), "--model-out", str(path), "--epochs", "20"])
    assert code == EXIT_OK
    return path


class TestGenData:
    def test_writes_four_voices_per_sentence(self, tmp_path, capsys):
        assert main(["gen-data", "--n", "10", "--out-dir", str(tmp_path)]) == EXIT_OK
        assert len(list((tmp_path / "wavs").glob("*.wav"))) == 40
        assert "✅ 40 utterances" in capsys.readouterr().out

    def test_repeatable(self, tmp_path):
        for name in ("a", "b"):
            assert main(["gen-data", "--n", "2", "--vocab", "10", "--out-dir", str(tmp_path / name)]) == EXIT_OK
        assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()

    def test_sim_lang_outputs(self, tmp_path):
        args = ["gen-data", "--n", "2", "--vocab", "10", "--sim-lang", "shuffle", "--parallel-lines", "20"]
        assert main(args + ["--out-dir", str(tmp_path)]) == EXIT_OK
        for name in ("translation_outputs.jsonl", "gold_alignment.scores", "sim_lang.tsv", "parallel.txt"):
            assert (tmp_path / name).is_file()

    def test_screen(self, tmp_path, capsys):
        args = ["gen-data", "--n", "2", "--vocab", "10", "--sim-lang", "reverse", "--parallel-lines", "100", "--screen"]
        assert main(args + ["--out-dir", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "alignment_screen.tsv").is_file()
        assert "alignment screen:" in capsys.readouterr().out

    def test_screen_without_sim_lang(self, tmp_path):
        assert main(["gen-data", "--n", "2", "--screen", "--out-dir", str(tmp_path)]) == EXIT_INVALID

    def test_zero_sentences(self, tmp_path):
        assert main(["gen-data", "--n", "0", "--out-dir", str(tmp_path)]) == EXIT_INVALID

    def test_vocab_out_of_range(self, tmp_path):
        assert main(["gen-data", "--vocab", "3", "--out-dir", str(tmp_path)]) == EXIT_INVALID

    def test_vocab_file(self, tmp_path):
        words = tmp_path / "words.txt"
        words.write_text("north south east west up down\n")
        assert main(["gen-data", "--n", "2", "--vocab", str(words), "--out-dir", str(tmp_path / "out")]) == EXIT_OK

    def test_missing_out_dir_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["gen-data", "--n", "2"])
        assert info.value.code == EXIT_INVALID


class TestEvaluate:
    def test_oracle_topline(self, small_dataset, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(
            [
                "evaluate",
                "--manifest", str(small_dataset.manifest_path),
                "--outputs", str(small_dataset.topline_outputs_path),
                "--oracle",
                "--report-out", str(report),
            ]
        )
        assert code == EXIT_OK
        assert "1.000" in capsys.readouterr().out
        document = json.loads(report.read_text())
        assert document["micro"]["f1"] == 1.0
        assert len(document["per_utterance"]) == 16

    def test_external_gold_alignment(self, small_dataset, capsys):
        code = main(
            [
                "evaluate",
                "--manifest", str(small_dataset.manifest_path),
                "--outputs", str(small_dataset.translation_outputs_path),
                "--oracle",
                "--aligner", f"external:{small_dataset.gold_scores_path}",
            ]
        )
        assert code == EXIT_OK
        assert "1.000" in capsys.readouterr().out

    def test_trained_model(self, small_dataset, trained_model):
        code = main(
            [
                "evaluate",
                "--manifest", str(small_dataset.manifest_path),
                "--outputs", str(small_dataset.topline_outputs_path),
                "--model", str(trained_model),
                "--jobs", "2",
            ]
        )
        assert code == EXIT_OK

    def test_unknown_aligner(self, small_dataset, capsys):
        code = main(
            [
                "evaluate",
                "--manifest", str(small_dataset.manifest_path),
                "--outputs", str(small_dataset.topline_outputs_path),
                "--null",
                "--aligner", "levenshtein",
            ]
        )
        assert code == EXIT_INVALID
        assert "chargram" in capsys.readouterr().err

    def test_missing_outputs(self, small_dataset, tmp_path):
        code = main(
            [
                "evaluate",
                "--manifest", str(small_dataset.manifest_path),
                "--outputs", str(tmp_path / "absent.jsonl"),
                "--null",
            ]
        )
        assert code == EXIT_INVALID

    def test_needs_a_detector(self, small_dataset):
        with pytest.raises(SystemExit) as info:
            main(["evaluate", "--manifest", str(small_dataset.manifest_path), "--outputs", "x.jsonl"])
        assert info.value.code == EXIT_INVALID

    def test_detector_from_config(self, small_dataset, tmp_path, capsys):
        config = tmp_path / "eval.cfg"
        config.write_text(
            f"# topline run\nmanifest={small_dataset.manifest_path}\n"
            f"--outputs={small_dataset.topline_outputs_path}\noracle=true\n"
        )
        assert main(["evaluate", "--config", str(config)]) == EXIT_OK
        assert "1.000" in capsys.readouterr().out

    def test_config_unknown_key(self, tmp_path):
        config = tmp_path / "eval.cfg"
        config.write_text("colour=blue\n")
        with pytest.raises(SystemExit) as info:
            main(["evaluate", "--config", str(config)])
        assert info.value.code == EXIT_INVALID


class TestTrain:
    def test_missing_manifest(self, tmp_path):
        code = main(["train", "--manifest", str(tmp_path / "absent.jsonl"), "--model-out", str(tmp_path / "m.json")])
        assert code == EXIT_INVALID

    def test_zero_epochs_warns(self, small_dataset, tmp_path, capsys):
        model = tmp_path / "m.json"
        code = main(
            ["train", "--manifest", str(small_dataset.manifest_path), "--model-out", str(model), "--epochs", "0"]
        )
        assert code == EXIT_OK
        assert "⚠️" in capsys.readouterr().out
        assert not any(json.loads(model.read_text())["weights"])

    def test_explicit_flag_beats_config(self, small_dataset, tmp_path):
        config = tmp_path / "train.cfg"
        config.write_text(f"epochs=5\nmodel-out={tmp_path / 'from_config.json'}\n")
        code = main(
            ["train", "--config", str(config), "--manifest", str(small_dataset.manifest_path), "--epochs", "0"]
        )
        assert code == EXIT_OK
        assert json.loads((tmp_path / "from_config.json").read_text())["epochs"] == 0


class TestClassify:
    def test_frame_summary(self, small_dataset, trained_model, capsys):
        wav = small_dataset.out_dir / small_dataset.records[0].audio_path
        assert main(["classify", "--wav", str(wav), "--model", str(trained_model)]) == EXIT_OK
        assert "frames" in capsys.readouterr().out

    def test_word_table_and_feature_dump(self, small_dataset, trained_model, tmp_path, capsys):
        wav = small_dataset.out_dir / small_dataset.records[0].audio_path
        spans = wav.with_suffix(".words.tsv")
        dump = tmp_path / "features.tsv"
        code = main(
            ["classify", "--wav", str(wav), "--model", str(trained_model), "--spans", str(spans), "--dump-features", str(dump)]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        for token in small_dataset.records[0].src_sentence:
            assert token in out
        assert dump.read_text().startswith("f0_z")

    def test_fingerprint_mismatch(self, small_dataset, trained_model):
        wav = small_dataset.out_dir / small_dataset.records[0].audio_path
        code = main(["classify", "--wav", str(wav), "--model", str(trained_model), "--f0-min", "70"])
        assert code == EXIT_INVALID


class TestAlign:
    def test_consistent_renderings(self, capsys):
        code = main(
            ["align", "--src", "a b c", "--tgt", "a b c", "--tgt", "c b a", "--gold", "0", "--aligner", "chargram"]
        )
        assert code == EXIT_OK
        assert "alignment consistency: easy" in capsys.readouterr().out

    def test_dropped_gold_word(self, capsys):
        code = main(
            ["align", "--src", "a b c", "--tgt", "a b c", "--tgt", "x b c", "--gold", "0", "--aligner", "chargram"]
        )
        assert code == EXIT_OK
        assert "alignment consistency: difficult" in capsys.readouterr().out

    def test_lexicon_from_corpus(self, small_dataset, tmp_path, capsys):
        lexicon = tmp_path / "lex.tsv"
        code = main(["align", "--corpus", str(small_dataset.parallel_corpus_path), "--lexicon-out", str(lexicon)])
        assert code == EXIT_OK
        assert lexicon.is_file()
        assert "Trained IBM-1 on 60 lines" in capsys.readouterr().out

    def test_src_without_tgt(self):
        assert main(["align", "--src", "a b c"]) == EXIT_INVALID


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_OK
    assert "gen-data" in capsys.readouterr().out
