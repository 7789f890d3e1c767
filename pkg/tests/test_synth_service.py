"""Tests for the emphasis-controlled utterance generator and dataset writer."""

from collections import Counter, defaultdict

import numpy as np
import pytest

from errors import InvalidIndexError, InvalidInputError, UnmappedTokenError
from models import OutputRecord, UtteranceRecord
from services.alignment_service import ExternalScorer, read_parallel_corpus
from services.audio_service import AudioService
from services.dataset_service import DatasetService
from services.feature_service import FeatureService
from services.synth_service import SimLanguage, SynthConfig, SynthService
from tests.conftest import SMALL_VOCAB, interior_frames


class TestGenUtterance:
    def test_duration_ratio(self, three_words):
        durations = [w.end - w.start for w in three_words.words]
        assert durations[1] / durations[0] == pytest.approx(1.40, abs=0.01)
        assert durations[1] / durations[2] == pytest.approx(1.40, abs=0.01)

    def test_signal_matches_metadata(self, three_words):
        samples = three_words.waveform.samples
        sr = three_words.waveform.sample_rate
        for word in three_words.words:
            inside = samples[int(round(word.start * sr)):int(round(word.end * sr))]
            assert np.count_nonzero(inside) >= len(inside) - 2
        previous_end = 0
        for word in three_words.words:
            start = int(round(word.start * sr))
            np.testing.assert_array_equal(samples[previous_end:start], 0.0)
            previous_end = int(round(word.end * sr))
        np.testing.assert_array_equal(samples[previous_end:], 0.0)

    def test_emphasised_word_louder(self, three_words, frame_spec):
        level = FeatureService().rms_energy_db(three_words.waveform)
        means = []
        for word in three_words.words:
            frames = interior_frames(word.start, word.end, frame_spec, len(level))
            means.append(level[frames].mean())
        assert means[1] >= means[0] + 5.5
        assert means[1] >= means[2] + 5.5

    def test_three_correlates_against_plain_rendering(self, synth, frame_spec):
        tokens = ["north", "south", "east", "west"]
        features = FeatureService()
        for voice in range(4):
            emphatic = synth.gen_utterance(tokens, [2], voice)
            plain = synth.gen_utterance(tokens, [0], voice)

            loud = emphatic.words[2]
            soft = plain.words[2]
            assert (loud.end - loud.start) / (soft.end - soft.start) >= 1.35

            f0_loud, voiced_loud = features.estimate_f0(emphatic.waveform)
            f0_soft, voiced_soft = features.estimate_f0(plain.waveform)
            frames_loud = interior_frames(loud.start, loud.end, frame_spec, len(f0_loud))
            frames_soft = interior_frames(soft.start, soft.end, frame_spec, len(f0_soft))
            assert voiced_loud[frames_loud].all() and voiced_soft[frames_soft].all()
            assert f0_loud[frames_loud].mean() / f0_soft[frames_soft].mean() >= 1.25

            level_loud = features.rms_energy_db(emphatic.waveform)[frames_loud].mean()
            level_soft = features.rms_energy_db(plain.waveform)[frames_soft].mean()
            assert level_loud - level_soft >= 5.5

    def test_emphasis_changes_only_the_boosted_word(self, synth):
        first = synth.gen_utterance(["one", "two", "three"], [0], 1)
        second = synth.gen_utterance(["one", "two", "three"], [1], 1)
        sr = first.waveform.sample_rate
        last_first = first.waveform.samples[int(round(first.words[2].start * sr)):int(round(first.words[2].end * sr))]
        last_second = second.waveform.samples[
            int(round(second.words[2].start * sr)):int(round(second.words[2].end * sr))
        ]
        np.testing.assert_array_equal(last_first, last_second)

    def test_deterministic(self, synth):
        first = synth.gen_utterance(["one", "two", "three"], [1], 2)
        second = SynthService().gen_utterance(["one", "two", "three"], [1], 2)
        np.testing.assert_array_equal(first.waveform.samples, second.waveform.samples)

    def test_jitter_seed_changes_rendering(self):
        first = SynthService(SynthConfig(jitter_seed=0)).gen_utterance(["one", "two"], [0], 0)
        second = SynthService(SynthConfig(jitter_seed=1)).gen_utterance(["one", "two"], [0], 0)
        assert not np.array_equal(first.waveform.samples, second.waveform.samples)

    def test_samples_within_range(self, synth):
        utterance = synth.gen_utterance(["x"] * 3, [0, 1, 2], 3)
        assert np.max(np.abs(utterance.waveform.samples)) <= 1.0

    def test_bad_emphasis_index(self, synth):
        with pytest.raises(InvalidIndexError):
            synth.gen_utterance(["a", "b"], [2], 0)

    def test_bad_voice(self, synth):
        with pytest.raises(InvalidIndexError):
            synth.gen_utterance(["a", "b"], [0], 4)

    def test_empty_sentence(self, synth):
        with pytest.raises(InvalidInputError):
            synth.gen_utterance([], [], 0)

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            SynthConfig(gap=0.02)
        with pytest.raises(InvalidInputError):
            SynthConfig(f0_factor=1.0)


class TestSimLanguage:
    def test_identity_map_and_order(self, synth, three_words):
        pair = synth.gen_translation_pair(three_words, SimLanguage.identity(["alpha", "bravo", "charlie"]))
        assert pair.output.transcript == ["alpha", "bravo", "charlie"]
        assert pair.gold_links == ((0, 0), (1, 1), (2, 2))

    def test_reversal_moves_emphasis(self, synth):
        source = synth.gen_utterance(["alpha", "bravo", "charlie"], [0], 0, utt_id="rev")
        sim_lang = SimLanguage.build(["alpha", "bravo", "charlie"], order="reverse")
        pair = synth.gen_translation_pair(source, sim_lang)
        assert pair.target.emphasized_indices == {2}
        assert pair.gold_links == ((0, 2), (1, 1), (2, 0))
        assert pair.target.record.voice == "v1"

    def test_target_written_under_out_dir(self, synth, tmp_path):
        source = synth.gen_utterance(["alpha", "bravo", "charlie"], [0], 0, utt_id="rev")
        sim_lang = SimLanguage.build(["alpha", "bravo", "charlie"], order="reverse")
        pair = synth.gen_translation_pair(source, sim_lang, out_dir=tmp_path)
        assert pair.output.audio_path == "translation/wavs/rev.wav"
        wav = tmp_path / pair.output.audio_path
        assert len(AudioService.read_wav(wav)) == len(pair.target.waveform)
        labels = DatasetService.read_labels(DatasetService.label_path(wav))
        assert [label.emphasized for label in labels] == [False, False, True]

    def test_map_is_bijective_and_new(self):
        sim_lang = SimLanguage.build(SMALL_VOCAB, seed=4)
        assert len(set(sim_lang.token_map.values())) == len(SMALL_VOCAB)
        assert not set(sim_lang.token_map.values()) & set(SMALL_VOCAB)

    def test_shuffle_is_seeded(self):
        sim_lang = SimLanguage.build(SMALL_VOCAB, seed=4)
        assert sim_lang.permutation(8, "k") == sim_lang.permutation(8, "k")
        assert sorted(sim_lang.permutation(8, "k")) == list(range(8))

    def test_unmapped_token(self, synth):
        source = synth.gen_utterance(["alpha", "zulu"], [0], 0)
        with pytest.raises(UnmappedTokenError):
            synth.gen_translation_pair(source, SimLanguage.identity(["alpha"]))

    def test_map_file_round_trip(self, tmp_path):
        sim_lang = SimLanguage.build(SMALL_VOCAB, seed=4)
        sim_lang.save(tmp_path / "map.tsv")
        assert SimLanguage.load(tmp_path / "map.tsv").token_map == sim_lang.token_map


class TestGenDataset:
    def test_counts(self, small_dataset):
        assert len(small_dataset.records) == 16
        manifest = DatasetService.read_manifest(small_dataset.manifest_path)
        assert [r.id for r in manifest] == [r.id for r in small_dataset.records]
        for record in manifest:
            audio = DatasetService.resolve_audio(small_dataset.out_dir, record.audio_path)
            assert audio.is_file()
            assert DatasetService.label_path(audio).is_file()

    def test_every_sentence_has_two_emphasis_versions(self, small_dataset):
        versions = defaultdict(set)
        for record in small_dataset.records:
            versions[" ".join(record.src_sentence)].add(tuple(record.gold_emphasis))
        assert all(len(v) >= 2 for v in versions.values())

    def test_position_balance(self, synth):
        sentences = synth.sample_sentences(60, SMALL_VOCAB, seed=9)
        by_length = defaultdict(Counter)
        for tokens, emphasis in sentences:
            by_length[len(tokens)].update(emphasis)
        for counts in by_length.values():
            assert max(counts.values()) / sum(counts.values()) <= 0.6

    def test_sentence_lengths(self, synth):
        for tokens, _ in synth.sample_sentences(40, SMALL_VOCAB, seed=1):
            assert 3 <= len(tokens) <= 8

    def test_topline_outputs_match_manifest(self, small_dataset):
        outputs = DatasetService.read_outputs(small_dataset.topline_outputs_path)
        for output, record in zip(outputs, small_dataset.records):
            assert output.transcript == record.src_sentence
            assert output.audio_path == record.audio_path
            assert len(output.word_times) == len(record.src_sentence)

    def test_translation_artifacts(self, small_dataset):
        outputs = DatasetService.read_outputs(small_dataset.translation_outputs_path)
        scorer = ExternalScorer.load(small_dataset.gold_scores_path)
        assert len(outputs) == len(small_dataset.records)
        for output, record in zip(outputs, small_dataset.records):
            n = len(record.src_sentence)
            assert output.id == record.id
            np.testing.assert_array_equal(scorer.scores[record.id], np.eye(n)[:, ::-1])
            audio = DatasetService.resolve_audio(small_dataset.out_dir, output.audio_path)
            assert AudioService.read_wav(audio).duration > 0
        assert len(read_parallel_corpus(small_dataset.parallel_corpus_path)) == 60

    def test_same_seed_same_manifest(self, tmp_path, synth):
        synth.gen_dataset(2, SMALL_VOCAB, tmp_path / "a", seed=7)
        synth.gen_dataset(2, SMALL_VOCAB, tmp_path / "b", seed=7)
        assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()
        wav = "wavs/s0000_v0.wav"
        assert (tmp_path / "a" / wav).read_bytes() == (tmp_path / "b" / wav).read_bytes()

    def test_rejects_small_inputs(self, synth, tmp_path):
        with pytest.raises(InvalidInputError):
            synth.gen_dataset(1, SMALL_VOCAB, tmp_path)
        with pytest.raises(InvalidInputError):
            synth.gen_dataset(4, SMALL_VOCAB[:4], tmp_path)

    def test_screen_needs_translations(self, synth, tmp_path):
        with pytest.raises(InvalidInputError):
            synth.gen_dataset(2, SMALL_VOCAB, tmp_path, screen=True)

    def test_screen_labels_every_utterance(self, synth, tmp_path):
        sim_lang = SimLanguage.build(SMALL_VOCAB, seed=2)
        summary = synth.gen_dataset(4, SMALL_VOCAB, tmp_path, seed=2, sim_lang=sim_lang, parallel_lines=300, screen=True)
        rows = [line.split("\t") for line in summary.screen_path.read_text().splitlines()]
        assert [row[0] for row in rows] == sorted(record.id for record in summary.records)
        assert {row[1] for row in rows} <= {"easy", "difficult"}
        assert sorted(row[0] for row in rows if row[1] == "difficult") == summary.difficult_ids
        kept = {output.id for output in DatasetService.read_outputs(summary.translation_outputs_path)}
        assert kept == {record.id for record in summary.records} - set(summary.difficult_ids)


class TestScreenTranslations:
    def test_version_is_difficult_when_any_voice_misses(self):
        records = [
            UtteranceRecord(id=utt_id, src_sentence=["a", "b"], gold_emphasis=gold, voice=voice)
            for utt_id, gold, voice in (("x_v0", [0], "v0"), ("x_v1", [0], "v1"), ("y_v0", [1], "v0"))
        ]
        outputs = [OutputRecord(id=record.id, audio_path="t.wav", transcript=["p", "q"]) for record in records]
        scorer = ExternalScorer(
            {
                "x_v0": np.eye(2),
                "x_v1": np.array([[0.0, 0.0], [0.0, 1.0]]),
                "y_v0": np.eye(2),
            }
        )
        labels = SynthService.screen_translations(records, outputs, scorer)
        assert labels == {"x_v0": "difficult", "x_v1": "difficult", "y_v0": "easy"}
