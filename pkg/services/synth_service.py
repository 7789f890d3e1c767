"""
Synth Service for speech-like test utterances with known emphasis

Each word is a three-harmonic tone whose pitch depends on the token and the
voice; emphasised words are higher, longer and louder. The generator records
exact word times, so every downstream stage can be checked against truth.
"""
import hashlib
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from errors import InvalidIndexError, InvalidInputError, StorageError, UnmappedTokenError
from models import OutputRecord, UtteranceRecord
from services.alignment_service import (
    AlignmentLink,
    AlignmentService,
    ExternalScorer,
    LexiconScorer,
    ParallelCorpus,
    SimilarityScorer,
    write_parallel_corpus,
)
from services.audio_service import AudioService, Waveform
from services.dataset_service import DatasetService, WordLabel
from settings import SAMPLE_RATE
import logging

logger = logging.getLogger(__name__)

VOICE_NAMES = ("v0", "v1", "v2", "v3")
MIN_SEGMENT_GAP = 0.050
SENTENCE_LENGTHS = (3, 8)
VERSIONS_PER_SENTENCE = 2
TRANSLATION_WAV_DIR = "translation/wavs"

DEFAULT_VOCAB = (
    "the", "cat", "sat", "on", "a", "red", "mat", "we", "saw", "big",
    "dog", "run", "home", "she", "likes", "green", "tea", "they", "built", "small",
    "boat", "near", "old", "river", "you", "found", "my", "blue", "key", "today",
    "he", "reads", "long", "books", "at", "night", "our", "new", "car", "stops",
)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def stable_unit(text: str) -> float:
    """Deterministic value in [0, 1) derived from text (Python's hash() is salted)."""
    digest = hashlib.md5(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def stable_seed(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:4], "big")


@dataclass(frozen=True)
class SynthConfig:
    base_f0: Tuple[float, ...] = (110.0, 150.0, 200.0, 260.0)
    word_duration: float = 0.25
    gap: float = 0.08
    f0_factor: float = 1.3
    duration_factor: float = 1.4
    gain_db: float = 6.0
    jitter_seed: int = 0
    amplitude: float = 0.25
    harmonics: Tuple[float, ...] = (1.0, 0.5, 0.25)
    ramp: float = 0.010
    f0_spread: float = 0.15
    f0_jitter: float = 0.01
    gain_jitter_db: float = 0.2

    def __post_init__(self):
        if len(self.base_f0) != len(VOICE_NAMES):
            raise InvalidInputError(f"base_f0 needs one value per voice ({len(VOICE_NAMES)}), got {len(self.base_f0)}")
        if self.f0_factor <= 1 or self.duration_factor <= 1 or self.gain_db <= 0:
            raise InvalidInputError("emphasis boosts must exceed 1 (f0, duration) and 0 dB (gain)")
        if self.gap < MIN_SEGMENT_GAP:
            raise InvalidInputError(f"gap={self.gap}s is below the {MIN_SEGMENT_GAP}s silence-segmentation gap")
        if self.word_duration <= 2 * self.ramp:
            raise InvalidInputError("word_duration must exceed the two envelope ramps")


@dataclass(frozen=True, eq=False)
class GeneratedUtterance:
    waveform: Waveform
    words: Tuple[WordLabel, ...]
    record: UtteranceRecord

    @property
    def emphasized_indices(self) -> Set[int]:
        return {i for i, word in enumerate(self.words) if word.emphasized}

    def word_times(self) -> List[Tuple[float, float]]:
        return [(word.start, word.end) for word in self.words]


@dataclass(frozen=True, eq=False)
class SimLanguage:
    """
    A simulated target language: a bijective token map plus a word-order rule

    ``order`` is "identity", "reverse" or "shuffle"; shuffles are seeded per
    sentence so the gold alignment of every pair is known.
    """

    token_map: Dict[str, str]
    order: str = "shuffle"
    seed: int = 0

    def __post_init__(self):
        if self.order not in ("identity", "reverse", "shuffle"):
            raise InvalidInputError(f"order must be identity, reverse or shuffle, got {self.order!r}")
        if len(set(self.token_map.values())) != len(self.token_map):
            raise InvalidInputError("sim-lang token map is not bijective")

    @classmethod
    def build(cls, vocab: Sequence[str], seed: int = 0, order: str = "shuffle") -> "SimLanguage":
        rng = np.random.default_rng([seed, 7919])
        taken = {token.lower() for token in vocab}
        token_map: Dict[str, str] = {}
        for token in vocab:
            if token in token_map:
                continue
            while True:
                n_syllables = int(rng.integers(2, 4))
                word = "".join(
                    _CONSONANTS[int(rng.integers(len(_CONSONANTS)))] + _VOWELS[int(rng.integers(len(_VOWELS)))]
                    for _ in range(n_syllables)
                )
                if word not in taken:
                    taken.add(word)
                    token_map[token] = word
                    break
        return cls(token_map=token_map, order=order, seed=seed)

    @classmethod
    def identity(cls, vocab: Sequence[str]) -> "SimLanguage":
        return cls(token_map={token: token for token in vocab}, order="identity")

    def permutation(self, n: int, key: str) -> List[int]:
        """perm[i] is the target position of source word i."""
        if self.order == "identity":
            return list(range(n))
        if self.order == "reverse":
            return list(range(n - 1, -1, -1))
        rng = np.random.default_rng([self.seed, stable_seed(key)])
        return [int(p) for p in rng.permutation(n)]

    def translate(self, tokens: Sequence[str], key: str) -> Tuple[List[str], List[int]]:
        for token in tokens:
            if token not in self.token_map:
                raise UnmappedTokenError(f"token {token!r} has no sim-lang translation")
        perm = self.permutation(len(tokens), key)
        target = [""] * len(tokens)
        for i, token in enumerate(tokens):
            target[perm[i]] = self.token_map[token]
        return target, perm

    def save(self, path: Union[str, Path]) -> None:
        lines = [f"{src}\t{tgt}" for src, tgt in sorted(self.token_map.items())]
        try:
            Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write sim-lang map to {path}: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path], order: str = "shuffle", seed: int = 0) -> "SimLanguage":
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise StorageError(f"failed to read sim-lang map {path}: {e}") from e
        token_map = {}
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InvalidInputError(f"{path}:{line_no}: expected 'src<TAB>tgt'")
            token_map[parts[0]] = parts[1]
        return cls(token_map=token_map, order=order, seed=seed)


@dataclass(frozen=True, eq=False)
class TranslationPair:
    source: GeneratedUtterance
    target: GeneratedUtterance
    output: OutputRecord
    gold_links: Tuple[Tuple[int, int], ...]

    def gold_matrix(self) -> np.ndarray:
        n_src = len(self.source.words)
        n_tgt = len(self.target.words)
        matrix = np.zeros((n_src, n_tgt))
        for i, j in self.gold_links:
            matrix[i, j] = 1.0
        return matrix


@dataclass
class DatasetSummary:
    out_dir: Path
    manifest_path: Path
    topline_outputs_path: Path
    records: List[UtteranceRecord] = field(default_factory=list)
    n_sentences: int = 0
    translation_outputs_path: Optional[Path] = None
    parallel_corpus_path: Optional[Path] = None
    gold_scores_path: Optional[Path] = None
    sim_lang_path: Optional[Path] = None
    screen_path: Optional[Path] = None
    difficult_ids: List[str] = field(default_factory=list)


class SynthService:
    """Service for generating utterances, datasets and simulated translations"""

    def __init__(self, cfg: Optional[SynthConfig] = None):
        self.cfg = cfg or SynthConfig()

    def token_f0_offset(self, token: str) -> float:
        """Per-token pitch multiplier within +/- f0_spread."""
        return 1.0 + self.cfg.f0_spread * (2.0 * stable_unit(token) - 1.0)

    def _render_word(self, n_samples: int, f0: float, amplitude: float) -> np.ndarray:
        t = np.arange(n_samples) / SAMPLE_RATE
        tone = np.zeros(n_samples)
        for k, weight in enumerate(self.cfg.harmonics, start=1):
            tone += weight * np.sin(2.0 * np.pi * k * f0 * t)

        ramp = int(round(self.cfg.ramp * SAMPLE_RATE))
        envelope = np.ones(n_samples)
        rise = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
        envelope[:ramp] = rise
        envelope[n_samples - ramp:] = rise[::-1]
        return amplitude * tone * envelope

    def gen_utterance(
        self,
        tokens: Sequence[str],
        emph_indices: Iterable[int],
        voice: int,
        utt_id: Optional[str] = None,
    ) -> GeneratedUtterance:
        """
        Render tokens as tones separated by silence

        Args:
            tokens: Words of the sentence
            emph_indices: Positions that receive the pitch, duration and gain boosts
            voice: Index into the four voices
            utt_id: Record id; derived from the content when omitted

        Returns:
            GeneratedUtterance with waveform, word metadata and manifest record
        """
        cfg = self.cfg
        tokens = [str(token) for token in tokens]
        if not tokens:
            raise InvalidInputError("cannot render an empty sentence")
        emphasized = set(emph_indices)
        for index in emphasized:
            if not 0 <= index < len(tokens):
                raise InvalidIndexError(f"emphasis index {index} outside sentence of {len(tokens)} tokens")
        if not 0 <= voice < len(VOICE_NAMES):
            raise InvalidIndexError(f"voice {voice} outside 0..{len(VOICE_NAMES) - 1}")

        # jitter is keyed on content, not emphasis, so variants of a sentence share it
        rng = np.random.default_rng([cfg.jitter_seed, voice, stable_seed(" ".join(tokens))])
        jitter = rng.uniform(-1.0, 1.0, size=(len(tokens), 2))

        gap = np.zeros(int(round(cfg.gap * SAMPLE_RATE)))
        pieces = [gap]
        cursor = len(gap)
        words: List[WordLabel] = []
        for i, token in enumerate(tokens):
            is_emphasized = i in emphasized
            duration = cfg.word_duration * (cfg.duration_factor if is_emphasized else 1.0)
            n_samples = int(round(duration * SAMPLE_RATE))
            f0 = cfg.base_f0[voice] * self.token_f0_offset(token) * (1.0 + cfg.f0_jitter * jitter[i, 0])
            gain_db = cfg.gain_jitter_db * jitter[i, 1]
            if is_emphasized:
                f0 *= cfg.f0_factor
                gain_db += cfg.gain_db
            amplitude = cfg.amplitude * 10.0 ** (gain_db / 20.0)

            pieces.append(self._render_word(n_samples, f0, amplitude))
            words.append(WordLabel(token, cursor / SAMPLE_RATE, (cursor + n_samples) / SAMPLE_RATE, is_emphasized))
            cursor += n_samples
            pieces.append(gap)
            cursor += len(gap)

        samples = np.clip(np.concatenate(pieces), -1.0, 1.0)
        fields = dict(
            id=utt_id or f"utt_{stable_seed(' '.join(tokens) + str(sorted(emphasized)) + str(voice)):08x}",
            src_sentence=tokens,
            gold_emphasis=sorted(emphasized),
            voice=VOICE_NAMES[voice],
        )
        # a neutral rendering has no gold emphasis, which manifest validation rejects
        record = UtteranceRecord(**fields) if emphasized else UtteranceRecord.model_construct(**fields)
        return GeneratedUtterance(waveform=Waveform(samples, SAMPLE_RATE), words=tuple(words), record=record)

    def sample_sentences(self, n_sentences: int, vocab: Sequence[str], seed: int) -> List[Tuple[List[str], List[int]]]:
        """
        Draw (tokens, emphasis) versions, VERSIONS_PER_SENTENCE per distinct sentence

        Every sentence string gets distinct emphasis positions; an odd count
        gives the last sentence one extra version.
        """
        if len(vocab) < 5:
            raise InvalidInputError(f"vocab must hold at least 5 tokens, got {len(vocab)}")
        if n_sentences < 2:
            raise InvalidInputError(f"n_sentences must be >= 2, got {n_sentences}")

        rng = np.random.default_rng(seed)
        n_bases = n_sentences // VERSIONS_PER_SENTENCE
        versions = [VERSIONS_PER_SENTENCE] * n_bases
        versions[-1] += n_sentences - VERSIONS_PER_SENTENCE * n_bases

        seen: Set[Tuple[str, ...]] = set()
        sentences: List[Tuple[List[str], List[int]]] = []
        attempts = 0
        for n_versions in versions:
            while True:
                attempts += 1
                if attempts > 1000 * n_sentences:
                    raise InvalidInputError(f"vocab of {len(vocab)} tokens cannot supply {n_bases} distinct sentences")
                length = int(rng.integers(SENTENCE_LENGTHS[0], SENTENCE_LENGTHS[1] + 1))
                picks = rng.choice(len(vocab), size=length, replace=length > len(vocab))
                tokens = tuple(str(vocab[int(p)]) for p in picks)
                if tokens not in seen:
                    seen.add(tokens)
                    break
            positions = rng.choice(len(tokens), size=n_versions, replace=False)
            sentences.extend((list(tokens), [int(p)]) for p in positions)
        return sentences

    def gen_dataset(
        self,
        n_sentences: int,
        vocab: Sequence[str],
        out_dir: Union[str, Path],
        seed: int = 0,
        sim_lang: Optional[SimLanguage] = None,
        parallel_lines: int = 500,
        screen: bool = False,
    ) -> DatasetSummary:
        """
        Render a full dataset: every sentence version in every voice

        Writes ``wavs/`` (audio plus label files), ``manifest.jsonl`` and
        ``topline_outputs.jsonl`` (each utterance as its own output). With a
        sim-lang it also writes re-voiced translations, their outputs, the
        gold alignments as external scores, the map and a parallel corpus. With
        ``screen`` each sentence version is aligned with a lexicon trained on
        that corpus; ``alignment_screen.tsv`` labels it easy or difficult and
        difficult versions are left out of the translation outputs.
        """
        if screen and sim_lang is None:
            raise InvalidInputError("alignment screening needs simulated translations")
        out_dir = Path(out_dir)
        sentences = self.sample_sentences(n_sentences, vocab, seed)
        wav_dir = out_dir / "wavs"
        try:
            wav_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"cannot create {wav_dir}: {e}") from e

        records: List[UtteranceRecord] = []
        topline: List[OutputRecord] = []
        generated: List[GeneratedUtterance] = []
        for sentence_index, (tokens, emphasis) in enumerate(sentences):
            for voice in range(len(VOICE_NAMES)):
                utt_id = f"s{sentence_index:04d}_{VOICE_NAMES[voice]}"
                utterance = self.gen_utterance(tokens, emphasis, voice, utt_id=utt_id)
                audio_path = f"wavs/{utt_id}.wav"
                self._write_utterance(out_dir / audio_path, utterance)
                record = utterance.record.model_copy(update={"audio_path": audio_path})
                records.append(record)
                generated.append(replace(utterance, record=record))
                topline.append(
                    OutputRecord(id=utt_id, audio_path=audio_path, transcript=list(tokens), word_times=utterance.word_times())
                )

        summary = DatasetSummary(
            out_dir=out_dir,
            manifest_path=out_dir / "manifest.jsonl",
            topline_outputs_path=out_dir / "topline_outputs.jsonl",
            records=records,
            n_sentences=len(sentences),
        )
        DatasetService.write_manifest(summary.manifest_path, records)
        DatasetService.write_outputs(summary.topline_outputs_path, topline)
        logger.info(f"Generated {len(records)} utterances from {len(sentences)} sentence versions in {out_dir}")

        if sim_lang is not None:
            self._write_translations(out_dir, generated, vocab, sim_lang, seed, parallel_lines, summary, screen)
        return summary

    def _write_utterance(self, wav_path: Path, utterance: GeneratedUtterance) -> None:
        AudioService.write_wav(wav_path, utterance.waveform)
        DatasetService.write_labels(DatasetService.label_path(wav_path), utterance.words)

    def _write_translations(
        self,
        out_dir: Path,
        generated: Sequence[GeneratedUtterance],
        vocab: Sequence[str],
        sim_lang: SimLanguage,
        seed: int,
        parallel_lines: int,
        summary: DatasetSummary,
        screen: bool = False,
    ) -> None:
        outputs: List[OutputRecord] = []
        gold_scores: Dict[str, np.ndarray] = {}
        for utterance in generated:
            pair = self.gen_translation_pair(utterance, sim_lang, out_dir=out_dir)
            outputs.append(pair.output)
            gold_scores[utterance.record.id] = pair.gold_matrix()
        corpus = self.gen_parallel_corpus(parallel_lines, vocab, sim_lang, seed)

        summary.translation_outputs_path = out_dir / "translation_outputs.jsonl"
        summary.gold_scores_path = out_dir / "gold_alignment.scores"
        summary.sim_lang_path = out_dir / "sim_lang.tsv"
        summary.parallel_corpus_path = out_dir / "parallel.txt"

        if screen:
            labels = self.screen_translations(summary.records, outputs, LexiconScorer(AlignmentService.train_ibm1(corpus)))
            summary.screen_path = out_dir / "alignment_screen.tsv"
            summary.difficult_ids = sorted(utt_id for utt_id, label in labels.items() if label != "easy")
            lines = [f"{utt_id}\t{labels[utt_id]}" for utt_id in sorted(labels)]
            try:
                summary.screen_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            except OSError as e:
                raise StorageError(f"failed to write {summary.screen_path}: {e}") from e
            difficult = set(summary.difficult_ids)
            outputs = [out for out in outputs if out.id not in difficult]
            if difficult:
                logger.warning(f"Dropped {len(difficult)} translations of sentences that do not align consistently")

        DatasetService.write_outputs(summary.translation_outputs_path, outputs)
        ExternalScorer.write(summary.gold_scores_path, gold_scores)
        sim_lang.save(summary.sim_lang_path)
        write_parallel_corpus(summary.parallel_corpus_path, corpus)
        logger.info(f"Generated {len(outputs)} simulated translations and {parallel_lines} parallel lines")

    @staticmethod
    def screen_translations(
        records: Sequence[UtteranceRecord],
        outputs: Sequence[OutputRecord],
        scorer: SimilarityScorer,
    ) -> Dict[str, str]:
        """
        Label every utterance with the alignment difficulty of its sentence version

        The renderings of one version (same tokens, same emphasis) in every
        voice are aligned with ``scorer``; the version is "easy" only when
        each emphasised word is linked in all of them.
        """
        by_id = {record.id: record for record in records}
        groups: Dict[Tuple[Tuple[str, ...], Tuple[int, ...]], List[str]] = defaultdict(list)
        renderings: Dict[Tuple[Tuple[str, ...], Tuple[int, ...]], List[List[AlignmentLink]]] = defaultdict(list)
        for out in outputs:
            record = by_id[out.id]
            key = (tuple(record.src_sentence), tuple(record.gold_emphasis))
            matrix = AlignmentService.similarity_matrix(record.src_sentence, out.transcript, scorer, pair_id=out.id)
            groups[key].append(out.id)
            renderings[key].append(AlignmentService.align_argmax(matrix, min_score=0.0))

        labels: Dict[str, str] = {}
        for key, ids in groups.items():
            label = AlignmentService.alignment_consistency(key[1], renderings[key])
            for utt_id in ids:
                labels[utt_id] = label
        return labels

    def gen_translation_pair(
        self,
        utterance: GeneratedUtterance,
        sim_lang: SimLanguage,
        out_dir: Optional[Union[str, Path]] = None,
        voice: Optional[int] = None,
    ) -> TranslationPair:
        """
        Translate an utterance into the simulated language and re-render it

        The output uses the next voice unless ``voice`` is given; emphasis
        moves with the permutation, which is also the gold alignment. With
        ``out_dir`` the target audio and its labels are written to
        ``translation/wavs/<id>.wav`` under it and the output points there.
        Without it the output has an empty audio_path and is not evaluable.
        """
        record = utterance.record
        target_tokens, perm = sim_lang.translate(record.src_sentence, record.id)
        if voice is None:
            source_voice = VOICE_NAMES.index(record.voice) if record.voice in VOICE_NAMES else 0
            voice = (source_voice + 1) % len(VOICE_NAMES)

        target_emphasis = sorted(perm[i] for i in utterance.emphasized_indices)
        target = self.gen_utterance(target_tokens, target_emphasis, voice, utt_id=record.id)
        audio_path = ""
        if out_dir is not None:
            audio_path = f"{TRANSLATION_WAV_DIR}/{record.id}.wav"
            wav_path = Path(out_dir) / audio_path
            try:
                wav_path.parent.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise StorageError(f"cannot create {wav_path.parent}: {e}") from e
            self._write_utterance(wav_path, target)
        output = OutputRecord(
            id=record.id,
            audio_path=audio_path,
            transcript=target_tokens,
            word_times=target.word_times(),
        )
        return TranslationPair(
            source=utterance,
            target=target,
            output=output,
            gold_links=tuple((i, perm[i]) for i in range(len(perm))),
        )

    def gen_parallel_corpus(
        self,
        n_lines: int,
        vocab: Sequence[str],
        sim_lang: SimLanguage,
        seed: int = 0,
    ) -> ParallelCorpus:
        """Text-only sentence pairs for lexicon training."""
        rng = np.random.default_rng([seed, 104729])
        corpus: ParallelCorpus = []
        for line in range(n_lines):
            length = int(rng.integers(SENTENCE_LENGTHS[0], SENTENCE_LENGTHS[1] + 1))
            picks = rng.choice(len(vocab), size=length, replace=length > len(vocab))
            tokens = [str(vocab[int(p)]) for p in picks]
            target, _ = sim_lang.translate(tokens, f"parallel-{line}")
            corpus.append((tokens, target))
        return corpus
