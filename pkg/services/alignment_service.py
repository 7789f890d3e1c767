"""
Alignment Service for projecting emphasis across paraphrases and translations

Links are found by mutual argmax over a word similarity matrix. The matrix
comes from a pluggable scorer: character trigrams, an IBM Model 1 lexicon
trained here, or scores computed elsewhere and loaded from a file.
"""
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Set, Tuple, Union

import numpy as np

from errors import (
    EmptyCorpusError,
    IndexOutOfBoundsError,
    InvalidInputError,
    MissingExternalScoresError,
    NotIdenticalError,
    StorageError,
    UnknownScorerError,
)
import logging

logger = logging.getLogger(__name__)

PUNCTUATION = ",:;.?!()"
CORPUS_SEPARATOR = "|||"
VALID_ALIGNERS = ("identity", "chargram", "lexicon:PATH", "external:PATH")
DEFAULT_IBM1_ITERATIONS = 10

ParallelCorpus = List[Tuple[List[str], List[str]]]


@dataclass(frozen=True, order=True)
class AlignmentLink:
    src_index: int
    tgt_index: int
    score: float = field(default=1.0, compare=False)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    src_tokens: Tuple[str, ...]
    tgt_tokens: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(len(self.src_tokens), len(self.tgt_tokens))
        if values.size and (not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1):
            raise InvalidInputError("similarity scores must be finite and within [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass
class Lexicon:
    """Word translation table t(target | source) with the EM log-likelihood trace."""

    table: Dict[str, Dict[str, float]]
    log_likelihood: List[float] = field(default_factory=list)

    def prob(self, source: str, target: str) -> float:
        return self.table.get(source, {}).get(target, 0.0)

    def save(self, path: Union[str, Path]) -> None:
        lines = [
            f"{src}\t{tgt}\t{prob!r}"
            for src in sorted(self.table)
            for tgt, prob in sorted(self.table[src].items())
        ]
        try:
            Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write lexicon to {path}: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Lexicon":
        table: Dict[str, Dict[str, float]] = defaultdict(dict)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to read lexicon {path}: {e}") from e
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise InvalidInputError(f"{path}:{line_no}: expected 'src<TAB>tgt<TAB>prob'")
            table[parts[0]][parts[1]] = float(parts[2])
        return cls(table=dict(table))


class SimilarityScorer(Protocol):
    name: str

    def score(self, src: Sequence[str], tgt: Sequence[str], pair_id: Optional[str] = None) -> np.ndarray:
        """Raw scores in [0, 1] for normalized token lists."""
        ...


class CharGramScorer:
    """Cosine similarity of padded character-trigram count vectors."""

    name = "chargram"

    @staticmethod
    def trigrams(token: str) -> Counter:
        if not token:
            return Counter()
        padded = f"^^{token}$$"
        return Counter(padded[i:i + 3] for i in range(len(padded) - 2))

    def score(self, src: Sequence[str], tgt: Sequence[str], pair_id: Optional[str] = None) -> np.ndarray:
        src_grams = [self.trigrams(token) for token in src]
        tgt_grams = [self.trigrams(token) for token in tgt]
        values = np.zeros((len(src), len(tgt)))
        for i, a in enumerate(src_grams):
            norm_a = math.sqrt(sum(c * c for c in a.values()))
            for j, b in enumerate(tgt_grams):
                norm_b = math.sqrt(sum(c * c for c in b.values()))
                if norm_a and norm_b:
                    values[i, j] = sum(count * b[gram] for gram, count in a.items()) / (norm_a * norm_b)
        return np.clip(values, 0.0, 1.0)


class LexiconScorer:
    """t(tgt | src) from an IBM Model 1 lexicon, each row rescaled by its maximum."""

    name = "lexicon"

    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon

    def score(self, src: Sequence[str], tgt: Sequence[str], pair_id: Optional[str] = None) -> np.ndarray:
        values = np.array([[self.lexicon.prob(s, t) for t in tgt] for s in src], dtype=np.float64)
        values = values.reshape(len(src), len(tgt))
        if values.size:
            row_max = values.max(axis=1, keepdims=True)
            values = np.divide(values, row_max, out=np.zeros_like(values), where=row_max > 0)
        return values


class ExternalScorer:
    """Per-pair similarity matrices computed outside this toolkit."""

    name = "external"

    def __init__(self, scores: Dict[str, np.ndarray]):
        self.scores = scores

    def score(self, src: Sequence[str], tgt: Sequence[str], pair_id: Optional[str] = None) -> np.ndarray:
        if pair_id is None or pair_id not in self.scores:
            raise MissingExternalScoresError(f"no external scores for pair {pair_id!r}")
        values = self.scores[pair_id]
        if values.shape != (len(src), len(tgt)):
            raise MissingExternalScoresError(
                f"external scores for {pair_id!r} have shape {values.shape}, expected {(len(src), len(tgt))}"
            )
        return values

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExternalScorer":
        """
        Parse blocks of ``pair <id>`` followed by one row per source token

        Blocks are separated by blank lines; a pair with an empty source
        sentence is a header alone.
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to read external scores {path}: {e}") from e

        scores: Dict[str, np.ndarray] = {}
        pair_id: Optional[str] = None
        rows: List[List[float]] = []

        def flush():
            if pair_id is None:
                return
            width = len(rows[0]) if rows else 0
            if any(len(row) != width for row in rows):
                raise InvalidInputError(f"{path}: ragged rows for pair {pair_id!r}")
            matrix = np.array(rows, dtype=np.float64).reshape(len(rows), width)
            if matrix.size and (not np.all(np.isfinite(matrix)) or matrix.min() < 0 or matrix.max() > 1):
                raise InvalidInputError(f"{path}: scores for pair {pair_id!r} must lie within [0, 1]")
            scores[pair_id] = matrix

        for line_no, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("pair "):
                flush()
                pair_id = stripped[len("pair "):].strip()
                rows = []
                continue
            if pair_id is None:
                raise InvalidInputError(f"{path}:{line_no}: score row before any 'pair <id>' header")
            try:
                rows.append([float(value) for value in stripped.split()])
            except ValueError as e:
                raise InvalidInputError(f"{path}:{line_no}: {e}") from e
        flush()
        return cls(scores)

    @staticmethod
    def write(path: Union[str, Path], scores: Dict[str, np.ndarray]) -> None:
        blocks = []
        for pair_id in sorted(scores):
            lines = [f"pair {pair_id}"]
            lines.extend(" ".join(f"{value:g}" for value in row) for row in scores[pair_id])
            blocks.append("\n".join(lines))
        try:
            Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write external scores to {path}: {e}") from e


@dataclass
class AlignerConfig:
    """Which similarity path evaluate_utterance takes after the identity check."""

    name: str
    scorer: SimilarityScorer
    min_score: float = 0.0  # links must score above this


class AlignmentService:
    """Service for word-to-word alignment and emphasis projection"""

    @staticmethod
    def normalize_token(text: str) -> str:
        """Lowercase, strip edge punctuation, collapse internal whitespace."""
        collapsed = " ".join(text.lower().split())
        return " ".join(collapsed.strip(PUNCTUATION).split())

    @staticmethod
    def align_identity(src_tokens: Sequence[str], tgt_tokens: Sequence[str]) -> List[AlignmentLink]:
        """
        Diagonal links when both sentences normalize to the same tokens

        Raises:
            NotIdenticalError: callers fall back to similarity alignment
        """
        src = [AlignmentService.normalize_token(t) for t in src_tokens]
        tgt = [AlignmentService.normalize_token(t) for t in tgt_tokens]
        if src != tgt:
            raise NotIdenticalError(f"token sequences differ ({len(src)} vs {len(tgt)} tokens)")
        return [AlignmentLink(i, i, 1.0) for i in range(len(src))]

    @staticmethod
    def train_ibm1(parallel_corpus: ParallelCorpus, iterations: int = DEFAULT_IBM1_ITERATIONS) -> Lexicon:
        """
        Estimate an IBM Model 1 lexicon by expectation-maximization

        Args:
            parallel_corpus: (source tokens, target tokens) pairs
            iterations: EM iterations, at least 1

        Returns:
            Lexicon whose log_likelihood holds the corpus log-likelihood
            before each iteration and after the last one
        """
        if iterations < 1:
            raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
        pairs = [
            ([AlignmentService.normalize_token(t) for t in src], [AlignmentService.normalize_token(t) for t in tgt])
            for src, tgt in parallel_corpus
        ]
        pairs = [(src, tgt) for src, tgt in pairs if src and tgt]
        if not pairs:
            raise EmptyCorpusError("parallel corpus has no non-empty sentence pairs")

        cooccurring: Dict[str, Dict[str, None]] = defaultdict(dict)
        for src, tgt in pairs:
            for s in src:
                for t in tgt:
                    cooccurring[s][t] = None
        table = {s: {t: 1.0 / len(targets) for t in targets} for s, targets in cooccurring.items()}

        def log_likelihood() -> float:
            total = 0.0
            for src, tgt in pairs:
                for t in tgt:
                    total += math.log(sum(table[s][t] for s in src) / len(src))
            return total

        trace: List[float] = []
        for iteration in range(iterations):
            trace.append(log_likelihood())
            counts: Dict[str, Dict[str, float]] = defaultdict(lambda: defaultdict(float))
            for src, tgt in pairs:
                for t in tgt:
                    denominator = sum(table[s][t] for s in src)
                    for s in src:
                        counts[s][t] += table[s][t] / denominator
            table = {}
            for s, row in counts.items():
                total = sum(row.values())
                table[s] = {t: c / total for t, c in row.items()}
            logger.debug(f"IBM-1 iteration {iteration + 1}: log-likelihood before update {trace[-1]:.4f}")
        trace.append(log_likelihood())

        logger.info(f"Trained IBM-1 lexicon on {len(pairs)} pairs, {len(table)} source types, {iterations} iterations")
        return Lexicon(table=table, log_likelihood=trace)

    @staticmethod
    def similarity_matrix(
        src_tokens: Sequence[str],
        tgt_tokens: Sequence[str],
        scorer: SimilarityScorer,
        pair_id: Optional[str] = None,
    ) -> SimilarityMatrix:
        """
        Score every (source, target) word pair

        Identical non-empty normalized tokens always score 1.0.
        """
        if not hasattr(scorer, "score"):
            raise UnknownScorerError(str(scorer), VALID_ALIGNERS)
        src = [AlignmentService.normalize_token(t) for t in src_tokens]
        tgt = [AlignmentService.normalize_token(t) for t in tgt_tokens]
        values = np.array(scorer.score(src, tgt, pair_id), dtype=np.float64).reshape(len(src), len(tgt))
        for i, s in enumerate(src):
            for j, t in enumerate(tgt):
                if s and s == t:
                    values[i, j] = 1.0
        return SimilarityMatrix(tuple(src), tuple(tgt), np.clip(values, 0.0, 1.0))

    @staticmethod
    def align_argmax(
        matrix: Union[SimilarityMatrix, np.ndarray],
        min_score: Optional[float] = None,
    ) -> List[AlignmentLink]:
        """
        Mutual-argmax links; ties go to the lowest index

        Args:
            matrix: Similarity scores
            min_score: When given, links must score strictly above it
        """
        values = matrix.values if isinstance(matrix, SimilarityMatrix) else np.asarray(matrix, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            return []
        row_best = np.argmax(values, axis=1)
        col_best = np.argmax(values, axis=0)
        links = []
        for i, j in enumerate(row_best):
            if col_best[j] != i:
                continue
            score = float(values[i, j])
            if min_score is not None and score <= min_score:
                continue
            links.append(AlignmentLink(i, int(j), score))
        return links

    @staticmethod
    def expected_emphasis(
        gold_src_indices: Iterable[int],
        links: Iterable[AlignmentLink],
        n_src: Optional[int] = None,
    ) -> Set[int]:
        """Target indices linked to any gold source index (possibly empty)."""
        gold = set(gold_src_indices)
        links = list(links)
        for index in gold:
            if index < 0 or (n_src is not None and index >= n_src):
                raise IndexOutOfBoundsError(f"gold index {index} outside source sentence of length {n_src}")
        for link in links:
            if link.src_index < 0 or link.tgt_index < 0 or (n_src is not None and link.src_index >= n_src):
                raise IndexOutOfBoundsError(f"link {link} outside source sentence of length {n_src}")
        return {link.tgt_index for link in links if link.src_index in gold}

    @staticmethod
    def unaligned(gold_src_indices: Iterable[int], links: Iterable[AlignmentLink]) -> Set[int]:
        """Gold source indices without any link."""
        linked = {link.src_index for link in links}
        return {index for index in gold_src_indices if index not in linked}

    @staticmethod
    def alignment_consistency(
        gold_src_indices: Iterable[int],
        renderings: Sequence[Sequence[AlignmentLink]],
    ) -> str:
        """
        Screen a sentence for alignment difficulty

        Returns "easy" when every gold word is linked in every rendering
        (one link set per target language), else "difficult".
        """
        gold = set(gold_src_indices)
        if not renderings:
            return "difficult"
        for links in renderings:
            if AlignmentService.unaligned(gold, links):
                return "difficult"
        return "easy"

    @staticmethod
    def build_aligner(spec: str, ibm1_iterations: int = DEFAULT_IBM1_ITERATIONS) -> AlignerConfig:
        """
        Parse an aligner selection: identity | chargram | lexicon:PATH | external:PATH

        ``identity`` falls back to character trigrams for non-identical
        pairs. ``lexicon:PATH`` takes a saved lexicon or, when the file holds
        ``src ||| tgt`` lines, trains one on it.
        """
        name, _, argument = spec.partition(":")
        if name in ("lexicon", "external") and argument and not Path(argument).is_file():
            raise InvalidInputError(f"aligner file {argument} does not exist")
        if name == "identity" and not argument:
            return AlignerConfig("identity", CharGramScorer())
        if name == "chargram" and not argument:
            return AlignerConfig("chargram", CharGramScorer())
        if name == "lexicon" and argument:
            path = Path(argument)
            if CORPUS_SEPARATOR in _read_text(path):
                lexicon = AlignmentService.train_ibm1(read_parallel_corpus(path), ibm1_iterations)
            else:
                lexicon = Lexicon.load(path)
            return AlignerConfig("lexicon", LexiconScorer(lexicon))
        if name == "external" and argument:
            return AlignerConfig("external", ExternalScorer.load(argument))
        raise UnknownScorerError(spec, VALID_ALIGNERS)


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"failed to read {path}: {e}") from e


def read_parallel_corpus(path: Union[str, Path]) -> ParallelCorpus:
    """Lines of ``src tokens ||| tgt tokens``; blank lines are skipped."""
    corpus: ParallelCorpus = []
    for line_no, line in enumerate(_read_text(Path(path)).splitlines(), start=1):
        if not line.strip():
            continue
        if CORPUS_SEPARATOR not in line:
            raise InvalidInputError(f"{path}:{line_no}: expected 'src ||| tgt'")
        src, tgt = line.split(CORPUS_SEPARATOR, 1)
        corpus.append((src.split(), tgt.split()))
    return corpus


def write_parallel_corpus(path: Union[str, Path], corpus: ParallelCorpus) -> None:
    lines = [f"{' '.join(src)} {CORPUS_SEPARATOR} {' '.join(tgt)}" for src, tgt in corpus]
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"failed to write parallel corpus to {path}: {e}") from e
