"""
Pipeline Service for scoring emphasis transfer over a dataset

For every (source, output) pair: find word spans in the output audio, detect
which output words are emphasised, align source words to output words, and
compare the detected set with the gold emphasis carried across the alignment.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Set, Tuple, Union

from errors import (
    EmphasisError,
    EmptyDatasetError,
    IdMismatchError,
    InvalidInputError,
    NotIdenticalError,
    UnknownIdError,
)
from models import (
    SEGMENT_FALLBACK,
    UNALIGNED,
    ClassifierModel,
    EvalReport,
    OutputRecord,
    PRFScore,
    UtteranceRecord,
    UtteranceResult,
)
from services.alignment_service import AlignerConfig, AlignmentService, CharGramScorer
from services.audio_service import AudioService, FrameSpec, Waveform
from services.classifier_service import ClassifierService
from services.dataset_service import DatasetService
from services.metrics_service import MetricsService
from services.segmentation_service import SegmentationService, WordSpan
from settings import VALID_ERROR_POLICIES
import logging

logger = logging.getLogger(__name__)


class EmphasisDetector(Protocol):
    """Decides which output words are emphasised."""

    name: str

    def detect(self, waveform: Waveform, audio_path: Path, spans: Sequence[WordSpan]) -> Set[int]: ...


class ModelDetector:
    """Trained frame classifier plus the >50%-of-frames word rule."""

    name = "model"

    def __init__(self, model: ClassifierModel, classifier: Optional[ClassifierService] = None, threshold: float = 0.5):
        self.model = model
        self.classifier = classifier or ClassifierService()
        self.threshold = threshold

    def detect(self, waveform: Waveform, audio_path: Path, spans: Sequence[WordSpan]) -> Set[int]:
        probs = self.classifier.predict_waveform(self.model, waveform)
        decisions = self.classifier.aggregate_to_words(probs, spans, self.threshold)
        return {span.token_index for span, decision in zip(spans, decisions) if decision.emphasized}


class OracleDetector:
    """Reads the emphasis flags written next to generated audio."""

    name = "oracle"

    def detect(self, waveform: Waveform, audio_path: Path, spans: Sequence[WordSpan]) -> Set[int]:
        labels = DatasetService.find_labels(audio_path)
        if labels is None:
            raise InvalidInputError(f"oracle needs {DatasetService.label_path(audio_path)}, which does not exist")
        if len(labels) != len(spans):
            raise InvalidInputError(f"label file for {audio_path} has {len(labels)} words, output has {len(spans)}")
        return {i for i, label in enumerate(labels) if label.emphasized}


class NullDetector:
    """Chance baseline: a system that never emphasises anything."""

    name = "null"

    def detect(self, waveform: Waveform, audio_path: Path, spans: Sequence[WordSpan]) -> Set[int]:
        return set()


@dataclass
class PipelineConfig:
    aligner: AlignerConfig = field(default_factory=lambda: AlignerConfig("identity", CharGramScorer()))
    frame_spec: FrameSpec = field(default_factory=FrameSpec)
    error_policy: str = "skip"
    jobs: int = 1
    gate_db: float = -40.0
    min_gap: float = 0.050

    def __post_init__(self):
        if self.error_policy not in VALID_ERROR_POLICIES:
            raise InvalidInputError(
                f"error_policy must be one of {', '.join(VALID_ERROR_POLICIES)}, got {self.error_policy!r}"
            )
        if self.jobs < 1:
            raise InvalidInputError(f"jobs must be >= 1, got {self.jobs}")


class PipelineService:
    """Service for per-utterance and dataset-level emphasis-transfer scoring"""

    def __init__(self, detector: EmphasisDetector, cfg: Optional[PipelineConfig] = None):
        self.detector = detector
        self.cfg = cfg or PipelineConfig()
        self.segmentation = SegmentationService(self.cfg.frame_spec)

    def word_spans(self, out: OutputRecord, waveform: Waveform) -> Tuple[List[WordSpan], bool]:
        """Spans for the output words and whether silence segmentation was needed."""
        if out.word_times is not None:
            n_frames = AudioService.frame_count(len(waveform), self.cfg.frame_spec)
            word_times = [(token, start, end) for token, (start, end) in zip(out.transcript, out.word_times)]
            return self.segmentation.spans_from_timestamps(word_times, n_frames), False
        spans = self.segmentation.segment_by_silence(
            waveform, len(out.transcript), gate_db=self.cfg.gate_db, min_gap=self.cfg.min_gap
        )
        return spans, True

    def evaluate_utterance(
        self,
        src: UtteranceRecord,
        out: OutputRecord,
        base_dir: Union[str, Path] = ".",
    ) -> UtteranceResult:
        """
        Score one output against its source

        Args:
            src: Manifest row with the gold emphasis
            out: System output; audio_path resolves against base_dir
            base_dir: Directory of the outputs file

        Returns:
            UtteranceResult with expected/predicted target indices and counts
        """
        if src.id != out.id:
            raise IdMismatchError(f"source id {src.id!r} does not match output id {out.id!r}")
        if not out.audio_path:
            raise InvalidInputError(f"output {out.id!r} has no audio_path")

        audio_path = DatasetService.resolve_audio(base_dir, out.audio_path)
        waveform = AudioService.read_wav(audio_path)
        flags: List[str] = []

        spans, fell_back = self.word_spans(out, waveform)
        if fell_back:
            logger.warning(f"{src.id}: no word_times, segmented output at silences")
            flags.append(SEGMENT_FALLBACK)

        predicted = self.detector.detect(waveform, audio_path, spans)

        try:
            links = AlignmentService.align_identity(src.src_sentence, out.transcript)
            alignment = "identity"
        except NotIdenticalError:
            matrix = AlignmentService.similarity_matrix(
                src.src_sentence, out.transcript, self.cfg.aligner.scorer, pair_id=src.id
            )
            links = AlignmentService.align_argmax(matrix, min_score=self.cfg.aligner.min_score)
            alignment = self.cfg.aligner.name

        expected = AlignmentService.expected_emphasis(src.gold_emphasis, links, n_src=len(src.src_sentence))
        if AlignmentService.unaligned(src.gold_emphasis, links):
            flags.append(UNALIGNED)

        tp, fp, fn = MetricsService.count_sets(expected, predicted)
        logger.debug(f"{src.id}: expected={sorted(expected)} predicted={sorted(predicted)} via {alignment}")
        return UtteranceResult(
            id=src.id,
            voice=src.voice,
            expected=sorted(expected),
            predicted=sorted(predicted),
            tp=tp,
            fp=fp,
            fn=fn,
            flags=flags,
            alignment=alignment,
            links=[(link.src_index, link.tgt_index) for link in links],
        )

    def _evaluate_or_skip(self, src: UtteranceRecord, out: OutputRecord, base_dir: Path) -> UtteranceResult:
        try:
            return self.evaluate_utterance(src, out, base_dir)
        except EmphasisError as e:
            if self.cfg.error_policy == "fail-fast":
                logger.error(f"{src.id}: {type(e).__name__}: {e}")
                raise
            logger.warning(f"{src.id}: skipped ({type(e).__name__}: {e})")
            return UtteranceResult(id=src.id, voice=src.voice, error=f"{type(e).__name__}: {e}")

    def evaluate_dataset(
        self,
        manifest: Sequence[UtteranceRecord],
        outputs: Sequence[OutputRecord],
        base_dir: Union[str, Path] = ".",
    ) -> EvalReport:
        """
        Score every output and reduce to an EvalReport ordered by id

        Raises:
            EmptyDatasetError: no outputs
            UnknownIdError: an output id is not in the manifest
        """
        if not outputs:
            raise EmptyDatasetError("no outputs to evaluate")
        by_id: Dict[str, UtteranceRecord] = {record.id: record for record in manifest}
        seen: Set[str] = set()
        for out in outputs:
            if out.id not in by_id:
                raise UnknownIdError(f"output id {out.id!r} is not in the manifest")
            if out.id in seen:
                raise InvalidInputError(f"output id {out.id!r} appears more than once")
            seen.add(out.id)

        base_dir = Path(base_dir)
        ordered = sorted(outputs, key=lambda out: out.id)
        logger.info(f"Evaluating {len(ordered)} outputs with the {self.detector.name} detector, jobs={self.cfg.jobs}")

        if self.cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
                results = list(pool.map(lambda out: self._evaluate_or_skip(by_id[out.id], out, base_dir), ordered))
        else:
            results = [self._evaluate_or_skip(by_id[out.id], out, base_dir) for out in ordered]

        report = self.build_report(results)
        logger.info(
            f"Scored {report.n_scored}/{report.n_utterances} utterances, micro F1 {report.micro.f1:.4f}, "
            f"{report.skipped_count} skipped"
        )
        return report

    @staticmethod
    def build_report(results: Sequence[UtteranceResult]) -> EvalReport:
        """Micro from summed counts, macro over every scored utterance, per-voice micro."""
        scored = [result for result in results if not result.skipped]
        tp = sum(result.tp for result in scored)
        fp = sum(result.fp for result in scored)
        fn = sum(result.fn for result in scored)

        per_utterance = [MetricsService.compute_prf(result.tp, result.fp, result.fn) for result in scored]
        if per_utterance:
            macro = PRFScore(
                precision=sum(score.precision for score in per_utterance) / len(per_utterance),
                recall=sum(score.recall for score in per_utterance) / len(per_utterance),
                f1=sum(score.f1 for score in per_utterance) / len(per_utterance),
            )
        else:
            macro = PRFScore()

        per_voice: Dict[str, PRFScore] = {}
        for voice in sorted({result.voice for result in scored}):
            members = [result for result in scored if result.voice == voice]
            per_voice[voice] = MetricsService.compute_prf(
                sum(r.tp for r in members), sum(r.fp for r in members), sum(r.fn for r in members)
            )

        return EvalReport(
            micro=MetricsService.compute_prf(tp, fp, fn),
            macro=macro,
            tp=tp,
            fp=fp,
            fn=fn,
            n_utterances=len(results),
            n_scored=len(scored),
            unaligned_count=sum(UNALIGNED in result.flags for result in scored),
            segment_fallback_count=sum(SEGMENT_FALLBACK in result.flags for result in scored),
            skipped_count=len(results) - len(scored),
            per_voice=per_voice,
            per_utterance=sorted(results, key=lambda result: result.id),
        )

    @staticmethod
    def format_summary(report: EvalReport) -> str:
        rows = [f"{'':<12}{'precision':>10}{'recall':>10}{'f1':>10}"]
        for label, score in [("micro", report.micro), ("macro", report.macro)] + [
            (f"voice {voice}", score) for voice, score in report.per_voice.items()
        ]:
            rows.append(f"{label:<12}{score.precision:>10.3f}{score.recall:>10.3f}{score.f1:>10.3f}")
        rows.append(
            f"utterances={report.n_utterances} scored={report.n_scored} skipped={report.skipped_count} "
            f"unaligned={report.unaligned_count} segment_fallback={report.segment_fallback_count} "
            f"tp={report.tp} fp={report.fp} fn={report.fn}"
        )
        return "\n".join(rows)
