"""
Classifier Service for frame-level emphasis detection and word aggregation
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.special import expit

from errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    EmptySpanError,
    FingerprintMismatchError,
    InvalidInputError,
    NonFiniteLossError,
    OverlappingSpansError,
    SingleClassDataError,
    SpanOutOfRangeError,
    StorageError,
)
from models import MODEL_FORMAT_VERSION, ClassifierModel, PRFScore, UtteranceRecord
from services.audio_service import AudioService, Waveform
from services.dataset_service import DatasetService
from services.feature_service import FEATURE_DIM, FeatureService, FrameFeatureMatrix
from services.metrics_service import MetricsService
from services.segmentation_service import SegmentationService, WordSpan
import logging

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 0
    batch_size: Optional[int] = None  # None trains full-batch

    def __post_init__(self):
        if not math.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise InvalidInputError(f"learning_rate must be a positive finite number, got {self.learning_rate}")
        if self.epochs < 0:
            raise InvalidInputError(f"epochs must be >= 0, got {self.epochs}")
        if not math.isfinite(self.l2) or self.l2 < 0:
            raise InvalidInputError(f"l2 must be a non-negative finite number, got {self.l2}")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True, eq=False)
class LabeledFrames:
    """Features of one utterance with per-frame gold labels and, optionally, its word spans."""

    features: FrameFeatureMatrix
    labels: np.ndarray
    spans: Tuple[WordSpan, ...] = ()
    emphasized_words: FrozenSet[int] = field(default_factory=frozenset)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.float64)
        if labels.shape != (self.features.n_frames,):
            raise DimensionMismatchError(
                f"{labels.shape[0] if labels.ndim else 0} labels for {self.features.n_frames} frames"
            )
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_spans(
        cls,
        features: FrameFeatureMatrix,
        spans: Sequence[WordSpan],
        emphasized_words: Iterable[int],
    ) -> "LabeledFrames":
        """A frame is labeled 1 iff it lies inside a word annotated as emphasised."""
        emphasized = frozenset(emphasized_words)
        labels = np.zeros(features.n_frames)
        for span in spans:
            if span.token_index in emphasized:
                labels[span.start_frame:span.end_frame] = 1.0
        return cls(features=features, labels=labels, spans=tuple(spans), emphasized_words=emphasized)


@dataclass(frozen=True)
class WordDecision:
    emphasized: bool
    fraction: float


@dataclass(frozen=True)
class ClassifierScores:
    frame: PRFScore
    word: PRFScore


@dataclass
class TrainingRun:
    model: ClassifierModel
    loss_trace: List[float]


def loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float,
) -> Tuple[float, np.ndarray, float]:
    """Mean cross-entropy plus l2*|w|^2/2, and its gradient w.r.t. (weights, bias)."""
    logits = features @ weights + bias
    loss = float(np.mean(np.logaddexp(0.0, logits) - labels * logits) + 0.5 * l2 * float(weights @ weights))
    residual = expit(logits) - labels
    grad_w = features.T @ residual / len(labels) + l2 * weights
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


class ClassifierService:
    """Service for training and applying the logistic frame classifier"""

    def __init__(self, feature_service: Optional[FeatureService] = None):
        self.feature_service = feature_service or FeatureService()

    @property
    def fingerprint(self) -> str:
        return self.feature_service.fingerprint()

    def train(self, data: Sequence[LabeledFrames], cfg: TrainConfig) -> ClassifierModel:
        """Train and return the model; see train_with_trace."""
        return self.train_with_trace(data, cfg).model

    def train_with_trace(self, data: Sequence[LabeledFrames], cfg: TrainConfig) -> TrainingRun:
        """
        Fit logistic regression by gradient descent from zero weights

        Args:
            data: Labeled utterances, used in the given order
            cfg: Training hyper-parameters

        Returns:
            TrainingRun with the model and the loss before every update
            plus the final loss
        """
        if not data:
            raise EmptyDatasetError("no training utterances")
        features = np.vstack([item.features.values for item in data])
        labels = np.concatenate([item.labels for item in data])
        if features.shape[1] != FEATURE_DIM:
            raise DimensionMismatchError(f"training features have {features.shape[1]} columns, expected {FEATURE_DIM}")

        n_positive = int(labels.sum())
        if n_positive == 0 or n_positive == len(labels):
            raise SingleClassDataError(f"training frames contain a single class ({n_positive}/{len(labels)} emphasised)")

        logger.info(
            f"Training on {len(data)} utterances, {len(labels)} frames ({n_positive} emphasised), "
            f"lr={cfg.learning_rate}, epochs={cfg.epochs}, l2={cfg.l2}"
        )
        if cfg.epochs == 0:
            logger.warning("epochs=0: returning the zero-weight model (every frame scores 0.5)")

        weights = np.zeros(features.shape[1])
        bias = 0.0
        trace: List[float] = []
        rng = np.random.default_rng(cfg.seed)

        for epoch in range(cfg.epochs):
            if cfg.batch_size is None:
                batches = [np.arange(len(labels))]
            else:
                order = rng.permutation(len(labels))
                batches = [order[i:i + cfg.batch_size] for i in range(0, len(labels), cfg.batch_size)]

            for batch in batches:
                loss, grad_w, grad_b = loss_and_gradient(weights, bias, features[batch], labels[batch], cfg.l2)
                if cfg.batch_size is None:
                    trace.append(loss)
                if not math.isfinite(loss) or not np.all(np.isfinite(grad_w)):
                    logger.error(f"Non-finite loss at epoch {epoch}; learning rate {cfg.learning_rate} is too large")
                    raise NonFiniteLossError(f"loss became non-finite at epoch {epoch} (learning_rate={cfg.learning_rate})")
                weights = weights - cfg.learning_rate * grad_w
                bias = bias - cfg.learning_rate * grad_b

            if cfg.batch_size is not None:
                trace.append(loss_and_gradient(weights, bias, features, labels, cfg.l2)[0])

        final_loss, _, _ = loss_and_gradient(weights, bias, features, labels, cfg.l2)
        if not math.isfinite(final_loss):
            raise NonFiniteLossError(f"final loss is non-finite (learning_rate={cfg.learning_rate})")
        if cfg.batch_size is None:
            trace.append(final_loss)
        logger.info(f"Training finished: loss {final_loss:.6f}")

        model = ClassifierModel(
            format_version=MODEL_FORMAT_VERSION,
            fingerprint=self.fingerprint,
            dimension=len(weights),
            weights=tuple(float(w) for w in weights),
            bias=float(bias),
            epochs=cfg.epochs,
            final_loss=final_loss,
        )
        return TrainingRun(model=model, loss_trace=trace)

    @staticmethod
    def predict_frames(model: ClassifierModel, features: Union[FrameFeatureMatrix, np.ndarray]) -> np.ndarray:
        """sigmoid(w.x + b) for every frame."""
        values = features.values if isinstance(features, FrameFeatureMatrix) else np.asarray(features, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != model.dimension:
            raise DimensionMismatchError(
                f"features have shape {values.shape}, model expects {model.dimension} columns"
            )
        return expit(values @ np.asarray(model.weights) + model.bias)

    def predict_waveform(self, model: ClassifierModel, waveform: Waveform) -> np.ndarray:
        return self.predict_frames(model, self.feature_service.build_features(waveform))

    @staticmethod
    def aggregate_to_words(
        frame_probs: Sequence[float],
        word_spans: Sequence[WordSpan],
        threshold: float = 0.5,
        decision_cutoff: float = 0.5,
    ) -> List[WordDecision]:
        """
        Turn frame probabilities into word decisions

        A frame counts as emphasised iff its probability exceeds
        ``decision_cutoff``; a word is emphasised iff the fraction of its
        frames that are emphasised is strictly greater than ``threshold``.
        """
        probs = np.asarray(frame_probs, dtype=np.float64)
        n_frames = len(probs)
        decisions: List[WordDecision] = []
        previous_end = None
        for span in sorted(word_spans, key=lambda s: s.start_frame):
            if span.end_frame <= span.start_frame:
                raise EmptySpanError(f"word {span.token_index} spans no frames [{span.start_frame}, {span.end_frame})")
            if span.start_frame < 0 or span.end_frame > n_frames:
                raise SpanOutOfRangeError(
                    f"word {span.token_index} span [{span.start_frame}, {span.end_frame}) outside {n_frames} frames"
                )
            if previous_end is not None and span.start_frame < previous_end:
                raise OverlappingSpansError(f"word {span.token_index} overlaps the previous word")
            previous_end = span.end_frame

        for span in word_spans:
            frames = probs[span.start_frame:span.end_frame] > decision_cutoff
            fraction = float(np.count_nonzero(frames)) / len(frames)
            decisions.append(WordDecision(emphasized=fraction > threshold, fraction=fraction))
        return decisions

    def evaluate_classifier(
        self,
        model: ClassifierModel,
        data: Sequence[LabeledFrames],
        threshold: float = 0.5,
        decision_cutoff: float = 0.5,
    ) -> ClassifierScores:
        """
        Frame-level and word-level precision, recall and F1

        Positive class is "emphasised". Word metrics cover the items that
        carry spans.
        """
        if not data:
            raise EmptyDatasetError("no utterances to evaluate")

        frame_counts = np.zeros(3, dtype=np.int64)
        word_counts = np.zeros(3, dtype=np.int64)
        for item in data:
            probs = self.predict_frames(model, item.features)
            frame_counts += MetricsService.count_binary(item.labels > 0.5, probs > decision_cutoff)
            if item.spans:
                decisions = self.aggregate_to_words(probs, item.spans, threshold, decision_cutoff)
                gold = [span.token_index in item.emphasized_words for span in item.spans]
                word_counts += MetricsService.count_binary(gold, [d.emphasized for d in decisions])

        return ClassifierScores(
            frame=MetricsService.compute_prf(*(int(c) for c in frame_counts)),
            word=MetricsService.compute_prf(*(int(c) for c in word_counts)),
        )

    def labeled_frames_for_records(
        self,
        records: Sequence[UtteranceRecord],
        base_dir: Union[str, Path],
    ) -> List[LabeledFrames]:
        """
        Build training items from manifest rows

        Word spans come from the label file next to each audio file; without
        one the utterance is segmented at silences into len(src_sentence)
        words. Gold emphasis is the record's gold_emphasis.
        """
        segmentation = SegmentationService(self.feature_service.frame_spec)
        items: List[LabeledFrames] = []
        for record in records:
            if not record.audio_path:
                raise InvalidInputError(f"{record.id}: manifest row has no audio_path to train on")
            audio_path = DatasetService.resolve_audio(base_dir, record.audio_path)
            waveform = AudioService.read_wav(audio_path)
            features = self.feature_service.build_features(waveform)
            labels = DatasetService.find_labels(audio_path)
            if labels is not None:
                if len(labels) != len(record.src_sentence):
                    raise InvalidInputError(
                        f"{record.id}: label file has {len(labels)} words, src_sentence has {len(record.src_sentence)}"
                    )
                spans = segmentation.spans_from_timestamps(
                    [(label.token, label.start, label.end) for label in labels], features.n_frames
                )
            else:
                logger.warning(f"{record.id}: no label file, segmenting at silences")
                spans = segmentation.segment_by_silence(waveform, len(record.src_sentence))
            items.append(LabeledFrames.from_spans(features, spans, record.gold_emphasis))
        logger.info(f"Loaded {len(items)} training utterances from {base_dir}")
        return items

    @staticmethod
    def save_model(model: ClassifierModel, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write model to {path}: {e}") from e
        logger.info(f"Saved model ({model.dimension} weights) to {path}")

    def load_model(self, path: Union[str, Path]) -> ClassifierModel:
        """
        Load a model file and check it matches this service's feature setup

        Raises:
            FingerprintMismatchError: the model was trained on other features
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to read model {path}: {e}") from e

        try:
            header: Dict[str, object] = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"model file {path} is not valid JSON: {e}") from e
        if not isinstance(header, dict) or header.get("format_version") != MODEL_FORMAT_VERSION:
            found = header.get("format_version") if isinstance(header, dict) else None
            raise InvalidInputError(
                f"model format_version={found}, expected {MODEL_FORMAT_VERSION}"
            )

        try:
            model = ClassifierModel.model_validate_json(text)
        except ValidationError as e:
            raise InvalidInputError(f"model file {path} is malformed: {e}") from e

        if model.fingerprint != self.fingerprint:
            raise FingerprintMismatchError(
                f"model fingerprint {model.fingerprint!r} does not match features {self.fingerprint!r}"
            )
        return model
