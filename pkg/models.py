# =========================
# models.py
# =========================
from typing import Dict, List, Optional, Tuple

from pydantic import ConfigDict, model_validator
from sqlmodel import SQLModel, Field

# Flags attached to a per-utterance result
UNALIGNED = "UNALIGNED"
SEGMENT_FALLBACK = "SEGMENT_FALLBACK"

MODEL_FORMAT_VERSION = 1


class UtteranceRecord(SQLModel):
    """One manifest row: the dataset's four columns plus the source audio path."""

    id: str = Field(min_length=1)
    src_sentence: List[str]
    gold_emphasis: List[int]
    voice: str
    audio_path: Optional[str] = Field(default=None)  # relative to the manifest directory

    @model_validator(mode="after")
    def check_gold_emphasis(self) -> "UtteranceRecord":
        if not self.gold_emphasis:
            raise ValueError(f"{self.id}: gold_emphasis must name at least one emphasised word")
        n = len(self.src_sentence)
        for index in self.gold_emphasis:
            if not 0 <= index < n:
                raise ValueError(f"{self.id}: gold_emphasis index {index} outside src_sentence (length {n})")
        return self


class OutputRecord(SQLModel):
    """What the system under test produced for one manifest row."""

    id: str = Field(min_length=1)
    audio_path: str
    transcript: List[str]
    word_times: Optional[List[Tuple[float, float]]] = Field(default=None)  # seconds, 1:1 with transcript

    @model_validator(mode="after")
    def check_word_times(self) -> "OutputRecord":
        if self.word_times is None:
            return self
        if len(self.word_times) != len(self.transcript):
            raise ValueError(
                f"{self.id}: word_times has {len(self.word_times)} entries, transcript has {len(self.transcript)}"
            )
        previous_end = 0.0
        for start, end in self.word_times:
            if start < 0 or end < start:
                raise ValueError(f"{self.id}: invalid word interval ({start}, {end})")
            if start < previous_end:
                raise ValueError(f"{self.id}: word interval ({start}, {end}) overlaps the previous word")
            previous_end = end
        return self


class PRFScore(SQLModel):
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0


class UtteranceResult(SQLModel):
    id: str
    voice: str = ""
    expected: List[int] = Field(default_factory=list)
    predicted: List[int] = Field(default_factory=list)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    flags: List[str] = Field(default_factory=list)
    alignment: str = ""  # "identity" or the similarity scorer name
    links: List[Tuple[int, int]] = Field(default_factory=list)
    error: Optional[str] = Field(default=None)  # set when the utterance was skipped

    @property
    def skipped(self) -> bool:
        return self.error is not None


class EvalReport(SQLModel):
    micro: PRFScore
    macro: PRFScore
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_utterances: int = 0
    n_scored: int = 0
    unaligned_count: int = 0
    segment_fallback_count: int = 0
    skipped_count: int = 0
    per_voice: Dict[str, PRFScore] = Field(default_factory=dict)
    per_utterance: List[UtteranceResult] = Field(default_factory=list)


class ClassifierModel(SQLModel):
    """
    Trained frame classifier as written to disk.

    Instances are produced by ClassifierService.train and are frozen;
    assigning a field raises. Weights are stored as a tuple.
    """

    model_config = ConfigDict(frozen=True)

    format_version: int = MODEL_FORMAT_VERSION
    fingerprint: str
    dimension: int
    weights: Tuple[float, ...]
    bias: float
    epochs: int = 0
    final_loss: Optional[float] = Field(default=None)

    @model_validator(mode="after")
    def check_dimension(self) -> "ClassifierModel":
        if len(self.weights) != self.dimension:
            raise ValueError(f"model declares dimension {self.dimension} but has {len(self.weights)} weights")
        return self
