"""
Dataset Service for manifests, system outputs and per-utterance word label files
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Type, TypeVar, Union

from pydantic import ValidationError
from sqlmodel import SQLModel

from errors import InvalidInputError, StorageError
from models import OutputRecord, UtteranceRecord
import logging

logger = logging.getLogger(__name__)

LABEL_SUFFIX = ".words.tsv"

RecordT = TypeVar("RecordT", bound=SQLModel)


@dataclass(frozen=True)
class WordLabel:
    """Ground truth for one rendered word."""

    token: str
    start: float
    end: float
    emphasized: bool


class DatasetService:
    """Service for reading and writing JSON-lines manifests and label files"""

    @staticmethod
    def _read_jsonl(path: Union[str, Path], record_type: Type[RecordT]) -> List[RecordT]:
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise StorageError(f"failed to read {path}: {e}") from e

        records: List[RecordT] = []
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_type.model_validate_json(line))
            except ValidationError as e:
                logger.error(f"{path}:{line_no}: invalid {record_type.__name__}")
                raise InvalidInputError(f"{path}:{line_no}: invalid {record_type.__name__}: {e}") from e
        return records

    @staticmethod
    def _write_jsonl(path: Union[str, Path], records: Sequence[SQLModel]) -> None:
        text = "".join(record.model_dump_json() + "\n" for record in records)
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write {path}: {e}") from e

    @staticmethod
    def read_manifest(path: Union[str, Path]) -> List[UtteranceRecord]:
        return DatasetService._read_jsonl(path, UtteranceRecord)

    @staticmethod
    def write_manifest(path: Union[str, Path], records: Sequence[UtteranceRecord]) -> None:
        DatasetService._write_jsonl(path, records)

    @staticmethod
    def read_outputs(path: Union[str, Path]) -> List[OutputRecord]:
        return DatasetService._read_jsonl(path, OutputRecord)

    @staticmethod
    def write_outputs(path: Union[str, Path], records: Sequence[OutputRecord]) -> None:
        DatasetService._write_jsonl(path, records)

    @staticmethod
    def resolve_audio(base_dir: Union[str, Path], audio_path: str) -> Path:
        """Audio paths in manifests and outputs are relative to the file listing them."""
        path = Path(audio_path)
        return path if path.is_absolute() else Path(base_dir) / path

    @staticmethod
    def label_path(audio_path: Union[str, Path]) -> Path:
        return Path(audio_path).with_suffix(LABEL_SUFFIX)

    @staticmethod
    def write_labels(path: Union[str, Path], labels: Sequence[WordLabel]) -> None:
        lines = [
            f"{label.token}\t{label.start:.7f}\t{label.end:.7f}\t{int(label.emphasized)}"
            for label in labels
        ]
        try:
            Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write labels to {path}: {e}") from e

    @staticmethod
    def read_labels(path: Union[str, Path]) -> List[WordLabel]:
        """
        Read ``token<TAB>start<TAB>end[<TAB>emphasized]`` lines

        The emphasis column is optional so plain timestamp files can be
        passed where only spans are needed.
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to read labels {path}: {e}") from e

        labels: List[WordLabel] = []
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise InvalidInputError(f"{path}:{line_no}: expected token, start, end[, emphasized]")
            try:
                emphasized = len(parts) == 4 and int(parts[3]) == 1
                labels.append(WordLabel(parts[0], float(parts[1]), float(parts[2]), emphasized))
            except ValueError as e:
                raise InvalidInputError(f"{path}:{line_no}: {e}") from e
        return labels

    @staticmethod
    def find_labels(audio_path: Union[str, Path]) -> Optional[List[WordLabel]]:
        path = DatasetService.label_path(audio_path)
        return DatasetService.read_labels(path) if path.is_file() else None

    @staticmethod
    def require_file(path: Union[str, Path], flag: str) -> Path:
        """Input files named on the command line must exist before a run starts."""
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(f"{flag} {path} does not exist")
        return path
