# settings.py
import os
from pathlib import Path
from typing import Dict

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

SAMPLE_RATE = 16000

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
VALID_ERROR_POLICIES = ("skip", "fail-fast")

LOG_LEVEL = os.getenv("EMPHASIS_LOG_LEVEL", "INFO").upper()
if LOG_LEVEL not in VALID_LOG_LEVELS:
    print(f"⚠️  Warning: EMPHASIS_LOG_LEVEL={LOG_LEVEL!r} is not one of {', '.join(VALID_LOG_LEVELS)}")
    print("   Falling back to INFO")
    LOG_LEVEL = "INFO"

ERROR_POLICY = os.getenv("EMPHASIS_ERROR_POLICY", "skip")
if ERROR_POLICY not in VALID_ERROR_POLICIES:
    print(f"⚠️  Warning: EMPHASIS_ERROR_POLICY={ERROR_POLICY!r} is not one of {', '.join(VALID_ERROR_POLICIES)}")
    print("   Falling back to skip")
    ERROR_POLICY = "skip"

try:
    JOBS = max(1, int(os.getenv("EMPHASIS_JOBS", "1")))
except ValueError:
    print(f"⚠️  Warning: EMPHASIS_JOBS={os.getenv('EMPHASIS_JOBS')!r} is not an integer")
    print("   Falling back to 1")
    JOBS = 1


def read_config_overlay(path: Path) -> Dict[str, str]:
    """
    Parse a key=value config file into a flat dict.

    Keys use flag spelling with or without the leading dashes
    (``epochs=50`` and ``--epochs=50`` are the same). Blank lines and
    ``#`` comments are ignored.
    """
    overlay: Dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lstrip("-").replace("-", "_")
        if not key:
            raise ValueError(f"{path}:{line_no}: empty key")
        overlay[key] = value.strip()
    return overlay
