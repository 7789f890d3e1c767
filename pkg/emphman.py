#!/usr/bin/env python3
"""
Emphasis Management Tool (emphman.py)
Generates synthetic emphasis data, trains the emphasis classifier and scores
how well speech-to-speech outputs carry emphasis over from their inputs.
"""
import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

# Add the current directory to Python path so we can import our modules
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import settings  # noqa: E402
from errors import EmphasisError, StorageError  # noqa: E402

try:
    from scripts.align_pair import align_pair
    from scripts.classify_wav import classify_wav
    from scripts.gen_data import gen_data
    from scripts.run_eval import run_eval
    from scripts.train_model import train_model
    from services.alignment_service import DEFAULT_IBM1_ITERATIONS
    from services.feature_service import PitchConfig
except ImportError as e:
    print(f"❌ Import error: {e}")
    print("Make sure all script files are in the scripts/ directory")
    sys.exit(1)

logger = logging.getLogger("emphman")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INTERNAL = 2

COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "gen-data": gen_data,
    "train": train_model,
    "evaluate": run_eval,
    "classify": classify_wav,
    "align": align_pair,
}


class EmphmanParser(argparse.ArgumentParser):
    """Argument errors exit with the validation status instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"❌ {self.prog}: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def add_feature_arguments(parser: argparse.ArgumentParser) -> None:
    defaults = PitchConfig()
    parser.add_argument("--f0-min", type=float, default=defaults.f0_min, help="Lowest pitch searched (Hz)")
    parser.add_argument("--f0-max", type=float, default=defaults.f0_max, help="Highest pitch searched (Hz)")
    parser.add_argument("--yin-threshold", type=float, default=defaults.yin_threshold, help="Voicing threshold")


def build_parser() -> EmphmanParser:
    common = EmphmanParser(add_help=False)
    common.add_argument("--config", help="key=value file overlaying flag defaults; explicit flags win")
    common.add_argument("--verbose", action="store_true", help="Debug logging on stderr")

    parser = EmphmanParser(
        prog="emphman.py",
        description="Emphasis Management Tool for speech-to-speech emphasis evaluation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  uv run python emphman.py gen-data --n 25 --out-dir data
  uv run python emphman.py evaluate --manifest data/manifest.jsonl --outputs data/topline_outputs.jsonl --oracle
  uv run python emphman.py train --manifest data/manifest.jsonl --model-out model.json
        """,
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    gen = subparsers.add_parser("gen-data", parents=[common], help="Generate a synthetic dataset")
    gen.add_argument("--n", type=int, default=10, help="Sentence versions to generate (x4 voices)")
    gen.add_argument("--vocab", default="40", help="Built-in word count or a word-list file")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--jitter-seed", type=int, default=0)
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--sim-lang", choices=["identity", "reverse", "shuffle"], help="Also emit simulated translations")
    gen.add_argument("--parallel-lines", type=int, default=500, help="Parallel corpus size with --sim-lang")
    gen.add_argument("--screen", action="store_true", help="Drop translations whose emphasised word aligns inconsistently")

    train = subparsers.add_parser("train", parents=[common], help="Train the emphasis classifier")
    train.add_argument("--manifest", required=True)
    train.add_argument("--model-out", required=True)
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--lr", type=float, default=0.1)
    train.add_argument("--l2", type=float, default=1e-4)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--batch-size", type=int, default=None, help="Mini-batch size; full batch when omitted")
    add_feature_arguments(train)

    evaluate = subparsers.add_parser("evaluate", parents=[common], help="Score outputs against a manifest")
    evaluate.add_argument("--manifest", required=True)
    evaluate.add_argument("--outputs", required=True)
    detector = evaluate.add_mutually_exclusive_group(required=True)
    detector.add_argument("--model", help="Trained classifier file")
    detector.add_argument("--oracle", action="store_true", help="Read emphasis from label files")
    detector.add_argument("--null", action="store_true", help="Baseline that detects no emphasis")
    evaluate.add_argument("--aligner", default="identity", help="identity | chargram | lexicon:PATH | external:PATH")
    evaluate.add_argument("--ibm1-iterations", type=int, default=DEFAULT_IBM1_ITERATIONS)
    evaluate.add_argument("--report-out")
    evaluate.add_argument("--error-policy", choices=list(settings.VALID_ERROR_POLICIES), default=settings.ERROR_POLICY)
    evaluate.add_argument("--jobs", type=int, default=settings.JOBS)
    add_feature_arguments(evaluate)

    classify = subparsers.add_parser("classify", parents=[common], help="Classify a single WAV file")
    classify.add_argument("--wav", required=True)
    classify.add_argument("--model", required=True)
    classify.add_argument("--spans", help="token<TAB>start<TAB>end file for per-word decisions")
    classify.add_argument("--threshold", type=float, default=0.5, help="Word rule: fraction of frames above 0.5")
    classify.add_argument("--dump-features", help="Write the feature matrix as TSV")
    add_feature_arguments(classify)

    align = subparsers.add_parser("align", parents=[common], help="Show word links for a sentence pair")
    align.add_argument("--src", help="Source sentence")
    align.add_argument("--tgt", action="append", default=[], help="Target sentence (repeatable)")
    align.add_argument("--gold", type=int, nargs="*", default=[], help="Emphasised source indices")
    align.add_argument("--aligner", default="identity", help="identity | chargram | lexicon:PATH | external:PATH")
    align.add_argument("--pair-id", help="Pair id for external:PATH scores")
    align.add_argument("--corpus", help="Parallel corpus (src ||| tgt) to train IBM-1 on")
    align.add_argument("--lexicon-out", help="Where to save the trained lexicon")
    align.add_argument("--iterations", type=int, default=DEFAULT_IBM1_ITERATIONS)

    return parser


def find_subparser(parser: argparse.ArgumentParser, command: str) -> Optional[argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(command)
    return None


def peek_config(argv: List[str]) -> Tuple[Optional[str], Optional[str]]:
    """The command and --config value, read before the full parse."""
    pre = EmphmanParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.command, known.config


def apply_config(parser: EmphmanParser, command: Optional[str], config_path: str) -> None:
    """Install the --config file's values as the command's defaults."""
    subparser = find_subparser(parser, command) if command else None
    if subparser is None:
        parser.error("--config needs a command")
    actions = {action.dest: action for action in subparser._actions}
    try:
        overlay = settings.read_config_overlay(config_path)
    except OSError as e:
        parser.error(f"--config {config_path}: {e}")
    except ValueError as e:
        parser.error(str(e))

    defaults = {}
    for key, value in overlay.items():
        if key not in actions or key in ("help", "config"):
            parser.error(f"--config key {key!r} is not a {command} option")
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            # argparse applies the option's type to string defaults
            defaults[key] = value
        action.required = False
    for group in subparser._mutually_exclusive_groups:
        if any(action.dest in defaults for action in group._group_actions):
            group.required = False
    subparser.set_defaults(**defaults)


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    command, config_path = peek_config(argv)
    if config_path:
        apply_config(parser, command, config_path)
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK
    configure_logging(args.verbose)

    try:
        return COMMANDS[args.command](args)
    except StorageError as e:
        logger.error(f"{args.command}: {e}")
        print(f"❌ I/O failure: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (EmphasisError, ValidationError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly")
        print(f"❌ Internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
