#!/usr/bin/env python3
"""
Synthetic Dataset Generator
Renders sentences with known emphasis in four voices, plus optional simulated translations.
"""
import argparse
from pathlib import Path
from typing import List

from errors import InvalidInputError, StorageError
from services.dataset_service import DatasetService
from services.synth_service import DEFAULT_VOCAB, SimLanguage, SynthConfig, SynthService


def resolve_vocab(value: str) -> List[str]:
    """--vocab is either a count of built-in words or a whitespace-separated word file."""
    if value.isdigit():
        count = int(value)
        if not 5 <= count <= len(DEFAULT_VOCAB):
            raise InvalidInputError(f"--vocab must be between 5 and {len(DEFAULT_VOCAB)} built-in words, got {count}")
        return list(DEFAULT_VOCAB[:count])

    path = DatasetService.require_file(value, "--vocab")
    try:
        words = path.read_text(encoding="utf-8").split()
    except OSError as e:
        raise StorageError(f"failed to read vocab {path}: {e}") from e
    vocab = list(dict.fromkeys(words))
    if len(vocab) < 5:
        raise InvalidInputError(f"--vocab file {path} holds {len(vocab)} distinct words, need at least 5")
    return vocab


def gen_data(args: argparse.Namespace) -> int:
    """Generate a dataset into --out-dir"""
    if args.n < 2:
        raise InvalidInputError(f"--n must be >= 2, got {args.n}")
    if args.parallel_lines < 1:
        raise InvalidInputError(f"--parallel-lines must be >= 1, got {args.parallel_lines}")
    if args.screen and not args.sim_lang:
        raise InvalidInputError("--screen needs --sim-lang")
    vocab = resolve_vocab(args.vocab)

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InvalidInputError(f"--out-dir {out_dir} cannot be created: {e}") from e

    synth = SynthService(SynthConfig(jitter_seed=args.jitter_seed))
    sim_lang = SimLanguage.build(vocab, seed=args.seed, order=args.sim_lang) if args.sim_lang else None

    print(f"🔄 Generating {args.n} sentence versions from a {len(vocab)}-word vocab (seed {args.seed})")
    summary = synth.gen_dataset(
        args.n,
        vocab,
        out_dir,
        seed=args.seed,
        sim_lang=sim_lang,
        parallel_lines=args.parallel_lines,
        screen=args.screen,
    )

    print(f"✅ {len(summary.records)} utterances ({summary.n_sentences} sentences x 4 voices)")
    print(f"   manifest: {summary.manifest_path}")
    print(f"   topline outputs: {summary.topline_outputs_path}")
    if sim_lang is not None:
        print(f"✅ simulated translations ({args.sim_lang} order)")
        print(f"   outputs: {summary.translation_outputs_path}")
        print(f"   gold alignment scores: {summary.gold_scores_path}")
        print(f"   parallel corpus: {summary.parallel_corpus_path} ({args.parallel_lines} lines)")
        print(f"   token map: {summary.sim_lang_path}")
    if summary.screen_path is not None:
        easy = len(summary.records) - len(summary.difficult_ids)
        print(f"✅ alignment screen: {easy} easy, {len(summary.difficult_ids)} difficult")
        print(f"   labels: {summary.screen_path}")
        if summary.difficult_ids:
            print(f"⚠️  {len(summary.difficult_ids)} difficult translations left out of the outputs")
    return 0
