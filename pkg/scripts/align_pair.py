#!/usr/bin/env python3
"""
Alignment Debugging
Prints word links for a sentence pair and optionally trains and saves an IBM-1 lexicon.
"""
import argparse
from typing import List, Optional

from errors import InvalidInputError, NotIdenticalError
from services.alignment_service import (
    AlignerConfig,
    AlignmentLink,
    AlignmentService,
    Lexicon,
    LexiconScorer,
    read_parallel_corpus,
)
from services.dataset_service import DatasetService


def train_lexicon(args: argparse.Namespace) -> Lexicon:
    corpus = read_parallel_corpus(DatasetService.require_file(args.corpus, "--corpus"))
    lexicon = AlignmentService.train_ibm1(corpus, args.iterations)
    trace = lexicon.log_likelihood
    print(f"✅ Trained IBM-1 on {len(corpus)} lines: log-likelihood {trace[0]:.3f} -> {trace[-1]:.3f}")
    if args.lexicon_out:
        lexicon.save(args.lexicon_out)
        print(f"   lexicon written to {args.lexicon_out}")
    return lexicon


def link_pair(src: List[str], tgt: List[str], aligner: AlignerConfig, pair_id: Optional[str]) -> List[AlignmentLink]:
    try:
        return AlignmentService.align_identity(src, tgt)
    except NotIdenticalError:
        matrix = AlignmentService.similarity_matrix(src, tgt, aligner.scorer, pair_id=pair_id)
        return AlignmentService.align_argmax(matrix, min_score=aligner.min_score)


def align_pair(args: argparse.Namespace) -> int:
    """Show links between --src and each --tgt"""
    if not args.src and not args.corpus:
        raise InvalidInputError("align needs --src with --tgt, or --corpus")
    if args.src and not args.tgt:
        raise InvalidInputError("--src needs at least one --tgt")

    lexicon = train_lexicon(args) if args.corpus else None
    if not args.src:
        return 0

    if lexicon is not None and args.aligner == "identity":
        aligner = AlignerConfig("lexicon", LexiconScorer(lexicon))
    else:
        aligner = AlignmentService.build_aligner(args.aligner, args.iterations)

    src = args.src.split()
    renderings = []
    for index, tgt_text in enumerate(args.tgt):
        tgt = tgt_text.split()
        links = link_pair(src, tgt, aligner, args.pair_id)
        renderings.append(links)
        print(f"📋 target {index}: {tgt_text}")
        for link in links:
            print(f"   {link.src_index}:{src[link.src_index]} -> {link.tgt_index}:{tgt[link.tgt_index]}  {link.score:.3f}")
        if args.gold:
            expected = AlignmentService.expected_emphasis(args.gold, links, n_src=len(src))
            missing = AlignmentService.unaligned(args.gold, links)
            print(f"   expected emphasis: {sorted(expected)}" + (f"  unaligned gold: {sorted(missing)}" if missing else ""))

    if args.gold:
        print(f"alignment consistency: {AlignmentService.alignment_consistency(args.gold, renderings)}")
    return 0
