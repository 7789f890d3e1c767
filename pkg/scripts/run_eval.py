#!/usr/bin/env python3
"""
Emphasis-Transfer Evaluation
Scores system outputs against a manifest and writes the JSON report.
"""
import argparse
from pathlib import Path

from errors import StorageError
from scripts.train_model import feature_service_from_args
from services.alignment_service import AlignmentService
from services.audio_service import FrameSpec
from services.classifier_service import ClassifierService
from services.dataset_service import DatasetService
from services.pipeline_service import (
    EmphasisDetector,
    ModelDetector,
    NullDetector,
    OracleDetector,
    PipelineConfig,
    PipelineService,
)


def build_detector(args: argparse.Namespace) -> EmphasisDetector:
    if args.oracle:
        return OracleDetector()
    if args.null:
        return NullDetector()
    classifier = ClassifierService(feature_service_from_args(args))
    model = classifier.load_model(DatasetService.require_file(args.model, "--model"))
    return ModelDetector(model, classifier)


def run_eval(args: argparse.Namespace) -> int:
    """Evaluate --outputs against --manifest"""
    manifest_path = DatasetService.require_file(args.manifest, "--manifest")
    outputs_path = DatasetService.require_file(args.outputs, "--outputs")

    aligner = AlignmentService.build_aligner(args.aligner, args.ibm1_iterations)
    detector = build_detector(args)
    cfg = PipelineConfig(aligner=aligner, frame_spec=FrameSpec(), error_policy=args.error_policy, jobs=args.jobs)

    manifest = DatasetService.read_manifest(manifest_path)
    outputs = DatasetService.read_outputs(outputs_path)
    print(f"🔄 Evaluating {len(outputs)} outputs ({detector.name} detector, {aligner.name} aligner)")

    pipeline = PipelineService(detector, cfg)
    report = pipeline.evaluate_dataset(manifest, outputs, outputs_path.parent)

    if args.report_out:
        try:
            Path(args.report_out).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"failed to write report to {args.report_out}: {e}") from e
        print(f"✅ Report written to {args.report_out}")

    print(PipelineService.format_summary(report))
    if report.skipped_count:
        print(f"⚠️  {report.skipped_count} utterances skipped, see the report's per_utterance errors")
    return 0
