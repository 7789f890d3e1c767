#!/usr/bin/env python3
"""
Classifier Training
Fits the frame-level emphasis classifier on a manifest and reports training-set scores.
"""
import argparse
from pathlib import Path

from services.classifier_service import ClassifierService, TrainConfig
from services.dataset_service import DatasetService
from services.feature_service import FeatureService, PitchConfig


def feature_service_from_args(args: argparse.Namespace) -> FeatureService:
    return FeatureService(pitch_cfg=PitchConfig(args.f0_min, args.f0_max, args.yin_threshold))


def train_model(args: argparse.Namespace) -> int:
    """Train on --manifest and write --model-out"""
    manifest_path = DatasetService.require_file(args.manifest, "--manifest")
    cfg = TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        l2=args.l2,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    classifier = ClassifierService(feature_service_from_args(args))

    records = DatasetService.read_manifest(manifest_path)
    print(f"🔄 Loading {len(records)} utterances from {manifest_path}")
    data = classifier.labeled_frames_for_records(records, manifest_path.parent)

    if cfg.epochs == 0:
        print("⚠️  --epochs 0: the model keeps zero weights and scores every frame 0.5")
    run = classifier.train_with_trace(data, cfg)
    classifier.save_model(run.model, Path(args.model_out))

    scores = classifier.evaluate_classifier(run.model, data)
    print(f"✅ Model written to {args.model_out}")
    print(f"   final loss: {run.model.final_loss:.6f}")
    print(f"{'':<8}{'precision':>10}{'recall':>10}{'f1':>10}")
    for level, score in (("frame", scores.frame), ("word", scores.word)):
        print(f"{level:<8}{score.precision:>10.3f}{score.recall:>10.3f}{score.f1:>10.3f}")
    return 0
