#!/usr/bin/env python3
"""
Single-Utterance Classification
Prints frame probabilities and, given word spans, per-word emphasis decisions.
"""
import argparse

import numpy as np

from scripts.train_model import feature_service_from_args
from services.audio_service import AudioService
from services.classifier_service import ClassifierService
from services.dataset_service import DatasetService
from services.segmentation_service import SegmentationService


def classify_wav(args: argparse.Namespace) -> int:
    """Classify --wav with --model"""
    wav_path = DatasetService.require_file(args.wav, "--wav")
    classifier = ClassifierService(feature_service_from_args(args))
    model = classifier.load_model(DatasetService.require_file(args.model, "--model"))

    waveform = AudioService.read_wav(wav_path)
    features = classifier.feature_service.build_features(waveform)
    if args.dump_features:
        classifier.feature_service.dump_tsv(features, args.dump_features)
        print(f"✅ Features written to {args.dump_features}")

    probs = classifier.predict_frames(model, features)
    emphasized_frames = int(np.count_nonzero(probs > 0.5))
    print(f"📋 {wav_path}: {len(probs)} frames, {waveform.duration:.3f}s")
    print(f"   mean p={float(probs.mean()):.3f} max p={float(probs.max()):.3f} frames > 0.5: {emphasized_frames}")

    if not args.spans:
        return 0

    labels = DatasetService.read_labels(DatasetService.require_file(args.spans, "--spans"))
    segmentation = SegmentationService(classifier.feature_service.frame_spec)
    spans = segmentation.spans_from_timestamps([(label.token, label.start, label.end) for label in labels], len(probs))
    decisions = classifier.aggregate_to_words(probs, spans, args.threshold)
    print(f"{'#':>3}  {'word':<16}{'frames':>8}{'fraction':>10}  emphasised")
    for span, decision in zip(spans, decisions):
        mark = "yes" if decision.emphasized else "no"
        print(f"{span.token_index:>3}  {span.token or '':<16}{span.n_frames:>8}{decision.fraction:>10.3f}  {mark}")
    return 0
