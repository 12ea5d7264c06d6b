"""Command-line entry point.

Subcommands:

* ``synth`` — generate a synthetic fixture dataset.
* ``spot``  — run one spotter over a dataset and write a detections CSV.
* ``eval``  — score a detections CSV against a manifest.
* ``det``   — DET operating points for a scored detections CSV.
* ``loso``  — full leave-one-subject-out benchmark with report files.

Configuration files are INI-style key=value text with one section per
module ([synth], [spotter], [features], [train], [eval]); command-line
flags override file values.  ``--print-config`` on any subcommand prints
the effective configuration and exits.  Exit status is 2 for usage errors,
1 for domain errors (bad files, impossible configurations), 0 otherwise.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Sequence

from . import io as mespot_io
from .errors import ConfigurationError, MespotError
from .harness import (
    METHODS,
    SpotterSpec,
    evaluate_detections,
    BenchmarkReport,
    render_report,
    run_benchmark,
)
from .metrics import EvalConfig
from .model import DatasetManifest
from .spotters import SpotterConfig
from .stfeatures import StFeatureConfig, TrainConfig, load_model, spot_supervised
from .synth import FixtureConfig, generate_fixture
from .version import VERSION

CONFIG_SECTIONS = {
    "synth": FixtureConfig,
    "spotter": SpotterConfig,
    "features": StFeatureConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _parse_value(raw: str, default) -> object:
    """Convert a config string to the type of the field's default value."""
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        parts = [p for p in raw.replace(",", " ").split() if p]
        element = default[0] if default else 0
        return tuple(type(element)(p) for p in parts)
    return raw


def _section_kwargs(cls, section: dict[str, str], where: str) -> dict:
    known = {f.name: f.default for f in fields(cls)}
    kwargs = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigurationError(
                f"{where}: unknown key {key!r}; known keys: {sorted(known)}")
        try:
            kwargs[key] = _parse_value(raw, known[key])
        except ValueError as exc:
            raise ConfigurationError(f"{where}: bad value for {key!r}: {exc}") from exc
    return kwargs


def load_configs(path: str | None) -> dict[str, dict]:
    """Per-section constructor kwargs from an INI config file."""
    sections: dict[str, dict] = {name: {} for name in CONFIG_SECTIONS}
    if path is None:
        return sections
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config file not found: {path}")
    for name in parser.sections():
        if name not in CONFIG_SECTIONS:
            raise ConfigurationError(
                f"{path}: unknown section [{name}]; known: {sorted(CONFIG_SECTIONS)}")
        sections[name] = _section_kwargs(CONFIG_SECTIONS[name],
                                         dict(parser[name]), f"{path} [{name}]")
    return sections


def _print_config(configs: dict[str, object]) -> None:
    for section, cfg in configs.items():
        print(f"[{section}]")
        for key, value in asdict(cfg).items():
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            print(f"{key} = {value}")
        print()


def _build_eval_config(args, file_cfg: dict) -> EvalConfig:
    kwargs = dict(file_cfg)
    if getattr(args, "criterion", None) is not None:
        kwargs["criterion"] = args.criterion
    if getattr(args, "epsilon", None) is not None:
        kwargs["iou_threshold"] = args.epsilon
    if getattr(args, "apex_mode", False):
        kwargs["apex_mode"] = True
    return EvalConfig(**kwargs)


def _load_manifest(args) -> DatasetManifest:
    return mespot_io.parse_manifest(args.manifest)


def _single_group(manifest: DatasetManifest):
    return [("all", [rec.video_id for rec in manifest.videos])]


def _report_from_detections(manifest: DatasetManifest, detections, eval_cfg: EvalConfig,
                            method: str) -> BenchmarkReport:
    grouped = mespot_io.group_by_video(detections)
    results, det = evaluate_detections(manifest, _single_group(manifest), grouped, eval_cfg)
    echo = tuple(sorted({"method": method, "version": VERSION,
                         **{f"eval.{k}": repr(v) for k, v in asdict(eval_cfg).items()}
                         }.items()))
    return BenchmarkReport(method=method, version=VERSION, stats=manifest.stats,
                           config_echo=echo, results=results, det=det,
                           detections=tuple(detections))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    cfgs = load_configs(args.config)
    kwargs = cfgs["synth"]
    if args.seed is not None:
        kwargs["seed"] = args.seed
    cfg = FixtureConfig(**kwargs)
    if args.print_config:
        _print_config({"synth": cfg})
        return 0
    manifest, _, events = generate_fixture(cfg, args.out)
    stats = manifest.stats
    print(f"wrote {stats.videos} videos ({stats.subjects} subjects, "
          f"{stats.samples} ground-truth samples, {len(events)} distractors) "
          f"to {args.out}")
    return 0


def _spot_dataset(manifest: DatasetManifest, args, spotter_cfg: SpotterConfig,
                  feature_cfg: StFeatureConfig):
    from .harness import _map, _spot_video  # single dispatch point for all methods

    spec = SpotterSpec(method=args.method, spotter=spotter_cfg, features=feature_cfg)
    tracks = {}
    model = None
    if args.method == "landmark":
        if args.landmarks is None:
            raise ConfigurationError("--landmarks is required for the landmark method")
        tracks = mespot_io.parse_landmarks(args.landmarks)
    elif spec.supervised:
        if args.model is None:
            raise ConfigurationError(f"--model is required for method {args.method!r}")
        model = load_model(args.model)

    def spot_one(rec):
        if args.method == "landmark":
            track = tracks.get(rec.video_id)
            if track is None:
                raise ConfigurationError(f"no landmarks for video {rec.video_id!r}")
            return _spot_video(spec, None, track, None)
        seq = mespot_io.load_frames(rec, manifest.base_dir)
        return _spot_video(spec, seq, None, model)

    detections = []
    for dets in _map(spot_one, manifest.videos, args.workers):
        detections.extend(dets)
    return detections


def _cmd_spot(args) -> int:
    cfgs = load_configs(args.config)
    spotter_cfg = SpotterConfig(**cfgs["spotter"])
    feature_cfg = StFeatureConfig(**cfgs["features"])
    if args.method in ("lbp-top", "hog-top", "higo-top"):
        feature_cfg = replace(feature_cfg, kind=args.method)
    if args.print_config:
        _print_config({"spotter": spotter_cfg, "features": feature_cfg})
        return 0
    manifest = _load_manifest(args)
    detections = _spot_dataset(manifest, args, spotter_cfg, feature_cfg)
    mespot_io.write_detections(detections, args.out)
    print(f"wrote {len(detections)} detections to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    cfgs = load_configs(args.config)
    eval_cfg = _build_eval_config(args, cfgs["eval"])
    if args.print_config:
        _print_config({"eval": eval_cfg})
        return 0
    manifest = _load_manifest(args)
    detections = mespot_io.parse_detections(args.detections, manifest)
    report = _report_from_detections(manifest, detections, eval_cfg,
                                     method=f"detections:{Path(args.detections).name}")
    res = report.result(eval_cfg.criterion)
    frame_f = ("undefined" if res.frame_accuracy is None
               else f"{res.frame_accuracy:.6f}")
    print(f"criterion={res.criterion} TP={res.counts.tp} FP={res.counts.fp} "
          f"FN={res.counts.fn} precision={res.precision:.6f} "
          f"recall={res.recall:.6f} f1={res.f1:.6f} frame_accuracy={frame_f}")
    if args.out:
        written = render_report(report, args.out)
        print(f"wrote report files to {args.out}: "
              + ", ".join(p.name for p in written.values()))
    return 0


def _cmd_det(args) -> int:
    cfgs = load_configs(args.config)
    eval_cfg = _build_eval_config(args, cfgs["eval"])
    if args.print_config:
        _print_config({"eval": eval_cfg})
        return 0
    manifest = _load_manifest(args)
    detections = mespot_io.parse_detections(args.detections, manifest)
    report = _report_from_detections(manifest, detections, eval_cfg,
                                     method=f"detections:{Path(args.detections).name}")
    if args.out:
        written = render_report(report, args.out, formats=("det",))
        print(f"wrote {written['det']}")
    else:
        from .harness import render_det_csv
        print(render_det_csv(report), end="")
    return 0


def _cmd_loso(args) -> int:
    cfgs = load_configs(args.config)
    spotter_cfg = SpotterConfig(**cfgs["spotter"])
    feature_cfg = StFeatureConfig(**cfgs["features"])
    train_kwargs = cfgs["train"]
    if args.seed is not None:
        train_kwargs["seed"] = args.seed
    train_cfg = TrainConfig(**train_kwargs)
    eval_cfg = _build_eval_config(args, cfgs["eval"])
    spec = SpotterSpec(method=args.method, spotter=spotter_cfg,
                       features=feature_cfg, train=train_cfg)
    if args.print_config:
        _print_config({"spotter": spec.spotter, "features": spec.features,
                       "train": spec.train, "eval": eval_cfg})
        return 0
    manifest = _load_manifest(args)
    landmarks = None
    if args.landmarks is not None:
        landmarks = mespot_io.parse_landmarks(args.landmarks)
    report = run_benchmark(manifest, spec, eval_cfg, landmarks=landmarks,
                           workers=args.workers)
    written = render_report(report, args.out)
    res = report.result(eval_cfg.criterion)
    print(f"method={report.method} criterion={res.criterion} TP={res.counts.tp} "
          f"FP={res.counts.fp} FN={res.counts.fn} f1={res.f1:.6f}")
    print(f"wrote report files to {args.out}: "
          + ", ".join(sorted(p.name for p in written.values())))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mespot",
        description="micro-expression spotting benchmark toolkit")
    parser.add_argument("--version", action="version", version=f"mespot {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest=True, config=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest file")
        if config:
            p.add_argument("--config", help="INI configuration file")
        p.add_argument("--print-config", action="store_true",
                       help="print the effective configuration and exit")

    def add_eval_flags(p):
        p.add_argument("--criterion", choices=("center", "iou"),
                       help="hit criterion (default center)")
        p.add_argument("--epsilon", type=float,
                       help="IoU threshold for the iou criterion (default 0.5)")
        p.add_argument("--apex-mode", action="store_true",
                       help="score frame accuracy on centers only")

    p = sub.add_parser("synth", help="generate a synthetic fixture dataset")
    add_common(p, manifest=False)
    p.add_argument("--seed", type=int, help="override the fixture seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("spot", help="run a spotter and write detections")
    add_common(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--landmarks", help="landmarks CSV (landmark method)")
    p.add_argument("--model", help="trained model file (supervised methods)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True, help="detections CSV to write")
    p.set_defaults(func=_cmd_spot)

    p = sub.add_parser("eval", help="evaluate a detections file against a manifest")
    add_common(p)
    p.add_argument("--detections", required=True, help="detections CSV")
    add_eval_flags(p)
    p.add_argument("--out", help="directory for report files (optional)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("det", help="DET operating points for a detections file")
    add_common(p)
    p.add_argument("--detections", required=True, help="detections CSV")
    add_eval_flags(p)
    p.add_argument("--out", help="directory for det.csv (optional; default stdout)")
    p.set_defaults(func=_cmd_det)

    p = sub.add_parser("loso", help="leave-one-subject-out benchmark")
    add_common(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--landmarks", help="landmarks CSV (landmark method)")
    p.add_argument("--seed", type=int, help="override the training seed")
    add_eval_flags(p)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True, help="directory for report files")
    p.set_defaults(func=_cmd_loso)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MespotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
