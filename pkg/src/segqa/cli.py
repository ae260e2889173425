"""Command-line orchestration: score, evaluate, synth, backend-check.

Exit codes: 0 success, 1 input/config error, 2 backend/transport error.
Output files are deterministic for the reference and file backends: record
order follows the manifest, and no timestamps or latencies are serialized.
"""

import argparse
import concurrent.futures
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import synth
from .backend import BackendConfig, build_backend
from .errors import (
    BackendError,
    ContractViolation,
    ManifestError,
    SegQAError,
    UndefinedCorrelationError,
)
from .evaluation import PairedSeries, evaluate, replacement_analysis, true_dice
from .raster import Image, import_labelmap, load_image, load_probability, load_segmentation
from .scoring import confidence_baseline, score_sample

log = logging.getLogger("segqa")

ENDPOINT_ENV = "SEGQA_ENDPOINT"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BACKEND = 2


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestSample:
    sample_id: str
    image: Path
    prediction: Tuple[Path, ...]
    labelmap: Optional[Path]
    num_classes: Optional[int]
    probability: Optional[Tuple[Path, ...]]
    truth: Optional[Tuple[Path, ...]]


@dataclass(frozen=True)
class Manifest:
    version: int
    root: Path
    samples: Tuple[ManifestSample, ...]


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}")
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})")
    if not isinstance(doc, dict) or "samples" not in doc:
        raise ManifestError(f"{path}: missing top-level 'samples' list")
    root = path.parent
    samples = []
    ids = set()
    problems = []
    for i, rec in enumerate(doc["samples"]):
        sid = rec.get("sample_id")
        if not sid:
            problems.append(f"sample #{i}: missing sample_id")
            continue
        if sid in ids:
            problems.append(f"duplicate sample_id {sid!r}")
            continue
        ids.add(sid)
        if "image" not in rec:
            problems.append(f"{sid}: missing image path")
            continue
        image = root / rec["image"]
        pred = tuple(root / p for p in rec.get("prediction", []))
        labelmap = root / rec["labelmap"] if rec.get("labelmap") else None
        num_classes = rec.get("num_classes")
        if not pred and labelmap is None:
            problems.append(f"{sid}: needs 'prediction' paths or a 'labelmap'")
            continue
        if labelmap is not None and not num_classes:
            problems.append(f"{sid}: 'labelmap' requires 'num_classes'")
            continue
        prob = tuple(root / p for p in rec["probability"]) if rec.get("probability") else None
        truth = tuple(root / p for p in rec["truth"]) if rec.get("truth") else None
        if truth is not None and pred and len(truth) != len(pred):
            problems.append(f"{sid}: truth has {len(truth)} channels, prediction {len(pred)}")
        for f in (image, *(pred or ()), *(prob or ()), *(truth or ()), *((labelmap,) if labelmap else ())):
            if not f.exists():
                problems.append(f"{sid}: missing file {f}")
        samples.append(
            ManifestSample(
                sample_id=sid,
                image=image,
                prediction=pred,
                labelmap=labelmap,
                num_classes=num_classes,
                probability=prob,
                truth=truth,
            )
        )
    if problems:
        raise ManifestError(f"{path}: " + "; ".join(problems))
    return Manifest(version=int(doc.get("version", 1)), root=root, samples=tuple(samples))


def load_sample_prediction(ms: ManifestSample):
    if ms.prediction:
        return load_segmentation(ms.prediction)
    return import_labelmap(ms.labelmap, ms.num_classes)


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    backend: BackendConfig = BackendConfig()
    connectivity: int = 8
    min_area: int = 1
    metric: str = "dice"
    workers: int = 1
    k_list: Tuple[float, ...] = (25.0, 50.0)
    output: Optional[str] = None

    def __post_init__(self):
        if self.workers < 1:
            raise ContractViolation(f"workers must be >= 1, got {self.workers}")
        if self.connectivity not in (4, 8):
            raise ContractViolation(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.metric not in ("dice", "iou"):
            raise ContractViolation(f"metric must be dice or iou, got {self.metric!r}")
        for k in self.k_list:
            if not 0 < k < 100:
                raise ContractViolation(f"k values must be in (0, 100), got {k}")

    def to_dict(self) -> dict:
        # workers is scheduling and output is self-referential; neither is
        # provenance, and output bytes must not depend on them (files are
        # byte-identical across runs and workers settings)
        d = dataclasses.asdict(self)
        d["k_list"] = list(self.k_list)
        del d["workers"]
        del d["output"]
        return d


def _config_from_args(args) -> RunConfig:
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    backend_cfg = dict(file_cfg.get("backend", {}))
    for key in ("kind", "tolerance", "root", "endpoint", "timeout", "retries", "max_inflight"):
        val = getattr(args, f"backend_{key}" if key == "kind" else key, None)
        if val is not None:
            backend_cfg[key] = val
    env_endpoint = os.environ.get(ENDPOINT_ENV)
    if env_endpoint:
        backend_cfg["endpoint"] = env_endpoint
    cfg = {k: v for k, v in file_cfg.items() if k != "backend"}
    for key in ("connectivity", "min_area", "metric", "workers", "output"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "k", None):
        cfg["k_list"] = tuple(float(k) for k in args.k)
    elif "k_list" in cfg:
        cfg["k_list"] = tuple(float(k) for k in cfg["k_list"])
    return RunConfig(backend=BackendConfig(**backend_cfg), **cfg)


def _add_backend_flags(sub):
    sub.add_argument("--backend", dest="backend_kind", choices=("reference", "file", "remote"), default=None)
    sub.add_argument("--tolerance", type=int, default=None, help="reference backend luma tolerance")
    sub.add_argument("--root", default=None, help="file backend fixture directory")
    sub.add_argument("--endpoint", default=None, help=f"remote backend URL (env {ENDPOINT_ENV} overrides)")
    sub.add_argument("--timeout", type=float, default=None)
    sub.add_argument("--retries", type=int, default=None)
    sub.add_argument("--max-inflight", dest="max_inflight", type=int, default=None)
    sub.add_argument("--config", default=None, help="JSON config file (RunConfig schema)")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _score_record(sc, baseline):
    return {
        "sample_id": sc.sample_id,
        "sqa_score": sc.score,
        "num_objects": sc.num_objects,
        "no_objects": sc.no_objects,
        "confidence_baseline": baseline,
        "objects": [
            {
                "class_index": o.class_index,
                "object_index": o.object_index,
                "point_dice": o.point_dice,
                "box_dice": o.box_dice,
                "score": o.score,
            }
            for o in sc.object_scores
        ],
    }


def cmd_score(args) -> int:
    config = _config_from_args(args)
    manifest = load_manifest(args.manifest)
    backend = build_backend(config.backend)

    def one(ms: ManifestSample):
        image = load_image(ms.image)
        prediction = load_sample_prediction(ms)
        baseline = None
        if ms.probability:
            baseline = confidence_baseline(load_probability(ms.probability))
        sc = score_sample(
            image,
            prediction,
            backend,
            sample_id=ms.sample_id,
            connectivity=config.connectivity,
            min_area=config.min_area,
            metric=config.metric,
        )
        return _score_record(sc, baseline)

    records = {}
    backend_errors = []
    input_errors = []
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {pool.submit(one, ms): ms.sample_id for ms in manifest.samples}
        for fut in concurrent.futures.as_completed(futures):
            sid = futures[fut]
            try:
                records[sid] = fut.result()
            except BackendError as exc:
                backend_errors.append({"sample_id": sid, "error": str(exc)})
            except SegQAError as exc:
                input_errors.append({"sample_id": sid, "error": str(exc)})
    if input_errors:
        for e in sorted(input_errors, key=lambda e: e["sample_id"]):
            log.error("%s: %s", e["sample_id"], e["error"])
        return EXIT_INPUT

    out_path = Path(args.output or config.output or "scores.json")
    doc = {
        "version": 1,
        "config": config.to_dict(),
        "samples": [records[ms.sample_id] for ms in manifest.samples if ms.sample_id in records],
        "errors": sorted(backend_errors, key=lambda e: e["sample_id"]),
    }
    with open(out_path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    if backend_errors:
        for e in doc["errors"]:
            log.error("%s: %s", e["sample_id"], e["error"])
        return EXIT_BACKEND
    log.info("scored %d samples -> %s", len(doc["samples"]), out_path)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    manifest = load_manifest(args.manifest)
    with open(args.scores) as fh:
        scores_doc = json.load(fh)
    by_id = {ms.sample_id: ms for ms in manifest.samples}

    scored = scores_doc.get("samples", [])
    missing_truth = [r["sample_id"] for r in scored if r["sample_id"] not in by_id or by_id[r["sample_id"]].truth is None]
    if missing_truth:
        log.error("no ground truth for: %s", ", ".join(missing_truth))
        return EXIT_INPUT
    if len(scored) < 2:
        log.error("need at least 2 scored samples to evaluate, got %d", len(scored))
        return EXIT_INPUT

    ids, sqa, truths, baselines, flags = [], [], [], [], []
    for rec in scored:
        ms = by_id[rec["sample_id"]]
        pred = load_sample_prediction(ms)
        gt = load_segmentation(ms.truth)
        ids.append(rec["sample_id"])
        sqa.append(float(rec["sqa_score"]))
        truths.append(true_dice(pred, gt))
        baselines.append(rec.get("confidence_baseline"))
        flags.append("no_objects" if rec.get("no_objects") else "")

    series = PairedSeries(tuple(ids), tuple(sqa), tuple(truths))

    replacement = None
    if getattr(args, "replacement", False):
        backend = build_backend(config.backend)
        def iter_samples():
            for rec in scored:
                ms = by_id[rec["sample_id"]]
                yield ms.sample_id, load_image(ms.image), load_sample_prediction(ms), load_segmentation(ms.truth)
        replacement = replacement_analysis(
            iter_samples(), backend, connectivity=config.connectivity, min_area=config.min_area
        )

    out_dir = Path(args.output_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = evaluate(series, config.k_list, baseline_scores=baselines, flags=flags, replacement=replacement)
    except UndefinedCorrelationError as exc:
        doc = {"error": f"undefined correlation: {exc}", "n": series.n}
        with open(out_dir / "report.json", "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        log.error("%s", exc)
        return EXIT_INPUT
    doc = {"config": config.to_dict()}
    doc.update(report.to_dict())
    with open(out_dir / "report.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    with open(out_dir / "report.txt", "w") as fh:
        fh.write(report.render_table())
    log.info("report written to %s", out_dir)
    return EXIT_OK


def cmd_synth(args) -> int:
    scene_cfg = {}
    if args.scene:
        with open(args.scene) as fh:
            scene_cfg = json.load(fh)
    if args.seed is not None:
        scene_cfg["seed"] = args.seed
    if "shapes" in scene_cfg:
        scene_cfg["shapes"] = tuple(scene_cfg["shapes"])
    scene = synth.SceneSpec(**scene_cfg)
    degradations = None
    if args.degradations:
        with open(args.degradations) as fh:
            degradations = [synth.DegradationSpec(**d) for d in json.load(fh)]
    manifest_path = synth.build_corpus(args.n, scene, degradations, args.out)
    log.info("corpus of %d samples -> %s", args.n, manifest_path)
    print(manifest_path)
    return EXIT_OK


def cmd_backend_check(args) -> int:
    from .objects import BoxPrompt, PointPrompt

    config = _config_from_args(args)
    backend = build_backend(config.backend)
    pixels = np.full((4, 4), 40, np.uint8)
    pixels[:2, :2] = 200
    fixture = Image(pixels)
    point = backend.segment_point(fixture, PointPrompt(1, 1))
    box = backend.segment_box(fixture, BoxPrompt(0, 0, 3, 3))
    # the dimension law was asserted inside the backend; report and succeed
    print(f"backend={backend.name}")
    print(f"point prompt: mask {point.mask.shape[1]}x{point.mask.shape[0]}, latency {point.latency_ms:.1f} ms")
    print(f"box prompt:   mask {box.mask.shape[1]}x{box.mask.shape[0]}, latency {box.latency_ms:.1f} ms")
    print("ok")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segqa",
        description="Score segmentation quality without ground truth via a promptable segmenter.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every sample in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", default=None, help="scores JSON path (default scores.json)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    p.add_argument("--min-area", dest="min_area", type=int, default=None)
    p.add_argument("--metric", choices=("dice", "iou"), default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="compare scores against ground-truth Dice")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scores", required=True, help="scores JSON from the score command")
    p.add_argument("--output-dir", dest="output_dir", default=None)
    p.add_argument("--k", action="append", type=float, default=None, help="bottom-k%% (repeatable)")
    p.add_argument("--replacement", action="store_true", help="also run the prediction-replacement analysis")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=None)
    p.add_argument("--min-area", dest="min_area", type=int, default=None)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic benchmark corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scene", default=None, help="SceneSpec JSON file")
    p.add_argument("--degradations", default=None, help="JSON list of DegradationSpec")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("backend-check", help="probe a backend with a tiny fixture")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_backend_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except BackendError as exc:
        log.error("%s", exc)
        return EXIT_BACKEND
    except (SegQAError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
