"""Active-learning orchestration.

One (condition, difficulty) block at a time: per increment k a fresh batch of
targeted training images is generated, the detector is trained and evaluated
on the standard test set, and the block ends when the windowed plateau test
fires -- |max(last M scores) - max(prior N scores)| <= tau, never before
M + N increments.  The block's best model seeds the next block.

The learnability protocol runs a fixed number of increments per difficulty
for a single condition against a per-condition test set, with no stopping
criterion.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .conditions import Condition, Difficulty, generate_parameters
from .datastore import (
    AssetRegistry,
    DatasetManifest,
    RenderSettings,
    derive_seed,
    generate_data,
    read_manifest,
    write_manifest,
)
from .detectors.base import Detector, ModelHandle, TrainRequest, TrainStep
from .errors import InvalidArgument
from .metrics import EvalConfig, MapScore, evaluate_predictions

ALL_CONDITIONS = tuple(Condition)
TRAIN_DIFFICULTIES = (Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD)


@dataclass(frozen=True)
class ALConfig:
    objects: tuple[int, ...]
    conditions: tuple[Condition, ...] = ALL_CONDITIONS
    difficulties: tuple[Difficulty, ...] = TRAIN_DIFFICULTIES
    window_recent: int = 3  # M
    window_prior: int = 8  # N
    tau: float = 0.02
    train_per_object: int = 10  # m
    test_per_cell: int = 30  # n, per (condition, difficulty, object)
    budget: int = 1000  # t, per-increment training iterations hint
    trainset_policy: str = "reset"  # reset | increment
    master_seed: int = 0
    confidence: float = 0.8
    iou: float = 0.5
    # chain models k -> k+1 (prose reading); if True, every increment trains
    # from the block-start model instead (literal pseudocode reading)
    train_from_block_start: bool = False
    max_increments: int = 200  # liveness guard for non-plateauing detectors
    settings: RenderSettings = RenderSettings()
    jobs: int = 1

    def __post_init__(self):
        if self.window_recent < 1 or self.window_prior < 1:
            raise InvalidArgument("window sizes must be >= 1")
        if self.tau <= 0:
            raise InvalidArgument("tau must be > 0")
        if self.train_per_object < 1 or self.test_per_cell < 1:
            raise InvalidArgument("m and n must be >= 1")
        if self.trainset_policy not in ("reset", "increment"):
            raise InvalidArgument("trainset_policy must be reset or increment")
        if not self.objects:
            raise InvalidArgument("at least one object required")


@dataclass(frozen=True)
class LearnabilityConfig:
    objects: tuple[int, ...]
    kappa: int = 10
    train_per_iteration: int = 25  # images per increment, spread over objects
    test_per_difficulty: int = 330
    retain_training: bool = True
    budget: int = 1000
    master_seed: int = 0
    confidence: float = 0.8
    iou: float = 0.5
    train_from_block_start: bool = False
    settings: RenderSettings = RenderSettings()
    jobs: int = 1

    def __post_init__(self):
        if self.kappa < 1:
            raise InvalidArgument("kappa must be >= 1")


@dataclass
class IncrementRecord:
    condition: str
    difficulty: str
    k: int
    model: dict  # ModelHandle JSON
    map: float
    per_class_ap: dict
    train_manifest: str
    train_size: int
    wall_time: float
    stopped: bool = False
    best_index: int | None = None

    def to_json(self):
        return asdict(self)


@dataclass
class RunLog:
    records: list[IncrementRecord] = field(default_factory=list)
    final_model: ModelHandle | None = None


def stopping_check(scores, window_recent: int, window_prior: int, tau: float):
    """Plateau test over the block's mAP history.

    Returns ("continue", None) or ("stop", best_index) where best_index is
    the earliest argmax within the last M + N scores (global index).
    """
    m, n = window_recent, window_prior
    if len(scores) < m + n:
        return "continue", None
    recent = max(scores[-m:])
    prior = max(scores[-(m + n) : -m])
    if abs(recent - prior) > tau:
        return "continue", None
    start = len(scores) - (m + n)
    window = scores[start:]
    best_index = start + window.index(max(window))
    return "stop", best_index


def build_standard_test_set(
    cfg: ALConfig, registry: AssetRegistry, out_dir
) -> DatasetManifest:
    """n samples per (condition, difficulty, object), everything else
    canonical; the single fixed test set all increments evaluate against."""
    if cfg.test_per_cell < 1:
        raise InvalidArgument("test_per_cell must be >= 1")
    thetas = []
    for c in cfg.conditions:
        for delta in cfg.difficulties:
            thetas.extend(
                generate_parameters(
                    c, delta, cfg.test_per_cell,
                    derive_seed(cfg.master_seed, "te-params", c.value, delta.value),
                )
            )
    return generate_data(
        thetas, list(cfg.objects), registry, out_dir,
        derive_seed(cfg.master_seed, "te"), cfg.settings,
        split="test", tag="te", jobs=cfg.jobs,
    )


def _append_log(path: Path, record: dict):
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")


def _load_log(path: Path) -> list[IncrementRecord]:
    records = []
    if path.exists():
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if "final_model" in rec:
                continue
            records.append(IncrementRecord(**rec))
    return records


def active_learn(
    cfg: ALConfig,
    detector: Detector,
    registry: AssetRegistry,
    out_dir,
    resume: bool = False,
) -> tuple[ModelHandle, RunLog]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "runlog.jsonl"

    test_dir = out_dir / "testset"
    te_manifest_path = test_dir / "manifest.jsonl"
    if resume and te_manifest_path.exists():
        te_manifest = read_manifest(te_manifest_path)
    else:
        te_manifest = build_standard_test_set(cfg, registry, test_dir)
    eval_cfg = EvalConfig(cfg.iou, cfg.confidence)

    prior_records = _load_log(log_path) if resume else []
    if not resume and log_path.exists():
        log_path.unlink()

    run = RunLog()
    model_in = detector.fresh_model("init")

    for c in cfg.conditions:
        for delta in cfg.difficulties:
            # plateau detection is per cell: each block trains and is scored
            # on the test images drawn for its own (condition, difficulty)
            cell_records = [
                r for r in te_manifest.records
                if r.theta.condition == c and r.theta.difficulty == delta
            ]
            cell_manifest = DatasetManifest(cell_records, test_dir)
            cell_path = test_dir / f"cell-{c.value}-{delta.value}.jsonl"
            if not cell_path.exists():
                write_manifest(cell_manifest, cell_path)
            cell_gts = cell_manifest.ground_truth()
            block = [
                r for r in prior_records
                if r.condition == c.value and r.difficulty == delta.value
            ]
            scores = [r.map for r in block]
            models = [ModelHandle.from_json(r.model) for r in block]
            run.records.extend(block)
            stopped = any(r.stopped for r in block)
            if stopped:
                best = next(r.best_index for r in block if r.stopped)
                model_in = models[best]
                continue

            block_start = model_in
            cumulative: list = []
            k = len(scores)
            if k and cfg.trainset_policy == "increment":
                prev = out_dir / "train" / f"{c.value}-{delta.value}" / f"upto-k{k}.jsonl"
                cumulative.extend(read_manifest(prev).records)
            while True:
                k += 1
                t0 = time.monotonic()
                thetas = generate_parameters(
                    c, delta, cfg.train_per_object,
                    derive_seed(cfg.master_seed, "tr-params", c.value, delta.value, k),
                )
                block_dir = out_dir / "train" / f"{c.value}-{delta.value}"
                manifest = generate_data(
                    thetas, list(cfg.objects), registry, block_dir,
                    derive_seed(cfg.master_seed, "tr", c.value, delta.value, k),
                    cfg.settings, split="train", tag=f"k{k}", jobs=cfg.jobs,
                )
                if cfg.trainset_policy == "increment":
                    cumulative.extend(manifest.records)
                    train_manifest = block_dir / f"upto-k{k}.jsonl"
                    write_manifest(DatasetManifest(cumulative, block_dir), train_manifest)
                    train_size = len(cumulative)
                else:
                    train_manifest = block_dir / f"k{k}.jsonl"
                    write_manifest(manifest, train_manifest)
                    train_size = len(manifest.records)

                init = block_start if cfg.train_from_block_start else model_in
                step = TrainStep(c.value, delta.value, k)
                model_k = detector.train(
                    TrainRequest(
                        train_manifest, init,
                        f"{c.value}-{delta.value}-k{k:03d}", cfg.budget, step,
                    )
                )
                models.append(model_k)
                if not cfg.train_from_block_start:
                    model_in = model_k

                dets = detector.detect(model_k, cell_path, cfg.confidence)
                score = evaluate_predictions(dets, cell_gts, eval_cfg)
                scores.append(score.map)

                decision, best = stopping_check(
                    scores, cfg.window_recent, cfg.window_prior, cfg.tau
                )
                if decision == "continue" and k >= cfg.max_increments:
                    decision, best = "stop", scores.index(max(scores))
                rec = IncrementRecord(
                    c.value, delta.value, k, model_k.to_json(), score.map,
                    {str(i): v for i, v in score.per_class_ap.items()},
                    str(train_manifest), train_size,
                    time.monotonic() - t0,
                    stopped=decision == "stop",
                    best_index=best,
                )
                run.records.append(rec)
                _append_log(log_path, rec.to_json())
                if decision == "stop":
                    model_in = models[best]
                    break

    run.final_model = model_in
    _append_log(log_path, {"final_model": model_in.to_json()})
    return model_in, run


def _cycled_generation(
    thetas, objects, registry, out_dir, seed, settings, split, tag, jobs
) -> list:
    """Render each theta for exactly one object, cycling through objects."""
    records = []
    for j, obj in enumerate(objects):
        subset = [t for i, t in enumerate(thetas) if i % len(objects) == j]
        if not subset:
            continue
        manifest = generate_data(
            subset, [obj], registry, out_dir, derive_seed(seed, obj),
            settings, split=split, tag=f"{tag}-o{obj}", jobs=jobs,
        )
        records.extend(manifest.records)
    return records


def build_learnability_test_set(
    cfg: LearnabilityConfig, condition: Condition,
    registry: AssetRegistry, out_dir,
) -> DatasetManifest:
    """Per-condition test set: test_per_difficulty images per difficulty,
    objects assigned round-robin (one object per image)."""
    out_dir = Path(out_dir)
    records = []
    for delta in TRAIN_DIFFICULTIES:
        thetas = generate_parameters(
            condition, delta, cfg.test_per_difficulty,
            derive_seed(cfg.master_seed, "lrn-te-params", condition.value, delta.value),
        )
        records.extend(
            _cycled_generation(
                thetas, list(cfg.objects), registry, out_dir,
                derive_seed(cfg.master_seed, "lrn-te", delta.value),
                cfg.settings, "test", f"te-{delta.value}", cfg.jobs,
            )
        )
    manifest = DatasetManifest(records, out_dir)
    write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def learnability(
    cfg: LearnabilityConfig,
    condition: Condition,
    detector: Detector,
    registry: AssetRegistry,
    out_dir,
) -> dict[str, list[float]]:
    """Fixed-increment per-condition training sweep (no stopping criterion).

    Returns the mAP matrix keyed by difficulty tag, kappa entries each.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    eval_cfg = EvalConfig(cfg.iou, cfg.confidence)

    test_dir = out_dir / "testset"
    te_manifest = build_learnability_test_set(cfg, condition, registry, test_dir)
    te_manifest_path = test_dir / "manifest.jsonl"
    gts = te_manifest.ground_truth()

    model_in = detector.fresh_model("init")
    block_start = model_in
    retained: list = []
    matrix: dict[str, list[float]] = {}
    log_path = out_dir / "runlog.jsonl"

    for delta in TRAIN_DIFFICULTIES:
        matrix[delta.value] = []
        for k in range(1, cfg.kappa + 1):
            thetas = generate_parameters(
                condition, delta, cfg.train_per_iteration,
                derive_seed(cfg.master_seed, "lrn-tr-params",
                            condition.value, delta.value, k),
            )
            block_dir = out_dir / "train" / delta.value
            records = _cycled_generation(
                thetas, list(cfg.objects), registry, block_dir,
                derive_seed(cfg.master_seed, "lrn-tr", delta.value, k),
                cfg.settings, "train", f"k{k}", cfg.jobs,
            )
            if cfg.retain_training:
                retained.extend(records)
                train_records = list(retained)
            else:
                train_records = records
            train_manifest = block_dir / f"k{k}.jsonl"
            write_manifest(DatasetManifest(train_records, block_dir), train_manifest)

            init = block_start if cfg.train_from_block_start else model_in
            step = TrainStep(condition.value, delta.value, k)
            model_k = detector.train(
                TrainRequest(
                    train_manifest, init,
                    f"lrn-{condition.value}-{delta.value}-k{k:03d}",
                    cfg.budget, step,
                )
            )
            model_in = model_k
            dets = detector.detect(model_k, te_manifest_path, cfg.confidence)
            score = evaluate_predictions(dets, gts, eval_cfg)
            matrix[delta.value].append(score.map)
            _append_log(
                log_path,
                {
                    "condition": condition.value,
                    "difficulty": delta.value,
                    "k": k,
                    "model": model_k.to_json(),
                    "map": score.map,
                    "train_size": len(train_records),
                },
            )
    return matrix
