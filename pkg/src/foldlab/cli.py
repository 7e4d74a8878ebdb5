"""Command-line entry points.

Every subcommand prints a single JSON summary on stdout; progress and
diagnostics go to stderr.  Options can also be supplied through a JSON
config file (--config); explicit flags override the file.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .conditions import Condition, Difficulty, generate_parameters
from .datastore import (
    AssetRegistry,
    RenderSettings,
    derive_seed,
    generate_data,
    read_manifest,
)
from .detectors import (
    ExternalDetector,
    MockDetector,
    MockScript,
    TemplatePoolDetector,
)
from .errors import FoldlabError, InvalidArgument
from .loop import (
    ALConfig,
    LearnabilityConfig,
    active_learn,
    build_standard_test_set,
    learnability,
)
from .metrics import EvalConfig, detections_from_json, evaluate_predictions


def _info(msg: str):
    print(msg, file=sys.stderr)


def _emit(summary: dict):
    print(json.dumps(summary, indent=2))


def _load_config(path) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _registry(cfg: dict) -> AssetRegistry:
    try:
        textures = cfg["textures"]
        backgrounds = cfg["backgrounds"]
    except KeyError as exc:
        raise InvalidArgument(f"missing asset directory option: {exc}")
    return AssetRegistry.load(textures, backgrounds, cfg.get("occluders"))


def _settings(cfg: dict) -> RenderSettings:
    base = RenderSettings()
    return RenderSettings(
        image_size=tuple(cfg.get("image_size", base.image_size)),
        grid=tuple(cfg.get("grid", base.grid)),
        fill=float(cfg.get("fill", base.fill)),
        pose_retries=int(cfg.get("pose_retries", base.pose_retries)),
    )


def _objects(cfg: dict, registry: AssetRegistry) -> tuple[int, ...]:
    objs = cfg.get("objects")
    if objs is None:
        return tuple(sorted(registry.textures))
    return tuple(int(o) for o in objs)


def _detector(spec: str, cfg: dict, out_dir: Path):
    models_root = Path(cfg.get("models_root", out_dir / "models"))
    if spec == "builtin":
        return TemplatePoolDetector(
            models_root, pool_cap=int(cfg.get("pool_cap", 256))
        )
    if spec.startswith("mock:"):
        return MockDetector(MockScript.from_file(spec[5:]), models_root)
    if spec.startswith("external:"):
        return ExternalDetector(spec[9:], timeout=float(cfg.get("timeout", 120)))
    raise InvalidArgument(
        f"unknown detector {spec!r}; use builtin, mock:<script.json>, "
        "or external:<command>"
    )


def _merge(cfg: dict, **flags) -> dict:
    merged = dict(cfg)
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _run(fn):
    try:
        fn()
    except FoldlabError as exc:
        _info(f"error: {exc}")
        sys.exit(2)


@click.group()
def main():
    """Synthetic imaging-condition datasets and incremental detector training."""


@main.command()
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--condition", "condition_tag", required=True,
              type=click.Choice([c.value for c in Condition]))
@click.option("--difficulty", "difficulty_tag", default="easy",
              type=click.Choice([d.value for d in Difficulty]))
@click.option("--count", type=int, default=10, help="parameter draws")
@click.option("--textures", type=click.Path(exists=True), default=None)
@click.option("--backgrounds", type=click.Path(exists=True), default=None)
@click.option("--occluders", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
def gen(config, condition_tag, difficulty_tag, count, textures, backgrounds,
        occluders, out, seed, jobs):
    """Generate a dataset for one condition and difficulty."""
    def body():
        if count < 1:
            raise InvalidArgument("--count must be >= 1")
        cfg = _merge(_load_config(config), textures=textures,
                     backgrounds=backgrounds, occluders=occluders,
                     seed=seed, jobs=jobs)
        registry = _registry(cfg)
        master = int(cfg.get("seed", 0))
        condition = Condition.from_tag(condition_tag)
        difficulty = Difficulty(difficulty_tag)
        if difficulty is Difficulty.CANONICAL:
            from .conditions import canonical_params
            thetas = [canonical_params(condition)] * count
        else:
            thetas = generate_parameters(
                condition, difficulty, count,
                derive_seed(master, "gen", condition_tag, difficulty_tag),
            )
        manifest = generate_data(
            thetas, list(_objects(cfg, registry)), registry, out,
            derive_seed(master, "gen-render"), _settings(cfg),
            split=cfg.get("split", "train"), tag=cfg.get("tag", "g"),
            jobs=int(cfg.get("jobs", 1)),
        )
        _emit({
            "out": str(out),
            "manifest": str(Path(out) / "manifest.jsonl"),
            "samples": len(manifest.records),
            "condition": condition_tag,
            "difficulty": difficulty_tag,
        })
    _run(body)


@main.command("standard-testset")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--count", type=int, default=None,
              help="samples per (condition, difficulty, object)")
@click.option("--textures", type=click.Path(exists=True), default=None)
@click.option("--backgrounds", type=click.Path(exists=True), default=None)
@click.option("--occluders", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
def standard_testset(config, count, textures, backgrounds, occluders, out,
                     seed, jobs):
    """Generate the full test grid: every condition at every difficulty."""
    def body():
        cfg = _merge(_load_config(config), textures=textures,
                     backgrounds=backgrounds, occluders=occluders,
                     seed=seed, jobs=jobs, test_per_cell=count)
        registry = _registry(cfg)
        al = _al_config(cfg, registry)
        manifest = build_standard_test_set(al, registry, out)
        _emit({
            "out": str(out),
            "manifest": str(Path(out) / "manifest.jsonl"),
            "samples": len(manifest.records),
            "conditions": [c.value for c in al.conditions],
            "difficulties": [d.value for d in al.difficulties],
        })
    _run(body)


@main.command("eval")
@click.option("--detections", required=True, type=click.Path(exists=True),
              help="JSON file of detections")
@click.option("--manifest", required=True, type=click.Path(exists=True),
              help="JSONL manifest supplying ground truth")
@click.option("--iou", type=float, default=0.5)
@click.option("--conf", type=float, default=0.8)
def eval_cmd(detections, manifest, iou, conf):
    """Score a detections file against a dataset manifest."""
    def body():
        dets = detections_from_json(json.loads(Path(detections).read_text()))
        gts = read_manifest(manifest).ground_truth()
        score = evaluate_predictions(dets, gts, EvalConfig(iou, conf))
        _emit({
            "map": score.map,
            "per_class_ap": {str(k): v for k, v in score.per_class_ap.items()},
            "detections": len(dets),
            "ground_truth": len(gts),
        })
    _run(body)


def _al_config(cfg: dict, registry: AssetRegistry) -> ALConfig:
    base = ALConfig(objects=(0,))
    conditions = tuple(
        Condition.from_tag(t) for t in cfg.get(
            "conditions", [c.value for c in base.conditions])
    )
    difficulties = tuple(
        Difficulty(t) for t in cfg.get(
            "difficulties", [d.value for d in base.difficulties])
    )
    return ALConfig(
        objects=_objects(cfg, registry),
        conditions=conditions,
        difficulties=difficulties,
        window_recent=int(cfg.get("window_recent", base.window_recent)),
        window_prior=int(cfg.get("window_prior", base.window_prior)),
        tau=float(cfg.get("tau", base.tau)),
        train_per_object=int(cfg.get("train_per_object", base.train_per_object)),
        test_per_cell=int(cfg.get("test_per_cell", base.test_per_cell)),
        budget=int(cfg.get("budget", base.budget)),
        trainset_policy=cfg.get("trainset_policy", base.trainset_policy),
        master_seed=int(cfg.get("seed", 0)),
        confidence=float(cfg.get("conf", base.confidence)),
        iou=float(cfg.get("iou", base.iou)),
        train_from_block_start=bool(
            cfg.get("train_from_block_start", base.train_from_block_start)),
        max_increments=int(cfg.get("max_increments", base.max_increments)),
        settings=_settings(cfg),
        jobs=int(cfg.get("jobs", 1)),
    )


@main.command("active-learn")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--detector", "detector_spec", default=None,
              help="builtin | mock:<script.json> | external:<command>")
@click.option("--textures", type=click.Path(exists=True), default=None)
@click.option("--backgrounds", type=click.Path(exists=True), default=None)
@click.option("--occluders", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--iou", type=float, default=None)
@click.option("--conf", type=float, default=None)
@click.option("--resume", is_flag=True, default=False)
def active_learn_cmd(config, detector_spec, textures, backgrounds, occluders,
                     out, seed, jobs, iou, conf, resume):
    """Run the full incremental-training loop over all condition blocks."""
    def body():
        cfg = _merge(_load_config(config), detector=detector_spec,
                     textures=textures, backgrounds=backgrounds,
                     occluders=occluders, seed=seed, jobs=jobs,
                     iou=iou, conf=conf)
        registry = _registry(cfg)
        al = _al_config(cfg, registry)
        out_dir = Path(out)
        detector = _detector(cfg.get("detector", "builtin"), cfg, out_dir)
        try:
            final_model, run = active_learn(al, detector, registry, out_dir,
                                            resume=resume)
        finally:
            detector.close()
        blocks = {}
        for rec in run.records:
            blocks.setdefault(f"{rec.condition}/{rec.difficulty}", []).append(rec.map)
        _emit({
            "out": str(out_dir),
            "runlog": str(out_dir / "runlog.jsonl"),
            "final_model": final_model.to_json(),
            "increments": len(run.records),
            "map_per_block": blocks,
        })
    _run(body)


@main.command("learnability")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--condition", "condition_tag", required=True,
              type=click.Choice([c.value for c in Condition]))
@click.option("--detector", "detector_spec", default=None)
@click.option("--textures", type=click.Path(exists=True), default=None)
@click.option("--backgrounds", type=click.Path(exists=True), default=None)
@click.option("--occluders", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
def learnability_cmd(config, condition_tag, detector_spec, textures,
                     backgrounds, occluders, out, seed, jobs):
    """Fixed-increment training sweep for one condition."""
    def body():
        cfg = _merge(_load_config(config), detector=detector_spec,
                     textures=textures, backgrounds=backgrounds,
                     occluders=occluders, seed=seed, jobs=jobs)
        registry = _registry(cfg)
        base = LearnabilityConfig(objects=(0,))
        lc = LearnabilityConfig(
            objects=_objects(cfg, registry),
            kappa=int(cfg.get("kappa", base.kappa)),
            train_per_iteration=int(
                cfg.get("train_per_iteration", base.train_per_iteration)),
            test_per_difficulty=int(
                cfg.get("test_per_difficulty", base.test_per_difficulty)),
            retain_training=bool(cfg.get("retain_training", base.retain_training)),
            budget=int(cfg.get("budget", base.budget)),
            master_seed=int(cfg.get("seed", 0)),
            confidence=float(cfg.get("conf", base.confidence)),
            iou=float(cfg.get("iou", base.iou)),
            settings=_settings(cfg),
            jobs=int(cfg.get("jobs", 1)),
        )
        out_dir = Path(out)
        detector = _detector(cfg.get("detector", "builtin"), cfg, out_dir)
        try:
            matrix = learnability(
                lc, Condition.from_tag(condition_tag), detector, registry, out_dir
            )
        finally:
            detector.close()
        _emit({
            "out": str(out_dir),
            "condition": condition_tag,
            "map_matrix": matrix,
        })
    _run(body)


if __name__ == "__main__":
    main()
