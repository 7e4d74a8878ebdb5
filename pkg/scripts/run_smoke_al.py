#!/usr/bin/env python3
"""End-to-end demo: build synthetic assets, run the active-learning loop
with the builtin template detector, and score the final model on an
undistorted test set.

    python3 scripts/run_smoke_al.py --out /tmp/smoke-demo
"""

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from make_demo_assets import build  # noqa: E402

from foldlab import (  # noqa: E402
    ALConfig,
    AssetRegistry,
    Condition,
    RenderSettings,
    active_learn,
    evaluate_predictions,
    generate_data,
)
from foldlab.conditions import canonical_params  # noqa: E402
from foldlab.detectors import TemplatePoolDetector  # noqa: E402
from foldlab.metrics import EvalConfig  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--objects", type=int, default=2)
    parser.add_argument("--conditions", nargs="+", default=["fb", "sc"])
    parser.add_argument("--train-per-object", type=int, default=5)
    parser.add_argument("--test-per-cell", type=int, default=5)
    parser.add_argument("--image-size", nargs=2, type=int, default=[160, 120])
    parser.add_argument("--jobs", type=int, default=4)
    parser.add_argument("--seed", type=int, default=20260823)
    args = parser.parse_args()

    asset_dir = args.out / "assets"
    if not (asset_dir / "textures").exists():
        build(asset_dir, objects=max(args.objects, 2), backgrounds=2, occluders=2)
    registry = AssetRegistry.load(
        asset_dir / "textures", asset_dir / "backgrounds", asset_dir / "occluders"
    )

    settings = RenderSettings(image_size=tuple(args.image_size), grid=(8, 10))
    cfg = ALConfig(
        objects=tuple(range(args.objects)),
        conditions=tuple(Condition(c) for c in args.conditions),
        train_per_object=args.train_per_object,
        test_per_cell=args.test_per_cell,
        window_recent=2, window_prior=3,
        master_seed=args.seed,
        settings=settings, jobs=args.jobs,
    )
    detector = TemplatePoolDetector(args.out / "models")

    t0 = time.time()
    final, run = active_learn(cfg, detector, registry, args.out / "run")
    loop_time = time.time() - t0

    thetas = [canonical_params(Condition.DEFORMATION)] * 5
    canon = generate_data(
        thetas, list(cfg.objects), registry, args.out / "canon",
        args.seed + 1, settings, tag="cn", jobs=args.jobs,
    )
    dets = detector.detect(final, args.out / "canon" / "manifest.jsonl",
                           cfg.confidence)
    score = evaluate_predictions(
        dets, canon.ground_truth(), EvalConfig(cfg.iou, cfg.confidence)
    )

    per_block = {}
    for rec in run.records:
        per_block.setdefault(f"{rec.condition}/{rec.difficulty}", []).append(
            round(rec.map, 3)
        )
    print(json.dumps({
        "increments": len(run.records),
        "loop_seconds": round(loop_time, 1),
        "final_model": final.model_id,
        "canonical_map": round(score.map, 4),
        "map_per_block": per_block,
    }, indent=2))


if __name__ == "__main__":
    main()
