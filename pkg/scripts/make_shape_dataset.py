#!/usr/bin/env python3
"""Build labeled low-light spike clip datasets from synthetic shape scenes.

Writes a pristine quality model plus train/ and test/ dataset directories
(each with manifest.json, spikes/, voxels/, hq/, lq/) ready for a trainer.
"""

import argparse
import json
import sys
from pathlib import Path

from spikecam import (
    SHAPE_CLASSES,
    SimConfig,
    build_dataset,
    default_registry,
    fit_niqe_model,
    save_niqe_model,
    shape_scene,
    simulate_constant,
)


def make_clips(n: int, size: int, k: int, cfg_base: SimConfig, seed0: int):
    clips = []
    for i in range(n):
        label = SHAPE_CLASSES[i % len(SHAPE_CLASSES)]
        scene = shape_scene(label, size, size, seed=seed0 + i)
        cfg = SimConfig(theta=cfg_base.theta, light_scale=cfg_base.light_scale,
                        dark_rate=cfg_base.dark_rate, seed=seed0 + i)
        clips.append((simulate_constant(scene, k, cfg), label))
    return clips


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--test", type=int, default=50)
    ap.add_argument("--hq", type=int, default=100,
                    help="normal-light clips whose selections form the unpaired HQ set")
    ap.add_argument("--size", type=int, default=48)
    ap.add_argument("--k", type=int, default=200)
    ap.add_argument("--bins", type=int, default=50)
    ap.add_argument("--light-scale", type=float, default=0.2)
    ap.add_argument("--dark-rate", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lowlight = SimConfig(light_scale=args.light_scale, dark_rate=args.dark_rate, seed=args.seed)
    normal = SimConfig(light_scale=1.0, dark_rate=0.0, seed=args.seed)

    patch = max(8, args.size // 4 // 2 * 2)  # 4x4 patch grid, even size
    corpus = [shape_scene(SHAPE_CLASSES[i % len(SHAPE_CLASSES)], args.size, args.size,
                          seed=20_000 + args.seed + i) for i in range(12)]
    model = fit_niqe_model(corpus, patch_size=patch)
    save_niqe_model(model, out / "model.niqe")

    registry = default_registry()
    splits = (("train", args.train, args.seed, lowlight),
              ("test", args.test, 10_000 + args.seed, lowlight),
              ("hqset", args.hq, 30_000 + args.seed, normal))
    for split, count, seed0, cfg in splits:
        clips = make_clips(count, args.size, args.k, cfg, seed0)
        manifest = build_dataset(clips, registry, model, out / split,
                                 bins=args.bins, workers=args.threads)
        print(json.dumps({"split": split, "clips": len(manifest.items),
                          "out": str(out / split / "manifest.json")}))

    meta = {"classes": list(SHAPE_CLASSES), "size": args.size, "k": args.k,
            "bins": args.bins, "light_scale": args.light_scale,
            "dark_rate": args.dark_rate, "seed": args.seed}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"meta": str(out / "meta.json")}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
