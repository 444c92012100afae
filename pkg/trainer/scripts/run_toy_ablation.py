#!/usr/bin/env python3
"""Run the three-stage training ablation on an exported clip dataset.

Expects a dataset directory with train/, test/, and hqset/ splits (see the
reconstruction toolkit's make_shape_dataset.py). Trains three variants that
share the coarse checkpoint: coarse only, coarse plus class supervision, and
the full pipeline with learned quality prompts. Prints one JSON line per
variant and writes checkpoints plus metrics.jsonl under --out.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from cliptrain import (
    ClassPromptBank,
    ReconNet,
    TinyEncoderPair,
    TrainConfig,
    TrainSession,
    class_names,
    classify_eval,
    coarse_train,
    export_reconstructions,
    fine_train,
    load_manifest,
    manifest_images,
    optimize_prompts,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", required=True, help="dataset root with train/, test/, hqset/")
    ap.add_argument("--out", required=True)
    ap.add_argument("--lr", type=float, default=5e-4)
    ap.add_argument("--prompt-lr", type=float, default=3e-3)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prompt-weight", type=float, default=100.0)
    ap.add_argument("--log-prompt-loss", action="store_true",
                    help="use the -log(probability) variant of the alignment term")
    ap.add_argument("--clip-checkpoint", help="local CLIP checkpoint directory; "
                    "defaults to the deterministic stand-in encoders")
    args = ap.parse_args()

    data = Path(args.data)
    train_m, test_m = data / "train" / "manifest.json", data / "test" / "manifest.json"
    hq_m = data / "hqset" / "manifest.json"
    cfg = TrainConfig(lr=args.lr, prompt_lr=args.prompt_lr, batch=args.batch,
                      seed=args.seed, prompt_weight=args.prompt_weight,
                      log_prompt_loss=args.log_prompt_loss)
    if args.clip_checkpoint:
        from cliptrain.hf_clip import HfClipEncoderPair

        encoders = HfClipEncoderPair(args.clip_checkpoint)
    else:
        encoders = TinyEncoderPair(seed=args.seed)

    classes = class_names(load_manifest(train_m))
    bank = ClassPromptBank(classes, encoders, seed=args.seed + 1)
    session = TrainSession(args.out)

    lrn = coarse_train(train_m, cfg, session=session)
    acc_coarse = classify_eval(lrn, test_m, bank, encoders)
    print(json.dumps({"variant": "coarse", "accuracy": acc_coarse}))

    class_only = ReconNet()
    class_only.load_state_dict(lrn.state_dict())
    class_only = fine_train(train_m, class_only, None, bank,
                            replace(cfg, prompt_weight=0.0), encoders, session=session)
    acc_class = classify_eval(class_only, test_m, bank, encoders)
    print(json.dumps({"variant": "class_only", "accuracy": acc_class}))

    pair = optimize_prompts(manifest_images(hq_m, "hq"), manifest_images(train_m, "lq"),
                            cfg, encoders, session=session)
    full = ReconNet()
    full.load_state_dict(lrn.state_dict())
    full = fine_train(train_m, full, pair, bank, cfg, encoders, session=session)
    acc_full = classify_eval(full, test_m, bank, encoders)
    print(json.dumps({"variant": "full", "accuracy": acc_full}))

    recon_dir = Path(args.out) / "recon_test"
    export_reconstructions(full, test_m, recon_dir)
    session.log(stage="ablation", coarse=acc_coarse, class_only=acc_class, full=acc_full)
    print(json.dumps({"checkpoints": args.out, "reconstructions": str(recon_dir)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
