"""Acceptance criteria for the trainer.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. The directional ablation trains the full 25-epoch schedule on a
generated 200/50-clip dataset and takes a few minutes on CPU.
"""

import math
import time
from contextlib import contextmanager
from dataclasses import replace

import torch

from cliptrain import (
    ClassPromptBank,
    PARAM_BUDGET,
    PromptPair,
    ReconNet,
    TrainConfig,
    TrainSession,
    class_names,
    class_loss,
    classify_eval,
    coarse_train,
    fine_train,
    load_manifest,
    manifest_images,
    optimize_prompts,
    param_count,
    prompt_init_loss,
    prompt_loss,
    state_checksum,
)

from test_losses import check_gradient, feats_with_sims, unit_vec


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def test_loss_unit_values():
    with criterion("loss unit values (ln 2, -0.5, 4 ln 4, zero at B=1)"):
        image, hq, lq = feats_with_sims(0.4, 0.4)
        assert abs(float(prompt_init_loss(image, hq, lq, 1)) - math.log(2)) <= 1e-6
        assert abs(float(prompt_loss(image, hq, lq)) - (-0.5)) <= 1e-6

        anchor = unit_vec(torch.ones(4, dtype=torch.float64))
        bank = {c: anchor for c in "abcd"}
        got = float(class_loss(anchor.repeat(4, 1), list("abcd"), bank, 0.07))
        assert abs(got - 4 * math.log(4)) <= 1e-5
        single = float(class_loss(anchor.unsqueeze(0), ["a"], bank, 0.07))
        assert single == 0.0


def test_gradient_checks():
    with criterion("analytic gradients match central differences (<1e-3)"):
        torch.manual_seed(11)
        hq = unit_vec(torch.randn(8, dtype=torch.float64))
        lq = unit_vec(torch.randn(8, dtype=torch.float64))
        x0 = unit_vec(torch.randn(8, dtype=torch.float64))
        check_gradient(lambda x: prompt_init_loss(x, hq, lq, 1), x0, tol=1e-3)
        check_gradient(lambda x: prompt_loss(x, hq, lq), x0, tol=1e-3)

        bank = {c: unit_vec(torch.randn(8, dtype=torch.float64)) for c in "abcde"}
        batch = torch.stack([unit_vec(torch.randn(8, dtype=torch.float64)) for _ in range(4)])
        check_gradient(lambda x: class_loss(x, ["a", "c", "e", "b"], bank, 0.07),
                       batch, tol=1e-3)


def test_parameter_budget():
    with criterion("reconstruction network stays within 0.25 M parameters"):
        assert param_count(ReconNet()) <= PARAM_BUDGET


def test_stage_isolation(mini_copy, encoders):
    with criterion("stage 2 touches only prompts, stage 3 only the network"):
        cfg = TrainConfig(lr=5e-4, prompt_lr=3e-3, batch=4, seed=0)
        manifest = mini_copy / "train" / "manifest.json"
        lrn = coarse_train(manifest, cfg, epochs=2)
        classes = class_names(load_manifest(manifest))
        bank = ClassPromptBank(classes, encoders, seed=1)

        lrn_sum, enc_sum = state_checksum(lrn), state_checksum(encoders)
        hq = manifest_images(mini_copy / "hqset" / "manifest.json", "hq")
        lq = manifest_images(manifest, "lq")
        pair = optimize_prompts(hq, lq, cfg, encoders)
        fresh = PromptPair(encoders.token_dim, seed=cfg.seed)
        assert state_checksum(pair) != state_checksum(fresh)
        assert state_checksum(lrn) == lrn_sum
        assert state_checksum(encoders) == enc_sum

        pair_sum, bank_sum = state_checksum(pair), state_checksum(bank)
        fine_train(manifest, lrn, pair, bank, cfg, encoders, epochs=2)
        assert state_checksum(lrn) != lrn_sum
        assert state_checksum(pair) == pair_sum
        assert state_checksum(bank) == bank_sum
        assert state_checksum(encoders) == enc_sum


def test_directional_ablation(toy_dataset, encoders, tmp_path):
    """Full 25-epoch schedule on the 200/50 toy dataset.

    Adding class supervision must lift accuracy at least 10 points above
    chance, and the full pipeline must beat the coarse baseline.
    """
    with criterion("directional ablation: class loss >= 30%, full > coarse"):
        start = time.monotonic()
        cfg = TrainConfig(lr=5e-4, prompt_lr=3e-3, batch=8, seed=0)
        train_m = toy_dataset / "train" / "manifest.json"
        test_m = toy_dataset / "test" / "manifest.json"
        hq_m = toy_dataset / "hqset" / "manifest.json"
        classes = class_names(load_manifest(train_m))
        bank = ClassPromptBank(classes, encoders, seed=1)
        session = TrainSession(tmp_path / "ablation")

        lrn = coarse_train(train_m, cfg, session=session)
        acc_coarse = classify_eval(lrn, test_m, bank, encoders)

        class_only = ReconNet()
        class_only.load_state_dict(lrn.state_dict())
        class_only = fine_train(train_m, class_only, None, bank,
                                replace(cfg, prompt_weight=0.0), encoders, session=session)
        acc_class = classify_eval(class_only, test_m, bank, encoders)

        hq = manifest_images(hq_m, "hq")
        lq = manifest_images(train_m, "lq")
        pair = optimize_prompts(hq, lq, cfg, encoders, session=session)
        full = ReconNet()
        full.load_state_dict(lrn.state_dict())
        full = fine_train(train_m, full, pair, bank, cfg, encoders, session=session)
        acc_full = classify_eval(full, test_m, bank, encoders)

        elapsed = time.monotonic() - start
        print(f"\n  coarse={acc_coarse:.1f}%  class-only={acc_class:.1f}%  "
              f"full={acc_full:.1f}%  ({elapsed:.0f}s)")
        session.log(stage="ablation", coarse=acc_coarse, class_only=acc_class,
                    full=acc_full, seconds=round(elapsed, 1))

        assert acc_class >= 30.0, f"class supervision reached only {acc_class}%"
        assert acc_full > acc_coarse, (acc_full, acc_coarse)
        assert elapsed < 3 * 3600
