import json

import numpy as np
import pytest
import torch

from cliptrain import (
    ClassPromptBank,
    DataError,
    PromptPair,
    ReconNet,
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
    prompt_separation_loss,
    state_checksum,
)

from conftest import make_flat_dataset, write_manifest, write_spk, write_vox

FAST = TrainConfig(lr=5e-4, prompt_lr=3e-3, batch=4, seed=0)


def read_metrics(session: TrainSession):
    return [json.loads(line) for line in open(session.metrics_path)]


class TestConfig:
    def test_schedule_must_sum_to_25(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=(2, 1, 5))

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.epochs == (5, 1, 19)
        assert cfg.prompt_weight == 100.0
        assert cfg.tau == 0.07

    @pytest.mark.parametrize("kwargs", [
        {"lr": 0.0}, {"tau": -1.0}, {"batch": 0}, {"grad_clip": -1.0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestCoarse:
    def test_loss_descends_and_lq_written(self, mini_copy, tmp_path):
        manifest = mini_copy / "train" / "manifest.json"
        session = TrainSession(tmp_path / "run")
        lrn = coarse_train(manifest, FAST, session=session, epochs=3)
        rows = [m for m in read_metrics(session) if m.get("stage") == "coarse"]
        assert len(rows) == 3
        assert rows[-1]["loss"] < rows[0]["loss"]
        for record in load_manifest(manifest):
            assert record.lq_path is not None and record.lq_path.exists()
        assert (tmp_path / "run" / "lrn_coarse.pt").exists()
        assert isinstance(lrn, ReconNet)

    def test_overfits_flat_targets(self, tmp_path):
        # spikeless clips have all-zero reconstruction targets; enough steps
        # must push the mean output well toward zero
        manifest = make_flat_dataset(tmp_path / "flat", n_clips=4)
        cfg = TrainConfig(lr=1e-2, prompt_lr=3e-3, batch=2, seed=0)
        lrn = coarse_train(manifest, cfg, epochs=60)
        with torch.no_grad():
            out = lrn(torch.zeros(1, 50, 16, 16))
        assert float(out.mean()) < 0.05

    def test_wrong_voxel_channels(self, tmp_path):
        root = tmp_path / "bad"
        for sub in ("spikes", "voxels"):
            (root / sub).mkdir(parents=True)
        write_spk(root / "spikes" / "c.spk", np.zeros((8, 4, 4), dtype=np.uint8))
        write_vox(root / "voxels" / "c.vox", np.zeros((8, 4, 4), dtype=np.float32))
        write_manifest(root / "manifest.json", [{
            "clip_id": "c", "class_label": "circle",
            "spike_path": "spikes/c.spk", "voxel_path": "voxels/c.vox",
            "hq_path": None, "lq_path": None, "niqe_scores": {}, "chosen_method": "",
        }])
        with pytest.raises(DataError):
            coarse_train(root / "manifest.json", FAST, epochs=1)

    def test_empty_manifest(self, tmp_path):
        write_manifest(tmp_path / "manifest.json", [])
        with pytest.raises(DataError):
            coarse_train(tmp_path / "manifest.json", FAST, epochs=1)

    def test_deterministic_across_runs(self, mini_copy, tmp_path):
        manifest = mini_copy / "train" / "manifest.json"
        sessions = [TrainSession(tmp_path / f"run{i}") for i in range(2)]
        nets = [coarse_train(manifest, FAST, session=s, epochs=2) for s in sessions]
        losses = [[m["loss"] for m in read_metrics(s) if m.get("stage") == "coarse"]
                  for s in sessions]
        assert losses[0] == losses[1]
        assert state_checksum(nets[0]) == state_checksum(nets[1])


class TestPromptStage:
    def test_descends_and_only_touches_prompts(self, mini_copy, encoders, tmp_path):
        manifest = mini_copy / "train" / "manifest.json"
        lrn = coarse_train(manifest, FAST, epochs=2)
        lrn_sum = state_checksum(lrn)
        enc_sum = state_checksum(encoders)

        hq = manifest_images(mini_copy / "hqset" / "manifest.json", "hq")
        lq = manifest_images(manifest, "lq")
        session = TrainSession(tmp_path / "run")
        pair = optimize_prompts(hq, lq, FAST, encoders, session=session)

        assert state_checksum(lrn) == lrn_sum
        assert state_checksum(encoders) == enc_sum
        rows = [m for m in read_metrics(session) if "final_loss" in m]
        assert rows and rows[0]["final_loss"] < rows[0]["initial_loss"]

        labels = [1] * len(hq) + [0] * len(lq)
        fresh = PromptPair(encoders.token_dim, seed=FAST.seed)
        assert (prompt_separation_loss(pair, hq + lq, labels, encoders)
                < prompt_separation_loss(fresh, hq + lq, labels, encoders))

    def test_empty_sets_rejected(self, encoders):
        with pytest.raises(DataError):
            optimize_prompts([], [np.zeros((8, 8), dtype=np.float32)], FAST, encoders)


class TestFineStage:
    @pytest.fixture()
    def prepared(self, mini_copy, encoders):
        manifest = mini_copy / "train" / "manifest.json"
        lrn = coarse_train(manifest, FAST, epochs=2)
        classes = class_names(load_manifest(manifest))
        bank = ClassPromptBank(classes, encoders, seed=1)
        hq = manifest_images(mini_copy / "hqset" / "manifest.json", "hq")
        lq = manifest_images(manifest, "lq")
        pair = optimize_prompts(hq, lq, FAST, encoders)
        return manifest, lrn, pair, bank

    def test_updates_only_the_network(self, prepared, encoders, tmp_path):
        manifest, lrn, pair, bank = prepared
        sums = {"lrn": state_checksum(lrn), "pair": state_checksum(pair),
                "bank": state_checksum(bank), "enc": state_checksum(encoders)}
        session = TrainSession(tmp_path / "fine")
        fine_train(manifest, lrn, pair, bank, FAST, encoders, session=session, epochs=2)
        assert state_checksum(lrn) != sums["lrn"]
        assert state_checksum(pair) == sums["pair"]
        assert state_checksum(bank) == sums["bank"]
        assert state_checksum(encoders) == sums["enc"]
        rows = [m for m in read_metrics(session) if m.get("stage") == "fine"]
        assert len(rows) == 2 and all("class_loss" in m for m in rows)

    def test_prompt_weight_requires_prompts(self, prepared, encoders):
        manifest, lrn, _pair, bank = prepared
        with pytest.raises(DataError):
            fine_train(manifest, lrn, None, bank, FAST, encoders, epochs=1)

    def test_class_only_mode(self, prepared, encoders):
        from dataclasses import replace

        manifest, lrn, _pair, bank = prepared
        cfg = replace(FAST, prompt_weight=0.0)
        fine_train(manifest, lrn, None, bank, cfg, encoders, epochs=1)


class TestEval:
    def test_single_class_bank_scores_100(self, tmp_path, encoders):
        manifest = make_flat_dataset(tmp_path / "flat", n_clips=3, label="circle")
        bank = ClassPromptBank(["circle"], encoders, seed=1)
        assert classify_eval(ReconNet(), manifest, bank, encoders) == 100.0

    def test_untrained_net_near_chance_on_balanced_set(self, mini_dataset, encoders):
        manifest = mini_dataset / "test" / "manifest.json"
        classes = class_names(load_manifest(manifest))
        bank = ClassPromptBank(classes, encoders, seed=1)
        torch.manual_seed(123)
        acc = classify_eval(ReconNet(), manifest, bank, encoders)
        # 5 balanced clips over 5 classes; 3 sigma of Binomial(5, 0.2)
        sigma = 100 * np.sqrt(0.2 * 0.8 / 5)
        assert abs(acc - 20.0) <= 3 * sigma

    def test_argmax_rule_matches_chance_monte_carlo(self):
        gen = torch.Generator().manual_seed(9)
        feats = torch.nn.functional.normalize(torch.randn(2000, 16, generator=gen), dim=1)
        anchors = torch.nn.functional.normalize(torch.randn(5, 16, generator=gen), dim=1)
        labels = torch.randint(0, 5, (2000,), generator=gen)
        pred = (feats @ anchors.T).argmax(dim=1)
        acc = float((pred == labels).float().mean()) * 100
        sigma = 100 * np.sqrt(0.2 * 0.8 / 2000)
        assert abs(acc - 20.0) <= 3 * sigma

    def test_export_reconstructions(self, mini_copy, tmp_path, encoders):
        manifest = mini_copy / "test" / "manifest.json"
        paths = export_reconstructions(ReconNet(), manifest, tmp_path / "recon")
        assert len(paths) == 5
        assert all(p.exists() for p in paths)
