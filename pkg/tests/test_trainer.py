import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from conftest import micro_network
from iqprompt.config import TrainConfig
from iqprompt.exceptions import InsufficientShots, InvalidArgument, MissingLabels, NonFiniteLoss
from iqprompt.model import SignalLanguageModel, load_checkpoint
from iqprompt.nncore import LRSchedule, schedule_lr
from iqprompt.sigio import GeneratorConfig, IQFrame, SignalDataset, make_synthetic_benchmark
from iqprompt.trainer import (
    TrainLog,
    batch_mse,
    corrupt_awgn,
    corrupt_mask,
    denoise_eval,
    derive_balancing_factors,
    finetune_classifier,
    mask_span,
    plan_epoch,
    pretrain,
    sample_shots,
)


def toy(schemes=("BPSK", "QPSK", "PAM4", "QAM16"), per_cell=30, snr=("noiseless",), seed=0, length=32):
    return make_synthetic_benchmark(GeneratorConfig(schemes=list(schemes), snr_grid_db=list(snr),
                                                    frames_per_cell=per_cell, length=length, seed=seed))


def sized(n, seed=0):
    r = np.random.default_rng(seed)
    frames = [IQFrame(r.standard_normal(32), r.standard_normal(32), label=0) for _ in range(n)]
    return SignalDataset(frames, ["a"], manifest={"description": "noise frames"})


def quick(**kw):
    base = dict(epochs=2, batch_size=16, lr=1e-3, seed=0)
    base.update(kw)
    return TrainConfig(**base)


class TestBalancing:
    def test_equal_sizes(self):
        assert derive_balancing_factors([sized(10), sized(10)]) == [1.0, 1.0]

    def test_unequal_sizes(self):
        b = derive_balancing_factors([sized(900), sized(100)])
        assert b == pytest.approx([1000 / 1800, 5.0])
        # every sample carries weight 1 on average
        assert np.average(b, weights=[900, 100]) == pytest.approx(1.0)

    def test_single(self):
        assert derive_balancing_factors([sized(7)]) == [1.0]

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            derive_balancing_factors([sized(3), SignalDataset([], ["a"])])
        with pytest.raises(InvalidArgument):
            derive_balancing_factors([])

    @given(st.lists(st.integers(1, 5000), min_size=1, max_size=6))
    def test_per_sample_mean_is_one(self, sizes):
        class Stub:
            def __init__(self, n):
                self.n = n

            def __len__(self):
                return self.n

        b = derive_balancing_factors([Stub(n) for n in sizes])
        assert np.average(b, weights=sizes) == pytest.approx(1.0)


class TestCorruption:
    def test_awgn_snr(self):
        x = np.ones((1, 2, 65536)) / np.sqrt(2)
        noisy = corrupt_awgn(x, [6.0], [1])
        snr = 10 * np.log10(np.mean(x**2) * 2 / (np.mean((noisy - x) ** 2) * 2))
        assert abs(snr - 6.0) < 0.1

    def test_mask_span_and_zeroing(self):
        assert mask_span(8, 0.25) == 2
        assert mask_span(4, 0.01) == 1
        x = np.ones((2, 2, 32))
        out, where = corrupt_mask(x, [0, 2], 2, 8, 8)
        assert out[0, :, :16].sum() == 0 and out[0, :, 16:].min() == 1
        assert out[1, :, 16:32].sum() == 0 and out[1, :, :16].min() == 1
        assert where.sum() == 2 * 2 * 16
        with pytest.raises(InvalidArgument):
            mask_span(8, 1.0)

    def test_batch_mse_masked(self):
        out, target = torch.zeros(1, 2, 4), torch.ones(1, 2, 4)
        where = np.zeros((1, 2, 4), bool)
        where[..., :2] = True
        target[..., 2:] = 0
        assert batch_mse(out, target).item() == 0.5
        assert batch_mse(out, target, where).item() == 1.0


class TestPlan:
    def test_deterministic_and_interleaved(self):
        m = SignalLanguageModel(micro_network())
        a, b = sized(40, 0), sized(20, 1)
        cfg = quick()
        p1, p2 = plan_epoch([a, b], cfg, 0, m), plan_epoch([a, b], cfg, 0, m)
        assert [x.batch_id for x in p1] == [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1), (0, 0, 2)]
        assert all(np.array_equal(x.x, y.x) for x, y in zip(p1, p2))
        p3 = plan_epoch([a, b], cfg, 1, m)
        assert not np.array_equal(p1[0].target, p3[0].target)

    def test_task_mix_follows_weights(self):
        m = SignalLanguageModel(micro_network())
        plan = plan_epoch([sized(32 * 200)], quick(batch_size=32, denoise_weight=1.0, mask_weight=0.0), 0, m)
        assert {b.task for b in plan} == {"denoise"}
        plan = plan_epoch([sized(16 * 200)], quick(), 0, m)
        frac = np.mean([b.task == "denoise" for b in plan])
        assert 0.4 < frac < 0.6


class TestPretrain:
    def test_weighted_losses_dry_run(self):
        m = SignalLanguageModel(micro_network())
        before = {n: p.detach().clone() for n, p in m.named_parameters()}
        _, log = pretrain(m, [sized(32, 0), sized(32, 1)], quick(epochs=1, balancing=[2.0, 1.0]),
                          dry_run=True, record_batches=True)
        for rec in log.batches:
            factor = 2.0 if rec["batch_id"][1] == 0 else 1.0
            assert rec["loss"] == factor * rec["mse"]
        assert all(torch.equal(p, before[n]) for n, p in m.named_parameters())

    def test_neutral_weights_equal_unweighted_mean(self):
        m = SignalLanguageModel(micro_network())
        _, log = pretrain(m, [sized(32, 0), sized(32, 1)], quick(epochs=1, balancing=[1.0, 1.0]),
                          dry_run=True, record_batches=True)
        assert all(r["loss"] == r["mse"] for r in log.batches)
        assert log.epochs[0].train_loss == pytest.approx(np.mean([r["mse"] for r in log.batches]))

    def test_early_stop_on_injected_plateau(self):
        m = SignalLanguageModel(micro_network())
        cfg = quick(epochs=50, patience_stop=20)
        _, log = pretrain(m, [sized(16)], cfg, val_loss_injector=lambda e: 1.0 if e >= 3 else 5.0 - e)
        assert log.early_stop_epoch == 23
        assert len(log.epochs) == 24

    def test_lr_trace_follows_schedule(self):
        m = SignalLanguageModel(micro_network())
        vals = [5.0, 4.0, 3.0] + [3.0] * 5 + [2.0] + [2.5] * 6
        cfg = quick(epochs=15, patience_halve=5, patience_stop=50, warmup_fraction=0.2)
        _, log = pretrain(m, [sized(16)], cfg, val_loss_injector=lambda e: vals[e])
        sched = LRSchedule("warmup_linear_decay", cfg.lr, 15, 0.2, 5)
        for e, lr in enumerate(log.lr_trace):
            assert lr == schedule_lr(sched, e, vals[:e])
        assert log.lr_trace[0] == pytest.approx(cfg.lr / 3)

    def test_frozen_base_untouched(self):
        m = SignalLanguageModel(micro_network())
        digest = m.frozen_digest()
        pretrain(m, [sized(32)], quick())
        assert m.frozen_digest() == digest

    def test_identical_logs_across_runs(self):
        logs = []
        for _ in range(2):
            m = SignalLanguageModel(micro_network())
            _, log = pretrain(m, [sized(48)], quick(epochs=3))
            logs.append(log)
        assert logs[0].deterministic_view() == logs[1].deterministic_view()
        assert logs[0].wall_clock > 0

    def test_length_mismatch(self):
        m = SignalLanguageModel(micro_network())
        other = SignalDataset([IQFrame(np.ones(16), np.ones(16))], [])
        with pytest.raises(InvalidArgument):
            pretrain(m, [sized(8), other], quick())

    def test_non_finite_loss_reports_batch(self):
        m = SignalLanguageModel(micro_network())
        with torch.no_grad():
            m.decoder.proj.bias.fill_(float("nan"))
        with pytest.raises(NonFiniteLoss) as err:
            pretrain(m, [sized(16)], quick())
        assert err.value.batch_id == (0, 0, 0)

    def test_checkpoint_written(self, tmp_path):
        m = SignalLanguageModel(micro_network())
        pretrain(m, [sized(16)], quick(), checkpoint_path=tmp_path / "p.ckpt")
        back = load_checkpoint(tmp_path / "p.ckpt")
        assert back.checkpoint.epoch == 2 and back.checkpoint.optimizer is not None
        x = torch.randn(2, 2, 32)
        m.eval(), back.eval()
        assert torch.equal(m(x), back(x))

    def test_log_serialization(self):
        m = SignalLanguageModel(micro_network())
        _, log = pretrain(m, [sized(16)], quick())
        back = TrainLog.from_json(log.to_json())
        assert back.to_dict() == log.to_dict()
        rows = log.to_csv().strip().splitlines()
        assert rows[0].startswith("epoch,lr,train_loss,val_mean") and len(rows) == 3

    def test_micro_run_decreases_train_mse(self):
        wins = 0
        for seed in range(10):
            train, val, _ = toy(per_cell=63, seed=seed)
            train = train.subset(range(200))
            m = SignalLanguageModel(micro_network(seed=seed))
            _, log = pretrain(m, [train], TrainConfig(epochs=3, seed=seed), [val])
            mse = [next(iter(r.train_mse.values())) for r in log.epochs]
            wins += mse[2] < mse[0]
        assert wins >= 9


class TestFinetune:
    def test_sampler_counts(self):
        train, _, _ = toy(per_cell=40)
        idx = sample_shots(train, 10, 0)
        assert np.bincount(train.labels()[idx]).tolist() == [10] * 4
        assert len(set(idx.tolist())) == 40
        assert np.array_equal(idx, sample_shots(train, 10, 0))

    def test_insufficient_shots(self):
        train, _, _ = toy(per_cell=10)
        with pytest.raises(InsufficientShots):
            sample_shots(train, 9, 0)
        m = SignalLanguageModel(micro_network())
        with pytest.raises(InsufficientShots):
            finetune_classifier(m, train, train, quick(), shots=50)

    def test_unlabelled(self):
        ds = SignalDataset([IQFrame(np.ones(32), np.ones(32))], ["a"])
        with pytest.raises(MissingLabels):
            sample_shots(ds, 1, 0)

    @pytest.mark.parametrize("scope", ["head", "head+adapters"])
    def test_scope_limits_updates(self, scope):
        train, _, test = toy(per_cell=20)
        m = SignalLanguageModel(micro_network(n_classes=4))
        before = {n: p.detach().clone() for n, p in m.named_parameters()}
        finetune_classifier(m, train, test, quick(finetune_epochs=2, finetune_lr=1e-2), shots=5, scope=scope)
        for n, p in m.named_parameters():
            moved = not torch.equal(p, before[n])
            allowed = n.startswith("head.") or (scope == "head+adapters" and ".lora_" in n)
            if not allowed:
                assert not moved, n
        assert any(not torch.equal(p, before[n]) for n, p in m.named_parameters() if n.startswith("head."))
        assert all(p.requires_grad == (not m.is_frozen_name(n)) for n, p in m.named_parameters())

    def test_separable_toy(self):
        train, _, test = toy(("BPSK", "QPSK"), per_cell=250, snr=(20.0,))
        for seed in range(3):
            m = SignalLanguageModel(micro_network(n_classes=2, seed=seed))
            cfg = TrainConfig(finetune_epochs=30, finetune_lr=3e-3, shots=100, seed=seed)
            _, report, log = finetune_classifier(m, train, test, cfg, scope="all")
            assert report.oa >= 0.99
            assert len(log.epochs) == 30
            assert log.lr_trace[-1] == cfg.finetune_lr_floor


class TestDenoiseEval:
    def test_identity_hook_matches_noisy(self):
        _, _, test = toy(per_cell=40)
        report = denoise_eval(None, test, [0.0, 5.0, 10.0], denoiser=lambda x: x)
        assert len(report.per_snr_ssim) == 3 and len(report.csv_rows()) == 4
        for k in report.per_snr_ssim:
            assert report.per_snr_ssim[k] == pytest.approx(report.per_snr_noisy_ssim[k], abs=1e-9)

    def test_noisy_ssim_monotone_in_snr(self):
        clean = toy(("QPSK",), per_cell=625)[0]
        assert len(clean) >= 500
        grid = [0.0, 3.0, 6.0, 10.0]
        report = denoise_eval(None, clean, grid, denoiser=lambda x: x)
        vals = [report.per_snr_noisy_ssim[f"{g:g}"] for g in grid]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_model_path_runs(self):
        _, _, test = toy(per_cell=20)
        m = SignalLanguageModel(micro_network())
        report = denoise_eval(m, test, [6.0], batch_size=16)
        assert np.isfinite(report.ssim_mean) and report.config_hash == m.cfg.hash()

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            denoise_eval(None, SignalDataset([], ["a"]), [0.0], denoiser=lambda x: x)
