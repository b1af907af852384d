import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from iqprompt.cli import EXIT_CHECKPOINT, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from iqprompt.metrics import MetricsReport
from iqprompt.model import load_checkpoint
from iqprompt.sigio import load_dataset
from iqprompt.trainer import TrainLog

MICRO = {
    "data": {"schemes": ["BPSK", "QPSK"], "snr_grid_db": [20.0], "frames_per_cell": 40, "length": 32},
    "model": {"d_model": 16, "layers": 1, "heads": 2, "ff_mult": 2, "lora_rank": 2, "max_tokens": 512,
              "decoder": "linear"},
    "hptr": {"n_anchors": 8, "top_k": 3, "patch_len": 8, "stride": 8},
    "train": {"epochs": 3, "batch_size": 16, "finetune_epochs": 3, "shots": 10, "finetune_lr": 3e-3,
              "finetune_scope": "all"},
    "eval": {"snr_grid_db": [0.0, 6.0], "bench_batches": 4, "bench_batch_size": 4},
}


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "micro.yaml"
    cfg.write_text(yaml.safe_dump(MICRO))
    base = ["--config", str(cfg)]
    assert main(["gen-data", *base, "--out", str(root / "data")]) == EXIT_OK
    assert main(["pretrain", *base, "--data", str(root / "data"), "--out", str(root / "run")]) == EXIT_OK
    assert main(["finetune", *base, "--data", str(root / "data"), "--checkpoint",
                 str(root / "run" / "pretrain.ckpt"), "--out", str(root / "run")]) == EXIT_OK
    assert main(["eval", *base, "--data", str(root / "data"), "--checkpoint",
                 str(root / "run" / "finetune.ckpt"), "--out", str(root / "run")]) == EXIT_OK
    assert main(["denoise", *base, "--data", str(root / "data"), "--checkpoint",
                 str(root / "run" / "pretrain.ckpt"), "--out", str(root / "run")]) == EXIT_OK
    return root, base


class TestGenData:
    def test_files_and_split_counts(self, workspace):
        root, _ = workspace
        data = root / "data"
        summary = json.loads((data / "dataset.json").read_text())
        assert summary["counts"] == {"train": 64, "val": 8, "test": 8}
        for split in ("train", "val", "test"):
            assert len(load_dataset(data / f"{split}.iq")) == summary["counts"][split]

    def test_default_counts_are_8_1_1(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path), "--set", "data.length=32"]) == EXIT_OK
        counts = json.loads((tmp_path / "dataset.json").read_text())["counts"]
        assert counts == {"train": 320, "val": 40, "test": 40}

    def test_rerun_identical_digests(self, workspace, tmp_path):
        root, base = workspace
        assert main(["gen-data", *base, "--out", str(tmp_path)]) == EXIT_OK
        for name in ("train.iq", "val.iq", "test.iq", "dataset.json"):
            assert digest(tmp_path / name) == digest(root / "data" / name)

    def test_seed_flag_changes_data(self, workspace, tmp_path):
        root, base = workspace
        assert main(["gen-data", *base, "--seed", "7", "--out", str(tmp_path)]) == EXIT_OK
        assert digest(tmp_path / "train.iq") != digest(root / "data" / "train.iq")

    def test_invalid_scheme_exit_2(self, tmp_path, capsys):
        code = main(["gen-data", "--out", str(tmp_path), "--set", "data.schemes=[BPSK, FOO]"])
        assert code == EXIT_CONFIG
        assert "data.schemes" in capsys.readouterr().err

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        assert main(["gen-data", "--out", str(tmp_path), "--set", "train.epoch=3"]) == EXIT_CONFIG
        assert "train.epoch" in capsys.readouterr().err


class TestPipeline:
    def test_artifacts(self, workspace):
        run = workspace[0] / "run"
        for name in ("pretrain.ckpt", "pretrain_log.csv", "pretrain_log.json", "finetune.ckpt",
                     "finetune_log.json", "report_finetune.json", "report_eval.json", "report_denoise.json"):
            assert (run / name).exists(), name
        log = TrainLog.from_json((run / "pretrain_log.json").read_text())
        assert len(log.epochs) == 3

    def test_reports_embed_config_hash(self, workspace):
        run = workspace[0] / "run"
        hashes = {MetricsReport.from_json((run / f"report_{k}.json").read_text()).config_hash
                  for k in ("eval", "denoise", "finetune")}
        assert len(hashes) == 1 and None not in hashes
        ckpt = load_checkpoint(run / "finetune.ckpt")
        assert ckpt.checkpoint.extra["run_config_hash"] in hashes

    def test_denoise_report_rows(self, workspace):
        rep = MetricsReport.from_json((workspace[0] / "run" / "report_denoise.json").read_text())
        assert sorted(rep.per_snr_ssim) == ["0", "6"]
        assert np.isfinite(rep.ssim_mean)

    def test_oracle_predictor(self, workspace, tmp_path, capsys):
        root, base = workspace
        code = main(["eval", *base, "--data", str(root / "data"), "--predictor", "oracle", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert MetricsReport.from_json((tmp_path / "report_eval.json").read_text()).oa == 1.0
        assert "OA=1.0000" in capsys.readouterr().out

    def test_missing_data_exit_3(self, workspace, tmp_path):
        _, base = workspace
        code = main(["eval", *base, "--data", str(tmp_path / "nope"), "--predictor", "oracle", "--out", str(tmp_path)])
        assert code == EXIT_IO

    def test_geometry_conflict_exit_4(self, workspace, tmp_path):
        root, base = workspace
        code = main(["eval", *base, "--data", str(root / "data"), "--checkpoint",
                     str(root / "run" / "finetune.ckpt"), "--set", "model.d_model=32", "--out", str(tmp_path)])
        assert code == EXIT_CHECKPOINT

    def test_corrupt_checkpoint_exit_4(self, workspace, tmp_path):
        root, base = workspace
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes((root / "run" / "finetune.ckpt").read_bytes()[:100])
        code = main(["eval", *base, "--data", str(root / "data"), "--checkpoint", str(bad), "--out", str(tmp_path)])
        assert code == EXIT_CHECKPOINT

    def test_divergence_exit_5(self, workspace, tmp_path, capsys):
        root, base = workspace
        code = main(["pretrain", *base, "--data", str(root / "data"), "--set", "train.lr=1e30",
                     "--out", str(tmp_path)])
        assert code == EXIT_NUMERIC
        assert "batch" in capsys.readouterr().err


class TestAblateBenchPlot:
    def test_ablate_four_cells(self, workspace, tmp_path):
        root, base = workspace
        assert main(["ablate", *base, "--data", str(root / "data"), "--out", str(tmp_path)]) == EXIT_OK
        rows = (tmp_path / "ablation.csv").read_text().strip().splitlines()
        assert rows[0] == "hptr,faf,oa,kappa,ssim,seconds_per_batch,identity_checks,status"
        assert len(rows) == 5
        for line in rows[1:]:
            fields = line.split(",")
            assert all(np.isfinite(float(v)) for v in fields[2:6])
            assert "FAIL" not in fields[6] and fields[7] == "ok"

    def test_bench_prompt_fields(self, workspace, tmp_path):
        _, base = workspace
        assert main(["bench-prompt", *base, "--batches", "3", "--out", str(tmp_path)]) == EXIT_OK
        res = json.loads((tmp_path / "bench_prompt.json").read_text())
        assert res["hybrid_prompt_tokens"] == 3 and res["hardware_prompt_tokens"] >= 64
        assert res["batches"] == 3 and res["units"]["seconds_per_batch"] == "s"
        expected = 100 * (res["hardware_seconds_per_batch"] - res["hybrid_seconds_per_batch"])
        assert res["relative_difference_pct"] == pytest.approx(expected / res["hardware_seconds_per_batch"])

    def test_plot_outputs(self, workspace, tmp_path):
        run = workspace[0] / "run"
        reports = [str(run / "report_eval.json"), str(run / "report_denoise.json")]
        assert main(["plot", *reports, "--out", str(tmp_path / "a")]) == EXIT_OK
        assert main(["plot", *reports, "--out", str(tmp_path / "b")]) == EXIT_OK
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert names == sorted(f"report_{s}.{e}" for s in ("eval_oa_snr", "eval_confusion", "denoise_ssim")
                               for e in ("svg", "csv"))
        for n in names:
            if n.endswith(".csv"):
                assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
        ssim_rows = (tmp_path / "a" / "report_denoise_ssim.csv").read_text().strip().splitlines()
        assert len(ssim_rows) - 1 == len(MICRO["eval"]["snr_grid_db"])
        assert (tmp_path / "a" / "report_eval_confusion.svg").read_text().startswith("<svg")

    def test_plot_kind_filter_and_missing_report(self, workspace, tmp_path):
        run = workspace[0] / "run"
        assert main(["plot", str(run / "report_eval.json"), "--kind", "confusion", "--out", str(tmp_path)]) == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == ["confusion.csv", "confusion.svg"]
        assert main(["plot", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_IO


class TestEntryPoint:
    def test_seed_env_and_flag_precedence(self, tmp_path):
        from iqprompt.cli import build_parser, resolve_config

        args = build_parser().parse_args(["gen-data"])
        assert resolve_config(args, {"IQPROMPT_SEED": "9"}).train.seed == 9
        args = build_parser().parse_args(["gen-data", "--seed", "3"])
        cfg = resolve_config(args, {"IQPROMPT_SEED": "9"})
        assert cfg.train.seed == 3 and cfg.data.seed == 3

    def test_console_module(self):
        out = subprocess.run([sys.executable, "-m", "iqprompt.cli", "--help"], capture_output=True, text=True)
        assert out.returncode == 0 and "bench-prompt" in out.stdout
