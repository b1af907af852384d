import json

import pytest

from iqprompt.config import ConfigError, RunConfig, dump_config, load_config


class TestStrictParsing:
    def test_defaults_validate(self):
        cfg = RunConfig.from_dict(None)
        assert cfg.train.epochs == 50 and cfg.hptr.top_k == 7 and cfg.train.lr == 5e-5

    @pytest.mark.parametrize("doc,key", [
        ({"trian": {}}, "trian"),
        ({"train": {"epoch": 3}}, "train.epoch"),
        ({"model": {"d_model": "big"}}, "model.d_model"),
        ({"hptr": {"prefix": "soft"}}, "hptr.prefix"),
        ({"data": {"schemes": ["BPSK", "OOK"]}}, "data.schemes"),
        ({"train": {"denoise_weight": 0.7}}, "train.denoise_weight"),
        ({"model": {"d_model": 30, "heads": 4}}, "model.d_model"),
        ({"faf": {"enabled": "yes"}}, "faf.enabled"),
    ])
    def test_rejects_and_names_key(self, doc, key):
        with pytest.raises(ConfigError) as err:
            RunConfig.from_dict(doc)
        assert err.value.key == key

    def test_int_accepted_for_float(self):
        assert RunConfig.from_dict({"train": {"lr": 1}}).train.lr == 1.0

    def test_bool_is_not_int(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"train": {"epochs": True}})


class TestLoading:
    def test_yaml_and_overrides(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("train:\n  epochs: 4\nhptr:\n  top_k: 3\n")
        cfg = load_config(p, ["train.lr=1e-3", "data.schemes=[BPSK, QPSK]", "train.epochs=5"])
        assert cfg.train.epochs == 5 and cfg.hptr.top_k == 3
        assert cfg.train.lr == 1e-3 and cfg.data.schemes == ["BPSK", "QPSK"]

    def test_json_document(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"eval": {"ssim_window": 7}}))
        assert load_config(p).eval.ssim_window == 7

    @pytest.mark.parametrize("item", ["train.lr", "lr=1", "a.b.c=1", "train.lr=nan"])
    def test_bad_overrides(self, item):
        with pytest.raises(ConfigError):
            load_config(None, [item])

    def test_missing_file_is_os_error(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "nope.yaml")

    def test_dump_round_trip(self, tmp_path):
        cfg = load_config(None, ["model.d_model=32", "train.shots=5"])
        p = tmp_path / "c.yaml"
        p.write_text(dump_config(cfg))
        back = load_config(p)
        assert back.to_dict() == cfg.to_dict() and back.hash() == cfg.hash()


class TestHash:
    def test_stable_and_sensitive(self):
        a = RunConfig.from_dict({})
        assert a.hash() == RunConfig.from_dict({}).hash()
        assert a.hash() != RunConfig.from_dict({"train": {"seed": 1}}).hash()
        assert len(a.hash()) == 16
        assert a.hash() == RunConfig.from_dict({"io": {"out_dir": "elsewhere", "threads": 2}}).hash()
