import pytest

from infoadv.config import (DATASETS, ConfigError, TrainConfig, default_config, dump_config, load_config,
                            parse_config, save_config, variant_config)


def test_cora_defaults():
    cfg = default_config("cora")
    assert cfg.lam == 1e-5
    assert (cfg.p_f1, cfg.p_f2) == (0.4, 0.3)
    assert (cfg.p_ea, cfg.p_e2) == (0.8, 0.2)
    assert cfg.lr_encoder == cfg.lr_generator == 5e-4
    assert cfg.weight_decay == 1e-5
    assert cfg.epochs == 1000 and cfg.hidden_dim == 128 and cfg.activation == "relu"


def test_other_dataset_rows():
    assert default_config("pubmed").epochs == 2500
    assert default_config("Amazon_Photo").lam == 60.0
    assert default_config("citeseer").activation == "prelu"
    assert len(DATASETS) == 8
    with pytest.raises(ConfigError):
        default_config("reddit")


def test_round_trip(tmp_path):
    cfg = default_config("wiki-cs", seed=7, freq_ratio=10, generator_objective="infonce", hard_mask=False)
    path = tmp_path / "cfg.txt"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert dump_config(load_config(path)) == dump_config(cfg)


def test_parse_comments_and_base():
    cfg = parse_config("# header\nlam = 0.5  # inline\n\nepochs=3\nuse_generator=false\n", default_config("cora"))
    assert cfg.lam == 0.5 and cfg.epochs == 3 and cfg.use_generator is False
    assert cfg.p_f1 == 0.4


@pytest.mark.parametrize("text", ["alpha=1", "lam", "epochs=ten", "p_ea=1.0", "freq_ratio=0", "lam=-1",
                                  "activation=tanh", "use_generator=maybe", "generator_objective=mi"])
def test_invalid_config(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("lam=1\nbogus=2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.txt")


def test_variants():
    base = TrainConfig(lam=3.0, freq_ratio=10)
    assert variant_config(base, "infoadv") == base
    assert variant_config(base, "wo_reg").lam == 0.0
    wo_gen = variant_config(base, "wo_gen")
    assert not wo_gen.use_generator and wo_gen.lam == 3.0 and wo_gen.freq_ratio == 1
    grace = variant_config(base, "grace")
    assert not grace.use_generator and grace.lam == 0.0
    with pytest.raises(ConfigError):
        variant_config(base, "dgi")
