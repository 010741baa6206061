"""Model assembly: config validation, presets, forward contract, determinism."""

from dataclasses import replace

import numpy as np
import pytest

from haat.autograd import Tensor, conv2d
from haat.errors import ConfigError, ShapeError
from haat.model import (
    ModelConfig,
    build_model,
    full_config,
    parse_config_file,
    toy_config,
    width_ledger,
)


@pytest.fixture(scope="module")
def toy_model():
    return build_model(toy_config(), seed=0)


def unit_image(seed, c=3, h=8, w=8):
    return Tensor(np.random.default_rng(seed).uniform(size=(1, c, h, w)).astype(np.float32))


# --- configuration ---------------------------------------------------------


def test_toy_preset_values():
    cfg = toy_config()
    assert (cfg.channels, cfg.num_rdg, cfg.sdrcbs_per_rdg) == (16, 2, 2)
    assert (cfg.window_size, cfg.grid_size, cfg.head_dim) == (4, 4, 4)
    assert cfg.stl_growth == 8
    assert cfg.mal_heads == (2, 1, 1)
    assert (cfg.squeeze_factor, cfg.mlp_ratio, cfg.alpha) == (8, 2.0, 0.2)
    assert (cfg.scale, cfg.img_channels) == (2, 3)


def test_full_preset_values():
    cfg = full_config()
    assert (cfg.channels, cfg.num_rdg, cfg.sdrcbs_per_rdg) == (180, 6, 6)
    assert (cfg.window_size, cfg.grid_size, cfg.head_dim) == (16, 16, 30)
    assert cfg.stl_growth == 90
    assert cfg.mal_heads == (3, 3, 3)
    assert cfg.squeeze_factor == 16
    assert cfg.scale == 4


def test_presets_accept_overrides():
    assert toy_config(scale=3).scale == 3
    assert full_config(scale=2).scale == 2


@pytest.mark.parametrize("bad", [
    {"channels": 6},
    {"channels": 0},
    {"num_rdg": 0},
    {"sdrcbs_per_rdg": 0},
    {"stl_growth": 5},           # stage width 21 breaks head_dim 4
    {"window_size": 3},
    {"window_size": 0},
    {"head_dim": 0},
    {"head_dim": 3},
    {"mal_heads": (3, 1, 1)},    # 8 does not split into 3 heads
    {"mal_heads": (2, 1)},
    {"mal_heads": (2, 0, 1)},
    {"squeeze_factor": 0},
    {"squeeze_factor": 32},      # squeezes 16 channels to nothing
    {"mlp_ratio": 0.0},
    {"alpha": float("nan")},
    {"scale": 5},
    {"img_channels": 0},
])
def test_validate_rejects_bad_fields(bad):
    with pytest.raises(ConfigError):
        replace(ModelConfig(), **bad).validate()


def test_fingerprint_tracks_every_field():
    base = ModelConfig().fingerprint()
    assert base == ModelConfig().fingerprint()
    assert replace(ModelConfig(), alpha=0.21).fingerprint() != base
    assert replace(ModelConfig(), num_rdg=3).fingerprint() != base


def test_parse_config_file_roundtrip(tmp_path):
    path = tmp_path / "net.cfg"
    path.write_text(
        "# comment line\n"
        "channels = 16\n"
        "num_rdg=1\n"
        "mal_heads = 2, 1, 1\n"
        "alpha = 0.3   # inline comment\n"
        "\n"
    )
    cfg = parse_config_file(str(path))
    assert cfg.num_rdg == 1
    assert cfg.alpha == pytest.approx(0.3)
    assert cfg.mal_heads == (2, 1, 1)


def test_parse_config_file_reports_line_numbers(tmp_path):
    path = tmp_path / "net.cfg"
    path.write_text("channels = 16\nnonsense line\n")
    with pytest.raises(ConfigError) as err:
        parse_config_file(str(path))
    assert ":2:" in str(err.value)


def test_parse_config_file_rejects_unknown_key(tmp_path):
    path = tmp_path / "net.cfg"
    path.write_text("depth = 9\n")
    with pytest.raises(ConfigError):
        parse_config_file(str(path))


# --- width ledger ----------------------------------------------------------


def test_width_ledger_toy():
    led = width_ledger(toy_config())
    assert led["stl_widths"] == [16, 24, 32, 40, 48]
    assert led["transition_outs"] == [8, 8, 8, 8, 16]
    assert led["stl_heads"] == [4, 6, 8, 10, 12]
    assert led["mal_branch_widths"] == (8, 4, 4)
    assert led["squeeze_mid"] == 2
    assert led["mlp_hidden"] == 32


def test_width_ledger_full():
    led = width_ledger(full_config())
    assert led["stl_widths"] == [180, 270, 360, 450, 540]
    assert led["transition_outs"] == [90, 90, 90, 90, 180]
    assert led["stl_heads"] == [6, 9, 12, 15, 18]
    assert led["mal_branch_widths"] == (90, 45, 45)
    assert led["squeeze_mid"] == 11
    assert led["mlp_hidden"] == 360


# --- construction ----------------------------------------------------------


def test_build_is_deterministic():
    _, s1 = build_model(toy_config(), seed=5)
    _, s2 = build_model(toy_config(), seed=5)
    for (n1, t1), (n2, t2) in zip(s1.items(), s2.items()):
        assert n1 == n2
        assert np.array_equal(t1.numpy(), t2.numpy())


def test_build_seeds_differ():
    _, s1 = build_model(toy_config(), seed=0)
    _, s2 = build_model(toy_config(), seed=1)
    assert not np.array_equal(s1["shallow.weight"].numpy(), s2["shallow.weight"].numpy())


def test_toy_parameter_budget(toy_model):
    _, store = toy_model
    assert store.total_parameters() == 226_959
    assert sum(1 for _ in store.items()) == 474


def test_every_parameter_receives_gradient(toy_model):
    import haat.autograd as ag
    model, store = toy_model
    with ag.GradTape() as tape:
        out = model(unit_image(0))
        loss = ag.sum_all(out)
    ag.backward(loss, tape)
    missing = [name for name, t in store.items() if t.grad is None]
    assert missing == []
    for _, t in store.items():
        t.grad = None


def test_scale_three_and_four_head_shapes():
    for scale, stages in ((3, 1), (4, 2)):
        model, _ = build_model(toy_config(scale=scale), seed=0)
        assert len(model.up_stages) == stages
        out = model(unit_image(1, h=4, w=4))
        assert out.shape == (1, 3, 4 * scale, 4 * scale)


# --- forward contract ------------------------------------------------------


def test_forward_odd_sizes(toy_model):
    model, _ = toy_model
    out = model(Tensor(np.random.default_rng(2).uniform(size=(1, 3, 17, 13)).astype(np.float32)))
    assert out.shape == (1, 3, 34, 26)


def test_forward_tiny_input(toy_model):
    model, _ = toy_model
    out = model(unit_image(3, h=1, w=1))
    assert out.shape == (1, 3, 2, 2)
    assert np.isfinite(out.numpy()).all()


def test_forward_batch_axis(toy_model):
    model, _ = toy_model
    x = np.random.default_rng(4).uniform(size=(2, 3, 8, 8)).astype(np.float32)
    batched = model(Tensor(x)).numpy()
    singles = [model(Tensor(x[i:i + 1])).numpy() for i in range(2)]
    assert np.allclose(batched, np.concatenate(singles), atol=1e-5)


def test_forward_rejects_bad_inputs(toy_model):
    model, _ = toy_model
    with pytest.raises(ShapeError):
        model(Tensor(np.zeros((3, 8, 8), dtype=np.float32)))
    with pytest.raises(ShapeError):
        model(Tensor(np.zeros((1, 4, 8, 8), dtype=np.float32)))


def test_forward_deterministic(toy_model):
    model, _ = toy_model
    x = unit_image(5)
    assert np.array_equal(model(x).numpy(), model(x).numpy())


def test_zero_body_reduces_to_shallow_reconstruction():
    model, store = build_model(toy_config(), seed=3)
    for name, t in store.items():
        if name.startswith("body."):
            t.data = np.zeros_like(t.data)
    x = unit_image(6)
    got = model(x).numpy()
    shallow = conv2d(x, model.shallow_weight, model.shallow_bias, padding=1)
    want = model.reconstruct(shallow).numpy()
    assert np.array_equal(got, want)
