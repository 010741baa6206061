"""The correctness harness itself: sensitivity, oracles, toy training."""

import math

import numpy as np
import pytest

import haat.autograd as ag
from haat.autograd import Tensor, negate_gradient, precision
from haat.errors import DivergenceError, ShapeError
from haat.model import toy_config
from haat.verification import (
    GRADCHECK_LEVELS,
    attention_oracle_diff,
    default_training_patch,
    finite_diff_grad,
    gradcheck,
    naive_attention_oracle,
    run_gradcheck_suite,
    toy_overfit,
)


# --- gradcheck machinery ----------------------------------------------------


def test_finite_diff_matches_known_gradient():
    with precision("float64"):
        x = Tensor(np.array([0.5, -1.5, 2.0]))
        g = finite_diff_grad(lambda t: ag.sum_all(ag.mul(t, t)), x)
        assert np.allclose(g.numpy(), 2.0 * x.numpy(), atol=1e-7)


def test_gradcheck_passes_representative_primitives():
    for op in ("matmul", "conv2d", "layer_norm", "softmax"):
        result = gradcheck(op)
        assert result.passed, result.line()
        assert result.max_rel_err < 1e-4


def test_gradcheck_unknown_component():
    with pytest.raises(KeyError):
        gradcheck("no_such_op")


def test_gradcheck_detects_a_wrong_backward_rule():
    # flipping one op's backward must trip the checker: this is the
    # sensitivity control that proves the harness can fail
    with negate_gradient("matmul"):
        result = gradcheck("matmul")
    assert not result.passed
    assert result.max_rel_err > 0.1


def test_gradcheck_detects_subtly_scaled_gradients():
    with negate_gradient("sigmoid"):
        assert not gradcheck("sigmoid").passed


def test_gradcheck_levels_cover_everything():
    assert set(GRADCHECK_LEVELS) == {"primitives", "blocks", "model"}
    assert "matmul" in GRADCHECK_LEVELS["primitives"]
    assert set(GRADCHECK_LEVELS["blocks"]) == {"stl", "sdrcb", "mal", "hgab"}
    assert GRADCHECK_LEVELS["model"] == ["model"]


def test_run_suite_emits_one_line_per_component():
    lines = []
    results = run_gradcheck_suite(["add", "mul", "relu"], emit=lines.append)
    assert len(results) == len(lines) == 3
    for line, result in zip(lines, results):
        assert line.startswith(result.op + " ")
        assert " PASS " in line
        assert result.passed


def test_gradcheck_deterministic():
    a = gradcheck("layer_norm", seed=3)
    b = gradcheck("layer_norm", seed=3)
    assert a.max_rel_err == b.max_rel_err
    assert a.worst == b.worst


# --- attention oracles ------------------------------------------------------


def test_attention_oracles_agree_at_tolerance():
    for seed in range(3):
        for kind in ("w", "sw", "grid"):
            assert attention_oracle_diff(kind, seed) < 1e-5


def test_attention_oracle_unknown_kind():
    with pytest.raises(KeyError):
        attention_oracle_diff("diag", 0)


def test_naive_oracle_disallowed_keys_have_no_influence():
    # scaling a key no query may attend to must not change the oracle output
    from haat.attention import build_mhsa
    from haat.params import ParamStore

    rng = np.random.default_rng(0)
    store = ParamStore()
    p = build_mhsa(store, "a", rng, 8, 2, 4)
    p.bias_table.data = rng.normal(size=p.bias_table.shape)
    tokens = rng.normal(size=(16, 8))
    allowed = np.ones((16, 16), dtype=bool)
    allowed[:, 7] = False
    base = naive_attention_oracle(tokens, p, allowed)
    spiked = tokens.copy()
    spiked[7] += 100.0
    moved = naive_attention_oracle(spiked, p, allowed)
    assert np.abs(base[:7] - moved[:7]).max() < 1e-9
    assert np.abs(base[8:] - moved[8:]).max() < 1e-9


# --- toy training -----------------------------------------------------------


def test_default_patch_properties():
    patch = default_training_patch()
    assert patch.shape == (1, 3, 16, 16)
    data = patch.numpy()
    assert data.min() >= 0.0 and data.max() <= 1.0
    assert np.array_equal(data, default_training_patch().numpy())
    assert data.std() > 0.05  # carries real contrast


def test_toy_overfit_short_run_decreases_loss():
    curve = toy_overfit(toy_config(), default_training_patch(), steps=12, seed=0)
    assert len(curve.losses) == 12
    assert curve.losses[-1] < curve.losses[0]
    assert curve.config_fingerprint == toy_config().fingerprint()
    assert curve.model is not None and curve.store is not None


def test_toy_overfit_deterministic():
    a = toy_overfit(toy_config(), default_training_patch(), steps=6, seed=1)
    b = toy_overfit(toy_config(), default_training_patch(), steps=6, seed=1)
    assert a.losses == b.losses
    assert a == b  # model/store carry state but stay out of equality


def test_toy_overfit_zero_steps_leaves_seed_weights():
    from haat.model import build_model

    curve = toy_overfit(toy_config(), default_training_patch(), steps=0, seed=4)
    assert curve.losses == []
    _, fresh = build_model(toy_config(), seed=4)
    for (n1, t1), (n2, t2) in zip(curve.store.items(), fresh.items()):
        assert n1 == n2
        assert np.array_equal(t1.numpy(), t2.numpy())


def test_toy_overfit_rejects_bad_patches():
    bad_rank = Tensor(np.zeros((3, 16, 16), dtype=np.float32))
    with pytest.raises(ShapeError):
        toy_overfit(toy_config(), bad_rank, steps=1, seed=0)
    odd = Tensor(np.zeros((1, 3, 15, 16), dtype=np.float32))
    with pytest.raises(ShapeError):
        toy_overfit(toy_config(), odd, steps=1, seed=0)


def test_toy_overfit_divergence_reports_step():
    poisoned = Tensor(np.full((1, 3, 16, 16), np.nan, dtype=np.float32))
    with pytest.raises(DivergenceError) as err:
        toy_overfit(toy_config(), poisoned, steps=3, seed=0)
    assert err.value.step == 0
    assert "step 0" in str(err.value)
