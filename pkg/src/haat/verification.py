"""Correctness harness: gradient checks, attention oracles, toy training.

Everything here runs the stack in 64-bit mode so finite-difference noise
cannot mask real gradient errors. Checks come back as values (pass flags
and error magnitudes), never exceptions, so a runner can report the whole
suite. The attention oracles recompute window, shifted, and grid
attention with explicit per-query loops and no layout machinery, giving
the fast implementation an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autograd as ag
from .attention import MhsaParams, build_mhsa, grid_msa, sw_msa, w_msa
from .autograd import GradTape, Tensor, backward, precision
from .blocks import (
    build_hgab,
    build_mal,
    build_sdrcb,
    build_stl,
    hgab_forward,
    mal_forward,
    sdrcb_forward,
    stl_forward,
)
from .errors import ContractError, DivergenceError, ShapeError
from .imaging import bicubic_resize
from .model import Haat, ModelConfig, build_model
from .optim import AdamState, adam_step
from .params import ParamStore

FD_STEP = 1e-4
GRAD_TOL = 1e-4
REL_FLOOR = 1e-6
_SAMPLES_PER_TENSOR = 6


def finite_diff_grad(f: Callable[[Tensor], Tensor], x: Tensor, h: float = FD_STEP) -> Tensor:
    """Central-difference gradient of a scalar function, element by element."""
    data = x.data.astype(np.float64)
    grad = np.zeros_like(data)
    flat = data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(Tensor(data.copy(), dtype=np.float64)).item()
        flat[i] = orig - h
        fm = f(Tensor(data.copy(), dtype=np.float64)).item()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return Tensor(grad, dtype=np.float64)


def _fd_rel_err(make_loss, flat, i, analytic, h) -> float:
    orig = flat[i]
    flat[i] = orig + h
    fp = make_loss().item()
    flat[i] = orig - h
    fm = make_loss().item()
    flat[i] = orig
    fd = (fp - fm) / (2.0 * h)
    return abs(fd - analytic) / max(abs(fd), abs(analytic), REL_FLOOR)


@dataclass
class GradCheckResult:
    """Outcome of one gradient check; ``passed`` iff the error is in tolerance."""

    op: str
    max_rel_err: float
    worst: tuple[str, int] | None
    passed: bool
    tolerance: float = GRAD_TOL

    def line(self) -> str:
        return f"{self.op} {'PASS' if self.passed else 'FAIL'} {self.max_rel_err:.3e}"


def _signed_away_from_zero(rng, shape, low=0.2, high=1.0):
    # keeps kinked activations (relu family, abs) away from their corner
    mag = rng.uniform(low, high, size=shape)
    sign = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return mag * sign


def _leaf(rng, shape, scale=1.0) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True, dtype=np.float64)


def _probe(rng, shape) -> Tensor:
    # scaled so probed losses stay O(1): elements whose true gradient is
    # zero (softmax-invariant directions) are judged against the absolute
    # floor, and a large loss would push f64 rounding noise past it
    return Tensor(rng.normal(size=shape) / math.prod(shape), dtype=np.float64)


# --- primitive cases -------------------------------------------------------
# each builder returns (leaves, make_loss); make_loss re-runs the forward
# from the leaves' current values


def _case_add(rng):
    a, b = _leaf(rng, (3, 4)), _leaf(rng, (4,))
    r = _probe(rng, (3, 4))
    return {"a": a, "b": b}, lambda: ag.sum_all(ag.mul(ag.add(a, b), r))


def _case_mul(rng):
    a, b = _leaf(rng, (2, 3, 4)), _leaf(rng, (3, 1))
    r = _probe(rng, (2, 3, 4))
    return {"a": a, "b": b}, lambda: ag.sum_all(ag.mul(ag.mul(a, b), r))


def _case_matmul(rng):
    a, b = _leaf(rng, (2, 5, 7)), _leaf(rng, (7, 3))
    r = _probe(rng, (2, 5, 3))
    return {"a": a, "b": b}, lambda: ag.sum_all(ag.mul(ag.matmul(a, b), r))


def _case_conv2d(rng):
    x, w, b = _leaf(rng, (2, 3, 6, 5)), _leaf(rng, (4, 3, 3, 3)), _leaf(rng, (4,))
    r = _probe(rng, (2, 4, 6, 5))
    return {"x": x, "w": w, "b": b}, lambda: ag.sum_all(ag.mul(ag.conv2d(x, w, b, padding=1), r))


def _case_layer_norm(rng):
    x, g, b = _leaf(rng, (2, 5, 6)), _leaf(rng, (6,)), _leaf(rng, (6,))
    r = _probe(rng, (2, 5, 6))
    return {"x": x, "gain": g, "bias": b}, lambda: ag.sum_all(ag.mul(ag.layer_norm(x, g, b), r))


def _case_softmax(rng):
    x = _leaf(rng, (3, 4, 5))
    r = _probe(rng, (3, 4, 5))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.softmax_lastdim(x), r))


def _case_relu(rng):
    x = Tensor(_signed_away_from_zero(rng, (4, 5)), requires_grad=True, dtype=np.float64)
    r = _probe(rng, (4, 5))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.relu(x), r))


def _case_leaky_relu(rng):
    x = Tensor(_signed_away_from_zero(rng, (4, 5)), requires_grad=True, dtype=np.float64)
    r = _probe(rng, (4, 5))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.leaky_relu(x, 0.2), r))


def _case_gelu(rng):
    x = _leaf(rng, (4, 5))
    r = _probe(rng, (4, 5))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.gelu(x), r))


def _case_sigmoid(rng):
    x = _leaf(rng, (4, 5))
    r = _probe(rng, (4, 5))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.sigmoid(x), r))


def _case_global_avg_pool(rng):
    x = _leaf(rng, (2, 3, 4, 5))
    r = _probe(rng, (2, 3, 1, 1))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.global_avg_pool(x), r))


def _case_pixel_shuffle(rng):
    x = _leaf(rng, (2, 8, 3, 4))
    r = _probe(rng, (2, 2, 6, 8))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.pixel_shuffle(x, 2), r))


def _case_pixel_unshuffle(rng):
    x = _leaf(rng, (2, 2, 6, 8))
    r = _probe(rng, (2, 8, 3, 4))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.pixel_unshuffle(x, 2), r))


def _case_concat_split(rng):
    a, b = _leaf(rng, (2, 3, 4, 4)), _leaf(rng, (2, 5, 4, 4))
    r1, r2 = _probe(rng, (2, 6, 4, 4)), _probe(rng, (2, 2, 4, 4))

    def loss():
        cat = ag.concat_channels([a, b])
        p1, p2 = ag.split_channels(cat, [6, 2])
        return ag.add(ag.sum_all(ag.mul(p1, r1)), ag.sum_all(ag.mul(p2, r2)))

    return {"a": a, "b": b}, loss


def _case_reshape_permute(rng):
    x = _leaf(rng, (2, 3, 4))
    r = _probe(rng, (4, 6))

    def loss():
        y = ag.permute(x, (2, 0, 1))
        return ag.sum_all(ag.mul(ag.reshape(y, (4, 6)), r))

    return {"x": x}, loss


def _case_roll2d(rng):
    x = _leaf(rng, (1, 2, 5, 6))
    r = _probe(rng, (1, 2, 5, 6))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.roll2d(x, -2, 3), r))


def _case_pad_reflect(rng):
    x = _leaf(rng, (1, 2, 4, 5))
    r = _probe(rng, (1, 2, 7, 7))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.pad_reflect_br(x, 3, 2), r))


def _case_crop(rng):
    x = _leaf(rng, (1, 2, 6, 6))
    r = _probe(rng, (1, 2, 4, 3))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.crop_br(x, 4, 3), r))


def _case_take_rows(rng):
    table = _leaf(rng, (9, 3))
    idx = rng.integers(0, 9, size=14)
    r = _probe(rng, (14, 3))
    return {"table": table}, lambda: ag.sum_all(ag.mul(ag.take_rows(table, idx), r))


def _case_absolute(rng):
    x = Tensor(_signed_away_from_zero(rng, (4, 5)), requires_grad=True, dtype=np.float64)
    r = _probe(rng, (4, 5))
    return {"x": x}, lambda: ag.sum_all(ag.mul(ag.absolute(x), r))


def _case_sum(rng):
    x = _leaf(rng, (3, 4))
    return {"x": x}, lambda: ag.mul(ag.sum_all(x), 1.7)


PRIMITIVE_COMPONENTS = {
    "add": _case_add,
    "mul": _case_mul,
    "matmul": _case_matmul,
    "conv2d": _case_conv2d,
    "layer_norm": _case_layer_norm,
    "softmax": _case_softmax,
    "relu": _case_relu,
    "leaky_relu": _case_leaky_relu,
    "gelu": _case_gelu,
    "sigmoid": _case_sigmoid,
    "global_avg_pool": _case_global_avg_pool,
    "pixel_shuffle": _case_pixel_shuffle,
    "pixel_unshuffle": _case_pixel_unshuffle,
    "concat_split": _case_concat_split,
    "reshape_permute": _case_reshape_permute,
    "roll2d": _case_roll2d,
    "pad_reflect": _case_pad_reflect,
    "crop": _case_crop,
    "take_rows": _case_take_rows,
    "absolute": _case_absolute,
    "sum": _case_sum,
}


# --- block and model cases -------------------------------------------------


def micro_config() -> ModelConfig:
    """Smallest config that exercises every architectural path (C=8)."""
    return ModelConfig(
        channels=8, num_rdg=1, sdrcbs_per_rdg=1, stl_growth=4, window_size=4,
        grid_size=4, head_dim=4, mal_heads=(1, 1, 1), squeeze_factor=4,
        mlp_ratio=2.0, alpha=0.2, scale=2, img_channels=3,
    ).validate()


def _store_leaves(x: Tensor, store: ParamStore) -> dict[str, Tensor]:
    leaves = {"input": x}
    leaves.update(store.items())
    return leaves


def _prepare_case_params(store: ParamStore, rng) -> None:
    """Move parameters to a point where h=1e-4 differences are trustworthy.

    Near the structured initialization two things poison finite
    differences without any gradient being wrong: pre-normalization
    variances are tiny (so layer-norm curvature dwarfs the slope, pure
    truncation error), and relu-family pre-activations sit on their kink.
    Random offsets fix the former; a positive shift on the biases that
    feed kinked activations fixes the latter.
    """
    for _, t in store.items():
        t.data = t.data + rng.normal(0.0, 0.15, size=t.data.shape)
    for name, t in store.items():
        if (".trans" in name and name.endswith("_bias")) or name.endswith("squeeze_bias"):
            t.data = t.data + 0.3


def _case_stl(rng):
    store = ParamStore()
    p = build_stl(store, "stl", rng, channels=8, head_dim=4, window=4,
                  mlp_ratio=2.0, shifted=True)
    _prepare_case_params(store, rng)
    x = _leaf(rng, (1, 8, 8, 8), scale=0.5)
    r = _probe(rng, (1, 8, 8, 8))

    def loss():
        y = stl_forward(x, p, window=4, shift=0)
        y = stl_forward(y, p, window=4, shift=2)
        return ag.sum_all(ag.mul(y, r))

    return _store_leaves(x, store), loss


def _case_sdrcb(rng):
    store = ParamStore()
    p = build_sdrcb(store, "sdrcb", rng, channels=8, growth=4, head_dim=4,
                    window=4, mlp_ratio=2.0, alpha=0.2)
    _prepare_case_params(store, rng)
    x = _leaf(rng, (1, 8, 8, 8), scale=0.5)
    r = _probe(rng, (1, 8, 8, 8))
    return _store_leaves(x, store), lambda: ag.sum_all(ag.mul(sdrcb_forward(x, p, 4), r))


def _case_mal(rng):
    store = ParamStore()
    p = build_mal(store, "mal", rng, channels=8, mal_heads=(1, 1, 1), window=4,
                  grid_size=4, squeeze=4)
    _prepare_case_params(store, rng)
    x = _leaf(rng, (1, 8, 8, 8), scale=0.5)
    r = _probe(rng, (1, 8, 8, 8))
    return _store_leaves(x, store), lambda: ag.sum_all(ag.mul(mal_forward(x, p, 4), r))


def _case_hgab(rng):
    store = ParamStore()
    p = build_hgab(store, "hgab", rng, channels=8, mal_heads=(1, 1, 1), window=4,
                   grid_size=4, squeeze=4, mlp_ratio=2.0)
    _prepare_case_params(store, rng)
    x = _leaf(rng, (1, 8, 8, 8), scale=0.5)
    r = _probe(rng, (1, 8, 8, 8))
    return _store_leaves(x, store), lambda: ag.sum_all(ag.mul(hgab_forward(x, p, 4), r))


def _case_model(rng):
    model, store = build_model(micro_config(), seed=7)
    _prepare_case_params(store, rng)
    x = Tensor(rng.uniform(0.0, 1.0, size=(1, 3, 8, 8)), requires_grad=True,
               dtype=np.float64)
    r = _probe(rng, (1, 3, 16, 16))
    return _store_leaves(x, store), lambda: ag.sum_all(ag.mul(model(x), r))


BLOCK_COMPONENTS = {
    "stl": _case_stl,
    "sdrcb": _case_sdrcb,
    "mal": _case_mal,
    "hgab": _case_hgab,
}
MODEL_COMPONENTS = {"model": _case_model}

GRADCHECK_LEVELS = {
    "primitives": list(PRIMITIVE_COMPONENTS),
    "blocks": list(BLOCK_COMPONENTS),
    "model": list(MODEL_COMPONENTS),
}

_ALL_COMPONENTS = {**PRIMITIVE_COMPONENTS, **BLOCK_COMPONENTS, **MODEL_COMPONENTS}


def gradcheck(component: str, seed: int = 0) -> GradCheckResult:
    """Compare tape gradients against central differences for one component.

    Primitive cases check every element; composite blocks and the model
    check a deterministic sample of elements per tensor (full coverage
    would blow the runtime budget without adding information; each
    tensor's backward rule is exercised either way).
    """
    if component not in _ALL_COMPONENTS:
        raise KeyError(f"unknown gradcheck component '{component}'")
    sample_cap = None if component in PRIMITIVE_COMPONENTS else _SAMPLES_PER_TENSOR
    with precision("float64"):
        rng = np.random.default_rng(seed)
        leaves, make_loss = _ALL_COMPONENTS[component](rng)

        with GradTape() as tape:
            loss = make_loss()
        backward(loss, tape)
        analytic = {}
        for name, t in leaves.items():
            if t.grad is None:
                raise ContractError(f"no gradient reached leaf '{name}'")
            analytic[name] = t.grad.copy()
            t.grad = None

        picker = np.random.default_rng(seed + 1)
        max_rel = 0.0
        worst = None
        for name, t in leaves.items():
            flat = t.data.reshape(-1)
            size = flat.size
            if sample_cap is None or size <= sample_cap:
                indices = range(size)
            else:
                indices = picker.choice(size, size=sample_cap, replace=False)
            ga = analytic[name].reshape(-1)
            for i in indices:
                rel = _fd_rel_err(make_loss, flat, i, ga[i], FD_STEP)
                # a kink straddle or truncation artifact vanishes under
                # step refinement; a genuinely wrong gradient does not
                for refined in (FD_STEP / 10.0, FD_STEP / 100.0):
                    if rel <= GRAD_TOL / 2.0:
                        break
                    rel = min(rel, _fd_rel_err(make_loss, flat, i, ga[i], refined))
                if rel > max_rel:
                    max_rel = rel
                    worst = (name, int(i))
    return GradCheckResult(op=component, max_rel_err=max_rel, worst=worst,
                           passed=max_rel < GRAD_TOL)


def run_gradcheck_suite(components=None, seed: int = 0, emit=None) -> list[GradCheckResult]:
    """Run a list of components (default: everything), one summary line each."""
    if components is None:
        components = list(_ALL_COMPONENTS)
    results = []
    for name in components:
        result = gradcheck(name, seed)
        if emit is not None:
            emit(result.line())
        results.append(result)
    return results


# --- attention oracles -----------------------------------------------------


def naive_attention_oracle(tokens: np.ndarray, p: MhsaParams, allowed: np.ndarray,
                           win_shape: tuple[int, int] | None = None) -> np.ndarray:
    """Reference attention for one token group, by explicit per-query loops.

    ``tokens`` is (T, C); ``allowed`` is a boolean (T, T) matrix saying
    which keys each query may see; disallowed keys are excluded from the
    softmax outright. Relative position bias rows come straight from the
    documented table layout. Everything is 64-bit numpy, no layout or
    autograd machinery.
    """
    t, c = tokens.shape
    if win_shape is None:
        side = math.isqrt(t)
        win_shape = (side, side)
    coords = [(i, j) for i in range(win_shape[0]) for j in range(win_shape[1])]
    span = 2 * p.table_side - 1
    table = p.bias_table.data.astype(np.float64)

    def project(w, b):
        return tokens.astype(np.float64) @ w.data.astype(np.float64) + b.data.astype(np.float64)

    q_all = project(p.q_weight, p.q_bias)
    k_all = project(p.k_weight, p.k_bias)
    v_all = project(p.v_weight, p.v_bias)
    hd = p.head_dim
    ctx = np.zeros((t, c))
    for head in range(p.heads):
        sl = slice(head * hd, (head + 1) * hd)
        q, k, v = q_all[:, sl], k_all[:, sl], v_all[:, sl]
        for qi in range(t):
            keys = [ki for ki in range(t) if allowed[qi, ki]]
            logits = []
            for ki in keys:
                dy = coords[qi][0] - coords[ki][0]
                dx = coords[qi][1] - coords[ki][1]
                row = (dy + p.table_side - 1) * span + (dx + p.table_side - 1)
                logits.append(float(q[qi] @ k[ki]) / math.sqrt(hd) + table[row, head])
            logits = np.asarray(logits)
            weights = np.exp(logits - logits.max())
            weights /= weights.sum()
            ctx[qi, sl] = weights @ v[keys]
    return ctx @ p.proj_weight.data.astype(np.float64) + p.proj_bias.data.astype(np.float64)


def _random_attention_setup(rng, channels=8, heads=2, table_side=4):
    store = ParamStore()
    p = build_mhsa(store, "attn", rng, channels, heads=heads, table_side=table_side)
    # the table initializes to zero by design; give it structure for testing
    p.bias_table.data = rng.normal(0.0, 0.5, size=p.bias_table.shape)
    x = Tensor(rng.normal(size=(1, channels, 8, 8)), dtype=np.float64)
    return p, x


def _region_label(y: int, x: int, size: int, window: int, shift: int) -> int:
    edges = (shift, size - window + shift)
    band_y = sum(y >= e for e in edges)
    band_x = sum(x >= e for e in edges)
    return band_y * 3 + band_x


def attention_oracle_diff(kind: str, seed: int, window: int = 4, shift: int = 2) -> float:
    """Max abs difference between an attention branch and its naive oracle.

    Runs at 8x8 with random parameters and a populated bias table; the
    oracle rebuilds the grouping with plain slicing and index arithmetic.
    """
    with precision("float64"):
        rng = np.random.default_rng(seed)
        p, x = _random_attention_setup(rng, table_side=window)
        size = x.shape[2]
        data = x.data[0]

        if kind == "w":
            fast = w_msa(x, p, window).data[0]
            ref = np.zeros_like(data)
            allowed = np.ones((window * window, window * window), dtype=bool)
            for wi in range(size // window):
                for wj in range(size // window):
                    tile = data[:, wi * window:(wi + 1) * window,
                                wj * window:(wj + 1) * window]
                    tokens = tile.reshape(tile.shape[0], -1).T
                    out = naive_attention_oracle(tokens, p, allowed)
                    ref[:, wi * window:(wi + 1) * window,
                        wj * window:(wj + 1) * window] = out.T.reshape(tile.shape)
        elif kind == "sw":
            fast = sw_msa(x, p, window, shift).data[0]
            rolled = np.roll(data, (-shift, -shift), axis=(1, 2))
            ref_rolled = np.zeros_like(rolled)
            for wi in range(size // window):
                for wj in range(size // window):
                    rows = [wi * window + a for a in range(window)]
                    cols = [wj * window + b for b in range(window)]
                    labels = []
                    for rr in rows:
                        for cc in cols:
                            oy = (rr + shift) % size
                            ox = (cc + shift) % size
                            labels.append(_region_label(oy, ox, size, window, shift))
                    labels = np.asarray(labels)
                    allowed = labels[:, None] == labels[None, :]
                    tile = rolled[:, rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
                    tokens = tile.reshape(tile.shape[0], -1).T
                    out = naive_attention_oracle(tokens, p, allowed)
                    ref_rolled[:, rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1] = (
                        out.T.reshape(tile.shape)
                    )
            ref = np.roll(ref_rolled, (shift, shift), axis=(1, 2))
        elif kind == "grid":
            stride = 2
            fast = grid_msa(x, p, stride).data[0]
            ref = np.zeros_like(data)
            gh, gw = size // stride, size // stride
            allowed = np.ones((gh * gw, gh * gw), dtype=bool)
            for u in range(stride):
                for v in range(stride):
                    tile = data[:, u::stride, v::stride]
                    tokens = tile.reshape(tile.shape[0], -1).T
                    out = naive_attention_oracle(tokens, p, allowed, win_shape=(gh, gw))
                    ref[:, u::stride, v::stride] = out.T.reshape(tile.shape)
        else:
            raise KeyError(f"unknown attention kind '{kind}'")
    return float(np.max(np.abs(fast - ref)))


# --- toy training ----------------------------------------------------------


def default_training_patch(seed: int = 0, size: int = 16) -> Tensor:
    """Deterministic synthetic HR patch: low-frequency color waves, mild noise.

    Tuned for short overfitting runs: the wave contrast drives useful
    gradients from the first step, and the dark mean keeps the distance
    the untrained model (which starts near zero output) must cover small.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, size), np.linspace(0.0, 1.0, size),
                         indexing="ij")
    waves = [
        0.30 + 0.24 * np.sin(2.0 * math.pi * (fy * yy + fx * xx) + phase)
        for fy, fx, phase in ((0.5, 0.3, 0.3), (0.3, 0.6, 1.1), (0.8, 0.5, 2.0))
    ]
    base = np.stack(waves) + rng.uniform(-0.01, 0.01, size=(3, size, size))
    return Tensor(np.clip(base, 0.0, 1.0)[None])


@dataclass
class TrainCurve:
    """Loss trajectory of one deterministic training run.

    ``model`` and ``store`` carry the trained state for callers that want
    to keep it; they do not take part in equality or the record itself.
    """

    losses: list[float]
    seed: int
    config_fingerprint: str
    model: Haat | None = field(default=None, repr=False, compare=False)
    store: ParamStore | None = field(default=None, repr=False, compare=False)


def toy_overfit(cfg: ModelConfig, patch: Tensor, steps: int, seed: int) -> TrainCurve:
    """Overfit one high-resolution patch: forward, L1 loss, Adam, repeat.

    The low-resolution input is the patch bicubic-downscaled by the
    config's scale. Loss is recorded before each update, 64-bit, one value
    per step. A non-finite loss raises :class:`DivergenceError` with the
    step index.
    """
    cfg.validate()
    if patch.ndim != 4 or patch.shape[0] != 1 or patch.shape[1] != cfg.img_channels:
        raise ShapeError(f"expected a (1, {cfg.img_channels}, H, W) patch, got {patch.shape}")
    h, w = patch.shape[2], patch.shape[3]
    if h % cfg.scale or w % cfg.scale:
        raise ShapeError(f"patch size {h}x{w} is not a multiple of scale {cfg.scale}")
    model, store = build_model(cfg, seed)
    lr = bicubic_resize(patch, 1.0 / cfg.scale,
                        out_size=(h // cfg.scale, w // cfg.scale)).detach()
    state = AdamState.for_params(store)
    target = patch.detach()
    losses: list[float] = []
    for step in range(steps):
        with GradTape() as tape:
            out = model(lr)
            loss = ag.mean_all(ag.absolute(ag.sub(out, target)))
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(step)
        losses.append(value)
        backward(loss, tape)
        adam_step(store, state)
    return TrainCurve(losses=losses, seed=seed,
                      config_fingerprint=cfg.fingerprint(), model=model, store=store)
