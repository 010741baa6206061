"""Attention branches: windowed, shifted, dilated-grid, and channel.

All spatial variants share one multi-head token attention core with a
learned relative-position bias; they differ only in how the feature map is
regrouped into token blocks. Inputs of any spatial size are handled by
reflect padding to the required multiple and cropping afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ConfigError, ShapeError
from .layout import (
    build_shift_mask,
    cyclic_shift,
    grid_partition,
    grid_reverse,
    pad_to_multiple,
    relative_index_map,
    relative_table_rows,
    window_partition,
    window_reverse,
)
from .params import ParamStore, trunc_normal, zeros


@dataclass
class MhsaParams:
    """Weights of one multi-head self-attention over token groups."""

    q_weight: Tensor
    q_bias: Tensor
    k_weight: Tensor
    k_bias: Tensor
    v_weight: Tensor
    v_bias: Tensor
    proj_weight: Tensor
    proj_bias: Tensor
    bias_table: Tensor
    heads: int
    head_dim: int
    table_side: int


@dataclass
class ChannelAttnParams:
    """Weights of the squeeze-and-excite channel gate."""

    squeeze_weight: Tensor
    squeeze_bias: Tensor
    excite_weight: Tensor
    excite_bias: Tensor


def build_mhsa(store: ParamStore, prefix: str, rng: np.random.Generator,
               channels: int, heads: int, table_side: int) -> MhsaParams:
    """Register freshly initialized attention weights under ``prefix``.

    Projections start truncated-normal (std 0.02), biases and the
    relative-position table start at zero.
    """
    if heads < 1 or channels % heads != 0:
        raise ConfigError(f"{channels} channels do not split into {heads} heads")
    rows = relative_table_rows(table_side)
    return MhsaParams(
        q_weight=store.add(f"{prefix}.q_weight", trunc_normal(rng, (channels, channels))),
        q_bias=store.add(f"{prefix}.q_bias", zeros(channels)),
        k_weight=store.add(f"{prefix}.k_weight", trunc_normal(rng, (channels, channels))),
        k_bias=store.add(f"{prefix}.k_bias", zeros(channels)),
        v_weight=store.add(f"{prefix}.v_weight", trunc_normal(rng, (channels, channels))),
        v_bias=store.add(f"{prefix}.v_bias", zeros(channels)),
        proj_weight=store.add(f"{prefix}.proj_weight", trunc_normal(rng, (channels, channels))),
        proj_bias=store.add(f"{prefix}.proj_bias", zeros(channels)),
        bias_table=store.add(f"{prefix}.bias_table", zeros((rows, heads))),
        heads=heads,
        head_dim=channels // heads,
        table_side=table_side,
    )


def build_channel_attention(store: ParamStore, prefix: str, rng: np.random.Generator,
                            channels: int, squeeze: int) -> ChannelAttnParams:
    mid = channels // squeeze
    if mid < 1:
        raise ConfigError(f"squeeze factor {squeeze} leaves no channels out of {channels}")
    return ChannelAttnParams(
        squeeze_weight=store.add(f"{prefix}.squeeze_weight", trunc_normal(rng, (mid, channels, 1, 1))),
        squeeze_bias=store.add(f"{prefix}.squeeze_bias", zeros(mid)),
        excite_weight=store.add(f"{prefix}.excite_weight", trunc_normal(rng, (channels, mid, 1, 1))),
        excite_bias=store.add(f"{prefix}.excite_bias", zeros(channels)),
    )


def mhsa(tokens: Tensor, p: MhsaParams, mask: np.ndarray | None = None,
         win_shape: tuple[int, int] | None = None, return_weights: bool = False):
    """Multi-head self-attention within each token group.

    ``tokens`` is (groups, T, C). ``win_shape`` gives the (rows, cols)
    geometry behind the raster token order for relative biasing; it
    defaults to a square. ``mask`` is an additive (M, T, T) block applied
    cyclically over the group axis (M must divide the group count).

    Returns the projected tokens, plus the post-softmax attention weights
    when ``return_weights`` is set.
    """
    nb, t, c = tokens.shape
    if c != p.heads * p.head_dim:
        raise ShapeError(f"{c}-channel tokens do not match {p.heads}x{p.head_dim} heads")
    if win_shape is None:
        side = math.isqrt(t)
        if side * side != t:
            raise ShapeError(f"group of {t} tokens is not square; pass win_shape")
        win_shape = (side, side)
    if win_shape[0] * win_shape[1] != t:
        raise ShapeError(f"win_shape {win_shape} does not hold {t} tokens")

    idx = relative_index_map(win_shape[0], win_shape[1], p.table_side)
    bias = ag.take_rows(p.bias_table, idx.reshape(-1))
    bias = ag.permute(ag.reshape(bias, (t, t, p.heads)), (2, 0, 1))

    def project(weight, bias_vec):
        proj = ag.add(ag.matmul(tokens, weight), bias_vec)
        return ag.permute(ag.reshape(proj, (nb, t, p.heads, p.head_dim)), (0, 2, 1, 3))

    q = project(p.q_weight, p.q_bias)
    k = project(p.k_weight, p.k_bias)
    v = project(p.v_weight, p.v_bias)
    logits = ag.mul(ag.matmul(q, ag.permute(k, (0, 1, 3, 2))), 1.0 / math.sqrt(p.head_dim))
    logits = ag.add(logits, bias)
    if mask is not None:
        m = mask.shape[0]
        if nb % m != 0:
            raise ShapeError(f"mask for {m} groups does not tile {nb} token groups")
        logits = ag.reshape(logits, (nb // m, m, p.heads, t, t))
        logits = ag.add(logits, Tensor(mask.reshape(1, m, 1, t, t), dtype=logits.dtype))
        logits = ag.reshape(logits, (nb, p.heads, t, t))
    weights = ag.softmax_lastdim(logits)
    out = ag.matmul(weights, v)
    out = ag.reshape(ag.permute(out, (0, 2, 1, 3)), (nb, t, c))
    out = ag.add(ag.matmul(out, p.proj_weight), p.proj_bias)
    if return_weights:
        return out, weights
    return out


def w_msa(x: Tensor, p: MhsaParams, window: int) -> Tensor:
    """Window attention over an NCHW map; pads and crops as needed."""
    b = x.shape[0]
    padded, (h, w) = pad_to_multiple(x, window, window)
    hp, wp = padded.shape[2], padded.shape[3]
    tokens = window_partition(padded, window)
    tokens = mhsa(tokens, p)
    out = window_reverse(tokens, window, b, hp, wp)
    if (hp, wp) != (h, w):
        out = ag.crop_br(out, h, w)
    return out


def sw_msa(x: Tensor, p: MhsaParams, window: int, shift: int) -> Tensor:
    """Shifted-window attention: roll up-left, attend with a region mask, roll back.

    The mask stops tokens that were never neighbours (those wrapped around
    by the roll) from attending to each other.
    """
    if not 0 < shift < window:
        raise ShapeError(f"shift {shift} must lie strictly inside the window {window}")
    b = x.shape[0]
    padded, (h, w) = pad_to_multiple(x, window, window)
    hp, wp = padded.shape[2], padded.shape[3]
    rolled = cyclic_shift(padded, -shift, -shift)
    tokens = window_partition(rolled, window)
    mask = build_shift_mask(hp, wp, window, shift)
    tokens = mhsa(tokens, p, mask=mask)
    out = window_reverse(tokens, window, b, hp, wp)
    out = cyclic_shift(out, shift, shift)
    if (hp, wp) != (h, w):
        out = ag.crop_br(out, h, w)
    return out


def grid_msa(x: Tensor, p: MhsaParams, stride: int) -> Tensor:
    """Dilated attention: tokens a fixed stride apart attend as one group.

    stride 1 degenerates to global attention over the whole map. The group
    side after padding must stay within the bias table's reach.
    """
    if stride < 1:
        raise ShapeError(f"stride must be positive, got {stride}")
    b = x.shape[0]
    padded, (h, w) = pad_to_multiple(x, stride, stride)
    hp, wp = padded.shape[2], padded.shape[3]
    gh, gw = hp // stride, wp // stride
    tokens = grid_partition(padded, stride)
    tokens = mhsa(tokens, p, win_shape=(gh, gw))
    out = grid_reverse(tokens, stride, b, hp, wp)
    if (hp, wp) != (h, w):
        out = ag.crop_br(out, h, w)
    return out


def channel_attention(x: Tensor, p: ChannelAttnParams) -> Tensor:
    """Squeeze-and-excite gate: rescale channels by a learned global statistic."""
    pooled = ag.global_avg_pool(x)
    gate = ag.conv2d(pooled, p.squeeze_weight, p.squeeze_bias)
    gate = ag.relu(gate)
    gate = ag.conv2d(gate, p.excite_weight, p.excite_bias)
    gate = ag.sigmoid(gate)
    return ag.mul(x, gate)
