"""Composite blocks: transformer layers, dense residual groups, hybrid attention.

The block hierarchy, bottom up:

* STL: pre-norm transformer layer (window or shifted-window attention, GELU MLP)
* SDRCB: five STLs with dense channel concatenation and 1x1 transitions,
  closed by a scaled residual
* MAL: three spatial attention branches on channel slices plus a channel
  gate on the full width, merged and normalized
* HGAB: post-norm pairing of one MAL with an MLP
* RDG: a run of SDRCBs, one HGAB, a 3x3 convolution, and a residual
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .attention import (
    ChannelAttnParams,
    MhsaParams,
    build_channel_attention,
    build_mhsa,
    channel_attention,
    grid_msa,
    sw_msa,
    w_msa,
)
from .autograd import Tensor
from .errors import ConfigError
from .layout import from_tokens, to_tokens
from .params import ParamStore, trunc_normal, zeros

LEAKY_SLOPE = 0.2


@dataclass
class MlpParams:
    fc1_weight: Tensor
    fc1_bias: Tensor
    fc2_weight: Tensor
    fc2_bias: Tensor


@dataclass
class StlParams:
    norm1_gain: Tensor
    norm1_bias: Tensor
    attn: MhsaParams
    norm2_gain: Tensor
    norm2_bias: Tensor
    mlp: MlpParams
    shifted: bool


@dataclass
class SdrcbParams:
    stls: list[StlParams]
    trans_weights: list[Tensor]
    trans_biases: list[Tensor]
    alpha: float


@dataclass
class MalParams:
    grid_attn: MhsaParams
    win_attn: MhsaParams
    shift_attn: MhsaParams
    chan: ChannelAttnParams
    norm_gain: Tensor
    norm_bias: Tensor
    grid_size: int


@dataclass
class HgabParams:
    mal: MalParams
    norm1_gain: Tensor
    norm1_bias: Tensor
    mlp: MlpParams
    norm2_gain: Tensor
    norm2_bias: Tensor


@dataclass
class RdgParams:
    sdrcbs: list[SdrcbParams]
    hgab: HgabParams
    conv_weight: Tensor
    conv_bias: Tensor


# ---------------------------------------------------------------------------
# builders


def build_mlp(store: ParamStore, prefix: str, rng: np.random.Generator,
              channels: int, ratio: float) -> MlpParams:
    hidden = int(round(channels * ratio))
    return MlpParams(
        fc1_weight=store.add(f"{prefix}.fc1_weight", trunc_normal(rng, (channels, hidden))),
        fc1_bias=store.add(f"{prefix}.fc1_bias", zeros(hidden)),
        fc2_weight=store.add(f"{prefix}.fc2_weight", trunc_normal(rng, (hidden, channels))),
        fc2_bias=store.add(f"{prefix}.fc2_bias", zeros(channels)),
    )


def build_stl(store: ParamStore, prefix: str, rng: np.random.Generator,
              channels: int, head_dim: int, window: int, mlp_ratio: float,
              shifted: bool) -> StlParams:
    if channels % head_dim != 0:
        raise ConfigError(f"width {channels} is not a multiple of head_dim {head_dim}")
    return StlParams(
        norm1_gain=store.add(f"{prefix}.norm1_gain", np.ones(channels)),
        norm1_bias=store.add(f"{prefix}.norm1_bias", zeros(channels)),
        attn=build_mhsa(store, f"{prefix}.attn", rng, channels,
                        heads=channels // head_dim, table_side=window),
        norm2_gain=store.add(f"{prefix}.norm2_gain", np.ones(channels)),
        norm2_bias=store.add(f"{prefix}.norm2_bias", zeros(channels)),
        mlp=build_mlp(store, f"{prefix}.mlp", rng, channels, mlp_ratio),
        shifted=shifted,
    )


def sdrcb_widths(channels: int, growth: int) -> list[tuple[int, int]]:
    """(input width, transition output width) for the five dense stages."""
    return [
        (channels + j * growth, growth if j < 4 else channels)
        for j in range(5)
    ]


def build_sdrcb(store: ParamStore, prefix: str, rng: np.random.Generator,
                channels: int, growth: int, head_dim: int, window: int,
                mlp_ratio: float, alpha: float) -> SdrcbParams:
    stls, tws, tbs = [], [], []
    for j, (width_in, width_out) in enumerate(sdrcb_widths(channels, growth)):
        stls.append(build_stl(store, f"{prefix}.stl{j}", rng, width_in, head_dim,
                              window, mlp_ratio, shifted=j % 2 == 1))
        tws.append(store.add(f"{prefix}.trans{j}_weight",
                             trunc_normal(rng, (width_out, width_in, 1, 1))))
        tbs.append(store.add(f"{prefix}.trans{j}_bias", zeros(width_out)))
    return SdrcbParams(stls=stls, trans_weights=tws, trans_biases=tbs, alpha=alpha)


def build_mal(store: ParamStore, prefix: str, rng: np.random.Generator,
              channels: int, mal_heads: tuple[int, int, int], window: int,
              grid_size: int, squeeze: int) -> MalParams:
    if channels % 4 != 0:
        raise ConfigError(f"hybrid attention needs width divisible by 4, got {channels}")
    half, quarter = channels // 2, channels // 4
    grid_heads, win_heads, shift_heads = mal_heads
    return MalParams(
        grid_attn=build_mhsa(store, f"{prefix}.grid_attn", rng, half,
                             heads=grid_heads, table_side=grid_size),
        win_attn=build_mhsa(store, f"{prefix}.win_attn", rng, quarter,
                            heads=win_heads, table_side=window),
        shift_attn=build_mhsa(store, f"{prefix}.shift_attn", rng, quarter,
                              heads=shift_heads, table_side=window),
        chan=build_channel_attention(store, f"{prefix}.chan", rng, channels, squeeze),
        norm_gain=store.add(f"{prefix}.norm_gain", np.ones(channels)),
        norm_bias=store.add(f"{prefix}.norm_bias", zeros(channels)),
        grid_size=grid_size,
    )


def build_hgab(store: ParamStore, prefix: str, rng: np.random.Generator,
               channels: int, mal_heads: tuple[int, int, int], window: int,
               grid_size: int, squeeze: int, mlp_ratio: float) -> HgabParams:
    return HgabParams(
        mal=build_mal(store, f"{prefix}.mal", rng, channels, mal_heads, window,
                      grid_size, squeeze),
        norm1_gain=store.add(f"{prefix}.norm1_gain", np.ones(channels)),
        norm1_bias=store.add(f"{prefix}.norm1_bias", zeros(channels)),
        mlp=build_mlp(store, f"{prefix}.mlp", rng, channels, mlp_ratio),
        norm2_gain=store.add(f"{prefix}.norm2_gain", np.ones(channels)),
        norm2_bias=store.add(f"{prefix}.norm2_bias", zeros(channels)),
    )


def build_rdg(store: ParamStore, prefix: str, rng: np.random.Generator,
              channels: int, growth: int, head_dim: int, window: int,
              mlp_ratio: float, alpha: float, sdrcb_count: int,
              mal_heads: tuple[int, int, int], grid_size: int,
              squeeze: int) -> RdgParams:
    sdrcbs = [
        build_sdrcb(store, f"{prefix}.sdrcb{i}", rng, channels, growth,
                    head_dim, window, mlp_ratio, alpha)
        for i in range(sdrcb_count)
    ]
    return RdgParams(
        sdrcbs=sdrcbs,
        hgab=build_hgab(store, f"{prefix}.hgab", rng, channels, mal_heads,
                        window, grid_size, squeeze, mlp_ratio),
        conv_weight=store.add(f"{prefix}.conv_weight",
                              trunc_normal(rng, (channels, channels, 3, 3))),
        conv_bias=store.add(f"{prefix}.conv_bias", zeros(channels)),
    )


# ---------------------------------------------------------------------------
# forwards


def mlp_forward(tokens: Tensor, p: MlpParams) -> Tensor:
    """Two-layer token MLP with an exact-GELU in between."""
    h = ag.add(ag.matmul(tokens, p.fc1_weight), p.fc1_bias)
    h = ag.gelu(h)
    return ag.add(ag.matmul(h, p.fc2_weight), p.fc2_bias)


def stl_forward(x: Tensor, p: StlParams, window: int, shift: int = 0) -> Tensor:
    """Pre-norm transformer layer on an NCHW map.

    A zero shift means plain window attention; a positive one selects the
    shifted variant with that cyclic offset.
    """
    b, c, h, w = x.shape
    t = to_tokens(x)
    a = ag.layer_norm(t, p.norm1_gain, p.norm1_bias)
    amap = from_tokens(a, h, w)
    if shift:
        amap = sw_msa(amap, p.attn, window, shift)
    else:
        amap = w_msa(amap, p.attn, window)
    t = ag.add(t, to_tokens(amap))
    m = ag.layer_norm(t, p.norm2_gain, p.norm2_bias)
    t = ag.add(t, mlp_forward(m, p.mlp))
    return from_tokens(t, h, w)


def sdrcb_forward(z: Tensor, p: SdrcbParams, window: int) -> Tensor:
    """Dense residual run of five STLs.

    Stage j sees the input concatenated with all previous stage outputs,
    applies an STL at that accumulated width, then a 1x1 transition with a
    leaky rectifier. The final stage returns to the input width and joins
    the input through a scaled residual.
    """
    feats = [z]
    out = None
    for j in range(5):
        inp = feats[0] if len(feats) == 1 else ag.concat_channels(feats)
        stl = p.stls[j]
        y = stl_forward(inp, stl, window, window // 2 if stl.shifted else 0)
        y = ag.conv2d(y, p.trans_weights[j], p.trans_biases[j])
        y = ag.leaky_relu(y, LEAKY_SLOPE)
        if j < 4:
            feats.append(y)
        else:
            out = y
    return ag.add(z, ag.mul(out, p.alpha))


def derive_grid_stride(h: int, w: int, grid_size: int) -> int:
    """Smallest stride that keeps every dilated group within the bias table."""
    return max(math.ceil(h / grid_size), math.ceil(w / grid_size), 1)


def mal_forward(x: Tensor, p: MalParams, window: int) -> Tensor:
    """Hybrid attention: grid, window, and shifted-window branches on channel
    slices, a channel gate on the full width, then a normalized merge.

    The input splits into [C/2, C/4, C/4]; the first slice takes dilated
    grid attention, the others window and shifted-window attention. Branch
    outputs concatenate back to full width (window, shifted, grid order),
    add the gated input, and pass through a layer norm before the residual.
    """
    b, c, h, w = x.shape
    f_g, f_w1, f_w2 = ag.split_channels(x, [c // 2, c // 4, c // 4])
    stride = derive_grid_stride(h, w, p.grid_size)
    x_g = grid_msa(f_g, p.grid_attn, stride)
    x_w1 = w_msa(f_w1, p.win_attn, window)
    x_w2 = sw_msa(f_w2, p.shift_attn, window, window // 2)
    x_c = channel_attention(x, p.chan)
    merged = ag.add(ag.concat_channels([x_w1, x_w2, x_g]), x_c)
    t = ag.layer_norm(to_tokens(merged), p.norm_gain, p.norm_bias)
    return ag.add(from_tokens(t, h, w), x)


def hgab_forward(x: Tensor, p: HgabParams, window: int) -> Tensor:
    """Post-norm pairing of one hybrid attention layer with a token MLP."""
    b, c, h, w = x.shape
    m = mal_forward(x, p.mal, window)
    t = ag.layer_norm(to_tokens(m), p.norm1_gain, p.norm1_bias)
    f_m = ag.add(from_tokens(t, h, w), x)
    y = mlp_forward(to_tokens(f_m), p.mlp)
    y = ag.layer_norm(y, p.norm2_gain, p.norm2_bias)
    return ag.add(from_tokens(y, h, w), f_m)


def rdg_forward(x: Tensor, p: RdgParams, window: int) -> Tensor:
    """Residual dense group: SDRCB chain, one HGAB, a 3x3 fuse, and a skip."""
    y = x
    for sdrcb in p.sdrcbs:
        y = sdrcb_forward(y, sdrcb, window)
    y = hgab_forward(y, p.hgab, window)
    y = ag.conv2d(y, p.conv_weight, p.conv_bias, padding=1)
    return ag.add(x, y)
