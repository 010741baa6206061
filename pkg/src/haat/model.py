"""Network assembly: configuration, presets, construction, and the forward pass.

The network is a shallow 3x3 convolution, a body of residual dense groups
with a trailing 3x3 convolution joined by a global residual, and a
sub-pixel reconstruction head that upsamples to the target scale.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .blocks import RdgParams, build_rdg, rdg_forward, sdrcb_widths
from .errors import ConfigError, ShapeError
from .params import ParamStore, trunc_normal, zeros

SUPPORTED_SCALES = (2, 3, 4)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters of one network instance.

    ``stl_growth`` is the dense-stage width increment inside each SDRCB;
    ``head_dim`` fixes per-head width on the SDRCB path (head count grows
    with stage width); ``mal_heads`` gives the (grid, window, shifted)
    branch head counts of the hybrid attention layer.
    """

    channels: int = 16
    num_rdg: int = 2
    sdrcbs_per_rdg: int = 2
    stl_growth: int = 8
    window_size: int = 4
    grid_size: int = 4
    head_dim: int = 4
    mal_heads: tuple[int, int, int] = (2, 1, 1)
    squeeze_factor: int = 8
    mlp_ratio: float = 2.0
    alpha: float = 0.2
    scale: int = 2
    img_channels: int = 3

    def validate(self) -> "ModelConfig":
        """Check every invariant; raises :class:`ConfigError` naming the field."""
        c = self.channels
        if c < 4 or c % 4 != 0:
            raise ConfigError(f"channels must be a positive multiple of 4, got {c}")
        for name in ("num_rdg", "sdrcbs_per_rdg", "stl_growth", "grid_size", "img_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.window_size < 2 or self.window_size % 2 != 0:
            raise ConfigError(f"window_size must be even and >= 2, got {self.window_size}")
        if self.head_dim < 1:
            raise ConfigError(f"head_dim must be >= 1, got {self.head_dim}")
        for width, _ in sdrcb_widths(c, self.stl_growth):
            if width % self.head_dim != 0:
                raise ConfigError(
                    f"head_dim {self.head_dim} does not divide dense stage width {width}"
                )
        if len(self.mal_heads) != 3 or any(h < 1 for h in self.mal_heads):
            raise ConfigError(f"mal_heads needs three positive counts, got {self.mal_heads}")
        for branch_width, heads, label in (
            (c // 2, self.mal_heads[0], "grid"),
            (c // 4, self.mal_heads[1], "window"),
            (c // 4, self.mal_heads[2], "shifted-window"),
        ):
            if branch_width % heads != 0:
                raise ConfigError(
                    f"mal_heads: {heads} heads do not divide the {label} branch width {branch_width}"
                )
        if self.squeeze_factor < 1 or c // self.squeeze_factor < 1:
            raise ConfigError(
                f"squeeze_factor {self.squeeze_factor} leaves no channels out of {c}"
            )
        if not self.mlp_ratio > 0:
            raise ConfigError(f"mlp_ratio must be positive, got {self.mlp_ratio}")
        if not math.isfinite(self.alpha):
            raise ConfigError(f"alpha must be finite, got {self.alpha}")
        if self.scale not in SUPPORTED_SCALES:
            raise ConfigError(f"scale must be one of {SUPPORTED_SCALES}, got {self.scale}")
        return self

    def fingerprint(self) -> str:
        """Short stable digest of all fields, for reproducibility records."""
        text = ",".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def toy_config(**overrides) -> ModelConfig:
    """Desk-scale preset: runs a forward pass in well under a second."""
    return replace(ModelConfig(), **overrides).validate()


def full_config(**overrides) -> ModelConfig:
    """Publication-scale preset (180 channels, window 16, six groups of six)."""
    base = ModelConfig(
        channels=180,
        num_rdg=6,
        sdrcbs_per_rdg=6,
        stl_growth=90,
        window_size=16,
        grid_size=16,
        head_dim=30,
        mal_heads=(3, 3, 3),
        squeeze_factor=16,
        mlp_ratio=2.0,
        alpha=0.2,
        scale=4,
        img_channels=3,
    )
    return replace(base, **overrides).validate()


_INT_KEYS = {
    "channels", "num_rdg", "sdrcbs_per_rdg", "stl_growth", "window_size",
    "grid_size", "head_dim", "squeeze_factor", "scale", "img_channels",
}
_FLOAT_KEYS = {"mlp_ratio", "alpha"}


def parse_config_file(path: str) -> ModelConfig:
    """Read a UTF-8 ``key = value`` file into a config.

    Keys mirror the :class:`ModelConfig` fields; ``mal_heads`` takes a
    comma-separated triple. ``#`` starts a comment. Unset keys keep the
    desk-scale defaults.
    """
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key in _INT_KEYS:
                overrides[key] = int(value)
            elif key in _FLOAT_KEYS:
                overrides[key] = float(value)
            elif key == "mal_heads":
                parts = tuple(int(v) for v in value.split(","))
                overrides[key] = parts
            else:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    return replace(ModelConfig(), **overrides).validate()


def width_ledger(cfg: ModelConfig) -> dict:
    """Closed-form layer widths implied by the config, for structural audits."""
    c, g = cfg.channels, cfg.stl_growth
    stages = sdrcb_widths(c, g)
    return {
        "stl_widths": [w for w, _ in stages],
        "transition_outs": [o for _, o in stages],
        "stl_heads": [w // cfg.head_dim for w, _ in stages],
        "mal_branch_widths": (c // 2, c // 4, c // 4),
        "squeeze_mid": c // cfg.squeeze_factor,
        "mlp_hidden": int(round(c * cfg.mlp_ratio)),
    }


@dataclass
class Haat:
    """A built network: configuration plus every parameter, ready to run."""

    cfg: ModelConfig
    shallow_weight: Tensor
    shallow_bias: Tensor
    rdgs: list[RdgParams]
    body_conv_weight: Tensor
    body_conv_bias: Tensor
    up_stages: list[tuple[Tensor, Tensor, int]] = field(default_factory=list)
    final_weight: Tensor = None
    final_bias: Tensor = None

    def forward(self, x: Tensor) -> Tensor:
        """Upscale a unit-range image batch (B, img_channels, H, W) by the scale.

        Output values are unclamped; clamping belongs to image export.
        """
        if x.ndim != 4:
            raise ShapeError(f"expected a 4-D image batch, got shape {x.shape}")
        b, c, h, w = x.shape
        if c != self.cfg.img_channels:
            raise ShapeError(f"expected {self.cfg.img_channels} channels, got {c}")
        if h < 1 or w < 1:
            raise ShapeError(f"spatial size must be positive, got {h}x{w}")
        shallow = ag.conv2d(x, self.shallow_weight, self.shallow_bias, padding=1)
        y = shallow
        for rdg in self.rdgs:
            y = rdg_forward(y, rdg, self.cfg.window_size)
        y = ag.conv2d(y, self.body_conv_weight, self.body_conv_bias, padding=1)
        feats = ag.add(shallow, y)
        return self.reconstruct(feats)

    __call__ = forward

    def reconstruct(self, features: Tensor) -> Tensor:
        """Sub-pixel head: conv + pixel shuffle per stage, then a conv to RGB."""
        y = features
        for weight, bias, r in self.up_stages:
            y = ag.conv2d(y, weight, bias, padding=1)
            y = ag.pixel_shuffle(y, r)
        return ag.conv2d(y, self.final_weight, self.final_bias, padding=1)


def _upsample_plan(scale: int) -> list[int]:
    if scale == 2:
        return [2]
    if scale == 3:
        return [3]
    if scale == 4:
        return [2, 2]
    raise ConfigError(f"scale must be one of {SUPPORTED_SCALES}, got {scale}")


def build_model(cfg: ModelConfig, seed: int) -> tuple[Haat, ParamStore]:
    """Construct the network with seeded initialization.

    Same config and seed always produce bit-identical parameters.
    Projection and convolution weights draw from a truncated normal
    (std 0.02, resampled beyond two sigma); biases and relative-position
    tables start at zero, norm gains at one.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    store = ParamStore()
    c = cfg.channels

    shallow_w = store.add("shallow.weight", trunc_normal(rng, (c, cfg.img_channels, 3, 3)))
    shallow_b = store.add("shallow.bias", zeros(c))
    rdgs = [
        build_rdg(store, f"body.rdg{i}", rng, c, cfg.stl_growth, cfg.head_dim,
                  cfg.window_size, cfg.mlp_ratio, cfg.alpha, cfg.sdrcbs_per_rdg,
                  cfg.mal_heads, cfg.grid_size, cfg.squeeze_factor)
        for i in range(cfg.num_rdg)
    ]
    body_w = store.add("body.conv_weight", trunc_normal(rng, (c, c, 3, 3)))
    body_b = store.add("body.conv_bias", zeros(c))

    up_stages = []
    for k, r in enumerate(_upsample_plan(cfg.scale)):
        w = store.add(f"up.stage{k}_weight", trunc_normal(rng, (c * r * r, c, 3, 3)))
        b = store.add(f"up.stage{k}_bias", zeros(c * r * r))
        up_stages.append((w, b, r))
    final_w = store.add("up.final_weight", trunc_normal(rng, (cfg.img_channels, c, 3, 3)))
    final_b = store.add("up.final_bias", zeros(cfg.img_channels))

    model = Haat(
        cfg=cfg,
        shallow_weight=shallow_w,
        shallow_bias=shallow_b,
        rdgs=rdgs,
        body_conv_weight=body_w,
        body_conv_bias=body_b,
        up_stages=up_stages,
        final_weight=final_w,
        final_bias=final_b,
    )
    return model, store
