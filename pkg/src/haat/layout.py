"""Spatial bookkeeping for windowed and dilated attention.

Feature maps travel as NCHW tensors; attention consumes flat token groups
of shape (groups, tokens, channels). Everything here is either a
differentiable rearrangement built from autograd primitives or a pure
index computation (masks, relative-position index maps) that carries no
gradient.
"""

from __future__ import annotations

import functools

import numpy as np

from .autograd import Tensor, default_dtype, pad_reflect_br, permute, reshape, roll2d
from .errors import ShapeError

MASK_OFF = -100.0


def to_tokens(x: Tensor) -> Tensor:
    """(B, C, H, W) -> (B, H*W, C) with row-major spatial order."""
    b, c, h, w = x.shape
    return permute(reshape(x, (b, c, h * w)), (0, 2, 1))


def from_tokens(t: Tensor, h: int, w: int) -> Tensor:
    """(B, H*W, C) -> (B, C, H, W), inverse of :func:`to_tokens`."""
    b, n, c = t.shape
    if n != h * w:
        raise ShapeError(f"{n} tokens cannot fill a {h}x{w} map")
    return reshape(permute(t, (0, 2, 1)), (b, c, h, w))


def pad_to_multiple(x: Tensor, mult_h: int, mult_w: int | None = None) -> tuple[Tensor, tuple[int, int]]:
    """Reflect-pad bottom/right so spatial dims divide evenly; returns original size."""
    if mult_w is None:
        mult_w = mult_h
    b, c, h, w = x.shape
    ph = (-h) % mult_h
    pw = (-w) % mult_w
    if ph == 0 and pw == 0:
        return x, (h, w)
    return pad_reflect_br(x, ph, pw), (h, w)


def window_partition(x: Tensor, window: int) -> Tensor:
    """(B, C, H, W) -> (B*nWin, window^2, C); windows tile in raster order."""
    b, c, h, w = x.shape
    if h % window != 0 or w % window != 0:
        raise ShapeError(f"{h}x{w} map does not tile into {window}x{window} windows")
    nh, nw = h // window, w // window
    t = reshape(x, (b, c, nh, window, nw, window))
    t = permute(t, (0, 2, 4, 3, 5, 1))
    return reshape(t, (b * nh * nw, window * window, c))


def window_reverse(tokens: Tensor, window: int, b: int, h: int, w: int) -> Tensor:
    """Inverse of :func:`window_partition`."""
    nh, nw = h // window, w // window
    c = tokens.shape[-1]
    if tokens.shape[0] != b * nh * nw or tokens.shape[1] != window * window:
        raise ShapeError(
            f"token block {tokens.shape} does not reassemble into {b}x{c}x{h}x{w}"
        )
    t = reshape(tokens, (b, nh, nw, window, window, c))
    t = permute(t, (0, 5, 1, 3, 2, 4))
    return reshape(t, (b, c, h, w))


def grid_partition(x: Tensor, stride: int) -> Tensor:
    """Group pixels a fixed stride apart: (B, C, H, W) -> (B*stride^2, H/s * W/s, C).

    Group (u, v) holds pixels (u + a*stride, v + b*stride) in (a, b) raster
    order, so each group spans the whole map at dilation ``stride``.
    """
    b, c, h, w = x.shape
    if h % stride != 0 or w % stride != 0:
        raise ShapeError(f"{h}x{w} map is not divisible by stride {stride}")
    gh, gw = h // stride, w // stride
    t = reshape(x, (b, c, gh, stride, gw, stride))
    t = permute(t, (0, 3, 5, 2, 4, 1))
    return reshape(t, (b * stride * stride, gh * gw, c))


def grid_reverse(tokens: Tensor, stride: int, b: int, h: int, w: int) -> Tensor:
    """Inverse of :func:`grid_partition`."""
    gh, gw = h // stride, w // stride
    c = tokens.shape[-1]
    if tokens.shape[0] != b * stride * stride or tokens.shape[1] != gh * gw:
        raise ShapeError(
            f"token block {tokens.shape} does not reassemble into {b}x{c}x{h}x{w}"
        )
    t = reshape(tokens, (b, stride, stride, gh, gw, c))
    t = permute(t, (0, 5, 3, 1, 4, 2))
    return reshape(t, (b, c, h, w))


def cyclic_shift(x: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal shift of the spatial axes; (dy, dx) = (-1, -1) moves content up-left."""
    return roll2d(x, dy, dx)


def shift_region_labels(h: int, w: int, window: int, shift: int) -> np.ndarray:
    """Label each pixel of the shifted canvas by its pre-shift region.

    After shifting up-left by ``shift``, pixels whose labels differ were not
    spatial neighbours originally and must not attend to each other.
    """
    labels = np.zeros((h, w), dtype=np.int64)
    spans = (slice(0, h - window), slice(h - window, h - shift), slice(h - shift, None))
    spans_w = (slice(0, w - window), slice(w - window, w - shift), slice(w - shift, None))
    tag = 0
    for hs in spans:
        for ws in spans_w:
            labels[hs, ws] = tag
            tag += 1
    return labels


def build_shift_mask(h: int, w: int, window: int, shift: int) -> np.ndarray:
    """Additive attention mask (nWin, T, T) for shifted windows: 0 keep, -100 drop."""
    if not 0 < shift < window:
        raise ShapeError(f"shift {shift} must lie strictly inside the window {window}")
    if h % window != 0 or w % window != 0:
        raise ShapeError(f"{h}x{w} map does not tile into {window}x{window} windows")
    labels = shift_region_labels(h, w, window, shift)
    nh, nw = h // window, w // window
    t = window * window
    wins = (
        labels.reshape(nh, window, nw, window)
        .transpose(0, 2, 1, 3)
        .reshape(nh * nw, t)
    )
    diff = wins[:, :, None] != wins[:, None, :]
    return np.where(diff, MASK_OFF, 0.0).astype(default_dtype())


def token_coords(side_h: int, side_w: int) -> np.ndarray:
    """(T, 2) integer (row, col) coordinates of a raster-ordered token group."""
    rows, cols = np.meshgrid(np.arange(side_h), np.arange(side_w), indexing="ij")
    return np.stack([rows.reshape(-1), cols.reshape(-1)], axis=1)


@functools.lru_cache(maxsize=64)
def relative_index_map(side_h: int, side_w: int, table_side: int) -> np.ndarray:
    """(T, T) row indices into a relative-position bias table.

    The table has (2*table_side - 1)^2 rows covering every (dy, dx) offset
    pair with \\|dy\\|, \\|dx\\| < table_side; entry (p, q) selects the row for
    query p minus key q. Cached per geometry (the map is read-only).
    """
    if side_h > table_side or side_w > table_side:
        raise ShapeError(
            f"group side {side_h}x{side_w} exceeds bias table reach {table_side}"
        )
    coords = token_coords(side_h, side_w)
    delta = coords[:, None, :] - coords[None, :, :]
    span = 2 * table_side - 1
    idx = (delta[..., 0] + table_side - 1) * span + (delta[..., 1] + table_side - 1)
    idx.setflags(write=False)
    return idx


def relative_table_rows(table_side: int) -> int:
    """Number of rows a bias table needs to cover groups up to ``table_side``."""
    return (2 * table_side - 1) ** 2
