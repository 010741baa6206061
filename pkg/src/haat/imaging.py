"""Image I/O, 8-bit conversion, bicubic resampling, and patch augmentation.

Images cross the API as :class:`ImageBuffer` (8-bit RGB, row-major) and
enter the network as unit-range NCHW tensors. Export back to 8 bits uses
round-half-away-from-zero with clamping; every quality metric downstream
is defined on these exported samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .autograd import Tensor, default_dtype
from .errors import ImageError, ShapeError

_UNSUPPORTED_DEPTH_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


@dataclass
class ImageBuffer:
    """8-bit RGB image; ``samples`` is a (height, width, 3) uint8 array."""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.shape != (self.height, self.width, 3):
            raise ShapeError(
                f"sample block {self.samples.shape} does not match "
                f"{self.height}x{self.width} RGB"
            )
        if self.samples.dtype != np.uint8:
            raise ShapeError(f"samples must be uint8, got {self.samples.dtype}")

    @classmethod
    def from_array(cls, samples: np.ndarray) -> "ImageBuffer":
        samples = np.ascontiguousarray(samples, dtype=np.uint8)
        return cls(width=samples.shape[1], height=samples.shape[0], samples=samples)


def load_image(path: str) -> ImageBuffer:
    """Read a PNG as 8-bit RGB; grayscale replicates, 16-bit depth is refused."""
    try:
        with Image.open(path) as img:
            if img.mode in _UNSUPPORTED_DEPTH_MODES:
                raise ImageError(f"{path}: unsupported bit depth (mode {img.mode})")
            if img.mode == "L":
                arr = np.asarray(img)
                arr = np.repeat(arr[:, :, None], 3, axis=2)
            else:
                arr = np.asarray(img.convert("RGB"))
    except ImageError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageError(f"{path}: cannot read image ({exc})") from exc
    return ImageBuffer.from_array(arr)


def save_image(buf: ImageBuffer, path: str) -> None:
    Image.fromarray(buf.samples, mode="RGB").save(path, format="PNG")


def to_unit_tensor(buf: ImageBuffer) -> Tensor:
    """(1, 3, H, W) tensor with samples divided by 255."""
    arr = buf.samples.astype(default_dtype()) / np.asarray(255.0, dtype=default_dtype())
    return Tensor(arr.transpose(2, 0, 1)[None])


def quantize_unit(values: np.ndarray) -> np.ndarray:
    """Unit-range floats -> uint8 via round-half-away-from-zero and clamp."""
    y = np.asarray(values, dtype=np.float64) * 255.0
    y = np.sign(y) * np.floor(np.abs(y) + 0.5)
    return np.clip(y, 0.0, 255.0).astype(np.uint8)


def from_unit_tensor(t: Tensor) -> ImageBuffer:
    """Export a (1, 3, H, W) unit-range tensor to an 8-bit image."""
    if t.ndim != 4 or t.shape[0] != 1 or t.shape[1] != 3:
        raise ShapeError(f"expected a (1, 3, H, W) tensor, got {t.shape}")
    return ImageBuffer.from_array(quantize_unit(t.data[0].transpose(1, 2, 0)))


# ---------------------------------------------------------------------------
# bicubic resampling


def cubic_kernel(t: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5 (interpolating at integers)."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = 1.5 * t3 - 2.5 * t2 + 1.0
    far = -0.5 * t3 + 2.5 * t2 - 4.0 * t + 2.0
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def resize_matrix(src_len: int, dst_len: int) -> np.ndarray:
    """(dst_len, src_len) row-stochastic weights for one-axis cubic resizing.

    Output sample i draws from source position (i + 0.5) * src/dst - 0.5.
    Downscaling stretches the kernel by the shrink factor (antialias);
    out-of-range taps fold onto the clamped edge sample, and each row is
    normalized to sum to one.
    """
    scale = dst_len / src_len
    stretch = max(1.0, 1.0 / scale)
    radius = 2.0 * stretch
    centers = (np.arange(dst_len) + 0.5) / scale - 0.5
    lo = np.floor(centers - radius).astype(np.int64) + 1
    taps = int(np.ceil(2 * radius)) + 1
    offsets = np.arange(taps)
    idx = lo[:, None] + offsets[None, :]
    weights = cubic_kernel((centers[:, None] - idx) / stretch)
    weights /= weights.sum(axis=1, keepdims=True)
    m = np.zeros((dst_len, src_len))
    np.add.at(m, (np.repeat(np.arange(dst_len), taps), np.clip(idx, 0, src_len - 1).reshape(-1)),
              weights.reshape(-1))
    return m


def bicubic_resize(x: Tensor, scale: float,
                   out_size: tuple[int, int] | None = None) -> Tensor:
    """Separable cubic resampling of a (B, C, H, W) tensor.

    ``scale`` < 1 downscales with antialiasing. ``out_size`` pins the exact
    output (H, W) when rounding would be ambiguous. Not differentiable:
    this is data preparation, not part of the model.
    """
    if x.ndim != 4:
        raise ShapeError(f"expected a 4-D tensor, got shape {x.shape}")
    b, c, h, w = x.shape
    if out_size is not None:
        oh, ow = out_size
    else:
        oh = max(1, int(round(h * scale)))
        ow = max(1, int(round(w * scale)))
    mh = resize_matrix(h, oh)
    mw = resize_matrix(w, ow)
    data = x.data.astype(np.float64, copy=False)
    out = np.einsum("ds,bcsw->bcdw", mh, data)
    out = np.einsum("ds,bchs->bchd", mw, out)
    return Tensor(out.astype(x.dtype))


def bicubic_upscaler(scale: int):
    """A plain-bicubic 'model': callable with the network forward contract."""
    def run(x: Tensor) -> Tensor:
        return bicubic_resize(x, float(scale))
    return run


# ---------------------------------------------------------------------------
# patch handling


def dihedral_transform(x: Tensor, k: int) -> Tensor:
    """Apply element k (0..7) of the square's symmetry group to an NCHW tensor.

    k = 4*flip + quarter-turns; element 0 is the identity. Rotations of a
    non-square map would change its shape, so those are refused.
    """
    if not 0 <= k < 8:
        raise ShapeError(f"dihedral element index must be 0..7, got {k}")
    flip, rot = divmod(k, 4)
    if rot % 2 == 1 and x.shape[-2] != x.shape[-1]:
        raise ShapeError(f"cannot rotate a non-square {x.shape[-2]}x{x.shape[-1]} patch")
    data = x.data
    if flip:
        data = data[..., :, ::-1]
    if rot:
        data = np.rot90(data, rot, axes=(-2, -1))
    return Tensor(np.ascontiguousarray(data))


def augment(hr: Tensor, rng: np.random.Generator) -> Tensor:
    """Uniformly random flip/rotation of a square patch."""
    if hr.shape[-2] != hr.shape[-1]:
        raise ShapeError(f"augmentation needs a square patch, got {hr.shape}")
    return dihedral_transform(hr, int(rng.integers(8)))


def crop_border(x, pixels: int):
    """Symmetric crop of ``pixels`` from every spatial edge.

    Accepts an NCHW tensor or an (H, W) / (H, W, C) sample array.
    """
    if pixels < 0:
        raise ShapeError(f"crop size must be non-negative, got {pixels}")
    if isinstance(x, Tensor):
        h, w = x.shape[-2], x.shape[-1]
    elif x.ndim == 3 or x.ndim == 2:
        h, w = x.shape[0], x.shape[1]
    else:
        raise ShapeError(f"cannot border-crop an array of shape {x.shape}")
    if pixels == 0:
        return x
    if 2 * pixels >= min(h, w):
        raise ShapeError(f"cannot crop {pixels} from every side of a {h}x{w} image")
    if isinstance(x, Tensor):
        return Tensor(np.ascontiguousarray(x.data[..., pixels:-pixels, pixels:-pixels]))
    return np.ascontiguousarray(x[pixels:h - pixels, pixels:w - pixels])


def modcrop(buf: ImageBuffer, scale: int) -> ImageBuffer:
    """Trim bottom/right so both dimensions are multiples of ``scale``."""
    h = buf.height - buf.height % scale
    w = buf.width - buf.width % scale
    if h < scale or w < scale:
        raise ShapeError(f"{buf.height}x{buf.width} image too small for scale {scale}")
    if (h, w) == (buf.height, buf.width):
        return buf
    return ImageBuffer.from_array(buf.samples[:h, :w])
