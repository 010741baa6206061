"""Quality metrics and the dataset evaluation protocol.

PSNR and SSIM are defined on exported 8-bit samples (the values a saved
PNG would hold), matching how super-resolution results are convention-
ally scored. Folder evaluation degrades each ground-truth image by
bicubic downscaling, runs the model, exports, crops the protocol border,
and scores.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDatasetError, ShapeError
from .imaging import (
    ImageBuffer,
    bicubic_resize,
    crop_border,
    from_unit_tensor,
    load_image,
    modcrop,
    to_unit_tensor,
)

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_K1, _K2, _L = 0.01, 0.03, 255.0


def _as_samples(x) -> np.ndarray:
    if isinstance(x, ImageBuffer):
        x = x.samples
    return np.asarray(x, dtype=np.float64)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB on the 8-bit sample scale.

    Accepts image buffers or arrays of any matching shape; all channels
    enter the mean-squared error. Identical inputs give +infinity.
    """
    av, bv = _as_samples(a), _as_samples(b)
    if av.shape != bv.shape:
        raise ShapeError(f"cannot compare shapes {av.shape} and {bv.shape}")
    mse = np.mean((av - bv) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable valid-region filtering along both spatial axes
    win = np.lib.stride_tricks.sliding_window_view(img, len(kernel), axis=0)
    img = win @ kernel
    win = np.lib.stride_tricks.sliding_window_view(img, len(kernel), axis=1)
    return win @ kernel


def ssim(a, b) -> float:
    """Single-scale structural similarity on 8-bit samples.

    Gaussian 11x11 window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255;
    statistics over the valid filter region, averaged over positions and
    channels. Inputs smaller than the window are refused.
    """
    av, bv = _as_samples(a), _as_samples(b)
    if av.shape != bv.shape:
        raise ShapeError(f"cannot compare shapes {av.shape} and {bv.shape}")
    if av.ndim == 2:
        av, bv = av[:, :, None], bv[:, :, None]
    if av.ndim != 3:
        raise ShapeError(f"ssim expects (H, W) or (H, W, C) inputs, got {av.shape}")
    h, w, channels = av.shape
    if h < _SSIM_WINDOW or w < _SSIM_WINDOW:
        raise ShapeError(
            f"{h}x{w} image is smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} ssim window"
        )
    kernel = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = (_K1 * _L) ** 2
    c2 = (_K2 * _L) ** 2
    scores = []
    for ch in range(channels):
        x, y = av[:, :, ch], bv[:, :, ch]
        mu_x = _filter_valid(x, kernel)
        mu_y = _filter_valid(y, kernel)
        var_x = _filter_valid(x * x, kernel) - mu_x * mu_x
        var_y = _filter_valid(y * y, kernel) - mu_y * mu_y
        cov = _filter_valid(x * y, kernel) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


def rgb_to_y(samples: np.ndarray) -> np.ndarray:
    """BT.601 luma on the 8-bit scale: 16 + 65.481 R + 128.553 G + 24.966 B.

    R, G, B are the samples divided by 255; the result spans [16, 235].
    """
    rgb = np.asarray(samples, dtype=np.float64) / 255.0
    return 16.0 + rgb[..., 0] * 65.481 + rgb[..., 1] * 128.553 + rgb[..., 2] * 24.966


@dataclass
class EvalRecord:
    name: str
    psnr_db: float
    ssim: float


@dataclass
class EvalReport:
    """Per-image scores plus finite-value aggregates for one dataset run."""

    records: list[EvalRecord]
    scale: int
    border: int
    warnings: list[str] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        vals = [r.psnr_db for r in self.records if math.isfinite(r.psnr_db)]
        return float(np.mean(np.asarray(vals, dtype=np.float64))) if vals else math.nan

    @property
    def mean_ssim(self) -> float:
        vals = [r.ssim for r in self.records if math.isfinite(r.ssim)]
        return float(np.mean(np.asarray(vals, dtype=np.float64))) if vals else math.nan

    def to_csv(self) -> str:
        lines = ["name,psnr_db,ssim"]
        for r in self.records:
            lines.append(f"{r.name},{_fmt(r.psnr_db)},{_fmt(r.ssim)}")
        lines.append(f"AGGREGATE,{_fmt(self.mean_psnr)},{_fmt(self.mean_ssim)}")
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        """Plain-text table with the conventional PSNR / SSIM column pair."""
        name_w = max([len(r.name) for r in self.records] + [len("AGGREGATE")])
        lines = [f"{'image':<{name_w}}  {'PSNR':>8}  {'SSIM':>7}"]
        for r in self.records:
            lines.append(f"{r.name:<{name_w}}  {_fmt_psnr(r.psnr_db):>8}  {_fmt_ssim(r.ssim):>7}")
        lines.append(
            f"{'AGGREGATE':<{name_w}}  {_fmt_psnr(self.mean_psnr):>8}  {_fmt_ssim(self.mean_ssim):>7}"
        )
        return "\n".join(lines)


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.6f}"


def _fmt_psnr(v: float) -> str:
    return "inf" if math.isinf(v) else ("nan" if math.isnan(v) else f"{v:.2f}")


def _fmt_ssim(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.4f}"


def _evaluate_one(model, path: str, scale: int, border: int,
                  y_channel: bool) -> tuple[EvalRecord, list[str]]:
    warnings = []
    name = os.path.basename(path)
    hr = modcrop(load_image(path), scale)
    lr = bicubic_resize(to_unit_tensor(hr), 1.0 / scale,
                        out_size=(hr.height // scale, hr.width // scale))
    sr = from_unit_tensor(model(lr))
    hr_s = crop_border(hr.samples, border)
    sr_s = crop_border(sr.samples, border)
    if y_channel:
        hr_s, sr_s = rgb_to_y(hr_s), rgb_to_y(sr_s)
    p = psnr(hr_s, sr_s)
    if math.isinf(p):
        warnings.append(f"{name}: images identical, psnr infinite (left out of the mean)")
    try:
        s = ssim(hr_s, sr_s)
    except ShapeError as exc:
        warnings.append(f"{name}: ssim skipped ({exc})")
        s = math.nan
    return EvalRecord(name=name, psnr_db=p, ssim=s), warnings


def evaluate_folder(model, hr_dir: str, scale: int, y_channel: bool = False,
                    jobs: int = 1) -> EvalReport:
    """Score a model against every PNG in a directory of ground-truth images.

    Per image: trim to a multiple of the scale, bicubic-downscale, run the
    model, export to 8 bits, crop a 2x-scale border from both sides of the
    comparison, then PSNR and SSIM (RGB by default, BT.601 luma when
    ``y_channel`` is set). ``model`` is any callable taking and returning a
    unit-range NCHW tensor. Records are ordered by filename; workers only
    ever merge, so the report is deterministic for any ``jobs``.
    """
    names = sorted(n for n in os.listdir(hr_dir) if n.lower().endswith(".png"))
    if not names:
        raise EmptyDatasetError(f"no PNG images found in {hr_dir}")
    border = 2 * scale
    paths = [os.path.join(hr_dir, n) for n in names]
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda p: _evaluate_one(model, p, scale, border, y_channel), paths
            ))
    else:
        results = [_evaluate_one(model, p, scale, border, y_channel) for p in paths]
    records = [r for r, _ in results]
    warnings = [w for _, ws in results for w in ws]
    return EvalReport(records=records, scale=scale, border=border, warnings=warnings)
