#!/usr/bin/env python3
"""The evaluation protocol, from raw pixels to a scored results table.

Scoring an upscaler on a folder of high-resolution images means: trim each
image so the scale divides it, shrink it bicubically to make the input,
run the upscaler, quantize to 8 bits, drop a border of twice the scale,
and compare with PSNR and SSIM. This script walks those stages one at a
time on synthetic images, using plain bicubic interpolation as the model,
then prints the same table the command line tool produces.
"""

import math
import tempfile
from pathlib import Path

import numpy as np

from haat.imaging import (
    ImageBuffer,
    bicubic_resize,
    bicubic_upscaler,
    crop_border,
    modcrop,
    quantize_unit,
    resize_matrix,
    save_image,
    to_unit_tensor,
)
from haat.metrics import evaluate_folder, psnr, ssim


def banner(text):
    print(f"\n=== {text} ===")


def textured(seed, h, w):
    yy, xx = np.meshgrid(np.arange(h) / h, np.arange(w) / w, indexing="ij")
    rng = np.random.default_rng(seed)
    chans = [0.5 + 0.3 * np.sin(2 * np.pi * (fy * yy + fx * xx))
             for fy, fx in ((1.0, 0.6), (0.6, 1.3), (1.7, 0.9))]
    unit = np.clip(np.stack(chans) + rng.uniform(-0.02, 0.02, (3, h, w)), 0.0, 1.0)
    return ImageBuffer.from_array(quantize_unit(unit.transpose(1, 2, 0)))


banner("the resampling kernel conserves brightness")
m = resize_matrix(16, 7)
print("16 -> 7 weight matrix rows sum to:",
      np.round(m.sum(axis=1), 12).tolist()[:4], "...")

banner("PSNR and SSIM have known fixed points")
img = textured(0, 24, 24).samples
print(f"identical images : psnr {psnr(img, img)}  ssim {ssim(img, img)}")
off = np.clip(img.astype(np.int16) + 1, 0, 255).astype(np.uint8)
print(f"every sample off by one: psnr {psnr(img, off):.4f} dB (closed form 48.1308)")

banner("stages of the protocol, on one 37x29 image")
hr = textured(1, 37, 29)
hr = modcrop(hr, 2)
print("after modcrop to a multiple of the scale:", f"{hr.height}x{hr.width}")
lr = bicubic_resize(to_unit_tensor(hr), 0.5)
print("bicubic low-res input:", tuple(lr.shape))
sr = bicubic_upscaler(2)(lr)
print("upscaled back:", tuple(sr.shape))
sr8 = quantize_unit(sr.numpy()[0].transpose(1, 2, 0))
print("scored region after dropping the 4px border:",
      crop_border(sr8, 4).shape, "->", f"{psnr(crop_border(sr8, 4), crop_border(hr.samples, 4)):.2f} dB")

banner("the folder evaluator does all of that per image")
with tempfile.TemporaryDirectory() as tmp:
    folder = Path(tmp) / "hr"
    folder.mkdir()
    for name, seed, h, w in (("waves_a.png", 2, 40, 32), ("waves_b.png", 3, 33, 47)):
        save_image(textured(seed, h, w), str(folder / name))
    report = evaluate_folder(bicubic_upscaler(2), str(folder), scale=2)
    print(report.format_table())
    print("mean psnr", f"{report.mean_psnr:.2f}",
          "finite ssim values:", sum(1 for r in report.records if math.isfinite(r.ssim)))
