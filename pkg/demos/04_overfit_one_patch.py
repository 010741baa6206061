#!/usr/bin/env python3
"""Overfit the desk-scale network on a single patch, then save and reload it.

One 16x16 patch is all the data: the low-resolution input is its bicubic
half-size version, the loss is mean absolute error against the original,
and a few hundred optimizer steps are plenty for the network to memorize
the mapping. Training twice from the same seed reproduces every byte,
and a weight file written mid-demo restores the exact trained state.
"""

import tempfile
from pathlib import Path

import numpy as np

from haat.model import toy_config
from haat.verification import default_training_patch, toy_overfit
from haat.weights import load_model, save_weights


def banner(text):
    print(f"\n=== {text} ===")


banner("the training patch is synthetic but structured")
patch = default_training_patch(seed=0)
print("shape", patch.shape, "range",
      f"[{patch.numpy().min():.3f}, {patch.numpy().max():.3f}]")

banner("120 optimizer steps on that one patch")
cfg = toy_config()
curve = toy_overfit(cfg, patch, steps=120, seed=0)
for step in range(0, 120, 20):
    print(f"step {step:4d}  L1 loss {curve.losses[step]:.4f}")
print(f"final      L1 loss {curve.losses[-1]:.4f}  "
      f"({curve.losses[-1] / curve.losses[0]:.1%} of the start)")

banner("same seed, same curve, same weights")
rerun = toy_overfit(cfg, patch, steps=120, seed=0)
same_losses = curve.losses == rerun.losses
first, second = curve.store.state_arrays(), rerun.store.state_arrays()
same_weights = all(np.array_equal(first[k], second[k]) for k in first)
print("losses identical:", same_losses, " weights bit-identical:", same_weights)

banner("weights survive a save/load roundtrip exactly")
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "trained.haatw"
    save_weights(curve.store, cfg, str(path))
    print(f"wrote {path.stat().st_size:,} bytes "
          f"(fingerprint {curve.config_fingerprint})")
    restored, _ = load_model(str(path))
    x = default_training_patch(seed=3)
    a = curve.model(x).numpy()
    b = restored(x).numpy()
    print("restored model output matches the live one:", np.array_equal(a, b))
