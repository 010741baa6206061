#!/usr/bin/env python3
"""How the attention variants carve an image into token groups.

Window attention boxes the map into tiles, shifted-window attention rolls
the map first and masks pairs that wrapped around an edge, and grid
attention takes every stride-th pixel so far-apart positions can talk.
The final section confirms each fused implementation against a slow
per-query oracle that knows nothing about the layout machinery.
"""

import numpy as np

from haat.attention import build_mhsa, grid_msa, w_msa
from haat.autograd import Tensor, precision
from haat.layout import (
    build_shift_mask,
    cyclic_shift,
    grid_partition,
    shift_region_labels,
    window_partition,
)
from haat.params import ParamStore
from haat.verification import attention_oracle_diff


def banner(text):
    print(f"\n=== {text} ===")


banner("window partition groups neighboring pixels")
ids = Tensor(np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4))
print("pixel ids:\n", ids.numpy()[0, 0].astype(int))
tokens = window_partition(ids, 2)
for g in range(tokens.shape[0]):
    print(f"window {g}: pixels {tokens.numpy()[g, :, 0].astype(int).tolist()}")

banner("grid partition groups every stride-th pixel instead")
tokens = grid_partition(ids, 2)
for g in range(tokens.shape[0]):
    print(f"group {g}: pixels {tokens.numpy()[g, :, 0].astype(int).tolist()}")

banner("the cyclic shift moves window borders")
print("rolled by (-1, -1):\n", cyclic_shift(ids, -1, -1).numpy()[0, 0].astype(int))

banner("after the roll, wrapped pixels must not attend across the seam")
labels = shift_region_labels(8, 8, 4, 2)
print("region label per pixel (same label = may interact):\n", labels)
mask = build_shift_mask(8, 8, 4, 2)
blocked = int((mask < 0).sum())
print(f"mask shape {mask.shape}, blocked query-key pairs: {blocked}")

banner("fused kernels vs a per-query oracle (64-bit, max abs diff)")
for kind, label in (("w", "window"), ("sw", "shifted window"), ("grid", "grid")):
    worst = max(attention_oracle_diff(kind, seed) for seed in range(5))
    print(f"{label:15s} {worst:.2e}")

banner("stride 1 grid attention is one global group")
with precision("float64"):
    store = ParamStore()
    p = build_mhsa(store, "attn", np.random.default_rng(0), 8, 2, table_side=8)
    x = Tensor(np.random.default_rng(1).normal(size=(1, 8, 6, 6)))
    dense = grid_msa(x, p, 1)
    windowed = w_msa(x, p, 6)  # one window covering everything
    print("grid(stride 1) vs one big window:",
          f"{np.abs(dense.numpy() - windowed.numpy()).max():.2e}")
