"""Window/grid partitioning, shift masks, relative-position index maps."""

import numpy as np
import pytest

from haat.autograd import Tensor
from haat.errors import ShapeError
from haat.layout import (
    MASK_OFF,
    build_shift_mask,
    cyclic_shift,
    from_tokens,
    grid_partition,
    grid_reverse,
    pad_to_multiple,
    relative_index_map,
    relative_table_rows,
    shift_region_labels,
    to_tokens,
    token_coords,
    window_partition,
    window_reverse,
)


def seq(*shape):
    return Tensor(np.arange(float(np.prod(shape))).reshape(shape))


# --- token layout ----------------------------------------------------------


def test_to_tokens_raster_order():
    x = seq(1, 2, 2, 2)
    t = to_tokens(x).numpy()
    assert t.shape == (1, 4, 2)
    # token 1 is pixel (0, 1): channel 0 holds 1.0, channel 1 holds 5.0
    assert np.array_equal(t[0, 1], [1.0, 5.0])


def test_token_roundtrip():
    x = seq(2, 3, 4, 5)
    back = from_tokens(to_tokens(x), 4, 5)
    assert np.array_equal(back.numpy(), x.numpy())


def test_from_tokens_count_mismatch():
    with pytest.raises(ShapeError):
        from_tokens(Tensor(np.zeros((1, 6, 2))), 2, 2)


def test_pad_to_multiple_noop_returns_same_tensor():
    x = seq(1, 1, 8, 8)
    padded, size = pad_to_multiple(x, 4)
    assert padded is x
    assert size == (8, 8)


def test_pad_to_multiple_pads_bottom_right():
    x = seq(1, 1, 5, 7)
    padded, size = pad_to_multiple(x, 4)
    assert padded.shape == (1, 1, 8, 8)
    assert size == (5, 7)
    assert np.array_equal(padded.numpy()[:, :, :5, :7], x.numpy())


# --- window partition ------------------------------------------------------


def test_window_partition_first_window_pixels():
    x = seq(1, 1, 4, 4)
    t = window_partition(x, 2).numpy()
    assert t.shape == (4, 4, 1)
    assert np.array_equal(t[0, :, 0], [0.0, 1.0, 4.0, 5.0])
    assert np.array_equal(t[1, :, 0], [2.0, 3.0, 6.0, 7.0])


def test_window_partition_rejects_nondivisible():
    with pytest.raises(ShapeError):
        window_partition(seq(1, 1, 6, 6), 4)


def test_window_roundtrip_rectangular():
    x = seq(2, 3, 8, 12)
    t = window_partition(x, 4)
    assert t.shape == (2 * 2 * 3, 16, 3)
    back = window_reverse(t, 4, 2, 8, 12)
    assert np.array_equal(back.numpy(), x.numpy())


def test_window_reverse_rejects_wrong_block():
    with pytest.raises(ShapeError):
        window_reverse(Tensor(np.zeros((3, 16, 2))), 4, 1, 8, 8)


# --- grid partition --------------------------------------------------------


def test_grid_partition_first_group_pixels():
    x = seq(1, 1, 4, 4)
    t = grid_partition(x, 2).numpy()
    assert t.shape == (4, 4, 1)
    assert np.array_equal(t[0, :, 0], [0.0, 2.0, 8.0, 10.0])
    assert np.array_equal(t[1, :, 0], [1.0, 3.0, 9.0, 11.0])


def test_grid_partition_rejects_nondivisible():
    with pytest.raises(ShapeError):
        grid_partition(seq(1, 1, 5, 4), 2)


def test_grid_roundtrip_rectangular():
    x = seq(1, 2, 6, 10)
    t = grid_partition(x, 2)
    assert t.shape == (4, 15, 2)
    back = grid_reverse(t, 2, 1, 6, 10)
    assert np.array_equal(back.numpy(), x.numpy())


def test_grid_groups_span_whole_map():
    # every group must touch every stride-aligned row and column
    x = seq(1, 1, 6, 6)
    t = grid_partition(x, 3).numpy()
    for g in range(9):
        rows = {int(v) // 6 for v in t[g, :, 0]}
        assert len(rows) == 2


# --- cyclic shift ----------------------------------------------------------


def test_cyclic_shift_two_by_two():
    x = seq(1, 1, 2, 2)  # [[a, b], [c, d]]
    out = cyclic_shift(x, -1, -1).numpy()[0, 0]
    assert np.array_equal(out, [[3.0, 2.0], [1.0, 0.0]])  # [[d, c], [b, a]]


def test_cyclic_shift_inverse():
    x = seq(1, 2, 5, 7)
    back = cyclic_shift(cyclic_shift(x, -2, -2), 2, 2)
    assert np.array_equal(back.numpy(), x.numpy())


# --- shift masks -----------------------------------------------------------


def orig_band(v, size, window, shift):
    # band of the pre-shift coordinate: wrapped edge, interior, boundary strip
    if v < shift:
        return 0
    if v < size - window + shift:
        return 1
    return 2


def oracle_allowed(h, w, window, shift):
    """(nWin, T, T) attend-permission via pre-shift coordinates only."""
    nh, nw = h // window, w // window
    t = window * window
    out = np.zeros((nh * nw, t, t), dtype=bool)
    for wy in range(nh):
        for wx in range(nw):
            regions = []
            for p in range(t):
                r = wy * window + p // window
                c = wx * window + p % window
                rr, cc = (r + shift) % h, (c + shift) % w
                regions.append(
                    (orig_band(rr, h, window, shift), orig_band(cc, w, window, shift))
                )
            for p in range(t):
                for q in range(t):
                    out[wy * nw + wx, p, q] = regions[p] == regions[q]
    return out


@pytest.mark.parametrize("h,w,window,shift", [(8, 8, 4, 2), (8, 8, 4, 1), (12, 8, 4, 2), (6, 6, 3, 1)])
def test_shift_mask_matches_coordinate_oracle(h, w, window, shift):
    mask = build_shift_mask(h, w, window, shift)
    allowed = oracle_allowed(h, w, window, shift)
    assert mask.shape == allowed.shape
    assert np.array_equal(mask == 0.0, allowed)
    assert np.array_equal(mask == MASK_OFF, ~allowed)


def test_shift_mask_symmetric_and_reflexive():
    mask = build_shift_mask(8, 8, 4, 2)
    assert np.array_equal(mask, mask.transpose(0, 2, 1))
    assert (mask[:, np.arange(16), np.arange(16)] == 0.0).all()


def test_shift_mask_interior_window_fully_open():
    # windows that contain no wrapped content have nothing to mask
    mask = build_shift_mask(12, 12, 4, 2)
    assert (mask[0] == 0.0).all()


def test_shift_mask_rejects_bad_shift():
    for shift in (0, 4, 5):
        with pytest.raises(ShapeError):
            build_shift_mask(8, 8, 4, shift)


def test_shift_mask_rejects_nondivisible_map():
    with pytest.raises(ShapeError):
        build_shift_mask(10, 8, 4, 2)


def test_region_labels_cover_nine_regions():
    labels = shift_region_labels(8, 8, 4, 2)
    assert labels.shape == (8, 8)
    assert set(np.unique(labels)) == set(range(9))


# --- relative position index ----------------------------------------------


def test_relative_index_diagonal_is_center_row():
    side = 4
    idx = relative_index_map(side, side, side)
    center = (side - 1) * (2 * side - 1) + (side - 1)
    assert (np.diag(idx) == center).all()


def test_relative_index_every_offset_distinct():
    idx = relative_index_map(3, 3, 3)
    # a 3x3 group realizes all 25 offsets of a reach-3 table exactly
    assert idx.shape == (9, 9)
    assert len(np.unique(idx)) == relative_table_rows(3) == 25
    assert idx.min() == 0 and idx.max() == 24


def test_relative_index_antisymmetric_offsets():
    idx = relative_index_map(2, 3, 4)
    span = 2 * 4 - 1
    center = (4 - 1) * span + (4 - 1)
    # idx(p, q) + idx(q, p) is constant: offsets negate across the diagonal
    assert (idx + idx.T == 2 * center).all()


def test_relative_index_rectangular_groups():
    idx = relative_index_map(2, 4, 4)
    assert idx.shape == (8, 8)
    coords = token_coords(2, 4)
    span = 2 * 4 - 1
    for p in range(8):
        for q in range(8):
            dy, dx = coords[p] - coords[q]
            assert idx[p, q] == (dy + 3) * span + (dx + 3)


def test_relative_index_rejects_overreach():
    with pytest.raises(ShapeError):
        relative_index_map(5, 5, 4)


def test_relative_index_cached_and_readonly():
    a = relative_index_map(4, 4, 4)
    b = relative_index_map(4, 4, 4)
    assert a is b
    assert not a.flags.writeable


def test_token_coords_raster():
    assert np.array_equal(
        token_coords(2, 3), [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
    )


def test_relative_table_rows():
    assert relative_table_rows(4) == 49
    assert relative_table_rows(16) == 961
