"""Dense tensors with tape-based reverse-mode differentiation.

Values are stored as numpy arrays (float32 by default, float64 under the
``precision`` context used by the verification harness). Reductions
(matmul, convolution, normalization statistics, pooling) always accumulate
in float64 before rounding back to the storage dtype, which keeps
comparisons against independently computed oracles stable.

Recording is explicit: operations executed while a :class:`GradTape` is
active are appended to it, and :func:`backward` replays the tape in exact
reverse order. One tape per thread; tensors produced by operations are
treated as immutable and may be shared freely for reading.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ContractError, NumericsError, ShapeError

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


class _State(threading.local):
    def __init__(self):
        self.tapes: list[GradTape] = []
        self.dtype = np.float32
        self.negated_ops: frozenset[str] = frozenset()


_STATE = _State()


def default_dtype():
    """Storage dtype for newly created tensors in this thread."""
    return _STATE.dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the storage dtype ("float32" or "float64").

    The verification harness builds models and inputs under
    ``precision("float64")`` so finite-difference noise does not mask real
    gradient errors; production inference stays in float32.
    """
    wanted = np.dtype(dtype)
    if wanted not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ContractError(f"unsupported storage dtype {dtype!r}")
    previous = _STATE.dtype
    _STATE.dtype = wanted.type
    try:
        yield
    finally:
        _STATE.dtype = previous


@contextlib.contextmanager
def negate_gradient(op_name: str):
    """Test-only hook: negate the gradients produced by one op's backward.

    Exists so sensitivity controls can prove that the gradient checker
    actually fails when a backward rule is wrong. Never used in production
    code paths.
    """
    previous = _STATE.negated_ops
    _STATE.negated_ops = previous | {op_name}
    try:
        yield
    finally:
        _STATE.negated_ops = previous


class Tensor:
    """A dense rank-N array of 32- or 64-bit floats, optionally differentiable.

    ``requires_grad`` marks leaves (parameters, checked inputs) whose
    gradient should be populated by :func:`backward`. Tensors produced by
    operations inherit the flag transitively while a tape is recording.
    """

    __slots__ = ("data", "requires_grad", "grad", "_leaf")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is not None:
            arr = np.asarray(data, dtype=dtype)
        else:
            arr = np.asarray(data)
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(default_dtype())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def check_finite(self, context: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            raise NumericsError(f"non-finite values in {context}")
        return self

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def mean(self) -> "Tensor":
        return mean_all(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)


class _Node:
    __slots__ = ("op", "inputs", "outputs", "bwd")

    def __init__(self, op, inputs, outputs, bwd):
        self.op = op
        self.inputs = inputs
        self.outputs = outputs
        self.bwd = bwd


class GradTape:
    """Ordered record of executed operations, replayed backward by :func:`backward`.

    Use as a context manager around the forward computation::

        with GradTape() as tape:
            loss = model_loss(...)
        backward(loss, tape)

    A tape is single-threaded: one tape per training or checking thread,
    never shared.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "GradTape":
        _STATE.tapes.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _STATE.tapes.pop()
        assert popped is self, "mis-nested GradTape contexts"
        return False

    def __len__(self) -> int:
        return len(self.nodes)


def _active_tape(tensors: Iterable[Tensor]) -> GradTape | None:
    if not _STATE.tapes:
        return None
    if any(t.requires_grad for t in tensors):
        return _STATE.tapes[-1]
    return None


def _make_outputs(tape, arrays):
    outs = []
    for arr in arrays:
        t = Tensor(arr, requires_grad=tape is not None, dtype=arr.dtype)
        if tape is not None:
            t._leaf = False
        outs.append(t)
    return outs


def _record(tape, op, inputs, outputs, bwd):
    if tape is not None:
        tape.nodes.append(_Node(op, tuple(inputs), tuple(outputs), bwd))


def _result_dtype(*tensors: Tensor):
    return np.result_type(*(t.data.dtype for t in tensors)).type


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor, tape: GradTape) -> None:
    """Populate ``grad`` on every requires-grad leaf reachable from ``loss``.

    ``loss`` must be scalar and a product of ``tape``. Intermediates do not
    keep their gradients; leaves accumulate into any existing ``grad``.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape.nodes:
        produced = {id(o) for node in tape.nodes for o in node.outputs}
        if id(loss) not in produced:
            raise ContractError("loss is not a product of this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    if loss._leaf and loss.requires_grad:
        leaves[id(loss)] = loss

    for node in reversed(tape.nodes):
        gouts = [grads.get(id(o)) for o in node.outputs]
        if all(g is None for g in gouts):
            continue
        gouts = [
            g if g is not None else np.zeros_like(o.data)
            for g, o in zip(gouts, node.outputs)
        ]
        gins = node.bwd(gouts)
        if node.op in _STATE.negated_ops:
            gins = [None if g is None else -g for g in gins]
        for t, g in zip(node.inputs, gins):
            if g is None or not t.requires_grad:
                continue
            g = np.asarray(g, dtype=t.data.dtype)
            assert g.shape == t.data.shape, f"bad grad shape in {node.op}"
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
            if t._leaf:
                leaves[key] = t
        for o in node.outputs:
            grads.pop(id(o), None)

    for key, t in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        t.grad = g if t.grad is None else t.grad + g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _coerce_pair(a, b):
    ta = isinstance(a, Tensor)
    tb = isinstance(b, Tensor)
    if ta and tb:
        return a, b, (a, b)
    if ta:
        return a, float(b), (a,)
    if tb:
        return float(a), b, (b,)
    raise ContractError("at least one operand must be a Tensor")


def add(a, b) -> Tensor:
    a, b, tensors = _coerce_pair(a, b)
    ad = a.data if isinstance(a, Tensor) else a
    bd = b.data if isinstance(b, Tensor) else b
    tape = _active_tape(tensors)
    (out,) = _make_outputs(tape, [np.add(ad, bd)])
    if tape is not None:
        shapes = [t.data.shape for t in tensors]

        def bwd(gs):
            return [_unbroadcast(gs[0], s) for s in shapes]

        _record(tape, "add", tensors, (out,), bwd)
    return out


def sub(a, b) -> Tensor:
    if isinstance(b, Tensor):
        return add(a, neg(b))
    return add(a, -float(b))


def mul(a, b) -> Tensor:
    a, b, tensors = _coerce_pair(a, b)
    ad = a.data if isinstance(a, Tensor) else a
    bd = b.data if isinstance(b, Tensor) else b
    tape = _active_tape(tensors)
    (out,) = _make_outputs(tape, [np.multiply(ad, bd)])
    if tape is not None:
        others = {id(a): bd, id(b): ad} if isinstance(a, Tensor) and isinstance(b, Tensor) else None
        shapes = [t.data.shape for t in tensors]

        def bwd(gs):
            g = gs[0]
            if others is None:
                other = bd if isinstance(a, Tensor) else ad
                return [_unbroadcast(g * other, shapes[0])]
            return [
                _unbroadcast(g * others[id(t)], shp)
                for t, shp in zip(tensors, shapes)
            ]

        _record(tape, "mul", tensors, (out,), bwd)
    return out


def neg(x: Tensor) -> Tensor:
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [-x.data])
    if tape is not None:
        _record(tape, "neg", (x,), (out,), lambda gs: [-gs[0]])
    return out


def absolute(x: Tensor) -> Tensor:
    """Elementwise |x|; the subgradient at 0 is taken as 0."""
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [np.abs(x.data)])
    if tape is not None:
        sign = np.sign(x.data)
        _record(tape, "abs", (x,), (out,), lambda gs: [gs[0] * sign])
    return out


def sum_all(x: Tensor) -> Tensor:
    tape = _active_tape((x,))
    total = x.data.sum(dtype=np.float64)
    (out,) = _make_outputs(tape, [np.asarray(total, dtype=x.data.dtype)])
    if tape is not None:
        shape = x.data.shape

        def bwd(gs):
            return [np.broadcast_to(gs[0], shape).copy()]

        _record(tape, "sum", (x,), (out,), bwd)
    return out


def mean_all(x: Tensor) -> Tensor:
    return mul(sum_all(x), 1.0 / x.size)


# ---------------------------------------------------------------------------
# matmul / convolution


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy batching rules; accumulates in float64.

    Both operands need rank >= 2; leading batch dimensions broadcast.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    dtype = _result_dtype(a, b)
    a64 = a.data.astype(np.float64, copy=False)
    b64 = b.data.astype(np.float64, copy=False)
    prod = (a64 @ b64).astype(dtype)
    tape = _active_tape((a, b))
    (out,) = _make_outputs(tape, [prod])
    if tape is not None:
        def bwd(gs):
            g = gs[0].astype(np.float64, copy=False)
            ga = _unbroadcast(g @ np.swapaxes(b64, -1, -2), a.data.shape)
            gb = _unbroadcast(np.swapaxes(a64, -1, -2) @ g, b.data.shape)
            return [ga, gb]

        _record(tape, "matmul", (a, b), (out,), bwd)
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: int = 0) -> Tensor:
    """2-D cross-correlation over NCHW input with odd-sized kernels.

    Output height is H + 2*padding - kh + 1 (stride 1); pass
    padding=(k-1)//2 for shape-preserving use.
    """
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernel, got {x.shape}, {w.shape}")
    bsz, cin, h, wdt = x.shape
    cout, cin_w, kh, kw = w.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d kernels must be odd-sized, got {kh}x{kw}")
    if cin != cin_w:
        raise ShapeError(f"conv2d channel mismatch: input has {cin}, kernel expects {cin_w}")
    if b.shape != (cout,):
        raise ShapeError(f"conv2d bias shape {b.shape} does not match {cout} output channels")
    ho = h + 2 * padding - kh + 1
    wo = wdt + 2 * padding - kw + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d output would be empty for input {x.shape} and kernel {w.shape}")

    dtype = _result_dtype(x, w, b)
    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    view = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    cols = view.transpose(0, 2, 3, 1, 4, 5).reshape(bsz, ho * wo, cin * kh * kw)
    wmat = w.data.reshape(cout, cin * kh * kw)
    out64 = cols.astype(np.float64) @ wmat.T.astype(np.float64)
    out64 += b.data.astype(np.float64)
    out = out64.astype(dtype).transpose(0, 2, 1).reshape(bsz, cout, ho, wo)

    tape = _active_tape((x, w, b))
    (res,) = _make_outputs(tape, [out])
    if tape is not None:
        cols_saved = np.ascontiguousarray(cols)

        def bwd(gs):
            g = gs[0].reshape(bsz, cout, ho * wo).transpose(0, 2, 1)
            g64 = g.astype(np.float64, copy=False)
            gw = np.tensordot(g64, cols_saved.astype(np.float64, copy=False), axes=([0, 1], [0, 1]))
            gb = g64.sum(axis=(0, 1))
            gcols = g64 @ wmat.astype(np.float64, copy=False)
            gxp = np.zeros((bsz, cin, h + 2 * padding, wdt + 2 * padding))
            gtile = gcols.reshape(bsz, ho, wo, cin, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + ho, j:j + wo] += gtile[:, :, i, j]
            if padding:
                gxp = gxp[:, :, padding:-padding, padding:-padding]
            return [gxp, gw.reshape(w.data.shape), gb]

        _record(tape, "conv2d", (x, w, b), (res,), bwd)
    return res


# ---------------------------------------------------------------------------
# normalization / softmax / activations


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    c = x.shape[-1]
    if gain.shape != (c,) or bias.shape != (c,):
        raise ShapeError(
            f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match channel count {c}"
        )
    dtype = _result_dtype(x, gain, bias)
    xd = x.data.astype(np.float64, copy=False)
    mu = xd.mean(axis=-1, keepdims=True)
    centered = xd - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = (xhat * gain.data.astype(np.float64) + bias.data.astype(np.float64)).astype(dtype)

    tape = _active_tape((x, gain, bias))
    (res,) = _make_outputs(tape, [out])
    if tape is not None:
        def bwd(gs):
            g = gs[0].astype(np.float64, copy=False)
            gxhat = g * gain.data.astype(np.float64)
            m1 = gxhat.mean(axis=-1, keepdims=True)
            m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
            gx = inv * (gxhat - m1 - xhat * m2)
            axes = tuple(range(g.ndim - 1))
            ggain = (g * xhat).sum(axis=axes)
            gbias = g.sum(axis=axes)
            return [gx, ggain, gbias]

        _record(tape, "layer_norm", (x, gain, bias), (res,), bwd)
    return res


def softmax_lastdim(x: Tensor) -> Tensor:
    """Max-subtracted softmax over the last axis; rows sum to one."""
    xd = x.data
    shifted = xd - xd.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [y.astype(xd.dtype)])
    if tape is not None:
        ysaved = out.data

        def bwd(gs):
            g = gs[0]
            dot = (g * ysaved).sum(axis=-1, keepdims=True)
            return [ysaved * (g - dot)]

        _record(tape, "softmax", (x,), (out,), bwd)
    return out


def relu(x: Tensor) -> Tensor:
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [np.maximum(x.data, 0)])
    if tape is not None:
        mask = x.data > 0
        _record(tape, "relu", (x,), (out,), lambda gs: [gs[0] * mask])
    return out


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    xd = x.data
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [np.where(xd > 0, xd, slope * xd)])
    if tape is not None:
        factor = np.where(xd > 0, 1.0, slope)
        _record(tape, "leaky_relu", (x,), (out,), lambda gs: [gs[0] * factor])
    return out


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit in its exact erf-based form."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _INV_SQRT2))
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [(xd * cdf).astype(xd.dtype)])
    if tape is not None:
        pdf = np.exp(-0.5 * xd * xd) * _INV_SQRT_2PI

        def bwd(gs):
            return [gs[0] * (cdf + xd * pdf)]

        _record(tape, "gelu", (x,), (out,), bwd)
    return out


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    y = np.empty_like(xd)
    pos = xd >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    y[~pos] = ex / (1.0 + ex)
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [y])
    if tape is not None:
        ysaved = out.data
        _record(tape, "sigmoid", (x,), (out,), lambda gs: [gs[0] * ysaved * (1.0 - ysaved)])
    return out


# ---------------------------------------------------------------------------
# pooling / pixel shuffle / channel concat


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean of an NCHW tensor, kept as (B, C, 1, 1)."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool expects NCHW input, got {x.shape}")
    pooled = x.data.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(x.data.dtype)
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [pooled])
    if tape is not None:
        _, _, h, w = x.shape
        shape = x.data.shape

        def bwd(gs):
            return [np.broadcast_to(gs[0] / (h * w), shape).copy()]

        _record(tape, "global_avg_pool", (x,), (out,), bwd)
    return out


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange (B, C*r^2, H, W) into (B, C, r*H, r*W) sub-pixel layout."""
    bsz, c, h, w = x.shape
    if c % (r * r) != 0:
        raise ShapeError(f"pixel_shuffle needs channels divisible by {r * r}, got {c}")
    cout = c // (r * r)
    out = (
        x.data.reshape(bsz, cout, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(bsz, cout, h * r, w * r)
    )
    tape = _active_tape((x,))
    (res,) = _make_outputs(tape, [np.ascontiguousarray(out)])
    if tape is not None:
        def bwd(gs):
            return [_unshuffle_array(gs[0], r)]

        _record(tape, "pixel_shuffle", (x,), (res,), bwd)
    return res


def _unshuffle_array(arr: np.ndarray, r: int) -> np.ndarray:
    bsz, c, hr, wr = arr.shape
    h, w = hr // r, wr // r
    return np.ascontiguousarray(
        arr.reshape(bsz, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(bsz, c * r * r, h, w)
    )


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Exact inverse of :func:`pixel_shuffle`."""
    bsz, c, hr, wr = x.shape
    if hr % r != 0 or wr % r != 0:
        raise ShapeError(f"pixel_unshuffle needs spatial dims divisible by {r}, got {x.shape}")
    tape = _active_tape((x,))
    (res,) = _make_outputs(tape, [_unshuffle_array(x.data, r)])
    if tape is not None:
        def bwd(gs):
            g = gs[0]
            b2, c2, h2, w2 = g.shape
            return [
                np.ascontiguousarray(
                    g.reshape(b2, c2 // (r * r), r, r, h2, w2)
                    .transpose(0, 1, 4, 2, 5, 3)
                    .reshape(b2, c2 // (r * r), h2 * r, w2 * r)
                )
            ]

        _record(tape, "pixel_unshuffle", (x,), (res,), bwd)
    return res


def concat_channels(xs: Sequence[Tensor]) -> Tensor:
    """Concatenate NCHW tensors along the channel axis."""
    if not xs:
        raise ShapeError("concat_channels needs at least one tensor")
    first = xs[0]
    for t in xs[1:]:
        if t.ndim != first.ndim or t.shape[0] != first.shape[0] or t.shape[2:] != first.shape[2:]:
            raise ShapeError(
                f"concat_channels spatial/batch mismatch: {first.shape} vs {t.shape}"
            )
    out = np.concatenate([t.data for t in xs], axis=1)
    tape = _active_tape(xs)
    (res,) = _make_outputs(tape, [out])
    if tape is not None:
        sizes = [t.shape[1] for t in xs]
        bounds = np.cumsum(sizes)[:-1]

        def bwd(gs):
            return list(np.split(gs[0], bounds, axis=1))

        _record(tape, "concat_channels", tuple(xs), (res,), bwd)
    return res


def split_axis(x: Tensor, sizes: Sequence[int], axis: int) -> list[Tensor]:
    """Split a tensor along one axis into pieces of the given sizes."""
    if sum(sizes) != x.shape[axis]:
        raise ShapeError(
            f"split sizes {list(sizes)} do not sum to axis extent {x.shape[axis]}"
        )
    bounds = np.cumsum(list(sizes))[:-1]
    parts = [np.ascontiguousarray(p) for p in np.split(x.data, bounds, axis=axis)]
    tape = _active_tape((x,))
    outs = _make_outputs(tape, parts)
    if tape is not None:
        def bwd(gs):
            return [np.concatenate(gs, axis=axis)]

        _record(tape, "split_axis", (x,), tuple(outs), bwd)
    return outs


def split_channels(x: Tensor, sizes: Sequence[int]) -> list[Tensor]:
    """Split an NCHW tensor along channels into pieces of the given sizes."""
    return split_axis(x, sizes, 1)


# ---------------------------------------------------------------------------
# data movement


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [x.data.reshape(shape)])
    if tape is not None:
        orig = x.data.shape
        _record(tape, "reshape", (x,), (out,), lambda gs: [gs[0].reshape(orig)])
    return out


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(int(a) for a in axes)
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [np.ascontiguousarray(x.data.transpose(axes))])
    if tape is not None:
        inverse = tuple(np.argsort(axes))
        _record(
            tape, "permute", (x,), (out,),
            lambda gs: [np.ascontiguousarray(gs[0].transpose(inverse))],
        )
    return out


def roll2d(x: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal roll of the last two axes; positive shifts move content down/right."""
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [np.roll(x.data, (dy, dx), axis=(-2, -1))])
    if tape is not None:
        _record(
            tape, "roll2d", (x,), (out,),
            lambda gs: [np.roll(gs[0], (-dy, -dx), axis=(-2, -1))],
        )
    return out


def pad_reflect_br(x: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Reflect-pad the bottom/right edges of the last two axes.

    Reflection excludes the edge sample (row H pads to row H-2 first).
    Pads wider than the extent are applied in chunks; a single-sample axis
    falls back to edge replication, the only padding it admits.
    """
    if pad_h < 0 or pad_w < 0:
        raise ShapeError("pad sizes must be non-negative")
    arr = x.data
    steps: list[tuple[str, int, int]] = []
    rh, rw = pad_h, pad_w
    while rh > 0 or rw > 0:
        if rh > 0 and arr.shape[-2] == 1 or rw > 0 and arr.shape[-1] == 1:
            ch, cw = rh, rw
            mode = "edge"
        else:
            ch = min(rh, arr.shape[-2] - 1)
            cw = min(rw, arr.shape[-1] - 1)
            mode = "reflect"
        pad_spec = [(0, 0)] * (arr.ndim - 2) + [(0, ch), (0, cw)]
        arr = np.pad(arr, pad_spec, mode=mode)
        steps.append((mode, ch, cw))
        rh -= ch
        rw -= cw
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [arr])
    if tape is not None:
        def bwd(gs):
            g = gs[0]
            for mode, ch, cw in reversed(steps):
                gh = g.shape[-2] - ch
                gw = g.shape[-1] - cw
                folded = np.array(g[..., :gh, :], copy=True)
                for k in range(1, ch + 1):
                    src = gh - 1 if mode == "edge" else gh - 1 - k
                    folded[..., src, :] += g[..., gh - 1 + k, :]
                g = np.array(folded[..., :, :gw], copy=True)
                for k in range(1, cw + 1):
                    src = gw - 1 if mode == "edge" else gw - 1 - k
                    g[..., :, src] += folded[..., :, gw - 1 + k]
            return [g]

        _record(tape, "pad_reflect_br", (x,), (out,), bwd)
    return out


def crop_br(x: Tensor, h: int, w: int) -> Tensor:
    """Keep the top-left h x w region of the last two axes."""
    if h > x.shape[-2] or w > x.shape[-1]:
        raise ShapeError(f"cannot crop {x.shape} to {h}x{w}")
    tape = _active_tape((x,))
    (out,) = _make_outputs(tape, [np.ascontiguousarray(x.data[..., :h, :w])])
    if tape is not None:
        full = x.data.shape

        def bwd(gs):
            g = np.zeros(full, dtype=gs[0].dtype)
            g[..., :h, :w] = gs[0]
            return [g]

        _record(tape, "crop_br", (x,), (out,), bwd)
    return out


def take_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table by integer index (used for learned biases)."""
    if table.ndim != 2:
        raise ShapeError(f"take_rows expects a 2-D table, got {table.shape}")
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    tape = _active_tape((table,))
    (out,) = _make_outputs(tape, [table.data[idx]])
    if tape is not None:
        shape = table.data.shape

        def bwd(gs):
            g = np.zeros(shape, dtype=np.float64)
            np.add.at(g, idx, gs[0].astype(np.float64, copy=False))
            return [g]

        _record(tape, "take_rows", (table,), (out,), bwd)
    return out
