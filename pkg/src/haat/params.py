"""Named parameter registry and weight initializers."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, default_dtype
from .errors import ContractError, WeightMismatchError


class ParamStore:
    """Ordered name -> Tensor registry for every trainable weight of a model.

    Names are dotted paths assigned by the module builders
    (``rdg0.sdrcb1.stl0.attn.qkv_weight`` and so on). Insertion order is
    the canonical order for serialization and for the optimizer walk.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        """Register a new parameter, cast to the active storage dtype."""
        if name in self._params:
            raise ContractError(f"duplicate parameter name '{name}'")
        t = Tensor(np.asarray(value), requires_grad=True, dtype=default_dtype())
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def total_parameters(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Snapshot of all parameter values, in registry order."""
        return {name: np.array(t.data, copy=True) for name, t in self._params.items()}

    def assign_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Load values into existing parameters; strict on names and shapes.

        Raises :class:`WeightMismatchError` at the first missing, extra, or
        shape-mismatched tensor. On success every parameter is overwritten
        in place (cast to its storage dtype).
        """
        for name, t in self._params.items():
            if name not in arrays:
                raise WeightMismatchError(f"weight file is missing tensor '{name}'")
            arr = np.asarray(arrays[name])
            if tuple(arr.shape) != tuple(t.shape):
                raise WeightMismatchError(
                    f"tensor '{name}' has shape {tuple(arr.shape)}, model expects {tuple(t.shape)}"
                )
        for name in arrays:
            if name not in self._params:
                raise WeightMismatchError(f"weight file has unexpected tensor '{name}'")
        for name, t in self._params.items():
            t.data = np.asarray(arrays[name], dtype=t.dtype).copy()
            t.grad = None


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    """Zero-mean normal draw with resampling outside two standard deviations."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out


def zeros(shape) -> np.ndarray:
    return np.zeros(shape)


def ones(shape) -> np.ndarray:
    return np.ones(shape)
