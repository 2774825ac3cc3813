"""Parameter initialization and the flat parameter registry.

Model parameters live in nested dicts of Tensors; :func:`flatten_params`
produces the name→Tensor view the optimizer and checkpoint code consume.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def conv_init(rng: np.random.Generator, c_out: int, c_in: int, kh: int,
              kw: int | None = None, bias: bool = True) -> dict:
    """He fan-in scaled conv kernel (and zero bias)."""
    kw = kh if kw is None else kw
    fan_in = c_in * kh * kw
    w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, kh, kw))
    params = {"w": Tensor(w, requires_grad=True)}
    if bias:
        params["b"] = Tensor(np.zeros(c_out), requires_grad=True)
    return params


def linear_init(rng: np.random.Generator, d_in: int, d_out: int, bias: bool = False) -> dict:
    w = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out))
    params = {"w": Tensor(w, requires_grad=True)}
    if bias:
        params["b"] = Tensor(np.zeros((1, d_out)), requires_grad=True)
    return params


def flatten_params(tree, prefix: str = "") -> dict[str, Tensor]:
    """Flatten a nested dict/list tree of Tensors into 'a/b/0/w' keys."""
    flat: dict[str, Tensor] = {}
    if isinstance(tree, Tensor):
        flat[prefix] = tree
    elif isinstance(tree, dict):
        for key, value in tree.items():
            flat.update(flatten_params(value, f"{prefix}/{key}" if prefix else str(key)))
    elif isinstance(tree, (list, tuple)):
        for i, value in enumerate(tree):
            flat.update(flatten_params(value, f"{prefix}/{i}" if prefix else str(i)))
    else:
        raise TypeError(f"unexpected leaf {type(tree)!r} at {prefix!r}")
    return flat


def assign_params(tree, values: dict[str, np.ndarray]) -> None:
    """Load flat name→array values into an existing parameter tree in place."""
    flat = flatten_params(tree)
    missing = set(flat) - set(values)
    extra = set(values) - set(flat)
    if missing or extra:
        raise KeyError(f"parameter mismatch; missing={sorted(missing)[:3]} extra={sorted(extra)[:3]}")
    for name, tensor in flat.items():
        arr = np.asarray(values[name], dtype=tensor.data.dtype)
        if arr.shape != tensor.data.shape:
            raise ValueError(f"{name}: shape {arr.shape} != {tensor.data.shape}")
        tensor.data = arr
