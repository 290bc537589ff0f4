"""Named parameter storage shared by all networks.

Parameters live in a flat name -> Tensor map; sub-networks claim a
slash-separated prefix (``encoder/space/...``, ``expert/3/...``).
Snapshots produce graph-independent copies for target networks.
"""

from __future__ import annotations

import numpy as np

from .layers import BatchNormState
from .tensor import Tensor


class ParamStore:
    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, BatchNormState] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True)
        self.params[name] = t
        return t

    def add_buffer(self, name: str, state: BatchNormState) -> BatchNormState:
        if name in self.buffers:
            raise ValueError(f"duplicate buffer name: {name}")
        self.buffers[name] = state
        return state

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self, prefix: str | None = None):
        if prefix is None:
            return list(self.params)
        return [n for n in self.params if n.startswith(prefix)]

    def n_params(self, prefix: str | None = None) -> int:
        return sum(self.params[n].size for n in self.names(prefix))

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def snapshot(self) -> "ParamStore":
        """Value-equal copy, detached from any autodiff graph."""
        out = ParamStore(self.dtype)
        for name, t in self.params.items():
            out.add(name, t.data.copy())
        for name, st in self.buffers.items():
            out.add_buffer(name, st.copy())
        out.step = self.step
        return out

    def load_values(self, other: "ParamStore"):
        _check_same_structure(self, other)
        for name, t in self.params.items():
            t.data[...] = other.params[name].data
        for name, st in self.buffers.items():
            st.mean[...] = other.buffers[name].mean
            st.var[...] = other.buffers[name].var


def _check_same_structure(a: ParamStore, b: ParamStore):
    if set(a.params) != set(b.params) or set(a.buffers) != set(b.buffers):
        raise ValueError("parameter stores are structurally different")
    for name in a.params:
        if a.params[name].shape != b.params[name].shape:
            raise ValueError(f"shape mismatch for {name}: {a.params[name].shape} vs {b.params[name].shape}")


def soft_update(target: ParamStore, online: ParamStore, tau: float):
    """target <- tau * online + (1 - tau) * target, elementwise.

    Running-statistic buffers are blended with the same coefficient so
    target-side normalization tracks the online statistics.
    """
    _check_same_structure(target, online)
    for name, t in target.params.items():
        t.data *= (1.0 - tau)
        t.data += tau * online.params[name].data
    for name, st in target.buffers.items():
        st.mean *= (1.0 - tau)
        st.mean += tau * online.buffers[name].mean
        st.var *= (1.0 - tau)
        st.var += tau * online.buffers[name].var


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_affine(store: ParamStore, rng, name: str, n_in: int, n_out: int):
    store.add(f"{name}/w", uniform_fan_in(rng, n_in, (n_in, n_out)))
    store.add(f"{name}/b", np.zeros(n_out))


def init_norm(store: ParamStore, name: str, width: int):
    store.add(f"{name}/gamma", np.ones(width))
    store.add(f"{name}/beta", np.zeros(width))


def init_gru(store: ParamStore, rng, name: str, n_in: int, hidden: int):
    store.add(f"{name}/w_ih", uniform_fan_in(rng, n_in, (n_in, 3 * hidden)))
    store.add(f"{name}/w_hh", uniform_fan_in(rng, hidden, (hidden, 3 * hidden)))
    store.add(f"{name}/b_ih", np.zeros(3 * hidden))
    store.add(f"{name}/b_hh", np.zeros(3 * hidden))
