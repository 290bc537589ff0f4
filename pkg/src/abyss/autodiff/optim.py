"""Gradient-descent optimizers with global-norm clipping."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class NanGradientError(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient in parameter '{name}'; step aborted")
        self.param_name = name


def _collect(store: ParamStore, names):
    names = store.names() if names is None else list(names)
    live = []
    for n in names:
        t = store.params[n]
        if t.grad is not None:
            if not np.all(np.isfinite(t.grad)):
                raise NanGradientError(n)
            live.append((n, t))
    return live


def clip_global_norm(grads, max_norm: float) -> float:
    """Rescale grads in place so the global L2 norm is <= max_norm."""
    total = 0.0
    for g in grads:
        total += float(np.sum(np.square(g, dtype=np.float64)))
    norm = float(np.sqrt(total))
    if max_norm is not None and norm > max_norm > 0.0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


class Sgd:
    """Plain stochastic gradient descent, mostly for tests."""

    def __init__(self, lr: float, clip_norm: float | None = None):
        self.lr = lr
        self.clip_norm = clip_norm

    def step(self, store: ParamStore, names=None):
        live = _collect(store, names)
        clip_global_norm([t.grad for _, t in live], self.clip_norm)
        for _, t in live:
            t.data -= (self.lr * t.grad).astype(t.data.dtype, copy=False)
        store.zero_grad()
        store.step += 1


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm: float | None = None):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t: dict[str, int] = {}

    def step(self, store: ParamStore, names=None):
        live = _collect(store, names)
        clip_global_norm([t.grad for _, t in live], self.clip_norm)
        for name, t in live:
            g = t.grad
            m = self._m.get(name)
            if m is None:
                m = self._m[name] = np.zeros_like(t.data, dtype=np.float64)
                self._v[name] = np.zeros_like(t.data, dtype=np.float64)
                self._t[name] = 0
            v = self._v[name]
            self._t[name] += 1
            k = self._t[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            mhat = m / (1.0 - self.beta1 ** k)
            vhat = v / (1.0 - self.beta2 ** k)
            t.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(t.data.dtype, copy=False)
        store.zero_grad()
        store.step += 1
