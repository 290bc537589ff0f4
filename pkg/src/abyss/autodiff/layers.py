"""Network layers with fused hand-written backward passes.

Each layer is a single graph node: one python-level op per call keeps
the per-step overhead low enough for training loops in pure numpy.
All gradients here are validated against central finite differences in
the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .tensor import Tensor, _out, _track, as_tensor, unbroadcast

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class DimensionError(ValueError):
    """Input shape incompatible with a layer's signature."""


class ConfigurationError(ValueError):
    """Layer hyperparameters are inconsistent (e.g. group count)."""


def _flat2d(x: np.ndarray):
    """View (..., F) as (N, F) for batched affine math."""
    return x.reshape(-1, x.shape[-1])


def affine(x, w, b):
    """y = x @ w + b over the last axis; x may have extra leading dims."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"affine: input width {x.shape[-1]} != weight rows {w.shape[0]}")
    track = _track(x, w, b)
    out_data = np.matmul(x.data, w.data) + b.data

    def backward(g):
        if x.requires_grad:
            x._accumulate(np.matmul(g, w.data.T))
        if w.requires_grad:
            w._accumulate(np.matmul(_flat2d(x.data).T, _flat2d(g)))
        if b.requires_grad:
            b._accumulate(_flat2d(g).sum(axis=0))

    return _out(out_data, (x, w, b), backward, track)


# -- activations ---------------------------------------------------------------

def relu(x):
    x = as_tensor(x)
    track = _track(x)
    out_data = np.maximum(x.data, 0.0)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * (x.data > 0))

    return _out(out_data, (x,), backward, track)


def gelu(x):
    """Exact Gaussian error linear unit: 0.5 x (1 + erf(x / sqrt(2)))."""
    x = as_tensor(x)
    track = _track(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out_data = x.data * cdf

    def backward(g):
        if x.requires_grad:
            pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
            x._accumulate(g * (cdf + x.data * pdf))

    return _out(out_data, (x,), backward, track)


def swish(x):
    """x * sigmoid(x)."""
    x = as_tensor(x)
    track = _track(x)
    sig = 1.0 / (1.0 + np.exp(-x.data))
    out_data = x.data * sig

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * sig * (1.0 + x.data * (1.0 - sig)))

    return _out(out_data, (x,), backward, track)


def tanh(x):
    x = as_tensor(x)
    track = _track(x)
    out_data = np.tanh(x.data)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * (1.0 - out_data * out_data))

    return _out(out_data, (x,), backward, track)


def sigmoid(x):
    x = as_tensor(x)
    track = _track(x)
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * out_data * (1.0 - out_data))

    return _out(out_data, (x,), backward, track)


def softmax(x, axis=-1):
    """Numerically stable softmax; rows along `axis` sum to 1."""
    x = as_tensor(x)
    track = _track(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            x._accumulate(out_data * (g - dot))

    return _out(out_data, (x,), backward, track)


# -- normalization ---------------------------------------------------------------

def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize the last (feature) axis per sample, then affine."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    track = _track(x, gamma, beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate(unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            beta._accumulate(unbroadcast(g, beta.shape))
        if x.requires_grad:
            gx_hat = g * gamma.data
            m1 = gx_hat.mean(axis=-1, keepdims=True)
            m2 = (gx_hat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gx_hat - m1 - xhat * m2))

    return _out(out_data, (x, gamma, beta), backward, track)


def group_norm(x, gamma, beta, groups, eps=1e-5):
    """Normalize within channel groups of the last axis, per sample."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c = x.shape[-1]
    if c % groups != 0:
        raise ConfigurationError(f"group_norm: {groups} groups do not divide {c} channels")
    track = _track(x, gamma, beta)
    gshape = x.shape[:-1] + (groups, c // groups)
    xg = x.data.reshape(gshape)
    mu = xg.mean(axis=-1, keepdims=True)
    var = xg.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(x.shape)
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate(unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            beta._accumulate(unbroadcast(g, beta.shape))
        if x.requires_grad:
            gx_hat = (g * gamma.data).reshape(gshape)
            xh = xhat.reshape(gshape)
            m1 = gx_hat.mean(axis=-1, keepdims=True)
            m2 = (gx_hat * xh).mean(axis=-1, keepdims=True)
            x._accumulate((inv * (gx_hat - m1 - xh * m2)).reshape(x.shape))

    return _out(out_data, (x, gamma, beta), backward, track)


class BatchNormState:
    """Running statistics buffer for batch normalization."""

    def __init__(self, width, dtype=np.float64):
        self.mean = np.zeros(width, dtype=dtype)
        self.var = np.ones(width, dtype=dtype)

    def copy(self):
        out = BatchNormState(len(self.mean), self.mean.dtype)
        out.mean = self.mean.copy()
        out.var = self.var.copy()
        return out


def batch_norm(x, gamma, beta, state: BatchNormState, momentum=0.1, train=True, eps=1e-5):
    """Batch statistics in train mode; running statistics in eval mode.

    Train mode updates `state` in place with the exponential moving
    average of batch mean and (biased) variance.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 2:
        raise DimensionError(f"batch_norm expects (batch, features), got {x.shape}")
    track = _track(x, gamma, beta)

    if train:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.mean = (1.0 - momentum) * state.mean + momentum * mu
        state.var = (1.0 - momentum) * state.var + momentum * var
    else:
        mu, var = state.mean, state.var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = gamma.data * xhat + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=0))
        if x.requires_grad:
            gx_hat = g * gamma.data
            if train:
                m1 = gx_hat.mean(axis=0)
                m2 = (gx_hat * xhat).mean(axis=0)
                x._accumulate(inv * (gx_hat - m1 - xhat * m2))
            else:
                x._accumulate(gx_hat * inv)

    return _out(out_data, (x, gamma, beta), backward, track)


def dropout(x, p, train, rng: np.random.Generator):
    """Inverted dropout; identity when eval or p == 0."""
    x = as_tensor(x)
    if not train or p <= 0.0:
        return x
    track = _track(x)
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    out_data = x.data * keep

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * keep)

    return _out(out_data, (x,), backward, track)


# -- recurrence -------------------------------------------------------------------

def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh):
    """One gated-recurrent-unit step; gate order [reset | update | new].

    w_ih: (in, 3H), w_hh: (H, 3H), biases (3H,). Returns the new hidden
    state (batch, H). The candidate's hidden bias sits inside the reset
    product, matching the common two-bias formulation.
    """
    x, h = as_tensor(x), as_tensor(h)
    w_ih, w_hh, b_ih, b_hh = as_tensor(w_ih), as_tensor(w_hh), as_tensor(b_ih), as_tensor(b_hh)
    hidden = w_hh.shape[0]
    if x.shape[-1] != w_ih.shape[0]:
        raise DimensionError(f"gru_cell: input width {x.shape[-1]} != {w_ih.shape[0]}")
    track = _track(x, h, w_ih, w_hh, b_ih, b_hh)

    gi = np.matmul(x.data, w_ih.data) + b_ih.data
    gh = np.matmul(h.data, w_hh.data) + b_hh.data
    i_r, i_z, i_n = gi[..., :hidden], gi[..., hidden:2 * hidden], gi[..., 2 * hidden:]
    h_r, h_z, h_n = gh[..., :hidden], gh[..., hidden:2 * hidden], gh[..., 2 * hidden:]

    r = 1.0 / (1.0 + np.exp(-(i_r + h_r)))
    z = 1.0 / (1.0 + np.exp(-(i_z + h_z)))
    n = np.tanh(i_n + r * h_n)
    out_data = (1.0 - z) * n + z * h.data
    if not np.all(np.isfinite(out_data)):
        raise FloatingPointError("gru_cell produced a non-finite hidden state")

    def backward(g):
        g_z = g * (h.data - n)
        g_n = g * (1.0 - z)
        g_pre_n = g_n * (1.0 - n * n)
        g_r = g_pre_n * h_n
        g_pre_r = g_r * r * (1.0 - r)
        g_pre_z = g_z * z * (1.0 - z)
        g_gi = np.concatenate([g_pre_r, g_pre_z, g_pre_n], axis=-1)
        g_gh = np.concatenate([g_pre_r, g_pre_z, g_pre_n * r], axis=-1)
        if x.requires_grad:
            x._accumulate(np.matmul(g_gi, w_ih.data.T))
        if h.requires_grad:
            h._accumulate(np.matmul(g_gh, w_hh.data.T) + g * z)
        if w_ih.requires_grad:
            w_ih._accumulate(np.matmul(_flat2d(x.data).T, _flat2d(g_gi)))
        if w_hh.requires_grad:
            w_hh._accumulate(np.matmul(_flat2d(h.data).T, _flat2d(g_gh)))
        if b_ih.requires_grad:
            b_ih._accumulate(_flat2d(g_gi).sum(axis=0))
        if b_hh.requires_grad:
            b_hh._accumulate(_flat2d(g_gh).sum(axis=0))

    return _out(out_data, (x, h, w_ih, w_hh, b_ih, b_hh), backward, track)
