"""Hybrid-action decision: GRU-MLP continuous head, learnable-key top-k
gating with sparse softmax, and expert critics fused by convex weights.

Experts are evaluated sparsely: only the selected subset runs, and an
instrumented counter tracks per-decision evaluations. Gradient masking
to unselected experts falls out of the sparse evaluation itself. The
expert GRUs run statelessly (zero initial hidden state per call) so
Q_i(z, d, c) stays a pure function of its inputs; the continuous head
keeps a per-episode hidden state during rollouts.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import AgentConfig
from .env.dynamics import N_MANEUVERS


class GateError(ValueError):
    pass


class ContinuousHead:
    """z -> c in (-1, 1)^4 through GRU, two ReLU layers, tanh output."""

    prefix = "cont"

    def __init__(self, cfg: AgentConfig):
        self.cfg = cfg

    def init_params(self, store, rng):
        p, h = self.prefix, self.cfg.expert_hidden
        ad.init_gru(store, rng, f"{p}/gru", self.cfg.embed_dim, h)
        ad.init_affine(store, rng, f"{p}/l1", h, h)
        ad.init_affine(store, rng, f"{p}/l2", h, h)
        ad.init_affine(store, rng, f"{p}/out", h, 4)

    def zero_state(self, batch=1, dtype=np.float32) -> np.ndarray:
        return np.zeros((batch, self.cfg.expert_hidden), dtype=dtype)

    def forward(self, store, z, state=None):
        """Returns (c, new_state); state defaults to zeros per sample."""
        p = self.prefix
        if state is None:
            state = self.zero_state(z.shape[0], _dt(store))
        h = ad.gru_cell(z, ad.as_tensor(state.astype(_dt(store)) if isinstance(state, np.ndarray) else state),
                        store[f"{p}/gru/w_ih"], store[f"{p}/gru/w_hh"],
                        store[f"{p}/gru/b_ih"], store[f"{p}/gru/b_hh"])
        f1 = ad.relu(ad.affine(h, store[f"{p}/l1/w"], store[f"{p}/l1/b"]))
        f2 = ad.relu(ad.affine(f1, store[f"{p}/l2/w"], store[f"{p}/l2/b"]))
        c = ad.tanh(ad.affine(f2, store[f"{p}/out/w"], store[f"{p}/out/b"]))
        return c, h

    def act(self, store, z, state, explore: bool, sigma_c: float, rng):
        """Single-step rollout output with optional Gaussian exploration."""
        with ad.no_grad():
            c, h = self.forward(store, z, state)
        c = c.data.copy()
        if explore and sigma_c > 0:
            c = c + rng.normal(0.0, sigma_c, size=c.shape)
        c = np.clip(c, -1.0 + 1e-6, 1.0 - 1e-6)
        return c, h.data


class Gate:
    """Matching scores g_i = z^T W_g k_i + b_i with top-k selection."""

    prefix = "gate"

    def __init__(self, cfg: AgentConfig):
        self.cfg = cfg

    def init_params(self, store, rng):
        p, e = self.prefix, self.cfg.embed_dim
        store.add(f"{p}/wg", ad.uniform_fan_in(rng, e, (e, e)))
        store.add(f"{p}/keys", ad.uniform_fan_in(rng, e, (self.cfg.n_experts, e)))
        store.add(f"{p}/bias", np.zeros(self.cfg.n_experts))

    def scores(self, store, z):
        p = self.prefix
        projected = ad.matmul(z, store[f"{p}/wg"])
        return ad.affine(projected, ad.transpose(store[f"{p}/keys"], (1, 0)), store[f"{p}/bias"])

    def select(self, store, z, k=None):
        """Top-k expert subset and sparse-softmax weights.

        Ties break toward the lower expert index. Returns
        (omega (B, k) int array, alpha Tensor (B, k), scores Tensor).
        """
        k = self.cfg.top_k if k is None else k
        if k > self.cfg.n_experts:
            raise GateError(f"top_k={k} exceeds expert count {self.cfg.n_experts}")
        if self.cfg.n_experts == 1 and k == 1:
            b = z.shape[0]
            ones = ad.as_tensor(np.ones((b, 1), dtype=_dt(store)))
            return np.zeros((b, 1), dtype=np.int64), ones, None
        g = self.scores(store, z)
        order = np.argsort(-g.data, axis=1, kind="stable")
        omega = order[:, :k]
        selected = _gather_cols(g, omega)
        alpha = ad.softmax(selected, axis=-1)
        return omega, alpha, g


def _gather_cols(x, idx):
    """Differentiable x[i, idx[i, :]] for a 2-D tensor."""
    b, k = idx.shape
    flat = ad.reshape(x, (x.shape[0] * x.shape[1],))
    flat_idx = (np.arange(b)[:, None] * x.shape[1] + idx).reshape(-1)
    return ad.reshape(ad.take_rows(flat, flat_idx), (b, k))


class ExpertBank:
    """N independent GRU-MLP critics with stage-aware feature transforms.

    Expert i's backbone embedding is
        E_i(z) = MLP_i(GRU_i(z)) + w_i * tanh(a_i * z + c_i) + b_i
    (the stage-aware term transforms every embedding dimension), and its
    action value is one affine layer over [E_i(z); onehot(d); c].
    """

    prefix = "expert"

    def __init__(self, cfg: AgentConfig):
        self.cfg = cfg
        self.eval_counter = 0   # per-sample expert evaluations

    def init_params(self, store, rng):
        cfg = self.cfg
        h, e = cfg.expert_hidden, cfg.embed_dim
        for i in range(cfg.n_experts):
            p = f"{self.prefix}/{i}"
            ad.init_gru(store, rng, f"{p}/gru", e, h)
            ad.init_affine(store, rng, f"{p}/l1", h, h)
            ad.init_affine(store, rng, f"{p}/l2", h, e)
            store.add(f"{p}/stage/w", ad.uniform_fan_in(rng, e, (e,)))
            store.add(f"{p}/stage/a", np.ones(e))
            store.add(f"{p}/stage/c", np.zeros(e))
            store.add(f"{p}/bias", np.zeros(e))
            ad.init_affine(store, rng, f"{p}/q", e + N_MANEUVERS + 4, 1)

    def backbone(self, store, i, z):
        p = f"{self.prefix}/{i}"
        h0 = np.zeros((z.shape[0], self.cfg.expert_hidden), dtype=_dt(store))
        g = ad.gru_cell(z, ad.as_tensor(h0), store[f"{p}/gru/w_ih"], store[f"{p}/gru/w_hh"],
                        store[f"{p}/gru/b_ih"], store[f"{p}/gru/b_hh"])
        m = ad.relu(ad.affine(g, store[f"{p}/l1/w"], store[f"{p}/l1/b"]))
        m = ad.affine(m, store[f"{p}/l2/w"], store[f"{p}/l2/b"])
        stage = store[f"{p}/stage/w"] * ad.tanh(z * store[f"{p}/stage/a"] + store[f"{p}/stage/c"])
        return m + stage + store[f"{p}/bias"]

    def q_all_actions(self, store, i, z, c):
        """Q_i(z, d, c) for every discrete action at once; shape (B, |D|).

        The head is one affine layer over [E_i(z); c; onehot(d)], so the
        one-hot block contributes a per-action column offset and all
        four action values come out of a single evaluation.
        """
        self.eval_counter += z.shape[0]
        p = f"{self.prefix}/{i}"
        e = self.backbone(store, i, z)
        w = store[f"{p}/q/w"]
        split = self.cfg.embed_dim + 4
        base = ad.affine(ad.concat([e, c], axis=1), w[:split, :], store[f"{p}/q/b"])
        onehot_w = ad.reshape(w[split:, :], (N_MANEUVERS,))
        return base + onehot_w


def _dt(store):
    return store.dtype


def fuse_q(store, bank: ExpertBank, z, c, omega, alpha):
    """Q_final(z, d, c) = sum_{i in omega} alpha_i Q_i(z, d, c), (B, |D|).

    Only the selected experts are evaluated; each expert runs once on
    the sub-batch that selected it.
    """
    b = omega.shape[0]
    total = None
    alpha_flat = ad.reshape(alpha, (b * omega.shape[1],))
    for i in range(bank.cfg.n_experts):
        slot_mask = omega == i
        rows = np.nonzero(slot_mask.any(axis=1))[0]
        if rows.size == 0:
            continue
        slots = slot_mask[rows].argmax(axis=1)
        q_i = bank.q_all_actions(store, i, _maybe_rows(z, rows, b), _maybe_rows(c, rows, b))
        a_i = ad.reshape(ad.take_rows(alpha_flat, rows * omega.shape[1] + slots), (rows.size, 1))
        contrib = ad.put_rows(q_i * a_i, rows, b)
        total = contrib if total is None else total + contrib
    return total


def _maybe_rows(x, rows, b):
    return x if rows.size == b and np.array_equal(rows, np.arange(b)) else ad.take_rows(x, rows)


def discrete_greedy(q_final: np.ndarray) -> np.ndarray:
    """Argmax over discrete actions; ties go to the lower index."""
    return np.argmax(q_final, axis=-1)


def epsilon_for_episode(explore_cfg, episode: int) -> float:
    return max(explore_cfg.eps_min, explore_cfg.eps0 - explore_cfg.eps_decay * episode)


def sigma_c_for_episode(explore_cfg, episode: int) -> float:
    return max(explore_cfg.sigma_c_min, explore_cfg.sigma_c * explore_cfg.sigma_c_decay ** episode)
