"""Agent wiring: perception + continuous head + gate + expert bank over
one parameter store, with rollout-time action selection.

Variants:
    full           the complete architecture
    no-attention   perception swapped for a parameter-matched concat MLP
    single-expert  one expert, k = 1, gate bypassed
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .decision import ContinuousHead, ExpertBank, Gate, discrete_greedy, fuse_q
from .env.dynamics import HybridAction, N_MANEUVERS
from .env.world import SegmentMap
from .perception import ConcatMlpPerception, Perception

VARIANTS = ("full", "no-attention", "single-expert")


class Agent:
    def __init__(self, cfg: RunConfig, seg: SegmentMap, variant="full", dtype=None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant '{variant}'; expected one of {VARIANTS}")
        agent_cfg = dataclasses.replace(cfg.agent)
        if variant == "single-expert":
            agent_cfg = dataclasses.replace(agent_cfg, n_experts=1, top_k=1)
        self.cfg = cfg
        self.agent_cfg = agent_cfg
        self.seg = seg
        self.variant = variant
        self.dtype = np.dtype(dtype) if dtype is not None else np.dtype(cfg.trainer.precision)

        perc_cls = ConcatMlpPerception if variant == "no-attention" else Perception
        self.perception = perc_cls(agent_cfg, seg)
        self.cont = ContinuousHead(agent_cfg)
        self.gate = Gate(agent_cfg)
        self.bank = ExpertBank(agent_cfg)

        self.store = ad.ParamStore(self.dtype)
        self.gru_state = None

    def init_params(self, seed: int):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA11]))
        self.perception.init_params(self.store, rng)
        self.cont.init_params(self.store, rng)
        self.gate.init_params(self.store, rng)
        self.bank.init_params(self.store, rng)
        return self

    # -- groups ------------------------------------------------------------
    def critic_param_names(self):
        names = self.store.names("perc") + self.store.names("expert")
        if self.agent_cfg.n_experts > 1:
            names += self.store.names("gate")
        return names

    def actor_param_names(self):
        return self.store.names("cont")

    # -- rollout ------------------------------------------------------------
    def start_episode(self):
        self.gru_state = self.cont.zero_state(1, self.dtype)

    def act(self, obs, store=None, explore=False, epsilon=0.0, sigma_c=0.0, rng=None):
        """Greedy hybrid action with optional epsilon/Gaussian exploration.

        Returns (HybridAction, info) where info carries the selected
        experts, their weights, and the fused action values.
        """
        store = store or self.store
        if self.gru_state is None:
            self.start_episode()
        with ad.no_grad():
            z = self.perception.forward(store, obs, mode="eval")
            c, new_state = self.cont.act(store, z, self.gru_state, explore, sigma_c, rng)
            omega, alpha, _ = self.gate.select(store, z)
            q = fuse_q(store, self.bank, z, ad.as_tensor(c.astype(self.dtype)), omega, alpha)
        self.gru_state = new_state
        q_vals = q.data[0]
        if explore and rng is not None and epsilon > 0 and rng.random() < epsilon:
            d = int(rng.integers(N_MANEUVERS))
        else:
            d = int(discrete_greedy(q_vals))
        info = {"omega": omega[0], "alpha": alpha.data[0], "q": q_vals}
        return HybridAction(d, c[0]), info

    # -- latent helper ---------------------------------------------------------
    def encode(self, obs, store=None, mode="eval", rng=None):
        store = store or self.store
        return self.perception.forward(store, obs, mode=mode, rng=rng)
