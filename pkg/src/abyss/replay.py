"""Prioritized experience replay: ring storage over a sum tree.

Sampling is proportional to p_j^alpha with a stratified draw over
equal-mass segments; importance weights are (N P(j))^-beta normalized
by the batch maximum. Indices handed out by `sample` are global push
ordinals, so a later `update_priorities` can detect and skip entries
that were already overwritten.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotReady(RuntimeError):
    """Buffer does not yet hold enough transitions for a batch."""


@dataclass
class Transition:
    obs: np.ndarray          # raw observation (or latent z when store_latent)
    d: int
    c: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class SumTree:
    """Fixed-capacity binary sum tree over nonnegative leaf masses."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        size = 1
        while size < capacity:
            size *= 2
        self.base = size
        self.nodes = np.zeros(2 * size)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def leaf(self, idx: int) -> float:
        return float(self.nodes[self.base + idx])

    def set(self, idx: int, value: float):
        node = self.base + idx
        delta = value - self.nodes[node]
        while node >= 1:
            self.nodes[node] += delta
            node //= 2

    def find(self, mass: float) -> int:
        """Index of the leaf whose cumulative interval contains `mass`."""
        node = 1
        while node < self.base:
            left = 2 * node
            if mass < self.nodes[left]:
                node = left
            else:
                mass -= self.nodes[left]
                node = left + 1
        return min(node - self.base, self.capacity - 1)

    def recompute_root(self) -> float:
        """Sum of leaves, independent of the incremental updates."""
        return float(self.nodes[self.base:self.base + self.capacity].sum())


class PerBuffer:
    def __init__(self, capacity: int, alpha=0.6, eps_priority=1e-3):
        self.capacity = capacity
        self.alpha = alpha
        self.eps_priority = eps_priority
        self.tree = SumTree(capacity)
        self.storage: list = [None] * capacity
        self.uid_of_slot = np.full(capacity, -1, dtype=np.int64)
        self.raw_priority = np.zeros(capacity)
        self.max_priority = 1.0
        self.pushes = 0
        self.stale_updates = 0

    def __len__(self):
        return min(self.pushes, self.capacity)

    def push(self, transition: Transition):
        """Store with the current max priority; overwrite oldest when full."""
        slot = self.pushes % self.capacity
        self.storage[slot] = transition
        self.uid_of_slot[slot] = self.pushes
        self.raw_priority[slot] = self.max_priority
        self.tree.set(slot, self.max_priority ** self.alpha)
        self.pushes += 1

    def sample(self, batch: int, rng: np.random.Generator, beta: float = 0.4):
        """Stratified proportional draw.

        Returns (transitions, uids, weights); weights are in (0, 1].
        """
        n = len(self)
        if n < batch:
            raise NotReady(f"buffer holds {n} < batch {batch} transitions")
        total = self.tree.total
        bounds = np.linspace(0.0, total, batch + 1)
        masses = rng.uniform(bounds[:-1], bounds[1:])
        slots = np.array([self.tree.find(m) for m in masses], dtype=np.int64)
        probs = np.array([self.tree.leaf(s) for s in slots]) / total
        weights = (n * np.maximum(probs, 1e-12)) ** (-beta)
        weights = weights / weights.max()
        transitions = [self.storage[s] for s in slots]
        return transitions, self.uid_of_slot[slots].copy(), weights

    def update_priorities(self, uids, td_errors):
        """p_j <- |delta_j| + eps. Overwritten (stale) uids are skipped."""
        for uid, delta in zip(np.asarray(uids), np.asarray(td_errors)):
            slot = int(uid) % self.capacity
            if self.uid_of_slot[slot] != uid:
                self.stale_updates += 1
                continue
            p = abs(float(delta)) + self.eps_priority
            self.raw_priority[slot] = p
            self.tree.set(slot, p ** self.alpha)
            if p > self.max_priority:
                self.max_priority = p

    # -- persistence -----------------------------------------------------------
    def save(self, path):
        """Snapshot for resumable training (versioned npz layout)."""
        live = len(self)
        order = [(self.pushes - live + i) % self.capacity for i in range(live)]
        np.savez_compressed(
            path, version=1, capacity=self.capacity, alpha=self.alpha,
            eps_priority=self.eps_priority, pushes=self.pushes,
            max_priority=self.max_priority,
            raw_priority=self.raw_priority, uid_of_slot=self.uid_of_slot,
            obs=np.stack([self.storage[s].obs for s in order]) if live else np.zeros((0,)),
            d=np.array([self.storage[s].d for s in order], dtype=np.int64),
            c=np.stack([self.storage[s].c for s in order]) if live else np.zeros((0,)),
            reward=np.array([self.storage[s].reward for s in order]),
            next_obs=np.stack([self.storage[s].next_obs for s in order]) if live else np.zeros((0,)),
            done=np.array([self.storage[s].done for s in order]),
            slots=np.array(order, dtype=np.int64))

    @classmethod
    def load(cls, path) -> "PerBuffer":
        z = np.load(path, allow_pickle=False)
        if int(z["version"]) != 1:
            raise ValueError(f"unsupported buffer snapshot version {z['version']}")
        buf = cls(int(z["capacity"]), float(z["alpha"]), float(z["eps_priority"]))
        buf.pushes = int(z["pushes"])
        buf.max_priority = float(z["max_priority"])
        buf.raw_priority = z["raw_priority"].copy()
        buf.uid_of_slot = z["uid_of_slot"].copy()
        for i, slot in enumerate(z["slots"]):
            buf.storage[slot] = Transition(z["obs"][i], int(z["d"][i]), z["c"][i],
                                           float(z["reward"][i]), z["next_obs"][i], bool(z["done"][i]))
            buf.tree.set(int(slot), buf.raw_priority[slot] ** buf.alpha)
        return buf


def beta_schedule(beta0: float, beta_final: float, episode: int, total_episodes: int) -> float:
    """Linear importance-weight annealing over training."""
    frac = min(1.0, episode / max(1, total_episodes - 1))
    return beta0 + (beta_final - beta0) * frac
