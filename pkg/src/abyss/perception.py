"""Observation encoding: four specialized encoders, shared-space
projection, multi-head self-attention over the 4-token sequence, and a
feedforward fusion head producing the policy embedding z.

Each semantic segment is processed only by its own encoder:

    space    GELU blocks with residual + LayerNorm
    motion   Swish blocks with GroupNorm
    barrier  ReLU residual blocks with LayerNorm
    noise    ReLU blocks with BatchNorm (eval stats for single steps)

Tokens are rows of a (4, n) sequence in fixed order (sp, mot, bar,
noise); the sequence length is constant so no positional encoding is
used.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import AgentConfig
from .env.world import SegmentMap

MODALITIES = ("sp", "mot", "bar", "noise")


class Perception:
    prefix = "perc"

    def __init__(self, cfg: AgentConfig, seg: SegmentMap):
        if cfg.token_dim % cfg.n_heads != 0:
            raise ad.ConfigurationError(
                f"{cfg.n_heads} heads do not divide token width {cfg.token_dim}")
        if cfg.encoder_width % cfg.groupnorm_groups != 0:
            raise ad.ConfigurationError(
                f"{cfg.groupnorm_groups} groups do not divide encoder width {cfg.encoder_width}")
        self.cfg = cfg
        self.seg = seg
        self.head_dim = cfg.token_dim // cfg.n_heads
        self.flat_dim = 4 * cfg.token_dim

    # -- parameters -----------------------------------------------------------
    def init_params(self, store: ad.ParamStore, rng: np.random.Generator):
        cfg, p = self.cfg, self.prefix
        widths = {"sp": self.seg.sp, "mot": self.seg.mot, "bar": self.seg.bar, "noise": self.seg.noise}
        for mod, sl in widths.items():
            seg_w = sl.stop - sl.start
            ad.init_affine(store, rng, f"{p}/enc/{mod}/stem", seg_w, cfg.encoder_width)
            for layer in range(cfg.encoder_depth):
                ad.init_affine(store, rng, f"{p}/enc/{mod}/b{layer}/aff", cfg.encoder_width, cfg.encoder_width)
                if mod in ("sp", "bar"):
                    ad.init_norm(store, f"{p}/enc/{mod}/b{layer}/ln", cfg.encoder_width)
                elif mod == "mot":
                    ad.init_norm(store, f"{p}/enc/{mod}/b{layer}/gn", cfg.encoder_width)
                else:
                    ad.init_norm(store, f"{p}/enc/{mod}/b{layer}/bn", cfg.encoder_width)
                    store.add_buffer(f"{p}/enc/{mod}/b{layer}/bn", ad.BatchNormState(cfg.encoder_width))
            ad.init_affine(store, rng, f"{p}/proj/{mod}", cfg.encoder_width, cfg.token_dim)

        n = cfg.token_dim
        for name in ("wq", "wk", "wv", "wo"):
            store.add(f"{p}/attn/{name}", ad.uniform_fan_in(rng, n, (n, n)))
        ad.init_affine(store, rng, f"{p}/ffn/l1", n, cfg.ffn_dim)
        ad.init_affine(store, rng, f"{p}/ffn/l2", cfg.ffn_dim, cfg.ffn_dim)
        ad.init_affine(store, rng, f"{p}/ffn/l3", cfg.ffn_dim, n)
        ad.init_norm(store, f"{p}/ffn/ln", n)

        d1, d2 = cfg.proj_dims
        ad.init_affine(store, rng, f"{p}/head/l1", self.flat_dim, d1)
        ad.init_norm(store, f"{p}/head/ln1", d1)
        ad.init_affine(store, rng, f"{p}/head/l2", d1, d2)
        ad.init_norm(store, f"{p}/head/ln2", d2)
        ad.init_affine(store, rng, f"{p}/head/l3", d2, cfg.embed_dim)

    # -- forward ---------------------------------------------------------------
    def _encode_modality(self, store, mod, x, train, rng):
        cfg, p = self.cfg, self.prefix
        h = ad.affine(x, store[f"{p}/enc/{mod}/stem/w"], store[f"{p}/enc/{mod}/stem/b"])
        for layer in range(cfg.encoder_depth):
            base = f"{p}/enc/{mod}/b{layer}"
            pre = ad.affine(h, store[f"{base}/aff/w"], store[f"{base}/aff/b"])
            if mod == "sp":
                h = ad.layer_norm(h + ad.gelu(pre), store[f"{base}/ln/gamma"], store[f"{base}/ln/beta"])
            elif mod == "bar":
                h = ad.layer_norm(h + ad.relu(pre), store[f"{base}/ln/gamma"], store[f"{base}/ln/beta"])
            elif mod == "mot":
                h = ad.group_norm(ad.swish(pre), store[f"{base}/gn/gamma"], store[f"{base}/gn/beta"],
                                  groups=cfg.groupnorm_groups)
            else:
                h = ad.batch_norm(ad.relu(pre), store[f"{base}/bn/gamma"], store[f"{base}/bn/beta"],
                                  store.buffers[f"{base}/bn"], momentum=cfg.bn_momentum, train=train)
        return ad.affine(h, store[f"{p}/proj/{mod}/w"], store[f"{p}/proj/{mod}/b"])

    def encode(self, store, obs, mode="eval", rng=None):
        """Segment the observation and produce the (B, 4, n) token stack.

        BatchNorm only sees batch statistics in train mode with a real
        batch; single-observation calls always run on running stats.
        """
        obs = np.atleast_2d(np.asarray(obs))
        if obs.shape[1] != self.seg.total:
            raise ad.DimensionError(f"observation width {obs.shape[1]} != segment map total {self.seg.total}")
        x = ad.Tensor(obs.astype(_np_dtype(store)))
        train = mode == "train" and obs.shape[0] > 1
        tokens = [self._encode_modality(store, mod, x[:, getattr(self.seg, mod)], train, rng)
                  for mod in MODALITIES]
        stacked = ad.concat([ad.reshape(t, (obs.shape[0], 1, self.cfg.token_dim)) for t in tokens], axis=1)
        return stacked

    def attend_fuse(self, store, tokens, mode="eval", rng=None):
        """Self-attention across the four tokens, FFN with residual, and
        the projection stack down to the policy embedding."""
        cfg, p = self.cfg, self.prefix
        b = tokens.shape[0]
        h, dh, n = cfg.n_heads, self.head_dim, cfg.token_dim
        train = mode == "train"

        def heads(name):
            m = ad.matmul(tokens, store[f"{p}/attn/{name}"])
            return ad.transpose(ad.reshape(m, (b, 4, h, dh)), (0, 2, 1, 3))

        q, k, v = heads("wq"), heads("wk"), heads("wv")
        scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
        attn = ad.softmax(scores, axis=-1)
        mixed = ad.matmul(attn, v)
        mixed = ad.reshape(ad.transpose(mixed, (0, 2, 1, 3)), (b, 4, n))
        m_fused = ad.matmul(mixed, store[f"{p}/attn/wo"])

        z1 = ad.gelu(ad.affine(m_fused, store[f"{p}/ffn/l1/w"], store[f"{p}/ffn/l1/b"]))
        z2 = ad.dropout(ad.gelu(ad.affine(z1, store[f"{p}/ffn/l2/w"], store[f"{p}/ffn/l2/b"])),
                        cfg.dropout, train, rng)
        z3 = ad.affine(z2, store[f"{p}/ffn/l3/w"], store[f"{p}/ffn/l3/b"])
        z_seq = ad.layer_norm(z3, store[f"{p}/ffn/ln/gamma"], store[f"{p}/ffn/ln/beta"]) + m_fused

        flat = ad.reshape(z_seq, (b, self.flat_dim))
        h1 = ad.layer_norm(ad.gelu(ad.affine(flat, store[f"{p}/head/l1/w"], store[f"{p}/head/l1/b"])),
                           store[f"{p}/head/ln1/gamma"], store[f"{p}/head/ln1/beta"])
        h2 = ad.dropout(ad.gelu(ad.affine(h1, store[f"{p}/head/l2/w"], store[f"{p}/head/l2/b"])),
                        cfg.dropout, train, rng)
        h2 = ad.layer_norm(h2, store[f"{p}/head/ln2/gamma"], store[f"{p}/head/ln2/beta"])
        return ad.affine(h2, store[f"{p}/head/l3/w"], store[f"{p}/head/l3/b"])

    def forward(self, store, obs, mode="eval", rng=None):
        return self.attend_fuse(store, self.encode(store, obs, mode, rng), mode, rng)

    def attention_weights(self, store, obs):
        """Eval-mode attention maps, (B, heads, 4, 4), for diagnostics."""
        cfg, p = self.cfg, self.prefix
        with ad.no_grad():
            tokens = self.encode(store, obs, "eval")
            b = tokens.shape[0]
            h, dh = cfg.n_heads, self.head_dim

            def heads(name):
                m = ad.matmul(tokens, store[f"{p}/attn/{name}"])
                return ad.transpose(ad.reshape(m, (b, 4, h, dh)), (0, 2, 1, 3))

            scores = ad.matmul(heads("wq"), ad.transpose(heads("wk"), (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
            return ad.softmax(scores, axis=-1).data


class ConcatMlpPerception:
    """Attention-free baseline: concatenate all segments into one MLP
    whose trainable parameter count matches the full stack within 10%."""

    prefix = "perc"

    def __init__(self, cfg: AgentConfig, seg: SegmentMap):
        self.cfg = cfg
        self.seg = seg
        self.hidden = _match_budget(cfg, seg)

    def init_params(self, store: ad.ParamStore, rng):
        d, h, p = self.seg.total, self.hidden, self.prefix
        ad.init_affine(store, rng, f"{p}/mlp/l1", d, h)
        ad.init_norm(store, f"{p}/mlp/ln1", h)
        ad.init_affine(store, rng, f"{p}/mlp/l2", h, h)
        ad.init_norm(store, f"{p}/mlp/ln2", h)
        ad.init_affine(store, rng, f"{p}/mlp/l3", h, self.cfg.embed_dim)

    def forward(self, store, obs, mode="eval", rng=None):
        obs = np.atleast_2d(np.asarray(obs))
        if obs.shape[1] != self.seg.total:
            raise ad.DimensionError(f"observation width {obs.shape[1]} != segment map total {self.seg.total}")
        p = self.prefix
        train = mode == "train"
        x = ad.Tensor(obs.astype(_np_dtype(store)))
        h = ad.layer_norm(ad.gelu(ad.affine(x, store[f"{p}/mlp/l1/w"], store[f"{p}/mlp/l1/b"])),
                          store[f"{p}/mlp/ln1/gamma"], store[f"{p}/mlp/ln1/beta"])
        h = ad.dropout(h, self.cfg.dropout, train, rng)
        h = ad.layer_norm(ad.gelu(ad.affine(h, store[f"{p}/mlp/l2/w"], store[f"{p}/mlp/l2/b"])),
                          store[f"{p}/mlp/ln2/gamma"], store[f"{p}/mlp/ln2/beta"])
        return ad.affine(h, store[f"{p}/mlp/l3/w"], store[f"{p}/mlp/l3/b"])


def _np_dtype(store: ad.ParamStore):
    return store.dtype


def perception_param_count(cfg: AgentConfig, seg: SegmentMap) -> int:
    probe = ad.ParamStore(np.float32)
    Perception(cfg, seg).init_params(probe, np.random.default_rng(0))
    return probe.n_params()


def _match_budget(cfg: AgentConfig, seg: SegmentMap) -> int:
    target = perception_param_count(cfg, seg)
    d, e = seg.total, cfg.embed_dim

    def count(h):
        return (d * h + h) + 2 * h + (h * h + h) + 2 * h + (h * e + e)

    lo, hi = 4, 4096
    while lo < hi:
        mid = (lo + hi) // 2
        if count(mid) < target:
            lo = mid + 1
        else:
            hi = mid
    best = min((abs(count(h) - target), h) for h in (lo - 1, lo, lo + 1) if h >= 4)[1]
    if abs(count(best) - target) > 0.10 * target:
        raise ad.ConfigurationError("could not match the perception parameter budget within 10%")
    return best
