"""Pre-LN transformer stack shared by the codec bottleneck and the token LM.

GELU feed-forward, RoPE inside attention, optional causal masking, and an
optional per-layer key/value cache for incremental decoding.
"""

from __future__ import annotations

import numpy as np

import ucodec.kernels as K
from ucodec.kernels import Module, Parameter, Tensor


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int,
                 dtype=np.float32, name: str = "linear"):
        scale = 1.0 / np.sqrt(d_in)
        self.w = Parameter(rng.standard_normal((d_in, d_out)) * scale, name=f"{name}.w", dtype=dtype)
        self.b = Parameter(np.zeros(d_out), name=f"{name}.b", dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return K.add(K.matmul(x, self.w), self.b)


class LayerNormParams(Module):
    def __init__(self, dim: int, dtype=np.float32, name: str = "ln"):
        self.gamma = Parameter(np.ones(dim), name=f"{name}.gamma", dtype=dtype)
        self.beta = Parameter(np.zeros(dim), name=f"{name}.beta", dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return K.layer_norm(x, self.gamma, self.beta)


class TransformerLayer(Module):
    def __init__(self, rng, d_model: int, heads: int, ff_dim: int, dtype=np.float32):
        self.ln_attn = LayerNormParams(d_model, dtype)
        self.wq = Linear(rng, d_model, d_model, dtype, "wq")
        self.wk = Linear(rng, d_model, d_model, dtype, "wk")
        self.wv = Linear(rng, d_model, d_model, dtype, "wv")
        self.wo = Linear(rng, d_model, d_model, dtype, "wo")
        self.ln_mlp = LayerNormParams(d_model, dtype)
        self.fc_in = Linear(rng, d_model, ff_dim, dtype, "fc_in")
        self.fc_out = Linear(rng, ff_dim, d_model, dtype, "fc_out")
        self.heads = heads

    def _split(self, x: Tensor) -> Tensor:
        """[..., L, d] -> [batch*heads, L, head_dim]."""
        head_dim = x.data.shape[-1] // self.heads
        if x.ndim == 2:
            length = x.data.shape[0]
            return K.transpose(K.reshape(x, (length, self.heads, head_dim)), (1, 0, 2))
        nb, length, _ = x.data.shape
        split = K.reshape(x, (nb, length, self.heads, head_dim))
        return K.reshape(K.transpose(split, (0, 2, 1, 3)), (nb * self.heads, length, head_dim))

    def _merge(self, att: Tensor, like_shape: tuple) -> Tensor:
        if len(like_shape) == 2:
            return K.reshape(K.transpose(att, (1, 0, 2)), like_shape)
        nb, length, d_model = like_shape
        head_dim = d_model // self.heads
        merged = K.reshape(att, (nb, self.heads, length, head_dim))
        return K.reshape(K.transpose(merged, (0, 2, 1, 3)), like_shape)

    def __call__(self, x: Tensor, causal: bool, cache: dict | None = None) -> Tensor:
        if cache is not None and x.ndim != 2:
            raise ValueError("incremental decoding is unbatched")
        h = self.ln_attn(x)
        q = self._split(self.wq(h))
        k = self._split(self.wk(h))
        v = self._split(self.wv(h))
        if cache is not None:
            if cache.get("k") is not None:
                k = K.concat([cache["k"], k], axis=1)
                v = K.concat([cache["v"], v], axis=1)
            cache["k"], cache["v"] = k, v
        att = K.attention(q, k, v, causal=causal)
        x = K.add(x, self.wo(self._merge(att, x.data.shape)))
        h = self.ln_mlp(x)
        return K.add(x, self.fc_out(K.gelu(self.fc_in(h))))


class TransformerStack(Module):
    """``layers`` pre-LN blocks plus a final LayerNorm."""

    def __init__(self, rng, layers: int, d_model: int, heads: int, ff_dim: int,
                 dtype=np.float32):
        if d_model % heads:
            raise ValueError(f"d_model {d_model} not divisible by heads {heads}")
        self.blocks = [TransformerLayer(rng, d_model, heads, ff_dim, dtype)
                       for _ in range(layers)]
        self.ln_out = LayerNormParams(d_model, dtype)

    def make_cache(self) -> list[dict]:
        return [{"k": None, "v": None} for _ in self.blocks]

    def __call__(self, x: Tensor, causal: bool = True,
                 cache: list[dict] | None = None) -> Tensor:
        for i, block in enumerate(self.blocks):
            x = block(x, causal=causal, cache=None if cache is None else cache[i])
        return self.ln_out(x)
