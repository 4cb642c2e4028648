"""Hierarchical autoregressive model over token grids.

A causal global transformer runs over one position per frame (text prefix,
then a BOS marker, then one summed patch embedding per frame), so its length
is |text| + T + 1 regardless of how many quantizer layers each frame holds.
A causal local transformer, conditioned on the global hidden state, predicts
the N codes inside the next frame one at a time. Layer 1's output vocabulary
carries one extra id used as end-of-sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import ucodec.kernels as K
from ucodec.errors import CompatibilityError, ShapeError
from ucodec.kernels import Module, Parameter, Tensor
from ucodec.transformer import Linear, TransformerStack


@dataclass(frozen=True)
class LmConfig:
    n_quantizers: int = 4
    codebook_size: int = 64
    text_vocab: int = 256
    global_layers: int = 2
    global_dim: int = 128
    global_heads: int = 4
    global_ff: int = 512
    local_layers: int = 2
    local_dim: int = 128
    local_heads: int = 4
    local_ff: int = 512
    max_seq: int = 4096
    k_top: int = 5
    temperature: float = 1.0

    # paper-scale reference dims (for complexity accounting, not instantiation):
    # global 24 layers / 1536 dim / 12 heads / 6144 ff, local 8 layers.

    def __post_init__(self):
        if self.n_quantizers < 1 or self.codebook_size < 2:
            raise ShapeError("need n_quantizers >= 1 and codebook_size >= 2")
        if self.global_dim % self.global_heads or self.local_dim % self.local_heads:
            raise ShapeError("model dims must divide head counts")


def top_k_sample(logits: np.ndarray, k_top: int, temperature: float,
                 rng: np.random.Generator | None) -> int:
    """Multinomial draw over the renormalized top-k of softmax(logits / T)."""
    if k_top < 1:
        raise ValueError(f"k_top must be >= 1, got {k_top}")
    if k_top == 1:
        return int(np.argmax(logits))
    if temperature <= 0:
        raise ValueError("temperature must be positive when k_top > 1")
    if rng is None:
        raise ValueError("sampling with k_top > 1 needs an rng")
    scaled = logits.astype(np.float64) / temperature
    k_top = min(k_top, scaled.size)
    keep = np.argsort(-scaled, kind="stable")[:k_top]
    z = scaled[keep] - scaled[keep].max()
    probs = np.exp(z)
    probs /= probs.sum()
    draw = min(int(np.searchsorted(np.cumsum(probs), rng.random(), side="right")),
               k_top - 1)
    return int(keep[draw])


class HierLm(Module):
    def __init__(self, cfg: LmConfig, rng=None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        n, c, gd, ld = cfg.n_quantizers, cfg.codebook_size, cfg.global_dim, cfg.local_dim
        self.text_embed = Parameter(rng.standard_normal((cfg.text_vocab, gd)) * 0.02,
                                    name="text_embed", dtype=dtype)
        self.bos_embed = Parameter(rng.standard_normal((1, gd)) * 0.02,
                                   name="bos_embed", dtype=dtype)
        self.code_embeds = [Parameter(rng.standard_normal((c, gd)) * 0.02,
                                      name=f"code_embed.{k}", dtype=dtype)
                            for k in range(n)]
        self.global_tf = TransformerStack(rng, cfg.global_layers, gd,
                                          cfg.global_heads, cfg.global_ff, dtype)
        self.cond = Linear(rng, gd, ld, dtype, "cond")
        self.local_in = [Parameter(rng.standard_normal((c, ld)) * 0.02,
                                   name=f"local_in.{k}", dtype=dtype)
                         for k in range(n - 1)]
        self.local_tf = TransformerStack(rng, cfg.local_layers, ld,
                                         cfg.local_heads, cfg.local_ff, dtype)
        self.heads = [Linear(rng, ld, c + 1 if k == 0 else c, dtype, f"head.{k}")
                      for k in range(n)]
        self.global_positions = 0  # instrumentation: positions forwarded

    @property
    def eos_id(self) -> int:
        return self.cfg.codebook_size

    # -- embedding ----------------------------------------------------------

    def embed_grid(self, grid: np.ndarray) -> Tensor:
        """[T, N] codes -> [T, d] summed per-layer embeddings."""
        grid = np.asarray(grid)
        if grid.ndim != 2 or grid.shape[1] != self.cfg.n_quantizers:
            raise ShapeError(f"grid {grid.shape} does not have {self.cfg.n_quantizers} layers")
        out = None
        for k, table in enumerate(self.code_embeds):
            term = K.rows(table, grid[:, k])
            out = term if out is None else K.add(out, term)
        return out

    def embed_patch(self, codes) -> Tensor:
        """One frame's N codes -> its global d-dim embedding (sum of lookups)."""
        return K.reshape(self.embed_grid(np.asarray(codes)[None, :]), (-1,))

    # -- global model --------------------------------------------------------

    def _prefix_embeddings(self, text_ids, grid: np.ndarray | None) -> Tensor:
        parts = []
        text_ids = np.asarray(text_ids, dtype=int)
        if text_ids.size:
            parts.append(K.rows(self.text_embed, text_ids))
        parts.append(self.bos_embed)
        if grid is not None and len(grid):
            parts.append(self.embed_grid(grid))
        return K.concat(parts, axis=0) if len(parts) > 1 else parts[0]

    def global_hidden(self, text_ids, grid: np.ndarray) -> Tensor:
        """Hidden states over the full layout [text, BOS, patches]."""
        embs = self._prefix_embeddings(text_ids, grid)
        total = embs.data.shape[0]
        if total > self.cfg.max_seq:
            raise ValueError(f"global sequence length {total} exceeds max {self.cfg.max_seq}")
        self.global_positions += total
        return self.global_tf(embs, causal=True)

    # -- local model ---------------------------------------------------------

    def _local_inputs(self, h_t: Tensor, partial_codes) -> Tensor:
        rows = [self.cond(K.reshape(h_t, (1, -1)))]
        for k, code in enumerate(partial_codes):
            rows.append(K.rows(self.local_in[k], np.array([code])))
        return K.concat(rows, axis=0) if len(rows) > 1 else rows[0]

    def local_logits(self, h_t: Tensor, partial_codes) -> Tensor:
        """Logits for layer k = len(partial_codes) + 1 of the next frame."""
        k = len(partial_codes)
        if k >= self.cfg.n_quantizers:
            raise ValueError(f"layer index {k + 1} beyond {self.cfg.n_quantizers} quantizers")
        hidden = self.local_tf(self._local_inputs(h_t, partial_codes), causal=True)
        return K.reshape(K.narrow(hidden, 0, k, 1), (-1,)) @ self.heads[k].w + self.heads[k].b

    def patch_losses(self, h_t: Tensor, target_codes, eos: bool = False) -> list[Tensor]:
        """Teacher-forced cross-entropies for one frame (or the EOS frame)."""
        if eos:
            logits = self.local_logits(h_t, [])
            return [K.cross_entropy(logits, self.eos_id)]
        hidden = self.local_tf(self._local_inputs(h_t, target_codes[:-1]), causal=True)
        losses = []
        for k, target in enumerate(target_codes):
            logits = K.reshape(K.narrow(hidden, 0, k, 1), (-1,)) @ self.heads[k].w + self.heads[k].b
            losses.append(K.cross_entropy(logits, int(target)))
        return losses

    # -- training ------------------------------------------------------------

    def sequence_nll(self, text_ids, grid: np.ndarray) -> Tensor:
        """Mean teacher-forced cross-entropy over all speech token positions
        (text positions excluded; the EOS frame contributes one position)."""
        grid = np.asarray(grid)
        n_text = len(np.asarray(text_ids))
        hidden = self.global_hidden(text_ids, grid)
        losses = []
        for t in range(len(grid)):
            h_t = K.narrow(hidden, 0, n_text + t, 1)
            losses.extend(self.patch_losses(h_t, grid[t]))
        h_last = K.narrow(hidden, 0, n_text + len(grid), 1)
        losses.extend(self.patch_losses(h_last, None, eos=True))
        total = losses[0]
        for item in losses[1:]:
            total = K.add(total, item)
        return K.mul(total, 1.0 / len(losses))

    # -- generation ----------------------------------------------------------

    def sample_patch(self, h_t: Tensor, rng: np.random.Generator | None,
                     k_top: int = 5, temperature: float = 1.0,
                     allow_eos: bool = True) -> np.ndarray | None:
        """Draw one frame's codes layer by layer; None signals end-of-sequence."""
        codes = []
        cache = self.local_tf.make_cache()
        step = self.cond(K.reshape(h_t, (1, -1)))
        for k in range(self.cfg.n_quantizers):
            hidden = self.local_tf(step, causal=True, cache=cache)
            logits = (K.reshape(hidden, (-1,)) @ self.heads[k].w + self.heads[k].b).data
            if k == 0 and not allow_eos:
                logits = logits[:-1]
            pick = top_k_sample(logits, k_top, temperature, rng)
            if k == 0 and pick == self.eos_id:
                return None
            codes.append(pick)
            if k < self.cfg.n_quantizers - 1:
                step = K.rows(self.local_in[k], np.array([pick]))
        return np.array(codes, dtype=np.int64)

    def synthesize(self, text_ids, prompt_grid: np.ndarray | None = None,
                   max_frames: int = 1, min_frames: int = 0,
                   rng: np.random.Generator | None = None,
                   k_top: int | None = None, temperature: float | None = None) -> np.ndarray:
        """Autoregressively generate up to ``max_frames`` new frames.

        The prompt grid is consumed as fixed conditioning patches; only newly
        generated frames are returned. Stops early on layer-1 EOS once
        ``min_frames`` frames exist.
        """
        if max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        k_top = self.cfg.k_top if k_top is None else k_top
        temperature = self.cfg.temperature if temperature is None else temperature

        with K.no_grad():
            cache = self.global_tf.make_cache()
            prefix = self._prefix_embeddings(text_ids, prompt_grid)
            self.global_positions += prefix.data.shape[0]
            hidden = self.global_tf(prefix, causal=True, cache=cache)
            h_last = K.narrow(hidden, 0, hidden.data.shape[0] - 1, 1)

            frames: list[np.ndarray] = []
            for t in range(max_frames):
                codes = self.sample_patch(h_last, rng, k_top, temperature,
                                          allow_eos=len(frames) >= min_frames)
                if codes is None:
                    break
                frames.append(codes)
                if t + 1 < max_frames:
                    step = self.embed_grid(codes[None, :])
                    self.global_positions += 1
                    h_last = self.global_tf(step, causal=True, cache=cache)
        return np.stack(frames) if frames else np.zeros((0, self.cfg.n_quantizers), dtype=np.int64)


def check_lm_codec_compat(lm_cfg: LmConfig, n_quantizers: int, codebook_size: int) -> None:
    if lm_cfg.n_quantizers != n_quantizers or lm_cfg.codebook_size != codebook_size:
        raise CompatibilityError(
            f"LM expects {lm_cfg.n_quantizers} layers x {lm_cfg.codebook_size} codes, "
            f"codec provides {n_quantizers} x {codebook_size}"
        )


class LmTrainer:
    """Adam on the sequence NLL, one (text, grid) pair per step."""

    def __init__(self, model: HierLm, lr: float = 1e-3, warmup_steps: int = 100):
        from ucodec.kernels import Adam  # local import keeps module load light

        self.model = model
        self.lr = lr
        self.warmup_steps = warmup_steps
        self.opt = Adam(model.parameters(), lr)
        self.step_count = 0

    def train_step(self, text_ids, grid: np.ndarray) -> dict:
        from ucodec.errors import TrainingDivergenceError
        from ucodec.kernels import Tape, warmup_lr

        self.step_count += 1
        lr = warmup_lr(self.lr, self.step_count, self.warmup_steps)
        self.opt.zero_grad()
        with Tape() as tape:
            nll = self.model.sequence_nll(text_ids, grid)
        tape.backward(nll)
        self.opt.step(lr)
        value = nll.item()
        if not np.isfinite(value):
            raise TrainingDivergenceError(f"non-finite nll at step {self.step_count}")
        return {"step": self.step_count, "nll": value, "lr": lr}
