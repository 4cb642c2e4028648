"""Factorized residual vector quantization.

Each layer projects the D-dim residual into a d-dim space, picks the
codebook row with the highest cosine similarity, and projects the raw row
back to D. The cascade subtracts each layer's contribution from the running
residual; the reconstruction is the running sum of contributions.

Training uses a straight-through estimator on the projected values, and the
residual cascade sees detached contributions, so the Jacobian of the
reconstruction w.r.t. the input latents along a fixed code path is exactly
sum_i out_proj_i @ in_proj_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import ucodec.kernels as K
from ucodec.errors import CorruptStreamError, ShapeError
from ucodec.kernels import Module, Parameter, Tensor

ZERO_NORM_EPS = 1e-8


def cosine_lookup(p: np.ndarray, codebook: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Most-cosine-similar codebook row per input row (any leading shape).

    Ties break to the lowest index; inputs with norm < 1e-8 map to row 0.
    Returns (indices, raw rows).
    """
    p = np.atleast_2d(p)
    lead = p.shape[:-1]
    flat = p.reshape(-1, p.shape[-1])
    norms = np.linalg.norm(flat, axis=1, keepdims=True)
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    cb_norms = np.linalg.norm(codebook, axis=1, keepdims=True)
    cb_unit = codebook / np.where(cb_norms == 0, 1.0, cb_norms)
    scores = (flat / safe) @ cb_unit.T
    idx = np.argmax(scores, axis=1)  # argmax returns the first (lowest) maximum
    idx = np.where(norms[:, 0] < ZERO_NORM_EPS, 0, idx).reshape(lead)
    return idx, codebook[idx]


@dataclass
class QuantizationResult:
    codes: np.ndarray          # T x N int
    quantized: Tensor          # T x D; taped when produced under a tape
    projected: list[Tensor]    # per layer: T x d projected residuals (p)
    selected: list[Tensor]     # per layer: T x d chosen code rows (taped to codebook)


class QuantizerLayer(Module):
    def __init__(self, rng, latent_dim: int, proj_dim: int, codebook_size: int,
                 dtype=np.float32, name: str = "vq"):
        scale = 1.0 / np.sqrt(latent_dim)
        self.in_proj = Parameter(rng.standard_normal((latent_dim, proj_dim)) * scale,
                                 name=f"{name}.in_proj", dtype=dtype)
        rows = rng.standard_normal((codebook_size, proj_dim))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        self.codebook = Parameter(rows, name=f"{name}.codebook", dtype=dtype)
        self.out_proj = Parameter(rng.standard_normal((proj_dim, latent_dim)) / np.sqrt(proj_dim),
                                  name=f"{name}.out_proj", dtype=dtype)

    def quantize(self, residual: Tensor) -> tuple[np.ndarray, Tensor, Tensor, Tensor]:
        """(indices, D-dim contribution, projected input p, selected rows c*)."""
        p = K.matmul(residual, self.in_proj)
        idx, rows = cosine_lookup(p.data, self.codebook.data)
        selected = K.rows(self.codebook, idx)
        st = K.straight_through(p, rows.astype(p.dtype))
        contribution = K.matmul(st, self.out_proj)
        return idx, contribution, p, selected


class ResidualQuantizer(Module):
    def __init__(self, rng, n_layers: int, latent_dim: int, proj_dim: int,
                 codebook_size: int, dtype=np.float32):
        if n_layers < 1:
            raise ShapeError(f"need at least one quantizer layer, got {n_layers}")
        self.layers = [
            QuantizerLayer(rng, latent_dim, proj_dim, codebook_size, dtype, name=f"vq{i}")
            for i in range(n_layers)
        ]
        self.codebook_size = codebook_size
        self.latent_dim = latent_dim

    def quantize(self, z: Tensor) -> QuantizationResult:
        """Full cascade over [T, D] latents (or batched [B, T, D])."""
        codes = []
        projected = []
        selected = []
        residual = z
        quantized = None
        for layer in self.layers:
            idx, contribution, p, sel = layer.quantize(residual)
            codes.append(idx)
            projected.append(p)
            selected.append(sel)
            quantized = contribution if quantized is None else K.add(quantized, contribution)
            # detach the subtracted value: the next layer's input gradient
            # path stays the identity back to z
            residual = K.sub(residual, K.tensor(contribution.data))
        return QuantizationResult(
            codes=np.stack(codes, axis=-1),
            quantized=quantized,
            projected=projected,
            selected=selected,
        )

    def dequantize(self, codes: np.ndarray) -> np.ndarray:
        """[T, N] code grid -> [T, D] latents, same arithmetic as quantize."""
        codes = np.asarray(codes)
        if codes.ndim != 2 or codes.shape[1] != len(self.layers):
            raise ShapeError(f"code grid {codes.shape} does not match {len(self.layers)} layers")
        if codes.min(initial=0) < 0 or codes.max(initial=0) >= self.codebook_size:
            raise CorruptStreamError(
                f"code id out of range [0, {self.codebook_size})"
            )
        out = None
        for i, layer in enumerate(self.layers):
            contribution = layer.codebook.data[codes[:, i]].astype(layer.out_proj.dtype) @ layer.out_proj.data
            out = contribution if out is None else out + contribution
        return out

    def quantize_with_codes(self, z: Tensor, codes: np.ndarray) -> Tensor:
        """Straight-through reconstruction along a fixed code path (no lookup)."""
        residual = z
        quantized = None
        for i, layer in enumerate(self.layers):
            p = K.matmul(residual, layer.in_proj)
            rows = layer.codebook.data[codes[:, i]]
            st = K.straight_through(p, rows.astype(p.dtype))
            contribution = K.matmul(st, layer.out_proj)
            quantized = contribution if quantized is None else K.add(quantized, contribution)
            residual = K.sub(residual, K.tensor(contribution.data))
        return quantized

    def make_frozen_surrogate(self, z0: np.ndarray, codes: np.ndarray):
        """Differentiable stand-in for the straight-through path at ``z0``.

        The hard quantizer's forward is piecewise constant, so its finite
        differences vanish; gradient checks instead probe this surrogate,
        whose value at ``z0`` equals the reconstruction and whose Jacobian
        everywhere equals the straight-through estimator (code rows and
        residual constants are captured at ``z0``).
        """
        offsets = []
        residual_consts = []
        residual = np.asarray(z0, dtype=np.float64)
        for i, layer in enumerate(self.layers):
            p0 = residual @ layer.in_proj.data
            rows = layer.codebook.data[codes[:, i]].astype(np.float64)
            offsets.append(rows - p0)
            contribution = rows @ layer.out_proj.data
            residual_consts.append(contribution)
            residual = residual - contribution

        def surrogate(z: Tensor) -> Tensor:
            r = z
            out = None
            for layer, off, rc in zip(self.layers, offsets, residual_consts):
                p = K.matmul(r, layer.in_proj)
                st = K.add(p, K.tensor(off.astype(p.dtype)))
                contribution = K.matmul(st, layer.out_proj)
                out = contribution if out is None else K.add(out, contribution)
                r = K.sub(r, K.tensor(rc.astype(p.dtype)))
            return out

        return surrogate


def codebook_usage(codes: np.ndarray, layer_index: int, codebook_size: int) -> tuple[np.ndarray, float]:
    """Per-code counts and the perplexity of the empirical usage distribution."""
    layer_codes = np.asarray(codes)[:, layer_index]
    hist = np.bincount(layer_codes, minlength=codebook_size)
    total = hist.sum()
    if total == 0:
        return hist, 0.0
    freq = hist / total
    nz = freq[freq > 0]
    entropy = -np.sum(nz * np.log(nz))
    return hist, float(np.exp(entropy))
