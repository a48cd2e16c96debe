"""Residual vector quantization over latent frames.

The quantizer is pure numpy: token selection is a hard argmin, so no
gradients pass through here. Training updates the codebooks by exponential
moving averages (decay 0.99) and the encoder by a straight-through
estimator applied by the caller.
"""

from __future__ import annotations

import numpy as np

from ..errors import CorruptionError, DimensionError
from .config import CodecConfig
from .tokens import TokenMatrix

EMA_DECAY = 0.99
DEAD_CODE_THRESHOLD = 1e-3
_LAPLACE_EPS = 1e-5


class Codebooks:
    """K stage codebooks of shape (C, D) plus their EMA statistics."""

    def __init__(self, vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 3:
            raise DimensionError(f"codebooks must be (K, C, D), got shape {vectors.shape}")
        self.vectors = vectors.copy()
        k, c, _ = vectors.shape
        # start as if each code had seen exactly one frame equal to itself
        self.ema_size = np.ones((k, c))
        self.ema_sum = vectors.copy()
        self.initialized = False  # flipped after seeding from real latents

    @classmethod
    def random(cls, config: CodecConfig, rng: np.random.Generator) -> "Codebooks":
        shape = (config.num_quantizers, config.codebook_size, config.latent_dim)
        return cls(rng.standard_normal(shape) * 0.1)

    @property
    def num_quantizers(self) -> int:
        return self.vectors.shape[0]

    @property
    def codebook_size(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]

    def seed_from_frames(self, frames: np.ndarray, rng: np.random.Generator) -> None:
        """Initialize every stage's code vectors from real latent frames."""
        k, c, _ = self.vectors.shape
        for j in range(k):
            picks = rng.choice(frames.shape[0], size=c, replace=frames.shape[0] < c)
            self.vectors[j] = frames[picks]
        self.ema_size[:] = 1.0
        self.ema_sum[:] = self.vectors
        self.initialized = True

    def state(self) -> dict:
        return {
            "codebooks.vectors": self.vectors,
            "codebooks.ema_size": self.ema_size,
            "codebooks.ema_sum": self.ema_sum,
            "codebooks.initialized": np.array(float(self.initialized)),
        }

    def load_state(self, state: dict) -> None:
        self.vectors = np.asarray(state["codebooks.vectors"], dtype=np.float64).copy()
        self.ema_size = np.asarray(state["codebooks.ema_size"], dtype=np.float64).copy()
        self.ema_sum = np.asarray(state["codebooks.ema_sum"], dtype=np.float64).copy()
        self.initialized = bool(state["codebooks.initialized"])


def _nearest(frames: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Argmin_c ||frame - table[c]||^2 per row; ties go to the lowest index.

    Expanding the square avoids the (T, C, D) distance tensor: the frame's
    own energy is constant across codes, so argmin(-2 f.E^T + ||E||^2)
    matches argmin of the true distance. Exact distances are recomputed for
    the winning pair only where needed.
    """
    scores = -2.0 * (frames @ table.T) + np.sum(table**2, axis=1)
    return np.argmin(scores, axis=1)


def rvq_cascade(latents: np.ndarray, codebooks: Codebooks, k: int) -> tuple:
    """Cascade k quantizer stages over (T, D) latents, keeping stage inputs.

    Returns (TokenMatrix (T, k), quantized sum (T, D), final residual (T, D),
    stage_inputs) where stage_inputs[j] is the residual fed to stage j; the
    EMA codebook update consumes those.
    """
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[1] != codebooks.dim:
        raise DimensionError(f"latents must be (T, {codebooks.dim}), got {latents.shape}")
    if not 1 <= k <= codebooks.num_quantizers:
        raise DimensionError(f"stage count {k} outside [1, {codebooks.num_quantizers}]")

    t = latents.shape[0]
    tokens = np.empty((t, k), dtype=np.int64)
    residual = latents.copy()
    quantized = np.zeros_like(latents)
    stage_inputs = []
    for j in range(k):
        table = codebooks.vectors[j]
        idx = _nearest(residual, table)
        stage_inputs.append(residual.copy())
        tokens[:, j] = idx
        chosen = table[idx]
        residual -= chosen
        quantized += chosen
    return TokenMatrix(tokens, codebooks.codebook_size), quantized, residual, stage_inputs


def rvq_quantize(latents: np.ndarray, codebooks: Codebooks, k: int) -> tuple:
    """Quantize (T, D) latents with the first k stages.

    Returns (TokenMatrix (T, k), quantized sum (T, D), final residual).
    Stage j quantizes the residual left by stages < j; ties in the
    nearest-neighbor search resolve to the lowest code index.
    """
    tm, quantized, residual, _ = rvq_cascade(latents, codebooks, k)
    return tm, quantized, residual


def lookup_sum(tm: TokenMatrix, codebooks: Codebooks, first_stage: int = 1, last_stage: int | None = None) -> np.ndarray:
    """Sum of code vectors over the 1-based inclusive stage range.

    lookup_sum(tm, cb, 1, 2) is the two-group summed embedding; the default
    covers every group present in the token matrix.
    """
    if last_stage is None:
        last_stage = tm.num_groups
    if not 1 <= first_stage <= last_stage <= tm.num_groups:
        raise DimensionError(f"stage range [{first_stage}..{last_stage}] invalid for {tm.num_groups} groups")
    if tm.num_groups > codebooks.num_quantizers:
        raise DimensionError(f"{tm.num_groups} token groups vs {codebooks.num_quantizers} codebooks")
    if tm.tokens.size and tm.tokens.max() >= codebooks.codebook_size:
        raise CorruptionError(f"token {tm.tokens.max()} outside [0, {codebooks.codebook_size})")

    out = np.zeros((tm.num_frames, codebooks.dim))
    for j in range(first_stage - 1, last_stage):
        out += codebooks.vectors[j][tm.tokens[:, j]]
    return out


def ema_update(codebooks: Codebooks, stage_inputs: list, tokens: np.ndarray, rng: np.random.Generator) -> int:
    """One EMA k-means step over all stages; returns reseeded dead-code count.

    stage_inputs[j] is the (T, D) residual fed to stage j (its quantizer
    input); tokens is the (T, k) assignment matrix from the same pass.
    """
    k = tokens.shape[1]
    frames = stage_inputs[0]
    reseeded = 0
    for j in range(k):
        onehot_counts = np.bincount(tokens[:, j], minlength=codebooks.codebook_size).astype(np.float64)
        sums = np.zeros_like(codebooks.ema_sum[j])
        np.add.at(sums, tokens[:, j], stage_inputs[j])

        codebooks.ema_size[j] = EMA_DECAY * codebooks.ema_size[j] + (1 - EMA_DECAY) * onehot_counts
        codebooks.ema_sum[j] = EMA_DECAY * codebooks.ema_sum[j] + (1 - EMA_DECAY) * sums

        dead = codebooks.ema_size[j] < DEAD_CODE_THRESHOLD
        if dead.any():
            picks = rng.choice(frames.shape[0], size=int(dead.sum()), replace=frames.shape[0] < int(dead.sum()))
            codebooks.vectors[j][dead] = frames[picks]
            codebooks.ema_size[j][dead] = 1.0
            codebooks.ema_sum[j][dead] = codebooks.vectors[j][dead]
            reseeded += int(dead.sum())
        alive = ~dead
        # Laplace smoothing keeps the division well-conditioned for rare codes
        n = codebooks.ema_size[j][alive]
        total = n.sum()
        smoothed = (n + _LAPLACE_EPS) / (total + codebooks.codebook_size * _LAPLACE_EPS) * total
        codebooks.vectors[j][alive] = codebooks.ema_sum[j][alive] / smoothed[:, None]
    return reseeded
