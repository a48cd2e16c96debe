"""Training losses for the two models, plus teacher forcing.

Both losses use sum (not mean) reduction; trainers that want a per-frame
scale divide by a constant themselves so reported values stay comparable.
"""

from __future__ import annotations

import numpy as np

from ..codec.tokens import TokenMatrix
from ..errors import ConfigError, CorruptionError, DimensionError
from ..nn import Tensor, cross_entropy_from_logits


def token_ce_loss(logits: Tensor, clean_tokens) -> Tensor:
    """Summed cross entropy of clean tokens under the predicted logits.

    logits: (..., T, g, C); clean_tokens: TokenMatrix or integer array of
    shape (..., T, g). Returns the scalar sum over every (t, group) slot.
    """
    targets = clean_tokens.tokens if isinstance(clean_tokens, TokenMatrix) else np.asarray(clean_tokens)
    if targets.shape != logits.shape[:-1]:
        raise DimensionError(f"targets {targets.shape} vs logits {logits.shape}")
    c = logits.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= c):
        raise CorruptionError(f"clean token outside [0, {c})")
    return cross_entropy_from_logits(logits, targets)


def er_loss(predicted: Tensor, target) -> Tensor:
    """Embedding refinement loss: entrywise L1 plus the Frobenius norm.

    Both arguments are (T, D); target may be a plain array.
    """
    if not isinstance(target, Tensor):
        target = Tensor(target)
    if predicted.ndim != 2:
        raise DimensionError(f"er_loss expects (T, D) matrices, got {predicted.shape}")
    if predicted.shape != target.shape:
        raise DimensionError(f"shape mismatch: {predicted.shape} vs {target.shape}")
    delta = predicted - target
    return delta.abs().sum() + (delta**2).sum().sqrt()


def teacher_force(
    predicted_tokens: TokenMatrix,
    clean_tokens: TokenMatrix,
    p_replace: float,
    seed: int,
) -> TokenMatrix:
    """Replace each predicted entry by the clean one with probability p_replace.

    Replacement decisions are independent per (frame, group) entry and
    deterministic given the seed.
    """
    if not 0.0 <= p_replace <= 1.0:
        raise ConfigError(f"p_replace must be in [0, 1], got {p_replace}")
    if predicted_tokens.tokens.shape != clean_tokens.tokens.shape:
        raise DimensionError(
            f"token shapes differ: {predicted_tokens.tokens.shape} vs {clean_tokens.tokens.shape}"
        )
    if predicted_tokens.num_codes != clean_tokens.num_codes:
        raise DimensionError("token matrices use different codebook sizes")
    mask = np.random.default_rng(seed).random(predicted_tokens.tokens.shape) < p_replace
    merged = np.where(mask, clean_tokens.tokens, predicted_tokens.tokens)
    return TokenMatrix(merged, predicted_tokens.num_codes)
