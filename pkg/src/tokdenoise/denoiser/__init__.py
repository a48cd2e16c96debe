from .config import DenoiserConfig
from .losses import er_loss, teacher_force, token_ce_loss
from .model import DenoiserModel, EmbeddingRefiner, TokenDenoiser, denoise_tokens, refine

__all__ = [
    "DenoiserConfig",
    "DenoiserModel",
    "EmbeddingRefiner",
    "TokenDenoiser",
    "denoise_tokens",
    "er_loss",
    "refine",
    "teacher_force",
    "token_ce_loss",
]
