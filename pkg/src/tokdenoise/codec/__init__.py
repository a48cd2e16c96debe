from .config import CodecConfig
from .model import CodecModel, Decoder, Encoder
from .quantizer import (
    DEAD_CODE_THRESHOLD,
    EMA_DECAY,
    Codebooks,
    ema_update,
    lookup_sum,
    rvq_cascade,
    rvq_quantize,
)
from .tokens import TokenMatrix, read_tokens, write_tokens
from .training import (
    STFT_RESOLUTIONS,
    CodecTrainConfig,
    batch_losses,
    train_codec,
    validation_mse_by_stage,
)

__all__ = [
    "Codebooks",
    "CodecConfig",
    "CodecModel",
    "CodecTrainConfig",
    "DEAD_CODE_THRESHOLD",
    "Decoder",
    "EMA_DECAY",
    "Encoder",
    "STFT_RESOLUTIONS",
    "TokenMatrix",
    "batch_losses",
    "ema_update",
    "lookup_sum",
    "read_tokens",
    "rvq_cascade",
    "rvq_quantize",
    "train_codec",
    "validation_mse_by_stage",
    "write_tokens",
]
