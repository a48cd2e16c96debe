from .ablation import ablate_groups, ablation_table
from .enhance import enhance, enhance_tokens_only
from .evaluate import EvalReport, evaluate
from .flops import FlopsBreakdown, flops_estimate
from .metrics import SI_SNR_CAP_DB, log_spectral_distance, si_snr, token_accuracy
from .training import TrainConfig, encode_split_tokens, joint_step_loss, total_loss, train_denoiser

__all__ = [
    "EvalReport",
    "FlopsBreakdown",
    "SI_SNR_CAP_DB",
    "TrainConfig",
    "ablate_groups",
    "ablation_table",
    "encode_split_tokens",
    "enhance",
    "enhance_tokens_only",
    "evaluate",
    "flops_estimate",
    "joint_step_loss",
    "log_spectral_distance",
    "si_snr",
    "token_accuracy",
    "total_loss",
    "train_denoiser",
]
