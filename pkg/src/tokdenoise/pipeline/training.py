"""Joint denoiser training against a frozen codec.

The codec runs once up front to turn the corpus into paired noisy/clean
token tensors; after that every step is pure sequence modeling. The
combined objective is the weighted sum of the token cross entropy and the
embedding refinement loss. Internally the trainer divides that sum by the
slot count (groups * frames) so the step size does not scale with sequence
length; reported curves keep the raw sum convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio.corpus import load_split_waveforms
from ..codec.model import CodecModel
from ..codec.quantizer import rvq_cascade
from ..codec.tokens import TokenMatrix
from ..denoiser.config import DenoiserConfig
from ..denoiser.losses import teacher_force, token_ce_loss
from ..denoiser.model import DenoiserModel
from ..errors import ConfigError, NumericError
from ..nn import Adam, Tensor, no_grad, warmup_lr


@dataclass
class TrainConfig:
    lambda_ce: float = 1.0
    lambda_er: float = 0.5
    epochs: int = 4
    batch_size: int = 16
    peak_lr: float = 1e-3
    warmup_steps: int = 200
    p_replace: float = 0.5
    seed: int = 0
    max_clips: int | None = None  # cap the train split (smoke tests)

    def __post_init__(self):
        if self.lambda_ce < 0 or self.lambda_er < 0:
            raise ConfigError("loss weights must be >= 0")
        if not 0.0 <= self.p_replace <= 1.0:
            raise ConfigError(f"p_replace must be in [0, 1], got {self.p_replace}")


def total_loss(l_ce, l_er, lambda_ce: float = 1.0, lambda_er: float = 0.5):
    """Weighted-sum objective; works on floats and Tensors alike."""
    return l_ce * lambda_ce + l_er * lambda_er


def encode_split_tokens(codec: CodecModel, clips: np.ndarray, batch_size: int = 32) -> np.ndarray:
    """(N, L) waveforms -> (N, T, K) token tensor through the frozen codec."""
    k = codec.config.num_quantizers
    out = []
    with no_grad():
        for start in range(0, clips.shape[0], batch_size):
            x = clips[start : start + batch_size]
            z = codec.encode_batch(Tensor(x[:, None, :])).data  # (B, T, D)
            tm, _, _, _ = rvq_cascade(z.reshape(-1, z.shape[-1]), codec.codebooks, k)
            out.append(tm.tokens.reshape(z.shape[0], z.shape[1], k))
    return np.concatenate(out)


def _embed(codebooks, tokens: np.ndarray, groups: int) -> np.ndarray:
    """Summed code vectors of the first `groups` stages; tokens (..., K)."""
    out = codebooks.vectors[0][tokens[..., 0]]
    for j in range(1, groups):
        out = out + codebooks.vectors[j][tokens[..., j]]
    return out


def joint_step_loss(
    model: DenoiserModel,
    noisy_tokens: np.ndarray,
    clean_tokens: np.ndarray,
    train: TrainConfig,
    rng: np.random.Generator,
    teacher_forcing: bool = True,
) -> tuple:
    """One batch's losses: returns (internal scalar Tensor, raw CE, raw ER).

    noisy/clean tokens are (B, T, K) integer arrays. Raw values are batch
    means of the per-clip sum-reduction losses; the internal Tensor is their
    weighted sum divided by groups * frames.
    """
    cb = model.codebooks
    g = model.config.num_groups
    b, t, k = noisy_tokens.shape

    emb_in = Tensor(_embed(cb, noisy_tokens, k))
    logits = model.denoiser(emb_in)  # (B, T, g, C)
    l_ce = token_ce_loss(logits, clean_tokens[:, :, :g]) * (1.0 / b)

    predicted = np.argmax(logits.data, axis=-1)  # (B, T, g)
    if teacher_forcing:
        forced = np.empty_like(predicted)
        c = model.codec_config.codebook_size
        for i in range(b):
            merged = teacher_force(
                TokenMatrix(predicted[i], c),
                TokenMatrix(clean_tokens[i, :, :g], c),
                train.p_replace,
                int(rng.integers(2**63)),
            )
            forced[i] = merged.tokens
    else:
        forced = predicted

    refiner_in = np.concatenate([_embed(cb, forced, g), emb_in.data], axis=-1)
    refined = model.refiner(Tensor(refiner_in))  # (B, T, D)
    delta = refined - Tensor(_embed(cb, clean_tokens, k))
    per_clip = delta.abs().sum(axis=(1, 2)) + (delta**2).sum(axis=(1, 2)).sqrt()
    l_er = per_clip.mean()

    internal = total_loss(l_ce, l_er, train.lambda_ce, train.lambda_er) * (1.0 / (g * t))
    return internal, float(l_ce.data), float(l_er.data)


def train_denoiser(
    corpus_root,
    codec: CodecModel,
    config: DenoiserConfig | None = None,
    train: TrainConfig | None = None,
    progress=None,
) -> tuple:
    """Train the denoiser+refiner bundle; the codec stays frozen throughout.

    Returns (model, history): history rows are per-step dicts with keys
    epoch, step, lr, loss_ce, loss_er, loss (Eq-style raw sums; loss is
    their weighted combination).
    """
    config = config or DenoiserConfig.desk()
    train = train or TrainConfig()
    rng = np.random.default_rng(train.seed)
    model = DenoiserModel(config, codec.config, codec.codebooks, rng)

    noisy = load_split_waveforms(corpus_root, "train", "noisy_path", train.max_clips)
    clean = load_split_waveforms(corpus_root, "train", "clean_path", train.max_clips)
    noisy_tokens = encode_split_tokens(codec, noisy)
    clean_tokens = encode_split_tokens(codec, clean)

    optimizer = Adam(list(model.parameters()))
    step = 0
    history = []
    for epoch in range(train.epochs):
        order = rng.permutation(noisy_tokens.shape[0])
        for start in range(0, order.size, train.batch_size):
            batch = order[start : start + train.batch_size]
            step += 1
            internal, ce, er = joint_step_loss(
                model, noisy_tokens[batch], clean_tokens[batch], train, rng
            )
            if not np.isfinite(internal.data):
                raise NumericError(f"denoiser training diverged at step {step}")
            lr = warmup_lr(step, train.peak_lr, train.warmup_steps)
            model.zero_grad()
            internal.backward()
            optimizer.step(lr=lr)
            history.append(
                {
                    "epoch": epoch,
                    "step": step,
                    "lr": lr,
                    "loss_ce": ce,
                    "loss_er": er,
                    "loss": total_loss(ce, er, train.lambda_ce, train.lambda_er),
                }
            )
        if progress is not None:
            epoch_rows = [r for r in history if r["epoch"] == epoch]
            progress(epoch, float(np.mean([r["loss"] for r in epoch_rows])))
    return model, history
