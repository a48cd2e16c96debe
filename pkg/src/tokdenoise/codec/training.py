"""Codec training: L1 waveform + multi-resolution STFT + commitment losses.

The encoder and decoder learn by gradient; the codebooks learn by EMA
k-means updates fed with the same batch's stage inputs. Quantization is
bridged with the straight-through estimator, so decoder gradients reach the
encoder unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio.corpus import load_split_waveforms
from ..errors import ConfigError, NumericError
from ..nn import Adam, Tensor, no_grad, stft_magnitude, warmup_lr
from .config import CodecConfig
from .model import CodecModel
from .quantizer import ema_update, rvq_cascade

STFT_RESOLUTIONS = ((256, 64), (512, 128), (1024, 256))  # (frame_length, hop)


@dataclass
class CodecTrainConfig:
    epochs: int = 6
    batch_size: int = 8
    peak_lr: float = 1e-3
    warmup_steps: int = 200
    commitment_beta: float = 0.25
    si_snr_weight: float = 0.3
    seed: int = 0
    max_clips: int | None = None  # cap the train split (smoke tests)


def _load_clean_split(corpus_root, split: str, limit: int | None = None) -> np.ndarray:
    return load_split_waveforms(corpus_root, split, "clean_path", limit)


def batch_losses(
    model: CodecModel,
    x: np.ndarray,
    beta: float,
    update_stats: dict | None = None,
    si_weight: float = 0.3,
) -> Tensor:
    """Forward pass over (B, L) clean waveforms; returns the scalar loss.

    The objective is L1 waveform + multi-resolution STFT magnitude L1 +
    beta * commitment - si_weight * SI-SNR. The magnitude terms shape the
    spectrum but are blind to phase, so without the SI-SNR term time-domain
    reconstruction stalls a few dB above zero.

    When update_stats is given (training mode), the codebooks receive an EMA
    update and the dict is filled with diagnostics.
    """
    b, length = x.shape
    m = model.config.downsample_rate
    if length % m:
        raise ConfigError(f"clip length {length} not a multiple of the {m}-sample hop")
    x_in = Tensor(x[:, None, :])

    z = model.encode_batch(x_in)  # (B, T, D)
    frames = z.data.reshape(-1, model.config.latent_dim)
    if update_stats is not None and not model.codebooks.initialized:
        model.codebooks.seed_from_frames(frames, update_stats["rng"])
    tm, quantized, _, stage_inputs = rvq_cascade(frames, model.codebooks, model.config.num_quantizers)
    if update_stats is not None:
        update_stats["reseeded"] = ema_update(model.codebooks, stage_inputs, tm.tokens, update_stats["rng"])

    q = quantized.reshape(z.shape)
    z_q = z + Tensor(q - z.data)  # straight-through: forward q, backward identity
    y = model.decode_batch(z_q)  # (B, 1, L)

    wave_l1 = (y - x_in).abs().mean()
    y_flat = y[:, 0, :]
    spec_l1 = None
    for frame_length, hop in STFT_RESOLUTIONS:
        target = stft_magnitude(Tensor(x), frame_length, hop, np.hanning(frame_length))
        pred = stft_magnitude(y_flat, frame_length, hop, np.hanning(frame_length))
        term = (pred - target).abs().mean()
        spec_l1 = term if spec_l1 is None else spec_l1 + term
    commitment = ((z - Tensor(q)) ** 2).mean()
    si = batch_si_snr(y_flat, x)
    # Reward SI-SNR only above 0 dB. Below 0 the nearest ascent is shrinking
    # the output toward silence (the 0 dB plateau), which stalls training; the
    # L1 terms carry a clip until its reconstruction clears the gate.
    return wave_l1 + spec_l1 + beta * commitment - si_weight * si.relu().mean()


def batch_si_snr(y: Tensor, x: np.ndarray) -> Tensor:
    """Differentiable per-clip SI-SNR in dB: y (B, L) against constant x.

    The ratio floor scales with the reference energy. An absolute floor lets
    a silent estimate drive both energies below it, flattening the term to
    zero exactly where the optimizer still needs a pull toward the target.
    """
    b, length = x.shape
    x0 = x - x.mean(axis=1, keepdims=True)
    ref_power = (x0 * x0).sum(axis=1)  # (B,), constant
    floor = Tensor(1e-8 * ref_power)
    y0 = y - y.mean(axis=(1,)).reshape(b, 1)
    scale = (y0 * Tensor(x0)).sum(axis=(1,)) * Tensor(1.0 / ref_power)
    s = scale.reshape(b, 1) * Tensor(x0)
    e = y0 - s
    ratio = ((s * s).sum(axis=(1,)) + floor) / ((e * e).sum(axis=(1,)) + floor)
    return ratio.log() * (10.0 / np.log(10.0))


def train_codec(
    corpus_root,
    config: CodecConfig | None = None,
    train: CodecTrainConfig | None = None,
    progress=None,
) -> tuple:
    """Train a codec on the corpus's clean train split.

    Returns (model, history); history rows are per-step dicts with keys
    epoch, step, lr, loss. Raises NumericError with the step number if the
    loss diverges.
    """
    config = config or CodecConfig.desk()
    train = train or CodecTrainConfig()
    rng = np.random.default_rng(train.seed)
    model = CodecModel(config, rng)
    clips = _load_clean_split(corpus_root, "train", train.max_clips)
    optimizer = Adam(list(model.parameters()))

    step = 0
    history = []
    for epoch in range(train.epochs):
        order = rng.permutation(clips.shape[0])
        epoch_losses = []
        for start in range(0, clips.shape[0], train.batch_size):
            batch = clips[order[start : start + train.batch_size]]
            step += 1
            stats: dict = {"rng": rng}
            loss = batch_losses(
                model, batch, train.commitment_beta, update_stats=stats, si_weight=train.si_snr_weight
            )
            if not np.isfinite(loss.data):
                raise NumericError(f"codec training diverged at step {step}")
            model.zero_grad()
            loss.backward()
            lr = warmup_lr(step, train.peak_lr, train.warmup_steps)
            optimizer.step(lr=lr)
            epoch_losses.append(float(loss.data))
            history.append({"epoch": epoch, "step": step, "lr": lr, "loss": float(loss.data)})
        if progress is not None:
            progress(epoch, float(np.mean(epoch_losses)))
    return model, history


def validation_mse_by_stage(model: CodecModel, corpus_root, split: str = "val", limit: int | None = None) -> list:
    """Mean waveform reconstruction MSE for every stage count k = 1..K."""
    clips = _load_clean_split(corpus_root, split, limit)
    k_max = model.config.num_quantizers
    totals = np.zeros(k_max)
    with no_grad():
        for row in clips:
            z = model.encode_batch(Tensor(row[None, None, :])).data[0]  # (T, D)
            _, _, final_residual, stage_inputs = rvq_cascade(z, model.codebooks, k_max)
            residual_after = stage_inputs[1:] + [final_residual]
            # quantized sum with k stages = z minus the residual k leaves
            q_all = np.stack([z - residual_after[k] for k in range(k_max)])  # (K, T, D)
            waves = model.decode_batch(Tensor(q_all)).data[:, 0, :]
            totals += np.mean((waves - row) ** 2, axis=1)
    return (totals / clips.shape[0]).tolist()
