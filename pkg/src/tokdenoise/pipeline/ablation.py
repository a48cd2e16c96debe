"""Predicted-group-count sweep.

Each variant retrains the denoiser + refiner with g classification heads
from the same seed and budget, then measures validation per-token cross
entropy (sum CE normalized by clips * frames * groups), group-1 accuracy,
SI-SNR improvement and analytic FLOPs. Larger g means predicting deeper
quantizer stages, which carry progressively less structure.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from ..audio.clip import read_wav
from ..audio.corpus import MANIFEST_NAME, load_manifest, load_split_waveforms
from ..codec.model import CodecModel
from ..denoiser.config import DenoiserConfig
from ..denoiser.losses import token_ce_loss
from ..denoiser.model import DenoiserModel
from ..errors import ConfigError
from ..nn import Tensor, no_grad
from .enhance import enhance
from .flops import flops_estimate
from .metrics import si_snr
from .training import TrainConfig, _embed, encode_split_tokens, train_denoiser


def _validation_stats(
    corpus_root,
    codec: CodecModel,
    model: DenoiserModel,
    split: str,
    limit: int | None,
) -> dict:
    g = model.config.num_groups
    noisy = load_split_waveforms(corpus_root, split, "noisy_path", limit)
    clean = load_split_waveforms(corpus_root, split, "clean_path", limit)
    noisy_tokens = encode_split_tokens(codec, noisy)
    clean_tokens = encode_split_tokens(codec, clean)

    n, t, k = noisy_tokens.shape
    ce_total = 0.0
    correct_group1 = 0
    with no_grad():
        for start in range(0, n, 32):
            nt = noisy_tokens[start : start + 32]
            ct = clean_tokens[start : start + 32]
            logits = model.denoiser(Tensor(_embed(model.codebooks, nt, k)))
            ce_total += float(token_ce_loss(logits, ct[:, :, :g]).data)
            predicted = np.argmax(logits.data, axis=-1)
            correct_group1 += int((predicted[:, :, 0] == ct[:, :, 0]).sum())

    root = Path(corpus_root)
    entries = [e for e in load_manifest(root / MANIFEST_NAME) if e.split == split]
    if limit is not None:
        entries = entries[:limit]
    improvements = []
    for entry in entries:
        clean_clip = read_wav(root / entry.clean_path)
        noisy_clip = read_wav(root / entry.noisy_path)
        enhanced, _ = enhance(noisy_clip, codec, model)
        improvements.append(si_snr(enhanced, clean_clip) - si_snr(noisy_clip, clean_clip))

    return {
        "ce_per_token": ce_total / (n * t * g),
        "acc_group1": correct_group1 / (n * t),
        "si_snr_improvement": float(np.mean(improvements)),
    }


def ablate_groups(
    corpus_root,
    codec: CodecModel,
    group_counts,
    config: DenoiserConfig | None = None,
    train: TrainConfig | None = None,
    eval_split: str = "val",
    eval_limit: int | None = None,
    progress=None,
) -> list:
    """Train and evaluate one variant per group count; returns report rows."""
    config = config or DenoiserConfig.desk()
    train = train or TrainConfig()
    k_max = codec.config.num_quantizers
    for g in group_counts:
        if not 1 <= g <= k_max:
            raise ConfigError(f"group count {g} outside [1, {k_max}]")

    rows = []
    for g in group_counts:
        variant = replace(config, num_groups=g)
        model, _ = train_denoiser(corpus_root, codec, variant, train)
        stats = _validation_stats(corpus_root, codec, model, eval_split, eval_limit)
        row = {
            "groups": g,
            "flops": flops_estimate(codec.config, variant).total,
            **stats,
        }
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def ablation_table(rows: list) -> str:
    cols = ["groups", "flops", "ce_per_token", "acc_group1", "si_snr_improvement"]
    header = "".join(f"{c:>20}" for c in cols)
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['groups']:>20d}{r['flops']:>20,d}{r['ce_per_token']:>20.4f}"
            f"{r['acc_group1']:>20.4f}{r['si_snr_improvement']:>20.4f}"
        )
    return "\n".join(lines)
