"""Corpus-level evaluation of a trained codec + denoiser pair.

Reports per-clip SI-SNR (noisy and enhanced), the improvement, the
log-spectral distance, and token accuracy per predicted group, plus
aggregate means and the analytic FLOPs of the evaluated configuration.
Clips are independent, so evaluation can fan out over processes; workers
reload the checkpoints once each via the pool initializer.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audio.clip import read_wav
from ..audio.corpus import MANIFEST_NAME, load_manifest
from ..codec.model import CodecModel
from ..codec.tokens import TokenMatrix
from ..denoiser.model import DenoiserModel
from ..errors import ConfigError
from .enhance import enhance
from .flops import flops_estimate
from .metrics import log_spectral_distance, si_snr, token_accuracy

_WORKER: dict = {}


def _eval_init(codec_path: str, denoiser_path: str) -> None:
    _WORKER["codec"] = CodecModel.load(codec_path)
    _WORKER["model"] = DenoiserModel.load(denoiser_path)


def _eval_entry(args: tuple) -> dict:
    root, entry = args
    codec: CodecModel = _WORKER["codec"]
    model: DenoiserModel = _WORKER["model"]
    clean = read_wav(Path(root) / entry.clean_path)
    noisy = read_wav(Path(root) / entry.noisy_path)
    enhanced, tokens = enhance(noisy, codec, model)

    g = model.config.num_groups
    clean_tokens = codec.tokenize(clean)
    truth = TokenMatrix(clean_tokens.tokens[:, :g], clean_tokens.num_codes)
    accs = token_accuracy(tokens, truth)

    noisy_snr = si_snr(noisy, clean)
    enhanced_snr = si_snr(enhanced, clean)
    row = {
        "clip": entry.noisy_path,
        "snr_db": entry.snr_db,
        "si_snr_noisy": noisy_snr,
        "si_snr_enhanced": enhanced_snr,
        "si_snr_improvement": enhanced_snr - noisy_snr,
        "lsd": log_spectral_distance(enhanced, clean),
    }
    for k, acc in enumerate(accs, start=1):
        row[f"acc_group{k}"] = float(acc)
    return row


@dataclass
class EvalReport:
    rows: list
    aggregate: dict

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.rows:
                fh.write(json.dumps(row) + "\n")
            fh.write(json.dumps({"aggregate": self.aggregate}) + "\n")

    def text_table(self) -> str:
        if not self.rows:
            return "(no rows)"
        acc_keys = sorted(k for k in self.rows[0] if k.startswith("acc_group"))
        cols = ["clip", "snr_db", "si_snr_noisy", "si_snr_enhanced", "si_snr_improvement", "lsd", *acc_keys]
        name_width = max(len("mean"), max(len(str(r["clip"])) for r in self.rows)) + 2
        header = f"{'clip':<{name_width}}" + "".join(f"{c:>20}" for c in cols[1:])
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(f"{r['clip']:<{name_width}}" + "".join(f"{r[c]:>20.4f}" for c in cols[1:]))
        lines.append("-" * len(header))
        lines.append(
            f"{'mean':<{name_width}}" + "".join(f"{self.aggregate['mean_' + c]:>20.4f}" for c in cols[1:])
        )
        return "\n".join(lines)


def evaluate(
    corpus_root,
    codec_path,
    denoiser_path,
    split: str = "test",
    limit: int | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Run the full enhance path over one split and collect metrics."""
    root = Path(corpus_root)
    entries = [e for e in load_manifest(root / MANIFEST_NAME) if e.split == split]
    if limit is not None:
        entries = entries[:limit]
    if not entries:
        raise ConfigError(f"no {split!r} entries in {root / MANIFEST_NAME}")

    work = [(str(root), e) for e in entries]
    _eval_init(str(codec_path), str(denoiser_path))  # parent needs the configs for the aggregate
    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_eval_init, initargs=(str(codec_path), str(denoiser_path))
        ) as pool:
            rows = list(pool.map(_eval_entry, work))
    else:
        rows = [_eval_entry(item) for item in work]

    codec: CodecModel = _WORKER["codec"]
    model: DenoiserModel = _WORKER["model"]
    aggregate = {
        "clips": len(rows),
        "chance_accuracy": 1.0 / codec.config.codebook_size,
        "flops_total": flops_estimate(codec.config, model.config).total,
    }
    for key in rows[0]:
        if key != "clip":
            aggregate["mean_" + key] = float(np.mean([r[key] for r in rows]))
    return EvalReport(rows=rows, aggregate=aggregate)
