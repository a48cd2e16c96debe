"""Corpus builder: renders clean/noise/noisy WAV triples plus a manifest.

Each manifest entry is a pure function of its own seed, so entries can be
rendered in parallel and any single entry can be regenerated and audited
later. The manifest is JSONL with one entry object per line.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FormatError
from .clip import read_wav, write_wav
from .mix import mix_at_snr
from .synth import NOISE_KINDS, gen_clean, gen_noise

SPLITS = ("train", "val", "test")
SPLIT_SNR_RANGES = {"train": (-5.0, 15.0), "val": (-5.0, 15.0), "test": (0.0, 20.0)}
MANIFEST_FIELDS = ("split", "clean_path", "noise_path", "noisy_path", "snr_db", "seed")
MANIFEST_NAME = "manifest.jsonl"


@dataclass
class ManifestEntry:
    split: str
    clean_path: str  # all paths relative to the corpus root
    noise_path: str
    noisy_path: str
    snr_db: float
    seed: int


@dataclass
class CorpusConfig:
    out_dir: str
    train_clips: int = 2000
    val_clips: int = 200
    test_clips: int = 200
    duration_s: float = 1.0
    seed: int = 0
    train_snr: tuple = SPLIT_SNR_RANGES["train"]
    val_snr: tuple = SPLIT_SNR_RANGES["val"]
    test_snr: tuple = SPLIT_SNR_RANGES["test"]

    def counts(self) -> dict:
        return {"train": self.train_clips, "val": self.val_clips, "test": self.test_clips}

    def snr_range(self, split: str) -> tuple:
        lo, hi = getattr(self, f"{split}_snr")
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ConfigError(f"{split}_snr: invalid SNR range ({lo}, {hi}), need min <= max")
        return float(lo), float(hi)


def render_entry(root: str, split: str, index: int, entry_seed: int, duration_s: float, snr_range=None) -> ManifestEntry:
    """Render one corpus entry; deterministic given (split, index, seed)."""
    rng = np.random.default_rng(entry_seed)
    lo, hi = snr_range or SPLIT_SNR_RANGES[split]
    snr_db = float(rng.uniform(lo, hi))
    kind = NOISE_KINDS[int(rng.integers(0, len(NOISE_KINDS)))]
    clean_seed = int(rng.integers(0, 2**63 - 1))
    noise_seed = int(rng.integers(0, 2**63 - 1))

    mix = mix_at_snr(gen_clean(clean_seed, duration_s), gen_noise(noise_seed, duration_s, kind), snr_db)
    entry = ManifestEntry(
        split=split,
        clean_path=f"{split}/clean_{index:06d}.wav",
        noise_path=f"{split}/noise_{index:06d}.wav",
        noisy_path=f"{split}/noisy_{index:06d}.wav",
        snr_db=snr_db,
        seed=entry_seed,
    )
    root_path = Path(root)
    write_wav(mix.clean, root_path / entry.clean_path)  # stored reference is the co-rescaled clean
    write_wav(mix.noise, root_path / entry.noise_path)
    write_wav(mix.noisy, root_path / entry.noisy_path)
    return entry


def build_corpus(config: CorpusConfig, jobs: int = 1) -> list[ManifestEntry]:
    """Render every split and write the manifest; returns the entries."""
    if min(config.counts().values()) < 0:
        raise ConfigError("split sizes must be non-negative")
    ranges = {split: config.snr_range(split) for split in SPLITS}  # validate before any I/O
    root = Path(config.out_dir)
    for split, count in config.counts().items():
        if count:
            (root / split).mkdir(parents=True, exist_ok=True)
    root.mkdir(parents=True, exist_ok=True)

    master = np.random.default_rng(config.seed)
    used: set = set()
    tasks = []
    for split in SPLITS:
        for i in range(config.counts()[split]):
            entry_seed = int(master.integers(0, 2**31 - 1))
            while entry_seed in used:  # uniqueness is a manifest invariant
                entry_seed = int(master.integers(0, 2**31 - 1))
            used.add(entry_seed)
            tasks.append((str(root), split, i, entry_seed, config.duration_s, ranges[split]))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_render_star, tasks, chunksize=16))
    else:
        entries = [render_entry(*t) for t in tasks]

    with open(root / MANIFEST_NAME, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(vars(entry)) + "\n")
    return entries


def _render_star(args) -> ManifestEntry:
    return render_entry(*args)


def load_manifest(path) -> list[ManifestEntry]:
    """Parse and validate a JSONL manifest."""
    path = Path(path)
    entries = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{line_no}: invalid JSON ({exc})") from exc
            missing = [f for f in MANIFEST_FIELDS if f not in obj]
            if missing:
                raise FormatError(f"{path}:{line_no}: missing manifest fields {missing}")
            if obj["split"] not in SPLITS:
                raise FormatError(f"{path}:{line_no}: unknown split {obj['split']!r}")
            entries.append(ManifestEntry(**{f: obj[f] for f in MANIFEST_FIELDS}))
    return entries


def load_split_waveforms(corpus_root, split: str, field: str = "clean_path", limit: int | None = None) -> np.ndarray:
    """Stack one WAV per manifest entry of a split into an (N, L) array.

    field selects the recording (clean_path / noisy_path / noise_path).
    Every clip must share one length so callers can batch rows directly.
    """
    root = Path(corpus_root)
    entries = [e for e in load_manifest(root / MANIFEST_NAME) if e.split == split]
    if limit is not None:
        entries = entries[:limit]
    if not entries:
        raise ConfigError(f"no {split!r} entries in {root / MANIFEST_NAME}")
    clips = [read_wav(root / getattr(e, field)).samples for e in entries]
    lengths = {c.size for c in clips}
    if len(lengths) != 1:
        raise ConfigError(f"clips must share one length for batching, got {sorted(lengths)}")
    return np.stack(clips)
