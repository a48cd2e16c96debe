"""Run configuration: strict JSON parsing into the per-stage dataclasses.

The file carries five optional sections (corpus, codec, codec_train,
denoiser, train, eval); every key must match a dataclass field, unknown
keys are rejected so typos fail loudly before any work starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .audio.corpus import CorpusConfig
from .codec.config import CodecConfig
from .codec.training import CodecTrainConfig
from .denoiser.config import DenoiserConfig
from .errors import ConfigError, FormatError
from .pipeline.training import TrainConfig

DEFAULT_ABLATION_GROUPS = (1, 2, 4, 8)


@dataclass
class EvalConfig:
    split: str = "test"
    limit: int | None = None
    groups: tuple = DEFAULT_ABLATION_GROUPS

    def __post_init__(self):
        if self.split not in ("train", "val", "test"):
            raise ConfigError(f"eval.split must be train/val/test, got {self.split!r}")
        self.groups = tuple(int(g) for g in self.groups)


@dataclass
class RunConfig:
    corpus: CorpusConfig = field(default_factory=lambda: CorpusConfig(out_dir="corpus"))
    codec: CodecConfig = field(default_factory=CodecConfig.desk)
    codec_train: CodecTrainConfig = field(default_factory=CodecTrainConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig.desk)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def override_seed(self, seed: int) -> None:
        """Route one seed into every stage that owns randomness."""
        self.corpus.seed = seed
        self.codec_train.seed = seed
        self.train.seed = seed


_SECTIONS = {
    "corpus": CorpusConfig,
    "codec": CodecConfig,
    "codec_train": CodecTrainConfig,
    "denoiser": DenoiserConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _build_section(name: str, cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in config section {name!r}: {unknown}")
    coerced = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    if cls is CorpusConfig and "out_dir" not in coerced:
        coerced["out_dir"] = "corpus"
    try:
        return cls(**coerced)
    except TypeError as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from exc


def load_config(path=None) -> RunConfig:
    """Parse a JSON config file; a missing path yields pure defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{path}: unknown config sections {unknown}")
    kwargs = {name: _build_section(name, cls, data[name]) for name, cls in _SECTIONS.items() if name in data}
    return RunConfig(**kwargs)
