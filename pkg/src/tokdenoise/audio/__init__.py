from .clip import PCM_SCALE, SAMPLE_RATE, AudioClip, read_wav, write_wav
from .corpus import (
    MANIFEST_NAME,
    SPLIT_SNR_RANGES,
    SPLITS,
    CorpusConfig,
    ManifestEntry,
    build_corpus,
    load_manifest,
    render_entry,
)
from .mix import MixResult, achieved_snr_db, mix_at_snr
from .synth import CLEAN_PEAK, NOISE_KINDS, NOISE_RMS, gen_clean, gen_noise

__all__ = [
    "AudioClip",
    "CLEAN_PEAK",
    "CorpusConfig",
    "MANIFEST_NAME",
    "ManifestEntry",
    "MixResult",
    "NOISE_KINDS",
    "NOISE_RMS",
    "PCM_SCALE",
    "SAMPLE_RATE",
    "SPLITS",
    "SPLIT_SNR_RANGES",
    "achieved_snr_db",
    "build_corpus",
    "gen_clean",
    "gen_noise",
    "load_manifest",
    "mix_at_snr",
    "read_wav",
    "render_entry",
    "write_wav",
]
