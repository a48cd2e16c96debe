"""Command line surface for the full pipeline.

One executable, subcommand per stage. Every failure the package raises on
purpose maps onto a stable exit code: 0 success, 2 configuration, 3 I/O or
file format, 4 numeric divergence. All randomness flows from the config
seeds, overridable with a single --seed flag.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .audio.clip import read_wav, write_wav
from .audio.corpus import build_corpus
from .codec.model import CodecModel
from .codec.tokens import read_tokens, write_tokens
from .codec.training import train_codec, validation_mse_by_stage
from .config import load_config
from .denoiser.model import DenoiserModel, denoise_tokens, refine
from .errors import (
    ConfigError,
    CorruptionError,
    DegenerateInputError,
    DimensionError,
    FormatError,
    NumericError,
    TokdenoiseError,
)
from .nn import no_grad
from .pipeline import ablate_groups, ablation_table, enhance, evaluate, flops_estimate, train_denoiser

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _write_csv(path, rows, fields) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def cmd_gen_data(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    if args.out is not None:
        config.corpus.out_dir = args.out
    entries = build_corpus(config.corpus, jobs=args.jobs)
    counts = config.corpus.counts()
    for split in ("train", "val", "test"):
        lo, hi = config.corpus.snr_range(split)
        print(f"{split}: {counts[split]} clips, SNR [{lo:+.0f}, {hi:+.0f}] dB")
    print(f"wrote {len(entries)} entries under {config.corpus.out_dir}")
    return EXIT_OK


def cmd_train_codec(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    model, history = train_codec(
        args.corpus,
        config.codec,
        config.codec_train,
        progress=lambda e, loss: print(f"epoch {e}: mean loss {loss:.4f}"),
    )
    model.save(args.out)
    if args.loss_csv:
        _write_csv(args.loss_csv, history, ["epoch", "step", "lr", "loss"])
    mse = validation_mse_by_stage(model, args.corpus, limit=args.val_limit)
    print(f"saved codec to {args.out} ({len(history)} steps)")
    print("validation MSE by stage count: " + ", ".join(f"k={i + 1}: {v:.5f}" for i, v in enumerate(mse)))
    return EXIT_OK


def cmd_train_denoiser(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    codec = CodecModel.load(_require_file(args.codec, "codec checkpoint"))
    model, history = train_denoiser(
        args.corpus,
        codec,
        config.denoiser,
        config.train,
        progress=lambda e, loss: print(f"epoch {e}: mean loss {loss:.2f}"),
    )
    model.save(args.out)
    if args.loss_csv:
        _write_csv(args.loss_csv, history, ["epoch", "step", "lr", "loss_ce", "loss_er", "loss"])
    print(f"saved denoiser to {args.out} ({len(history)} steps)")
    return EXIT_OK


def cmd_enhance(args) -> int:
    codec = CodecModel.load(_require_file(args.codec, "codec checkpoint"))
    model = DenoiserModel.load(_require_file(args.denoiser, "denoiser checkpoint"))
    source = _require_file(args.input, "input")

    if source.suffix.lower() == ".atok":
        noisy_tokens = read_tokens(source)
        _, prompt = denoise_tokens(noisy_tokens, model)
        with no_grad():
            summed = refine(prompt, noisy_tokens, model.refiner, model.codebooks)
        enhanced = codec.decode(summed.data)
    else:
        clip = read_wav(source)
        enhanced, prompt = enhance(clip, codec, model)

    if args.out:
        write_wav(enhanced, args.out)
        print(f"wrote {args.out} ({len(enhanced)} samples)")
    if args.prompt_out:
        write_tokens(prompt, args.prompt_out)
        print(f"wrote {args.prompt_out} ({prompt.num_frames} frames x {prompt.num_groups} groups)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    split = args.split or config.eval.split
    limit = args.limit if args.limit is not None else config.eval.limit
    report = evaluate(
        args.corpus,
        _require_file(args.codec, "codec checkpoint"),
        _require_file(args.denoiser, "denoiser checkpoint"),
        split=split,
        limit=limit,
        jobs=args.jobs,
    )
    if args.out:
        report.to_jsonl(args.out)
    print(report.text_table())
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.override_seed(args.seed)
    groups = config.eval.groups
    if args.groups:
        try:
            groups = tuple(int(g) for g in args.groups.split(","))
        except ValueError as exc:
            raise ConfigError(f"--groups must be comma-separated integers: {args.groups!r}") from exc
    codec = CodecModel.load(_require_file(args.codec, "codec checkpoint"))
    rows = ablate_groups(
        args.corpus,
        codec,
        groups,
        config.denoiser,
        config.train,
        eval_limit=args.limit if args.limit is not None else config.eval.limit,
        progress=lambda row: print(f"groups={row['groups']}: ce/token {row['ce_per_token']:.4f}"),
    )
    if args.out:
        with open(args.out, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    print(ablation_table(rows))
    return EXIT_OK


def cmd_flops(args) -> int:
    config = load_config(args.config)
    breakdown = flops_estimate(config.codec, config.denoiser, duration_s=args.duration)
    print(breakdown.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tokdenoise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, jobs=False, config=True):
        if config:
            p.add_argument("--config", default=None, help="JSON run config (defaults apply when omitted)")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override every stage seed")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("gen-data", help="render the synthetic corpus")
    common(p, jobs=True)
    p.add_argument("--out", default=None, help="corpus directory (overrides config)")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-codec", help="train the RVQ codec on clean clips")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-csv", default=None)
    p.add_argument("--val-limit", type=int, default=50)
    p.set_defaults(fn=cmd_train_codec)

    p = sub.add_parser("train-denoiser", help="joint denoiser+refiner training")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--codec", required=True, help="frozen codec checkpoint")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-csv", default=None)
    p.set_defaults(fn=cmd_train_denoiser)

    p = sub.add_parser("enhance", help="denoise one clip (WAV or ATOK input)")
    common(p, seed=False, config=False)
    p.add_argument("--codec", required=True)
    p.add_argument("--denoiser", required=True)
    p.add_argument("--in", dest="input", required=True, help="noisy .wav or .atok file")
    p.add_argument("--out", default=None, help="enhanced WAV path")
    p.add_argument("--prompt-out", default=None, help="write the 2-group token prompt (.atok)")
    p.set_defaults(fn=cmd_enhance)

    p = sub.add_parser("evaluate", help="metrics over a corpus split")
    common(p, seed=False, jobs=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--denoiser", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--out", default=None, help="JSONL report path")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep the predicted group count")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--groups", default=None, help="comma-separated counts, e.g. 1,2,4,8")
    p.add_argument("--limit", type=int, default=None, help="validation clips per variant")
    p.add_argument("--out", default=None, help="JSONL report path")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("flops", help="analytic FLOPs breakdown")
    common(p, seed=False)
    p.add_argument("--duration", type=float, default=1.0, help="input length in seconds")
    p.set_defaults(fn=cmd_flops)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, CorruptionError, DimensionError, DegenerateInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TokdenoiseError as exc:  # remaining deliberate errors are misconfigurations
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
