"""Command-line entry point: ``djscc <subcommand> ...``.

Errors end the process with a non-zero status and one line on stderr of the
form ``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .channel import NOISELESS
from .data import DatasetSpec, PairDirectory, save_pairs, stack, synthetic_pairs
from .harness import (CheckpointError, ConfigError, Trainer, load_checkpoint, load_config)
from .harness.evaluate import evaluate_delta_sweep, evaluate_sweep

logger = logging.getLogger("djscc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _snr_list(text: str) -> list[float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok.lower() in ("noiseless", "inf", "+inf"):
            out.append(NOISELESS)
        else:
            try:
                out.append(float(tok))
            except ValueError:
                raise UsageError(f"invalid SNR value {tok!r}") from None
    if not out:
        raise UsageError("empty SNR list")
    return out


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like HxW, got {text!r}") from None
    return h, w


_VALUE_FLAGS = ("--snrs", "--deltas", "--snr-x")


def _glue_values(argv: list[str]) -> list[str]:
    # argparse takes "-3,1" for an option; bind such values to their flag
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="djscc", description="Distributed deep JSCC for stereo image pairs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--asymmetric", action="store_true", help="y link always noiseless")
    t.add_argument("--seed", type=int, help="override the init/data/noise seeds")
    t.add_argument("--iterations", type=int, help="override the iteration count")

    for name in ("eval-sweep", "eval-delta"):
        e = sub.add_parser(name)
        e.add_argument("--ckpt", required=True)
        e.add_argument("--report", required=True)
        e.add_argument("--channel", default="awgn", choices=("awgn", "rayleigh"))
        e.add_argument("--data", help="paired-image directory (default: synthetic test split)")
        e.add_argument("--count", type=int, help="number of synthetic test pairs")
        e.add_argument("--seed", type=int, default=0, help="evaluation noise seed")
        if name == "eval-sweep":
            e.add_argument("--snrs", default="-3,1,5,9,13")
        else:
            e.add_argument("--snr-x", type=float, default=1.0)
            e.add_argument("--deltas", default="-6,-3,0,3,6,noiseless")

    g = sub.add_parser("gen-data", help="write synthetic stereo pairs as PPM files")
    g.add_argument("--count", type=int, default=16)
    g.add_argument("--overlap", type=float, default=0.7)
    g.add_argument("--size", default="32x64")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)

    sub.add_parser("selftest", help="run the built-in oracle and invariant checks")
    return p


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.asymmetric:
        cfg.train = dataclasses.replace(cfg.train, asymmetric=True)
    if args.seed is not None:
        cfg.train = dataclasses.replace(cfg.train, seed=args.seed, data_seed=args.seed, noise_seed=args.seed)
        cfg.data = dataclasses.replace(cfg.data, seed=args.seed)
    if args.iterations is not None:
        if args.iterations < 0:
            raise UsageError("--iterations must be non-negative")
        cfg.train = dataclasses.replace(cfg.train, iterations=args.iterations)
    trainer = Trainer.resume(cfg, args.resume) if args.resume else Trainer(cfg)
    trainer.run(out=Path(args.out))
    logger.info("saved %s at iteration %d", args.out, trainer.iteration)
    return 0


def _eval_data(args, ckpt):
    if args.data:
        h, w = ckpt.config.data.height, ckpt.config.data.width
        pairs = list(PairDirectory(args.data, height=h, width=w))
        if not pairs:
            raise UsageError(f"no image pairs in {args.data}")
    else:
        spec = ckpt.config.test_spec()
        if args.count is not None:
            if args.count <= 0:
                raise UsageError("--count must be positive")
            spec = dataclasses.replace(spec, count=args.count)
        pairs = synthetic_pairs(spec, "test")
    return stack(pairs)


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    x, y = _eval_data(args, ckpt)
    if args.command == "eval-sweep":
        rep = evaluate_sweep(ckpt.model, x, y, _snr_list(args.snrs), args.channel, args.seed)
    else:
        rep = evaluate_delta_sweep(ckpt.model, x, y, args.snr_x, _snr_list(args.deltas),
                                   args.channel, args.seed)
    for remark in rep.remarks:
        logger.warning(remark)
    Path(args.report).write_text(rep.to_csv())
    return 0


def _cmd_gen(args) -> int:
    h, w = _size(args.size)
    if not 0 <= args.overlap <= 1:
        raise UsageError(f"--overlap must lie in [0, 1], got {args.overlap}")
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    spec = DatasetSpec(height=h, width=w, count=args.count, seed=args.seed, overlap=args.overlap)
    save_pairs(synthetic_pairs(spec), args.out)
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_all
    failures = run_all()
    return 1 if failures else 0


def main(argv=None) -> int:
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        args = build_parser().parse_args(_glue_values(argv))
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"train": _cmd_train, "eval-sweep": _cmd_eval, "eval-delta": _cmd_eval,
                   "gen-data": _cmd_gen, "selftest": _cmd_selftest}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
    except CheckpointError as exc:
        print(f"error: checkpoint: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
