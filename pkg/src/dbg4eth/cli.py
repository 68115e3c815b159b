"""``dbg4eth`` command line."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PipelineConfig
from .errors import ConfigError, DBG4ETHError, SchemaError, StageError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE = 0, 2, 3


def _cmd_synth(args) -> None:
    from .synth import write_synthetic

    archetypes = [a.strip() for a in args.archetypes.split(",") if a.strip()]
    tx, lab = write_synthetic(args.out, archetypes, args.n, args.seed)
    print(f"wrote {tx} and {lab}")


def _cmd_ingest(args) -> None:
    from .pipeline import build_datasets

    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    cfg.transactions, cfg.labels, cfg.base_dir = str(Path(args.tx).resolve()), str(Path(args.labels).resolve()), "."
    for name, ds in build_datasets(cfg, Path(args.out)).items():
        fr = ds.manifest.fractions()
        print(f"{name}: {len(ds.instances)} graphs "
              f"(train {fr['train']:.2f} / validation {fr['validation']:.2f} / test {fr['test']:.2f})")


def _run(args, mode: str) -> None:
    from .pipeline import run_pipeline

    cfg = PipelineConfig.from_file(args.config)
    res = run_pipeline(cfg, mode, checkpoint=getattr(args, "checkpoint", None))
    for name, t in res.tasks.items():
        m = t.metrics
        print(f"{name}: precision {m['precision']:.4f} recall {m['recall']:.4f} f1 {m['f1']:.4f} accuracy {m['accuracy']:.4f}")
    print(f"reports in {res.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbg4eth", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="build per-type graph datasets from CSV files")
    s.add_argument("--tx", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="optional config for sampling parameters and seed")
    s.set_defaults(func=_cmd_ingest)

    s = sub.add_parser("train", help="train, calibrate, classify and report")
    s.add_argument("--config", required=True)
    s.set_defaults(func=lambda a: _run(a, "train"))

    s = sub.add_parser("evaluate", help="evaluate a trained checkpoint on the test split")
    s.add_argument("--config", required=True)
    s.add_argument("--checkpoint", required=True)
    s.set_defaults(func=lambda a: _run(a, "evaluate"))

    s = sub.add_parser("ablate", help="train and report the ablation table")
    s.add_argument("--config", required=True)
    s.set_defaults(func=lambda a: _run(a, "ablate"))

    s = sub.add_parser("synth", help="write a synthetic transactions.csv and labels.csv")
    s.add_argument("--archetypes", default="exchange,phishing,mining")
    s.add_argument("--n", type=int, default=200, help="accounts per archetype")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ValidationError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        if isinstance(exc.cause, (ConfigError, ValidationError, SchemaError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"stage error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (DBG4ETHError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
