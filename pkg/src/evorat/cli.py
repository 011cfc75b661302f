"""Command-line entry point: ``evorat {gen-data,evolve,skew,baseline,landscape}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import ExperimentConfig, load_config
from .datagen import ToyConfig, generate_toy_dataset, save_jsonl
from .exceptions import EvoratError
from .metrics import landscape_csv, loss_landscape_grid, string_match_baseline
from .runner import dumps, run_experiment, write_atomic

log = logging.getLogger("evorat")


def baseline_maps(highlights) -> dict:
    """The correct, a rotated and a bigram pattern map for three-class toy data."""
    h = list(highlights)
    return {
        "correct": {i: p for i, p in enumerate(h)},
        "swapped": {i: h[(len(h) - 1 - i)] for i in range(len(h))},
        "bigram": {i: p[1:] for i, p in enumerate(h)},
    }


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seeds", None):
        overrides["seeds"] = args.seeds
    if getattr(args, "threads", None):
        overrides["threads"] = args.threads
    for key in ("total", "string_len", "highlights", "skew_epochs", "skew_mode", "G"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return cfg.with_overrides(**overrides) if overrides else cfg


def cmd_gen_data(args) -> dict:
    cfg = _config(args)
    toy = cfg.toy_config()
    seed = args.seeds[0] if args.seeds else (cfg.data_seed if cfg.data_seed is not None else cfg.seeds[0])
    splits = generate_toy_dataset(toy, seed)
    paths = save_jsonl(splits, args.out)
    return {"files": {k: str(v) for k, v in paths.items()},
            "sizes": {k: len(v) for k, v in splits.items()}, "seed": seed}


def cmd_evolve(args, skew: bool = False) -> dict:
    cfg = _config(args)
    return run_experiment(cfg, Path(args.out), skew=skew)


def cmd_baseline(args) -> dict:
    cfg = _config(args)
    seed = args.seeds[0] if args.seeds else cfg.seeds[0]
    splits = generate_toy_dataset(cfg.toy_config(), seed)
    rows = {}
    for name, pmap in baseline_maps(cfg.highlights).items():
        rep = string_match_baseline(pmap, splits.test, splits.vocab, average=args.average)
        rows[name] = {"patterns": [pmap[i] for i in sorted(pmap)], "hl_f1": rep.hl_f1}
    out = {"config_hash": cfg.hash(), "seed": seed, "average": args.average, "baselines": rows}
    if args.out:
        write_atomic(Path(args.out) / "baselines.json", dumps(out))
    return out


def cmd_landscape(args) -> dict:
    rows = loss_landscape_grid(args.resolution)
    path = Path(args.out) / "landscape.csv"
    write_atomic(path, landscape_csv(rows))
    return {"file": str(path), "rows": len(rows)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evorat", description="Genetic search for select-then-predict rationalizers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="out"):
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seeds", "--seed", type=int, nargs="+", dest="seeds")
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--threads", type=int)
        return sp

    g = common(sub.add_parser("gen-data", help="generate the toy dataset as JSONL"), "data")
    g.add_argument("--total", type=int)
    g.add_argument("--string-len", type=int, dest="string_len")
    g.add_argument("--highlights", nargs="+")
    g.set_defaults(func=cmd_gen_data)

    e = common(sub.add_parser("evolve", help="run the search for each seed"))
    e.add_argument("-G", "--generations", type=int, dest="G")
    e.set_defaults(func=cmd_evolve)

    s = common(sub.add_parser("skew", help="search from a pre-trained skewed generator"))
    s.add_argument("-K", "--skew-epochs", type=int, dest="skew_epochs")
    s.add_argument("--mode", choices=["one_skewed", "all_noisy"], dest="skew_mode")
    s.add_argument("-G", "--generations", type=int, dest="G")
    s.set_defaults(func=lambda a: cmd_evolve(a, skew=True))

    b = common(sub.add_parser("baseline", help="string-matching highlight baselines"), None)
    b.add_argument("--average", choices=["example", "micro"], default="example")
    b.set_defaults(func=cmd_baseline)

    la = sub.add_parser("landscape", help="fitness vs. mean-cost grid as CSV")
    la.add_argument("--resolution", type=int, default=101)
    la.add_argument("--out", default="out")
    la.set_defaults(func=cmd_landscape)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        result = args.func(args)
    except (EvoratError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 2
    print(json.dumps(result, indent=1, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
