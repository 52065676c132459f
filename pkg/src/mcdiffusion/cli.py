"""Command line front end: ``mcdiff {stats,run,sweep,dump-sim,gen-synth,subsample}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import evaluation as ev
from .ingestion import (
    DATA_DIR_ENV,
    KNOWN_DATASETS,
    generate_synthetic,
    load_dataset,
    resolve_dataset,
    subsample_netflix,
    write_csv,
)
from .channels import build_channel_graph
from .ratings import DataError, InvariantError, dataset_stats, split_dataset
from .similarity import METHODS, diffusion_similarity, pearson_similarity

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(text: str, step: int = 1) -> list[int]:
    """``"1..5"``, ``"10..90"`` (with ``step``), ``"a..b:s"``, ``"3,7,9"`` or ``""`` (empty)."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            if ".." in part:
                lo, _, rest = part.partition("..")
                hi, _, st = rest.partition(":")
                out.extend(range(int(lo), int(hi) + 1, int(st) if st else step))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"cannot parse range {text!r}") from None
    return out


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
    return methods


def _add_dataset_args(p):
    p.add_argument(
        "--dataset",
        required=True,
        help=f"path to a rating file/directory, or 'ml100k' (looked up under ${DATA_DIR_ENV}, default ./data)",
    )
    p.add_argument("--format", choices=["movielens", "netflix", "csv"], default=None)
    p.add_argument("--scale-max", type=int, default=5)


def _add_experiment_args(p, default_p: str):
    p.add_argument("--methods", default="diffusion,pearson")
    p.add_argument("--p", default=default_p, help="probe percentages, e.g. 10 or 10..90")
    p.add_argument("--seeds", default="1..5")
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--tag", default=None, help="dataset label used in reports")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--kappa", choices=["signed", "absolute"], default="signed")
    p.add_argument("--clamp", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--pearson-mean", choices=["common", "global"], default="common")
    p.add_argument("--pearson-min-common", type=int, default=2)
    p.add_argument("--top-k", type=int, default=None, help="experimental neighbour cap")
    p.add_argument("--dump-predictions", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mcdiff", description="Multi-channel diffusion collaborative filtering benchmark")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", help="print dataset statistics")
    _add_dataset_args(p)

    p = sub.add_parser("run", help="averaged MAE/RMSE for each method and p")
    _add_dataset_args(p)
    _add_experiment_args(p, "10")

    p = sub.add_parser("sweep", help="density sweep over p = 10..90")
    _add_dataset_args(p)
    _add_experiment_args(p, "10..90")

    p = sub.add_parser("dump-sim", help="write similarity columns as u,v,score")
    _add_dataset_args(p)
    p.add_argument("--method", choices=list(METHODS), default="diffusion")
    p.add_argument("--users", default="", help="source users v, e.g. 0..9 (empty: none)")
    p.add_argument("--p", type=int, default=None, help="compute on the training part of a split")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--pearson-mean", choices=["common", "global"], default="common")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("gen-synth", help="write a synthetic dataset as canonical CSV")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--scale-max", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--user-bias-spread", type=float, default=0.5)
    p.add_argument("--item-bias-spread", type=float, default=0.7)
    p.add_argument("--noise", type=float, default=0.8)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("subsample", help="degree-constrained random subsample")
    _add_dataset_args(p)
    p.add_argument("--target-users", type=int, default=3000)
    p.add_argument("--target-items", type=int, default=3000)
    p.add_argument("--min-user-degree", type=int, default=45)
    p.add_argument("--min-item-degree", type=int, default=23)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    return ap


def _load(args):
    return load_dataset(args.dataset, args.format, args.scale_max)


def cmd_stats(args) -> int:
    d = _load(args)
    path, fmt = resolve_dataset(args.dataset, args.format)
    print(f"dataset: {path} ({fmt})")
    s = dataset_stats(d)
    print(f"m={s.num_users} n={s.num_items} ratings={s.num_ratings}")
    for line in s.lines():
        print(line)
    return EXIT_OK


def resolved_config(args) -> tuple[dict, ev.ExperimentConfig]:
    """Fully resolved run settings; the dict is what reports embed."""
    path, fmt = resolve_dataset(args.dataset, args.format)
    ps = parse_range(args.p, step=10)
    seeds = parse_range(args.seeds)
    if not ps or any(not 10 <= p <= 90 for p in ps):
        raise UsageError(f"--p must list values in 10..90, got {args.p!r}")
    if not seeds:
        raise UsageError("--seeds is empty")
    exp = ev.ExperimentConfig(
        kappa=args.kappa,
        clamp=args.clamp,
        pearson_mean=args.pearson_mean,
        pearson_min_common=args.pearson_min_common,
        top_k=args.top_k,
    )
    cfg = {
        "dataset": str(path),
        "format": fmt,
        "tag": args.tag or (args.dataset if args.dataset in KNOWN_DATASETS else Path(args.dataset).stem),
        "methods": _methods(args.methods),
        "p": ps,
        "seeds": seeds,
        "scale_max": args.scale_max,
        **ev.config_snapshot(exp),
    }
    return cfg, exp


def cmd_run(args) -> int:
    cfg, exp = resolved_config(args)
    d = _load(args)
    reports = ev.density_sweep(
        d, cfg["methods"], cfg["p"], cfg["seeds"], exp, dataset_tag=cfg["tag"], threads=args.threads
    )
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(ev.render_report_csv(reports, cfg))
    (out / "wide.csv").write_text(ev.render_wide_csv(reports, cfg))
    (out / "config.json").write_text(
        json.dumps({**cfg, "threads": args.threads, "out": str(out)}, indent=2, sort_keys=True) + "\n"
    )
    if args.dump_predictions:
        for method in cfg["methods"]:
            for p in cfg["p"]:
                for k, seed in enumerate(cfg["seeds"]):
                    _, preds = ev.evaluate_split(split_dataset(d, p, seed), method, exp)
                    preds.write_csv(out / f"predictions_{method}_p{p}_run{k}.csv")
    print(ev.summary_table(reports))
    print(f"reports written to {out}/")
    return EXIT_OK


def cmd_dump_similarity(args) -> int:
    d = _load(args)
    users = parse_range(args.users)
    if any(not 0 <= v < d.num_users for v in users):
        raise UsageError(f"source users must lie in 0..{d.num_users - 1}")
    train = split_dataset(d, args.p, args.seed).train if args.p is not None else d
    if args.method == "diffusion":
        S = diffusion_similarity(build_channel_graph(train))
    else:
        S = pearson_similarity(train, mean=args.pearson_mean)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    S.write_csv(args.out, sources=users)
    print(f"wrote {sum(len(S.column(v)[0]) for v in users)} entries to {args.out}")
    return EXIT_OK


def cmd_gen_synth(args) -> int:
    d = generate_synthetic(
        args.m,
        args.n,
        args.density,
        scale_max=args.scale_max,
        seed=args.seed,
        user_bias_spread=args.user_bias_spread,
        item_bias_spread=args.item_bias_spread,
        noise=args.noise,
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(d, args.out)
    print(f"wrote {len(d)} ratings ({d.num_users} x {d.num_items}) to {args.out}")
    return EXIT_OK


def cmd_subsample(args) -> int:
    d = _load(args)
    s = subsample_netflix(
        d,
        args.target_users,
        args.target_items,
        args.min_user_degree,
        args.min_item_degree,
        seed=args.seed,
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(s, args.out)
    st = dataset_stats(s)
    print(f"wrote m={st.num_users} n={st.num_items} ratings={st.num_ratings} to {args.out}")
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "run": cmd_run,
    "sweep": cmd_run,
    "dump-sim": cmd_dump_similarity,
    "gen-synth": cmd_gen_synth,
    "subsample": cmd_subsample,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mcdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"mcdiff: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataError, OSError) as exc:
        print(f"mcdiff: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"mcdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
