"""Operator surface: train / evaluate / analyze / sweep subcommands.

Runs are driven by flat ``key = value`` config files (# starts a
comment). Unknown keys are rejected. Every run writes the fully
resolved configuration next to its outputs, and any subcommand is
reproducible from that file alone. Exit codes: 0 success, 1 user error
(config or data), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace

import numpy as np

from .analysis import (neg_weight_cdf, run_sweep, score_gap_report,
                       substitution_histogram, write_csv)
from .dataset import load_dataset
from .errors import EansError, ConfigError
from .evaluator import evaluate
from .index_space import VirtualIndexMap
from .params import load_checkpoint
from .trainer import TrainConfig, TrainLog, train, run_ablation

# ---------------------------------------------------------------------------
# config keys


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_opt_float(text: str):
    return None if text.lower() in ("none", "") else float(text)


def _parse_int_list(text: str):
    return [int(x) for x in text.split(",") if x.strip()]


def _parse_str_list(text: str):
    return [x.strip() for x in text.split(",") if x.strip()]


_TRAIN_PARSERS = {
    "model": str,
    "dim": int,
    "batch_size": int,
    "negatives": int,
    "learning_rate": float,
    "gamma": float,
    "lambda1": float,
    "lambda2": float,
    "lambda1_reg": _parse_opt_float,
    "alpha": _parse_opt_float,
    "sigma": _parse_opt_float,
    "k": int,
    "max_steps": int,
    "reorder_interval": int,
    "strategy": str,
    "use_substitution": _parse_bool,
    "use_self_adv": _parse_bool,
    "seed": int,
    "eval_interval": int,
    "checkpoint_interval": int,
    "kmeans_iters": int,
    "transe_norm": str,
    "sub_reg": str,
}

_EXTRA_PARSERS = {
    "dataset_dir": str,
    "out_dir": str,
    "sweep_n_values": _parse_int_list,
    "sweep_methods": _parse_str_list,
    "sweep_split": str,
    "analysis_batches": int,
    "histogram_bins": int,
}

_EXTRA_DEFAULTS = {
    "dataset_dir": "",
    "out_dir": "out",
    "sweep_n_values": [1, 4, 8, 16],
    "sweep_methods": ["eans", "selfadv"],
    "sweep_split": "test",
    "analysis_batches": 100,
    "histogram_bins": 50,
}

ALL_KEYS = dict(_TRAIN_PARSERS) | dict(_EXTRA_PARSERS)


class RunConfig:
    """Flat run configuration: TrainConfig fields plus operator keys."""

    def __init__(self, train_cfg: TrainConfig | None = None, **extras):
        self.train = train_cfg or TrainConfig()
        self.extras = dict(_EXTRA_DEFAULTS)
        self.extras.update(extras)

    def apply(self, values: dict[str, str], origin: str) -> None:
        for key, raw in values.items():
            if key not in ALL_KEYS:
                raise ConfigError(f"{origin}: unknown key {key!r}")
            try:
                value = ALL_KEYS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{origin}: bad value for {key}: {exc}") from exc
            if key in _TRAIN_PARSERS:
                self.train = replace(self.train, **{key: value})
            else:
                self.extras[key] = value

    def __getattr__(self, name):
        extras = object.__getattribute__(self, "extras")
        if name in extras:
            return extras[name]
        raise AttributeError(name)

    def resolved_text(self) -> str:
        lines = ["# resolved configuration"]
        for f in fields(TrainConfig):
            value = getattr(self.train, f.name)
            lines.append(f"{f.name} = {_render(value)}")
        for key in sorted(self.extras):
            lines.append(f"{key} = {_render(self.extras[key])}")
        return "\n".join(lines) + "\n"

    def write_resolved(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "resolved.cfg"), "w", encoding="utf-8") as fh:
            fh.write(self.resolved_text())


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
    return values


# ---------------------------------------------------------------------------
# presets: full-scale benchmark regimes plus desk-scale toy runs

_FB_COMMON = dict(dim="1000", batch_size="1024", negatives="256", max_steps="100000",
                  k="100", reorder_interval="1000", strategy="eans",
                  use_substitution="true", lambda2="1.0", alpha="1.0",
                  eval_interval="10000")
_WN_COMMON = dict(dim="500", batch_size="512", negatives="1024", max_steps="80000",
                  k="100", reorder_interval="1000", strategy="eans",
                  use_substitution="true", lambda2="0.05", lambda1="0.01",
                  eval_interval="10000")
_TOY_COMMON = dict(dim="100", batch_size="256", negatives="16", max_steps="5000",
                   learning_rate="0.003", gamma="6.0", lambda1="0.1", lambda2="1.0",
                   alpha="1.0", k="9", reorder_interval="1000", strategy="eans",
                   use_substitution="true", eval_interval="0",
                   dataset_dir="data/toy")

PRESETS: dict[str, dict[str, str]] = {}
for _model, _lr, _gamma, _lam1 in (
    ("transe", "5e-5", "9.0", "0.1"),
    ("transd", "5e-5", "9.0", "0.1"),
    ("distmult", "0.001", "200.0", "0.05"),
    ("complex", "0.001", "200.0", "0.05"),
    ("rotate", "5e-5", "9.0", "0.1"),
):
    PRESETS[f"fb15k237-{_model}"] = dict(_FB_COMMON, model=_model, learning_rate=_lr,
                                         gamma=_gamma, lambda1=_lam1)
for _model, _lr, _gamma, _alpha in (
    ("transe", "5e-5", "6.0", "0.5"),
    ("transd", "5e-5", "6.0", "0.5"),
    ("distmult", "0.002", "200.0", "1.0"),
    ("complex", "0.002", "200.0", "1.0"),
    ("rotate", "5e-5", "6.0", "0.5"),
):
    PRESETS[f"wn18rr-{_model}"] = dict(_WN_COMMON, model=_model, learning_rate=_lr,
                                       gamma=_gamma, alpha=_alpha)
for _model in ("transe", "transd", "distmult", "complex", "rotate"):
    PRESETS[f"toy-{_model}"] = dict(_TOY_COMMON, model=_model)


def build_config(preset: str | None, config_path: str | None,
                 overrides: list[str] | None) -> RunConfig:
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: "
                              + ", ".join(sorted(PRESETS)))
        cfg.apply(PRESETS[preset], origin=f"preset {preset}")
    if config_path is not None:
        cfg.apply(parse_config_file(config_path), origin=config_path)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.apply({key.strip(): value.strip()}, origin="--set")
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = build_config(args.preset, args.config, args.set)
    if args.data:
        cfg.extras["dataset_dir"] = args.data
    if args.out:
        cfg.extras["out_dir"] = args.out
    if not cfg.dataset_dir:
        raise ConfigError("no dataset_dir configured")
    dataset = load_dataset(cfg.dataset_dir)
    print(dataset.report.to_text())
    cfg.write_resolved(cfg.out_dir)
    _, log = train(dataset, cfg.train, out_dir=cfg.out_dir, resume_from=args.resume)
    final = log.records[-1].loss if log.records else float("nan")
    print(f"trained {cfg.train.max_steps} steps; final loss {final:.6f}")
    print(f"outputs in {cfg.out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if ckpt.params.n_entities != dataset.n_entities:
        raise ConfigError(
            f"entity count mismatch: checkpoint has {ckpt.params.n_entities}, "
            f"dataset has {dataset.n_entities}")
    if ckpt.params.n_relations != dataset.n_relations:
        raise ConfigError(
            f"relation count mismatch: checkpoint has {ckpt.params.n_relations}, "
            f"dataset has {dataset.n_relations}")
    if args.split == "train":
        print("warning: evaluating on the training split", file=sys.stderr)
    triples = dataset.splits[args.split]
    metrics = evaluate(ckpt.params, triples, dataset.filter, filtered=not args.raw)
    doc = {
        "dataset": args.data,
        "split": args.split,
        "model": ckpt.params.kind,
        "strategy": ckpt.strategy,
        "filtered": not args.raw,
        "mr": metrics.mr,
        "mrr": metrics.mrr,
        "hits": {str(k): v for k, v in metrics.hits.items()},
        "head_mrr": metrics.head.mrr,
        "tail_mrr": metrics.tail.mrr,
    }
    print(json.dumps(doc, indent=2))
    out_dir = args.out or os.path.dirname(os.path.dirname(args.checkpoint)) or "."
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    header = "dataset,model,strategy," + type(metrics).CSV_HEADER
    line = f"{args.data},{ckpt.params.kind},{ckpt.strategy},{metrics.csv_row()}"
    new_file = not os.path.exists(metrics_path)
    with open(metrics_path, "a", encoding="utf-8") as fh:
        if new_file:
            fh.write(header + "\n")
        fh.write(line + "\n")
    return 0


def _analysis_dir(cfg: RunConfig) -> str:
    path = os.path.join(cfg.out_dir, "analysis")
    os.makedirs(path, exist_ok=True)
    return path


def cmd_analyze(args) -> int:
    cfg = build_config(args.preset, args.config, args.set)
    if args.data:
        cfg.extras["dataset_dir"] = args.data
    if args.out:
        cfg.extras["out_dir"] = args.out
    dataset = load_dataset(cfg.dataset_dir)
    out = _analysis_dir(cfg)
    cfg.write_resolved(cfg.out_dir)
    digest = cfg.train.digest()

    checkpoints = [load_checkpoint(path) for path in args.checkpoints]
    for ckpt in checkpoints:
        if ckpt.params.n_entities != dataset.n_entities:
            raise ConfigError("entity count mismatch between checkpoint and dataset")

    if args.kind == "gap":
        entries = [
            (c.step, c.params,
             None if c.virt_to_real is None
             else VirtualIndexMap.from_permutation(c.virt_to_real))
            for c in checkpoints
        ]
        rows = score_gap_report(entries, dataset, cfg.train,
                                n_batches=cfg.analysis_batches)
        write_csv(os.path.join(out, "gap.csv"),
                  ["step", "mean_f_pos", "mean_f_neg",
                   "neg_mean_f_pos", "neg_mean_f_neg"], rows, digest)
        print(os.path.join(out, "gap.csv"))
    elif args.kind == "cdf":
        ckpt = checkpoints[0]
        vmap = (None if ckpt.virt_to_real is None
                else VirtualIndexMap.from_permutation(ckpt.virt_to_real))
        cdf = neg_weight_cdf(ckpt.params, dataset, cfg.train,
                             n_batches=cfg.analysis_batches, vmap=vmap)
        rows = [{"rank": i + 1, "cumulative_weight": float(v)}
                for i, v in enumerate(cdf)]
        write_csv(os.path.join(out, "cdf.csv"), ["rank", "cumulative_weight"],
                  rows, digest)
        print(os.path.join(out, "cdf.csv"))
    elif args.kind == "hist":
        ckpt = checkpoints[0]
        vmap = (None if ckpt.virt_to_real is None
                else VirtualIndexMap.from_permutation(ckpt.virt_to_real))
        edges, counts = substitution_histogram(
            ckpt.params, dataset, cfg.train, bins=cfg.histogram_bins,
            n_batches=cfg.analysis_batches, vmap=vmap,
            substitution_trained=ckpt.substitution_trained)
        rows = []
        for group, values in counts.items():
            for b in range(len(values)):
                rows.append({"group": group, "bin_lo": float(edges[b]),
                             "bin_hi": float(edges[b + 1]), "count": int(values[b])})
        write_csv(os.path.join(out, "hist.csv"),
                  ["group", "bin_lo", "bin_hi", "count"], rows, digest)
        print(os.path.join(out, "hist.csv"))
    else:
        raise ConfigError(f"unknown analysis kind {args.kind!r}")
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args.preset, args.config, args.set)
    if args.data:
        cfg.extras["dataset_dir"] = args.data
    if args.out:
        cfg.extras["out_dir"] = args.out
    dataset = load_dataset(cfg.dataset_dir)
    out = _analysis_dir(cfg)
    cfg.write_resolved(cfg.out_dir)
    rows = run_sweep(dataset, cfg.train, cfg.sweep_n_values, cfg.sweep_methods,
                     seeds=(cfg.train.seed,), split=cfg.sweep_split)
    for row in rows:
        row.pop("mrr_per_seed", None)
    write_csv(os.path.join(out, "sweep.csv"), ["method", "n", "mrr", "hit10"],
              rows, cfg.train.digest())
    print(os.path.join(out, "sweep.csv"))
    return 0


def cmd_ablation(args) -> int:
    cfg = build_config(args.preset, args.config, args.set)
    if args.data:
        cfg.extras["dataset_dir"] = args.data
    if args.out:
        cfg.extras["out_dir"] = args.out
    dataset = load_dataset(cfg.dataset_dir)
    out = _analysis_dir(cfg)
    cfg.write_resolved(cfg.out_dir)
    rows = run_ablation(dataset, cfg.train, seeds=(cfg.train.seed,),
                        split=cfg.sweep_split)
    write_csv(os.path.join(out, "ablation.csv"), ["gauss", "subs", "mrr", "hit10"],
              rows, cfg.train.digest())
    print(os.path.join(out, "ablation.csv"))
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--preset", help="named preset (see --list-presets)")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one config key (repeatable)")
    sub.add_argument("--data", help="dataset directory (overrides dataset_dir)")
    sub.add_argument("--out", help="output directory (overrides out_dir)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eans",
        description="Knowledge-graph embedding training with entity-aware "
                    "negative sampling.")
    parser.add_argument("--list-presets", action="store_true",
                        help="print available presets and exit")
    sub = parser.add_subparsers(dest="command")

    p_train = sub.add_parser("train", help="run the training loop")
    _add_common(p_train)
    p_train.add_argument("--resume", help="checkpoint to resume from")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="filtered link prediction metrics")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("--data", required=True, help="dataset directory")
    p_eval.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p_eval.add_argument("--raw", action="store_true", help="disable filtering")
    p_eval.add_argument("--out", help="directory for metrics.csv")
    p_eval.set_defaults(func=cmd_evaluate)

    p_an = sub.add_parser("analyze", help="diagnostic CSV artifacts")
    p_an.add_argument("kind", choices=("gap", "cdf", "hist"))
    p_an.add_argument("checkpoints", nargs="+")
    _add_common(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_sw = sub.add_parser("sweep", help="negative-count x method metric grid")
    _add_common(p_sw)
    p_sw.set_defaults(func=cmd_sweep)

    p_ab = sub.add_parser("ablation", help="2x2 sampling/substitution grid")
    _add_common(p_ab)
    p_ab.set_defaults(func=cmd_ablation)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        for name in sorted(PRESETS):
            print(name)
        return 0
    if args.command is None:
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except (EansError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
