"""Command-line entry point: ``ssbnn {train,eval,plan,flops,gen-data}``.

Exit codes: 0 on success, 2 for usage or configuration errors, 1 for
failures while running (unreadable data, divergence, corrupt checkpoints).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .metrics import flops_table, parse_architecture, sparsity_report
from .planner import plan
from .sampling import SeededRng
from .training import STREAM_EVAL, build_model, evaluate, metric_name, train, write_trace_csv


class UsageError(Exception):
    pass


# flag name -> RunConfig field, for flags shared by train/plan
OVERRIDE_FLAGS = {
    "widths": "widths", "prior": "prior", "parameterization": "parameterization",
    "likelihood": "likelihood", "activation": "activation", "epochs": "epochs",
    "batch_size": "batch_size", "samples": "samples", "lr": "lr", "optimizer": "optimizer",
    "out_dir": "out_dir", "train_limit": "train_limit", "test_limit": "test_limit",
    "pixel_scale": "pixel_scale", "n": "n", "lambdas": "lambdas",
}


def _add_overrides(p: argparse.ArgumentParser, names: list[str]) -> None:
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, metavar="VALUE")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")


def _run_config(args, require_seed: bool = False) -> sio.RunConfig:
    try:
        cfg = sio.load_config(args.config) if args.config else sio.RunConfig()
        overrides = {}
        for name, field in OVERRIDE_FLAGS.items():
            value = getattr(args, name, None)
            if value is not None:
                overrides[field] = value
        for item in args.set:
            if "=" not in item:
                raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value
        if getattr(args, "seed", None) is not None:
            overrides["seed"] = str(args.seed)
        cfg = sio.override_config(cfg, overrides)
        return cfg.validate(require_seed=require_seed)
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {exc.filename}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_split(cfg: sio.RunConfig, split: str) -> sio.Dataset | None:
    if cfg.data_format == "csv":
        path = cfg.train_csv if split == "train" else cfg.test_csv
        if not path:
            return None
        ds = sio.read_csv_dataset(path, split)
    else:
        images = cfg.train_images if split == "train" else cfg.test_images
        labels = cfg.train_labels if split == "train" else cfg.test_labels
        if not images:
            return None
        ds = sio.preprocess_mnist(sio.load_idx_dataset(images, labels, split), cfg.pixel_scale)
    limit = cfg.train_limit if split == "train" else cfg.test_limit
    return ds.head(limit) if limit else ds


def cmd_train(args) -> int:
    cfg = _run_config(args, require_seed=True)
    if not cfg.widths:
        raise UsageError("widths must be set")
    train_ds = _load_split(cfg, "train")
    if train_ds is None:
        raise UsageError("no training data configured (train_images/train_labels or train_csv)")
    test_ds = _load_split(cfg, "test")
    if train_ds.inputs.shape[1] != cfg.widths[0]:
        raise UsageError(f"widths[0]={cfg.widths[0]} but training inputs have "
                         f"{train_ds.inputs.shape[1]} columns")
    try:
        lambdas = cfg.lambdas or plan(cfg.topology(len(train_ds)), _plan_kind(cfg)).hidden_lambdas()
        net_cfg = cfg.network_config(lambdas)
        train_cfg = cfg.train_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    model = build_model(net_cfg, train_cfg.seed)
    ev = (test_ds.inputs, test_ds.targets) if test_ds is not None else (None, None)
    result = train(model, train_ds.inputs, train_ds.targets, train_cfg, x_eval=ev[0], y_eval=ev[1],
                   log=None if args.quiet else _print_row)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(result.trace, out / "metrics.csv")
    sio.checkpoint_save(model, out / "checkpoint.json",
                        extra={"seed": train_cfg.seed, "epochs_run": len(result.trace)})
    (out / "config.cfg").write_text(sio.serialize_config(
        dataclasses.replace(cfg, lambdas=tuple(lambdas))), encoding="utf-8")
    print(f"wrote {out / 'checkpoint.json'} and {out / 'metrics.csv'}")
    return 0


def _plan_kind(cfg: sio.RunConfig) -> str:
    # SS-IG has no dedicated rate formulas; it uses the generic form with lambda_pen
    # matching the group-lasso planner's default
    return "ss-ghs" if cfg.prior == "ss-ghs" else "ss-gl"


def _print_row(row: dict) -> None:
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()),
          flush=True)


def cmd_eval(args) -> int:
    ck = sio.checkpoint_load(args.checkpoint)
    model = ck.model
    if args.csv:
        ds = sio.read_csv_dataset(args.csv, "test")
    elif args.images:
        if not args.labels:
            raise UsageError("--images needs --labels")
        ds = sio.preprocess_mnist(sio.load_idx_dataset(args.images, args.labels, "test"),
                                  args.pixel_scale)
    else:
        ds = None
    print("layer,node_sparsity")
    report = sparsity_report(model.layers)
    for i, v in enumerate(report.node_sparsity):
        print(f"{i},{v!r}")
    print(f"compression,{report.compression!r}")
    print(f"flops_ratio,{report.flops_ratio!r}")
    if ds is not None:
        if args.limit:
            ds = ds.head(args.limit)
        value = evaluate(model, ds.inputs, ds.targets, args.samples,
                         SeededRng(args.seed, STREAM_EVAL))
        print(f"{metric_name(model)},{value!r}")
    return 0


def cmd_plan(args) -> int:
    cfg = _run_config(args)
    try:
        spec = cfg.topology()
        kind = args.kind or _plan_kind(cfg)
        result = plan(spec, kind)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(result.to_csv())
    return 0


def cmd_flops(args) -> int:
    try:
        shapes = parse_architecture(Path(args.arch).read_text(encoding="utf-8"))
        table = flops_table(shapes)
    except FileNotFoundError:
        raise UsageError(f"architecture file not found: {args.arch}") from None
    except ValueError as exc:
        raise UsageError(f"{args.arch}: {exc}") from None
    print("layer,kind,dense_flops,pruned_flops")
    for i, (shape, (dense, pruned)) in enumerate(zip(shapes, table)):
        print(f"{i},{shape.kind},{dense},{pruned}")
    total_dense = sum(d for d, _ in table)
    total_pruned = sum(p for _, p in table)
    print(f"total,,{total_dense},{total_pruned}")
    print(f"ratio,,,{total_pruned / total_dense!r}")
    return 0


def cmd_gen_data(args) -> int:
    try:
        hidden = tuple(int(h) for h in args.hidden.split(",") if h.strip())
        teacher = sio.TeacherSpec(args.teacher, args.p, args.c, hidden, args.s, args.B, args.seed)
        train_ds, test_ds = sio.gen_synthetic(teacher, args.n, args.noise, args.seed, args.n_test)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ds in (train_ds, test_ds):
        if args.format == "csv":
            sio.write_csv_dataset(ds, out / f"{ds.split}.csv")
        else:
            sio.write_idx(sio.idx_from_array(ds.inputs), out / f"{ds.split}-x.idx")
            sio.write_idx(sio.idx_from_array(ds.targets.astype(np.float64)), out / f"{ds.split}-y.idx")
    print(f"wrote {len(train_ds)} train and {len(test_ds)} test rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssbnn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--quiet", action="store_true")
    _add_overrides(p, list(OVERRIDE_FLAGS))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--csv")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pixel-scale", type=float, default=sio.MNIST_PIXEL_SCALE)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="rate quantities and inclusion probabilities")
    p.add_argument("--config")
    p.add_argument("--kind", choices=("ss-gl", "ss-ghs"))
    _add_overrides(p, ["widths", "n", "prior"])
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("flops", help="FLOPs table for an architecture description")
    p.add_argument("arch")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("gen-data", help="synthetic regression data from a teacher")
    p.add_argument("--teacher", default="sin", choices=sio.TEACHERS)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--hidden", default="8")
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--B", type=float, default=2.0)
    p.add_argument("--format", choices=("csv", "idx"), default="csv")
    p.add_argument("--out-dir", default="data")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ssbnn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"ssbnn {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
