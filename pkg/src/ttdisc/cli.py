"""Command-line entry point: ``ttdisc <command> [options]``.

Every experiment option can come from ``--config FILE`` (``key=value`` lines),
from ``--set key=value`` or from the matching ``--key`` flag; later sources
win. Failures exit with status 1 and one JSON line on stderr::

    {"error": "ValueError", "message": "..."}
"""
import argparse
import json
import logging
import sys

import numpy as np

from .classify import accuracy, nn1_classify
from .data import SyntheticSpec, class_mean_distances, generate_synthetic
from .experiment import (
    CSV_HEADER,
    CONFIG_PARSERS,
    load_config,
    model_features,
    model_manifest,
    run,
    sweep,
    write_results,
)
from .io import load_dataset, read_tten, save_chain, save_dataset
from .tt import chain_contract, tt_svd


def _add_config_flags(p):
    p.add_argument("--config", help="key=value experiment file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    for key in CONFIG_PARSERS:
        flag = "--" + key.replace("_", "-")
        extra = ["--lambda"] if key == "lam" else []
        p.add_argument(flag, *extra, dest=f"cfg_{key}", default=None, metavar="VALUE")


def _config(args, **fixed):
    overrides = list(args.set)
    for key in CONFIG_PARSERS:
        value = getattr(args, f"cfg_{key}", None)
        if value is not None:
            overrides.append(f"{key}={value}")
    overrides += [f"{k}={v}" for k, v in fixed.items() if v is not None]
    return load_config(args.config, overrides)


def _print_record(r):
    print(",".join(CSV_HEADER))
    print(",".join("" if r.get(k) is None else str(r.get(k)) for k in CSV_HEADER))


def cmd_decompose(args):
    t = read_tten(args.input)
    ranks = [int(v) for v in args.ranks.split(",")] if args.ranks else None
    chain = tt_svd(t, ranks=ranks, tau=None if ranks else args.tau)
    approx = chain_contract(chain).reshape(t.shape, order="F")
    norm = np.linalg.norm(t)
    err = np.linalg.norm(approx - t) / norm if norm > 0 else float(np.linalg.norm(approx))
    if args.output:
        save_chain(args.output, chain)
    print(json.dumps({"shape": list(t.shape), "ranks": list(chain.ranks),
                      "relative_error": float(err), "elements": int(chain.size)}))
    return 0


def cmd_synth(args):
    spec = SyntheticSpec(
        shape=tuple(int(v) for v in args.shape.split(",")), n_classes=args.classes,
        n_per_class=args.per_class, ranks=tuple(int(v) for v in args.ranks.split(",")),
        separation=args.separation, sigma=args.sigma, seed=args.seed)
    data = generate_synthetic(spec)
    save_dataset(args.output, data)
    d = class_mean_distances(data)
    off = d[~np.eye(len(d), dtype=bool)]
    print(json.dumps({"samples": len(data), "shape": list(data.shape),
                      "classes": int(len(data.classes)),
                      "min_mean_distance": float(off.min()) if off.size else 0.0}))
    return 0


def cmd_train(args):
    cfg = _config(args)
    record = run(cfg)
    _print_record(record)
    return 0


def cmd_eval(args):
    data = load_dataset(args.data)
    shape = tuple(model_manifest(args.model)["sample_shape"])
    if data.shape != shape:
        data = data.reshape(shape)
    F, train_f, train_y, _ = model_features(args.model, data.X)
    acc = accuracy(nn1_classify(train_f, train_y, F), data.y)
    print(json.dumps({"samples": len(data), "accuracy": acc}))
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    taus = [float(v) for v in args.taus.split(",")] if args.taus else None
    methods = args.methods.split(",") if args.methods else None
    records = sweep(cfg, taus=taus, ranks=args.rank_grid or None, methods=methods)
    if cfg.output is None:
        write_results(records, sys.stdout)
    failed = [r for r in records if r.get("error")]
    for r in failed:
        print(json.dumps({"error": "point_failed", "method": r["method"], "tau": r.get("tau"),
                          "ranks": r.get("ranks"), "message": r["error"]}), file=sys.stderr)
    return 0


def cmd_bench(args):
    methods = (args.methods or "ttda,2wttda,3wttda").split(",")
    cfg = _config(args, record_time="true")
    records = sweep(cfg, methods=methods)
    if cfg.output is None:
        write_results(records, sys.stdout)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ttdisc", description="Tensor-train discriminant analysis")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="TT-SVD of one TTEN file")
    p.add_argument("input")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--tau", type=float)
    g.add_argument("--ranks", help="comma-separated R_1..R_N")
    p.add_argument("--output", help="write the chain container here")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("synth", help="write a synthetic TTEN dataset")
    p.add_argument("--output", required=True)
    p.add_argument("--shape", default="4,4,4,4")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--ranks", default="1,2,2,2,1")
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="repeated train/test run; saves the first model")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="1-NN accuracy of a saved model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="storage/accuracy sweep over tau or rank grids")
    _add_config_flags(p)
    p.add_argument("--taus", help="comma-separated tau grid")
    p.add_argument("--rank-grid", action="append", help="one rank setting per flag")
    p.add_argument("--methods", help="comma-separated methods")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="training time and accuracy per method")
    _add_config_flags(p)
    p.add_argument("--methods", help="comma-separated methods (default ttda,2wttda,3wttda)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
