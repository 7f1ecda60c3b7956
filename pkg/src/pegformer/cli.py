"""Command-line entry point: gen-data, train, eval, sweep, ablate, pe-check.

Every subcommand accepts ``--seed`` and ``--config FILE`` (JSON or
``key = value`` lines supplying defaults for any flag). With ``--gate`` the
exit status is 1 when the subcommand's acceptance check fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .channels import gen_rayleigh, gen_saleh_valenzuela, load_dataset, save_dataset
from .equivariance import check_pe
from .models import ARCHS, EQUIVARIANT_AXES, ModelSpec, build_model
from .harness import TrainConfig, evaluate, train
from .harness.results import load_config, write_csv, write_json
from .harness.sweep import AXES, SweepConfig, ablate_gformer, sweep_generalize


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON or key=value file with defaults for any flag")
    p.add_argument("--gate", action="store_true", help="exit nonzero when the acceptance check fails")
    p.add_argument("-v", "--verbose", action="store_true")


def _model_flags(p: argparse.ArgumentParser, arch_default="gformer_2d") -> None:
    p.add_argument("--arch", choices=ARCHS, default=arch_default)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--nrf", type=int, default=0)
    p.add_argument("--widths", type=_ints, default=(32, 32, 32))
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--pos-enc", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pegformer", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-data", help="generate a channel dataset file")
    p.add_argument("--model", choices=("rayleigh", "sv"), default="rayleigh")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--rays", type=int, default=5)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("train", help="train a model on one or more dataset files")
    _model_flags(p)
    p.add_argument("--train", nargs="+", required=True, help="dataset file(s); mixed sizes allowed")
    p.add_argument("--val", help="validation dataset for early stopping")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--max-seconds", type=float)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--min-ratio", type=float, help="gate: minimum validation SE ratio")
    _common(p)

    p = sub.add_parser("eval", help="SE ratio of a checkpoint (or WMMSE itself) on a dataset")
    p.add_argument("--checkpoint", help="checkpoint file; omit to evaluate WMMSE against itself")
    p.add_argument("--data", required=True)
    p.add_argument("--nrf", type=int)
    p.add_argument("--out", help="results prefix (writes .csv and .json)")
    p.add_argument("--min-ratio", type=float, default=0.92, help="gate threshold")
    _common(p)

    p = sub.add_parser("sweep", help="train on mixed sizes, evaluate across unseen sizes")
    _model_flags(p)
    p.add_argument("--axis", choices=AXES, default="users")
    p.add_argument("--channel", choices=("rayleigh", "sv"), default="rayleigh")
    p.add_argument("--train-mean", type=float, default=3.0)
    p.add_argument("--train-cap", type=int, default=6)
    p.add_argument("--min-dim", type=int, default=1)
    p.add_argument("--test-dims", type=_ints, default=(2, 4, 6, 8))
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--max-seconds", type=float)
    p.add_argument("--checkpoint", help="sweep an existing checkpoint instead of training")
    p.add_argument("--out", help="results prefix (writes .csv and .json)")
    p.add_argument("--max-drop", type=float, default=0.10,
                   help="gate: allowed SE-ratio loss from the first to the last test dimension")
    _common(p)

    p = sub.add_parser("ablate", help="2D-Gformer vs F-2D-Gformer / w/o U^K / w/o U^V")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--snrs", type=_floats, default=(5.0, 10.0, 20.0))
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--widths", type=_ints, default=(32, 32, 32))
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--max-seconds", type=float, default=120.0, help="per variant and SNR")
    p.add_argument("--out", help="results prefix (writes .csv and .json)")
    _common(p)

    p = sub.add_parser("pe-check", help="measure permutation equivariance of a random-weight model")
    _model_flags(p)
    p.add_argument("--perm", choices=("user", "antenna", "rf", "joint"), default="joint")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", help="write the JSON report here as well as to stdout")
    _common(p)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = ap.parse_args(argv)
    if not args.config:
        return args
    cfg = load_config(args.config)
    sub = ap._subparsers._group_actions[0].choices[args.cmd]  # noqa: SLF001
    known = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for key, val in cfg.items():
        if key not in known:
            raise SystemExit(f"config key {key!r} is not a flag of {args.cmd}")
        act = known[key]
        if act.type is not None and isinstance(val, (str, int, float)):
            val = act.type(str(val)) if act.type in (_ints, _floats) else act.type(val)
        elif isinstance(val, list):
            val = tuple(val)
        defaults[key] = val
    sub.set_defaults(**defaults)
    return ap.parse_args(argv)


def _spec(args) -> ModelSpec:
    return ModelSpec(args.arch, tuple(args.widths), args.heads, args.n, args.k,
                     args.nrf if args.arch.endswith("_3d") else 0, pos_enc=args.pos_enc)


def _emit(rows, prefix, **meta):
    for r in rows:
        print(json.dumps(r.to_dict()))
    if prefix:
        write_csv(rows, f"{prefix}.csv")
        write_json(rows, f"{prefix}.json", **meta)


# ------------------------------------------------------------------ handlers

def cmd_gen_data(args) -> bool:
    if args.model == "rayleigh":
        ds = gen_rayleigh(args.n, args.k, args.count, args.snr_db, args.seed)
    else:
        ds = gen_saleh_valenzuela(args.n, args.k, args.clusters, args.rays, args.count, args.snr_db, args.seed)
    save_dataset(ds, args.out)
    print(json.dumps({"out": args.out, "count": ds.count, "N": ds.n, "K": ds.k, "snr_db": ds.snr_db}))
    return True


def cmd_train(args) -> bool:
    cfg = TrainConfig(_spec(args), list(args.train), args.val, args.epochs, args.batch_size, args.lr,
                      args.seed, args.out, args.patience, args.max_seconds)
    res = train(cfg)
    last = res.history[-1] if res.history else {}
    print(json.dumps({"checkpoint": res.checkpoint, "epochs": len(res.history), "aborted": res.aborted,
                      "message": res.message, "last": last}))
    ok = not res.aborted
    if args.min_ratio is not None:
        best = max((h.get("val_ratio", -np.inf) for h in res.history), default=-np.inf)
        ok = ok and best >= args.min_ratio
    return ok


def cmd_eval(args) -> bool:
    from .harness import evaluate_wmmse

    ds = load_dataset(args.data)
    row = evaluate(args.checkpoint, ds, nrf=args.nrf) if args.checkpoint else evaluate_wmmse(ds)
    _emit([row], args.out, data=args.data, checkpoint=args.checkpoint)
    return row.se_ratio_mean >= args.min_ratio


def cmd_sweep(args) -> bool:
    cfg = SweepConfig(args.axis, _spec(args), args.train_mean, args.train_cap, args.min_dim,
                      list(args.test_dims), args.n_train, args.n_test, snr_db=args.snr_db,
                      channel=args.channel, epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
                      seed=args.seed, max_seconds=args.max_seconds, checkpoint=args.checkpoint)
    rows = sweep_generalize(cfg)
    _emit(rows, args.out, axis=args.axis, arch=args.arch)
    drop = rows[0].se_ratio_mean - rows[-1].se_ratio_mean
    return drop <= args.max_drop


def cmd_ablate(args) -> bool:
    rows, table = ablate_gformer(args.snrs, args.n, args.k, args.n_train, args.n_test, widths=args.widths,
                                 heads=args.heads, lr=args.lr, batch_size=args.batch_size,
                                 epochs=args.epochs, max_seconds=args.max_seconds, seed=args.seed)
    _emit(rows, args.out, table={k: {str(s): v for s, v in d.items()} for k, d in table.items()})
    full, no_uk, soft = table["gformer_2d"], table["gformer_2d_no_uk"], table["f_2d_gformer"]
    ok = all(full[s] - no_uk[s] >= 0.10 for s in full)
    hi = max(full)
    return ok and full[hi] >= soft[hi]


def cmd_pe_check(args) -> bool:
    spec = _spec(args)
    model = build_model(spec, seed=args.seed)
    H = gen_rayleigh(args.n, args.k, 1, seed=args.seed + 1).H
    rep = check_pe(model, H, args.perm, args.trials, args.tol, seed=args.seed)
    axes = set(EQUIVARIANT_AXES[args.arch])
    moved = {"user": {"user"}, "antenna": {"antenna"}, "rf": {"rf"} if spec.hybrid else set(),
             "joint": {"user", "antenna", "rf"} if spec.hybrid else {"user", "antenna"}}[args.perm]
    expected = moved <= axes and not (args.pos_enc and "user" in moved)
    rep.update(arch=args.arch, N=args.n, K=args.k, NRF=spec.nrf, expected_pass=expected)
    rep.pop("deviations")
    text = json.dumps(rep, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text)
    return rep["pass"] == expected


HANDLERS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
            "ablate": cmd_ablate, "pe-check": cmd_pe_check}


def main(argv=None) -> int:
    ap = build_parser()
    args = _apply_config(ap, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ok = HANDLERS[args.cmd](args)
    if args.gate and not ok:
        print(f"gate failed: {args.cmd}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
