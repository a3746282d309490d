"""Operator command line: training, running, cleaning, predicting, and
benchmarking. Exit codes: 0 success, 1 usage error, 2 runtime failure."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import report
from .config import TwinConfig
from .datamodel import Dataset, SnapshotMatrix, load_dataset, save_dataset, unstack
from .errors import TwinError
from .pipeline import (
    RuntimeState,
    load_model,
    process_frame,
    request_prediction,
    save_model,
    train,
)
from .prediction import evaluate_rmse
from .rpca import RpcaParams, rpca, rpca_bench
from .simulator import generate_training_sweep


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exit code 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _load_config(path: str | None) -> TwinConfig:
    path = path or os.environ.get("TWIN_CONFIG")
    return TwinConfig.load(path) if path else TwinConfig()


def build_parser() -> _Parser:
    p = _Parser(prog="thermaltwin",
                description="Predictive digital twin for a heated plate: "
                            "train, run, replay, clean, predict, benchmark.")
    p.add_argument("--config", help="path to a JSON config file "
                                    "(default: $TWIN_CONFIG or built-ins)")
    p.add_argument("--seed", type=int, default=0,
                   help="random seed; every subcommand is deterministic "
                        "under a fixed seed (default: 0)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    sp = sub.add_parser("sweep", parents=[], description=None,
                        help="generate the voltage-sweep training datasets")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--voltages",
                    help="comma-separated volts (default: 10,20,...,120)")

    tp = sub.add_parser("train", help="fit a model from sweep data")
    tp.add_argument("--data", required=True, help="directory of .therm files")
    tp.add_argument("--rank", type=int, default=3,
                    help="number of basis modes (default: 3)")
    tp.add_argument("--sensors", type=int, default=3,
                    help="number of sampled pixels (default: 3)")
    tp.add_argument("--out", required=True, help="model archive path")

    rp = sub.add_parser("run", help="live simulator + monitoring service")
    rp.add_argument("--model", required=True, help="model archive path")
    rp.add_argument("--serve", default=None,
                    help="host:port (default: $TWIN_ADDR or 127.0.0.1:8080)")
    rp.add_argument("--voltage", type=float, default=85.0,
                    help="initial coil voltage (default: 85)")

    pp = sub.add_parser("replay", help="re-run a persisted run; verify "
                                       "verdicts reproduce byte-for-byte")
    pp.add_argument("--run", required=True, help="run directory")
    pp.add_argument("--model", required=True, help="model archive path")
    pp.add_argument("--out", help="write replayed verdicts (JSON lines)")

    cp = sub.add_parser("rpca", help="batch low-rank + sparse cleaning")
    cp.add_argument("--in", dest="infile", required=True,
                    help="input .therm file")
    cp.add_argument("--window", type=int, default=50,
                    help="frames per decomposition window (default: 50)")
    cp.add_argument("--lambda", dest="lam", default="0.001",
                    help="sparsity weight, or 'auto' for a scale-invariant "
                         "choice (default: 0.001)")
    cp.add_argument("--mu", default="1e-5",
                    help="augmented Lagrangian penalty, or 'auto' "
                         "(default: 1e-5)")
    cp.add_argument("--max-iter", type=int, default=500,
                    help="iteration cap per window (default: 500)")
    cp.add_argument("--out-l", required=True, help="low-rank output .therm")
    cp.add_argument("--out-s", required=True, help="sparse output .therm")

    dp = sub.add_parser("predict", help="forecast against a persisted run")
    dp.add_argument("--model", required=True, help="model archive path")
    dp.add_argument("--run", required=True, help="run directory")
    dp.add_argument("--w", type=int, default=100,
                    help="history window length (default: 100)")
    dp.add_argument("--l", type=int, default=100,
                    help="max horizon in steps (default: 100)")
    dp.add_argument("--csv", required=True, help="output CSV path")

    bp = sub.add_parser("bench", help="runtime benchmarks")
    bp.add_argument("target", choices=["rpca"], help="what to benchmark")
    bp.add_argument("--n", type=int, default=78000,
                    help="pixels per frame (default: 78000)")
    bp.add_argument("--windows", default="10,50,100,200",
                    help="comma-separated window sizes")
    bp.add_argument("--reps", type=int, default=1,
                    help="repetitions per window (default: 1)")
    bp.add_argument("--max-iter", type=int, default=25,
                    help="ALM iteration cap for timing (default: 25)")
    bp.add_argument("--csv", required=True, help="output CSV path")
    return p


def _figure_path(csv_path: str, suffix: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return f"{root}_{suffix}.png"


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    voltages = ([float(v) for v in args.voltages.split(",")]
                if args.voltages else None)
    os.makedirs(args.out, exist_ok=True)
    datasets = generate_training_sweep(cfg.simulator, voltages=voltages,
                                       seed=args.seed)
    for ds in datasets:
        save_dataset(os.path.join(args.out, f"{ds.meta.label}.therm"), ds)
    print(f"wrote {len(datasets)} datasets to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    import dataclasses
    cfg = dataclasses.replace(
        cfg, training=dataclasses.replace(cfg.training, rank=args.rank,
                                          sensors=args.sensors))
    files = sorted(f for f in os.listdir(args.data) if f.endswith(".therm"))
    if not files:
        print(f"no .therm files in {args.data}", file=sys.stderr)
        return 2
    datasets = [load_dataset(os.path.join(args.data, f)) for f in files]
    model = train(datasets, cfg)
    save_model(args.out, model)
    energies = model.basis.singular_values ** 2
    print(f"trained rank-{model.basis.r} model on {len(datasets)} runs; "
          f"energy ratio {energies.sum() / model.basis.total_energy:.6f}; "
          f"sensors at {model.plan.indices.tolist()}; saved to {args.out}")
    return 0


def _cmd_run(args) -> int:
    from .service import serve

    cfg = _load_config(args.config)
    model = load_model(args.model)
    serve(cfg, model, addr=args.serve, seed=args.seed,
          voltage=args.voltage)
    return 0


def _cmd_replay(args) -> int:
    from .pipeline import replay_run

    model = load_model(args.model)
    verdicts = replay_run(model, args.run)
    lines = [v.to_json() for v in verdicts]
    recorded = os.path.join(args.run, "verdicts.jsonl")
    if os.path.exists(recorded):
        with open(recorded) as fh:
            stored = fh.read().splitlines()
        if stored != lines:
            print("replay mismatch: verdicts differ from the recorded run",
                  file=sys.stderr)
            return 2
        print(f"replayed {len(lines)} frames: verdicts identical")
    else:
        print(f"replayed {len(lines)} frames (no recorded verdicts to compare)")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_rpca(args) -> int:
    ds = load_dataset(args.infile)
    X = ds.snapshots.data

    def _auto(text):
        if text == "auto":
            return None
        try:
            return float(text)
        except ValueError:
            raise _UsageError(f"rpca: expected a number or 'auto', "
                              f"got {text!r}")

    params = RpcaParams(lam=_auto(args.lam), mu=_auto(args.mu),
                        max_iter=args.max_iter)
    w = max(1, args.window)
    L = np.empty_like(X)
    S = np.empty_like(X)
    for j0 in range(0, X.shape[1], w):
        res = rpca(X[:, j0:j0 + w], params)
        L[:, j0:j0 + w] = res.L
        S[:, j0:j0 + w] = res.S

    def _save(path, data):
        snap = SnapshotMatrix(n=ds.snapshots.n, k=ds.snapshots.k, data=data,
                              timestamps=ds.snapshots.timestamps)
        save_dataset(path, Dataset(snapshots=snap, meta=ds.meta,
                                   width=ds.width, height=ds.height))

    _save(args.out_l, L)
    _save(args.out_s, np.nan_to_num(S))
    report.figure_rpca(L, S, ds.width, ds.height,
                       _figure_path(args.out_l, "components"))
    print(f"decomposed {X.shape[1]} frames in windows of {w}; "
          f"wrote {args.out_l}, {args.out_s}")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(os.path.join(args.run, "frames.therm"))
    frames = unstack(ds.snapshots, ds.width, ds.height)
    dt = model.detector_cfg.dt

    horizons = [h for h in (20, 40, 60, 80, 100) if h <= args.l]
    if args.l not in horizons:
        horizons.append(args.l)
    anchor = args.w + max(horizons)   # first index with enough history
    if anchor + max(horizons) >= len(frames):
        print(f"run too short: need {anchor + max(horizons) + 1} frames, "
              f"have {len(frames)}", file=sys.stderr)
        return 2

    state = RuntimeState(model)
    for f in frames[:anchor + 1]:
        process_frame(model, f, state)

    preds, truths = [], []
    for h in horizons:
        bundle = request_prediction(model, state, w=args.w, l=h)
        preds.append(bundle.x_merged)
        truths.append(frames[anchor + h].values.astype(np.float64))
    rows = evaluate_rmse(preds, truths, horizons_s=[h * dt for h in horizons])

    report.write_csv(args.csv,
                     ["horizon_s", "rmse", "worst_pixel_abs", "worst_pixel_rel"],
                     [[r["horizon_s"], r["rmse"], r["worst_pixel_abs"],
                       r["worst_pixel_rel"]] for r in rows])
    report.figure_rmse(rows, _figure_path(args.csv, "rmse"))
    err = np.abs(preds[-1] - truths[-1])
    report.figure_error_map(err, ds.width, ds.height,
                            _figure_path(args.csv, "errormap"),
                            title=f"|error| at {rows[-1]['horizon_s']:g} s")
    for r in rows:
        print(f"horizon {r['horizon_s']:7.1f} s  rmse {r['rmse']:.4f}  "
              f"worst {r['worst_pixel_abs']:.4f} "
              f"({100 * r['worst_pixel_rel']:.3f}% of span)")
    return 0


def _cmd_bench(args) -> int:
    windows = [int(w) for w in args.windows.split(",") if w]
    if not windows:
        raise _UsageError("bench: --windows must list at least one size")
    params = RpcaParams(lam=0.001, mu=1e-5, max_iter=args.max_iter)
    rows = rpca_bench(args.n, windows, reps=args.reps, params=params,
                      seed=args.seed)
    report.write_csv(args.csv, ["n", "w", "rep", "seconds"], rows)
    report.figure_bench(rows, _figure_path(args.csv, "timing"))
    for n, w, rep, seconds in rows:
        print(f"n={n} w={w} rep={rep}: {seconds:.3f} s")
    return 0


_HANDLERS = {
    "sweep": _cmd_sweep,
    "train": _cmd_train,
    "run": _cmd_run,
    "replay": _cmd_replay,
    "rpca": _cmd_rpca,
    "predict": _cmd_predict,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage()
                              + "thermaltwin: error: a subcommand is required")
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except TwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
