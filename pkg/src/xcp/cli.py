"""Command-line driver for reproducible completion experiments.

Subcommands: train, eval, grid-lambda, bench-scaling, gen-synth, rank,
bench-backends. Every run directory is self-describing: the manifest,
seeds, and split files it contains are enough to re-derive all reported
numbers.

Exit codes: 0 success; 1 usage/configuration error; 2 data error;
3 numerical failure (overflow or NaN in the update accumulators).
"""

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from . import data as datamod
from . import kernels, metrics, solver
from .errors import (
    BadRatiosError,
    InvalidConfigError,
    NonFiniteAccumulatorError,
    XcpError,
)
from .model import ExpandedCPModel, ModelConfig
from .solver import TrainConfig
from .tensor import ObservedTensor


@dataclass
class ExperimentManifest:
    """Everything needed to re-run a training experiment."""

    data_path: Optional[str]
    dims: Optional[Tuple[int, int, int]]
    synth: Optional[dict]
    ratios: Tuple[float, float, float]
    n_repeats: int
    rank: int
    expansion: int
    lam: float
    tol: float
    max_epochs: int
    init_scale: float
    seed: int
    backend: str

    def dump(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_triple(text: str, kind=int) -> tuple:
    parts = [kind(x) for x in text.replace("x", ",").split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    return tuple(parts)


def _parse_dims(text: str):
    return _parse_triple(text, int)


def _parse_ratios(text: str):
    return _parse_triple(text, float)


def _parse_floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",")]


def _parse_ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",")]


def _add_synth_flags(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--synth-dims", type=_parse_dims, required=required,
                   help="dimensions I,J,K of the synthetic tensor")
    p.add_argument("--synth-rank", type=int, default=2, help="rank of the generating model")
    p.add_argument("--synth-expansion", type=int, default=2,
                   help="expansion dimension of the generating model")
    p.add_argument("--synth-density", type=float, default=0.2, help="observed fraction (0, 1]")
    p.add_argument("--synth-noise", type=float, default=0.0, help="additive noise sigma")
    p.add_argument("--synth-bias-scale", type=float, default=1.0,
                   help="scale of the generating bias vectors")
    p.add_argument("--synth-seed", type=int, default=None,
                   help="generator seed (defaults to --seed)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rank", "-R", type=int, default=5, help="model rank R")
    p.add_argument("--expansion", "-M", type=int, default=5, help="expansion dimension M")
    p.add_argument("--lam", type=float, default=0.4, help="L2 regularization coefficient")
    p.add_argument("--tol", type=float, default=1e-5, help="convergence threshold")
    p.add_argument("--max-epochs", type=int, default=1000, help="epoch cap")
    p.add_argument("--init-scale", type=float, default=0.1, help="initialization range")
    p.add_argument("--seed", type=int, default=0, help="base seed for splits and init")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="measurement log file (user service time value per line)")
    p.add_argument("--dims", type=_parse_dims, default=None,
                   help="explicit I,J,K (otherwise inferred from the data)")
    _add_synth_flags(p)


def _synth_spec(args) -> datamod.SyntheticSpec:
    return datamod.SyntheticSpec(
        dims=args.synth_dims,
        rank=args.synth_rank,
        expansion=args.synth_expansion,
        density=args.synth_density,
        noise_sigma=args.synth_noise,
        bias_scale=args.synth_bias_scale,
        seed=args.synth_seed if args.synth_seed is not None else args.seed,
    )


def _load_source(args) -> ObservedTensor:
    if args.data and args.synth_dims:
        raise InvalidConfigError("pass either --data or --synth-dims, not both")
    if args.data:
        tensor = datamod.load_tensor(args.data, dims=args.dims)
        if args.dims is None:
            print(f"inferred dims {tensor.dims} from {args.data}", file=sys.stderr)
        return tensor
    if args.synth_dims:
        tensor, _ = datamod.generate_synthetic(_synth_spec(args))
        return tensor
    raise InvalidConfigError("a data source is required: --data or --synth-dims")


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        model_cfg=ModelConfig(
            rank=args.rank, expansion=args.expansion,
            init_scale=args.init_scale, seed=seed,
        ),
        lam=args.lam, max_epochs=args.max_epochs, tol=args.tol,
    )


def _write_metrics_csv(path: Path, m: metrics.Metrics) -> None:
    path.write_text(f"rmse,mae,count\n{m.rmse!r},{m.mae!r},{m.count}\n")


def _write_loss_trace(path: Path, report: solver.TrainReport) -> None:
    lines = ["epoch,objective"]
    lines += [f"{epoch},{loss!r}" for epoch, loss in enumerate(report.loss_trace, start=1)]
    path.write_text("\n".join(lines) + "\n")


def cmd_train(args) -> int:
    tensor = _load_source(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    manifest = ExperimentManifest(
        data_path=args.data,
        dims=args.dims,
        synth=dataclasses.asdict(_synth_spec(args)) if args.synth_dims else None,
        ratios=args.ratios,
        n_repeats=args.repeats,
        rank=args.rank,
        expansion=args.expansion,
        lam=args.lam,
        tol=args.tol,
        max_epochs=args.max_epochs,
        init_scale=args.init_scale,
        seed=args.seed,
        backend=kernels.backend_name(),
    )
    manifest.dump(outdir / "manifest.json")

    splits = datamod.repeated_splits(tensor, args.ratios, args.seed, args.repeats)
    runs = []
    for rep, split in enumerate(splits):
        rundir = outdir / f"run_{rep:03d}"
        rundir.mkdir(exist_ok=True)
        with open(rundir / "split.txt", "w", encoding="utf-8") as sink:
            datamod.write_split_manifest(split, sink)

        cfg = _train_config(args, seed=args.seed + rep)
        model, report = solver.train(tensor, split, cfg)
        model.save(rundir / "model.npz")
        _write_loss_trace(rundir / "loss_trace.csv", report)

        test_metrics = metrics.evaluate(model, tensor, split.test)
        _write_metrics_csv(rundir / "metrics.csv", test_metrics)
        runs.append(test_metrics)
        print(
            f"run {rep}: epochs={report.epochs_run} converged={report.converged} "
            f"test rmse={test_metrics.rmse:.6g} mae={test_metrics.mae:.6g}"
        )

    overall = metrics.aggregate(runs)
    _write_metrics_csv(outdir / "metrics_aggregate.csv", overall)
    print(f"aggregate over {len(runs)} runs: rmse={overall.rmse:.6g} mae={overall.mae:.6g}")
    return 0


def cmd_eval(args) -> int:
    model = ExpandedCPModel.load(args.model)
    tensor = datamod.load_tensor(args.data, dims=args.dims)
    with open(args.split, "r", encoding="utf-8") as source:
        split = datamod.read_split_manifest(source)
    datamod.validate_partition(split, tensor.n_entries)
    m = metrics.evaluate(model, tensor, split.test)
    print(f"rmse={m.rmse!r} mae={m.mae!r} count={m.count}")
    if args.out:
        _write_metrics_csv(Path(args.out), m)
    return 0


def cmd_grid_lambda(args) -> int:
    tensor = _load_source(args)
    if not args.grid:
        raise InvalidConfigError("--grid must list at least one lambda")
    split = datamod.random_split(tensor, args.ratios, args.seed)
    if split.validation.size == 0:
        raise InvalidConfigError("grid search needs a nonempty validation set")

    rows = []
    best_lam, best_rmse = None, np.inf
    for lam in args.grid:
        cfg = TrainConfig(
            model_cfg=ModelConfig(rank=args.rank, expansion=args.expansion,
                                  init_scale=args.init_scale, seed=args.seed),
            lam=lam, max_epochs=args.max_epochs, tol=args.tol,
        )
        model, report = solver.train(tensor, split, cfg)
        val = metrics.evaluate(model, tensor, split.validation)
        rows.append((lam, val.rmse, val.mae, report.epochs_run))
        print(f"lambda={lam:g}: val rmse={val.rmse:.6g} mae={val.mae:.6g} "
              f"epochs={report.epochs_run}")
        if val.rmse < best_rmse:  # strict: ties keep the smaller lambda
            best_lam, best_rmse = lam, val.rmse

    if args.out:
        lines = ["lambda,val_rmse,val_mae,epochs"]
        lines += [f"{lam!r},{rmse!r},{mae!r},{ep}" for lam, rmse, mae, ep in rows]
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"best lambda: {best_lam:g} (val rmse {best_rmse:.6g})")
    return 0


def cmd_gen_synth(args) -> int:
    spec = _synth_spec(args)
    tensor, truth = datamod.generate_synthetic(spec)
    with open(args.out, "w", encoding="utf-8") as sink:
        sink.write(f"# synthetic data: dims={spec.dims} rank={spec.rank} "
                   f"expansion={spec.expansion} density={spec.density} "
                   f"noise={spec.noise_sigma} bias_scale={spec.bias_scale} seed={spec.seed}\n")
        datamod.write_qos_log((tensor.entry(p) for p in range(tensor.n_entries)), sink)
    if args.truth_model:
        truth.save(args.truth_model)
    print(f"wrote {tensor.n_entries} entries to {args.out}")
    return 0


def cmd_bench_scaling(args) -> int:
    if any(f < 1 for f in args.factors):
        raise InvalidConfigError("scaling factors must be >= 1")
    base = _synth_spec(args)

    def measure(spec: datamod.SyntheticSpec, rank: int, expansion: int) -> tuple:
        tensor, _ = datamod.generate_synthetic(spec)
        run_cfg = TrainConfig(
            model_cfg=ModelConfig(rank=rank, expansion=expansion,
                                  init_scale=args.init_scale, seed=args.seed),
            lam=args.lam, max_epochs=args.max_epochs, tol=args.tol,
        )
        positions = np.arange(tensor.n_entries)
        sec = solver.time_epochs(tensor, positions, run_cfg, epochs=args.epochs)
        return tensor.n_entries, rank, expansion, sec

    rows = [measure(base, args.rank, args.expansion)]
    for factor in args.factors:
        if args.scale == "entries":
            scaled = dataclasses.replace(base, density=base.density * factor)
            rows.append(measure(scaled, args.rank, args.expansion))
        else:
            rows.append(measure(base, args.rank * factor, args.expansion))

    lines = ["entries,rank,expansion,seconds_per_epoch"]
    for n, rank, expansion, sec in rows:
        print(f"entries={n} R={rank} M={expansion}: {sec:.6f} s/epoch")
        lines.append(f"{n},{rank},{expansion},{sec!r}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_rank(args) -> int:
    with open(args.input, "r", encoding="utf-8") as source:
        table = metrics.read_result_csv(source)
    ranks = metrics.friedman_rank(table, lower_is_better=not args.higher_is_better)
    for model_id, rank in zip(table.col_ids, ranks):
        print(f"{model_id}: {rank:g}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as sink:
            metrics.write_result_csv(table, sink, mean_ranks=ranks)
    return 0


def cmd_bench_backends(args) -> int:
    spec = _synth_spec(args)
    tensor, _ = datamod.generate_synthetic(spec)
    cfg = _train_config(args, seed=args.seed)
    positions = np.arange(tensor.n_entries)

    results = []
    for name in kernels.available_backends():
        impl = kernels.get_backend(name)
        sec = solver.time_epochs(tensor, positions, cfg, epochs=args.epochs, impl=impl)
        results.append((name, sec))
        print(f"backend {name}: {sec:.6f} s/epoch "
              f"(entries={tensor.n_entries}, R={args.rank}, M={args.expansion})")
    if len(results) == 2:
        print(f"speedup c vs python: {results[1][1] / results[0][1]:.2f}x")
    if args.out:
        lines = ["backend,entries,rank,expansion,seconds_per_epoch"]
        lines += [f"{name},{tensor.n_entries},{args.rank},{args.expansion},{sec!r}"
                  for name, sec in results]
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xcp", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train models over repeated random splits")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--ratios", type=_parse_ratios, default=(0.01, 0.09, 0.90),
                   help="train,validation,test fractions (sum to 1)")
    p.add_argument("--repeats", type=int, default=1, help="number of repeated random splits")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a saved split's test set")
    p.add_argument("--model", required=True, help="model dump (.npz)")
    p.add_argument("--data", required=True, help="measurement log file")
    p.add_argument("--dims", type=_parse_dims, default=None, help="explicit I,J,K")
    p.add_argument("--split", required=True, help="split manifest file")
    p.add_argument("--out", help="optional metrics CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid-lambda", help="pick the regularization coefficient on validation RMSE")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--ratios", type=_parse_ratios, default=(0.01, 0.09, 0.90))
    p.add_argument("--grid", type=_parse_floats,
                   default=[round(0.1 * i, 1) for i in range(1, 11)],
                   help="comma-separated lambda values (default 0.1..1.0 step 0.1)")
    p.add_argument("--out", help="optional grid report CSV path")
    p.set_defaults(func=cmd_grid_lambda)

    p = sub.add_parser("gen-synth", help="write a synthetic measurement log")
    _add_synth_flags(p, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output log path")
    p.add_argument("--truth-model", help="optional path for the generating model dump")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("bench-scaling", help="per-epoch time vs entry count or rank")
    _add_synth_flags(p, required=True)
    _add_train_flags(p)
    p.add_argument("--factors", type=_parse_ints, default=[2],
                   help="comma-separated scaling factors (>= 1)")
    p.add_argument("--scale", choices=("entries", "rankdim"), default="entries",
                   help="what the factors multiply")
    p.add_argument("--epochs", type=int, default=5, help="timed epochs per measurement")
    p.add_argument("--out", help="optional CSV path")
    p.set_defaults(func=cmd_bench_scaling)

    p = sub.add_parser("rank", help="mean ranks of models from a result-table CSV")
    p.add_argument("--input", required=True, help="result table CSV")
    p.add_argument("--higher-is-better", action="store_true",
                   help="rank 1 goes to the largest value instead of the smallest")
    p.add_argument("--out", help="optional CSV path (table + F-Rank row)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bench-backends", help="compare compiled and pure-python kernels")
    _add_synth_flags(p, required=True)
    _add_train_flags(p)
    p.add_argument("--epochs", type=int, default=5, help="timed epochs per backend")
    p.add_argument("--out", help="optional CSV path")
    p.set_defaults(func=cmd_bench_backends)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NonFiniteAccumulatorError as exc:
        print(f"xcp: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (InvalidConfigError, BadRatiosError) as exc:
        print(f"xcp: {exc}", file=sys.stderr)
        return 1
    except (XcpError, OSError) as exc:
        print(f"xcp: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
