"""Command-line pipeline: generate, decompose, train, forecast, simulate,
optimize, compare.

Every run gets its own output directory containing a ``manifest.json`` (the
resolved configuration, SHA-256 of every input file, and the package version)
written before any artifact, so a run can always be audited and replayed.
Values may come from a JSON config file via ``--config``; explicit flags win
over file values.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, datagen, forecast, gbrt, inventory, policy, timeseries
from .errors import ParameterError, SchemaError

OUTPUT_ROOT_ENV = "BLOODBANK_RUNS"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _run_dir(args, command: str) -> Path:
    if args.out_dir:
        path = Path(args.out_dir)
    else:
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
        stamp = dt.datetime.now(dt.timezone.utc).strftime("%Y%m%dT%H%M%S%f")
        path = root / f"{command}-{stamp}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(run_dir: Path, command: str, config: dict, inputs: list, outputs: list) -> None:
    manifest = {
        "command": command,
        "package": {"name": "bloodbank", "version": __version__},
        "config": config,
        "inputs": {
            str(path): {"sha256": _sha256(Path(path)), "bytes": Path(path).stat().st_size}
            for path in inputs
        },
        "outputs": outputs,
    }
    with open(run_dir / "manifest.json", "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _config_dict(args, keys: list[str]) -> dict:
    return {key: getattr(args, key) for key in keys}


def _parse_grid(text: str) -> list[int]:
    try:
        lo, hi, step = (int(part) for part in text.split(":"))
    except ValueError as exc:
        raise ParameterError(f"grid must be LO:HI:STEP, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise ParameterError(f"grid must be LO:HI:STEP with HI >= LO and STEP > 0, got {text!r}")
    return list(range(lo, hi + 1, step))


def _costs(args) -> inventory.CostParams:
    return inventory.CostParams(
        routine_delivery=args.cost_order,
        holding=args.cost_holding,
        urgent=args.cost_urgent,
        wastage=args.cost_wastage,
    )


def _stl_config(args) -> timeseries.StlConfig:
    return timeseries.StlConfig(
        s_window=args.s_window,
        t_window=args.t_window,
        n_inner=args.n_inner,
        n_outer=args.n_outer,
        loess_degree=args.loess_degree,
    )


def _gbrt_config(args) -> gbrt.GbrtConfig:
    return gbrt.GbrtConfig(
        n_rounds=args.rounds,
        learning_rate=args.learning_rate,
        max_depth=args.max_depth,
        min_child_weight=args.min_child_weight,
        subsample_rows=args.subsample_rows,
        subsample_cols=args.subsample_cols,
        reg_lambda=args.reg_lambda,
        gamma=args.gamma,
        seed=args.seed,
    )


def cmd_generate(args) -> int:
    config = datagen.GenConfig(
        n_days=args.days,
        base_level=args.base_level,
        trend_slope=args.trend_slope,
        noise_sd=args.noise_sd,
        seed=args.seed,
        start_date=dt.date.fromisoformat(args.start_date),
    )
    run_dir = _run_dir(args, "generate")
    _write_manifest(
        run_dir, "generate",
        _config_dict(args, ["days", "base_level", "trend_slope", "noise_sd", "seed", "start_date"]),
        [], ["dataset.csv", "dataset_truth.csv"],
    )
    records, truth = datagen.generate_full(config)
    forecast.write_dataset_csv(run_dir / "dataset.csv", records)
    datagen.write_truth_csv(run_dir / "dataset_truth.csv", config, truth)
    print(f"wrote {len(records)} days to {run_dir / 'dataset.csv'}")
    return 0


def cmd_decompose(args) -> int:
    records = forecast.read_dataset_csv(args.data)
    series = forecast.demand_series(records, args.period)
    dec = timeseries.stl_decompose(series, _stl_config(args))
    run_dir = _run_dir(args, "decompose")
    _write_manifest(
        run_dir, "decompose",
        _config_dict(args, ["data", "period", "s_window", "t_window", "n_inner", "n_outer",
                            "loess_degree"]),
        [args.data], ["decomposition.csv"],
    )
    timeseries.write_decomposition_csv(run_dir / "decomposition.csv", series, dec)
    print(f"wrote decomposition of {len(series)} days to {run_dir / 'decomposition.csv'}")
    return 0


def cmd_train(args) -> int:
    records = forecast.read_dataset_csv(args.data)
    if not 0 < args.train_days <= len(records):
        raise ParameterError(
            f"train_days must lie in 1..{len(records)}, got {args.train_days}"
        )
    train_part = records[: args.train_days]
    holdout = records[args.train_days :]
    model = forecast.fit_hybrid(train_part, _stl_config(args), _gbrt_config(args),
                                period=args.period)

    run_dir = _run_dir(args, "train")
    outputs = ["model.json", "train_report.csv"]
    if holdout:
        outputs += ["holdout_report.csv", "metrics.csv"]
    _write_manifest(
        run_dir, "train",
        _config_dict(args, ["data", "train_days", "period", "s_window", "t_window", "n_inner",
                            "n_outer", "loess_degree", "rounds", "learning_rate", "max_depth",
                            "min_child_weight", "subsample_rows", "subsample_cols", "reg_lambda",
                            "gamma", "seed"]),
        [args.data], outputs,
    )
    with open(run_dir / "model.json", "w") as handle:
        json.dump(forecast.hybrid_to_dict(model), handle, indent=2)
        handle.write("\n")

    fitted = forecast.predict_in_sample(model, train_part)
    forecast.write_forecast_csv(
        run_dir / "train_report.csv",
        forecast.ForecastReport(
            dates=[r.date for r in train_part],
            actual=np.array([r.demand for r in train_part], dtype=float),
            predicted=fitted,
        ),
    )

    if holdout:
        predicted = forecast.predict_daily(model, holdout)
        report = forecast.ForecastReport(
            dates=[r.date for r in holdout],
            actual=np.array([r.demand for r in holdout], dtype=float),
            predicted=predicted,
        )
        forecast.write_forecast_csv(run_dir / "holdout_report.csv", report)
        with open(run_dir / "metrics.csv", "w", newline="") as handle:
            handle.write("metric,value\n")
            handle.write(f"rmse,{report.rmse!r}\n")
            handle.write(f"mape_percent,{100.0 * report.mape!r}\n")
        print(f"holdout rmse {report.rmse:.3f}, mape {100 * report.mape:.2f}%")
    print(f"wrote model to {run_dir / 'model.json'}")
    return 0


def cmd_forecast(args) -> int:
    with open(args.model) as handle:
        model = forecast.hybrid_from_dict(json.load(handle))
    records = forecast.read_dataset_csv(args.data)
    if args.horizon < 0:
        raise ParameterError("horizon must be non-negative")
    future = [r for r in records if r.date > model.train_end][: args.horizon]
    if len(future) < args.horizon:
        raise ParameterError(
            f"data supplies only {len(future)} days after {model.train_end}, "
            f"horizon needs {args.horizon}"
        )
    predicted = forecast.predict_daily(model, future)
    report = forecast.ForecastReport(
        dates=[r.date for r in future],
        actual=np.array([r.demand for r in future], dtype=float),
        predicted=predicted,
    )
    run_dir = _run_dir(args, "forecast")
    _write_manifest(run_dir, "forecast", _config_dict(args, ["model", "data", "horizon"]),
                    [args.model, args.data], ["forecast.csv"])
    forecast.write_forecast_csv(run_dir / "forecast.csv", report)
    print(f"wrote {len(future)} forecast days to {run_dir / 'forecast.csv'}")
    return 0


def cmd_simulate(args) -> int:
    orders = inventory.read_stream_csv(args.orders)
    demands = inventory.read_stream_csv(args.demands)
    if len(orders) != len(demands):
        raise ParameterError(
            f"stream length mismatch: orders={len(orders)} demands={len(demands)}"
        )
    mean_demand = sum(demands) / len(demands) if demands else 1.0
    profile = inventory.young_stock(args.initial, max(mean_demand, 1.0), args.shelf_life)
    outcomes, average = inventory.simulate(profile, orders, demands, _costs(args))
    run_dir = _run_dir(args, "simulate")
    _write_manifest(
        run_dir, "simulate",
        _config_dict(args, ["orders", "demands", "initial", "shelf_life", "cost_order",
                            "cost_holding", "cost_urgent", "cost_wastage"]),
        [args.orders, args.demands], ["trajectory.csv"],
    )
    inventory.write_trajectory_csv(run_dir / "trajectory.csv", outcomes)
    print(f"simulated {len(outcomes)} periods, average cost {average:.2f}")
    return 0


def cmd_optimize(args) -> int:
    report = forecast.read_forecast_csv(args.report)
    demands = [int(round(v)) for v in report.actual]
    y_hat = list(report.predicted)
    costs = _costs(args)
    start_weekday = report.dates[0].weekday() if report.dates else 0

    target_grid = (_parse_grid(args.target_grid) if args.target_grid
                   else list(range(args.initial, 2 * args.initial + 1, 10)))
    target = policy.optimize_target(y_hat, demands, args.initial, costs, target_grid,
                                    args.shelf_life, args.objective)
    if args.reorder_grid:
        # candidates above the learned target are infeasible; drop them
        reorder_grid = [s for s in _parse_grid(args.reorder_grid) if s <= target]
        if not reorder_grid:
            raise ParameterError(
                f"reorder grid {args.reorder_grid} has no candidate <= target {target}"
            )
    else:
        reorder_grid = list(range(0, target + 1, 10))
    levels = {}
    sweeps = {}
    for kind in ("daily", "semiweekly"):
        schedule = policy.Schedule(kind=kind, start_weekday=start_weekday)
        sweeps[kind] = policy.reorder_sweep(y_hat, demands, args.initial, costs, target,
                                            reorder_grid, schedule, args.shelf_life)
        levels[kind] = policy.optimize_reorder(y_hat, demands, args.initial, costs, target,
                                               reorder_grid, schedule, args.shelf_life,
                                               args.objective)

    run_dir = _run_dir(args, "optimize")
    _write_manifest(
        run_dir, "optimize",
        _config_dict(args, ["report", "initial", "shelf_life", "target_grid", "reorder_grid",
                            "objective", "cost_order", "cost_holding", "cost_urgent",
                            "cost_wastage"]),
        [args.report],
        ["policy.json", "target_sweep.csv", "reorder_sweep_daily.csv",
         "reorder_sweep_semiweekly.csv"],
    )
    with open(run_dir / "policy.json", "w") as handle:
        json.dump(
            {
                "format": "bloodbank.policy",
                "version": 1,
                "inventory_target": target,
                "reorder_daily": levels["daily"],
                "reorder_semiweekly": levels["semiweekly"],
                "start_weekday": start_weekday,
            },
            handle, indent=2,
        )
        handle.write("\n")

    policy.write_sweep_csv(
        run_dir / "target_sweep.csv", "target",
        policy.target_sweep(y_hat, demands, args.initial, costs, target_grid,
                            args.shelf_life),
    )
    for kind in ("daily", "semiweekly"):
        policy.write_sweep_csv(run_dir / f"reorder_sweep_{kind}.csv", "reorder_level",
                               sweeps[kind])
    print(
        f"inventory target {target}, reorder daily {levels['daily']}, "
        f"semiweekly {levels['semiweekly']}"
    )
    return 0


def cmd_compare(args) -> int:
    report = forecast.read_forecast_csv(args.report)
    demands = [int(round(v)) for v in report.actual]
    y_hat = list(report.predicted)
    costs = _costs(args)
    start_weekday = report.dates[0].weekday() if report.dates else 0

    if args.policy:
        with open(args.policy) as handle:
            doc = json.load(handle)
        if doc.get("format") != "bloodbank.policy":
            raise SchemaError(f"not a policy document: format={doc.get('format')!r}")
        target = int(doc["inventory_target"])
        reorder_daily = int(doc["reorder_daily"])
        reorder_semiweekly = int(doc["reorder_semiweekly"])
    else:
        if args.target is None or args.reorder_daily is None or args.reorder_semiweekly is None:
            raise ParameterError(
                "compare needs either --policy or all of --target, --reorder-daily, "
                "--reorder-semiweekly"
            )
        target, reorder_daily, reorder_semiweekly = (
            args.target, args.reorder_daily, args.reorder_semiweekly)

    baseline_target = (args.baseline_target if args.baseline_target is not None
                       else round(1.7 * args.initial))
    summaries = [
        policy.evaluate_strategy("baseline", y_hat, demands, args.initial, costs,
                                 baseline_target=baseline_target,
                                 start_weekday=start_weekday, shelf_life=args.shelf_life),
        policy.evaluate_strategy("gold", y_hat, demands, args.initial, costs,
                                 start_weekday=start_weekday, shelf_life=args.shelf_life),
        policy.evaluate_strategy("daily", y_hat, demands, args.initial, costs,
                                 params=policy.PolicyParams(target, reorder_daily),
                                 start_weekday=start_weekday, shelf_life=args.shelf_life),
        policy.evaluate_strategy("semiweekly", y_hat, demands, args.initial, costs,
                                 params=policy.PolicyParams(target, reorder_semiweekly),
                                 start_weekday=start_weekday, shelf_life=args.shelf_life),
    ]
    run_dir = _run_dir(args, "compare")
    inputs = [args.report] + ([args.policy] if args.policy else [])
    _write_manifest(
        run_dir, "compare",
        _config_dict(args, ["report", "policy", "initial", "shelf_life", "target",
                            "reorder_daily", "reorder_semiweekly", "baseline_target",
                            "cost_order", "cost_holding", "cost_urgent", "cost_wastage"]),
        inputs, ["comparison.csv", "comparison.txt"],
    )
    policy.write_comparison_csv(run_dir / "comparison.csv", summaries)
    table = policy.comparison_table(summaries)
    with open(run_dir / "comparison.txt", "w") as handle:
        handle.write(table + "\n")
    print(table)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", default=None,
                        help=f"output directory (default: ${OUTPUT_ROOT_ENV} or ./runs)")
    parser.add_argument("--config", default=None,
                        help="JSON file with default values for any flag")


def _add_cost_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cost-order", type=float, default=100.0)
    parser.add_argument("--cost-holding", type=float, default=1.0)
    parser.add_argument("--cost-urgent", type=float, default=300.0)
    parser.add_argument("--cost-wastage", type=float, default=50.0)


def _add_stl_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--period", type=int, default=7)
    parser.add_argument("--s-window", type=int, default=11)
    parser.add_argument("--t-window", type=int, default=None)
    parser.add_argument("--n-inner", type=int, default=2)
    parser.add_argument("--n-outer", type=int, default=1)
    parser.add_argument("--loess-degree", type=int, default=1)


def _add_gbrt_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rounds", type=int, default=150)
    parser.add_argument("--learning-rate", type=float, default=0.1)
    parser.add_argument("--max-depth", type=int, default=3)
    parser.add_argument("--min-child-weight", type=float, default=1.0)
    parser.add_argument("--subsample-rows", type=float, default=1.0)
    parser.add_argument("--subsample-cols", type=float, default=1.0)
    parser.add_argument("--reg-lambda", type=float, default=1.0)
    parser.add_argument("--gamma", type=float, default=0.0)
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bloodbank",
                                     description="demand forecasting and ordering pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a synthetic daily dataset")
    p.add_argument("--days", type=int, default=3650)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--base-level", type=float, default=92.0)
    p.add_argument("--trend-slope", type=float, default=0.001)
    p.add_argument("--noise-sd", type=float, default=20.0)
    p.add_argument("--start-date", default="2008-01-07")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("decompose", help="split a demand series into components")
    p.add_argument("--data", required=True)
    _add_stl_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="fit the hybrid model")
    p.add_argument("--data", required=True)
    p.add_argument("--train-days", type=int, required=True)
    _add_stl_flags(p)
    _add_gbrt_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="predict days following the training window")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizon", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("simulate", help="run order/demand streams through the inventory")
    p.add_argument("--orders", required=True)
    p.add_argument("--demands", required=True)
    p.add_argument("--initial", type=int, default=780)
    p.add_argument("--shelf-life", type=int, default=32)
    _add_cost_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="learn the inventory target and reorder levels")
    p.add_argument("--report", required=True, help="forecast csv (date,actual,predicted)")
    p.add_argument("--initial", type=int, default=780)
    p.add_argument("--shelf-life", type=int, default=32)
    p.add_argument("--target-grid", default=None, help="LO:HI:STEP (default initial..2*initial)")
    p.add_argument("--reorder-grid", default=None, help="LO:HI:STEP (default 0..target)")
    p.add_argument("--objective", choices=["match_gold", "min_cost"], default="match_gold")
    _add_cost_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="summarize the four ordering strategies")
    p.add_argument("--report", required=True, help="forecast csv (date,actual,predicted)")
    p.add_argument("--policy", default=None, help="policy.json from optimize")
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--reorder-daily", type=int, default=None)
    p.add_argument("--reorder-semiweekly", type=int, default=None)
    p.add_argument("--baseline-target", type=int, default=None)
    p.add_argument("--initial", type=int, default=780)
    p.add_argument("--shelf-life", type=int, default=32)
    _add_cost_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config) as handle:
            overrides = json.load(handle)
        if not isinstance(overrides, dict):
            raise SchemaError("config file must hold a JSON object")
        # file values fill in anything the command line left at its default
        explicit = {token.split("=")[0].lstrip("-").replace("-", "_")
                    for token in argv if token.startswith("--")}
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise ParameterError(f"config file sets unknown option {key!r}")
            if attr not in explicit:
                setattr(args, attr, value)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        return args.func(args)
    except (ParameterError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
