"""Command-line entry points: synth, classify, backtest, forecast, report.

Each command reads the shared configuration (all keys optional, defaults per
the documented format), and every artifact a command writes is named by the
configuration fingerprint so runs never clobber results produced under
different settings.  Identical config and seed reproduce every output file
byte for byte.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from pathlib import Path

from .config import RunConfig, parse_config, parse_config_text
from .errors import ConfigError, DataError, MoecastError
from .evaluation import (
    MODELS,
    fit_pooled_experts,
    linear_one_step,
    lstm_one_step,
    moe_one_step,
    plan_walk_forward,
    recursive_forecast,
    returns_for_policy,
    run_holdout,
    run_walk_forward,
    HoldoutSpec,
    n_values,
)
from .market_data import (
    PriceSeries,
    WindowMode,
    generate_synthetic,
    load_csv,
    log_returns,
    rolling_volatility,
    write_csv,
)
from .model_store import ModelStore
from .moe import gate_for_regime
from .regime import PolicyKind, RegimeLabel, classify_median, rank_by_volatility
from .reporting import (
    predictions_to_csv,
    records_from_csv,
    records_to_csv,
    render_tables_text,
    stamp,
    tables_to_csv,
)

__all__ = ["main"]


def _report_dir(config: RunConfig) -> Path:
    path = Path(config["report.dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _artifact(config: RunConfig, kind: str, suffix: str) -> Path:
    return _report_dir(config) / f"{kind}_{config.short_fingerprint}.{suffix}"


def _write_config_echo(config: RunConfig) -> Path:
    path = _artifact(config, "config", "cfg")
    path.write_text(stamp(config.fingerprint, config["seed"]) + config.serialize(),
                    encoding="utf-8")
    return path


def _load_universe(config: RunConfig) -> dict[str, PriceSeries]:
    data_path = config["data.path"]
    if not data_path:
        raise ConfigError("data.path is not set; point it at a ticker,date,adj_close CSV")
    return load_csv(data_path)


def cmd_synth(config: RunConfig, out_path: str | None) -> int:
    target = out_path or config["data.path"]
    if not target:
        raise ConfigError("no output path: pass --out or set data.path")
    universe = generate_synthetic(config.synthetic_spec(), config["seed"])
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    write_csv(universe, target)
    total = sum(len(s) for s in universe.values())
    print(f"wrote {len(universe)} synthetic firms ({total} rows) to {target}")
    return 0


def cmd_classify(config: RunConfig) -> int:
    universe = _load_universe(config)
    policy = config.policy_for_classify()
    sigmas = {}
    for ticker in sorted(universe):
        vol = rolling_volatility(returns_for_policy(universe[ticker], policy), policy.vol_window)
        sigmas[ticker] = float(vol.values[-1])
    if policy.kind is PolicyKind.THRESHOLD:
        labels = {
            t: RegimeLabel.VOLATILE if s > policy.tau else RegimeLabel.STABLE
            for t, s in sigmas.items()
        }
        rule = f"threshold (window {policy.vol_window}, tau {policy.tau})"
    else:
        labels = classify_median(sigmas)
        rule = f"cross-sectional median (window {policy.vol_window})"
    print(f"regime classification by {rule}")
    print(f"{'ticker':<10}{'sigma':>12}  regime")
    for ticker in sorted(universe):
        print(f"{ticker:<10}{sigmas[ticker]:>12.6f}  {labels[ticker].value}")
    return 0


def _select_holdout(
    universe: dict[str, PriceSeries], config: RunConfig
) -> tuple[dict[str, PriceSeries], HoldoutSpec | None]:
    k = config["holdout.k"]
    if k == 0:
        return dict(universe), None
    policy = config.policy_for_backtest()
    mean_sigma = {
        ticker: float(
            rolling_volatility(
                returns_for_policy(series, policy), policy.vol_window
            ).values.mean()
        )
        for ticker, series in universe.items()
    }
    top, bottom = rank_by_volatility(mean_sigma, k)
    holdout = HoldoutSpec(volatile_holdout=tuple(top), stable_holdout=tuple(bottom))
    train = {t: s for t, s in universe.items() if t not in set(holdout.tickers)}
    if not train:
        raise ConfigError(f"holdout.k={k} leaves no firms to train on")
    return train, holdout


def cmd_backtest(config: RunConfig) -> int:
    universe = _load_universe(config)
    settings = config.backtest_settings()
    policy = config.policy_for_backtest()
    train_universe, holdout = _select_holdout(universe, config)
    n = min(n_values(s, settings.mode) for s in train_universe.values())
    plan = plan_walk_forward(
        n, config["wf.init_train"], config["wf.val_len"], config["wf.step"],
        config.train_mode(),
    )
    result = run_walk_forward(train_universe, plan, policy, settings)
    records = list(result.records)
    pooled = None
    if holdout is not None:
        pooled = fit_pooled_experts(
            train_universe, policy, settings, plan.folds[-1].val_range.start
        )
        records.extend(run_holdout(universe, holdout, pooled, policy, settings))

    fingerprint, seed = config.fingerprint, config["seed"]
    config_path = _write_config_echo(config)
    records_path = _artifact(config, "records", "csv")
    records_path.write_text(records_to_csv(records, fingerprint, seed), encoding="utf-8")
    predictions_path = _artifact(config, "predictions", "csv")
    predictions_path.write_text(
        predictions_to_csv(result.predictions, universe, settings.mode, fingerprint, seed),
        encoding="utf-8",
    )
    store = ModelStore(fingerprint, dict(result.models), pooled)
    store_path = _artifact(config, "models", "npz")
    store.save(store_path)

    print(f"backtest: {len(train_universe)} firms, {len(plan.folds)} folds, "
          f"{len(records)} metric records")
    if holdout is not None:
        print(f"holdout: {len(holdout.volatile_holdout)} volatile + "
              f"{len(holdout.stable_holdout)} stable firms")
    for path in (config_path, records_path, predictions_path, store_path):
        print(f"wrote {path}")
    return 0


def cmd_forecast(config: RunConfig, ticker: str, horizon: int) -> int:
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    store_path = _artifact(config, "models", "npz")
    if not store_path.exists():
        raise DataError(f"model store {store_path} not found; run backtest first")
    store = ModelStore.load(store_path)
    if store.fingerprint != config.fingerprint:
        raise DataError(
            "model store was produced under a different configuration "
            f"(stored fingerprint {store.fingerprint[:12]}, current {config.short_fingerprint})"
        )
    folds = store.folds_for(ticker)
    if not folds:
        raise DataError(f"no stored models for ticker {ticker!r}")
    fm = store.fold_models[(ticker, folds[-1])]
    universe = _load_universe(config)
    if ticker not in universe:
        raise DataError(f"ticker {ticker!r} missing from {config['data.path']}")
    series = universe[ticker]
    values = (
        series.prices if fm.mode is WindowMode.PRICE_LEVELS else log_returns(series).values
    )
    if len(values) < fm.launch_t:
        raise DataError(f"{ticker}: series shorter than the stored launch index")
    standardized = fm.scaler.apply(values)
    window = standardized[fm.launch_t - fm.window:fm.launch_t]
    weights = gate_for_regime(fm.regime, config.gate_table())
    fns = {
        "Linear": linear_one_step(fm.linear),
        "LSTM": lstm_one_step(fm.lstm),
        "MoE": moe_one_step(fm.lstm, fm.linear, weights),
    }
    paths = {
        model: fm.scaler.invert(
            recursive_forecast(fns[model], window, float(fm.launch_t), fm.sigma, horizon)
        )
        for model in MODELS
    }
    dates = series.dates
    date_offset = 0 if fm.mode is WindowMode.PRICE_LEVELS else 1
    print(stamp(config.fingerprint, config["seed"]).rstrip("\n"))
    print(f"# {ticker}: recursive {horizon}-step forecast from index {fm.launch_t} "
          f"(fold {folds[-1]}, regime {fm.regime.value})")
    print("step,date,linear,lstm,moe")
    for j in range(horizon):
        idx = fm.launch_t + j + date_offset
        if idx < len(dates):
            date = dates[idx].isoformat()
        else:
            date = (dates[-1] + dt.timedelta(days=idx - len(dates) + 1)).isoformat()
        row = ",".join(repr(float(paths[m][j])) for m in ("Linear", "LSTM", "MoE"))
        print(f"{j + 1},{date},{row}")
    return 0


def cmd_report(config: RunConfig) -> int:
    records_path = _artifact(config, "records", "csv")
    if not records_path.exists():
        raise DataError(f"no records at {records_path}; run backtest first")
    records = records_from_csv(records_path.read_text(encoding="utf-8"))
    fingerprint, seed = config.fingerprint, config["seed"]
    text = render_tables_text(records, fingerprint, seed)
    tables_txt = _artifact(config, "tables", "txt")
    tables_txt.write_text(text, encoding="utf-8")
    tables_csv = _artifact(config, "tables", "csv")
    tables_csv.write_text(tables_to_csv(records, fingerprint, seed), encoding="utf-8")
    print(text)
    print(f"wrote {tables_txt}")
    print(f"wrote {tables_csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moecast",
        description="Volatility-regime mixture-of-experts forecasting pipeline",
    )
    parser.add_argument("--config", help="path to a 'key = value' configuration file")
    parser.add_argument("--seed", type=int, help="override the configured random seed")
    sub = parser.add_subparsers(dest="command", required=True)
    synth = sub.add_parser("synth", help="generate a synthetic two-regime universe CSV")
    synth.add_argument("--out", help="output CSV path (defaults to data.path)")
    sub.add_parser("classify", help="print the per-ticker volatility regime table")
    sub.add_parser("backtest", help="run the walk-forward backtest and persist results")
    forecast = sub.add_parser("forecast", help="recursive multi-step forecast for one ticker")
    forecast.add_argument("--ticker", required=True)
    forecast.add_argument("--horizon", type=int, required=True)
    sub.add_parser("report", help="render tables from persisted backtest records")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = parse_config(args.config, seed_override=args.seed)
        else:
            config = parse_config_text("")
            if args.seed is not None:
                values = dict(config.values)
                values["seed"] = args.seed
                config = RunConfig(values=values, explicit=config.explicit | {"seed"})
        if args.command == "synth":
            return cmd_synth(config, args.out)
        if args.command == "classify":
            return cmd_classify(config)
        if args.command == "backtest":
            return cmd_backtest(config)
        if args.command == "forecast":
            return cmd_forecast(config, args.ticker, args.horizon)
        if args.command == "report":
            return cmd_report(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except MoecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
