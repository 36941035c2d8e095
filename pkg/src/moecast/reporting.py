"""Report rendering: record persistence, regime tables, and plot data.

Every emitted file starts with a ``# fingerprint=... seed=...`` line so any
output can be traced back to the exact resolved configuration that produced
it.  Numbers are written with ``repr`` (records, plot data) or a fixed six
decimals (summary tables), so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .evaluation import (
    HOLDOUT_SPLIT,
    MODELS,
    WALK_FORWARD_SPLIT,
    MetricRecord,
    PredictionPoint,
    aggregate_stratified,
    improvement_pct,
)
from .market_data import PriceSeries, WindowMode
from .regime import RegimeLabel

__all__ = [
    "stamp",
    "records_to_csv",
    "records_from_csv",
    "predictions_to_csv",
    "render_tables_text",
    "tables_to_csv",
]

RECORD_COLUMNS = (
    "ticker", "fold_id", "split", "regime", "horizon", "model",
    "mse", "mae", "rmse", "raw_mse", "raw_mae", "raw_rmse", "mase",
)

DISPLAY_NAMES = {
    "Linear": "Linear Regression",
    "LSTM": "LSTM (RNN)",
    "MoE": "Mixture of Experts",
}

SCALES = (
    ("standardized", "mse", "mae"),
    ("raw", "raw_mse", "raw_mae"),
)


def stamp(fingerprint: str, seed: int) -> str:
    return f"# fingerprint={fingerprint} seed={seed}\n"


def records_to_csv(records: Iterable[MetricRecord], fingerprint: str, seed: int) -> str:
    out = io.StringIO()
    out.write(stamp(fingerprint, seed))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    ordered = sorted(
        records, key=lambda r: (r.split, r.ticker, r.fold_id, r.horizon, r.model)
    )
    for r in ordered:
        writer.writerow(
            [
                r.ticker, r.fold_id, r.split, r.regime.value, r.horizon, r.model,
                repr(r.mse), repr(r.mae), repr(r.rmse),
                repr(r.raw_mse), repr(r.raw_mae), repr(r.raw_rmse),
                "" if r.mase is None else repr(r.mase),
            ]
        )
    return out.getvalue()


def records_from_csv(text: str) -> list[MetricRecord]:
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or tuple(header) != RECORD_COLUMNS:
        raise DataError(f"record file header mismatch: {header}")
    records = []
    for row in reader:
        records.append(
            MetricRecord(
                ticker=row[0],
                fold_id=int(row[1]),
                split=row[2],
                regime=RegimeLabel(row[3]),
                horizon=int(row[4]),
                model=row[5],
                mse=float(row[6]),
                mae=float(row[7]),
                rmse=float(row[8]),
                raw_mse=float(row[9]),
                raw_mae=float(row[10]),
                raw_rmse=float(row[11]),
                mase=float(row[12]) if row[12] else None,
            )
        )
    return records


def predictions_to_csv(
    predictions: Iterable[PredictionPoint],
    universe: Mapping[str, PriceSeries],
    mode: WindowMode,
    fingerprint: str,
    seed: int,
) -> str:
    """Tidy actual-vs-predicted rows (raw scale), one per model per date."""
    out = io.StringIO()
    out.write(stamp(fingerprint, seed))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["ticker", "date", "model", "actual", "predicted"])
    ordered = sorted(predictions, key=lambda p: (p.ticker, p.t_index, p.model, p.fold_id))
    for p in ordered:
        dates = universe[p.ticker].dates
        date_idx = p.t_index if mode is WindowMode.PRICE_LEVELS else p.t_index + 1
        writer.writerow(
            [p.ticker, dates[date_idx].isoformat(), p.model,
             repr(p.actual_raw), repr(p.predicted_raw)]
        )
    return out.getvalue()


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _regime_table(records: list[MetricRecord], regime: RegimeLabel,
                  mse_key: str, mae_key: str) -> list[str]:
    report = aggregate_stratified([r for r in records if r.regime is regime])
    lines = [f"{'Model':<22}{'MSE':>12}{'MAE':>12}"]
    cells = {}
    for model in MODELS:
        key = (regime, model, 1)
        if key not in report.cells:
            return [f"(no horizon-1 records for {regime.value} firms)"]
        stats = report.cells[key]
        cells[model] = (stats[mse_key], stats[mae_key])
        lines.append(
            f"{DISPLAY_NAMES[model]:<22}{_fmt(stats[mse_key].mean):>12}"
            f"{_fmt(stats[mae_key].mean):>12}"
        )
    best_single_mse = min(cells["Linear"][0].mean, cells["LSTM"][0].mean)
    best_single_mae = min(cells["Linear"][1].mean, cells["LSTM"][1].mean)
    if best_single_mse > 0 and best_single_mae > 0:
        lines.append(
            "MoE vs best single model: "
            f"MSE {improvement_pct(cells['MoE'][0].mean, best_single_mse):+.2f}%, "
            f"MAE {improvement_pct(cells['MoE'][1].mean, best_single_mae):+.2f}%"
        )
    return lines


def _horizon_breakdown(records: list[MetricRecord], mse_key: str, mae_key: str) -> list[str]:
    report = aggregate_stratified(records)
    lines = [f"{'Regime':<10}{'Model':<22}{'Horizon':>8}{'MSE mean±std':>26}{'MAE mean±std':>26}"]
    horizons = sorted({r.horizon for r in records})
    for regime in (RegimeLabel.STABLE, RegimeLabel.VOLATILE):
        for model in MODELS:
            for h in horizons:
                key = (regime, model, h)
                if key not in report.cells:
                    continue
                stats = report.cells[key]
                m, a = stats[mse_key], stats[mae_key]
                lines.append(
                    f"{regime.value:<10}{DISPLAY_NAMES[model]:<22}{h:>8}"
                    f"{_fmt(m.mean) + ' ± ' + _fmt(m.std):>26}"
                    f"{_fmt(a.mean) + ' ± ' + _fmt(a.std):>26}"
                )
    return lines


def render_tables_text(records: Sequence[MetricRecord], fingerprint: str, seed: int) -> str:
    """The full plain-text report: per-regime tables, horizon and holdout breakdowns."""
    wf = [r for r in records if r.split == WALK_FORWARD_SPLIT]
    ho = [r for r in records if r.split == HOLDOUT_SPLIT]
    out = [stamp(fingerprint, seed).rstrip("\n"), ""]
    for scale, mse_key, mae_key in SCALES:
        h1 = [r for r in wf if r.horizon == 1]
        if not h1:
            continue
        for regime in (RegimeLabel.STABLE, RegimeLabel.VOLATILE):
            out.append(f"== Evaluation of models, {regime.value.lower()} firms "
                       f"({scale} scale, horizon 1) ==")
            out.extend(_regime_table(h1, regime, mse_key, mae_key))
            out.append("")
    multi = [r for r in wf if r.horizon > 1]
    if multi:
        out.append("== Walk-forward horizon breakdown (standardized scale) ==")
        out.extend(_horizon_breakdown(multi, "mse", "mae"))
        out.append("")
    if ho:
        out.append("== Holdout stress firms (standardized scale) ==")
        out.extend(_horizon_breakdown(ho, "mse", "mae"))
        out.append("")
    return "\n".join(out) + "\n"


def tables_to_csv(records: Sequence[MetricRecord], fingerprint: str, seed: int) -> str:
    """Tidy aggregate cells: one row per (split, scale, regime, model, horizon, metric)."""
    out = io.StringIO()
    out.write(stamp(fingerprint, seed))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["split", "scale", "regime", "model", "horizon", "metric", "mean", "std", "count"])
    for split in (WALK_FORWARD_SPLIT, HOLDOUT_SPLIT):
        subset = [r for r in records if r.split == split]
        if not subset:
            continue
        report = aggregate_stratified(subset)
        for key in sorted(report.cells, key=lambda k: (k[0].value, k[1], k[2])):
            regime, model, horizon = key
            for metric, stats in sorted(report.cells[key].items()):
                scale = "raw" if metric.startswith("raw_") else "standardized"
                writer.writerow(
                    [split, scale, regime.value, model, horizon,
                     metric.removeprefix("raw_"), repr(stats.mean), repr(stats.std), stats.count]
                )
    return out.getvalue()
