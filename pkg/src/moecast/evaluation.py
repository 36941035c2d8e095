"""Walk-forward backtesting, multi-horizon recursive forecasting, and metrics.

The harness advances a train/validation split through each firm's series,
refits both experts from scratch inside every fold, classifies firms under
the active regime policy using only pre-validation data, and scores Linear,
LSTM, and the mixture on the validation window at horizon one plus recursive
horizons.  Nothing fitted ever sees a validation index: scalers, volatility
reads, classifications, and parameters are all functions of data strictly
before the validation start, which the tests assert by perturbation.
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import EvaluationError
from .linear_expert import LinearParams, fit_ols, predict_linear
from .lstm_expert import LstmParams, TrainConfig, predict_lstm, train_early_stopping
from .market_data import (
    PriceSeries,
    ReturnSeries,
    Scaler,
    VolatilitySeries,
    WindowMode,
    WindowedDataset,
    log_returns,
    make_windows,
    rolling_volatility,
    simple_returns,
)
from .moe import DEFAULT_GATE_TABLE, GateWeights, combine, gate_for_regime
from .regime import (
    PolicyKind,
    RegimeAssignment,
    RegimeLabel,
    RegimePolicy,
    classify_median,
    classify_threshold,
)

__all__ = [
    "MODELS",
    "TrainMode",
    "FoldSpec",
    "WalkForwardPlan",
    "HorizonSpec",
    "MetricRecord",
    "CellStats",
    "StratifiedReport",
    "HoldoutSpec",
    "BacktestSettings",
    "FoldModels",
    "PredictionPoint",
    "WalkForwardResult",
    "PooledExperts",
    "mse",
    "mae",
    "rmse",
    "mase",
    "improvement_pct",
    "n_values",
    "plan_walk_forward",
    "recursive_forecast",
    "lstm_one_step",
    "linear_one_step",
    "moe_one_step",
    "run_walk_forward",
    "fit_pooled_experts",
    "run_holdout",
    "aggregate_stratified",
]

MODELS = ("Linear", "LSTM", "MoE")

WALK_FORWARD_SPLIT = "walk_forward"
HOLDOUT_SPLIT = "holdout"
HOLDOUT_FOLD_ID = -1


# ---------------------------------------------------------------------------
# metrics


def _check_pair(predictions, targets) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(targets, dtype=float).reshape(-1)
    if p.shape != t.shape or p.size == 0:
        raise EvaluationError(
            f"predictions and targets must share a non-empty length, got {p.size} and {t.size}"
        )
    return p, t


def mse(predictions, targets) -> float:
    p, t = _check_pair(predictions, targets)
    return float(((p - t) ** 2).mean())


def mae(predictions, targets) -> float:
    p, t = _check_pair(predictions, targets)
    return float(np.abs(p - t).mean())


def rmse(predictions, targets) -> float:
    return math.sqrt(mse(predictions, targets))


def mase(predictions, targets, train_targets) -> float:
    """MAE scaled by the in-sample one-step naive MAE of the training targets."""
    train = np.asarray(train_targets, dtype=float).reshape(-1)
    if train.size < 2:
        raise EvaluationError(f"mase needs at least 2 training targets, got {train.size}")
    denom = float(np.abs(np.diff(train)).mean())
    if denom == 0.0:
        raise EvaluationError("mase undefined: training targets are constant")
    return mae(predictions, targets) / denom


def improvement_pct(candidate: float, baseline: float) -> float:
    """Percentage reduction of ``candidate`` relative to ``baseline``."""
    if not baseline > 0:
        raise EvaluationError(f"baseline must be positive, got {baseline}")
    return (baseline - candidate) / baseline * 100.0


# ---------------------------------------------------------------------------
# walk-forward geometry


class TrainMode(enum.Enum):
    SLIDING = "sliding"
    EXPANDING = "expanding"


@dataclass(frozen=True)
class FoldSpec:
    fold_id: int
    train_range: range
    val_range: range


@dataclass(frozen=True)
class WalkForwardPlan:
    folds: tuple[FoldSpec, ...]
    init_train: int
    val_len: int
    step: int
    mode: TrainMode


@dataclass(frozen=True)
class HorizonSpec:
    """Recursive forecast horizons, all at least one step."""

    horizons: tuple[int, ...] = (5, 20, 60)

    def __post_init__(self) -> None:
        if any(h < 1 for h in self.horizons):
            raise EvaluationError(f"horizons must all be >= 1, got {self.horizons}")
        object.__setattr__(self, "horizons", tuple(sorted(set(self.horizons))))


def plan_walk_forward(
    n: int,
    init_train: int = 80,
    val_len: int = 20,
    step: int = 20,
    mode: TrainMode = TrainMode.SLIDING,
) -> WalkForwardPlan:
    """Fold layout over a length-``n`` observation sequence.

    Fold ``k`` validates on ``[init_train + k*step, init_train + k*step +
    val_len)``; sliding mode keeps a fixed-length training window ending at
    the validation start, expanding mode anchors training at zero.  Folds are
    generated while the validation window fits in the series.
    """
    if init_train < 1 or val_len < 1 or step < 1:
        raise EvaluationError("init_train, val_len, and step must be positive")
    if n < init_train + val_len:
        raise EvaluationError(
            f"series length {n} too short for one fold (need {init_train + val_len})"
        )
    folds = []
    k = 0
    while init_train + k * step + val_len <= n:
        val_start = init_train + k * step
        train_start = val_start - init_train if mode is TrainMode.SLIDING else 0
        folds.append(FoldSpec(k, range(train_start, val_start), range(val_start, val_start + val_len)))
        k += 1
    return WalkForwardPlan(tuple(folds), init_train, val_len, step, mode)


# ---------------------------------------------------------------------------
# recursive forecasting

ONE_STEP_FN = Callable[[np.ndarray, float, float], float]


def recursive_forecast(
    predict_fn: ONE_STEP_FN,
    last_window: np.ndarray,
    t_start: float,
    sigma: float,
    h: int,
) -> np.ndarray:
    """Feed each prediction back as the newest window element for ``h`` steps.

    The time index advances by one per step, while ``sigma`` stays frozen at
    its last observed value (there is no volatility forecaster to update it).
    """
    if h < 1:
        raise EvaluationError(f"horizon must be >= 1, got {h}")
    window = np.asarray(last_window, dtype=float).copy()
    out = np.empty(h)
    for j in range(h):
        pred = float(predict_fn(window, t_start + j, sigma))
        out[j] = pred
        window = np.concatenate([window[1:], [pred]])
    return out


def lstm_one_step(params: LstmParams) -> ONE_STEP_FN:
    return lambda window, t, sigma: predict_lstm(params, window)


def linear_one_step(params: LinearParams) -> ONE_STEP_FN:
    return lambda window, t, sigma: predict_linear(params, t, sigma)


def moe_one_step(
    lstm_params: LstmParams,
    linear_params: LinearParams,
    weights: GateWeights,
) -> ONE_STEP_FN:
    def step(window: np.ndarray, t: float, sigma: float) -> float:
        rnn_p = predict_lstm(lstm_params, window)
        lm_p = predict_linear(linear_params, t, sigma)
        return combine([(weights.w_rnn, rnn_p), (weights.w_lm, lm_p)])

    return step


# ---------------------------------------------------------------------------
# records and aggregation


@dataclass(frozen=True)
class MetricRecord:
    """Scores for one (firm, fold, model, horizon) cell.

    ``mse``/``mae``/``rmse`` are measured on the standardized scale the
    models predict in; the ``raw_*`` triple is the same comparison after
    undoing the firm's scaler.  ``mase`` is scale-free so a single value
    covers both.
    """

    ticker: str
    fold_id: int
    split: str
    regime: RegimeLabel
    horizon: int
    model: str
    mse: float
    mae: float
    rmse: float
    raw_mse: float
    raw_mae: float
    raw_rmse: float
    mase: float | None = None

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise EvaluationError(f"unknown model {self.model!r}")
        for name in ("mse", "mae", "rmse", "raw_mse", "raw_mae", "raw_rmse"):
            if getattr(self, name) < 0:
                raise EvaluationError(f"{name} must be non-negative")


METRIC_NAMES = ("mse", "mae", "rmse", "raw_mse", "raw_mae", "raw_rmse", "mase")


@dataclass(frozen=True)
class CellStats:
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class StratifiedReport:
    """Per (regime, model, horizon) means and deviations, never pooled across regimes."""

    cells: dict[tuple[RegimeLabel, str, int], dict[str, CellStats]]

    def get(self, regime: RegimeLabel, model: str, horizon: int) -> dict[str, CellStats]:
        return self.cells[(regime, model, horizon)]


def aggregate_stratified(records: Iterable[MetricRecord]) -> StratifiedReport:
    """Sample mean and deviation of every metric per (regime, model, horizon)."""
    groups: dict[tuple[RegimeLabel, str, int], list[MetricRecord]] = {}
    for record in records:
        groups.setdefault((record.regime, record.model, record.horizon), []).append(record)
    cells: dict[tuple[RegimeLabel, str, int], dict[str, CellStats]] = {}
    for key, members in groups.items():
        stats: dict[str, CellStats] = {}
        for metric in METRIC_NAMES:
            values = [getattr(m, metric) for m in members if getattr(m, metric) is not None]
            if not values:
                continue
            arr = np.asarray(values, dtype=float)
            std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            stats[metric] = CellStats(float(arr.mean()), std, arr.size)
        cells[key] = stats
    return StratifiedReport(cells)


@dataclass(frozen=True)
class HoldoutSpec:
    """Firms excluded from every fold and scored only in the final phase."""

    volatile_holdout: tuple[str, ...]
    stable_holdout: tuple[str, ...]

    def __post_init__(self) -> None:
        overlap = set(self.volatile_holdout) & set(self.stable_holdout)
        if overlap:
            raise EvaluationError(f"holdout lists overlap: {sorted(overlap)}")

    @property
    def tickers(self) -> tuple[str, ...]:
        return tuple(self.volatile_holdout) + tuple(self.stable_holdout)


# ---------------------------------------------------------------------------
# the per-fold pipeline


@dataclass(frozen=True)
class BacktestSettings:
    """Everything run_walk_forward needs besides the universe, plan, and policy."""

    window: int = 10
    mode: WindowMode = WindowMode.PRICE_LEVELS
    train: TrainConfig = TrainConfig()
    hidden: int = 50
    gate_table: Mapping[RegimeLabel, float] = field(
        default_factory=lambda: dict(DEFAULT_GATE_TABLE)
    )
    horizons: HorizonSpec = HorizonSpec()
    seed: int = 42
    es_val_fraction: float = 0.2


@dataclass(frozen=True)
class FoldModels:
    """Frozen per-(firm, fold) experts plus the context needed to predict again."""

    lstm: LstmParams
    linear: LinearParams
    scaler: Scaler
    sigma: float
    regime: RegimeLabel
    launch_t: int
    window: int
    mode: WindowMode


@dataclass(frozen=True)
class PredictionPoint:
    """One stored single-step validation prediction (both scales)."""

    ticker: str
    fold_id: int
    t_index: int
    model: str
    actual: float
    predicted: float
    actual_raw: float
    predicted_raw: float


@dataclass(frozen=True)
class WalkForwardResult:
    records: tuple[MetricRecord, ...]
    models: dict[tuple[str, int], FoldModels]
    predictions: tuple[PredictionPoint, ...]
    assignments: tuple[RegimeAssignment, ...]


def task_seed(global_seed: int, ticker: str, fold_id: int) -> int:
    """Deterministic per-(firm, fold) training seed, stable across runs and platforms."""
    seq = np.random.SeedSequence([global_seed, fold_id + 1, zlib.crc32(ticker.encode("utf-8"))])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def returns_for_policy(series: PriceSeries, policy: RegimePolicy) -> ReturnSeries:
    """Simple returns feed the threshold rule; log returns feed the median rule."""
    if policy.kind is PolicyKind.THRESHOLD:
        return simple_returns(series)
    return log_returns(series)


def n_values(series: PriceSeries, mode: WindowMode) -> int:
    return len(series) if mode is WindowMode.PRICE_LEVELS else len(series) - 1


@dataclass(frozen=True)
class _FoldFirmData:
    """One firm's view of a single fold, everything indexed locally."""

    ticker: str
    dataset: WindowedDataset
    vol: VolatilitySeries
    train_len: int
    total_len: int
    t_offset: int
    mode: WindowMode

    def sigma_for_target(self, t_local: int) -> float:
        at = t_local - 1 if self.mode is WindowMode.PRICE_LEVELS else t_local
        return self.vol.at_return_index(at)

    @property
    def sigma_frozen(self) -> float:
        return self.sigma_for_target(self.train_len - 1)

    def target_at(self, t_local: int) -> float:
        return float(self.dataset.targets[t_local - self.dataset.window])

    def window_for_target(self, t_local: int) -> np.ndarray:
        return self.dataset.inputs[t_local - self.dataset.window]


def _prepare_fold_firm(
    series: PriceSeries,
    fold: FoldSpec,
    policy: RegimePolicy,
    settings: BacktestSettings,
) -> _FoldFirmData:
    ts, te = fold.train_range.start, fold.train_range.stop
    ve = fold.val_range.stop
    if settings.mode is WindowMode.PRICE_LEVELS:
        points = series.points[ts:ve]
    else:
        points = series.points[ts:ve + 1]
    slice_series = PriceSeries(series.ticker, points)
    dataset = make_windows(slice_series, settings.window, settings.mode, train_end=te - ts)
    vol = rolling_volatility(returns_for_policy(slice_series, policy), policy.vol_window)
    return _FoldFirmData(
        ticker=series.ticker,
        dataset=dataset,
        vol=vol,
        train_len=te - ts,
        total_len=ve - ts,
        t_offset=ts,
        mode=settings.mode,
    )


def _linear_row_start(settings: BacktestSettings, policy: RegimePolicy) -> int:
    if settings.mode is WindowMode.PRICE_LEVELS:
        return max(settings.window, policy.vol_window)
    return max(settings.window, policy.vol_window - 1)


def _fit_fold_experts(
    data: _FoldFirmData,
    policy: RegimePolicy,
    settings: BacktestSettings,
    seed: int,
) -> tuple[LstmParams, LinearParams]:
    train_ds = data.dataset.restrict(data.dataset.window, data.train_len)
    n_train = len(train_ds)
    if n_train < 2:
        raise EvaluationError(f"{data.ticker}: not enough training samples ({n_train})")
    n_es = max(1, int(round(settings.es_val_fraction * n_train)))
    if n_es >= n_train:
        n_es = n_train - 1
    cfg = replace(settings.train, seed=seed)
    lstm_params, _ = train_early_stopping(
        train_ds.inputs[:n_train - n_es],
        train_ds.targets[:n_train - n_es],
        train_ds.inputs[n_train - n_es:],
        train_ds.targets[n_train - n_es:],
        cfg,
        hidden=settings.hidden,
    )
    row_start = _linear_row_start(settings, policy)
    if data.train_len - row_start < 3:
        raise EvaluationError(
            f"{data.ticker}: training window too short for the linear design "
            f"(first usable target {row_start}, train length {data.train_len})"
        )
    rows = range(row_start, data.train_len)
    t_vals = [float(data.t_offset + t) for t in rows]
    sigmas = [data.sigma_for_target(t) for t in rows]
    targets = [data.target_at(t) for t in rows]
    linear_params = fit_ols(t_vals, sigmas, targets).params
    return lstm_params, linear_params


def _score(
    preds_std: np.ndarray,
    actual_std: np.ndarray,
    scaler: Scaler,
    train_targets_std: np.ndarray,
) -> dict[str, float | None]:
    preds_raw = scaler.invert(preds_std)
    actual_raw = scaler.invert(actual_std)
    naive_denom = float(np.abs(np.diff(train_targets_std)).mean())
    return {
        "mse": mse(preds_std, actual_std),
        "mae": mae(preds_std, actual_std),
        "rmse": rmse(preds_std, actual_std),
        "raw_mse": mse(preds_raw, actual_raw),
        "raw_mae": mae(preds_raw, actual_raw),
        "raw_rmse": rmse(preds_raw, actual_raw),
        "mase": (mae(preds_std, actual_std) / naive_denom) if naive_denom > 0 else None,
    }


def _classify_fold(
    fold_data: dict[str, _FoldFirmData],
    policy: RegimePolicy,
    fold: FoldSpec,
) -> RegimeAssignment:
    if policy.kind is PolicyKind.THRESHOLD:
        labels = {}
        for ticker, data in fold_data.items():
            at = data.train_len - 2 if data.mode is WindowMode.PRICE_LEVELS else data.train_len - 1
            labels[ticker] = classify_threshold(data.vol, at, policy.tau)
    else:
        labels = classify_median({t: d.sigma_frozen for t, d in fold_data.items()})
    return RegimeAssignment(
        fold_id=fold.fold_id,
        labels=labels,
        policy=policy,
        as_of_index=fold.train_range.stop - 1,
    )


def run_walk_forward(
    universe: Mapping[str, PriceSeries],
    plan: WalkForwardPlan,
    policy: RegimePolicy,
    settings: BacktestSettings,
) -> WalkForwardResult:
    """Re-train, re-classify, and score every firm inside every fold.

    Horizon-1 records score single-step predictions across the whole
    validation window; each configured horizon adds a record scoring the
    recursive forecast launched at the validation start against the first
    ``h`` validation observations (truncated when fewer remain).  Every firm
    and fold trains from freshly initialized parameters with a seed derived
    from ``(settings.seed, ticker, fold)``, so reruns are bit-identical.
    """
    if not universe:
        raise EvaluationError("universe is empty")
    tickers = sorted(universe)
    horizon_end = plan.folds[-1].val_range.stop
    for ticker in tickers:
        have = n_values(universe[ticker], settings.mode)
        if have < horizon_end:
            raise EvaluationError(
                f"{ticker}: series provides {have} observations, plan needs {horizon_end}"
            )

    records: list[MetricRecord] = []
    models: dict[tuple[str, int], FoldModels] = {}
    predictions: list[PredictionPoint] = []
    assignments: list[RegimeAssignment] = []

    for fold in plan.folds:
        fold_data = {
            ticker: _prepare_fold_firm(universe[ticker], fold, policy, settings)
            for ticker in tickers
        }
        assignment = _classify_fold(fold_data, policy, fold)
        assignments.append(assignment)

        for ticker in tickers:
            data = fold_data[ticker]
            regime = assignment.labels[ticker]
            weights = gate_for_regime(regime, settings.gate_table)
            lstm_params, linear_params = _fit_fold_experts(
                data, policy, settings, task_seed(settings.seed, ticker, fold.fold_id)
            )
            sigma = data.sigma_frozen
            launch_t = fold.val_range.start
            models[(ticker, fold.fold_id)] = FoldModels(
                lstm=lstm_params,
                linear=linear_params,
                scaler=data.dataset.scaler,
                sigma=sigma,
                regime=regime,
                launch_t=launch_t,
                window=settings.window,
                mode=settings.mode,
            )
            train_targets = data.dataset.restrict(data.dataset.window, data.train_len).targets

            # horizon 1: single-step predictions across the validation window
            steps: dict[str, list[float]] = {m: [] for m in MODELS}
            actual_std = []
            for t_local in range(data.train_len, data.total_len):
                window = data.window_for_target(t_local)
                t_global = float(data.t_offset + t_local)
                lstm_p = predict_lstm(lstm_params, window)
                lin_p = predict_linear(linear_params, t_global, sigma)
                moe_p = combine([(weights.w_rnn, lstm_p), (weights.w_lm, lin_p)])
                steps["LSTM"].append(lstm_p)
                steps["Linear"].append(lin_p)
                steps["MoE"].append(moe_p)
                actual_std.append(data.target_at(t_local))
            actual_arr = np.asarray(actual_std)
            scaler = data.dataset.scaler
            for model in MODELS:
                preds = np.asarray(steps[model])
                scores = _score(preds, actual_arr, scaler, train_targets)
                records.append(
                    MetricRecord(
                        ticker, fold.fold_id, WALK_FORWARD_SPLIT, regime, 1, model, **scores
                    )
                )
                for j, t_local in enumerate(range(data.train_len, data.total_len)):
                    predictions.append(
                        PredictionPoint(
                            ticker, fold.fold_id, data.t_offset + t_local, model,
                            float(actual_arr[j]), float(preds[j]),
                            float(scaler.invert(actual_arr[j])),
                            float(scaler.invert(preds[j])),
                        )
                    )

            # recursive horizons launched at the validation start
            last_window = data.window_for_target(data.train_len)
            t_launch_global = float(data.t_offset + data.train_len)
            fns = {
                "Linear": linear_one_step(linear_params),
                "LSTM": lstm_one_step(lstm_params),
                "MoE": moe_one_step(lstm_params, linear_params, weights),
            }
            for h in settings.horizons.horizons:
                avail = min(h, data.total_len - data.train_len)
                if avail < 1:
                    continue
                horizon_actual = actual_arr[:avail]
                for model in MODELS:
                    preds = recursive_forecast(
                        fns[model], last_window, t_launch_global, sigma, avail
                    )
                    scores = _score(preds, horizon_actual, scaler, train_targets)
                    records.append(
                        MetricRecord(
                            ticker, fold.fold_id, WALK_FORWARD_SPLIT, regime, h, model, **scores
                        )
                    )

    return WalkForwardResult(
        records=tuple(records),
        models=models,
        predictions=tuple(predictions),
        assignments=tuple(assignments),
    )


# ---------------------------------------------------------------------------
# holdout stress evaluation


@dataclass(frozen=True)
class PooledExperts:
    """Experts trained once on every non-holdout firm's pre-launch history."""

    lstm: LstmParams
    linear: LinearParams
    launch_t: int
    training_tickers: tuple[str, ...]
    decision_sigma: float | None  # frozen median boundary (median policy only)


def fit_pooled_experts(
    train_universe: Mapping[str, PriceSeries],
    policy: RegimePolicy,
    settings: BacktestSettings,
    launch_t: int,
) -> PooledExperts:
    """One LSTM and one linear fit pooled across firms, for unseen-firm scoring.

    Each firm contributes windows standardized by its own pre-launch scaler;
    the tail of each firm's samples forms the early-stopping split.  The
    cross-sectional median of the firms' frozen volatilities is kept as the
    decision boundary for labelling unseen firms under the median policy.
    """
    if not train_universe:
        raise EvaluationError("pooled training universe is empty")
    tickers = sorted(train_universe)
    train_x, train_y, val_x, val_y = [], [], [], []
    lin_t, lin_sigma, lin_y = [], [], []
    sigmas: dict[str, float] = {}
    row_start = _linear_row_start(settings, policy)
    for ticker in tickers:
        series = train_universe[ticker]
        if n_values(series, settings.mode) < launch_t + 1:
            raise EvaluationError(f"{ticker}: too short for launch index {launch_t}")
        fold = FoldSpec(0, range(0, launch_t), range(launch_t, launch_t + 1))
        data = _prepare_fold_firm(series, fold, policy, settings)
        ds = data.dataset.restrict(data.dataset.window, launch_t)
        n = len(ds)
        n_es = max(1, int(round(settings.es_val_fraction * n)))
        if n_es >= n:
            n_es = n - 1
        train_x.append(ds.inputs[:n - n_es])
        train_y.append(ds.targets[:n - n_es])
        val_x.append(ds.inputs[n - n_es:])
        val_y.append(ds.targets[n - n_es:])
        for t_local in range(row_start, launch_t):
            lin_t.append(float(t_local))
            lin_sigma.append(data.sigma_for_target(t_local))
            lin_y.append(data.target_at(t_local))
        sigmas[ticker] = data.sigma_frozen
    cfg = replace(settings.train, seed=task_seed(settings.seed, "__pooled__", HOLDOUT_FOLD_ID))
    lstm_params, _ = train_early_stopping(
        np.concatenate(train_x), np.concatenate(train_y),
        np.concatenate(val_x), np.concatenate(val_y),
        cfg, hidden=settings.hidden,
    )
    linear_params = fit_ols(lin_t, lin_sigma, lin_y).params
    decision = (
        float(np.median(list(sigmas.values())))
        if policy.kind is PolicyKind.CROSS_SECTIONAL_MEDIAN
        else None
    )
    return PooledExperts(lstm_params, linear_params, launch_t, tuple(tickers), decision)


def run_holdout(
    universe: Mapping[str, PriceSeries],
    holdout: HoldoutSpec,
    experts: PooledExperts,
    policy: RegimePolicy,
    settings: BacktestSettings,
) -> tuple[MetricRecord, ...]:
    """Score the frozen pooled experts on held-out firms across all horizons.

    Each holdout firm is standardized by its own pre-launch scaler, labelled
    against the frozen decision boundary, and scored on recursive forecasts
    launched at the shared launch index.  Model parameters are never touched.
    """
    overlap = set(holdout.tickers) & set(experts.training_tickers)
    if overlap:
        raise EvaluationError(f"holdout firms overlap the training universe: {sorted(overlap)}")
    records: list[MetricRecord] = []
    launch = experts.launch_t
    for ticker in sorted(holdout.tickers):
        if ticker not in universe:
            raise EvaluationError(f"holdout ticker {ticker} missing from the universe")
        series = universe[ticker]
        n_vals = n_values(series, settings.mode)
        if n_vals < launch + 1:
            raise EvaluationError(f"{ticker}: too short to evaluate at launch index {launch}")
        fold = FoldSpec(HOLDOUT_FOLD_ID, range(0, launch), range(launch, n_vals))
        data = _prepare_fold_firm(series, fold, policy, settings)
        sigma = data.sigma_frozen
        if policy.kind is PolicyKind.THRESHOLD:
            regime = RegimeLabel.VOLATILE if sigma > policy.tau else RegimeLabel.STABLE
        else:
            regime = (
                RegimeLabel.VOLATILE if sigma > experts.decision_sigma else RegimeLabel.STABLE
            )
        weights = gate_for_regime(regime, settings.gate_table)
        train_targets = data.dataset.restrict(data.dataset.window, launch).targets
        last_window = data.window_for_target(launch)
        scaler = data.dataset.scaler
        fns = {
            "Linear": linear_one_step(experts.linear),
            "LSTM": lstm_one_step(experts.lstm),
            "MoE": moe_one_step(experts.lstm, experts.linear, weights),
        }
        for h in settings.horizons.horizons:
            avail = min(h, n_vals - launch)
            actual = np.array([data.target_at(t) for t in range(launch, launch + avail)])
            for model in MODELS:
                preds = recursive_forecast(fns[model], last_window, float(launch), sigma, avail)
                scores = _score(preds, actual, scaler, train_targets)
                records.append(
                    MetricRecord(
                        ticker, HOLDOUT_FOLD_ID, HOLDOUT_SPLIT, regime, h, model, **scores
                    )
                )
    return tuple(records)
