"""Price series ingestion, returns, rolling volatility, and supervised windows.

Everything downstream (regime labels, both experts, the backtest) consumes the
types defined here.  All containers are immutable after construction: numpy
payloads are marked read-only so they can be shared freely across parallel
per-firm pipelines.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "ReturnKind",
    "WindowMode",
    "PricePoint",
    "PriceSeries",
    "ReturnSeries",
    "VolatilitySeries",
    "Scaler",
    "WindowSample",
    "WindowedDataset",
    "SyntheticSpec",
    "load_csv",
    "write_csv",
    "simple_returns",
    "log_returns",
    "rolling_volatility",
    "fit_scaler",
    "make_windows",
    "generate_synthetic",
]

CSV_HEADER = ("ticker", "date", "adj_close")


class ReturnKind(enum.Enum):
    SIMPLE = "simple"
    LOG = "log"


class WindowMode(enum.Enum):
    PRICE_LEVELS = "price_levels"
    LOG_RETURNS = "log_returns"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PricePoint:
    """One dated adjusted-close observation."""

    date: dt.date
    adj_close: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.adj_close) and self.adj_close > 0):
            raise DataError(f"adj_close must be positive and finite, got {self.adj_close!r}")


@dataclass(frozen=True)
class PriceSeries:
    """One firm's adjusted-close sequence, dates strictly increasing."""

    ticker: str
    points: tuple[PricePoint, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.date <= prev.date:
                raise DataError(
                    f"{self.ticker}: dates must be strictly increasing "
                    f"({prev.date} followed by {cur.date})"
                )

    def __len__(self) -> int:
        return len(self.points)

    @property
    def prices(self) -> np.ndarray:
        return _frozen([p.adj_close for p in self.points])

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return tuple(p.date for p in self.points)


@dataclass(frozen=True)
class ReturnSeries:
    """Dimensionless one-step returns; length is one less than the price series."""

    ticker: str
    values: np.ndarray
    kind: ReturnKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class VolatilitySeries:
    """Trailing sample standard deviations of returns.

    ``values[j]`` is the deviation of the ``window`` returns ending at return
    index ``window - 1 + j``, so the series is only defined from return index
    ``window - 1`` onward.
    """

    ticker: str
    window: int
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def first_return_index(self) -> int:
        return self.window - 1

    @property
    def last_return_index(self) -> int:
        return self.window - 1 + len(self.values) - 1

    def at_return_index(self, at: int) -> float:
        """Volatility of the window whose most recent return has index ``at``."""
        if not (self.first_return_index <= at <= self.last_return_index):
            raise DataError(
                f"return index {at} outside volatility range "
                f"[{self.first_return_index}, {self.last_return_index}]"
            )
        return float(self.values[at - self.first_return_index])


@dataclass(frozen=True)
class Scaler:
    """Mean/deviation pair fitted on the training portion of a series."""

    mean: float
    std: float

    def apply(self, values: np.ndarray | float) -> np.ndarray | float:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def invert(self, values: np.ndarray | float) -> np.ndarray | float:
        return np.asarray(values, dtype=float) * self.std + self.mean


@dataclass(frozen=True)
class WindowSample:
    """A length-w input window and the standardized value that follows it."""

    inputs: np.ndarray
    target: float
    t_index: int


@dataclass(frozen=True)
class WindowedDataset:
    """Overlapping supervised windows over one firm's standardized values.

    ``inputs[k]`` holds the ``w`` standardized values preceding position
    ``t_index[k]`` and ``targets[k]`` the standardized value at that position.
    """

    ticker: str
    inputs: np.ndarray
    targets: np.ndarray
    t_index: np.ndarray
    scaler: Scaler
    mode: WindowMode

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", _frozen(self.inputs))
        object.__setattr__(self, "targets", _frozen(self.targets))
        idx = np.array(self.t_index, dtype=int)
        idx.setflags(write=False)
        object.__setattr__(self, "t_index", idx)

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def window(self) -> int:
        return self.inputs.shape[1]

    @property
    def samples(self) -> tuple[WindowSample, ...]:
        return tuple(
            WindowSample(self.inputs[k], float(self.targets[k]), int(self.t_index[k]))
            for k in range(len(self))
        )

    def restrict(self, t_lo: int, t_hi: int) -> "WindowedDataset":
        """Samples whose target index lies in ``[t_lo, t_hi)``."""
        keep = (self.t_index >= t_lo) & (self.t_index < t_hi)
        return WindowedDataset(
            self.ticker, self.inputs[keep], self.targets[keep],
            self.t_index[keep], self.scaler, self.mode,
        )


def load_csv(path) -> dict[str, PriceSeries]:
    """Read a long-format ``ticker,date,adj_close`` file into per-ticker series.

    Rows may be interleaved across tickers and out of order; each resulting
    series is sorted by date.  Every malformed row is reported with its
    1-based line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header {','.join(CSV_HEADER)}")
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(
                f"{path}: line 1: expected header {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        rows: dict[str, list[tuple[dt.date, float]]] = {}
        seen: set[tuple[str, dt.date]] = set()
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
            ticker, date_text, price_text = (f.strip() for f in row)
            if not ticker:
                raise DataError(f"{path}: line {lineno}: empty ticker")
            try:
                date = dt.date.fromisoformat(date_text)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: invalid ISO date {date_text!r}")
            try:
                price = float(price_text)
            except ValueError:
                raise DataError(f"{path}: line {lineno}: invalid price {price_text!r}")
            if not (math.isfinite(price) and price > 0):
                raise DataError(
                    f"{path}: line {lineno}: non-positive price {price_text} for {ticker}"
                )
            if (ticker, date) in seen:
                raise DataError(f"{path}: line {lineno}: duplicate ({ticker}, {date})")
            seen.add((ticker, date))
            rows.setdefault(ticker, []).append((date, price))
    out: dict[str, PriceSeries] = {}
    for ticker in sorted(rows):
        pts = tuple(PricePoint(d, p) for d, p in sorted(rows[ticker]))
        out[ticker] = PriceSeries(ticker, pts)
    return out


def write_csv(universe: dict[str, PriceSeries], path) -> None:
    """Write per-ticker series back to the long CSV format, sorted by ticker then date."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for ticker in sorted(universe):
            for point in universe[ticker].points:
                writer.writerow([ticker, point.date.isoformat(), repr(point.adj_close)])


def simple_returns(series: PriceSeries) -> ReturnSeries:
    """One-step fractional price changes, ``(p[k+1] - p[k]) / p[k]``."""
    prices = series.prices
    if len(prices) < 2:
        raise DataError(f"{series.ticker}: need at least 2 prices for returns, got {len(prices)}")
    return ReturnSeries(series.ticker, np.diff(prices) / prices[:-1], ReturnKind.SIMPLE)


def log_returns(series: PriceSeries) -> ReturnSeries:
    """One-step log price changes, ``ln(p[k+1] / p[k])``."""
    prices = series.prices
    if len(prices) < 2:
        raise DataError(f"{series.ticker}: need at least 2 prices for returns, got {len(prices)}")
    return ReturnSeries(series.ticker, np.diff(np.log(prices)), ReturnKind.LOG)


def rolling_volatility(returns: ReturnSeries, window: int) -> VolatilitySeries:
    """Trailing sample standard deviation (divisor ``window - 1``) of returns."""
    if window < 2:
        raise DataError(f"volatility window must be at least 2, got {window}")
    values = returns.values
    if len(values) < window:
        raise DataError(
            f"{returns.ticker}: window {window} exceeds return series length {len(values)}"
        )
    panes = np.lib.stride_tricks.sliding_window_view(values, window)
    return VolatilitySeries(returns.ticker, window, panes.std(axis=1, ddof=1))


def fit_scaler(values) -> Scaler:
    """Mean and sample standard deviation of a sequence.

    A zero (or undefined) deviation is replaced by 1 so that applying the
    scaler to a flat series degenerates to mean-centering instead of dividing
    by zero.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DataError("cannot fit a scaler on an empty sequence")
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size >= 2 else 0.0
    if not (math.isfinite(std) and std > 0):
        std = 1.0
    return Scaler(mean, std)


def make_windows(
    series: PriceSeries | ReturnSeries,
    w: int,
    mode: WindowMode,
    train_end: int,
) -> WindowedDataset:
    """Build every overlapping ``(w inputs, next value)`` pair over a series.

    Parameters
    ----------
    series:
        A :class:`PriceSeries` in ``PRICE_LEVELS`` mode; a log
        :class:`ReturnSeries` (or a price series, converted internally) in
        ``LOG_RETURNS`` mode.
    w:
        Input window length.
    mode:
        Which value sequence the windows range over.
    train_end:
        Exclusive index bounding the values the scaler may see.  Samples are
        still produced over the whole series; only standardization statistics
        are restricted.
    """
    if mode is WindowMode.PRICE_LEVELS:
        if not isinstance(series, PriceSeries):
            raise DataError("price-level windows require a PriceSeries")
        values = series.prices
    else:
        if isinstance(series, PriceSeries):
            values = log_returns(series).values
        elif series.kind is ReturnKind.LOG:
            values = series.values
        else:
            raise DataError("log-return windows require log returns, got simple returns")
    n = len(values)
    if w < 1:
        raise DataError(f"window length must be positive, got {w}")
    if n < w + 1:
        raise DataError(f"{series.ticker}: need at least {w + 1} values for windows, got {n}")
    if not (w + 1 <= train_end <= n):
        raise DataError(
            f"{series.ticker}: train_end must lie in [{w + 1}, {n}], got {train_end}"
        )
    scaler = fit_scaler(values[:train_end])
    standardized = scaler.apply(values)
    inputs = np.lib.stride_tricks.sliding_window_view(standardized, w)[:-1]
    targets = standardized[w:]
    return WindowedDataset(series.ticker, inputs, targets, np.arange(w, n), scaler, mode)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a two-regime synthetic universe.

    Stable firms follow a linear price drift plus low Gaussian noise; volatile
    firms follow a nonlinear autoregression in return space compounded into
    prices.  Noise scales are chosen so the 30-day rolling volatility of the
    two groups sits on opposite sides of 0.025.
    """

    n_stable: int = 8
    n_volatile: int = 8
    length: int = 300
    base_price_low: float = 80.0
    base_price_high: float = 160.0
    stable_drift_low: float = 0.02
    stable_drift_high: float = 0.12
    stable_noise_low: float = 0.2
    stable_noise_high: float = 0.5
    volatile_noise_low: float = 0.035
    volatile_noise_high: float = 0.055
    volatile_ar_scale_low: float = 0.01
    volatile_ar_scale_high: float = 0.03
    volatile_ar_gain: float = 10.0
    start_date: dt.date = dt.date(2015, 1, 2)

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise DataError(f"synthetic series length must be positive, got {self.length}")
        if self.n_stable < 0 or self.n_volatile < 0:
            raise DataError("firm counts must be non-negative")


def _uniform(rng: np.random.Generator, low: float, high: float) -> float:
    return float(low + (high - low) * rng.random())


def _stable_prices(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    base = _uniform(rng, spec.base_price_low, spec.base_price_high)
    drift = _uniform(rng, spec.stable_drift_low, spec.stable_drift_high)
    noise_sd = _uniform(rng, spec.stable_noise_low, spec.stable_noise_high)
    t = np.arange(spec.length, dtype=float)
    noise = rng.normal(0.0, noise_sd, size=spec.length) if noise_sd > 0 else np.zeros(spec.length)
    return base + drift * t + noise


def _volatile_prices(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    base = _uniform(rng, spec.base_price_low, spec.base_price_high)
    noise_sd = _uniform(rng, spec.volatile_noise_low, spec.volatile_noise_high)
    ar_scale = _uniform(rng, spec.volatile_ar_scale_low, spec.volatile_ar_scale_high)
    shocks = rng.normal(0.0, noise_sd, size=spec.length - 1) if spec.length > 1 else np.empty(0)
    rets = np.empty(spec.length - 1)
    prev = 0.0
    for k in range(spec.length - 1):
        # bounded nonlinear feedback keeps the return process stationary
        prev = ar_scale * math.tanh(spec.volatile_ar_gain * prev) + shocks[k]
        rets[k] = prev
    prices = np.empty(spec.length)
    prices[0] = base
    prices[1:] = base * np.exp(np.cumsum(rets))
    return prices


def generate_synthetic(spec: SyntheticSpec, seed: int) -> dict[str, PriceSeries]:
    """Deterministic two-regime universe keyed by ticker.

    Each firm draws from its own random stream derived from ``(seed, group,
    firm index)``, so regenerating with the same seed is bit-identical and
    adding firms never reshuffles existing ones.
    """
    dates = [spec.start_date + dt.timedelta(days=k) for k in range(spec.length)]
    universe: dict[str, PriceSeries] = {}
    for group, count, maker in (
        (0, spec.n_stable, _stable_prices),
        (1, spec.n_volatile, _volatile_prices),
    ):
        prefix = "STB" if group == 0 else "VOL"
        for idx in range(count):
            rng = np.random.default_rng(np.random.SeedSequence([seed, group, idx]))
            prices = maker(spec, rng)
            ticker = f"{prefix}{idx + 1:02d}"
            points = tuple(PricePoint(d, float(p)) for d, p in zip(dates, prices))
            universe[ticker] = PriceSeries(ticker, points)
    return universe
