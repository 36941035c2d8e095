"""Run configuration: a line-oriented ``section.key = value`` text format.

Absent keys fall back to the published defaults (10-day windows, Adam at
0.001, batch size 16, 50 epochs with patience 5, 0.7/0.3 gates, 80/20/20
walk-forward geometry).  Unknown keys and out-of-domain values are rejected
with the offending key named.  The canonical serialization of a resolved
configuration is hashed into a fingerprint that every output file embeds.

``vol.policy`` and ``vol.window`` are contextual: left unset, single-shot
classification uses the 30-day threshold rule while the walk-forward backtest
uses the 21-day cross-sectional median rule, and the keys stay out of the
canonical serialization so that behaviour survives a round trip.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Callable

from .errors import ConfigError
from .evaluation import BacktestSettings, HorizonSpec, TrainMode
from .lstm_expert import TrainConfig
from .market_data import SyntheticSpec, WindowMode
from .regime import RegimeLabel, RegimePolicy

__all__ = ["RunConfig", "parse_config", "parse_config_text"]


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}")


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}")


def _parse_horizons(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"not a comma-separated integer list: {text!r}")
    if not values:
        raise ConfigError("horizon list is empty")
    return values


def _parse_clip(text: str) -> float | None:
    if text.strip().lower() == "off":
        return None
    return _parse_float(text)


@dataclass(frozen=True)
class _Key:
    name: str
    parse: Callable[[str], Any]
    default: Any
    domain: str
    check: Callable[[Any], bool]
    fmt: Callable[[Any], str] = lambda v: str(v)
    contextual: bool = False  # omitted from serialization when not explicitly set


def _enum_key(name: str, choices: tuple[str, ...], default: str | None, contextual=False) -> _Key:
    return _Key(
        name=name,
        parse=lambda text: text.strip(),
        default=default,
        domain=" | ".join(choices),
        check=lambda v: v in choices,
        contextual=contextual,
    )


_REGISTRY: tuple[_Key, ...] = (
    _Key("data.path", str.strip, "", "file path", lambda v: True),
    _enum_key("data.mode", ("price_levels", "log_returns"), "price_levels"),
    _Key("window.length", _parse_int, 10, "integer >= 1", lambda v: v >= 1),
    _enum_key("vol.policy", ("threshold", "median"), None, contextual=True),
    _Key("vol.window", _parse_int, None, "integer >= 2", lambda v: v >= 2, contextual=True),
    _Key("vol.tau", _parse_float, 0.025, "real > 0", lambda v: v > 0, fmt=repr),
    _Key("wf.init_train", _parse_int, 80, "integer >= 1", lambda v: v >= 1),
    _Key("wf.val_len", _parse_int, 20, "integer >= 1", lambda v: v >= 1),
    _Key("wf.step", _parse_int, 20, "integer >= 1", lambda v: v >= 1),
    _enum_key("wf.mode", ("sliding", "expanding"), "sliding"),
    _Key("train.learning_rate", _parse_float, 0.001, "real > 0", lambda v: v > 0, fmt=repr),
    _Key("train.batch_size", _parse_int, 16, "integer >= 1", lambda v: v >= 1),
    _Key("train.max_epochs", _parse_int, 50, "integer >= 1", lambda v: v >= 1),
    _Key("train.patience", _parse_int, 5, "integer >= 1", lambda v: v >= 1),
    _Key("train.adam_beta1", _parse_float, 0.9, "real in (0, 1)", lambda v: 0 < v < 1, fmt=repr),
    _Key("train.adam_beta2", _parse_float, 0.999, "real in (0, 1)", lambda v: 0 < v < 1, fmt=repr),
    _Key("train.adam_eps", _parse_float, 1e-8, "real > 0", lambda v: v > 0, fmt=repr),
    _Key("train.hidden_units", _parse_int, 50, "integer >= 1", lambda v: v >= 1),
    _Key(
        "train.clip_norm", _parse_clip, None, "real > 0 or 'off'",
        lambda v: v is None or v > 0,
        fmt=lambda v: "off" if v is None else repr(v),
    ),
    _Key(
        "gate.volatile.w_rnn", _parse_float, 0.7, "real in [0, 1]",
        lambda v: 0 <= v <= 1, fmt=repr,
    ),
    _Key(
        "gate.stable.w_rnn", _parse_float, 0.3, "real in [0, 1]",
        lambda v: 0 <= v <= 1, fmt=repr,
    ),
    _Key(
        "horizons", _parse_horizons, (5, 20, 60), "comma-separated integers >= 1",
        lambda v: all(h >= 1 for h in v),
        fmt=lambda v: ",".join(str(h) for h in v),
    ),
    _Key("holdout.k", _parse_int, 10, "integer >= 0", lambda v: v >= 0),
    _Key("seed", _parse_int, 42, "integer", lambda v: True),
    _Key("report.dir", str.strip, "reports", "directory path", lambda v: True),
    _Key("synth.stable_firms", _parse_int, 15, "integer >= 0", lambda v: v >= 0),
    _Key("synth.volatile_firms", _parse_int, 15, "integer >= 0", lambda v: v >= 0),
    _Key("synth.length", _parse_int, 300, "integer >= 1", lambda v: v >= 1),
)

_BY_NAME = {key.name: key for key in _REGISTRY}

_POLICY_WINDOW_DEFAULTS = {"threshold": 30, "median": 21}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration plus the set of keys the user actually wrote."""

    values: dict[str, Any]
    explicit: frozenset[str]

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    # -- resolution helpers ------------------------------------------------

    def _policy(self, default_kind: str) -> RegimePolicy:
        kind = self.values["vol.policy"] or default_kind
        window = self.values["vol.window"]
        if window is None:
            window = _POLICY_WINDOW_DEFAULTS[kind]
        if kind == "threshold":
            return RegimePolicy.threshold(window, self.values["vol.tau"])
        return RegimePolicy.median(window)

    def policy_for_backtest(self) -> RegimePolicy:
        return self._policy("median")

    def policy_for_classify(self) -> RegimePolicy:
        return self._policy("threshold")

    def window_mode(self) -> WindowMode:
        return WindowMode(self.values["data.mode"])

    def train_mode(self) -> TrainMode:
        return TrainMode(self.values["wf.mode"])

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.values["train.learning_rate"],
            batch_size=self.values["train.batch_size"],
            max_epochs=self.values["train.max_epochs"],
            patience=self.values["train.patience"],
            adam_beta1=self.values["train.adam_beta1"],
            adam_beta2=self.values["train.adam_beta2"],
            adam_eps=self.values["train.adam_eps"],
            seed=self.values["seed"],
            clip_norm=self.values["train.clip_norm"],
        )

    def gate_table(self) -> dict[RegimeLabel, float]:
        return {
            RegimeLabel.VOLATILE: self.values["gate.volatile.w_rnn"],
            RegimeLabel.STABLE: self.values["gate.stable.w_rnn"],
        }

    def backtest_settings(self) -> BacktestSettings:
        return BacktestSettings(
            window=self.values["window.length"],
            mode=self.window_mode(),
            train=self.train_config(),
            hidden=self.values["train.hidden_units"],
            gate_table=self.gate_table(),
            horizons=HorizonSpec(self.values["horizons"]),
            seed=self.values["seed"],
        )

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_stable=self.values["synth.stable_firms"],
            n_volatile=self.values["synth.volatile_firms"],
            length=self.values["synth.length"],
        )

    # -- serialization -----------------------------------------------------

    def serialize(self) -> str:
        """Canonical text: registry order, one ``key = value`` per line.

        Contextual keys are emitted only when the user set them, so parsing
        the serialization reproduces this configuration exactly, including
        its context-dependent defaults.
        """
        lines = []
        for key in _REGISTRY:
            if key.contextual and key.name not in self.explicit:
                continue
            lines.append(f"{key.name} = {key.fmt(self.values[key.name])}")
        return "\n".join(lines) + "\n"

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    @property
    def short_fingerprint(self) -> str:
        return self.fingerprint[:12]


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {line!r}")
        name, _, value_text = stripped.partition("=")
        name = name.strip()
        if name not in _BY_NAME:
            raise ConfigError(f"{source}: line {lineno}: unknown key {name!r}")
        if name in raw:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {name!r}")
        raw[name] = value_text.strip()
    values: dict[str, Any] = {}
    for key in _REGISTRY:
        if key.name in raw:
            try:
                value = key.parse(raw[key.name])
            except ConfigError as exc:
                raise ConfigError(f"{source}: key {key.name}: {exc}")
            if not key.check(value):
                raise ConfigError(
                    f"{source}: key {key.name}: value {raw[key.name]!r} "
                    f"outside domain ({key.domain})"
                )
            values[key.name] = value
        else:
            values[key.name] = key.default
    return RunConfig(values=values, explicit=frozenset(raw))


def parse_config(path, seed_override: int | None = None) -> RunConfig:
    """Read a configuration file; ``seed_override`` replaces the seed when given."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    config = parse_config_text(text, source=str(path))
    if seed_override is not None:
        values = dict(config.values)
        values["seed"] = seed_override
        config = RunConfig(values=values, explicit=config.explicit | {"seed"})
    return config
