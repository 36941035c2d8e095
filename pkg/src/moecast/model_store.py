"""Persistence for fitted experts, keyed by (ticker, fold).

The store is a single ``.npz`` archive: large numeric payloads live as
float64 arrays (preserved bit-exactly) and scalar context travels in a JSON
manifest whose floats round-trip through ``repr``.  Loading a store therefore
reproduces every prediction bit-for-bit, which the tests assert.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .evaluation import FoldModels, PooledExperts
from .linear_expert import LinearParams
from .lstm_expert import PARAM_FIELDS, LstmParams
from .market_data import Scaler, WindowMode
from .regime import RegimeLabel

__all__ = ["ModelStore"]

_FORMAT_VERSION = 1


def _lstm_to_entry(params: LstmParams, arrays: list[np.ndarray]) -> dict:
    fields = {}
    for name in PARAM_FIELDS:
        fields[name] = len(arrays)
        arrays.append(getattr(params, name))
    return fields


def _lstm_from_entry(fields: dict, arrays) -> LstmParams:
    return LstmParams(**{name: np.array(arrays[f"a{fields[name]}"]) for name in PARAM_FIELDS})


@dataclass
class ModelStore:
    """In-memory collection of fitted models plus the config fingerprint."""

    fingerprint: str
    fold_models: dict[tuple[str, int], FoldModels]
    pooled: PooledExperts | None = None

    def save(self, path) -> None:
        arrays: list[np.ndarray] = []
        entries = []
        for (ticker, fold_id) in sorted(self.fold_models):
            fm = self.fold_models[(ticker, fold_id)]
            entries.append(
                {
                    "ticker": ticker,
                    "fold": fold_id,
                    "lstm": _lstm_to_entry(fm.lstm, arrays),
                    "linear": [fm.linear.beta0, fm.linear.beta1, fm.linear.beta2],
                    "scaler": [fm.scaler.mean, fm.scaler.std],
                    "sigma": fm.sigma,
                    "regime": fm.regime.value,
                    "launch_t": fm.launch_t,
                    "window": fm.window,
                    "mode": fm.mode.value,
                }
            )
        pooled_entry = None
        if self.pooled is not None:
            pooled_entry = {
                "lstm": _lstm_to_entry(self.pooled.lstm, arrays),
                "linear": [
                    self.pooled.linear.beta0,
                    self.pooled.linear.beta1,
                    self.pooled.linear.beta2,
                ],
                "launch_t": self.pooled.launch_t,
                "training_tickers": list(self.pooled.training_tickers),
                "decision_sigma": self.pooled.decision_sigma,
            }
        manifest = json.dumps(
            {
                "version": _FORMAT_VERSION,
                "fingerprint": self.fingerprint,
                "entries": entries,
                "pooled": pooled_entry,
            },
            sort_keys=True,
        )
        payload = {f"a{k}": arr for k, arr in enumerate(arrays)}
        np.savez(path, manifest=np.array(manifest), **payload)

    @classmethod
    def load(cls, path) -> "ModelStore":
        try:
            archive = np.load(path, allow_pickle=False)
        except OSError as exc:
            raise DataError(f"cannot read model store {path}: {exc}")
        manifest = json.loads(str(archive["manifest"]))
        if manifest.get("version") != _FORMAT_VERSION:
            raise DataError(f"unsupported model store version {manifest.get('version')!r}")
        fold_models: dict[tuple[str, int], FoldModels] = {}
        for entry in manifest["entries"]:
            fold_models[(entry["ticker"], entry["fold"])] = FoldModels(
                lstm=_lstm_from_entry(entry["lstm"], archive),
                linear=LinearParams(*entry["linear"]),
                scaler=Scaler(*entry["scaler"]),
                sigma=entry["sigma"],
                regime=RegimeLabel(entry["regime"]),
                launch_t=entry["launch_t"],
                window=entry["window"],
                mode=WindowMode(entry["mode"]),
            )
        pooled = None
        if manifest["pooled"] is not None:
            pe = manifest["pooled"]
            pooled = PooledExperts(
                lstm=_lstm_from_entry(pe["lstm"], archive),
                linear=LinearParams(*pe["linear"]),
                launch_t=pe["launch_t"],
                training_tickers=tuple(pe["training_tickers"]),
                decision_sigma=pe["decision_sigma"],
            )
        return cls(manifest["fingerprint"], fold_models, pooled)

    def folds_for(self, ticker: str) -> list[int]:
        return sorted(fold for (t, fold) in self.fold_models if t == ticker)
