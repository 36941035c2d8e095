#!/usr/bin/env python3
"""Both experts on one firm, then the gated blend.

Builds standardized 10-day windows over a volatile firm, trains the LSTM
expert with early stopping, fits the closed-form linear expert on time and
trailing volatility, and compares single-step predictions from each expert
and their regime-weighted mixture on a held-out tail.
"""

from moecast import (
    RegimePolicy,
    SyntheticSpec,
    TrainConfig,
    WindowMode,
    fit_ols,
    generate_synthetic,
    make_windows,
    predict_moe,
    rolling_volatility,
    simple_returns,
    train_early_stopping,
)
from moecast.evaluation import mae, mse
from moecast.regime import RegimeLabel


def main():
    series = generate_synthetic(SyntheticSpec(n_stable=0, n_volatile=1, length=200), seed=42)["VOL01"]
    w, train_end = 10, 160
    dataset = make_windows(series, w, WindowMode.PRICE_LEVELS, train_end=train_end)
    print(f"{series.ticker}: {len(dataset)} windows, scaler mean {dataset.scaler.mean:.2f} "
          f"std {dataset.scaler.std:.2f}")

    # LSTM expert: last fifth of the training samples drives early stopping
    train = dataset.restrict(w, train_end)
    split = len(train) - len(train) // 5
    cfg = TrainConfig(max_epochs=25, patience=5, seed=1)
    lstm, history = train_early_stopping(
        train.inputs[:split], train.targets[:split],
        train.inputs[split:], train.targets[split:],
        cfg, hidden=20,
    )
    print(f"LSTM trained for {len(history)} epochs, "
          f"best validation MAE {history[-1].best_val_mae:.4f}")

    # linear expert: standardized price on time index and trailing volatility
    policy = RegimePolicy.threshold()
    vol = rolling_volatility(simple_returns(series), policy.vol_window)
    rows = range(policy.vol_window, train_end)
    sigma_at = lambda t: vol.at_return_index(t - 1)
    report = fit_ols(
        [float(t) for t in rows],
        [sigma_at(t) for t in rows],
        [float(dataset.targets[t - w]) for t in rows],
    )
    linear = report.params
    print(f"linear expert: beta0 {linear.beta0:+.4f}, beta1 {linear.beta1:+.5f}, "
          f"beta2 {linear.beta2:+.3f} (rss {report.rss:.3f})")

    # out-of-sample tail: volatility frozen at the last training read
    sigma_frozen = sigma_at(train_end - 1)
    regime = RegimeLabel.VOLATILE if sigma_frozen > policy.tau else RegimeLabel.STABLE
    print(f"frozen sigma {sigma_frozen:.5f} -> regime {regime.value}\n")
    rows = {"LSTM": [], "Linear": [], "MoE": []}
    actual = []
    for t in range(train_end, len(series)):
        window = dataset.inputs[t - w]
        blended = predict_moe(lstm, linear, window, float(t), sigma_frozen, regime)
        rows["LSTM"].append(blended.rnn_component)
        rows["Linear"].append(blended.lm_component)
        rows["MoE"].append(blended.combined)
        actual.append(float(dataset.targets[t - w]))
    print(f"{'model':<8}{'MSE':>10}{'MAE':>10}   (standardized, one-step, "
          f"{len(actual)} points)")
    for name, preds in rows.items():
        print(f"{name:<8}{mse(preds, actual):>10.4f}{mae(preds, actual):>10.4f}")
    assert min(rows['LSTM'][0], rows['Linear'][0]) <= rows['MoE'][0] <= max(
        rows['LSTM'][0], rows['Linear'][0]
    ), "the blend always lies between its experts"


if __name__ == "__main__":
    main()
