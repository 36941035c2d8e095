"""Metrics, fold geometry, recursion, the walk-forward engine, and holdouts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moecast.errors import EvaluationError
from moecast.evaluation import (
    BacktestSettings,
    HoldoutSpec,
    HorizonSpec,
    MetricRecord,
    TrainMode,
    aggregate_stratified,
    fit_pooled_experts,
    improvement_pct,
    linear_one_step,
    mae,
    mase,
    mse,
    plan_walk_forward,
    recursive_forecast,
    rmse,
    run_holdout,
    run_walk_forward,
)
from moecast.lstm_expert import PARAM_FIELDS, TrainConfig
from moecast.market_data import (
    PricePoint,
    PriceSeries,
    SyntheticSpec,
    WindowMode,
    generate_synthetic,
)
from moecast.regime import RegimeLabel, RegimePolicy

FAST_TRAIN = TrainConfig(batch_size=8, max_epochs=3, patience=3, seed=0)


def fast_settings(**overrides):
    defaults = dict(
        window=5,
        train=FAST_TRAIN,
        hidden=4,
        horizons=HorizonSpec(()),
        seed=7,
    )
    defaults.update(overrides)
    return BacktestSettings(**defaults)


def small_policy():
    return RegimePolicy.threshold(vol_window=10, tau=0.025)


@pytest.fixture(scope="module")
def tiny_universe():
    return generate_synthetic(SyntheticSpec(n_stable=2, n_volatile=2, length=60), seed=3)


class TestMetrics:
    def test_perfect_predictions(self):
        assert mse([1, 2], [1, 2]) == 0.0
        assert mae([1, 2], [1, 2]) == 0.0
        assert rmse([1, 2], [1, 2]) == 0.0

    def test_frozen_arithmetic(self):
        # errors 3 and 4: mse (9+16)/2, rmse sqrt(12.5), mae 3.5
        preds, targets = [3.0, 4.0], [0.0, 0.0]
        assert mse(preds, targets) == 12.5
        assert rmse(preds, targets) == pytest.approx(3.5355339059327378, rel=1e-15)
        assert mae(preds, targets) == 3.5

    @given(
        st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=50),
        st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=50),
    )
    def test_identities_on_random_vectors(self, a, b):
        n = min(len(a), len(b))
        p, t = a[:n], b[:n]
        assert mae(p, t) <= rmse(p, t) + 1e-12
        assert rmse(p, t) ** 2 == pytest.approx(mse(p, t), rel=1e-10, abs=1e-30)

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError):
            mse([1.0], [1.0, 2.0])

    def test_mase_perfect_is_zero(self):
        assert mase([1.0, 2.0], [1.0, 2.0], [0.0, 1.0, 3.0]) == 0.0

    def test_mase_naive_forecast_is_about_one(self):
        # a one-step naive forecast on a series with the same step scale as
        # the training targets scores close to 1 by construction
        rng = np.random.default_rng(0)
        train = np.cumsum(rng.normal(0, 1.0, size=2000))
        future = np.cumsum(rng.normal(0, 1.0, size=2000)) + train[-1]
        naive_preds = np.concatenate([[train[-1]], future[:-1]])
        value = mase(naive_preds, future, train)
        assert 0.8 < value < 1.2

    def test_mase_constant_training_targets_rejected(self):
        with pytest.raises(EvaluationError):
            mase([1.0], [2.0], [5.0, 5.0, 5.0])


class TestImprovementPct:
    def test_published_volatile_gains(self):
        assert improvement_pct(0.001105, 0.001649) == pytest.approx(32.99, abs=0.01)
        assert improvement_pct(0.026333, 0.03236) == pytest.approx(18.62, abs=0.01)

    def test_equal_is_zero(self):
        assert improvement_pct(0.5, 0.5) == 0.0

    def test_nonpositive_baseline(self):
        with pytest.raises(EvaluationError):
            improvement_pct(1.0, 0.0)


class TestPlanWalkForward:
    def test_single_fold_geometry(self):
        plan = plan_walk_forward(100, 80, 20, 20)
        assert len(plan.folds) == 1
        fold = plan.folds[0]
        assert fold.train_range == range(0, 80)
        assert fold.val_range == range(80, 100)

    def test_six_folds_at_n_200(self):
        plan = plan_walk_forward(200, 80, 20, 20)
        assert [f.val_range.start for f in plan.folds] == [80, 100, 120, 140, 160, 180]

    def test_too_short(self):
        with pytest.raises(EvaluationError):
            plan_walk_forward(99, 80, 20, 20)

    def test_sliding_vs_expanding_train_ranges(self):
        sliding = plan_walk_forward(140, 80, 20, 20, TrainMode.SLIDING)
        expanding = plan_walk_forward(140, 80, 20, 20, TrainMode.EXPANDING)
        assert sliding.folds[2].train_range == range(40, 120)
        assert expanding.folds[2].train_range == range(0, 120)

    @given(
        st.integers(min_value=30, max_value=400),
        st.integers(min_value=5, max_value=60),
        st.integers(min_value=2, max_value=30),
        st.integers(min_value=1, max_value=30),
    )
    def test_fold_count_matches_enumeration_oracle(self, n, init_train, val_len, step):
        # oracle: directly enumerate every k whose validation window fits
        expected = [
            k for k in range(n)
            if init_train + k * step + val_len <= n
        ]
        if not expected:
            with pytest.raises(EvaluationError):
                plan_walk_forward(n, init_train, val_len, step)
            return
        plan = plan_walk_forward(n, init_train, val_len, step)
        assert len(plan.folds) == len(expected)
        for fold, k in zip(plan.folds, expected):
            assert fold.val_range.start == init_train + k * step
            assert len(fold.val_range) == val_len
            assert fold.train_range.stop == fold.val_range.start


class TestRecursiveForecast:
    def test_h1_equals_single_step(self):
        fn = linear_one_step_stub(slope=2.0)
        window = np.array([1.0, 2.0, 3.0])
        out = recursive_forecast(fn, window, t_start=10.0, sigma=0.0, h=1)
        assert out.shape == (1,)
        assert out[0] == fn(window, 10.0, 0.0)

    @pytest.mark.parametrize("h", [5, 20, 60])
    def test_naive_stub_constant_forecasts(self, h):
        naive = lambda window, t, sigma: float(window[-1])
        out = recursive_forecast(naive, np.array([1.0, 4.0, 9.0]), 0.0, 0.0, h)
        assert np.all(out == 9.0)

    def test_window_replay_oracle(self):
        observed = np.array([0.5, 1.0, 1.5, 2.0])
        seen = []

        def spy(window, t, sigma):
            seen.append(window.copy())
            return float(window.mean()) + 0.1

        preds = recursive_forecast(spy, observed, 0.0, 0.0, h=6)
        stream = list(observed)
        for j in range(6):
            expected_window = np.asarray(stream[-4:])
            np.testing.assert_array_equal(seen[j], expected_window)
            stream.append(preds[j])

    def test_time_index_advances_and_sigma_frozen(self):
        calls = []

        def spy(window, t, sigma):
            calls.append((t, sigma))
            return 0.0

        recursive_forecast(spy, np.zeros(3), t_start=100.0, sigma=0.033, h=4)
        assert [c[0] for c in calls] == [100.0, 101.0, 102.0, 103.0]
        assert all(c[1] == 0.033 for c in calls)

    def test_h_below_one_rejected(self):
        with pytest.raises(EvaluationError):
            recursive_forecast(lambda w, t, s: 0.0, np.zeros(3), 0.0, 0.0, 0)


def linear_one_step_stub(slope):
    from moecast.linear_expert import LinearParams
    return linear_one_step(LinearParams(0.0, slope, 0.0))


class TestRunWalkForward:
    def test_one_firm_one_fold_three_records(self, tiny_universe):
        ticker = sorted(tiny_universe)[0]
        universe = {ticker: tiny_universe[ticker]}
        plan = plan_walk_forward(50, 40, 10, 10)
        result = run_walk_forward(universe, plan, small_policy(), fast_settings())
        assert len(result.records) == 3
        assert {r.model for r in result.records} == {"Linear", "LSTM", "MoE"}
        assert all(r.horizon == 1 for r in result.records)
        assert len(result.predictions) == 3 * 10

    def test_rerun_is_bit_identical(self, tiny_universe):
        plan = plan_walk_forward(60, 40, 10, 10)
        a = run_walk_forward(tiny_universe, plan, small_policy(), fast_settings())
        b = run_walk_forward(tiny_universe, plan, small_policy(), fast_settings())
        assert a.records == b.records
        assert a.predictions == b.predictions
        for key in a.models:
            for name in PARAM_FIELDS:
                assert np.array_equal(
                    getattr(a.models[key].lstm, name), getattr(b.models[key].lstm, name)
                )
            assert a.models[key].linear == b.models[key].linear

    def test_perturbing_validation_leaves_parameters_identical(self, tiny_universe):
        plan = plan_walk_forward(50, 40, 10, 10)
        perturbed = {}
        for ticker, series in tiny_universe.items():
            points = list(series.points)
            for k in range(40, 50):
                p = points[k]
                points[k] = PricePoint(p.date, p.adj_close * 1.25 + 1.0)
            perturbed[ticker] = PriceSeries(ticker, tuple(points[:50]))
        baseline = {t: PriceSeries(t, s.points[:50]) for t, s in tiny_universe.items()}
        a = run_walk_forward(baseline, plan, small_policy(), fast_settings())
        b = run_walk_forward(perturbed, plan, small_policy(), fast_settings())
        for key in a.models:
            for name in PARAM_FIELDS:
                assert np.array_equal(
                    getattr(a.models[key].lstm, name), getattr(b.models[key].lstm, name)
                ), (key, name)
            assert a.models[key].linear == b.models[key].linear
            assert a.models[key].sigma == b.models[key].sigma
            assert a.models[key].regime == b.models[key].regime

    def test_horizon_records_and_truncation(self, tiny_universe):
        plan = plan_walk_forward(50, 40, 10, 10)
        settings = fast_settings(horizons=HorizonSpec((3, 25)))
        result = run_walk_forward(tiny_universe, plan, small_policy(), settings)
        # 4 firms x 1 fold x 3 models x (h1 + h3 + h25-truncated)
        assert len(result.records) == 4 * 3 * 3
        h25 = [r for r in result.records if r.horizon == 25]
        h3 = [r for r in result.records if r.horizon == 3]
        assert len(h25) == 12 and len(h3) == 12

    def test_moe_convexity_bound_per_fold(self, tiny_universe):
        plan = plan_walk_forward(60, 40, 10, 10)
        result = run_walk_forward(tiny_universe, plan, small_policy(), fast_settings())
        by_key = {}
        for r in result.records:
            by_key.setdefault((r.ticker, r.fold_id), {})[r.model] = r
        for (ticker, fold), group in by_key.items():
            w_rnn = 0.7 if group["MoE"].regime is RegimeLabel.VOLATILE else 0.3
            bound = w_rnn * group["LSTM"].mse + (1 - w_rnn) * group["Linear"].mse
            assert group["MoE"].mse <= bound + 1e-12

    def test_median_policy_splits_cross_section(self, tiny_universe):
        plan = plan_walk_forward(60, 40, 10, 10)
        policy = RegimePolicy.median(vol_window=10)
        result = run_walk_forward(tiny_universe, plan, policy, fast_settings())
        for assignment in result.assignments:
            labels = list(assignment.labels.values())
            assert labels.count(RegimeLabel.VOLATILE) == 2
            volatile = {t for t, l in assignment.labels.items() if l is RegimeLabel.VOLATILE}
            assert volatile == {t for t in assignment.labels if t.startswith("VOL")}

    def test_plan_exceeding_series_rejected(self, tiny_universe):
        plan = plan_walk_forward(100, 80, 20, 20)
        with pytest.raises(EvaluationError):
            run_walk_forward(tiny_universe, plan, small_policy(), fast_settings())

    def test_log_return_mode_pipeline(self, tiny_universe):
        # 60 prices give 59 log-return observations
        plan = plan_walk_forward(59, 40, 10, 10)
        settings = fast_settings(
            mode=WindowMode.LOG_RETURNS, horizons=HorizonSpec((4,))
        )
        policy = RegimePolicy.median(vol_window=10)
        result = run_walk_forward(tiny_universe, plan, policy, settings)
        assert len(result.records) == 4 * 1 * 3 * 2  # firms x folds x models x horizons
        again = run_walk_forward(tiny_universe, plan, policy, settings)
        assert result.records == again.records
        # the convexity bound holds in this mode too
        by_key = {}
        for r in result.records:
            if r.horizon == 1:
                by_key.setdefault((r.ticker, r.fold_id), {})[r.model] = r
        for group in by_key.values():
            w_rnn = 0.7 if group["MoE"].regime is RegimeLabel.VOLATILE else 0.3
            bound = w_rnn * group["LSTM"].mse + (1 - w_rnn) * group["Linear"].mse
            assert group["MoE"].mse <= bound + 1e-12


@pytest.fixture(scope="module")
def pooled_setup():
    universe = generate_synthetic(
        SyntheticSpec(n_stable=3, n_volatile=3, length=60), seed=11
    )
    holdout = HoldoutSpec(volatile_holdout=("VOL03",), stable_holdout=("STB03",))
    train = {t: s for t, s in universe.items() if t not in holdout.tickers}
    settings = fast_settings(horizons=HorizonSpec((2, 3)))
    policy = small_policy()
    experts = fit_pooled_experts(train, policy, settings, launch_t=50)
    return universe, holdout, experts, policy, settings


class TestHoldout:
    def test_record_counting(self, pooled_setup):
        universe, holdout, experts, policy, settings = pooled_setup
        records = run_holdout(universe, holdout, experts, policy, settings)
        # 2 firms x 3 models x 2 horizons
        assert len(records) == 12
        assert all(r.split == "holdout" for r in records)

    def test_empty_holdout_empty_records(self, pooled_setup):
        universe, _, experts, policy, settings = pooled_setup
        records = run_holdout(universe, HoldoutSpec((), ()), experts, policy, settings)
        assert records == ()

    def test_holdout_never_mutates_parameters(self, pooled_setup):
        universe, holdout, experts, policy, settings = pooled_setup
        before = {name: getattr(experts.lstm, name).copy() for name in PARAM_FIELDS}
        run_holdout(universe, holdout, experts, policy, settings)
        for name in PARAM_FIELDS:
            assert np.array_equal(before[name], getattr(experts.lstm, name))

    def test_overlap_rejected(self, pooled_setup):
        universe, _, experts, policy, settings = pooled_setup
        overlap = HoldoutSpec(volatile_holdout=("VOL01",), stable_holdout=())
        with pytest.raises(EvaluationError):
            run_holdout(universe, overlap, experts, policy, settings)

    def test_ten_plus_ten_firms_three_horizons_yield_180_records(self):
        universe = generate_synthetic(
            SyntheticSpec(n_stable=12, n_volatile=12, length=60), seed=2
        )
        volatile = tuple(f"VOL{k:02d}" for k in range(3, 13))
        stable = tuple(f"STB{k:02d}" for k in range(3, 13))
        holdout = HoldoutSpec(volatile_holdout=volatile, stable_holdout=stable)
        train = {t: s for t, s in universe.items() if t not in holdout.tickers}
        settings = fast_settings(horizons=HorizonSpec((2, 3, 5)))
        experts = fit_pooled_experts(train, small_policy(), settings, launch_t=50)
        records = run_holdout(universe, holdout, experts, small_policy(), settings)
        assert len(records) == 20 * 3 * 3


class TestAggregateStratified:
    def record(self, value, regime=RegimeLabel.STABLE, model="Linear", horizon=1, ticker="A"):
        return MetricRecord(
            ticker=ticker, fold_id=0, split="walk_forward", regime=regime,
            horizon=horizon, model=model, mse=value, mae=value / 2, rmse=value**0.5,
            raw_mse=value * 4, raw_mae=value, raw_rmse=2 * value**0.5, mase=None,
        )

    def test_single_record_cell(self):
        report = aggregate_stratified([self.record(0.002)])
        stats = report.get(RegimeLabel.STABLE, "Linear", 1)["mse"]
        assert stats.mean == 0.002 and stats.std == 0.0 and stats.count == 1

    def test_two_record_sample_stats(self):
        report = aggregate_stratified([self.record(0.001), self.record(0.003, ticker="B")])
        stats = report.get(RegimeLabel.STABLE, "Linear", 1)["mse"]
        assert stats.mean == pytest.approx(0.002, rel=1e-12)
        assert stats.std == pytest.approx(0.0014142135623730952, rel=1e-12)

    def test_pooled_mean_identity(self):
        rng = np.random.default_rng(1)
        records = []
        for k in range(30):
            records.append(
                self.record(
                    float(rng.uniform(0.001, 0.01)),
                    regime=RegimeLabel.VOLATILE if k % 2 else RegimeLabel.STABLE,
                    model=["Linear", "LSTM", "MoE"][k % 3],
                    ticker=f"T{k}",
                )
            )
        report = aggregate_stratified(records)
        weighted = 0.0
        total = 0
        for cell in report.cells.values():
            weighted += cell["mse"].mean * cell["mse"].count
            total += cell["mse"].count
        global_mean = float(np.mean([r.mse for r in records]))
        assert weighted / total == pytest.approx(global_mean, rel=1e-12)

    def test_cells_never_mix_regimes_or_models(self):
        records = [
            self.record(0.001, regime=RegimeLabel.STABLE, model="Linear"),
            self.record(0.009, regime=RegimeLabel.VOLATILE, model="LSTM", ticker="B"),
        ]
        report = aggregate_stratified(records)
        assert set(report.cells) == {
            (RegimeLabel.STABLE, "Linear", 1),
            (RegimeLabel.VOLATILE, "LSTM", 1),
        }

    def test_empty_input_empty_report(self):
        assert aggregate_stratified([]).cells == {}
