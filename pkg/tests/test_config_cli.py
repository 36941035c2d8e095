"""Configuration parsing, model persistence, report rendering, and the CLI."""

import numpy as np
import pytest

from moecast.cli import main
from moecast.config import parse_config, parse_config_text
from moecast.errors import ConfigError
from moecast.evaluation import HorizonSpec, plan_walk_forward, run_walk_forward
from moecast.lstm_expert import predict_lstm
from moecast.market_data import SyntheticSpec, generate_synthetic
from moecast.model_store import ModelStore
from moecast.regime import PolicyKind, RegimeLabel
from moecast.reporting import records_from_csv, records_to_csv, render_tables_text
from test_evaluation import fast_settings, small_policy


class TestParseConfig:
    def test_empty_text_gives_published_defaults(self):
        config = parse_config_text("")
        assert config["window.length"] == 10
        assert config["train.learning_rate"] == 0.001
        assert config["train.batch_size"] == 16
        assert config["train.max_epochs"] == 50
        assert config["train.patience"] == 5
        assert config["train.hidden_units"] == 50
        assert config["gate.volatile.w_rnn"] == 0.7
        assert config["gate.stable.w_rnn"] == 0.3
        assert config["horizons"] == (5, 20, 60)
        assert config["wf.init_train"] == 80
        assert config["wf.val_len"] == 20
        assert config["wf.step"] == 20
        assert config["vol.tau"] == 0.025
        assert config["holdout.k"] == 10

    def test_gate_weight_domain_violation(self):
        with pytest.raises(ConfigError, match="gate.volatile.w_rnn"):
            parse_config_text("gate.volatile.w_rnn = 1.5")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("wf.bogus = 3")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed = 1\nseed = 2")

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("seed = 1\nnot a config line")

    def test_comments_and_blanks_ignored(self):
        config = parse_config_text("# comment\n\nseed = 5\n")
        assert config["seed"] == 5

    def test_parse_serialize_parse_fixed_point(self):
        config = parse_config_text(
            "seed = 9\ntrain.learning_rate = 0.002\nhorizons = 3, 7\nvol.policy = median\n"
        )
        once = config.serialize()
        reparsed = parse_config_text(once)
        assert reparsed.values == config.values
        assert reparsed.serialize() == once
        assert reparsed.fingerprint == config.fingerprint

    def test_contextual_policy_defaults(self):
        config = parse_config_text("")
        classify = config.policy_for_classify()
        backtest = config.policy_for_backtest()
        assert classify.kind is PolicyKind.THRESHOLD
        assert classify.vol_window == 30 and classify.tau == 0.025
        assert backtest.kind is PolicyKind.CROSS_SECTIONAL_MEDIAN
        assert backtest.vol_window == 21

    def test_explicit_policy_pins_both_contexts(self):
        config = parse_config_text("vol.policy = threshold\nvol.window = 15\n")
        assert config.policy_for_backtest().kind is PolicyKind.THRESHOLD
        assert config.policy_for_backtest().vol_window == 15
        assert config.policy_for_classify().vol_window == 15

    def test_contextual_defaults_survive_round_trip(self):
        config = parse_config_text("seed = 3")
        round_tripped = parse_config_text(config.serialize())
        assert round_tripped.policy_for_backtest().kind is PolicyKind.CROSS_SECTIONAL_MEDIAN
        assert round_tripped.policy_for_classify().kind is PolicyKind.THRESHOLD

    def test_clip_norm_off_and_numeric(self):
        assert parse_config_text("")["train.clip_norm"] is None
        assert parse_config_text("train.clip_norm = off")["train.clip_norm"] is None
        assert parse_config_text("train.clip_norm = 5.0")["train.clip_norm"] == 5.0

    def test_seed_override_changes_fingerprint(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\n", encoding="utf-8")
        base = parse_config(path)
        overridden = parse_config(path, seed_override=7)
        assert overridden["seed"] == 7
        assert overridden.fingerprint != base.fingerprint

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config(tmp_path / "absent.cfg")

    def test_gate_table_resolution(self):
        config = parse_config_text("gate.volatile.w_rnn = 0.8\ngate.stable.w_rnn = 0.2\n")
        table = config.gate_table()
        assert table[RegimeLabel.VOLATILE] == 0.8
        assert table[RegimeLabel.STABLE] == 0.2


@pytest.fixture(scope="module")
def small_result():
    universe = generate_synthetic(SyntheticSpec(n_stable=2, n_volatile=2, length=60), seed=3)
    plan = plan_walk_forward(60, 40, 10, 10)
    settings = fast_settings(horizons=HorizonSpec((3,)))
    return universe, run_walk_forward(universe, plan, small_policy(), settings)


class TestModelStore:
    def test_round_trip_reproduces_predictions_bit_exactly(self, tmp_path, small_result):
        universe, result = small_result
        store = ModelStore("f" * 64, dict(result.models))
        path = tmp_path / "models.npz"
        store.save(path)
        loaded = ModelStore.load(path)
        assert loaded.fingerprint == "f" * 64
        assert set(loaded.fold_models) == set(result.models)
        rng = np.random.default_rng(0)
        for key, original in result.models.items():
            restored = loaded.fold_models[key]
            window = rng.normal(size=original.window)
            assert predict_lstm(restored.lstm, window) == predict_lstm(original.lstm, window)
            assert restored.linear == original.linear
            assert restored.scaler == original.scaler
            assert restored.sigma == original.sigma
            assert restored.regime == original.regime

    def test_save_is_byte_deterministic(self, tmp_path, small_result):
        _, result = small_result
        store = ModelStore("a" * 64, dict(result.models))
        p1, p2 = tmp_path / "m1.npz", tmp_path / "m2.npz"
        store.save(p1)
        store.save(p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestRecordsCsv:
    def test_round_trip(self, small_result):
        _, result = small_result
        text = records_to_csv(result.records, "b" * 64, 3)
        back = records_from_csv(text)
        assert sorted(back, key=lambda r: (r.ticker, r.fold_id, r.horizon, r.model)) == sorted(
            result.records, key=lambda r: (r.ticker, r.fold_id, r.horizon, r.model)
        )

    def test_fingerprint_stamp_present(self, small_result):
        _, result = small_result
        text = records_to_csv(result.records, "c" * 64, 11)
        first = text.splitlines()[0]
        assert first == f"# fingerprint={'c' * 64} seed=11"

    def test_tables_render_all_sections(self, small_result):
        _, result = small_result
        text = render_tables_text(list(result.records), "d" * 64, 5)
        assert "stable firms (standardized scale, horizon 1)" in text
        assert "volatile firms (standardized scale, horizon 1)" in text
        assert "raw scale" in text
        assert "Mixture of Experts" in text
        assert "horizon breakdown" in text


@pytest.fixture()
def cli_workspace(tmp_path):
    data = tmp_path / "prices.csv"
    reports = tmp_path / "reports"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "\n".join(
            [
                f"data.path = {data}",
                f"report.dir = {reports}",
                "synth.stable_firms = 2",
                "synth.volatile_firms = 2",
                "synth.length = 60",
                "wf.init_train = 40",
                "wf.val_len = 10",
                "wf.step = 10",
                "window.length = 5",
                "train.max_epochs = 2",
                "train.patience = 2",
                "train.batch_size = 8",
                "train.hidden_units = 4",
                "horizons = 3,5",
                "holdout.k = 1",
                "seed = 9",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    return cfg, data, reports


class TestCli:
    def test_synth_classify_backtest_report_flow(self, cli_workspace, capsys):
        cfg, data, reports = cli_workspace
        assert main(["--config", str(cfg), "synth"]) == 0
        assert data.exists()
        assert main(["--config", str(cfg), "classify"]) == 0
        table = capsys.readouterr().out
        assert "VOL01" in table and "regime" in table
        assert main(["--config", str(cfg), "backtest"]) == 0
        fp = parse_config(cfg).short_fingerprint
        for kind, suffix in (
            ("config", "cfg"), ("records", "csv"), ("predictions", "csv"), ("models", "npz"),
        ):
            assert (reports / f"{kind}_{fp}.{suffix}").exists()
        assert main(["--config", str(cfg), "report"]) == 0
        out = capsys.readouterr().out
        assert "Mixture of Experts" in out
        assert (reports / f"tables_{fp}.txt").exists()
        assert (reports / f"tables_{fp}.csv").exists()

    def test_forecast_h1_matches_stored_prediction(self, cli_workspace, capsys):
        cfg, data, reports = cli_workspace
        main(["--config", str(cfg), "synth"])
        main(["--config", str(cfg), "backtest"])
        capsys.readouterr()
        config = parse_config(cfg)
        store = ModelStore.load(reports / f"models_{config.short_fingerprint}.npz")
        ticker = sorted({t for t, _ in store.fold_models})[0]
        assert main(["--config", str(cfg), "forecast", "--ticker", ticker, "--horizon", "1"]) == 0
        out = capsys.readouterr().out
        line = [l for l in out.splitlines() if l.startswith("1,")][0]
        _, date, _, _, moe_text = line.split(",")
        predictions = (reports / f"predictions_{config.short_fingerprint}.csv").read_text()
        match = [
            row for row in predictions.splitlines()
            if row.startswith(f"{ticker},{date},MoE,")
        ]
        assert len(match) == 1
        stored_predicted = match[0].rsplit(",", 1)[1]
        assert stored_predicted == moe_text

    def test_forecast_without_store_fails(self, cli_workspace, capsys):
        cfg, _, _ = cli_workspace
        code = main(["--config", str(cfg), "forecast", "--ticker", "STB01", "--horizon", "3"])
        assert code == 1
        assert "model store" in capsys.readouterr().err

    def test_backtest_without_data_path_fails(self, tmp_path, capsys):
        cfg = tmp_path / "bare.cfg"
        cfg.write_text("", encoding="utf-8")
        assert main(["--config", str(cfg), "backtest"]) == 1
        assert "data.path" in capsys.readouterr().err

    def test_bad_config_value_fails(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("gate.volatile.w_rnn = 1.5\n", encoding="utf-8")
        assert main(["--config", str(cfg), "classify"]) == 1
        assert "gate.volatile.w_rnn" in capsys.readouterr().err

    def test_seed_flag_overrides_config(self, cli_workspace, capsys):
        cfg, data, reports = cli_workspace
        main(["--config", str(cfg), "synth"])
        capsys.readouterr()
        assert main(["--config", str(cfg), "--seed", "123", "backtest"]) == 0
        out = capsys.readouterr().out
        config = parse_config(cfg, seed_override=123)
        assert config.short_fingerprint in out
