import dataclasses
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstoa import ExperimentConfig, mse, run_sweep, run_trial
from cstoa.errors import ConfigurationError, ParameterError, SweepError
from cstoa.harness import CSV_HEADER, draw_toa, prepare, run_trials, substream

TS = 0.125e-9


def single_tap(cfg):
    return dataclasses.replace(cfg, channel=dataclasses.replace(cfg.channel, max_clusters=1, max_rays=1))


@pytest.fixture(scope="module")
def small():
    return ExperimentConfig(n_trials=12, master_seed=3)


class TestMse:
    def test_identical(self):
        assert mse([1e-9, 2e-9, 3e-9], [1e-9, 2e-9, 3e-9]) == 0.0

    def test_hand_value(self):
        assert mse([0.0, 0.0], [1e-9, -1e-9]) == pytest.approx(1e-18, rel=1e-15)

    @given(st.lists(st.tuples(st.floats(-1e-7, 1e-7), st.floats(-1e-7, 1e-7)), min_size=100, max_size=100))
    @settings(max_examples=30, deadline=None)
    def test_against_exact_accumulation(self, pairs):
        t, e = zip(*pairs)
        oracle = math.fsum((a - b) ** 2 for a, b in pairs) / len(pairs)
        assert mse(t, e) == pytest.approx(oracle, rel=1e-15, abs=1e-300)

    def test_errors(self):
        with pytest.raises(ParameterError):
            mse([], [])
        with pytest.raises(ParameterError):
            mse([1.0], [1.0, 2.0])


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.frame.N, cfg.M, cfg.K, cfg.snr_db) == (1600, 400, 5, 24.0)
        assert cfg.channel.cluster_rate == 0.047

    def test_file_and_overrides(self, tmp_path):
        f = tmp_path / "exp.cfg"
        f.write_text("snr_db = 10\nundersampling = 8\nK = 3  # paths\nGamma = 30\nestimators = ml, alg2\n")
        cfg = ExperimentConfig.from_file(f, {"seed": "9"})
        assert (cfg.snr_db, cfg.undersampling, cfg.K, cfg.master_seed) == (10.0, 8, 3, 9)
        assert cfg.channel.cluster_decay == 30.0
        assert cfg.estimators == ("ml", "alg2")

    def test_undersampling_must_divide_n(self):
        with pytest.raises(ConfigurationError, match="divide"):
            ExperimentConfig(undersampling=7)

    def test_toa_range_must_fit_frame(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(toa_hi=120e-9)

    @pytest.mark.parametrize("kw", [{"estimators": ("ml", "omp")}, {"n_trials": 0}, {"toa_lo": 2e-9, "toa_hi": 1e-9}])
    def test_bad_values(self, kw):
        with pytest.raises(ParameterError):
            ExperimentConfig(**kw)

    def test_axis_copy(self, small):
        assert small.at("k", 7).K == 7
        assert small.at("u", 8).M == 200
        assert small.at("delta", 4).delta == pytest.approx(4 * TS)
        with pytest.raises(ParameterError):
            small.at("pulse", 1)


def test_substreams_are_independent_and_keyed():
    a = substream(1, "noise", 5).standard_normal(4)
    assert np.array_equal(a, substream(1, "noise", 5).standard_normal(4))
    assert not np.array_equal(a, substream(1, "noise", 6).standard_normal(4))
    assert not np.array_equal(a, substream(1, "channel", 5).standard_normal(4))
    assert not np.array_equal(a, substream(2, "noise", 5).standard_normal(4))


def test_end_to_end_identity():
    cfg = single_tap(ExperimentConfig(snr_db=math.inf, toa_hi=49e-9, n_trials=30, master_seed=8))
    setup = prepare(cfg)
    for i in range(cfg.n_trials):
        res = run_trial(cfg, i, setup)
        assert res.true_toa == pytest.approx(round(res.true_toa / TS) * TS, abs=1e-21)
        for name, est in res.estimates.items():
            assert est == pytest.approx(res.true_toa, abs=1e-21), (i, name)


def test_trial_determinism(small):
    setup = prepare(small)
    assert run_trial(small, 4, setup) == run_trial(small, 4, setup)
    assert run_trial(small, 4, setup) == run_trial(small, 4)


def test_parallel_matches_sequential(small):
    setup = prepare(small)
    assert run_trials(small, setup, jobs=2) == run_trials(small, setup, jobs=1)


def test_single_point_sweep_matches_trials(small):
    table = run_sweep(small)
    results = run_trials(small)
    truths = [r.true_toa for r in results]
    for name in small.estimators:
        row = table.row(small.snr_db, name)
        assert row.mse == mse(truths, [r.estimates[name] for r in results])
        assert row.n_trials == small.n_trials


def test_common_random_numbers_across_snr(small):
    table = run_sweep(small, "snr", [10, 30])
    lo, hi = run_trials(small.at("snr", 10)), run_trials(small.at("snr", 30))
    assert [r.true_toa for r in lo] == [r.true_toa for r in hi]
    assert [row.axis_value for row in table.rows] == [10.0] * 3 + [30.0] * 3


def test_zero_estimator_mse_matches_uniform_second_moment():
    cfg = ExperimentConfig(n_trials=10_000)
    toas = [draw_toa(cfg, i) for i in range(cfg.n_trials)]
    assert mse(toas, np.zeros(len(toas))) == pytest.approx((50e-9) ** 2 / 3, rel=0.05)


def test_sweep_failure_names_grid_point(small):
    with pytest.raises(SweepError, match="u=7"):
        run_sweep(small, "u", [4, 7])


def test_u_sweep_rebuilds_phi(small):
    table = run_sweep(dataclasses.replace(small, n_trials=4, estimators=("alg1",)), "u", [2, 8])
    assert [p["M"] for p in table.metadata["points"]] == [800, 200]


def test_delta_sweep_rebuilds_dictionary(small):
    table = run_sweep(dataclasses.replace(small, n_trials=4, estimators=("alg1",)), "delta", [1, 4])
    assert [p["Z"] for p in table.metadata["points"]] == [1600, 400]


def test_csv_layout(small, tmp_path):
    table = run_sweep(dataclasses.replace(small, n_trials=3), "k", [2, 1])
    text = table.to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 2 * 3
    assert lines[1].startswith("k,1,24.0,ml,")
    assert all(line.endswith(",3,") for line in lines[1:])
    buf = io.StringIO()
    table.to_csv(buf, record_runtime=True)
    assert not buf.getvalue().splitlines()[1].endswith(",")
    out = tmp_path / "t.csv"
    table.write(out)
    assert out.read_text() == text
    assert (tmp_path / "t.csv.meta.json").exists()


def test_mse_nonnegative_and_rmse_consistent(small):
    for row in run_sweep(small).rows:
        assert row.mse >= 0
        assert row.rmse_ns == pytest.approx(math.sqrt(row.mse) * 1e9)
        assert row.mse_se >= 0
