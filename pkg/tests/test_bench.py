import statistics
import time

import pandas as pd
import pytest

from app.bench import experiment_1, experiment_3, experiment_4, run_experiment
from config.loader import BenchConfig, CostParams
from core.engine import PortfolioConfig, run_portfolio
from core.schedule import ScheduleMode
from core.search import solve_sorting
from strategy.heuristics import HeuristicKind

SMALL = BenchConfig(portfolio_samples=[22, 28], runs_per_sample=3, experiment4_sample=22, experiment4_runs=4)


def test_portfolio_experiment_writes_tables(tmp_path):
    tables = run_experiment(2, str(tmp_path), CostParams(), SMALL, master_seed=1, max_parallel=2)
    frame = tables["experiment2"]
    assert frame.set_index("sample")["cost"].to_dict() == {22: 6.0, 28: 8.0}
    assert (tmp_path / "experiment2.csv").exists()
    assert (tmp_path / "experiment2.json").exists()
    assert pd.read_csv(tmp_path / "experiment2.csv")["sample"].tolist() == [22, 28]


def test_two_goal_experiment_never_costs_more(samples):
    frame = experiment_3(samples, CostParams(), SMALL, master_seed=0, max_parallel=3)["experiment3"]
    assert (frame["cost"] <= frame["goal1_cost"] + 1e-9).all()


def test_histogram_experiment(samples):
    tables = experiment_4(samples, CostParams(), SMALL, master_seed=0, max_parallel=2)
    hist = tables["experiment4_histogram"]
    assert set(hist["mode"]) == {"conservative", "aggressive"}
    assert hist.groupby("mode")["count"].sum().tolist() == [4, 4]
    curve = tables["experiment4_probability"]
    for _, part in curve.groupby("mode"):
        assert part["p_best"].is_monotonic_increasing
        assert part["p_best"].iloc[-1] == 1.0
    assert tables["experiment4_summary"]["cost"].iloc[0] == 6.0


def test_same_seed_same_tables(samples):
    a = experiment_4(samples, CostParams(), SMALL, master_seed=9)["experiment4_histogram"]
    b = experiment_4(samples, CostParams(), SMALL, master_seed=9)["experiment4_histogram"]
    pd.testing.assert_frame_equal(a, b)


def test_unknown_experiment_number(tmp_path):
    with pytest.raises(ValueError):
        run_experiment(5, str(tmp_path), CostParams(), SMALL)


@pytest.mark.slow
def test_deterministic_sweep_over_all_samples(samples):
    frame = experiment_1(samples, CostParams())["experiment1"].set_index("sample")
    assert len(frame) == 30
    assert frame.loc[22, "cost"] == 6.0
    assert frame.loc[30, "cost"] == 16.0


@pytest.mark.slow
def test_hundred_seeds_on_sample_27(samples):
    cfg = PortfolioConfig(samples.goal(27), CostParams(), workers=100, master_seed=0)
    result = run_portfolio(samples.initials[27], cfg)
    assert all(r.cost == pytest.approx(17.0, abs=1e-9) for r in result.runs)
    assert result.best_by_mode[ScheduleMode.AGGRESSIVE][1].makespan <= 5
    assert result.best_by_mode[ScheduleMode.CONSERVATIVE][1].makespan <= 8
    for mode in ("conservative", "aggressive"):
        curve = result.summary()["stats"]["modes"][mode]["p_best"]
        assert all(b >= a for a, b in zip(curve, curve[1:]))


@pytest.mark.slow
@pytest.mark.parametrize("sample", [27, 30])
def test_stochastic_runs_are_not_slower(samples, sample):
    params = CostParams()
    t0 = time.monotonic()
    det, det_stats = solve_sorting(samples.initials[sample], samples.goal(sample), params)
    det_time = time.monotonic() - t0
    times, explored = [], []
    for seed in range(10):
        t0 = time.monotonic()
        path, stats = solve_sorting(samples.initials[sample], samples.goal(sample), params,
                                    HeuristicKind(stochastic=True), run_seed=seed)
        times.append(time.monotonic() - t0)
        explored.append(stats.explored)
        assert path.total_cost == pytest.approx(det.total_cost)
    assert statistics.median(explored) <= det_stats.explored
    assert statistics.median(times) <= det_time
