# 실험 1~4 재현 하네스. 각 실험은 pandas DataFrame 묶음을 반환하고 out_dir 에 CSV 로 저장합니다.

import os
import time
from typing import Dict, List, Optional, Sequence

import pandas as pd
from loguru import logger

from app.report import write_csv, write_json
from config.loader import BenchConfig, CostParams
from core.engine import PortfolioConfig, run_portfolio
from core.search import SearchOptions, solve_sorting
from data.indicators import best_subset_probability, step_histogram
from data.manager import SampleList, load_samples
from strategy.heuristics import HeuristicKind

EXPERIMENTS = (1, 2, 3, 4)


def experiment_1(samples: SampleList, params: CostParams, time_limit: Optional[float] = None) -> Dict[str, pd.DataFrame]:
    """결정론적 A* 로 30개 샘플 -> goal1 (F 값, 확장 노드 수, 실행 시간)"""
    rows = []
    for sid in sorted(samples.initials):
        initial = samples.initials[sid]
        t0 = time.monotonic()
        path, stats = solve_sorting(initial, samples.goal(sid), params, HeuristicKind(),
                                    SearchOptions(time_limit=time_limit))
        rows.append({
            "sample": sid, "cost": path.total_cost, "moves": len(path.moves),
            "explored": stats.explored, "generated": stats.generated,
            "elapsed": time.monotonic() - t0,
        })
        logger.info(f"📊 실험1 샘플 {sid}: F={path.total_cost:g}, 확장 {stats.explored}")
    return {"experiment1": pd.DataFrame(rows)}


def _portfolio_rows(samples: SampleList, params: CostParams, sample_ids: Sequence[int], goal_names: Sequence[str],
                    runs: int, master_seed: int, max_parallel: int, time_limit: Optional[float]) -> List[dict]:
    rows = []
    for sid in sample_ids:
        cfg = PortfolioConfig(
            goals=samples.goal(sid, *goal_names), params=params, workers=runs, master_seed=master_seed,
            max_parallel=max_parallel, time_limit=time_limit,
        )
        result = run_portfolio(samples.initials[sid], cfg)
        elapsed = result.runs_frame()["elapsed"]
        row = {
            "sample": sid,
            "goals": "+".join(goal_names),
            "cost": result.best_path.total_cost,
            "distinct_paths": result.distinct_paths,
            "chosen_goal": result.best_path.chosen_goal,
            "best_mode": result.best_mode.value,
        }
        for mode, (_, sched) in result.best_by_mode.items():
            row[f"{mode.value}_makespan"] = sched.makespan
        row["runtime_mean"] = float(elapsed.mean())
        row["runtime_median"] = float(elapsed.median())
        rows.append(row)
        logger.info(f"📊 샘플 {sid} ({row['goals']}): F={row['cost']:g}, 서로 다른 경로 {row['distinct_paths']}개")
    return rows


def experiment_2(samples: SampleList, params: CostParams, bench: BenchConfig, master_seed: int = 0,
                 max_parallel: int = 10, time_limit: Optional[float] = None) -> Dict[str, pd.DataFrame]:
    """대표 샘플 -> goal1 포트폴리오"""
    rows = _portfolio_rows(samples, params, bench.portfolio_samples, ("goal1",), bench.runs_per_sample,
                           master_seed, max_parallel, time_limit)
    return {"experiment2": pd.DataFrame(rows)}


def experiment_3(samples: SampleList, params: CostParams, bench: BenchConfig, master_seed: int = 0,
                 max_parallel: int = 10, time_limit: Optional[float] = None) -> Dict[str, pd.DataFrame]:
    """대표 샘플 -> {goal1, goal2} 포트폴리오. goal1 단독 비용과 비교"""
    rows = _portfolio_rows(samples, params, bench.portfolio_samples, ("goal1", "goal2"), bench.runs_per_sample,
                           master_seed, max_parallel, time_limit)
    for row in rows:
        sid = row["sample"]
        single, _ = solve_sorting(samples.initials[sid], samples.goal(sid), params)
        row["goal1_cost"] = single.total_cost
        row["improved"] = row["cost"] < single.total_cost - 1e-9
    return {"experiment3": pd.DataFrame(rows)}


def experiment_4(samples: SampleList, params: CostParams, bench: BenchConfig, master_seed: int = 0,
                 max_parallel: int = 10, time_limit: Optional[float] = None) -> Dict[str, pd.DataFrame]:
    """한 샘플을 여러 시드로 풀어 모드별 단계 수 히스토그램과 k-부분집합 최선 확률 곡선을 만듭니다."""
    sid = bench.experiment4_sample
    cfg = PortfolioConfig(
        goals=samples.goal(sid), params=params, workers=bench.experiment4_runs, master_seed=master_seed,
        max_parallel=max_parallel, time_limit=time_limit,
    )
    result = run_portfolio(samples.initials[sid], cfg)
    runs = result.runs_frame()

    hist_parts, curve_parts = [], []
    for mode in cfg.modes:
        col = f"{mode.value}_makespan"
        hist = step_histogram(runs, col)
        hist.insert(0, "mode", mode.value)
        hist_parts.append(hist)
        curve = best_subset_probability(runs[col].astype(float).tolist())
        curve_parts.append(pd.DataFrame({"mode": mode.value, "k": curve.index, "p_best": curve.values}))

    return {
        "experiment4_runs": runs,
        "experiment4_histogram": pd.concat(hist_parts, ignore_index=True),
        "experiment4_probability": pd.concat(curve_parts, ignore_index=True),
        "experiment4_summary": pd.DataFrame([{
            "sample": sid,
            "runs": len(runs),
            "cost": result.best_path.total_cost,
            **{f"best_{m.value}": s.makespan for m, (_, s) in result.best_by_mode.items()},
        }]),
    }


def run_experiment(number: int, out_dir: str, params: CostParams, bench: BenchConfig, master_seed: int = 0,
                   max_parallel: int = 10, time_limit: Optional[float] = None) -> Dict[str, pd.DataFrame]:
    """실험 번호별 실행 후 CSV 저장"""
    if number not in EXPERIMENTS:
        raise ValueError(f"알 수 없는 실험 번호: {number} (가능: {EXPERIMENTS})")
    samples = load_samples()
    logger.info(f"🧪 실험 {number} 시작 (seed={master_seed})")
    if number == 1:
        tables = experiment_1(samples, params, time_limit)
    else:
        runner = {2: experiment_2, 3: experiment_3, 4: experiment_4}[number]
        tables = runner(samples, params, bench, master_seed, max_parallel, time_limit)

    for name, frame in tables.items():
        dest = write_csv(frame, os.path.join(out_dir, f"{name}.csv"))
        logger.info(f"💾 {dest} ({len(frame)}행)")
    write_json({"experiment": number, "seed": master_seed, "tables": sorted(tables)},
               os.path.join(out_dir, f"experiment{number}.json"))
    return tables
