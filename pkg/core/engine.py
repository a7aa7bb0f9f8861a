import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import anyio
import anyio.to_process
import anyio.to_thread
import numpy as np
import pandas as pd
from loguru import logger

from config.loader import CostParams, PortfolioSettings, SearchConfig
from core.exceptions import AllRunsTimedOut, TimedOut
from core.schedule import Schedule, ScheduleMode, schedule_path
from core.search import SearchOptions, SearchStats, SortingPath, solve_sorting
from data.grid_state import PlatoonState
from data.indicators import best_subset_probability, first_k_above, runtime_summary, step_histogram
from strategy.heuristics import GoalSpec, HeuristicBase, HeuristicKind

COST_TOL = 1e-9


@dataclass(frozen=True)
class PortfolioConfig:
  """시드별로 독립 실행되는 확률적 A* 포트폴리오 설정"""
  goals: GoalSpec
  params: CostParams = field(default_factory=CostParams)
  kind: HeuristicKind = field(default_factory=lambda: HeuristicKind(stochastic=True))
  seeds: Tuple[int, ...] = ()
  workers: int = 1
  master_seed: int = 0
  time_limit: Optional[float] = None  # 실행 1회 제한 (초)
  modes: Tuple[ScheduleMode, ...] = (ScheduleMode.CONSERVATIVE, ScheduleMode.AGGRESSIVE)
  max_parallel: int = 10
  backend: str = "thread"
  max_restarts: int = 0

  def __post_init__(self):
    seeds = tuple(int(s) for s in self.seeds) or tuple(self.master_seed + i for i in range(self.workers))
    if len(set(seeds)) != len(seeds):
      raise ValueError(f"시드가 중복됩니다: {seeds}")
    if not seeds:
      raise ValueError("워커는 1개 이상이어야 합니다.")
    if self.backend not in ("thread", "process"):
      raise ValueError(f"지원하지 않는 실행 방식: {self.backend}")
    if not self.modes:
      raise ValueError("스케줄 모드가 하나 이상 필요합니다.")
    object.__setattr__(self, "seeds", seeds)
    object.__setattr__(self, "workers", len(seeds))
    object.__setattr__(self, "modes", tuple(ScheduleMode(m) for m in self.modes))
    object.__setattr__(self, "max_parallel", max(1, min(self.max_parallel, len(seeds))))

  @classmethod
  def from_settings(cls, goals: GoalSpec, params: CostParams, settings: PortfolioSettings,
                    search: SearchConfig, **overrides: Any) -> "PortfolioConfig":
    """config.yaml 의 portfolio / search 섹션으로 설정을 만듭니다."""
    values: Dict[str, Any] = dict(
      goals=goals,
      params=params,
      kind=HeuristicKind(HeuristicBase(search.heuristic), stochastic=settings.stochastic),
      workers=settings.workers,
      master_seed=settings.master_seed,
      time_limit=search.time_limit_ms / 1000.0 if search.time_limit_ms else None,
      modes=tuple(settings.modes),
      max_parallel=settings.max_parallel,
      backend=settings.backend,
      max_restarts=settings.max_restarts,
    )
    values.update(overrides)
    return cls(**values)


@dataclass
class RunRecord:
  seed: int
  path: Optional[SortingPath]
  stats: SearchStats
  elapsed: float
  attempts: int = 1
  run_seed: int = 0
  schedules: Dict[ScheduleMode, Schedule] = field(default_factory=dict)

  @property
  def timed_out(self) -> bool:
    return self.path is None

  @property
  def cost(self) -> float:
    return self.path.total_cost if self.path is not None else math.nan

  def to_record(self, include_timing: bool = True) -> Dict[str, Any]:
    row: Dict[str, Any] = {
      "seed": self.seed,
      "attempts": self.attempts,
      "timed_out": self.timed_out,
      "cost": None if self.timed_out else self.cost,
      "moves": None if self.timed_out else len(self.path.moves),
      "explored": self.stats.explored,
      "generated": self.stats.generated,
    }
    for mode in ScheduleMode:
      sched = self.schedules.get(mode)
      row[f"{mode.value}_makespan"] = sched.makespan if sched else None
      row[f"{mode.value}_objective"] = sched.objective if sched else None
    row["path_key"] = None if self.timed_out else " ".join(str(m) for m in self.path.moves)
    if include_timing:
      row["elapsed"] = self.elapsed
    return row


@dataclass
class PortfolioResult:
  best_path: SortingPath
  best_mode: ScheduleMode
  best_schedule: Schedule
  distinct_paths: int
  runs: List[RunRecord]
  best_by_mode: Dict[ScheduleMode, Tuple[SortingPath, Schedule]] = field(default_factory=dict)

  def runs_frame(self, include_timing: bool = True) -> pd.DataFrame:
    return pd.DataFrame([r.to_record(include_timing) for r in self.runs])

  def summary(self, include_timing: bool = False) -> Dict[str, Any]:
    """구조화된 요약. include_timing=False 면 시드가 같을 때 항상 동일합니다."""
    modes = tuple(self.best_by_mode)
    data: Dict[str, Any] = {
      "best": {
        "mode": self.best_mode.value,
        "cost": self.best_path.total_cost,
        "makespan": self.best_schedule.makespan,
        "objective": self.best_schedule.objective,
        "moves": [str(m) for m in self.best_path.moves],
      },
      "best_by_mode": {
        mode.value: {"makespan": s.makespan, "objective": s.objective, "moves": [str(m) for m in p.moves]}
        for mode, (p, s) in self.best_by_mode.items()
      },
      "distinct_paths": self.distinct_paths,
      "stats": aggregate_stats(self.runs, modes, include_timing=include_timing),
    }
    return data


def derive_seed(seed: int, attempt: int) -> int:
  """재시작 시드. attempt 0 은 원래 시드 그대로"""
  if attempt == 0:
    return seed
  return int(np.random.SeedSequence([seed, attempt]).generate_state(1, dtype=np.uint64)[0])


def solve_with_restarts(initial: PlatoonState, goals: GoalSpec, params: CostParams, kind: HeuristicKind,
                        seed: int, time_limit: Optional[float], max_restarts: int) -> RunRecord:
  """워커 1개의 작업. 프로세스 실행을 위해 모듈 최상위 함수로 둡니다."""
  opts = SearchOptions(time_limit=time_limit)
  elapsed = 0.0
  stats = SearchStats()
  for attempt in range(max_restarts + 1):
    run_seed = derive_seed(seed, attempt)
    try:
      path, stats = solve_sorting(initial, goals, params, kind, opts, run_seed)
      return RunRecord(seed, path, stats, elapsed + stats.elapsed, attempt + 1, run_seed)
    except TimedOut as e:
      stats = e.stats or SearchStats()
      elapsed += stats.elapsed
      logger.warning(f"⏱️ seed={seed} 시도 {attempt + 1}/{max_restarts + 1} 시간 초과 (열린 목록 {e.frontier_size})")
  return RunRecord(seed, None, stats, elapsed, max_restarts + 1, derive_seed(seed, max_restarts))


def _pick_key(path: SortingPath, sched: Schedule, mode_rank: int):
  return (sched.makespan, sched.objective, path.move_key(), mode_rank)


class PortfolioEngine:
  """시드별 share-nothing 워커를 띄우고 한 지점에서 결과를 모아 최선의 계획을 고르는 엔진"""

  def __init__(self, config: PortfolioConfig):
    self.config = config
    self.logs: List[str] = []
    self.engine_status: str = "INITIALIZING"

  def add_log(self, message: str, level: str = "INFO"):
    log_msg = f"[{datetime.now().strftime('%H:%M:%S')}] {message}"
    self.logs.insert(0, log_msg)
    if len(self.logs) > 100: self.logs.pop()
    logger.log(level.upper(), message)

  async def run(self, initial: PlatoonState) -> PortfolioResult:
    cfg = self.config
    self.engine_status = "RUNNING"
    self.add_log(f"🚀 포트폴리오 시작: 워커 {cfg.workers}개, 동시 {cfg.max_parallel}개 ({cfg.backend})")

    limiter = anyio.CapacityLimiter(cfg.max_parallel)
    results: List[Optional[RunRecord]] = [None] * len(cfg.seeds)

    async def worker(i: int, seed: int) -> None:
      args = (initial, cfg.goals, cfg.params, cfg.kind, seed, cfg.time_limit, cfg.max_restarts)
      if cfg.backend == "process":
        results[i] = await anyio.to_process.run_sync(solve_with_restarts, *args, limiter=limiter)
      else:
        results[i] = await anyio.to_thread.run_sync(solve_with_restarts, *args, limiter=limiter)

    try:
      async with anyio.create_task_group() as tg:
        for i, seed in enumerate(cfg.seeds):
          tg.start_soon(worker, i, seed)
    except BaseException:
      self.engine_status = "ERROR"
      raise

    runs = [r for r in results if r is not None]
    try:
      result = self._collect(runs)
    except AllRunsTimedOut:
      self.engine_status = "ERROR"
      self.add_log(f"❌ 모든 실행({len(runs)})이 시간 제한에 걸렸습니다.", level="ERROR")
      raise
    self.engine_status = "STOPPED"
    self.add_log(
      f"✅ 포트폴리오 완료: 비용 {result.best_path.total_cost:g}, 서로 다른 경로 {result.distinct_paths}개, "
      f"최선 {result.best_mode.value} {result.best_schedule.makespan}단계"
    )
    return result

  def run_sync(self, initial: PlatoonState) -> PortfolioResult:
    return anyio.run(self.run, initial)

  def _collect(self, runs: List[RunRecord]) -> PortfolioResult:
    """중복 경로 제거 -> 모드별 스케줄 압축 -> 최선 선택"""
    ok = [r for r in runs if not r.timed_out]
    if not ok:
      raise AllRunsTimedOut(f"{len(runs)}개 실행이 모두 시간 초과", runs=runs)
    timed_out = len(runs) - len(ok)
    if timed_out:
      self.add_log(f"⚠️ 시간 초과 실행 {timed_out}개는 통계에만 포함됩니다.", level="WARNING")

    distinct: Dict[Tuple, SortingPath] = {}
    for r in ok:
      distinct.setdefault(r.path.move_key(), r.path)
    schedules: Dict[Tuple, Dict[ScheduleMode, Schedule]] = {
      key: {mode: schedule_path(path, mode) for mode in self.config.modes}
      for key, path in distinct.items()
    }
    for r in ok:
      r.schedules = schedules[r.path.move_key()]

    min_cost = min(p.total_cost for p in distinct.values())
    optimal = {k: p for k, p in distinct.items() if p.total_cost <= min_cost + COST_TOL}

    best_by_mode: Dict[ScheduleMode, Tuple[SortingPath, Schedule]] = {}
    for rank, mode in enumerate(self.config.modes):
      key = min(optimal, key=lambda k: _pick_key(optimal[k], schedules[k][mode], rank))
      best_by_mode[mode] = (optimal[key], schedules[key][mode])

    best_mode = min(
      best_by_mode,
      key=lambda m: _pick_key(best_by_mode[m][0], best_by_mode[m][1], self.config.modes.index(m)),
    )
    best_path, best_schedule = best_by_mode[best_mode]
    return PortfolioResult(best_path, best_mode, best_schedule, len(distinct), runs, best_by_mode)


def run_portfolio(initial: PlatoonState, config: PortfolioConfig) -> PortfolioResult:
  return PortfolioEngine(config).run_sync(initial)


def aggregate_stats(runs: Sequence[RunRecord], modes: Sequence[ScheduleMode] = tuple(ScheduleMode),
                    include_timing: bool = True) -> Dict[str, Any]:
  """모드별 단계 수 히스토그램, 실행 시간 요약, k-부분집합 최선 확률과 k*"""
  frame = pd.DataFrame([r.to_record() for r in runs])
  summary: Dict[str, Any] = {
    "runs": len(runs),
    "timed_out": int(frame["timed_out"].sum()) if not frame.empty else 0,
  }
  costs = pd.to_numeric(frame["cost"], errors="coerce").dropna() if not frame.empty else pd.Series(dtype=float)
  summary["cost"] = {
    "min": float(costs.min()) if not costs.empty else None,
    "all_equal": bool(costs.empty or (costs.max() - costs.min()) <= COST_TOL),
  }
  if include_timing and not frame.empty:
    summary["runtime"] = runtime_summary(frame["elapsed"])

  per_mode: Dict[str, Any] = {}
  for mode in modes:
    col = f"{ScheduleMode(mode).value}_makespan"
    if frame.empty or frame[col].isna().all():
      continue
    values = frame[col].astype(float)
    curve = best_subset_probability(values.tolist())
    hist = step_histogram(frame, col)
    per_mode[ScheduleMode(mode).value] = {
      "best": int(values.min()),
      "histogram": {int(s): int(c) for s, c in zip(hist["steps"], hist["count"])},
      "p_best": [float(p) for p in curve],
      "k_star": first_k_above(curve),
    }
  summary["modes"] = per_mode
  return summary
