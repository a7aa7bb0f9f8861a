# 목표 상태 집합과 휴리스틱 함수들:
# Manhattan / misplaced 거리, 다중 목표 최소값, 계층적 확률 휴리스틱(DSA*).

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config.loader import CostParams
from core.exceptions import EmptyGoalSet, InfeasibleGoal, InvariantViolation, NonpositiveCmin, UnpairedGoal
from data.grid_state import ClassTemplate, PlatoonState, enumerate_goal_set
from strategy.cost_model import c_min as min_edge_cost

EPS_MARGIN = 1e-9
_U53 = 1.0 / 9007199254740992.0  # 2**-53


class GoalMode(str, Enum):
    PAIRED = "paired"
    UNPAIRED = "unpaired"


class HeuristicBase(str, Enum):
    AUTO = "auto"
    MANHATTAN = "manhattan"
    MISPLACED = "misplaced"


@dataclass(frozen=True)
class HeuristicKind:
    base: HeuristicBase = HeuristicBase.AUTO
    stochastic: bool = False

    def resolve(self, goals: "GoalSpec") -> HeuristicBase:
        """AUTO: 짝지어진 목표면 Manhattan, 클래스 템플릿(짝 없음)이면 misplaced"""
        if self.base is not HeuristicBase.AUTO:
            return self.base
        return HeuristicBase.MANHATTAN if goals.mode is GoalMode.PAIRED else HeuristicBase.MISPLACED


@dataclass(frozen=True)
class GoalSpec:
    """
    목표 상태 집합과 각 목표의 선호 가중치(더미 목표 노드로 가는 엣지 비용).
    paired_targets 는 단일 짝 목표일 때의 (차량 ID, 셀) 목록입니다.
    """
    mode: GoalMode
    goal_states: Tuple[PlatoonState, ...]
    preference_weights: Tuple[float, ...] = ()
    paired_targets: Tuple[Tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        if not self.goal_states:
            raise EmptyGoalSet("목표 상태 집합이 비어 있습니다.")
        if not self.preference_weights:
            object.__setattr__(self, "preference_weights", (0.0,) * len(self.goal_states))
        if len(self.preference_weights) != len(self.goal_states):
            raise ValueError("선호 가중치 개수가 목표 상태 개수와 다릅니다.")
        if any(w < 0 for w in self.preference_weights):
            raise ValueError(f"선호 가중치는 음수일 수 없습니다: {self.preference_weights}")
        first = self.goal_states[0]
        for g in self.goal_states[1:]:
            if g.spec != first.spec or g.ids != first.ids:
                raise InfeasibleGoal("목표 상태들의 격자 또는 차량 집합이 서로 다릅니다.")

    # --- 생성 헬퍼 ---
    @classmethod
    def paired(cls, initial: PlatoonState, targets: Mapping[str, int], weight: float = 0.0) -> "GoalSpec":
        """차량 -> 목표 셀 짝으로 단일 목표를 만듭니다."""
        missing = [vid for vid in initial.ids if vid not in targets]
        if missing:
            raise UnpairedGoal(f"목표 셀이 없는 차량: {missing}")
        goal = goal_state_from_targets(initial, targets)
        pairs = tuple(sorted((vid, int(targets[vid])) for vid in initial.ids))
        return cls(GoalMode.PAIRED, (goal,), (float(weight),), pairs)

    @classmethod
    def from_states(cls, states: Sequence[PlatoonState], weights: Optional[Sequence[float]] = None,
                    mode: GoalMode = GoalMode.PAIRED) -> "GoalSpec":
        states = tuple(s.at_rest() for s in states)
        weights = tuple(float(w) for w in weights) if weights is not None else ()
        pairs = tuple(sorted(states[0].positions.items())) if len(states) == 1 and mode is GoalMode.PAIRED else ()
        return cls(mode, states, weights, pairs)

    @classmethod
    def from_template(cls, initial: PlatoonState, template: ClassTemplate, weight: float = 0.0) -> "GoalSpec":
        states = enumerate_goal_set(initial, template)
        return cls(GoalMode.UNPAIRED, tuple(states), (float(weight),) * len(states))

    @classmethod
    def union(cls, specs: Sequence["GoalSpec"]) -> "GoalSpec":
        """여러 목표 명세를 하나의 목표 집합으로 합칩니다 (중복 상태는 최소 가중치만 유지)."""
        if not specs:
            raise EmptyGoalSet("합칠 목표 명세가 없습니다.")
        merged: Dict[PlatoonState, float] = {}
        for spec in specs:
            for state, w in zip(spec.goal_states, spec.preference_weights):
                merged[state] = min(w, merged.get(state, w))
        mode = GoalMode.PAIRED if all(s.mode is GoalMode.PAIRED for s in specs) else GoalMode.UNPAIRED
        pairs = specs[0].paired_targets if len(merged) == 1 else ()
        return cls(mode, tuple(merged), tuple(merged.values()), pairs)

    # --- 조회 ---
    def __len__(self) -> int:
        return len(self.goal_states)

    @property
    def uniform_weights(self) -> bool:
        return len(set(self.preference_weights)) == 1

    def check_compatible(self, initial: PlatoonState) -> None:
        g = self.goal_states[0]
        if g.spec.rows != initial.spec.rows or g.spec.cols != initial.spec.cols:
            raise InfeasibleGoal("초기 상태와 목표 상태의 격자 크기가 다릅니다.")
        if g.ids != initial.ids:
            raise InfeasibleGoal(f"차량 집합 불일치: 초기 {list(initial.ids)} / 목표 {list(g.ids)}")
        if g.classes != initial.classes:
            raise InfeasibleGoal("초기 상태와 목표 상태의 차량 클래스가 다릅니다.")


def goal_state_from_targets(initial: PlatoonState, targets: Mapping[str, int]) -> PlatoonState:
    cells = tuple(int(targets[vid]) for vid in initial.ids)
    if len(set(cells)) != len(cells):
        raise InvariantViolation(f"목표 셀이 중복됩니다: {dict(targets)}")
    bad = [c for c in cells if not initial.spec.contains(c)]
    if bad:
        raise InvariantViolation(f"목표 셀이 격자 밖입니다: {bad}")
    return PlatoonState(initial.spec, initial.ids, initial.classes, cells, (0.0,) * len(cells))


# --- 기본 휴리스틱 ---

def manhattan(state: PlatoonState, goal: PlatoonState, params: CostParams) -> float:
    """Σ_i |Δrow_i|·β_long + |Δcol_i|·β_lc"""
    if state.ids != goal.ids:
        raise UnpairedGoal(f"차량-목표 짝이 맞지 않습니다: {list(state.ids)} / {list(goal.ids)}")
    spec = state.spec
    total = 0.0
    for cell, target in zip(state.cells, goal.cells):
        r1, c1 = spec.row_col(cell)
        r2, c2 = spec.row_col(target)
        total += abs(r1 - r2) * params.beta_long + abs(c1 - c2) * params.beta_lc
    return total


def misplaced(state: PlatoonState, goal: PlatoonState, params: CostParams) -> float:
    """목표 위치에 있지 않은 차량 수 n · C_min"""
    targets = goal.positions
    n = sum(1 for vid, cell in zip(state.ids, state.cells) if targets.get(vid) != cell)
    return n * min_edge_cost(params)


def multi_goal(state: PlatoonState, goals: GoalSpec, base: HeuristicBase, params: CostParams) -> float:
    """모든 목표 G_i 에 대한 min(기본 휴리스틱(K, G_i) + w_i)"""
    if not goals.goal_states:
        raise EmptyGoalSet("목표 상태 집합이 비어 있습니다.")
    if base is HeuristicBase.AUTO:
        base = HeuristicKind(base).resolve(goals)
    fn = manhattan if base is HeuristicBase.MANHATTAN else misplaced
    return min(fn(state, g, params) + w for g, w in zip(goals.goal_states, goals.preference_weights))


# --- 확률적 휴리스틱 ---

def epsilon_interval(c_min: float) -> Tuple[float, float]:
    """ε 표본 구간 (exp(-C_min)·(1+1e-9), 1-1e-9)"""
    if c_min <= 0:
        raise NonpositiveCmin(f"C_min 은 양수여야 합니다: {c_min}")
    return math.exp(-c_min) * (1.0 + EPS_MARGIN), 1.0 - EPS_MARGIN


def _key64(node_key: Hashable) -> int:
    if isinstance(node_key, int):
        return node_key & 0xFFFFFFFFFFFFFFFF
    raw = node_key if isinstance(node_key, bytes) else repr(node_key).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "little")


def draw_epsilon(node_key: Hashable, run_seed: int, c_min: float) -> float:
    """(node_key, run_seed) 로 키를 만든 Philox 카운터 기반 생성기에서 ε 하나를 뽑습니다."""
    lo, hi = epsilon_interval(c_min)
    key = np.array([_key64(node_key), run_seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    raw = int(np.random.Philox(key=key).random_raw())
    u = (raw >> 11) * _U53
    return lo + u * (hi - lo)


def stochastic_wrap(h: float, c_min: float, node_key: Hashable, run_seed: int,
                    memo: Optional[Dict[Hashable, float]] = None) -> float:
    """Ĥ_DSA* = Ĥ - ε·C_min / exp(Ĥ). memo 가 주어지면 노드별 ε 을 실행 단위로 고정합니다."""
    if c_min <= 0:
        raise NonpositiveCmin(f"C_min 은 양수여야 합니다: {c_min}")
    if memo is not None and node_key in memo:
        eps = memo[node_key]
    else:
        eps = draw_epsilon(node_key, run_seed, c_min)
        if memo is not None:
            memo[node_key] = eps
    return h - eps * c_min * math.exp(-h)


class PlatoonHeuristic:
    """
    탐색용 휴리스틱. 목표별·차량별 셀 비용표를 미리 계산해 두고
    상태마다 min_g(Σ_i table[g][i][cell_i] + w_g) 를 평가합니다.
    Manhattan 과 misplaced 모두 차량별 합으로 표현됩니다.
    """

    def __init__(self, goals: GoalSpec, kind: HeuristicKind, params: CostParams, ignore_weights: bool = False):
        self.base = kind.resolve(goals)
        self.params = params
        # 목표 소속 검사로 축약된 탐색에서는 더미 엣지가 없으므로 가중치를 빼야 함
        self.weights = [0.0] * len(goals) if ignore_weights else list(goals.preference_weights)
        spec = goals.goal_states[0].spec

        cells = np.arange(1, spec.n_cells + 1)
        cell_rows = (cells - 1) // spec.cols
        cell_cols = (cells - 1) % spec.cols
        goal_cells = np.array([g.cells for g in goals.goal_states])  # (G, N)
        if self.base is HeuristicBase.MANHATTAN:
            g_rows = (goal_cells - 1) // spec.cols
            g_cols = (goal_cells - 1) % spec.cols
            table = (np.abs(cell_rows[None, None, :] - g_rows[:, :, None]) * params.beta_long
                     + np.abs(cell_cols[None, None, :] - g_cols[:, :, None]) * params.beta_lc)
        else:
            table = np.where(cells[None, None, :] == goal_cells[:, :, None], 0.0, min_edge_cost(params))
        # 셀 번호로 바로 인덱싱하도록 0번 열을 덧붙임
        table = np.concatenate([np.zeros(table.shape[:2] + (1,)), table], axis=2)
        self._tables: List[List[List[float]]] = table.tolist()
        logger.debug(f"🧭 휴리스틱 준비: {self.base.value}, 목표 {len(self._tables)}개")

    def __call__(self, state: PlatoonState) -> float:
        cells = state.cells
        best = math.inf
        for table, w in zip(self._tables, self.weights):
            total = 0.0
            for row, c in zip(table, cells):
                total += row[c]
            total += w
            if total < best:
                best = total
        return best


class StochasticHeuristic:
    """실행(run) 하나가 소유하는 확률적 휴리스틱. 노드별 ε 을 메모이즈합니다."""

    def __init__(self, base: Callable[[PlatoonState], float], c_min: float, run_seed: int):
        epsilon_interval(c_min)
        self.base = base
        self.c_min = c_min
        self.run_seed = run_seed
        self.memo: Dict[Hashable, float] = {}

    def __call__(self, state: PlatoonState) -> float:
        return stochastic_wrap(self.base(state), self.c_min, (state.cells, state.speeds), self.run_seed, self.memo)
