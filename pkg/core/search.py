# 추상 그래프 위의 결정론적 A* 와 플래툰 정렬 문제 바인딩(solve_sorting).

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from loguru import logger

from config.loader import CostParams
from core.exceptions import IllegalMove, NoPath, TimedOut
from data.grid_state import Move, PlatoonState, advance, apply_move, diff_move, legal_moves
from strategy.cost_model import c_min, edge_cost, transition_cost
from strategy.heuristics import GoalSpec, HeuristicKind, PlatoonHeuristic, StochasticHeuristic


@dataclass(frozen=True)
class SearchOptions:
    """tie_break 는 생성 순서 FIFO 로 고정됩니다. time_limit 단위는 초입니다."""
    time_limit: Optional[float] = None
    allow_reopen: bool = True
    tie_break: str = "fifo"
    record_expansions: bool = False
    check_interval: int = 256

    def __post_init__(self):
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError(f"time_limit 은 양수여야 합니다: {self.time_limit}")
        if self.tie_break != "fifo":
            raise ValueError(f"지원하지 않는 tie-break 규칙: {self.tie_break}")


@dataclass
class TraceRow:
    """경로 위 노드 하나의 ID / MaxID / ParentID 와 G, H, F"""
    node_id: int
    max_id: int
    parent_id: int
    g: float
    h: float
    f: float


@dataclass
class SearchStats:
    explored: int = 0
    generated: int = 0  # 부여된 노드 ID 개수 (시작 노드 포함)
    reopened: int = 0
    elapsed: float = 0.0
    f_initial: float = 0.0
    f_final: Optional[float] = None
    trace: List[TraceRow] = field(default_factory=list, repr=False)
    expansion_f: List[float] = field(default_factory=list, repr=False)

    def to_record(self) -> Dict[str, Any]:
        return {
            "explored": self.explored,
            "generated": self.generated,
            "reopened": self.reopened,
            "elapsed": round(self.elapsed, 6),
            "f_initial": self.f_initial,
            "f_final": self.f_final,
        }


def astar(start: Hashable,
          is_goal: Callable[[Any], bool],
          successors: Callable[[Any], Iterable[Tuple[Any, float]]],
          h: Callable[[Any], float],
          opts: Optional[SearchOptions] = None) -> Tuple[List[Any], SearchStats]:
    """
    F = G + H 가 가장 작은 노드를 먼저 확장하고 동점은 생성 순서(FIFO)로 정합니다.
    열린 노드에 더 싼 경로가 발견되면 부모와 G 를 갱신하고,
    allow_reopen 이면 닫힌 노드도 다시 엽니다.
    """
    opts = opts or SearchOptions()
    t0 = time.monotonic()
    seq = itertools.count()

    h0 = h(start)
    g: Dict[Any, float] = {start: 0.0}
    hval: Dict[Any, float] = {start: h0}
    parent: Dict[Any, Any] = {start: None}
    node_id: Dict[Any, int] = {start: 0}
    expanded_at: Dict[Any, int] = {}
    next_id = 1
    closed = set()
    ever_closed = set()
    heap = [(h0, next(seq), 0.0, start)]
    stats = SearchStats(f_initial=h0, generated=1)
    pops = 0

    while heap:
        f, _, gn, node = heapq.heappop(heap)
        if gn > g[node] or node in closed:
            continue  # 오래된 항목

        pops += 1
        if opts.time_limit is not None and pops % opts.check_interval == 0:
            if time.monotonic() - t0 > opts.time_limit:
                stats.generated = next_id
                stats.elapsed = time.monotonic() - t0
                raise TimedOut(
                    f"시간 제한 {opts.time_limit:.3f}s 초과 (확장 {stats.explored})",
                    stats=stats, frontier_size=len(heap), best_f=f,
                )

        if node not in ever_closed:
            ever_closed.add(node)
            stats.explored += 1
        expanded_at[node] = next_id - 1
        if opts.record_expansions:
            stats.expansion_f.append(f)

        if is_goal(node):
            path = []
            cur = node
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            path.reverse()
            stats.generated = next_id
            stats.f_final = gn
            stats.elapsed = time.monotonic() - t0
            stats.trace = [
                TraceRow(
                    node_id=node_id[n],
                    max_id=expanded_at.get(n, next_id - 1),
                    parent_id=node_id[parent[n]] if parent[n] is not None else 0,
                    g=g[n], h=hval[n], f=g[n] + hval[n],
                )
                for n in path
            ]
            return path, stats

        closed.add(node)
        for child, cost in successors(node):
            ng = gn + cost
            old = g.get(child)
            if old is not None and ng >= old:
                continue
            if child in closed:
                if not opts.allow_reopen:
                    continue
                closed.discard(child)
                stats.reopened += 1
            if old is None:
                node_id[child] = next_id
                next_id += 1
                hc = hval[child] = h(child)
            else:
                hc = hval[child]
            g[child] = ng
            parent[child] = node
            heapq.heappush(heap, (ng + hc, next(seq), ng, child))

    stats.generated = next_id
    stats.elapsed = time.monotonic() - t0
    raise NoPath(f"목표에 도달할 수 없습니다 (확장 {stats.explored})", stats=stats)


# --- 플래툰 정렬 바인딩 ---

class _DummyGoal:
    """목표 집합의 모든 원소 뒤에 붙는 가상 목표 노드"""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "DUMMY_GOAL"

    def __reduce__(self):
        return (_DummyGoal, ())


DUMMY_GOAL = _DummyGoal()


@dataclass
class SortingPath:
    """S_I … S_G 상태 열과 단계별 단일 차량 이동, 총 비용 F"""
    states: List[PlatoonState]
    moves: List[Move]
    total_cost: float
    chosen_goal: int = 0
    trace: List[TraceRow] = field(default_factory=list, repr=False)

    @property
    def initial(self) -> PlatoonState:
        return self.states[0]

    @property
    def final(self) -> PlatoonState:
        return self.states[-1]

    def move_key(self) -> Tuple[Tuple[str, int, int], ...]:
        """동일 경로 판별용 정규 이동열 키"""
        return tuple(m.key() for m in self.moves)

    @classmethod
    def from_moves(cls, initial: PlatoonState, moves: Sequence[Move], params: CostParams,
                   chosen_goal: int = 0) -> "SortingPath":
        """이동 목록을 초기 상태에서 재생해 경로를 만듭니다 (IllegalMove 가능)."""
        states = [initial]
        total = 0.0
        for m in moves:
            nxt = apply_move(states[-1], m, params)
            total += edge_cost(states[-1], nxt, params)
            states.append(nxt)
        return cls(states, list(moves), total, chosen_goal)


def align_params(params: CostParams, state: PlatoonState) -> CostParams:
    if abs(params.cell_length - state.spec.cell_length) > 1e-12:
        logger.warning(
            f"⚠️ 비용 모델 셀 길이({params.cell_length}m)를 격자 셀 길이({state.spec.cell_length}m)로 맞춥니다."
        )
        return params.model_copy(update={"cell_length": state.spec.cell_length})
    return params


def solve_sorting(initial: PlatoonState,
                  goals: GoalSpec,
                  params: CostParams,
                  kind: Optional[HeuristicKind] = None,
                  opts: Optional[SearchOptions] = None,
                  run_seed: Optional[int] = None) -> Tuple[SortingPath, SearchStats]:
    """
    플래툰 그래프에 A* 를 연결합니다: 후속 노드 = legal_moves + apply_move, 비용 = edge_cost.
    목표 가중치가 모두 같으면 더미 목표 노드는 목표 집합 소속 검사로 축약되고,
    다르면 목표 집합의 각 원소에서 가중치 엣지로 연결된 더미 노드를 목표로 삼습니다.
    """
    kind = kind or HeuristicKind()
    goals.check_compatible(initial)
    params = align_params(params, initial)

    weights: Dict[Tuple[int, ...], Tuple[float, int]] = {}
    for i, (gs, w) in enumerate(zip(goals.goal_states, goals.preference_weights)):
        if gs.cells not in weights or w < weights[gs.cells][0]:
            weights[gs.cells] = (w, i)

    collapsed = goals.uniform_weights
    base_h = PlatoonHeuristic(goals, kind, params, ignore_weights=collapsed)
    if kind.stochastic:
        h_state: Callable[[PlatoonState], float] = StochasticHeuristic(base_h, c_min(params), run_seed or 0)
    else:
        h_state = base_h

    index = {vid: i for i, vid in enumerate(initial.ids)}

    def platoon_successors(state: PlatoonState) -> List[Tuple[PlatoonState, float]]:
        out = []
        for m in legal_moves(state):
            i = index[m.vehicle]
            out.append((advance(state, i, m.to_cell, params), transition_cost(state, i, m.to_cell, params)))
        return out

    if collapsed:
        def is_goal(node) -> bool:
            return node.cells in weights

        successors = platoon_successors
        h = h_state
    else:
        def is_goal(node) -> bool:
            return node is DUMMY_GOAL

        def successors(node):
            if node is DUMMY_GOAL:
                return []
            out = platoon_successors(node)
            hit = weights.get(node.cells)
            if hit is not None:
                out.append((DUMMY_GOAL, hit[0]))
            return out

        def h(node) -> float:
            return 0.0 if node is DUMMY_GOAL else h_state(node)

    logger.debug(f"🔎 탐색 시작: 차량 {initial.n_vehicles}대, 목표 {len(goals)}개, "
                 f"휴리스틱 {base_h.base.value}{' (확률적)' if kind.stochastic else ''}, seed={run_seed}")
    nodes, stats = astar(initial, is_goal, successors, h, opts)

    if nodes[-1] is DUMMY_GOAL:
        nodes = nodes[:-1]
        stats.trace = stats.trace[:-1]
    states: List[PlatoonState] = nodes
    moves = []
    total = 0.0
    for a, b in zip(states, states[1:]):
        m = diff_move(a, b)
        if m is None:
            raise IllegalMove(f"경로 재구성 실패: {a} -> {b}")
        moves.append(m)
        total += edge_cost(a, b, params)

    chosen = weights[states[-1].cells][1]
    path = SortingPath(states, moves, total, chosen, stats.trace)
    logger.debug(f"✅ 탐색 완료: 비용 {total:g}, 이동 {len(moves)}회, 확장 {stats.explored}, "
                 f"생성 {stats.generated}, {stats.elapsed:.3f}s")
    return path, stats
