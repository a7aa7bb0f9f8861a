# 테스트 공용 도구: 균일 비용 탐색 기준값과 무작위 인스턴스 생성기
import heapq
import itertools
import math
from typing import List, Tuple

import numpy as np

from config.loader import CostParams
from data.grid_state import GridSpec, Move, PlatoonState, Vehicle, apply_move, legal_moves
from strategy.cost_model import edge_cost
from strategy.heuristics import GoalSpec


def ucs_cost(initial: PlatoonState, goals: GoalSpec, params: CostParams) -> float:
    """균일 비용 탐색으로 구한 min_i (경로 비용 + w_i). 도달 불가면 inf"""
    goal_w = {}
    for g, w in zip(goals.goal_states, goals.preference_weights):
        goal_w[g.cells] = min(w, goal_w.get(g.cells, w))
    dist = {initial: 0.0}
    seq = itertools.count()
    heap = [(0.0, next(seq), initial)]
    best = math.inf
    while heap:
        d, _, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        if d >= best:
            break
        if s.cells in goal_w:
            best = min(best, d + goal_w[s.cells])
        for m in legal_moves(s):
            t = apply_move(s, m, params)
            nd = d + edge_cost(s, t, params)
            if nd < dist.get(t, math.inf):
                dist[t] = nd
                heapq.heappush(heap, (nd, next(seq), t))
    return best


def vehicle_ids(n: int) -> List[str]:
    return [chr(ord("A") + i) for i in range(n)]


def random_problem(rng: np.random.Generator, max_vehicles: int = 4, max_rows: int = 4,
                   max_cols: int = 3) -> Tuple[PlatoonState, GoalSpec]:
    """속도 0, 짝지어진 목표 하나를 갖는 작은 무작위 인스턴스"""
    rows = int(rng.integers(2, max_rows + 1))
    cols = int(rng.integers(2, max_cols + 1))
    spec = GridSpec(rows, cols)
    n = int(rng.integers(1, min(max_vehicles, spec.n_cells - 1) + 1))
    ids = vehicle_ids(n)
    cells = np.arange(1, spec.n_cells + 1)
    start = [int(c) for c in rng.choice(cells, size=n, replace=False)]
    goal = [int(c) for c in rng.choice(cells, size=n, replace=False)]
    initial = PlatoonState.build(spec, [Vehicle(i) for i in ids], dict(zip(ids, start)), warn=False)
    return initial, GoalSpec.paired(initial, dict(zip(ids, goal)))


def random_walk(rng: np.random.Generator, initial: PlatoonState, length: int) -> List[Move]:
    """initial 에서 length 번의 무작위 합법 이동"""
    moves = []
    state = initial
    params = CostParams()
    for _ in range(length):
        options = legal_moves(state)
        if not options:
            break
        m = options[int(rng.integers(len(options)))]
        moves.append(m)
        state = apply_move(state, m, params)
    return moves
