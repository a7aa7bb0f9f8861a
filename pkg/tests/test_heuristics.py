import math

import numpy as np
import pytest

from config.loader import CostParams
from core.exceptions import EmptyGoalSet, InfeasibleGoal, NonpositiveCmin, UnpairedGoal
from data.grid_state import GridSpec, PlatoonState, Vehicle, apply_move, legal_moves
from strategy.cost_model import edge_cost
from strategy.heuristics import (
    GoalMode, GoalSpec, HeuristicBase, HeuristicKind, PlatoonHeuristic, StochasticHeuristic,
    draw_epsilon, epsilon_interval, manhattan, misplaced, multi_goal, stochastic_wrap,
)
from tests.helpers import random_problem, ucs_cost

BASES = [HeuristicBase.MANHATTAN, HeuristicBase.MISPLACED]


def test_reference_initial_heuristics(example, params):
    goal = example.goal.goal_states[0]
    assert manhattan(example.initial, goal, params) == 11.0
    assert misplaced(example.initial, goal, params) == 6.0
    assert manhattan(goal, goal, params) == 0.0


def test_manhattan_weights_rows_and_lanes(example):
    params = CostParams(beta_long=0.5, beta_lc=0.25)
    goal = example.goal.goal_states[0]
    # A 7->4: 1행, B 11->5: 2행, C 4->6: 2차로, D 6->7: 1행 2차로, E 9->8: 1차로, F 5->9: 1행 1차로
    assert manhattan(example.initial, goal, params) == pytest.approx(5 * 0.5 + 6 * 0.25)


def test_manhattan_needs_paired_vehicles(example, params):
    other = PlatoonState.build(example.initial.spec, [Vehicle("Z")], {"Z": 1})
    with pytest.raises(UnpairedGoal):
        manhattan(example.initial, other, params)
    with pytest.raises(UnpairedGoal):
        GoalSpec.paired(example.initial, {"A": 4})


def test_multi_goal_takes_weighted_minimum(samples, params):
    initial = samples.initials[14]
    g1 = samples.goal(14, "goal1").goal_states[0]
    g2 = samples.goal(14, "goal2").goal_states[0]
    goals = GoalSpec.from_states([g1, g2], [0.0, 3.0])
    expected = min(manhattan(initial, g1, params), manhattan(initial, g2, params) + 3.0)
    assert multi_goal(initial, goals, HeuristicBase.MANHATTAN, params) == pytest.approx(expected)
    assert PlatoonHeuristic(goals, HeuristicKind(HeuristicBase.MANHATTAN), params)(initial) == pytest.approx(expected)


def test_auto_resolves_by_goal_mode(example, samples):
    assert HeuristicKind().resolve(example.goal) is HeuristicBase.MANHATTAN
    templated = GoalSpec.from_states(example.goal.goal_states, mode=GoalMode.UNPAIRED)
    assert HeuristicKind().resolve(templated) is HeuristicBase.MISPLACED


def test_goal_spec_validation(example):
    with pytest.raises(EmptyGoalSet):
        GoalSpec(GoalMode.PAIRED, ())
    with pytest.raises(EmptyGoalSet):
        GoalSpec.union([])
    with pytest.raises(ValueError):
        GoalSpec.from_states(example.goal.goal_states, [-1.0])
    small = PlatoonState.build(GridSpec(2, 2), [Vehicle("A")], {"A": 1})
    with pytest.raises(InfeasibleGoal):
        GoalSpec.from_states([small]).check_compatible(example.initial)


def test_union_keeps_lowest_weight(example):
    g = example.goal.goal_states[0]
    merged = GoalSpec.union([GoalSpec.from_states([g], [2.0]), GoalSpec.from_states([g], [0.5])])
    assert len(merged) == 1
    assert merged.preference_weights == (0.5,)


@pytest.mark.parametrize("base", BASES)
def test_precomputed_tables_match_direct_evaluation(base, params):
    rng = np.random.default_rng(7)
    for _ in range(30):
        initial, goals = random_problem(rng)
        h = PlatoonHeuristic(goals, HeuristicKind(base), params)
        state = initial
        for _ in range(5):
            assert h(state) == pytest.approx(multi_goal(state, goals, base, params))
            options = legal_moves(state)
            if not options:
                break
            state = apply_move(state, options[int(rng.integers(len(options)))], params)


@pytest.mark.parametrize("base", BASES)
def test_admissible_and_consistent_on_random_instances(base):
    rng = np.random.default_rng(11)
    params = CostParams(beta_long=1.0, beta_lc=0.7)
    checked = 0
    for _ in range(25):
        initial, goals = random_problem(rng, max_vehicles=3, max_rows=3)
        h = PlatoonHeuristic(goals, HeuristicKind(base), params)
        optimum = ucs_cost(initial, goals, params)
        if math.isfinite(optimum):
            assert h(initial) <= optimum + 1e-9
        for m in legal_moves(initial):
            nxt = apply_move(initial, m, params)
            assert h(initial) <= edge_cost(initial, nxt, params) + h(nxt) + 1e-9
            checked += 1
    assert checked > 0


def test_epsilon_interval_and_determinism():
    lo, hi = epsilon_interval(1.0)
    assert lo == pytest.approx(math.exp(-1.0) * (1 + 1e-9))
    assert hi == pytest.approx(1 - 1e-9)
    draws = [draw_epsilon(("node", i), 5, 1.0) for i in range(200)]
    assert all(lo <= e <= hi for e in draws)
    assert draw_epsilon(("node", 3), 5, 1.0) == draws[3]
    assert draw_epsilon(("node", 3), 6, 1.0) != draws[3]
    with pytest.raises(NonpositiveCmin):
        epsilon_interval(0.0)


@pytest.mark.parametrize("c", [1.0, 0.5, 0.25])
def test_stochastic_wrapper_stays_below_the_base(c):
    for h in np.linspace(0.0, 12.0, 49):
        for key in range(20):
            wrapped = stochastic_wrap(float(h), c, key, 3)
            assert 0.0 < h - wrapped < c


def test_stochastic_wrapper_preserves_strict_order():
    # 휴리스틱 값이 C_min 의 배수로만 다를 때 순서가 뒤바뀌지 않아야 함
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        c = float(rng.choice([1.0, 0.5, 0.8]))
        i, j = sorted(rng.choice(np.arange(0, 7), size=2, replace=False))
        h_i, h_j = float(i) * c, float(j) * c
        seed = int(rng.integers(1 << 30))
        assert stochastic_wrap(h_i, c, ("i", seed), seed) < stochastic_wrap(h_j, c, ("j", seed), seed)


def test_equal_f_nodes_keep_inner_layer_first():
    # F 가 같고 H(j) <= H(i) - C_min 이면 감싼 F 는 j 가 항상 더 작아야 함
    rng = np.random.default_rng(77)
    for n in range(2000):
        c = float(rng.uniform(0.05, 1.5))
        h_i = float(rng.uniform(c, 8.0))
        h_j = float(rng.uniform(0.0, h_i - c))
        f = h_i + float(rng.uniform(0.0, 10.0))
        seed = int(rng.integers(1 << 30))
        f_i = (f - h_i) + stochastic_wrap(h_i, c, ("i", n), seed)
        f_j = (f - h_j) + stochastic_wrap(h_j, c, ("j", n), seed)
        assert f_j < f_i, (c, h_i, h_j, seed)


def test_stochastic_heuristic_memoizes_per_node(example, params):
    base = PlatoonHeuristic(example.goal, HeuristicKind(), params)
    h = StochasticHeuristic(base, 1.0, run_seed=9)
    first = h(example.initial)
    assert h(example.initial) == first
    assert len(h.memo) == 1
    assert 0.0 < base(example.initial) - first < 1.0
