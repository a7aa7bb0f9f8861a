import math

import pytest

from config.loader import CostParams
from core.exceptions import NonAdjacent, NotAdjacentStates
from data.grid_state import GridSpec, Move, MoveKind, PlatoonState, Vehicle, apply_move
from strategy.cost_model import c_min, edge_cost, speed_update, transition_cost, vehicle_cost

GRID = GridSpec(4, 3)


def test_cruising_costs_are_the_move_weights():
    params = CostParams(beta_long=0.5, beta_lc=0.8)
    assert vehicle_cost(GRID, 5, 5, 0.0, params) == 0.0
    assert vehicle_cost(GRID, 5, 2, 0.0, params) == pytest.approx(0.5)
    assert vehicle_cost(GRID, 5, 6, 0.0, params) == pytest.approx(0.8)


def test_hold_cost_grows_with_relative_speed():
    params = CostParams(gamma=1.0)
    assert vehicle_cost(GRID, 5, 5, 1.0, params) == pytest.approx(math.e - 1.0)
    assert vehicle_cost(GRID, 5, 5, -1.0, params) == pytest.approx(math.e - 1.0)


def test_moving_with_relative_speed_is_cheaper():
    params = CostParams()
    # 빠른 차량(v > 0)이 앞으로(1행 방향) 가면 지수 항이 작아짐
    assert vehicle_cost(GRID, 8, 5, 1.0, params) == pytest.approx(1.0 + math.exp(-1.0))
    assert vehicle_cost(GRID, 5, 8, 1.0, params) == pytest.approx(1.0 + math.exp(1.0))


def test_non_adjacent_vehicle_move():
    with pytest.raises(NonAdjacent):
        vehicle_cost(GRID, 5, 9, 0.0, CostParams())


def test_speed_update():
    params = CostParams()
    assert speed_update(0.0, params) == 0.0
    assert speed_update(2.0, params) == 0.0
    assert speed_update(10.0, params) == pytest.approx(math.sqrt(100 - 42))
    assert speed_update(-10.0, params) == pytest.approx(-math.sqrt(100 - 70))


def test_edge_cost_sums_movers_and_holders():
    params = CostParams()
    s = PlatoonState.build(GRID, [Vehicle("A"), Vehicle("B", rel_speed=1.0)], {"A": 5, "B": 10})
    t = apply_move(s, Move("A", 5, 2, MoveKind.LONGITUDINAL), params)
    assert edge_cost(s, t, params) == pytest.approx(1.0 + (math.e - 1.0))
    assert transition_cost(s, 0, 2, params) == pytest.approx(edge_cost(s, t, params))


def test_edge_cost_rejects_non_adjacent_states():
    params = CostParams()
    s = PlatoonState.build(GRID, [Vehicle("A"), Vehicle("B")], {"A": 1, "B": 12})
    with pytest.raises(NotAdjacentStates):
        edge_cost(s, s, params)
    with pytest.raises(NotAdjacentStates):
        edge_cost(s, s.with_cells((2, 11)), params)
    with pytest.raises(NotAdjacentStates):
        edge_cost(s, s.with_cells((7, 12)), params)


def test_c_min():
    assert c_min(CostParams(beta_long=0.6, beta_lc=0.9)) == 0.6
    assert c_min(CostParams()) == 1.0


def test_weights_are_bounded():
    with pytest.raises(ValueError):
        CostParams(beta_long=0.0)
    with pytest.raises(ValueError):
        CostParams(beta_lc=1.5)
