import networkx as nx
import numpy as np
import pytest

from config.loader import CostParams
from core.exceptions import BoundTooSmall, CyclicPrecedence
from core.schedule import (
    MoveRecord, Schedule, ScheduleMode, brute_force_schedule, build_precedence, earliest_schedule,
    extract_moves, precedence_edges, replay, schedule_path, validate_schedule,
)
from data.grid_state import GridSpec, Move, MoveKind, PlatoonState, Vehicle, apply_move
from tests.helpers import random_problem, random_walk

MODES = [ScheduleMode.CONSERVATIVE, ScheduleMode.AGGRESSIVE]


def final_after(initial, moves):
    params = CostParams()
    state = initial
    for m in moves:
        state = apply_move(state, m, params)
    return state


def test_extract_moves_numbers_the_path(example):
    records = extract_moves(example.reference)
    assert len(records) == 13
    assert records[0] == MoveRecord("F", 5, 8, 1)
    assert records[-1] == MoveRecord("E", 11, 8, 13)


def test_holds_are_not_scheduled():
    moves = [Move("A", 1, 1, MoveKind.HOLD), Move("A", 1, 2, MoveKind.LATERAL)]
    assert extract_moves(moves) == [MoveRecord("A", 1, 2, 1)]


def test_reference_precedence_edges(example):
    dag = build_precedence(extract_moves(example.reference), ScheduleMode.AGGRESSIVE)
    edges = {(e.before.seq, e.after.seq): e.strict for e in precedence_edges(dag)}
    for pair in [(1, 2), (4, 5), (3, 4), (6, 7), (7, 8), (9, 10), (2, 11), (5, 6)]:
        assert edges[pair] is False
    for pair in [(1, 4), (2, 5), (5, 8), (3, 10), (10, 13), (6, 11), (9, 12)]:
        assert edges[pair] is True
    assert dag.graph["mode"] is ScheduleMode.AGGRESSIVE


@pytest.mark.parametrize("mode,makespan", [(ScheduleMode.CONSERVATIVE, 9), (ScheduleMode.AGGRESSIVE, 4)])
def test_reference_makespan(example, mode, makespan):
    schedule = schedule_path(example.reference, mode)
    assert schedule.makespan == makespan
    report = validate_schedule(example.initial, schedule, example.reference.final)
    assert report.ok, report.violations
    assert report.final_positions == example.reference.final.positions


def test_aggressive_reference_steps(example):
    schedule = schedule_path(example.reference, ScheduleMode.AGGRESSIVE)
    steps = [[r.seq for r in step] for step in schedule.steps()]
    assert steps == [[1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11], [12, 13]]
    assert schedule.objective == sum(max(schedule.assignment[r] for r in schedule.records if r.vehicle == v)
                                     for v in "ABCDEF")


def test_schedule_frame_columns(example):
    frame = schedule_path(example.reference, ScheduleMode.CONSERVATIVE).to_frame()
    assert list(frame.columns) == ["move", "vehicle", "from", "to", "step"]
    assert frame["step"].max() == 9
    assert frame["move"].tolist() == list(range(1, 14))


def test_empty_and_single_move_paths():
    assert schedule_path([], ScheduleMode.AGGRESSIVE).makespan == 0
    single = schedule_path([Move("A", 2, 1, MoveKind.LONGITUDINAL)], ScheduleMode.CONSERVATIVE)
    assert single.makespan == 1
    assert single.objective == 1


def test_swap_in_one_step_is_rejected():
    grid = GridSpec(1, 2)
    s = PlatoonState.build(grid, [Vehicle("A"), Vehicle("B")], {"A": 1, "B": 2}, warn=False)
    swap = Schedule({MoveRecord("A", 1, 2, 1): 1, MoveRecord("B", 2, 1, 2): 1}, ScheduleMode.AGGRESSIVE)
    report = validate_schedule(s, swap)
    assert not report.ok
    assert any(set(v.vehicles) == {"A", "B"} for v in report.violations)


@pytest.mark.parametrize("mode", MODES)
def test_two_vehicles_into_one_vacant_cell_is_rejected(mode):
    grid = GridSpec(1, 3)
    s = PlatoonState.build(grid, [Vehicle("A"), Vehicle("B")], {"A": 1, "B": 3}, warn=False)
    merge = Schedule({MoveRecord("A", 1, 2, 1): 1, MoveRecord("B", 3, 2, 2): 1}, mode)
    report = validate_schedule(s, merge)
    assert not report.ok
    assert any(v.cell == 2 and set(v.vehicles) == {"A", "B"} for v in report.violations)


def test_chain_is_allowed_only_when_aggressive():
    grid = GridSpec(1, 3)
    s = PlatoonState.build(grid, [Vehicle("A"), Vehicle("B")], {"A": 1, "B": 2})
    moves = {MoveRecord("B", 2, 3, 1): 1, MoveRecord("A", 1, 2, 2): 1}
    assert validate_schedule(s, Schedule(moves, ScheduleMode.AGGRESSIVE)).ok
    report = validate_schedule(s, Schedule(moves, ScheduleMode.CONSERVATIVE))
    assert not report.ok
    assert report.violations[0].cell == 2


def test_wrong_start_cell_is_reported():
    grid = GridSpec(2, 2)
    s = PlatoonState.build(grid, [Vehicle("A")], {"A": 1})
    report = validate_schedule(s, Schedule({MoveRecord("A", 2, 4, 1): 1}, ScheduleMode.CONSERVATIVE))
    assert not report.ok


def test_cyclic_precedence_is_rejected():
    a, b = MoveRecord("A", 1, 2, 1), MoveRecord("B", 2, 1, 2)
    dag = nx.DiGraph(mode=ScheduleMode.CONSERVATIVE)
    dag.add_edge(a, b, strict=True)
    dag.add_edge(b, a, strict=True)
    with pytest.raises(CyclicPrecedence):
        earliest_schedule(dag)


def test_bound_too_small(example):
    records = extract_moves(example.reference)[:2]
    with pytest.raises(BoundTooSmall):
        brute_force_schedule(records, ScheduleMode.CONSERVATIVE, step_bound=1)
    assert brute_force_schedule(records, ScheduleMode.AGGRESSIVE, step_bound=1).makespan == 1


@pytest.mark.parametrize("mode", MODES)
def test_reference_prefixes_match_brute_force(example, mode):
    records = extract_moves(example.reference)
    for k in range(1, 9):
        prefix = records[:k]
        earliest = earliest_schedule(build_precedence(prefix, mode))
        best = brute_force_schedule(prefix, mode)
        assert (earliest.objective, earliest.makespan) == (best.objective, best.makespan)


@pytest.mark.parametrize("mode", MODES)
def test_earliest_schedule_is_optimal_on_random_walks(mode):
    rng = np.random.default_rng(17)
    for _ in range(100):
        initial, _ = random_problem(rng, max_vehicles=4, max_rows=4)
        moves = random_walk(rng, initial, int(rng.integers(1, 9)))
        records = extract_moves(moves)
        earliest = earliest_schedule(build_precedence(records, mode))
        best = brute_force_schedule(records, mode)
        assert (earliest.objective, earliest.makespan) == (best.objective, best.makespan)

        expected = final_after(initial, moves)
        for schedule in (earliest, best):
            report = validate_schedule(initial, schedule, expected)
            assert report.ok, report.violations


def test_aggressive_never_takes_longer():
    rng = np.random.default_rng(23)
    for _ in range(60):
        initial, _ = random_problem(rng)
        moves = random_walk(rng, initial, 12)
        conservative = schedule_path(moves, ScheduleMode.CONSERVATIVE)
        aggressive = schedule_path(moves, ScheduleMode.AGGRESSIVE)
        assert aggressive.makespan <= conservative.makespan <= len(moves)
        assert aggressive.objective <= conservative.objective


@pytest.mark.parametrize("mode", MODES)
def test_replay_keeps_every_vehicle(example, mode):
    schedule = schedule_path(example.reference, mode)
    frames = replay(example.initial, schedule)
    assert len(frames) == schedule.makespan + 1
    for frame in frames:
        assert len(set(frame.cells)) == example.initial.n_vehicles
    assert frames[-1].cells == example.reference.final.cells
