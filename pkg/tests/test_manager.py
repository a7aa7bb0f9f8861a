import textwrap

import pytest
import yaml

from config.loader import CostParams
from core.exceptions import InfeasibleTemplate, InvariantViolation, ParseError
from data.manager import (
    dump_yaml, format_position_row, goal_to_dict, instance_to_dict, load_goals, load_path, parse_goal,
    parse_instance, parse_path, parse_position_row, path_to_dict,
)
from strategy.heuristics import GoalMode

INSTANCE = textwrap.dedent("""\
    rows: 4
    cols: 3
    vehicles:
      - {id: A, class: left, speed_mps: 0.0, pos: 7}
      - {id: B, class: left, pos: 11}
      - {id: C, class: left, pos: 4}
      - {id: D, class: through, pos: 6}
      - {id: E, class: through, pos: 9}
      - {id: F, class: through, pos: 5}
""")


# --- 위치 행 ---

def test_position_row():
    assert parse_position_row("B 0 0 A C F 0 D 0 0 E 0", 12) == {"B": 1, "A": 4, "C": 5, "F": 6, "D": 8, "E": 11}
    assert parse_position_row(". A - B") == {"A": 2, "B": 4}


@pytest.mark.parametrize("row", ["A 0 0", "A 0 0 0 A 0 0 0 0 0 0 0"])
def test_bad_position_rows(row):
    with pytest.raises(ParseError):
        parse_position_row(row, 12)


def test_sample_list(samples):
    assert sorted(samples.initials) == list(range(1, 31))
    assert all(s.n_vehicles == 6 for s in samples.initials.values())
    assert format_position_row(samples.initials[22]) == "B 0 0 A C F 0 D 0 0 E 0"
    assert samples.initials[22].classes == ("left", "left", "left", "through", "through", "through")


# --- 인스턴스 ---

def test_parse_instance():
    state = parse_instance(INSTANCE)
    assert state.spec.rows == 4 and state.spec.cols == 3
    assert state.cell_of("B") == 11
    assert dict(zip(state.ids, state.classes))["E"] == "through"


def test_instance_position_row_form():
    state = parse_instance("rows: 2\ncols: 2\nposition_row: 'A 0 B 0'\nclasses: {A: left}\n")
    assert state.positions == {"A": 1, "B": 3}
    assert state.classes == ("left", "unrestricted")


def test_instance_round_trip():
    state = parse_instance(INSTANCE)
    assert parse_instance(yaml.safe_dump(instance_to_dict(state))) == state


def test_parse_error_reports_line_and_field():
    bad = INSTANCE.replace("pos: 11", "pos: x")
    with pytest.raises(ParseError) as exc:
        parse_instance(bad, "bad.yaml")
    assert exc.value.line == 5
    assert exc.value.field == "vehicles.1.pos"
    assert "bad.yaml" in str(exc.value)


@pytest.mark.parametrize("text", [
    "rows: 4\ncols: 3\n",                                     # 차량 정보 없음
    "rows: 4\ncols: 3\nposition_row: 'A'\nvehicles: []\n",     # 두 형식 동시 지정
    "rows: 4\ncols: 3\nvehicles: [{id: A, pos: 1, lane: 2}]\n",  # 알 수 없는 필드
    "rows: [4\n",                                               # YAML 형식 오류
    "- 1\n- 2\n",                                               # 최상위가 매핑이 아님
])
def test_malformed_instances(text):
    with pytest.raises(ParseError):
        parse_instance(text)


def test_shared_cell_is_an_invariant_violation():
    with pytest.raises(InvariantViolation):
        parse_instance(INSTANCE.replace("pos: 11", "pos: 7"))


# --- 목표 ---

def test_paired_goal():
    state = parse_instance(INSTANCE)
    goals = parse_goal("paired: {A: 4, B: 5, C: 6, D: 7, E: 8, F: 9}\n", state)
    assert goals.mode is GoalMode.PAIRED
    assert goals.goal_states[0].positions == {"A": 4, "B": 5, "C": 6, "D": 7, "E": 8, "F": 9}
    assert goal_to_dict(goals)["paired"] == goals.goal_states[0].positions


def test_row_goal_and_unknown_vehicle():
    state = parse_instance(INSTANCE)
    goals = parse_goal("row: '0 0 0 A B C D E F 0 0 0'\nweight: 1.5\n", state)
    assert goals.goal_states[0].cell_of("F") == 9
    assert goals.preference_weights == (1.5,)
    with pytest.raises(ParseError):
        parse_goal("paired: {A: 4, B: 5, C: 6, D: 7, E: 8, Z: 9}\n", state)


def test_template_goal():
    state = parse_instance(INSTANCE)
    text = textwrap.dedent("""\
        template:
          row_sets:
            - {class: left, rows: [2]}
            - {class: through, rows: [3]}
    """)
    goals = parse_goal(text, state)
    assert goals.mode is GoalMode.UNPAIRED
    assert len(goals) == 36


def test_infeasible_template_goal():
    state = parse_instance(INSTANCE)
    text = "template:\n  row_sets:\n    - {class: left, rows: [2, 3]}\n    - {class: through, rows: [4]}\n"
    with pytest.raises(InfeasibleTemplate):
        parse_goal(text, state)


def test_explicit_goal_states_with_weights():
    state = parse_instance(INSTANCE)
    text = textwrap.dedent("""\
        goal_states:
          - {paired: {A: 4, B: 5, C: 6, D: 7, E: 8, F: 9}}
          - {row: '0 0 0 D E F A B C 0 0 0', weight: 2.5}
    """)
    goals = parse_goal(text, state)
    assert len(goals) == 2
    assert goals.preference_weights == (0.0, 2.5)
    assert not goals.uniform_weights
    again = parse_goal(yaml.safe_dump(goal_to_dict(goals)), state)
    assert [g.cells for g in again.goal_states] == [g.cells for g in goals.goal_states]


def test_goal_needs_exactly_one_form():
    state = parse_instance(INSTANCE)
    with pytest.raises(ParseError):
        parse_goal("weight: 1.0\n", state)
    with pytest.raises(ParseError):
        parse_goal("row: '0 0 0 A B C D E F 0 0 0'\npaired: {A: 1}\n", state)


def test_load_goals_merges_files(tmp_path):
    state = parse_instance(INSTANCE)
    g1 = tmp_path / "g1.yaml"
    g2 = tmp_path / "g2.yaml"
    g1.write_text("row: '0 0 0 A B C D E F 0 0 0'\n", encoding="utf-8")
    g2.write_text("row: '0 0 0 C B A F E D 0 0 0'\n", encoding="utf-8")
    assert len(load_goals([str(g1), str(g2)], state)) == 2
    assert len(load_goals([str(g1), str(g1)], state)) == 1


def test_missing_file_is_a_parse_error(tmp_path):
    state = parse_instance(INSTANCE)
    with pytest.raises(ParseError):
        load_goals([str(tmp_path / "nope.yaml")], state)


# --- 경로 ---

def test_reference_fixture(example):
    assert example.reference.total_cost == pytest.approx(13.0)
    assert len(example.reference.moves) == 13
    assert example.reference.final.cells == example.goal.goal_states[0].cells


def test_path_round_trip(tmp_path, example):
    dest = tmp_path / "out" / "path.yaml"
    dump_yaml(path_to_dict(example.reference), str(dest))
    again = load_path(str(dest), CostParams())
    assert again.move_key() == example.reference.move_key()
    assert again.total_cost == pytest.approx(13.0)
    assert again.initial == example.initial


def test_path_with_non_adjacent_move():
    text = "instance:\n" + textwrap.indent(INSTANCE, "  ") + "moves:\n  - {vehicle: A, from: 7, to: 9}\n"
    with pytest.raises(ParseError) as exc:
        parse_path(text, CostParams())
    assert exc.value.field == "moves.0"
    assert exc.value.line == 12
