# 인스턴스 / 목표 / 경로 파일(YAML)을 라이브러리 객체로 변환하고 다시 직렬화합니다.
# 위치 행 표기("C 0 0 0 E 0 D A 0 F 0 B")와 내장 고정 데이터도 여기서 읽습니다.

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.loader import CostParams
from core.exceptions import ParseError
from core.search import SortingPath
from data.grid_state import ClassRegion, ClassTemplate, GridSpec, Move, PlatoonState, Vehicle
from strategy.heuristics import GoalMode, GoalSpec, goal_state_from_targets

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
VACANT_TOKENS = {"0", ".", "-"}


# --- 파일 스키마 ---

class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class VehicleEntry(_Schema):
    id: str
    vclass: str = Field(default="unrestricted", alias="class")
    speed_mps: float = 0.0
    pos: int


class InstanceFile(_Schema):
    rows: int = Field(gt=0)
    cols: int = Field(gt=0)
    cell_length_m: float = Field(default=7.0, gt=0.0)
    lane_width_m: float = Field(default=3.5, gt=0.0)
    vehicles: Optional[List[VehicleEntry]] = None
    position_row: Optional[str] = None
    classes: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _one_layout(self) -> "InstanceFile":
        if (self.vehicles is None) == (self.position_row is None):
            raise ValueError("vehicles 와 position_row 중 정확히 하나가 필요합니다.")
        return self


class RegionEntry(_Schema):
    vclass: str = Field(alias="class")
    rows: List[int]
    cols: Optional[List[int]] = None
    full: bool = True


class GoalEntry(_Schema):
    paired: Optional[Dict[str, int]] = None
    row: Optional[str] = None
    weight: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _one_form(self) -> "GoalEntry":
        if (self.paired is None) == (self.row is None):
            raise ValueError("paired 와 row 중 정확히 하나가 필요합니다.")
        return self


class TemplateEntry(_Schema):
    row_sets: List[RegionEntry] = Field(min_length=1)


class GoalFile(_Schema):
    paired: Optional[Dict[str, int]] = None
    row: Optional[str] = None
    template: Optional[TemplateEntry] = None
    goal_states: Optional[List[GoalEntry]] = None
    weight: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _one_form(self) -> "GoalFile":
        given = [x is not None for x in (self.paired, self.row, self.template, self.goal_states)]
        if sum(given) != 1:
            raise ValueError("paired, row, template, goal_states 중 정확히 하나가 필요합니다.")
        return self


class MoveEntry(_Schema):
    vehicle: str
    from_cell: int = Field(alias="from")
    to_cell: int = Field(alias="to")


class PathFile(_Schema):
    instance: InstanceFile
    moves: List[MoveEntry] = Field(default_factory=list)
    total_cost: Optional[float] = None
    chosen_goal: int = 0
    goal: Optional[GoalFile] = None


# --- YAML 공통 처리 ---

def _line_of(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """pydantic 오류 위치(loc)를 YAML 노드의 줄 번호(1부터)로 변환"""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = node.start_mark.line + 1 if node is not None else None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for key, value in node.value:
                if key.value == part:
                    nxt = value
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            nxt = node.value[part]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def _load_yaml(text: str, source: str) -> Any:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ParseError(f"{source}: YAML 형식 오류", line=mark.line + 1 if mark else None) from e
    if not isinstance(data, dict):
        raise ParseError(f"{source}: 최상위 값은 매핑이어야 합니다.", line=1)
    return data


def _validate(model: type, data: Any, text: str, source: str, prefix: Tuple[str, ...] = ()):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        loc = prefix + tuple(err["loc"])
        field = ".".join(map(str, loc)) or None
        raise ParseError(f"{source}: {err['msg']}", line=_line_of(text, loc), field=field) from None


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except FileNotFoundError:
        raise ParseError(f"파일을 찾을 수 없습니다: {path}") from None


# --- 위치 행 표기 ---

def parse_position_row(text: str, n_cells: Optional[int] = None) -> Dict[str, int]:
    """'C 0 0 0 E ...' -> {'C': 1, 'E': 5, ...}. 0 / . / - 는 빈 셀"""
    tokens = text.split()
    if n_cells is not None and len(tokens) != n_cells:
        raise ParseError(f"위치 행의 셀 수 {len(tokens)}가 격자 셀 수 {n_cells}와 다릅니다: '{text}'")
    positions: Dict[str, int] = {}
    for cell, tok in enumerate(tokens, start=1):
        if tok in VACANT_TOKENS:
            continue
        if tok in positions:
            raise ParseError(f"위치 행에 차량 '{tok}'이 두 번 나옵니다: '{text}'")
        positions[tok] = cell
    return positions


def format_position_row(state: PlatoonState) -> str:
    occ = state.occupancy
    return " ".join(occ.get(c, "0") for c in range(1, state.spec.n_cells + 1))


# --- 인스턴스 ---

def instance_from_model(model: InstanceFile, warn: bool = True) -> PlatoonState:
    spec = GridSpec(model.rows, model.cols, model.cell_length_m, model.lane_width_m)
    if model.vehicles is not None:
        vehicles = [Vehicle(v.id, v.vclass, v.speed_mps) for v in model.vehicles]
        positions = {v.id: v.pos for v in model.vehicles}
    else:
        positions = parse_position_row(model.position_row, spec.n_cells)
        vehicles = [Vehicle(vid, model.classes.get(vid, "unrestricted")) for vid in positions]
    return PlatoonState.build(spec, vehicles, positions, warn=warn)


def parse_instance(text: str, source: str = "<instance>") -> PlatoonState:
    data = _load_yaml(text, source)
    return instance_from_model(_validate(InstanceFile, data, text, source))


def load_instance(path: str) -> PlatoonState:
    return parse_instance(_read(path), path)


def instance_to_dict(state: PlatoonState) -> Dict[str, Any]:
    spec = state.spec
    return {
        "rows": spec.rows,
        "cols": spec.cols,
        "cell_length_m": spec.cell_length,
        "lane_width_m": spec.lane_width,
        "vehicles": [
            {"id": vid, "class": vc, "speed_mps": float(v), "pos": cell}
            for vid, vc, v, cell in zip(state.ids, state.classes, state.speeds, state.cells)
        ],
    }


# --- 목표 ---

def _state_from_row(initial: PlatoonState, row: str) -> PlatoonState:
    return goal_state_from_targets(initial, _targets(initial, parse_position_row(row, initial.spec.n_cells)))


def _targets(initial: PlatoonState, targets: Mapping[str, int]) -> Dict[str, int]:
    unknown = sorted(set(targets) - set(initial.ids))
    missing = sorted(set(initial.ids) - set(targets))
    if unknown or missing:
        raise ParseError(f"목표의 차량 집합이 인스턴스와 다릅니다 (없음: {missing}, 모름: {unknown})")
    return dict(targets)


def goal_from_model(model: GoalFile, initial: PlatoonState) -> GoalSpec:
    if model.paired is not None:
        return GoalSpec.paired(initial, _targets(initial, model.paired), model.weight)
    if model.row is not None:
        return GoalSpec.from_states([_state_from_row(initial, model.row)], [model.weight])
    if model.template is not None:
        template = ClassTemplate(tuple(
            ClassRegion(r.vclass, tuple(r.rows), tuple(r.cols) if r.cols else None, r.full)
            for r in model.template.row_sets
        ))
        return GoalSpec.from_template(initial, template, model.weight)
    states, weights = [], []
    for entry in model.goal_states:
        if entry.paired is not None:
            states.append(goal_state_from_targets(initial, _targets(initial, entry.paired)))
        else:
            states.append(_state_from_row(initial, entry.row))
        weights.append(entry.weight)
    return GoalSpec.from_states(states, weights)


def parse_goal(text: str, initial: PlatoonState, source: str = "<goal>") -> GoalSpec:
    data = _load_yaml(text, source)
    return goal_from_model(_validate(GoalFile, data, text, source), initial)


def load_goal(path: str, initial: PlatoonState) -> GoalSpec:
    return parse_goal(_read(path), initial, path)


def load_goals(paths: Sequence[str], initial: PlatoonState) -> GoalSpec:
    """여러 목표 파일을 하나의 목표 집합으로 합칩니다."""
    specs = [load_goal(p, initial) for p in paths]
    return specs[0] if len(specs) == 1 else GoalSpec.union(specs)


def goal_to_dict(goals: GoalSpec) -> Dict[str, Any]:
    if len(goals) == 1 and goals.mode is GoalMode.PAIRED:
        return {"paired": goals.goal_states[0].positions, "weight": goals.preference_weights[0]}
    return {
        "goal_states": [
            {"row": format_position_row(g), "weight": w}
            for g, w in zip(goals.goal_states, goals.preference_weights)
        ]
    }


# --- 경로 ---

def parse_path(text: str, params: CostParams, source: str = "<path>") -> SortingPath:
    data = _load_yaml(text, source)
    model: PathFile = _validate(PathFile, data, text, source)
    initial = instance_from_model(model.instance, warn=False)
    moves = []
    for i, entry in enumerate(model.moves):
        kind = initial.spec.classify(entry.from_cell, entry.to_cell)
        if kind is None:
            raise ParseError(f"{source}: 인접하지 않은 이동 {entry.vehicle}:{entry.from_cell}->{entry.to_cell}",
                             line=_line_of(text, ("moves", i)), field=f"moves.{i}")
        moves.append(Move(entry.vehicle, entry.from_cell, entry.to_cell, kind))
    if abs(params.cell_length - initial.spec.cell_length) > 1e-12:
        params = params.model_copy(update={"cell_length": initial.spec.cell_length})
    path = SortingPath.from_moves(initial, moves, params, model.chosen_goal)
    if model.total_cost is not None and abs(model.total_cost - path.total_cost) > 1e-9:
        logger.warning(f"⚠️ {source}: 기록된 비용 {model.total_cost}과 재계산한 비용 {path.total_cost}이 다릅니다.")
    return path


def load_path(path: str, params: CostParams) -> SortingPath:
    return parse_path(_read(path), params, path)


def path_to_dict(path: SortingPath) -> Dict[str, Any]:
    return {
        "instance": instance_to_dict(path.initial),
        "moves": [{"vehicle": m.vehicle, "from": m.from_cell, "to": m.to_cell} for m in path.moves],
        "total_cost": float(path.total_cost),
        "chosen_goal": path.chosen_goal,
    }


def dump_yaml(data: Mapping[str, Any], dest: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(dest)), exist_ok=True)
    with open(dest, "w", encoding="utf-8") as f:
        yaml.safe_dump(dict(data), f, sort_keys=False, allow_unicode=True)


# --- 내장 고정 데이터 ---

@dataclass(frozen=True)
class ReferenceExample:
    initial: PlatoonState
    goal: GoalSpec
    reference: SortingPath


@dataclass(frozen=True)
class SampleList:
    initials: Dict[int, PlatoonState]
    goal_rows: Dict[str, str]

    def goal(self, sample: int, *names: str) -> GoalSpec:
        """sample 초기 상태 기준 목표 집합 (names 미지정 시 goal1)"""
        initial = self.initials[sample]
        names = names or ("goal1",)
        specs = [GoalSpec.from_states([_state_from_row(initial, self.goal_rows[n])]) for n in names]
        return specs[0] if len(specs) == 1 else GoalSpec.union(specs)


def load_reference(params: Optional[CostParams] = None) -> ReferenceExample:
    source = os.path.join(FIXTURE_DIR, "reference.yaml")
    text = _read(source)
    data = _load_yaml(text, source)
    model: PathFile = _validate(PathFile, data, text, source)
    reference = parse_path(text, params or CostParams(), source)
    goal = goal_from_model(model.goal, reference.initial)
    return ReferenceExample(reference.initial, goal, reference)


@lru_cache(maxsize=1)
def load_samples() -> SampleList:
    source = os.path.join(FIXTURE_DIR, "samples.yaml")
    data = _load_yaml(_read(source), source)
    try:
        rows, cols = int(data["rows"]), int(data["cols"])
        classes: Dict[str, str] = data["classes"]
        goal_rows = {str(k): str(v) for k, v in data["goals"].items()}
        raw_samples = data["samples"]
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{source}: 샘플 목록 형식 오류 ({e})") from None

    initials = {}
    for sid, row in raw_samples.items():
        model = InstanceFile(rows=rows, cols=cols, position_row=row, classes=classes)
        initials[int(sid)] = instance_from_model(model, warn=False)
    logger.debug(f"📦 샘플 {len(initials)}개 로드")
    return SampleList(initials, goal_rows)
