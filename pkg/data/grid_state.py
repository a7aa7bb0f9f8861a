# 이산화된 플래툰 격자(셀, 차량, 점유, 상대 속도)를 표현하고
# 합법적 단일 차량 이동 생성, 이동 적용, 상태 해시를 담당합니다.

import hashlib
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from config.loader import CostParams
from core.exceptions import IllegalMove, InfeasibleTemplate, InvariantViolation
from strategy.cost_model import speed_update

SPEED_DIGITS = 2  # 노드 식별 시 속도 양자화 단위 0.01 m/s


class MoveKind(str, Enum):
    HOLD = "hold"
    LONGITUDINAL = "longitudinal"
    LATERAL = "lateral"


@dataclass(frozen=True, slots=True)
class GridSpec:
    """
    rows x cols 격자. 셀 번호는 1..rows*cols 행 우선(row-major)이며
    1행이 정지선에 가장 가까운 하류(앞쪽) 행입니다.
    """
    rows: int
    cols: int
    cell_length: float = 7.0
    lane_width: float = 3.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvariantViolation(f"격자 크기는 1 이상이어야 합니다: {self.rows}x{self.cols}")
        if self.cell_length <= 0:
            raise InvariantViolation(f"셀 길이는 양수여야 합니다: {self.cell_length}")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def contains(self, cell: int) -> bool:
        return 1 <= cell <= self.n_cells

    def row_col(self, cell: int) -> Tuple[int, int]:
        return (cell - 1) // self.cols + 1, (cell - 1) % self.cols + 1

    def cell_at(self, row: int, col: int) -> int:
        if not (1 <= row <= self.rows and 1 <= col <= self.cols):
            raise InvariantViolation(f"격자 밖 좌표: row={row}, col={col}")
        return (row - 1) * self.cols + col

    def longitudinal(self, cell: int) -> int:
        """x[1]: 앞쪽(1행)으로 갈수록 커지는 종방향 좌표"""
        return self.rows - self.row_col(cell)[0]

    def neighbors(self, cell: int) -> Tuple[Tuple[int, "MoveKind"], ...]:
        """상/하/좌/우 순서의 4-인접 셀"""
        return _neighbor_table(self)[cell]

    def classify(self, from_cell: int, to_cell: int) -> Optional[MoveKind]:
        """두 셀 사이 이동 종류. 동일/4-인접이 아니면 None"""
        if from_cell == to_cell:
            return MoveKind.HOLD
        r1, c1 = self.row_col(from_cell)
        r2, c2 = self.row_col(to_cell)
        if c1 == c2 and abs(r1 - r2) == 1:
            return MoveKind.LONGITUDINAL
        if r1 == r2 and abs(c1 - c2) == 1:
            return MoveKind.LATERAL
        return None


@lru_cache(maxsize=64)
def _neighbor_table(spec: GridSpec) -> Dict[int, Tuple[Tuple[int, MoveKind], ...]]:
    table = {}
    for cell in range(1, spec.n_cells + 1):
        row, col = spec.row_col(cell)
        nbrs = []
        if row > 1:
            nbrs.append((cell - spec.cols, MoveKind.LONGITUDINAL))
        if row < spec.rows:
            nbrs.append((cell + spec.cols, MoveKind.LONGITUDINAL))
        if col > 1:
            nbrs.append((cell - 1, MoveKind.LATERAL))
        if col < spec.cols:
            nbrs.append((cell + 1, MoveKind.LATERAL))
        table[cell] = tuple(nbrs)
    return table


@dataclass(frozen=True, slots=True)
class Vehicle:
    id: str
    vclass: str = "unrestricted"
    rel_speed: float = 0.0


@dataclass(frozen=True, slots=True)
class Move:
    vehicle: str
    from_cell: int
    to_cell: int
    kind: MoveKind

    def key(self) -> Tuple[str, int, int]:
        return self.vehicle, self.from_cell, self.to_cell

    def __str__(self) -> str:
        return f"{self.vehicle}:{self.from_cell}->{self.to_cell}"


def quantize_speed(v: float) -> float:
    # -0.0 정규화 포함
    return round(float(v), SPEED_DIGITS) + 0.0


class PlatoonState:
    """
    격자 점유 상태 (순열 행렬 A, 상태 S_k).
    차량은 ID 오름차순으로 정렬되어 cells/speeds 튜플의 같은 인덱스에 대응합니다.
    생성 후 변경 불가한 값 객체입니다.
    """
    __slots__ = ("spec", "ids", "classes", "cells", "speeds", "_hash")

    def __init__(self, spec: GridSpec, ids: Tuple[str, ...], classes: Tuple[str, ...],
                 cells: Tuple[int, ...], speeds: Tuple[float, ...]):
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "_hash", hash((cells, speeds)))

    @classmethod
    def build(cls, spec: GridSpec, vehicles: Sequence[Vehicle], positions: Mapping[str, int],
              warn: bool = True) -> "PlatoonState":
        """불변식을 검사하며 상태를 생성합니다."""
        ids = [v.id for v in vehicles]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise InvariantViolation(f"중복된 차량 ID: {dupes}")
        missing = [i for i in ids if i not in positions]
        if missing:
            raise InvariantViolation(f"위치가 없는 차량: {missing}")
        extra = sorted(set(positions) - set(ids))
        if extra:
            raise InvariantViolation(f"정의되지 않은 차량의 위치: {extra}")

        seen: Dict[int, str] = {}
        for vid in ids:
            cell = positions[vid]
            if not spec.contains(cell):
                raise InvariantViolation(f"차량 {vid}의 셀 {cell}이 격자(1..{spec.n_cells}) 밖입니다.")
            if cell in seen:
                raise InvariantViolation(f"셀 {cell}에 차량 두 대({seen[cell]}, {vid})가 배정되었습니다.")
            seen[cell] = vid

        ordered = sorted(vehicles, key=lambda v: v.id)
        state = cls(
            spec,
            tuple(v.id for v in ordered),
            tuple(v.vclass for v in ordered),
            tuple(positions[v.id] for v in ordered),
            tuple(quantize_speed(v.rel_speed) for v in ordered),
        )
        if warn and spec.n_cells - len(ordered) < len(ordered):
            logger.warning(
                f"⚠️ 빈 셀({spec.n_cells - len(ordered)})이 차량 수({len(ordered)})보다 적습니다. "
                f"버퍼 행 추가를 고려하세요."
            )
        return state

    def __setattr__(self, name, value):
        raise AttributeError("PlatoonState는 변경할 수 없습니다.")

    def __reduce__(self):
        return (PlatoonState, (self.spec, self.ids, self.classes, self.cells, self.speeds))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlatoonState):
            return NotImplemented
        return (self._hash == other._hash and self.cells == other.cells and self.speeds == other.speeds
                and self.ids == other.ids and self.spec == other.spec)

    def __repr__(self) -> str:
        body = " ".join(f"{vid}@{cell}" for vid, cell in zip(self.ids, self.cells))
        return f"PlatoonState({self.spec.rows}x{self.spec.cols}: {body})"

    # --- 조회용 ---
    @property
    def n_vehicles(self) -> int:
        return len(self.ids)

    @property
    def vehicles(self) -> Tuple[Vehicle, ...]:
        return tuple(Vehicle(i, c, s) for i, c, s in zip(self.ids, self.classes, self.speeds))

    @property
    def occupancy(self) -> Dict[int, str]:
        return dict(zip(self.cells, self.ids))

    @property
    def positions(self) -> Dict[str, int]:
        return dict(zip(self.ids, self.cells))

    @property
    def speed_map(self) -> Dict[str, float]:
        return dict(zip(self.ids, self.speeds))

    @property
    def vacant_cells(self) -> List[int]:
        taken = set(self.cells)
        return [c for c in range(1, self.spec.n_cells + 1) if c not in taken]

    def index_of(self, vehicle_id: str) -> int:
        try:
            return self.ids.index(vehicle_id)
        except ValueError:
            raise IllegalMove(f"상태에 없는 차량: {vehicle_id}") from None

    def cell_of(self, vehicle_id: str) -> int:
        return self.cells[self.index_of(vehicle_id)]

    def class_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for c in self.classes:
            counts[c] = counts.get(c, 0) + 1
        return counts

    def with_cells(self, cells: Tuple[int, ...]) -> "PlatoonState":
        return PlatoonState(self.spec, self.ids, self.classes, cells, self.speeds)

    def at_rest(self) -> "PlatoonState":
        zeros = (0.0,) * len(self.ids)
        return PlatoonState(self.spec, self.ids, self.classes, self.cells, zeros)


# --- 이동 생성 및 적용 ---

def legal_moves(state: PlatoonState) -> List[Move]:
    """비어 있는 4-인접 셀로의 모든 단일 차량 이동 (차량 ID 오름차순, 상/하/좌/우 순)"""
    occupied = set(state.cells)
    spec = state.spec
    moves = []
    for vid, cell in zip(state.ids, state.cells):
        for nb, kind in spec.neighbors(cell):
            if nb not in occupied:
                moves.append(Move(vid, cell, nb, kind))
    return moves


def relax_speeds(speeds: Tuple[float, ...], params: CostParams) -> Tuple[float, ...]:
    """모든 차량(이동/유지 공통)의 속도를 Eq.8 규칙으로 순항 속도 쪽으로 갱신"""
    if not any(speeds):
        return speeds
    return tuple(quantize_speed(speed_update(v, params)) for v in speeds)


def advance(state: PlatoonState, index: int, to_cell: int, params: CostParams) -> PlatoonState:
    """검증 없이 index 차량을 to_cell로 옮긴 후속 상태 (탐색 내부용)"""
    cells = state.cells
    if cells[index] != to_cell:
        cells = cells[:index] + (to_cell,) + cells[index + 1:]
    return PlatoonState(state.spec, state.ids, state.classes, cells, relax_speeds(state.speeds, params))


def apply_move(state: PlatoonState, move: Move, params: CostParams) -> PlatoonState:
    """이동을 적용한 새 상태를 반환합니다. 원래 상태는 변하지 않습니다."""
    index = state.index_of(move.vehicle)
    if state.cells[index] != move.from_cell:
        raise IllegalMove(f"{move}: 차량 {move.vehicle}은 셀 {state.cells[index]}에 있습니다.")
    if not state.spec.contains(move.to_cell):
        raise IllegalMove(f"{move}: 대상 셀이 격자 밖입니다.")
    kind = state.spec.classify(move.from_cell, move.to_cell)
    if kind is None:
        raise IllegalMove(f"{move}: 인접하지 않은 셀로의 이동입니다.")
    if kind is not MoveKind.HOLD and move.to_cell in state.cells:
        raise IllegalMove(f"{move}: 대상 셀 {move.to_cell}이 점유되어 있습니다.")
    return advance(state, index, move.to_cell, params)


def state_key(state: PlatoonState) -> str:
    """점유 + 양자화 속도에 대한 정규 해시 키"""
    canon = f"{state.spec.rows}x{state.spec.cols};" + ";".join(
        f"{vid}@{cell}:{speed:.{SPEED_DIGITS}f}" for vid, cell, speed in zip(state.ids, state.cells, state.speeds)
    )
    return hashlib.blake2b(canon.encode("utf-8"), digest_size=16).hexdigest()


def state_space_size(spec: GridSpec, n_vehicles: int) -> int:
    """서로 다른 순열 행렬 수 P(rows*cols, N)"""
    return math.perm(spec.n_cells, n_vehicles)


def diff_move(before: PlatoonState, after: PlatoonState) -> Optional[Move]:
    """두 상태가 정확히 한 차량의 인접 이동만큼 다르면 그 이동을, 아니면 None"""
    if before.ids != after.ids or before.spec != after.spec:
        return None
    changed = [i for i, (a, b) in enumerate(zip(before.cells, after.cells)) if a != b]
    if len(changed) != 1:
        return None
    i = changed[0]
    kind = before.spec.classify(before.cells[i], after.cells[i])
    if kind is None or kind is MoveKind.HOLD or after.cells[i] in before.cells:
        return None
    return Move(before.ids[i], before.cells[i], after.cells[i], kind)


# --- 다중 목표 상태 템플릿 ---

@dataclass(frozen=True, slots=True)
class ClassRegion:
    """한 클래스가 차지할 영역 (행 집합 x 차로 집합). full이면 영역을 정확히 채워야 함"""
    vclass: str
    rows: Tuple[int, ...]
    cols: Optional[Tuple[int, ...]] = None
    full: bool = True

    def cells(self, spec: GridSpec) -> List[int]:
        cols = self.cols or tuple(range(1, spec.cols + 1))
        try:
            return sorted(spec.cell_at(r, c) for r in self.rows for c in cols)
        except InvariantViolation as e:
            raise InfeasibleTemplate(f"클래스 '{self.vclass}' 영역이 격자를 벗어납니다: {e}") from None


@dataclass(frozen=True, slots=True)
class ClassTemplate:
    regions: Tuple[ClassRegion, ...]


def enumerate_goal_set(state: PlatoonState, template: ClassTemplate) -> List[PlatoonState]:
    """템플릿과 일치하는 모든 차량 순열 (클래스 내 자유 배치, 상대 속도 0)"""
    spec = state.spec
    counts = state.class_counts()
    region_cells: List[List[int]] = []
    used: Dict[int, str] = {}
    seen_classes = set()
    for region in template.regions:
        if region.vclass in seen_classes:
            raise InfeasibleTemplate(f"클래스 '{region.vclass}'가 여러 영역에 지정되었습니다.")
        seen_classes.add(region.vclass)
        cells = region.cells(spec)
        for c in cells:
            if c in used:
                raise InfeasibleTemplate(f"셀 {c}이 '{used[c]}'와 '{region.vclass}' 영역에 중복됩니다.")
            used[c] = region.vclass
        k = counts.get(region.vclass, 0)
        if region.full and k != len(cells):
            raise InfeasibleTemplate(
                f"클래스 '{region.vclass}' 차량 {k}대로 {len(cells)}개 셀을 채울 수 없습니다."
            )
        if k > len(cells):
            raise InfeasibleTemplate(f"클래스 '{region.vclass}' 차량 {k}대가 {len(cells)}개 셀에 들어가지 않습니다.")
        region_cells.append(cells)

    uncovered = sorted(set(counts) - seen_classes)
    if uncovered:
        raise InfeasibleTemplate(f"템플릿에 영역이 없는 클래스: {uncovered}")

    members = [[vid for vid, vc in zip(state.ids, state.classes) if vc == region.vclass]
               for region in template.regions]
    per_region = [list(itertools.permutations(cells, len(vids))) for cells, vids in zip(region_cells, members)]

    goals = []
    for combo in itertools.product(*per_region):
        positions = {}
        for vids, placement in zip(members, combo):
            positions.update(zip(vids, placement))
        cells = tuple(positions[vid] for vid in state.ids)
        goals.append(PlatoonState(spec, state.ids, state.classes, cells, (0.0,) * len(state.ids)))
    logger.debug(f"🎯 템플릿 목표 상태 {len(goals)}개 생성")
    return goals
