# 단계별(한 번에 한 대) 정렬 경로를 병렬 이동 단계로 압축합니다.
# 선후 관계 DAG 를 만들고 최장 경로 레벨링으로 단계 번호를 배정하며,
# 시뮬레이션으로 스케줄을 검증합니다.

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import pandas as pd
from loguru import logger

from core.exceptions import BoundTooSmall, CyclicPrecedence
from core.search import SortingPath
from data.grid_state import Move, PlatoonState


class ScheduleMode(str, Enum):
    CONSERVATIVE = "conservative"
    AGGRESSIVE = "aggressive"


@dataclass(frozen=True)
class MoveRecord:
    vehicle: str
    from_pos: int
    to_pos: int
    seq: int  # 원래 경로에서의 순번 (1부터)

    def __str__(self) -> str:
        return f"m{self.seq}({self.vehicle}:{self.from_pos}->{self.to_pos})"


@dataclass(frozen=True)
class PrecedenceEdge:
    before: MoveRecord
    after: MoveRecord
    strict: bool


@dataclass
class Schedule:
    """이동별 단계 번호 T(x, y) = s 배정"""
    assignment: Dict[MoveRecord, int]
    mode: ScheduleMode

    @property
    def makespan(self) -> int:
        return max(self.assignment.values(), default=0)

    @property
    def objective(self) -> int:
        """차량별 마지막 이동의 단계 번호 합"""
        last: Dict[str, int] = {}
        for rec, step in self.assignment.items():
            last[rec.vehicle] = max(step, last.get(rec.vehicle, 0))
        return sum(last.values())

    @property
    def records(self) -> List[MoveRecord]:
        return sorted(self.assignment, key=lambda r: r.seq)

    def steps(self) -> List[List[MoveRecord]]:
        """단계별 이동 목록 (단계 1..makespan, 각 단계 안은 경로 순서)"""
        grouped: List[List[MoveRecord]] = [[] for _ in range(self.makespan)]
        for rec in self.records:
            grouped[self.assignment[rec] - 1].append(rec)
        return grouped

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"move": rec.seq, "vehicle": rec.vehicle, "from": rec.from_pos, "to": rec.to_pos,
             "step": self.assignment[rec]}
            for rec in self.records
        ]
        return pd.DataFrame(rows, columns=["move", "vehicle", "from", "to", "step"])


@dataclass(frozen=True)
class Violation:
    step: int
    cell: int
    vehicles: Tuple[str, ...]
    reason: str


@dataclass
class ScheduleReport:
    violations: List[Violation] = field(default_factory=list)
    final_positions: Dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def extract_moves(path: Union[SortingPath, Sequence[Move]]) -> List[MoveRecord]:
    """경로의 각 엣지를 MoveRecord 로 변환합니다. 제자리 유지는 스케줄 대상이 아닙니다."""
    moves = path.moves if isinstance(path, SortingPath) else path
    records = []
    for m in moves:
        if m.from_cell == m.to_cell:
            continue
        records.append(MoveRecord(m.vehicle, m.from_cell, m.to_cell, len(records) + 1))
    return records


def build_precedence(moves: Sequence[MoveRecord], mode: ScheduleMode) -> nx.DiGraph:
    """
    선후 관계 DAG. 엣지 속성 strict 가 True 면 step(before) < step(after), 아니면 ≤.
    (i) 같은 차량의 연속 이동은 strict
    (ii) 셀마다 경로 순서상 떠나는 이동 -> 다음에 들어오는 이동 (보수적 strict, 공격적 weak)
    """
    mode = ScheduleMode(mode)
    dag = nx.DiGraph(mode=mode)
    dag.add_nodes_from(moves)

    def link(a: MoveRecord, b: MoveRecord, strict: bool) -> None:
        if dag.has_edge(a, b):
            strict = strict or dag.edges[a, b]["strict"]
        dag.add_edge(a, b, strict=strict)

    last_by_vehicle: Dict[str, MoveRecord] = {}
    pending_departure: Dict[int, MoveRecord] = {}
    cell_strict = mode is ScheduleMode.CONSERVATIVE
    for rec in sorted(moves, key=lambda r: r.seq):
        prev = last_by_vehicle.get(rec.vehicle)
        if prev is not None:
            link(prev, rec, True)
        last_by_vehicle[rec.vehicle] = rec

        dep = pending_departure.pop(rec.to_pos, None)
        if dep is not None and dep.vehicle != rec.vehicle:
            link(dep, rec, cell_strict)
        pending_departure[rec.from_pos] = rec

    if not nx.is_directed_acyclic_graph(dag):
        raise CyclicPrecedence("선후 관계 그래프에 사이클이 있습니다.")
    return dag


def precedence_edges(dag: nx.DiGraph) -> List[PrecedenceEdge]:
    edges = [PrecedenceEdge(a, b, data["strict"]) for a, b, data in dag.edges(data=True)]
    return sorted(edges, key=lambda e: (e.before.seq, e.after.seq))


def earliest_schedule(dag: nx.DiGraph, mode: Optional[ScheduleMode] = None) -> Schedule:
    """최장 경로 레벨링: step(m) = max_pred(step(p) + [strict]), 최소 1"""
    mode = ScheduleMode(mode or dag.graph.get("mode", ScheduleMode.CONSERVATIVE))
    try:
        order = list(nx.lexicographical_topological_sort(dag, key=lambda r: r.seq))
    except nx.NetworkXUnfeasible:
        raise CyclicPrecedence("선후 관계 그래프에 사이클이 있습니다.") from None

    steps: Dict[MoveRecord, int] = {}
    for rec in order:
        s = 1
        for pred in dag.predecessors(rec):
            s = max(s, steps[pred] + (1 if dag.edges[pred, rec]["strict"] else 0))
        steps[rec] = s
    return Schedule(steps, mode)


def brute_force_schedule(moves: Sequence[MoveRecord], mode: ScheduleMode,
                         step_bound: Optional[int] = None) -> Schedule:
    """
    1..step_bound 정수 배정을 모두 탐색해 목적함수(차량별 마지막 단계 합)를 최소화합니다.
    동점이면 makespan 이 작은 쪽. 테스트용 검증기입니다.
    """
    mode = ScheduleMode(mode)
    records = sorted(moves, key=lambda r: r.seq)
    bound = len(records) if step_bound is None else step_bound
    if not records:
        return Schedule({}, mode)

    dag = build_precedence(records, mode)
    preds = {r: [(p, dag.edges[p, r]["strict"]) for p in dag.predecessors(r)] for r in records}
    final_of = {r.vehicle: r for r in records}
    is_final = {r: final_of[r.vehicle] is r for r in records}
    finals_after = [0] * (len(records) + 1)
    for i in range(len(records) - 1, -1, -1):
        finals_after[i] = finals_after[i + 1] + (1 if is_final[records[i]] else 0)

    best: List[Optional[Tuple[int, int, Dict[MoveRecord, int]]]] = [None]
    current: Dict[MoveRecord, int] = {}

    def search(i: int, objective: int, makespan: int) -> None:
        if best[0] is not None and (objective + finals_after[i], makespan) >= best[0][:2]:
            return
        if i == len(records):
            best[0] = (objective, makespan, dict(current))
            return
        rec = records[i]
        lb = 1
        for p, strict in preds[rec]:
            lb = max(lb, current[p] + (1 if strict else 0))
        for s in range(lb, bound + 1):
            current[rec] = s
            search(i + 1, objective + (s if is_final[rec] else 0), max(makespan, s))
        current.pop(rec, None)

    search(0, 0, 0)
    if best[0] is None:
        raise BoundTooSmall(f"{bound}단계 안에 가능한 스케줄이 없습니다 (이동 {len(records)}개).")
    return Schedule(best[0][2], mode)


def validate_schedule(initial: PlatoonState, schedule: Schedule,
                      expected_final: Optional[PlatoonState] = None) -> ScheduleReport:
    """
    단계별로 시뮬레이션해 충돌을 찾습니다.
    보수적: 대상 셀은 직전 단계 끝에 비어 있어야 함.
    공격적: 같은 단계의 '비우고 들어가기' 관계가 비순환이어야 함(연쇄 허용, 교환 금지).
    두 모드 모두 한 단계가 끝날 때 두 차량이 같은 셀에 있을 수 없음.
    """
    report = ScheduleReport()
    occupancy: Dict[int, str] = dict(initial.occupancy)
    positions: Dict[str, int] = dict(initial.positions)
    spec = initial.spec

    for step, movers in enumerate(schedule.steps(), start=1):
        by_vehicle: Dict[str, List[MoveRecord]] = defaultdict(list)
        for rec in movers:
            by_vehicle[rec.vehicle].append(rec)
        for vid, recs in by_vehicle.items():
            if len(recs) > 1:
                report.violations.append(Violation(step, recs[0].from_pos, (vid,), "한 단계에 두 번 이동"))

        valid = []
        for rec in movers:
            if positions.get(rec.vehicle) != rec.from_pos:
                report.violations.append(
                    Violation(step, rec.from_pos, (rec.vehicle,), f"차량이 셀 {positions.get(rec.vehicle)}에 있음")
                )
                continue
            if not spec.contains(rec.to_pos) or spec.classify(rec.from_pos, rec.to_pos) is None:
                report.violations.append(Violation(step, rec.to_pos, (rec.vehicle,), "인접하지 않은 이동"))
                continue
            valid.append(rec)

        moving = {rec.vehicle for rec in valid}
        if schedule.mode is ScheduleMode.CONSERVATIVE:
            for rec in valid:
                holder = occupancy.get(rec.to_pos)
                if holder is not None:
                    report.violations.append(
                        Violation(step, rec.to_pos, (rec.vehicle, holder), "직전 단계 끝에 점유된 셀")
                    )
        else:
            for rec in valid:
                holder = occupancy.get(rec.to_pos)
                if holder is not None and holder not in moving:
                    report.violations.append(
                        Violation(step, rec.to_pos, (rec.vehicle, holder), "머무는 차량이 있는 셀")
                    )
            # a -> b : b 가 들어가려면 a 가 먼저 비워야 함
            order = nx.DiGraph()
            order.add_nodes_from(valid)
            leaving = {rec.from_pos: rec for rec in valid}
            for rec in valid:
                src = leaving.get(rec.to_pos)
                if src is not None and src is not rec:
                    order.add_edge(src, rec)
            for cycle in nx.simple_cycles(order):
                report.violations.append(
                    Violation(step, cycle[0].to_pos, tuple(r.vehicle for r in cycle), "같은 단계 순환 이동(교환)")
                )
        ends: Dict[int, List[str]] = defaultdict(list)
        for rec in valid:
            ends[rec.to_pos].append(rec.vehicle)
        for cell, vids in ends.items():
            if len(vids) > 1:
                report.violations.append(Violation(step, cell, tuple(vids), "같은 셀에서 단계 종료"))

        for rec in valid:
            if occupancy.get(rec.from_pos) == rec.vehicle:
                del occupancy[rec.from_pos]
        for rec in valid:
            occupancy[rec.to_pos] = rec.vehicle
            positions[rec.vehicle] = rec.to_pos

    report.final_positions = positions
    if expected_final is not None and positions != expected_final.positions:
        report.violations.append(Violation(schedule.makespan, 0, (), "재생한 최종 상태가 경로의 최종 상태와 다름"))
    if not report.ok:
        logger.debug(f"🚧 스케줄 검증 실패 ({schedule.mode.value}): {len(report.violations)}건")
    return report


def replay(initial: PlatoonState, schedule: Schedule) -> List[PlatoonState]:
    """단계 0(초기) .. makespan 의 점유 상태 프레임"""
    frames = [initial]
    index = {vid: i for i, vid in enumerate(initial.ids)}
    cells = list(initial.cells)
    for movers in schedule.steps():
        for rec in movers:
            cells[index[rec.vehicle]] = rec.to_pos
        frames.append(initial.with_cells(tuple(cells)))
    return frames


def schedule_path(path: Union[SortingPath, Sequence[Move]], mode: ScheduleMode) -> Schedule:
    """extract_moves -> build_precedence -> earliest_schedule"""
    records = extract_moves(path)
    return earliest_schedule(build_precedence(records, mode), mode)
