# 결과 출력: CSV / JSON 저장, 단계별 ASCII 격자 프레임 렌더링과 재파싱, rich 콘솔 요약.

import json
import os
from typing import Any, Iterable, List, Mapping, Optional, Sequence

import pandas as pd
from rich.console import Console
from rich.table import Table

from core.exceptions import ParseError
from core.schedule import Schedule, replay
from core.search import SortingPath
from data.grid_state import PlatoonState

VACANT = "."
console = Console()


def write_csv(frame: pd.DataFrame, dest: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(dest)), exist_ok=True)
    frame.to_csv(dest, index=False)
    return dest


def write_json(data: Mapping[str, Any], dest: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(dest)), exist_ok=True)
    with open(dest, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
    return dest


def trace_frame(path: SortingPath) -> pd.DataFrame:
    """경로 상태별 ID / MaxID / ParentID / G / H / F 표"""
    rows = [
        {"step": i, "id": t.node_id, "max_id": t.max_id, "parent_id": t.parent_id, "g": t.g, "h": t.h, "f": t.f}
        for i, t in enumerate(path.trace)
    ]
    return pd.DataFrame(rows, columns=["step", "id", "max_id", "parent_id", "g", "h", "f"])


# --- ASCII 프레임 ---

def render_grid(state: PlatoonState) -> List[str]:
    """앞쪽(1행)이 위. 빈 셀은 '.'"""
    spec = state.spec
    occ = state.occupancy
    width = max([len(v) for v in state.ids] + [1])
    lines = []
    for row in range(1, spec.rows + 1):
        cells = [occ.get(spec.cell_at(row, col), VACANT).center(width) for col in range(1, spec.cols + 1)]
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def render_frames(frames: Sequence[PlatoonState], labels: Optional[Sequence[str]] = None) -> str:
    labels = labels or [f"step {i}" for i in range(len(frames))]
    out = []
    for label, state in zip(labels, frames):
        out.append(f"# {label}")
        out.extend(render_grid(state))
        out.append("")
    return "\n".join(out)


def path_frames(path: SortingPath) -> str:
    """한 번에 한 대씩 움직이는 원래 경로"""
    labels = ["step 0"] + [f"step {i} {m}" for i, m in enumerate(path.moves, start=1)]
    return render_frames(path.states, labels)


def schedule_frames(initial: PlatoonState, schedule: Schedule) -> str:
    """압축된 스케줄의 단계별 격자"""
    steps = schedule.steps()
    labels = ["step 0"] + [
        f"step {i} " + ", ".join(f"{r.vehicle}:{r.from_pos}->{r.to_pos}" for r in recs)
        for i, recs in enumerate(steps, start=1)
    ]
    return render_frames(replay(initial, schedule), labels)


def parse_frames(text: str, template: PlatoonState) -> List[PlatoonState]:
    """render_frames 출력을 상태 목록으로 되읽습니다. 차량/격자 정보는 template 에서 가져옵니다."""
    spec = template.spec
    frames: List[List[List[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            frames.append([])
        elif line.startswith("|"):
            if not frames:
                raise ParseError("프레임 머리글(# step) 없이 격자 행이 나왔습니다.", line=lineno)
            tokens = [t.strip() for t in line.strip("|").split("|")]
            if len(tokens) != spec.cols:
                raise ParseError(f"격자 행의 칸 수 {len(tokens)} != {spec.cols}", line=lineno)
            frames[-1].append(tokens)

    index = {vid: i for i, vid in enumerate(template.ids)}
    states = []
    for rows in frames:
        if len(rows) != spec.rows:
            raise ParseError(f"프레임의 행 수 {len(rows)} != {spec.rows}")
        cells = [0] * len(template.ids)
        seen = set()
        for r, tokens in enumerate(rows, start=1):
            for c, tok in enumerate(tokens, start=1):
                if tok == VACANT:
                    continue
                if tok not in index or tok in seen:
                    raise ParseError(f"프레임에 알 수 없거나 중복된 차량: {tok}")
                seen.add(tok)
                cells[index[tok]] = spec.cell_at(r, c)
        if len(seen) != len(template.ids):
            raise ParseError(f"프레임에 없는 차량: {sorted(set(index) - seen)}")
        states.append(template.with_cells(tuple(cells)))
    return states


# --- 콘솔 출력 ---

def print_table(title: str, frame: pd.DataFrame, max_rows: int = 40) -> None:
    table = Table(title=title)
    for col in frame.columns:
        table.add_column(str(col))
    for _, row in frame.head(max_rows).iterrows():
        table.add_row(*[_fmt(v) for v in row.tolist()])
    console.print(table)


def print_summary(title: str, items: Iterable[tuple]) -> None:
    table = Table(title=title, show_header=False)
    table.add_column("key", style="bold")
    table.add_column("value")
    for key, value in items:
        table.add_row(str(key), _fmt(value))
    console.print(table)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)
