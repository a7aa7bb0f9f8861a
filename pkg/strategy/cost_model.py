# 차량별 전이 비용, 속도 갱신, 상태 간 엣지 비용 C_ij 를 정의합니다.

import math
from typing import TYPE_CHECKING

from config.loader import CostParams
from core.exceptions import NonAdjacent, NotAdjacentStates

if TYPE_CHECKING:
    from data.grid_state import GridSpec, PlatoonState

_EXP_CAP = 700.0  # math.exp 오버플로 방지


def _exp(x: float) -> float:
    return math.exp(min(x, _EXP_CAP))


def vehicle_cost(spec: "GridSpec", from_cell: int, to_cell: int, speed: float, params: CostParams) -> float:
    """
    차량 한 대가 한 상태에서 다음 상태로 갈 때의 비용 w_h + w_l + w_LC.

    - 종방향 위치를 유지하면 w_h = exp(γ|v|) - 1, w_l = 0
    - 종방향 위치가 바뀌면 w_h = 0, w_l = β_long + |v|·exp[v·(x_k[1] - x_{k+1}[1])]
    - 차로가 바뀌면 w_LC = β_lc

    speed는 이동 전 상태의 상대 속도입니다.
    """
    r1, c1 = spec.row_col(from_cell)
    r2, c2 = spec.row_col(to_cell)
    if abs(r1 - r2) + abs(c1 - c2) > 1:
        raise NonAdjacent(f"셀 {from_cell} -> {to_cell} 은 인접하지 않습니다.")

    v = speed
    if r1 == r2:
        w_hold = _exp(params.gamma * abs(v)) - 1.0
        w_long = 0.0
    else:
        # x[1] = rows - row 이므로 x_k[1] - x_{k+1}[1] = r2 - r1
        w_hold = 0.0
        w_long = params.beta_long + abs(v) * _exp(v * (r2 - r1))
    w_lc = params.beta_lc if c1 != c2 else 0.0
    return w_hold + w_long + w_lc


def speed_update(v: float, params: CostParams) -> float:
    """
    다음 단계의 상대 속도. 한 셀 길이 안에서 멈출 수 있으면 0,
    아니면 크기를 sqrt(v² - 2|a_limit|L) 로 줄이고 부호는 유지합니다.
    """
    a_limit = params.a_max_accel if v >= 0 else params.a_min_decel
    if v * v / (2.0 * params.cell_length) <= abs(a_limit):
        return 0.0
    return math.copysign(math.sqrt(v * v - 2.0 * abs(a_limit) * params.cell_length), v)


def transition_cost(state: "PlatoonState", index: int, to_cell: int, params: CostParams) -> float:
    """index 차량만 to_cell 로 움직이고 나머지는 유지할 때의 C_ij"""
    spec = state.spec
    if not any(state.speeds):
        # 모든 차량이 순항 중이면 이동 차량의 β 만 남음
        if to_cell == state.cells[index]:
            return 0.0
        same_col = (to_cell - state.cells[index]) % spec.cols == 0
        return params.beta_long if same_col else params.beta_lc
    total = 0.0
    for i, (cell, v) in enumerate(zip(state.cells, state.speeds)):
        total += vehicle_cost(spec, cell, to_cell if i == index else cell, v, params)
    return total


def edge_cost(from_state: "PlatoonState", to_state: "PlatoonState", params: CostParams) -> float:
    """인접한 두 상태 사이 모든 차량(이동/유지)의 비용 합"""
    if from_state.ids != to_state.ids or from_state.spec != to_state.spec:
        raise NotAdjacentStates("두 상태의 차량 집합 또는 격자가 다릅니다.")
    changed = [i for i, (a, b) in enumerate(zip(from_state.cells, to_state.cells)) if a != b]
    if len(changed) != 1:
        raise NotAdjacentStates(f"이동한 차량 수가 1이 아닙니다: {len(changed)}")
    index = changed[0]
    if from_state.spec.classify(from_state.cells[index], to_state.cells[index]) is None:
        raise NotAdjacentStates(
            f"차량 {from_state.ids[index]}: 셀 {from_state.cells[index]} -> {to_state.cells[index]} 은 인접하지 않습니다."
        )
    return transition_cost(from_state, index, to_state.cells[index], params)


def c_min(params: CostParams) -> float:
    """최소 엣지 비용 C_min = min(β_long, β_lc)"""
    return min(params.beta_long, params.beta_lc)
