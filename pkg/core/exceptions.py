# 플래툰 정렬 라이브러리 전체에서 사용하는 예외 계층입니다.

from typing import Any, Optional


class PlatoonSortingError(Exception):
    """모든 정렬 관련 예외의 기본 클래스"""


# --- 입력/상태 관련 ---

class ParseError(PlatoonSortingError, ValueError):
    """인스턴스/목표/경로 파일 파싱 실패 (줄 번호, 필드 경로 포함)"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")


class InvariantViolation(PlatoonSortingError, ValueError):
    """셀 중복, ID 중복, 범위 밖 셀 등 상태 불변식 위반"""


class IllegalMove(PlatoonSortingError, ValueError):
    """점유된 셀 또는 인접하지 않은 셀로의 이동"""


class InfeasibleTemplate(PlatoonSortingError, ValueError):
    """클래스 템플릿을 차량 구성으로 채울 수 없음"""


# --- 비용/휴리스틱 관련 ---

class NonAdjacent(PlatoonSortingError, ValueError):
    """차량 한 대의 이동 전/후 셀이 동일하지도, 4-인접하지도 않음"""


class NotAdjacentStates(PlatoonSortingError, ValueError):
    """두 상태가 정확히 한 번의 합법적 이동으로 연결되지 않음"""


class UnpairedGoal(PlatoonSortingError, ValueError):
    """Manhattan 휴리스틱에 필요한 차량-셀 짝이 없음"""


class EmptyGoalSet(PlatoonSortingError, ValueError):
    """목표 상태 집합이 비어 있음"""


class NonpositiveCmin(PlatoonSortingError, ValueError):
    """확률적 휴리스틱의 ε 구간에는 C_min > 0 이 필요함"""


# --- 탐색 관련 ---

class InfeasibleGoal(PlatoonSortingError, ValueError):
    """초기 상태와 목표 상태의 차량 집합/격자가 일치하지 않음"""


class NoPath(PlatoonSortingError):
    """목표에 도달할 수 없음 (열린 목록 소진)"""

    def __init__(self, message: str, stats: Any = None):
        self.stats = stats
        super().__init__(message)


class TimedOut(PlatoonSortingError):
    """시간 제한 초과. 통계와 열린 목록 정보를 함께 전달"""

    def __init__(self, message: str, stats: Any = None, frontier_size: int = 0, best_f: Optional[float] = None):
        self.stats = stats
        self.frontier_size = frontier_size
        self.best_f = best_f
        super().__init__(message)


# --- 스케줄/포트폴리오 관련 ---

class CyclicPrecedence(PlatoonSortingError):
    """선후 관계 그래프에 사이클이 존재함"""


class BoundTooSmall(PlatoonSortingError, ValueError):
    """주어진 단계 상한 안에서 가능한 스케줄이 없음"""


class AllRunsTimedOut(PlatoonSortingError):
    """포트폴리오의 모든 실행이 시간 제한에 걸림"""

    def __init__(self, message: str, runs: Any = None):
        self.runs = runs
        super().__init__(message)
