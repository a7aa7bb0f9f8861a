import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Optional, List, Literal
import sys
import os

# --- 개별 설정 섹션 모델 정의 ---

class CostParams(BaseModel):
    """엣지 비용 모델 계수 (β_long, β_lc, γ, 가감속 한계, 셀 길이, 순항 속도)"""
    model_config = ConfigDict(frozen=True)

    beta_long: float = Field(default=1.0, gt=0.0, le=1.0, description="종방향 이동 가중치 β_long (0, 1]")
    beta_lc: float = Field(default=1.0, gt=0.0, le=1.0, description="차로 변경 가중치 β_lc (0, 1]")
    gamma: float = Field(default=1.0, gt=0.0, description="위치 유지 비용 지수 γ (> 0)")
    a_max_accel: float = Field(default=3.0, gt=0.0, description="최대 가속도 a_max^a (m/s², > 0)")
    a_min_decel: float = Field(default=-5.0, lt=0.0, description="최소 감속도 a_min^d (m/s², < 0)")
    cell_length: float = Field(default=7.0, gt=0.0, description="셀 길이 L (m)")
    cruise_speed: float = Field(default=15.0, ge=0.0, description="순항 속도 (m/s, 기준 좌표계)")


class SearchConfig(BaseModel):
    heuristic: Literal["auto", "manhattan", "misplaced"] = Field(default="auto", description="기본 휴리스틱 (auto: 짝지어진 목표면 manhattan, 아니면 misplaced)")
    stochastic: bool = Field(default=False, description="solve 에서 확률적 휴리스틱 사용 여부")
    seed: int = Field(default=0, ge=0, description="확률적 탐색 기본 시드")
    time_limit_ms: Optional[int] = Field(default=None, gt=0, description="탐색 1회 시간 제한 (ms). None이면 무제한")
    allow_reopen: bool = Field(default=True, description="G값 개선 시 닫힌 노드 재개방 여부")


class PortfolioSettings(BaseModel):
    workers: int = Field(default=30, ge=1, description="병렬 탐색 횟수 (시드 개수)")
    master_seed: int = Field(default=0, ge=0, description="시드 목록 생성용 마스터 시드")
    max_parallel: int = Field(default=10, ge=1, description="동시에 실행할 최대 워커 수")
    backend: Literal["thread", "process"] = Field(default="thread", description="워커 실행 방식")
    modes: List[Literal["conservative", "aggressive"]] = Field(default=["conservative", "aggressive"], description="스케줄 압축 모드")
    max_restarts: int = Field(default=0, ge=0, description="시간 초과 시 새 시드로 재시작할 최대 횟수")
    stochastic: bool = Field(default=True, description="워커가 확률적 휴리스틱을 쓰는지 여부 (끄면 모든 워커가 같은 경로)")


class BenchConfig(BaseModel):
    out_dir: str = Field(default="results", description="실험 결과 CSV 저장 디렉토리")
    portfolio_samples: List[int] = Field(default=[22, 28, 9, 11, 14, 29, 27, 30], description="실험 2/3 대상 샘플 ID")
    runs_per_sample: int = Field(default=30, ge=1, description="실험 2/3 샘플당 실행 횟수")
    experiment4_sample: int = Field(default=27, description="실험 4 대상 샘플 ID")
    experiment4_runs: int = Field(default=100, ge=1, description="실험 4 실행 횟수")


class LoggingConfig(BaseModel):
    level: str = Field(default="INFO", description="로그 레벨 (DEBUG, INFO, WARNING, ERROR)")
    directory: str = Field(default="logs", description="로그 파일 저장 디렉토리")
    rotation: str = Field(default="10 MB", description="로그 파일 순환 크기")
    retention: str = Field(default="7 days", description="로그 파일 보관 기간")
    format: str = Field(
        default="{time:YYYY-MM-DD HH:mm:ss.SSS} | {level:<8} | {name}:{function}:{line} - {message}",
        description="로그 포맷"
    )

# --- 메인 설정 클래스 ---
class Config(BaseModel):
    cost: CostParams = Field(default_factory=CostParams)
    search: SearchConfig = Field(default_factory=SearchConfig)
    portfolio: PortfolioSettings = Field(default_factory=PortfolioSettings)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @model_validator(mode="after")
    def _check_parallelism(self) -> "Config":
        if self.portfolio.max_parallel > self.portfolio.workers:
            # 워커 수보다 큰 동시 실행 한도는 의미 없음
            self.portfolio.max_parallel = self.portfolio.workers
        return self


CONFIG_ENV_VAR = "PLATOON_SORTER_CONFIG"
DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "config.yaml")


def load_config(path: Optional[str] = None) -> Config:
    """YAML 설정 파일을 로드하고 Pydantic 모델로 파싱합니다."""
    path = path or os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH
    try:
        with open(path, 'r', encoding='utf-8') as f:
            config_data = yaml.safe_load(f)
            if not config_data:
                raise ValueError(f"설정 파일({path})이 비어 있거나 유효한 YAML 형식이 아닙니다.")

        return Config(**config_data)

    except FileNotFoundError:
        print(f"❌ 설정 파일({path})을 찾을 수 없습니다.", file=sys.stderr)
        raise
    except yaml.YAMLError as e:
        print(f"❌ 설정 파일({path}) 파싱 오류: {e}", file=sys.stderr)
        raise
    except ValueError as e: # 빈 파일, 잘못된 형식, Pydantic 유효성 검사 오류
        print(f"❌ 설정 파일({path}) 내용 오류: {e}", file=sys.stderr)
        if hasattr(e, 'errors'):
             for error in e.errors():
                 print(f"  - 필드: {'.'.join(map(str, error['loc']))}, 오류: {error['msg']}", file=sys.stderr)
        raise


# 전역 설정 객체
try:
    config = load_config()
except Exception:
    print("🔥 실행에 필요한 설정을 로드하지 못했습니다. config/config.yaml 파일을 확인하세요.", file=sys.stderr)
    raise SystemExit("설정 로드 실패로 프로그램을 종료합니다.")
