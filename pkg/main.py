import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

import pandas as pd
import yaml
from loguru import logger
from pydantic import ValidationError

from app.bench import EXPERIMENTS, run_experiment
from app.report import path_frames, print_summary, print_table, schedule_frames, trace_frame, write_csv, write_json
from config.loader import Config, CostParams, config, load_config
from core.engine import PortfolioConfig, run_portfolio
from core.exceptions import (
    AllRunsTimedOut, EmptyGoalSet, InfeasibleGoal, InfeasibleTemplate, InvariantViolation,
    NoPath, ParseError, TimedOut, UnpairedGoal,
)
from core.schedule import ScheduleMode, schedule_path, validate_schedule
from core.search import SearchOptions, solve_sorting
from data.manager import dump_yaml, load_goals, load_instance, load_path, path_to_dict
from strategy.heuristics import HeuristicBase, HeuristicKind

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_TIMEOUT = 4

ERROR_EXIT_CODES = (
    ((ParseError, InvariantViolation, ValidationError), EXIT_PARSE),
    ((InfeasibleGoal, InfeasibleTemplate, NoPath, UnpairedGoal, EmptyGoalSet), EXIT_INFEASIBLE),
    ((TimedOut, AllRunsTimedOut), EXIT_TIMEOUT),
)


# --- 👇 Loguru 초기 설정 ---
def setup_logging(cfg: Optional[Config] = None):
    """Loguru 로거 설정"""
    logger.remove() # 기본 핸들러 제거

    log_config = (cfg or config).logging
    log_directory = log_config.directory
    log_file_path = f"{log_directory}/sorter.log"

    # 1. 콘솔 핸들러 (결과 출력은 stdout 이므로 로그는 stderr 로)
    logger.add(
        sys.stderr,
        level=log_config.level.upper(),
        format=log_config.format,
        colorize=True
    )

    # 2. 파일 핸들러 (회전 및 보관 설정 적용)
    logger.add(
        log_file_path,
        level=log_config.level.upper(),
        format=log_config.format,
        rotation=log_config.rotation,
        retention=log_config.retention,
        encoding="utf-8",
        enqueue=True, # 워커 스레드/프로세스에서도 안전하게 기록
        backtrace=True,
        diagnose=True
    )

    logger.debug(f"로그 레벨: {log_config.level}, 로그 파일: {log_file_path}")


# --- 인자 파서 ---
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platoon-sorter", description="격자 기반 플래툰 차량 정렬기 (A* / DSA*)")
    parser.add_argument("--config", default=None, help="설정 YAML 경로 (기본: config/config.yaml)")
    sub = parser.add_subparsers(dest="command", required=True)

    def cost_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--beta-long", type=float, default=None, help="종방향 이동 가중치 β_long")
        p.add_argument("--beta-lc", type=float, default=None, help="차로 변경 가중치 β_lc")
        p.add_argument("--gamma", type=float, default=None, help="위치 유지 비용 지수 γ")

    def search_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--initial", required=True, help="초기 상태 인스턴스 YAML")
        p.add_argument("--goal", action="append", default=[], help="목표 YAML (여러 번 지정 시 합집합)")
        p.add_argument("--goals", nargs="+", default=[], help="목표 YAML 여러 개")
        p.add_argument("--heuristic", choices=["auto", "manhattan", "misplaced"], default=None)
        p.add_argument("--stochastic", action=argparse.BooleanOptionalAction, default=None,
                       help="확률적 휴리스틱 사용 여부 (기본: 설정 파일)")
        p.add_argument("--time-limit-ms", type=int, default=None)
        cost_flags(p)

    p = sub.add_parser("solve", help="단일 A* 탐색")
    search_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="경로 YAML 저장 위치")
    p.add_argument("--trace", default=None, help="ID/MaxID/ParentID 추적 CSV 저장 위치")
    p.add_argument("--format", choices=["csv", "object"], default="object")

    p = sub.add_parser("schedule", help="경로를 병렬 이동 단계로 압축")
    p.add_argument("--path", required=True, help="경로 YAML")
    p.add_argument("--mode", choices=["conservative", "aggressive", "both"], default="both")
    p.add_argument("--out", default=None, help="스케줄 CSV / 프레임 저장 디렉토리")
    p.add_argument("--format", choices=["csv", "object"], default="object")
    cost_flags(p)

    p = sub.add_parser("portfolio", help="시드별 확률적 A* 포트폴리오")
    search_flags(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="마스터 시드 (워커 i 의 시드 = seed + i)")
    p.add_argument("--max-parallel", type=int, default=None)
    p.add_argument("--backend", choices=["thread", "process"], default=None)
    p.add_argument("--mode", choices=["conservative", "aggressive", "both"], default="both")
    p.add_argument("--out", default=None, help="runs.csv / summary.json / best_path.yaml 저장 디렉토리")
    p.add_argument("--format", choices=["csv", "object"], default="object")

    p = sub.add_parser("bench", help="실험 1~4 재현")
    p.add_argument("--experiment", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="동시에 실행할 최대 워커 수")
    p.add_argument("--time-limit-ms", type=int, default=None)
    p.add_argument("--format", choices=["csv", "object"], default="object")
    cost_flags(p)

    p = sub.add_parser("render", help="경로를 ASCII 격자 프레임으로 출력")
    p.add_argument("--path", required=True)
    p.add_argument("--mode", choices=["stepwise", "conservative", "aggressive"], default="stepwise")
    p.add_argument("--out", default=None)
    cost_flags(p)
    return parser


def _cost_params(cfg: Config, args: argparse.Namespace) -> CostParams:
    overrides = {
        "beta_long": args.beta_long,
        "beta_lc": args.beta_lc,
        "gamma": args.gamma,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return CostParams(**{**cfg.cost.model_dump(), **overrides})


def _time_limit(cfg: Config, args: argparse.Namespace) -> Optional[float]:
    ms = args.time_limit_ms if args.time_limit_ms is not None else cfg.search.time_limit_ms
    return ms / 1000.0 if ms else None


def _modes(choice: str):
    return tuple(ScheduleMode) if choice == "both" else (ScheduleMode(choice),)


def _load_problem(args: argparse.Namespace):
    goal_files: List[str] = list(args.goal) + list(args.goals)
    if not goal_files:
        raise ParseError("--goal 또는 --goals 로 목표 파일을 하나 이상 지정해야 합니다.")
    initial = load_instance(args.initial)
    return initial, load_goals(goal_files, initial)


# --- 하위 명령 ---
def cmd_solve(cfg: Config, args: argparse.Namespace) -> int:
    initial, goals = _load_problem(args)
    params = _cost_params(cfg, args)
    kind = HeuristicKind(
        HeuristicBase(args.heuristic or cfg.search.heuristic),
        stochastic=cfg.search.stochastic if args.stochastic is None else args.stochastic,
    )
    seed = cfg.search.seed if args.seed is None else args.seed
    opts = SearchOptions(time_limit=_time_limit(cfg, args), allow_reopen=cfg.search.allow_reopen)
    path, stats = solve_sorting(initial, goals, params, kind, opts, run_seed=seed)
    logger.info(f"✅ 최적 비용 {path.total_cost:g}, 이동 {len(path.moves)}회, 확장 {stats.explored}")

    if args.out:
        dump_yaml(path_to_dict(path), args.out)
        logger.info(f"💾 경로 저장: {args.out}")
    if args.trace:
        write_csv(trace_frame(path), args.trace)
        logger.info(f"💾 추적 표 저장: {args.trace}")

    if args.format == "csv":
        frame = pd.DataFrame(
            [{"move": i, "vehicle": m.vehicle, "from": m.from_cell, "to": m.to_cell}
             for i, m in enumerate(path.moves, start=1)],
            columns=["move", "vehicle", "from", "to"],
        )
        sys.stdout.write(frame.to_csv(index=False))
    else:
        record = {**path_to_dict(path), "stats": stats.to_record()}
        print(json.dumps(record, ensure_ascii=False, sort_keys=True))
    print_summary("solve", [("cost", path.total_cost), ("moves", len(path.moves)),
                            ("explored", stats.explored), ("generated", stats.generated),
                            ("elapsed_s", stats.elapsed)])
    return EXIT_OK


def cmd_schedule(cfg: Config, args: argparse.Namespace) -> int:
    path = load_path(args.path, _cost_params(cfg, args))
    result: Dict[str, Dict] = {}
    for mode in _modes(args.mode):
        sched = schedule_path(path, mode)
        report = validate_schedule(path.initial, sched, path.final)
        if not report.ok:
            for v in report.violations:
                logger.error(f"❌ step {v.step}, cell {v.cell}, {v.vehicles}: {v.reason}")
            return EXIT_UNEXPECTED
        result[mode.value] = {"makespan": sched.makespan, "objective": sched.objective}
        logger.info(f"🗓️ {mode.value}: {sched.makespan}단계 (목적함수 {sched.objective})")
        if args.out:
            write_csv(sched.to_frame(), os.path.join(args.out, f"schedule_{mode.value}.csv"))
            with open(os.path.join(args.out, f"frames_{mode.value}.txt"), "w", encoding="utf-8") as f:
                f.write(schedule_frames(path.initial, sched))
        if args.format == "csv":
            frame = sched.to_frame()
            frame.insert(0, "mode", mode.value)
            sys.stdout.write(frame.to_csv(index=False))
    if args.format == "object":
        print(json.dumps({"moves": len(path.moves), "schedules": result}, sort_keys=True))
    print_summary("schedule", [(m, f"{r['makespan']} steps / objective {r['objective']}") for m, r in result.items()])
    return EXIT_OK


def cmd_portfolio(cfg: Config, args: argparse.Namespace) -> int:
    initial, goals = _load_problem(args)
    pcfg = PortfolioConfig.from_settings(
        goals, _cost_params(cfg, args), cfg.portfolio, cfg.search,
        kind=HeuristicKind(
            HeuristicBase(args.heuristic or cfg.search.heuristic),
            stochastic=cfg.portfolio.stochastic if args.stochastic is None else args.stochastic,
        ),
        modes=_modes(args.mode),
        time_limit=_time_limit(cfg, args),
        **{k: v for k, v in {
            "workers": args.workers, "master_seed": args.seed,
            "max_parallel": args.max_parallel, "backend": args.backend,
        }.items() if v is not None},
    )
    result = run_portfolio(initial, pcfg)
    summary = result.summary(include_timing=True)

    if args.out:
        write_csv(result.runs_frame(), os.path.join(args.out, "runs.csv"))
        write_json(summary, os.path.join(args.out, "summary.json"))
        dump_yaml(path_to_dict(result.best_path), os.path.join(args.out, "best_path.yaml"))
        logger.info(f"💾 결과 저장: {args.out}")
    if args.format == "csv":
        sys.stdout.write(result.runs_frame().to_csv(index=False))
    else:
        print(json.dumps(summary, ensure_ascii=False, sort_keys=True))
    print_summary("portfolio", [
        ("cost", result.best_path.total_cost),
        ("distinct paths", result.distinct_paths),
        *[(f"best {m.value}", s.makespan) for m, (_, s) in result.best_by_mode.items()],
    ])
    return EXIT_OK


def cmd_bench(cfg: Config, args: argparse.Namespace) -> int:
    if args.experiment not in EXPERIMENTS:
        logger.error(f"❌ 알 수 없는 실험 번호: {args.experiment} (가능: {EXPERIMENTS})")
        return EXIT_PARSE
    tables = run_experiment(
        args.experiment,
        args.out or cfg.bench.out_dir,
        _cost_params(cfg, args),
        cfg.bench,
        master_seed=cfg.portfolio.master_seed if args.seed is None else args.seed,
        max_parallel=args.workers or cfg.portfolio.max_parallel,
        time_limit=_time_limit(cfg, args),
    )
    shown = {name: frame for name, frame in tables.items() if name != "experiment4_runs"}
    if args.format == "csv":
        merged = pd.concat([frame.assign(table=name) for name, frame in shown.items()], ignore_index=True)
        sys.stdout.write(merged[["table", *[c for c in merged.columns if c != "table"]]].to_csv(index=False))
    else:
        record = {
            "experiment": args.experiment,
            "tables": {name: json.loads(frame.to_json(orient="records")) for name, frame in shown.items()},
        }
        print(json.dumps(record, ensure_ascii=False, sort_keys=True))
    for name, frame in shown.items():
        print_table(name, frame)
    return EXIT_OK


def cmd_render(cfg: Config, args: argparse.Namespace) -> int:
    path = load_path(args.path, _cost_params(cfg, args))
    if args.mode == "stepwise":
        text = path_frames(path)
    else:
        text = schedule_frames(path.initial, schedule_path(path, args.mode))
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "schedule": cmd_schedule,
    "portfolio": cmd_portfolio,
    "bench": cmd_bench,
    "render": cmd_render,
}


def exit_code_for(exc: BaseException) -> int:
    for types, code in ERROR_EXIT_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_UNEXPECTED


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else config
        return COMMANDS[args.command](cfg, args)
    except (FileNotFoundError, yaml.YAMLError) as e:
        logger.error(f"❌ 설정을 읽지 못했습니다: {e}")
        return EXIT_PARSE
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_UNEXPECTED:
            logger.critical(f"🔥 예기치 못한 오류: {e}")
            logger.exception(e)
        else:
            logger.error(f"❌ {type(e).__name__}: {e}")
        return code


# --- 프로그램 진입점 ---
if __name__ == "__main__":
    setup_logging()
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.warning("⌨️ 사용자에 의해 프로그램 강제 종료")
        sys.exit(130)
