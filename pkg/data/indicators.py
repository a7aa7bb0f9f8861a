# data/indicators.py
# 포트폴리오 실행 기록(DataFrame)에서 단계 수 히스토그램, 실행 시간 요약,
# k-부분집합 최선 결과 확률 곡선을 계산합니다.
import math
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

BEST_CONFIDENCE = 0.9999


def step_histogram(runs: pd.DataFrame, column: str) -> pd.DataFrame:
  """column(예: 'aggressive_makespan') 값별 실행 횟수. 시간 초과 실행(NaN)은 제외"""
  if column not in runs.columns:
    return pd.DataFrame(columns=["steps", "count"])
  counts = runs[column].dropna().astype(int).value_counts().sort_index()
  return pd.DataFrame({"steps": counts.index.astype(int), "count": counts.values.astype(int)})


def runtime_summary(elapsed: pd.Series) -> Dict[str, float]:
  """실행 시간 min / max / mean / median (초)"""
  if elapsed.empty:
    return {"min": 0.0, "max": 0.0, "mean": 0.0, "median": 0.0}
  return {
    "min": float(elapsed.min()),
    "max": float(elapsed.max()),
    "mean": float(elapsed.mean()),
    "median": float(elapsed.median()),
  }


def best_subset_probability(values: Sequence[float], best: Optional[float] = None) -> pd.Series:
  """
  관측된 n개 실행에서 무작위로 k개를 골랐을 때 최선 값(최소)을 하나 이상 포함할 확률.
  P_k = 1 - C(n-b, k) / C(n, k), b = 최선 값을 낸 실행 수. NaN(시간 초과)은 최선이 아닌 실행으로 셉니다.
  """
  arr = np.asarray(values, dtype=float)
  n = len(arr)
  if n == 0:
    return pd.Series(dtype=float, name="p_best")
  finite = arr[~np.isnan(arr)]
  if best is None:
    best = float(finite.min()) if finite.size else math.nan
  b = int(np.sum(np.isclose(arr, best))) if finite.size else 0
  probs = [1.0 - math.comb(n - b, k) / math.comb(n, k) for k in range(1, n + 1)]
  return pd.Series(probs, index=pd.RangeIndex(1, n + 1, name="k"), name="p_best")


def first_k_above(curve: pd.Series, threshold: float = BEST_CONFIDENCE) -> Optional[int]:
  """확률 곡선이 처음으로 threshold 를 넘는 k (없으면 None)"""
  above = curve[curve > threshold]
  return int(above.index[0]) if not above.empty else None
