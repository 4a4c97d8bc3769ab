# -*- coding: utf-8 -*-
"""CSV persistence for run traces and their seed-level summaries.
- write_rows(path, rows): atomically writes the 8-column trace CSV
- read_trace_csv(path): loads a trace CSV with pandas, checking the schema
- summarize(csv_path, out_path): mean and 95% CI half-width per (experiment, method, metric, x)
Format: UTF-8, LF line endings, header line, decimal dot, metric values with 17 significant digits.
"""
from __future__ import annotations

import csv
import math
import os
import warnings
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import pandas as pd

from markovopt_errors import MalformedCsv

CSV_HEADER = ["experiment", "method", "seed", "step", "samples_cum", "level", "metric_name", "metric_value"]
SUMMARY_HEADER = ["experiment", "method", "metric_name", "x", "mean", "ci_half_width", "n_seeds"]
GROUP_KEYS = ("experiment", "method", "metric_name", "samples_cum")
CI_Z = 1.96

Row = Tuple[str, str, int, int, int, int, str, float]


def format_value(v: float) -> str:
    return format(float(v), ".17g")


def write_rows(path: Path, rows: Iterable[Row], header: Sequence[str] = CSV_HEADER) -> Path:
    """Write to a sibling temp file and move it into place; nothing is left behind on failure."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".partial")
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, delimiter=",", lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([format_value(v) if isinstance(v, float) else v for v in row])
        os.replace(tmp, path)
    except BaseException:
        if tmp.exists():
            tmp.unlink()
        raise
    return path


def read_trace_csv(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trace CSV not found: {path}")
    try:
        df = pd.read_csv(path, dtype={"experiment": str, "method": str, "metric_name": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise MalformedCsv(f"could not parse {path}: {e}") from e
    if list(df.columns) != CSV_HEADER:
        raise MalformedCsv(f"{path}: expected columns {CSV_HEADER}, got {list(df.columns)}")
    numeric = ["seed", "step", "samples_cum", "level", "metric_value"]
    for col in numeric:
        converted = pd.to_numeric(df[col], errors="coerce")
        if converted.isna().any():
            bad = int(converted.isna().idxmax())
            raise MalformedCsv(f"{path}: non-numeric {col} on data row {bad + 1}")
        df[col] = converted
    return df


def summarize(csv_path: Path, out_path: Path, group_keys: Sequence[str] = GROUP_KEYS) -> Path:
    """Mean and 1.96 * std / sqrt(k) half-width over seeds; k = 1 gives half-width 0."""
    df = read_trace_csv(csv_path)
    missing = [k for k in group_keys if k not in df.columns]
    if missing:
        raise MalformedCsv(f"group keys {missing} not in {CSV_HEADER}")
    grouped = df.groupby(list(group_keys), sort=False)["metric_value"]
    stats = grouped.agg(["mean", "std", "count"]).reset_index()
    single = stats["count"] == 1
    if single.any():
        warnings.warn(f"{int(single.sum())} group(s) hold a single seed; CI half-width set to 0")
    half = CI_Z * stats["std"] / stats["count"].map(math.sqrt)
    stats["ci_half_width"] = half.where(~single, 0.0).fillna(0.0)
    x_key = group_keys[-1]
    out = pd.DataFrame({
        "experiment": stats.get("experiment", ""),
        "method": stats.get("method", ""),
        "metric_name": stats.get("metric_name", ""),
        "x": stats[x_key],
        "mean": stats["mean"],
        "ci_half_width": stats["ci_half_width"],
        "n_seeds": stats["count"],
    })[SUMMARY_HEADER]
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(out_path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
    return out_path


def summary_rows(path: Path) -> List[dict]:
    return pd.read_csv(path).to_dict(orient="records")
