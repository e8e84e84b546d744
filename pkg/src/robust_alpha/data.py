"""CSV ingestion, rolling-window p-values and table emission.

Input layout: a ``date`` column (``YYYY-MM``) followed by asset tickers for the
returns file, or by ``mkt_rf,smb,hml,rf`` for the factors file.  Everything is
in percent per month.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .alpha_tests import ALL_METHODS, Method, TestConfig, run_tests
from .errors import AlphaTestError, DataError
from .regression import Panel
from .simulation import RejectionRow, RejectionTable

FACTOR_HEADER = ["date", "mkt_rf", "smb", "hml", "rf"]
TABLE_HEADER = [f.name for f in fields(RejectionRow)]
ROLLING_HEADER = ["window_start", "method", "p_value"]
_DATE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")


@dataclass
class RollingReport:
    window_T: int
    starts: list[str]
    p_values: dict[str, np.ndarray]
    failures: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def n_windows(self) -> int:
        return len(self.starts)

    def rejection_ratios(self, gamma: float) -> dict[str, float]:
        """Fraction of windows whose p-value is at most ``gamma`` (failed windows excluded)."""
        out = {}
        for m, p in self.p_values.items():
            ok = p[~np.isnan(p)]
            out[m] = float(np.mean(ok <= gamma)) if ok.size else float("nan")
        return out


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    return [c.strip() for c in rows[0]], rows[1:]


def _parse_matrix(path, header, body) -> tuple[list[str], np.ndarray]:
    if not header or header[0].lower() != "date":
        raise DataError(f"{path}: first column must be 'date'")
    width = len(header)
    dates, values = [], np.empty((len(body), width - 1))
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        d = row[0].strip()
        if not _DATE.match(d):
            raise DataError(f"{path}: row {i} has malformed date {d!r} (want YYYY-MM)")
        if dates and d <= dates[-1]:
            raise DataError(f"{path}: dates not strictly increasing at row {i} ({d})")
        dates.append(d)
        for j, cell in enumerate(row[1:], start=1):
            cell = cell.strip()
            if cell == "":
                raise DataError(f"{path}: missing value at row {i}, column {header[j]!r}")
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at row {i}, column {header[j]!r}") from None
            if not math.isfinite(x):
                raise DataError(f"{path}: non-finite value at row {i}, column {header[j]!r}")
            values[i - 2, j - 1] = x
    return dates, values


def read_returns(path) -> tuple[list[str], list[str], np.ndarray]:
    header, body = _read_csv(path)
    if len(header) < 2:
        raise DataError(f"{path}: no asset columns")
    dates, values = _parse_matrix(path, header, body)
    return dates, header[1:], values


def read_factors(path) -> tuple[list[str], np.ndarray]:
    header, body = _read_csv(path)
    if [h.lower() for h in header] != FACTOR_HEADER:
        raise DataError(f"{path}: header must be {','.join(FACTOR_HEADER)}")
    return _parse_matrix(path, header, body)


def load_panel(returns_path, factors_path) -> Panel:
    """Excess-return panel ``r_it - rf_t`` on the three factors."""
    r_dates, assets, R = read_returns(returns_path)
    f_dates, F = read_factors(factors_path)
    for k in range(max(len(r_dates), len(f_dates))):
        a = r_dates[k] if k < len(r_dates) else "<missing>"
        b = f_dates[k] if k < len(f_dates) else "<missing>"
        if a != b:
            raise DataError(f"date mismatch at period {k + 1}: returns {a}, factors {b}")
    Y = R - F[:, [3]]
    return Panel(Y, F[:, :3], dates=r_dates, assets=assets)


def _min_periods(method: Method, p: int) -> int:
    if method in (Method.SS, Method.CC):
        return 2 * p + 4
    if method in (Method.PY, Method.COM):
        return p + 6  # v = T - p - 1 > 4
    return p + 3


def rolling_pvalues(panel: Panel, window_T: int, methods=ALL_METHODS, config: TestConfig | None = None) -> RollingReport:
    """p-values of each method on every window of ``window_T`` consecutive periods."""
    methods = [Method(m) for m in methods]
    if window_T > panel.T:
        raise DataError(f"window length {window_T} exceeds the {panel.T} available periods")
    for m in methods:
        need = _min_periods(m, panel.p)
        if m is Method.GRS:
            need = max(need, panel.N + panel.p + 1)
        if window_T < need:
            raise DataError(f"window length {window_T} too short for {m.value} (needs >= {need})")
    n = panel.T - window_T + 1
    starts = [panel.dates[k] if panel.dates else str(k + 1) for k in range(n)]
    pv = {m.value: np.full(n, np.nan) for m in methods}
    failures = []
    for k in range(n):
        sub = panel.rows(np.arange(k, k + window_T))
        try:
            res = run_tests(sub, methods, config)
        except AlphaTestError as exc:
            failures.append((starts[k], "*", f"{type(exc).__name__}: {exc}"))
            continue
        for m, r in res.items():
            pv[m.value][k] = r.p_value
    return RollingReport(window_T, starts, pv, failures)


def emit_tables(results, path) -> None:
    """Write a RejectionTable or RollingReport as CSV with a fixed header."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(results, RejectionTable):
            w.writerow(TABLE_HEADER)
            for row in results.sorted().rows:
                w.writerow([_fmt(getattr(row, k)) for k in TABLE_HEADER])
        elif isinstance(results, RollingReport):
            w.writerow(ROLLING_HEADER)
            order = [m.value for m in Method if m.value in results.p_values]
            for k, start in enumerate(results.starts):
                for m in order:
                    w.writerow([start, m, _fmt(float(results.p_values[m][k]))])
        else:
            raise TypeError(f"cannot emit {type(results).__name__}")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def read_rejection_table(path) -> RejectionTable:
    header, body = _read_csv(path)
    if header != TABLE_HEADER:
        raise DataError(f"{path}: unexpected header {header}")
    casts = {"method": str, "scenario": str, "T": int, "N": int, "s": int, "reps": int}
    rows = []
    for r in body:
        vals = {k: casts.get(k, float)(v) for k, v in zip(header, r)}
        rows.append(RejectionRow(**vals))
    return RejectionTable(rows)


def read_rolling_report(path, window_T: int) -> RollingReport:
    header, body = _read_csv(path)
    if header != ROLLING_HEADER:
        raise DataError(f"{path}: unexpected header {header}")
    starts: list[str] = []
    values: dict[str, list[float]] = {}
    for start, method, p in body:
        if not starts or starts[-1] != start:
            starts.append(start)
        values.setdefault(method, []).append(float(p))
    return RollingReport(window_T, starts, {m: np.array(v) for m, v in values.items()})
