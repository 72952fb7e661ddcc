"""Evaluation mathematics over recorded trials.

Per-trial error is defined as ``1 - accuracy``. Group quality is summarized
by RMSE = sqrt(mean(error^2)) together with a Student-t confidence interval
RMSE +/- t_{1-alpha/2, n-1} * sigma / sqrt(n), where sigma is the Bessel-
corrected sample standard deviation of the errors.

The t quantile is computed here from first principles: the CDF goes through
the regularized incomplete beta function (continued-fraction evaluation) and
is inverted by monotone bisection to an absolute tolerance of 1e-10.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .ledger import Ledger, TrialRecord


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorSample:
    errors: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.errors)


def errors_from_accuracies(accuracies: Sequence[float]) -> ErrorSample:
    """Element-wise ``1 - a``, order preserved."""
    errors = []
    for a in accuracies:
        if not (isinstance(a, (int, float)) and math.isfinite(a) and 0.0 <= a <= 1.0):
            raise StatsError(f"accuracy {a!r} outside [0, 1]")
        errors.append(1.0 - a)
    return ErrorSample(tuple(errors))


def rmse(sample: ErrorSample) -> float:
    if not sample.errors:
        raise StatsError("rmse of an empty sample is undefined")
    return math.sqrt(math.fsum(e * e for e in sample.errors) / len(sample.errors))


def sample_std(sample: ErrorSample) -> float:
    """Bessel-corrected (n - 1) standard deviation."""
    n = len(sample.errors)
    if n < 2:
        raise StatsError("sample standard deviation needs n >= 2")
    mean = math.fsum(sample.errors) / n
    return math.sqrt(math.fsum((e - mean) ** 2 for e in sample.errors) / (n - 1))


# --- Student-t distribution --------------------------------------------------

_BETA_EPS = 1e-15
_BETA_MAX_ITER = 400
_T_INV_TOL = 1e-10


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise StatsError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise StatsError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise StatsError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # Use the continued fraction directly where it converges fast, else the
    # symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    if df < 1:
        raise StatsError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_quantile(p: float, df: int) -> float:
    """Value t with CDF_t(t; df) = p, by monotone bisection to 1e-10."""
    if not (isinstance(df, int) and df >= 1):
        raise StatsError(f"degrees of freedom must be a positive integer, got {df!r}")
    if not 0.0 < p < 1.0:
        raise StatsError(f"p must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e300:
            raise StatsError(f"quantile bracket overflow for p={p}, df={df}")
    while hi - lo > _T_INV_TOL:
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def confidence_interval(sample: ErrorSample, alpha: float = 0.05) -> tuple[float, float]:
    """(lo, hi) around the RMSE with half-width t_{1-alpha/2, n-1} * sigma / sqrt(n)."""
    n = len(sample.errors)
    if n < 2:
        raise StatsError("confidence interval needs n >= 2")
    if not 0.0 < alpha < 1.0:
        raise StatsError(f"alpha must lie in (0, 1), got {alpha}")
    center = rmse(sample)
    half_width = t_quantile(1.0 - alpha / 2.0, n - 1) * sample_std(sample) / math.sqrt(n)
    return center - half_width, center + half_width


# --- Grouped reports ---------------------------------------------------------


def best_trial(records: Sequence[TrialRecord]) -> TrialRecord:
    """Record with maximum accuracy; ties go to the earliest created_at, then
    to input order."""
    if not records:
        raise StatsError("best_trial of an empty group is undefined")
    best = records[0]
    for record in records[1:]:
        if record.accuracy > best.accuracy or (
            record.accuracy == best.accuracy and record.created_at < best.created_at
        ):
            best = record
    return best


@dataclass(frozen=True)
class ReportRow:
    group: str
    n: int
    rmse: float
    std: float | None
    se: float | None
    ci_lo: float | None
    ci_hi: float | None
    best_accuracy: float
    best_rmse: float


GROUP_FIELDS = ("model", "epochs", "source", "cycle")


def _group_value(record: TrialRecord, field_name: str) -> str:
    if field_name == "model":
        return record.model_id
    if field_name == "epochs":
        return str(record.epochs)
    if field_name == "source":
        return record.source
    if field_name == "cycle":
        return str(record.cycle)
    raise StatsError(f"unknown group field {field_name!r}; expected one of {GROUP_FIELDS}")


def aggregate_report(
    ledger: Ledger,
    group_by: Sequence[str] = ("model", "epochs", "source"),
    alpha: float = 0.05,
) -> list[ReportRow]:
    """One row per group with n, RMSE, sigma, SE, CI bounds, best accuracy
    and the best trial's own RMSE; rows sorted by group label. Groups of one
    report no dispersion fields instead of failing."""
    for field_name in group_by:
        if field_name not in GROUP_FIELDS:
            raise StatsError(f"unknown group field {field_name!r}; expected one of {GROUP_FIELDS}")
    groups: dict[str, list[TrialRecord]] = {}
    for record in ledger.records:
        label = "/".join(_group_value(record, f) for f in group_by)
        groups.setdefault(label, []).append(record)

    rows = []
    for label in sorted(groups):
        members = groups[label]
        sample = errors_from_accuracies([r.accuracy for r in members])
        best = best_trial(members)
        if len(members) >= 2:
            std = sample_std(sample)
            se = std / math.sqrt(len(members))
            ci_lo, ci_hi = confidence_interval(sample, alpha=alpha)
        else:
            std = se = ci_lo = ci_hi = None
        rows.append(
            ReportRow(
                group=label,
                n=len(members),
                rmse=rmse(sample),
                std=std,
                se=se,
                ci_lo=ci_lo,
                ci_hi=ci_hi,
                best_accuracy=best.accuracy,
                best_rmse=1.0 - best.accuracy,
            )
        )
    return rows


CSV_HEADER = ("group", "n", "rmse", "std", "se", "ci_lo", "ci_hi", "best_accuracy", "best_rmse")


def _cell(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def format_report_csv(rows: Sequence[ReportRow]) -> str:
    """Six-decimal fixed-point CSV; absent dispersion cells are empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                row.group,
                str(row.n),
                _cell(row.rmse),
                _cell(row.std),
                _cell(row.se),
                _cell(row.ci_lo),
                _cell(row.ci_hi),
                _cell(row.best_accuracy),
                _cell(row.best_rmse),
            ]
        )
    return buf.getvalue()


def write_report_csv(rows: Sequence[ReportRow], path: str | Path) -> None:
    Path(path).write_text(format_report_csv(rows), encoding="utf-8")


def read_report_csv(path: str | Path) -> list[ReportRow]:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise StatsError(f"unexpected report header {header!r}")
    rows = []
    for cells in reader:
        if len(cells) != len(CSV_HEADER):
            raise StatsError(f"malformed report row {cells!r}")
        parse = lambda s: None if s == "" else float(s)  # noqa: E731
        rows.append(
            ReportRow(
                group=cells[0],
                n=int(cells[1]),
                rmse=float(cells[2]),
                std=parse(cells[3]),
                se=parse(cells[4]),
                ci_lo=parse(cells[5]),
                ci_hi=parse(cells[6]),
                best_accuracy=float(cells[7]),
                best_rmse=float(cells[8]),
            )
        )
    return rows


def format_report_table(rows: Sequence[ReportRow]) -> str:
    """Aligned plain-text table of report rows."""
    header = list(CSV_HEADER)
    table = [header]
    for row in rows:
        table.append(
            [
                row.group,
                str(row.n),
                _cell(row.rmse),
                _cell(row.std),
                _cell(row.se),
                _cell(row.ci_lo),
                _cell(row.ci_hi),
                _cell(row.best_accuracy),
                _cell(row.best_rmse),
            ]
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in table]
    return "\n".join(lines)
