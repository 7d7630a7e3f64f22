"""Scoring and significance tests: micro/macro P/R/F1, Welch's t, Holm, Cohen's d."""
from __future__ import annotations

import math
import sys
from collections import Counter
from dataclasses import asdict, dataclass
from statistics import fmean, median
from typing import Mapping, Sequence

from .errors import ValidationError

INVALID = "INVALID"
DEGENERATE_P = sys.float_info.min


# -- Student t distribution -------------------------------------------------

def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10_000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _stirling_error(z: float) -> float:
    """lgamma(z) - [(z - 1/2) ln z - z + ln(2 pi)/2], valid for z >= 10."""
    z2 = z * z
    return (1.0 / 12 - (1.0 / 360 - (1.0 / 1260 - (1.0 / 1680 - 1.0 / (1188 * z2)) / z2) / z2) / z2) / z


def log_beta(a: float, b: float) -> float:
    """ln B(a, b), avoiding the cancellation of lgamma terms when an argument is large."""
    a, b = min(a, b), max(a, b)
    if b < 10:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    s = a + b
    if a < 10:
        # lgamma(b) - lgamma(a + b) via Stirling with the log terms rearranged
        diff = (b - 0.5) * math.log1p(a / b) + a * math.log(s) - a
        return math.lgamma(a) - diff + _stirling_error(b) - _stirling_error(s)
    return (_HALF_LOG_2PI - 0.5 * math.log(s) - (a - 0.5) * math.log1p(b / a) - (b - 0.5) * math.log1p(a / b)
            + _stirling_error(a) + _stirling_error(b) - _stirling_error(s))


def regularized_incomplete_beta(a: float, b: float, x: float, y: float | None = None) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1.

    ``y`` may carry 1 - x computed without cancellation by the caller.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if y is None:
        y = 1.0 - x
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_x = math.log1p(-y) if y < 0.5 else math.log(x)
    log_y = math.log1p(-x) if x < 0.5 else math.log(y)
    log_front = a * log_x + b * log_y - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def _t_tail(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))


def student_t_cdf(t: float, df: float) -> float:
    if not df > 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isnan(t):
        return math.nan
    tail = 0.5 * _t_tail(t, df)
    return 1.0 - tail if t >= 0 else tail


# -- two-sample tests -------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    cohens_d: float
    degenerate: bool = False


def _mean_var(x: Sequence[float]) -> tuple[float, float]:
    m = fmean(x)
    return m, sum((v - m) ** 2 for v in x) / (len(x) - 1)


def welch_t_test(x: Sequence[float], y: Sequence[float]) -> TTestResult:
    """Two-sided Welch test with Welch-Satterthwaite degrees of freedom.

    If both samples are constant the statistic is undefined: equal means give
    p = 1, different means give the smallest positive float and
    ``degenerate=True``.
    """
    if len(x) < 2 or len(y) < 2:
        raise ValidationError("Welch's t-test needs at least two observations per sample")
    mx, vx = _mean_var(x)
    my, vy = _mean_var(y)
    nx, ny = len(x), len(y)
    d = cohens_d(x, y)
    a, b = vx / nx, vy / ny
    if a + b == 0.0:
        if mx == my:
            return TTestResult(0.0, float(nx + ny - 2), 1.0, d, degenerate=True)
        return TTestResult(math.copysign(math.inf, mx - my), float(nx + ny - 2), DEGENERATE_P, d, degenerate=True)
    t = (mx - my) / math.sqrt(a + b)
    df = (a + b) ** 2 / (a * a / (nx - 1) + b * b / (ny - 1))
    p = min(1.0, max(0.0, _t_tail(t, df)))
    return TTestResult(t, df, p, d)


def cohens_d(x: Sequence[float], y: Sequence[float]) -> float:
    """Standardized mean difference with the (n-1)-weighted pooled SD; NaN if that SD is 0."""
    if len(x) < 2 or len(y) < 2:
        raise ValidationError("Cohen's d needs at least two observations per sample")
    mx, vx = _mean_var(x)
    my, vy = _mean_var(y)
    nx, ny = len(x), len(y)
    pooled = math.sqrt(((nx - 1) * vx + (ny - 1) * vy) / (nx + ny - 2))
    if pooled == 0.0:
        return math.nan
    return (mx - my) / pooled


def holm_adjust(pvals: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order."""
    m = len(pvals)
    for p in pvals:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"p-value {p} outside [0, 1]")
    order = sorted(range(m), key=lambda i: pvals[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * pvals[i]))
        adjusted[i] = running
    return adjusted


def stars(p: float | None) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# -- classification metrics -------------------------------------------------

METRICS = ("accuracy", "micro_precision", "micro_recall", "micro_f1",
           "macro_precision", "macro_recall", "macro_f1")


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    n_items: int
    n_invalid: int

    def to_dict(self) -> dict:
        return asdict(self)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def score_labels(gold: Sequence[str], predicted: Sequence[str]) -> MetricSet:
    """Single-label scoring; ``INVALID`` predictions form their own (never gold) class."""
    if len(gold) != len(predicted):
        raise ValidationError("gold and predicted lengths differ")
    if not gold:
        raise ValidationError("cannot score an empty cell")
    n = len(gold)
    tp: Counter[str] = Counter()
    n_gold = Counter(gold)
    n_pred = Counter(predicted)
    for g, p in zip(gold, predicted):
        if g == p:
            tp[g] += 1
    classes = sorted(set(n_gold) | set(n_pred))
    precisions, recalls, f1s = [], [], []
    for c in classes:
        p = tp[c] / n_pred[c] if n_pred[c] else 0.0
        r = tp[c] / n_gold[c] if n_gold[c] else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(_f1(p, r))
    correct = sum(tp.values())
    micro_p = correct / sum(n_pred.values())
    micro_r = correct / sum(n_gold.values())
    return MetricSet(
        accuracy=correct / n,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=_f1(micro_p, micro_r),
        macro_precision=fmean(precisions),
        macro_recall=fmean(recalls),
        macro_f1=fmean(f1s),
        n_items=n,
        n_invalid=n_pred.get(INVALID, 0),
    )


def score_predictions(records) -> MetricSet:
    """Score the run records of one (model, probe, system, temperature) cell."""
    records = list(records)
    if not records:
        raise ValidationError("cannot score an empty cell")
    cells = {(r.model, r.probe, r.system, r.temperature) for r in records}
    if len(cells) != 1:
        raise ValidationError(f"records span {len(cells)} cells; score one cell at a time")
    return score_labels([r.key for r in records], [r.parsed_letter for r in records])


def mean_metrics(sets: Sequence[MetricSet]) -> MetricSet:
    values = {m: fmean(getattr(s, m) for s in sets) for m in METRICS}
    return MetricSet(**values, n_items=sum(s.n_items for s in sets), n_invalid=sum(s.n_invalid for s in sets))


@dataclass(frozen=True)
class TemperatureSummary:
    mean: MetricSet
    deltas: dict[str, float]
    temperatures: tuple[float, ...]


def aggregate_temperatures(cells: Mapping[float, MetricSet],
                           temperatures: Sequence[float] = (0.0, 0.2, 0.5)) -> TemperatureSummary:
    """Unweighted mean over the configured temperatures and the first-to-last delta per metric."""
    temps = tuple(float(t) for t in temperatures)
    have = {float(t): m for t, m in cells.items()}
    missing = [t for t in temps if t not in have]
    if missing:
        raise ValidationError(f"missing temperature(s) {missing}")
    sets = [have[t] for t in temps]
    deltas = {m: getattr(sets[-1], m) - getattr(sets[0], m) for m in METRICS}
    return TemperatureSummary(mean_metrics(sets), deltas, temps)


def median_or_zero(values: Sequence[float]) -> float:
    return median(values) if values else 0.0
