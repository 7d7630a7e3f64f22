"""Metric tables and significance reports from a run journal.

Two analyses are emitted side by side:

* temperature sensitivity: for every (model, probe, system) the three
  temperature pairs are compared with Welch's test and Holm-corrected
  within the configuration;
* system vs baseline: the per-temperature macro-F1 values of a system are
  treated as replicates and compared with the baseline system, Holm-corrected
  across systems within each (model, probe).

Stars always follow the Holm-adjusted p-value; both raw and adjusted values
are written so either convention can be read off.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

from .errors import ValidationError
from .rag import SYSTEMS, TEMPERATURES, RunRecord
from .stats import (METRICS, MetricSet, TTestResult, holm_adjust, mean_metrics, median_or_zero,
                    score_labels, stars, welch_t_test)

log = logging.getLogger(__name__)

NO_CHANGE_TOL = 1e-9
CSV_COLUMNS = ("model", "probe", "system", "temperature", "metric", "value",
               "p_raw", "p_adj", "stars", "cohens_d")


@dataclass
class Comparison:
    model: str
    probe: str
    system: str
    label: str              # baseline system name or "T1-T2"
    diff: float
    test: TTestResult | None
    p_adj: float | None = None

    @property
    def stars(self) -> str:
        return stars(self.p_adj)


@dataclass
class Analysis:
    models: list[str]
    probes: list[str]
    systems: list[str]
    temperatures: tuple[float, ...]
    baseline: str
    cells: dict[tuple, list[MetricSet]]          # (model, probe, system, T) -> one MetricSet per replicate
    items: dict[tuple, list[bool]]               # (model, probe, system, T) -> correctness per record
    vs_baseline: list[Comparison] = field(default_factory=list)
    temperature_tests: list[Comparison] = field(default_factory=list)
    gaps: list[str] = field(default_factory=list)
    n_records: int = 0
    n_errors: int = 0

    def cell_mean(self, model, probe, system, t) -> MetricSet | None:
        sets = self.cells.get((model, probe, system, t))
        return mean_metrics(sets) if sets else None

    def averaged(self, model, probe, system) -> MetricSet | None:
        per_t = [self.cell_mean(model, probe, system, t) for t in self.temperatures]
        if any(m is None for m in per_t):
            return None
        return mean_metrics(per_t)

    def delta(self, model, probe, system, metric: str = "macro_f1") -> float | None:
        first = self.cell_mean(model, probe, system, self.temperatures[0])
        last = self.cell_mean(model, probe, system, self.temperatures[-1])
        if first is None or last is None:
            return None
        return getattr(last, metric) - getattr(first, metric)

    @property
    def complete(self) -> bool:
        return not self.gaps


def _ordered(values, preferred: Sequence[str] = ()) -> list[str]:
    seen = list(dict.fromkeys(values))
    head = [v for v in preferred if v in seen]
    return head + [v for v in seen if v not in head]


def analyze(records: Sequence[RunRecord], baseline: str = "no_rag",
            temperatures: Sequence[float] | None = None,
            systems: Sequence[str] | None = None) -> Analysis:
    """Score every cell and run both significance analyses."""
    if not records:
        raise ValidationError("journal is empty")
    temps = tuple(sorted({float(t) for t in (temperatures or TEMPERATURES)}))
    models = _ordered(r.model for r in records)
    probes = _ordered(r.probe for r in records)
    systems = list(systems) if systems else _ordered((r.system for r in records), SYSTEMS)
    if baseline not in systems:
        systems.insert(0, baseline)

    by_rep: dict[tuple, list[RunRecord]] = defaultdict(list)
    for r in records:
        by_rep[r.cell() + (r.replicate,)].append(r)
    cells: dict[tuple, list[MetricSet]] = defaultdict(list)
    items: dict[tuple, list[bool]] = defaultdict(list)
    for key in sorted(by_rep, key=lambda k: k[-1]):
        recs = by_rep[key]
        cells[key[:-1]].append(score_labels([r.key for r in recs], [r.parsed_letter for r in recs]))
        items[key[:-1]].extend(r.correct for r in recs)

    a = Analysis(models, probes, systems, temps, baseline, dict(cells), dict(items),
                 n_records=len(records), n_errors=sum(r.error is not None for r in records))
    _find_gaps(a, records)
    _temperature_tests(a)
    _baseline_tests(a)
    return a


def _find_gaps(a: Analysis, records: Sequence[RunRecord]) -> None:
    expected_items = defaultdict(set)
    for r in records:
        expected_items[r.probe].add(r.item_id)
    n_reps = max(r.replicate for r in records) + 1
    for model in a.models:
        for probe in a.probes:
            for system in a.systems:
                for t in a.temperatures:
                    key = (model, probe, system, t)
                    want = len(expected_items[probe]) * n_reps
                    have = len(a.items.get(key, []))
                    if have == 0:
                        a.gaps.append(f"missing cell: {model} / {probe} / {system} / T={t:g}")
                    elif have < want:
                        a.gaps.append(f"incomplete cell: {model} / {probe} / {system} / T={t:g} "
                                      f"({have} of {want} records)")


def _samples_for_temperature(a: Analysis, key: tuple) -> list[float]:
    """Replicate-level macro-F1 when there are replicates, else per-item correctness."""
    sets = a.cells[key]
    if len(sets) >= 2:
        return [m.macro_f1 for m in sets]
    return [1.0 if c else 0.0 for c in a.items[key]]


def _temperature_tests(a: Analysis) -> None:
    pairs = list(combinations(a.temperatures, 2))
    for model in a.models:
        for probe in a.probes:
            for system in a.systems:
                keys = {t: (model, probe, system, t) for t in a.temperatures}
                if any(k not in a.cells for k in keys.values()):
                    continue
                group = []
                for t1, t2 in pairs:
                    x = _samples_for_temperature(a, keys[t2])
                    y = _samples_for_temperature(a, keys[t1])
                    test = welch_t_test(x, y) if len(x) >= 2 and len(y) >= 2 else None
                    diff = a.cell_mean(*keys[t2]).macro_f1 - a.cell_mean(*keys[t1]).macro_f1
                    group.append(Comparison(model, probe, system, f"{t1:g}-{t2:g}", diff, test))
                _holm_into(group)
                a.temperature_tests.extend(group)


def _baseline_tests(a: Analysis) -> None:
    for model in a.models:
        for probe in a.probes:
            base = _replicate_values(a, model, probe, a.baseline)
            if base is None:
                continue
            group = []
            for system in a.systems:
                if system == a.baseline:
                    continue
                vals = _replicate_values(a, model, probe, system)
                if vals is None:
                    continue
                test = welch_t_test(vals, base) if len(vals) >= 2 and len(base) >= 2 else None
                diff = sum(vals) / len(vals) - sum(base) / len(base)
                group.append(Comparison(model, probe, system, a.baseline, diff, test))
            _holm_into(group)
            a.vs_baseline.extend(group)


def _replicate_values(a: Analysis, model, probe, system) -> list[float] | None:
    """Macro-F1 of every (temperature, replicate) run of one configuration."""
    out = []
    for t in a.temperatures:
        sets = a.cells.get((model, probe, system, t))
        if not sets:
            return None
        out.extend(m.macro_f1 for m in sets)
    return out


def _holm_into(group: list[Comparison]) -> None:
    tested = [c for c in group if c.test is not None]
    for c, p in zip(tested, holm_adjust([c.test.p_value for c in tested])):
        c.p_adj = p


# -- sensitivity summary ----------------------------------------------------

@dataclass(frozen=True)
class SensitivityRow:
    label: str
    increases: int
    decreases: int
    no_change: int
    median_delta: float


def sensitivity_rows(deltas: Sequence[float], label: str) -> SensitivityRow:
    inc = sum(d > NO_CHANGE_TOL for d in deltas)
    dec = sum(d < -NO_CHANGE_TOL for d in deltas)
    return SensitivityRow(label, inc, dec, len(deltas) - inc - dec, median_or_zero(list(deltas)))


def sensitivity_by_system(a: Analysis) -> list[SensitivityRow]:
    rows = []
    for system in a.systems:
        ds = [a.delta(m, p, system) for m in a.models for p in a.probes]
        rows.append(sensitivity_rows([d for d in ds if d is not None], system))
    return rows


# -- rendering --------------------------------------------------------------

def _f2(x: float | None) -> str:
    return "n/a" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.2f}"


def _p(x: float | None) -> str:
    return "n/a" if x is None or math.isnan(x) else f"{x:.3g}"


def _sup(s: str) -> str:
    return f"<sup>{s}</sup>" if s else ""


def _table(header: Sequence[str], rows: Sequence[Sequence[str]], align: str = "l") -> list[str]:
    out = ["| " + " | ".join(header) + " |",
           "|" + "|".join([":---"] + ["---:" if align == "r" else ":---:"] * (len(header) - 1)) + "|"]
    out += ["| " + " | ".join(r) + " |" for r in rows]
    return out


def render_markdown(a: Analysis) -> str:
    temps = ", ".join(f"{t:g}" for t in a.temperatures)
    lines = ["# Evaluation report", "",
             f"{a.n_records} run records; {len(a.models)} model(s), {len(a.probes)} probe set(s), "
             f"{len(a.systems)} system(s), temperatures {temps}. Baseline: `{a.baseline}`.", ""]
    if a.n_errors:
        lines += [f"{a.n_errors} record(s) carry provider errors and are scored as invalid answers.", ""]
    if a.gaps:
        lines += ["## Gaps", "", "The grid is incomplete; affected cells print as n/a.", ""]
        lines += [f"- {g}" for g in a.gaps] + [""]

    for probe in a.probes:
        lines += [f"## {probe}: metrics averaged over temperatures ({temps})", ""]
        rows = []
        for model in a.models:
            acc, mac = [model, "Acc / F1 micro"], ["", "Macro P / R / F1"]
            for system in a.systems:
                m = a.averaged(model, probe, system)
                acc.append("n/a" if m is None else f"{m.accuracy:.2f} / {m.micro_f1:.2f}")
                mac.append("n/a" if m is None else
                           f"{m.macro_precision:.2f} / {m.macro_recall:.2f} / {m.macro_f1:.2f}")
            rows += [acc, mac]
        lines += _table(["Model", "Metric", *a.systems], rows) + [""]

    comp = {(c.model, c.probe, c.system): c for c in a.vs_baseline}
    order = [a.baseline] + [s for s in a.systems if s != a.baseline]
    for probe in a.probes:
        lines += [f"## {probe}: macro-F1 and significance vs `{a.baseline}`", ""]
        rows = []
        for model in a.models:
            row = [model]
            for system in order:
                m = a.averaged(model, probe, system)
                c = comp.get((model, probe, system))
                row.append(_f2(None if m is None else m.macro_f1) + _sup(c.stars if c else ""))
            rows.append(row)
        lines += _table(["Model", *order], rows)
        lines += ["", f"Stars: Welch two-sample t-test vs `{a.baseline}` on the per-temperature runs, "
                  "Holm-adjusted across systems within each model: * p<.05, ** p<.01, *** p<.001.", ""]
        detail = []
        for c in a.vs_baseline:
            if c.probe != probe:
                continue
            t = c.test
            detail.append([c.model, c.system, f"{c.diff:+.3f}",
                           _f2(t.t_statistic if t else None), _f2(t.degrees_of_freedom if t else None),
                           _p(t.p_value if t else None), _p(c.p_adj), c.stars or "",
                           _f2(t.cohens_d if t else None)])
        if detail:
            lines += _table(["Model", "System", "Δ macro-F1", "t", "df", "p raw", "p adj", "stars", "d"],
                            detail) + [""]

    lines += [f"## Temperature sensitivity by graph (macro-F1, T={a.temperatures[0]:g} to "
              f"T={a.temperatures[-1]:g})", ""]
    rows = [[r.label, str(r.increases), str(r.decreases), str(r.no_change), f"{r.median_delta:.2f}"]
            for r in sensitivity_by_system(a)]
    all_d = [d for d in (a.delta(m, p, s) for m in a.models for p in a.probes for s in a.systems)
             if d is not None]
    total = sensitivity_rows(all_d, "all")
    rows.append([f"**{total.label}**", str(total.increases), str(total.decreases), str(total.no_change),
                 f"{total.median_delta:.2f}"])
    lines += _table(["Graph", "Increases", "Decreases", "No change", "Median Δ"], rows) + [""]

    lines += ["## Temperature tests per configuration", "",
              "Pairwise Welch tests on macro-F1 across temperatures, Holm-adjusted within each "
              "configuration. With a single run per temperature the test falls back to per-item "
              "correctness.", ""]
    rows = []
    for c in a.temperature_tests:
        t = c.test
        rows.append([c.model, c.probe, c.system, c.label, f"{c.diff:+.3f}",
                     _p(t.p_value if t else None), _p(c.p_adj), c.stars or "", _f2(t.cohens_d if t else None)])
    lines += _table(["Model", "Probe", "System", "T pair", "Δ macro-F1", "p raw", "p adj", "stars", "d"], rows)
    return "\n".join(lines) + "\n"


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def render_csv(a: Analysis) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    comp = {(c.model, c.probe, c.system): c for c in a.vs_baseline}
    for model in a.models:
        for probe in a.probes:
            for system in a.systems:
                for t in a.temperatures:
                    m = a.cell_mean(model, probe, system, t)
                    for metric in METRICS:
                        w.writerow([model, probe, system, f"{t:g}", metric,
                                    _num(getattr(m, metric) if m else None), "", "", "", ""])
                avg = a.averaged(model, probe, system)
                c = comp.get((model, probe, system))
                for metric in METRICS:
                    row = [model, probe, system, "mean", metric, _num(getattr(avg, metric) if avg else None)]
                    if metric == "macro_f1" and c is not None:
                        t = c.test
                        row += [_num(t.p_value if t else None), _num(c.p_adj), c.stars,
                                _num(t.cohens_d if t else None)]
                    else:
                        row += ["", "", "", ""]
                    w.writerow(row)
    for c in a.temperature_tests:
        t = c.test
        w.writerow([c.model, c.probe, c.system, c.label, "delta_macro_f1", _num(c.diff),
                    _num(t.p_value if t else None), _num(c.p_adj), c.stars, _num(t.cohens_d if t else None)])
    return buf.getvalue()


@dataclass
class ReportResult:
    markdown: Path
    csv: Path
    analysis: Analysis

    @property
    def exit_code(self) -> int:
        return 0 if self.analysis.complete else 2


def emit_report(records: Sequence[RunRecord], baseline: str = "no_rag", out_dir=".",
                temperatures: Sequence[float] | None = None,
                systems: Sequence[str] | None = None) -> ReportResult:
    """Write ``report.md`` and ``report.csv`` into ``out_dir``.

    An incomplete grid still produces both files, with the gaps listed, and
    the result's ``exit_code`` is 2.
    """
    a = analyze(records, baseline, temperatures, systems)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    md, cs = out / "report.md", out / "report.csv"
    md.write_text(render_markdown(a), encoding="utf-8")
    cs.write_text(render_csv(a), encoding="utf-8")
    for g in a.gaps:
        log.warning("%s", g)
    return ReportResult(md, cs, a)
