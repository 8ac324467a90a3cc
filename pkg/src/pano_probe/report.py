"""Rendering of probe reports into table text and of score distributions
into Tukey boxplot summaries (plot-ready data, no plotting here)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import ValidationError
from .stats import quartiles

if TYPE_CHECKING:
    from .probes import ProbeReport

__all__ = ["BoxplotSummary", "boxplot_summary", "render_table"]

# p-values below this render as "0", mirroring how vanishing p-values are
# conventionally reported; the raw value is kept in the CSV extra column.
P_DISPLAY_CLAMP = 1e-4


@dataclass(frozen=True)
class BoxplotSummary:
    label: str
    q1: float
    median: float
    q3: float
    lower_fence: float
    upper_fence: float
    outliers: tuple[float, ...]
    n: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "lower_fence": self.lower_fence,
            "upper_fence": self.upper_fence,
            "outliers": list(self.outliers),
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BoxplotSummary":
        return cls(
            label=doc["label"],
            q1=doc["q1"],
            median=doc["median"],
            q3=doc["q3"],
            lower_fence=doc["lower_fence"],
            upper_fence=doc["upper_fence"],
            outliers=tuple(doc["outliers"]),
            n=doc["n"],
        )


def boxplot_summary(values, label: str) -> BoxplotSummary:
    """Tukey five-number summary with 1.5*IQR fences and sorted outliers.

    Quartiles use the same linear-interpolation rule as the stability bound,
    so upper_fence equals the bound computed from identical input.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValidationError("boxplot of an empty sample")
    q1, q3 = quartiles(v)
    median = float(np.percentile(v, 50.0))
    iqr = q3 - q1
    lower = q1 - 1.5 * iqr
    upper = q3 + 1.5 * iqr
    outliers = tuple(sorted(float(x) for x in v[(v < lower) | (v > upper)]))
    return BoxplotSummary(
        label=label,
        q1=q1,
        median=median,
        q3=q3,
        lower_fence=lower,
        upper_fence=upper,
        outliers=outliers,
        n=int(v.size),
    )


def _fmt_stat(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return f"{x:.1f}"  # average ranks only ever introduce halves


def _fmt_p(p: float) -> str:
    if p < P_DISPLAY_CLAMP:
        return "0"
    return f"{p:.4f}"


def _fmt_beta(b: float) -> str:
    return f"{b:.4f}"


def _decision_text(reject) -> str:
    if reject is None:
        return "no_evidence"
    return "reject" if reject else "fail_to_reject"


def render_table(report: "ProbeReport", format: str = "markdown") -> str:
    """Render per-condition test rows as CSV or Markdown.

    Columns: condition, [beta for visual probes], statistic, p_value,
    [p_value_raw in CSV only], decision.  Output is deterministic and
    locale-independent.
    """
    if format not in ("csv", "markdown"):
        raise ValidationError(f"unknown table format {format!r}")
    visual = report.probe_kind == "visual"
    columns = ["condition"]
    if visual:
        columns.append("beta")
    columns += ["statistic", "p_value"]
    if format == "csv":
        columns.append("p_value_raw")
    columns.append("decision")

    rows = []
    for cond in report.per_condition:
        row = [cond.label]
        if visual:
            row.append(_fmt_beta(report.bound.beta) if report.bound else "")
        if cond.result is None:
            row += ["", ""]
            if format == "csv":
                row.append("")
        else:
            row.append(_fmt_stat(cond.result.statistic))
            row.append(_fmt_p(cond.result.p_value))
            if format == "csv":
                row.append(format_raw_p(cond.result.p_value))
        row.append(_decision_text(cond.reject))
        rows.append(row)

    if format == "csv":
        lines = ["# columns: " + ", ".join(columns), ",".join(columns)]
        lines += [",".join(r) for r in rows]
        return "\n".join(lines) + "\n"

    widths = [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c)
              for i, c in enumerate(columns)]
    def md_row(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    lines = [md_row(columns),
             "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    lines += [md_row(r) for r in rows]
    return "\n".join(lines) + "\n"


def format_raw_p(p: float) -> str:
    return format(p, ".17g")
