"""The two probing protocols, end to end.

Textual probing asks whether scores drop when the panoramic format cue in a
prompt is swapped for a generic cue (one-sided superiority test per cue).
Visual probing asks whether scores stay within a flip-derived stability bound
under every scheduled horizontal circular shift.  Both take any embedding
provider, so they run the same way against a file store or a live service.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import Dataset
from .errors import DegenerateSampleError, ValidationError
from .report import BoxplotSummary, boxplot_summary
from .scoring import (
    KIND_IMAGE,
    KIND_TEXT,
    PROMPT_ORIG,
    clip_score,
    generic_prompt_variant,
)
from .stats import (
    StabilityBound,
    TestResult,
    shapiro_wilk,
    stability_bound,
    stability_test,
    superiority_test,
)
from .transforms import (
    VARIANT_FLIP,
    VARIANT_ORIG,
    shift_schedule,
    shift_variant_label,
)

__all__ = [
    "ProbeConfig",
    "ConditionResult",
    "ProbeReport",
    "probe_textual",
    "probe_visual",
    "compare_reports",
]

DEFAULT_GENERIC_CUES = ("", "image, ", "photo, ", "picture, ")

VERDICT_COMPREHENDS = "comprehends"
VERDICT_DOES_NOT = "does_not_comprehend"
VERDICT_INCONCLUSIVE = "inconclusive"

QUARTILE_RULE = "linear interpolation at position p*(n-1)"


@dataclass(frozen=True)
class ProbeConfig:
    alpha: float = 0.01
    divisions: int = 8
    format_cue: str = ""
    generic_cues: tuple[str, ...] = DEFAULT_GENERIC_CUES
    bound_override: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.divisions < 2:
            raise ValidationError(f"divisions must be >= 2, got {self.divisions}")


@dataclass(frozen=True)
class ConditionResult:
    """One tested condition (a generic cue or a shift magnitude).

    reject None means the test could not run (all paired differences zero);
    the note says why.
    """

    label: str
    result: TestResult | None
    reject: bool | None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "result": self.result.to_dict() if self.result else None,
            "reject": self.reject,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ConditionResult":
        result = TestResult(**doc["result"]) if doc["result"] else None
        return cls(
            label=doc["label"],
            result=result,
            reject=doc["reject"],
            note=doc.get("note", ""),
        )


@dataclass
class ProbeReport:
    probe_kind: str  # "textual" | "visual"
    per_condition: list[ConditionResult]
    verdict: str
    bound: StabilityBound | None = None
    normality: list[tuple[str, TestResult | None]] = field(default_factory=list)
    score_summary: BoxplotSummary | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "probe_kind": self.probe_kind,
            "per_condition": [c.to_dict() for c in self.per_condition],
            "verdict": self.verdict,
            "bound": self.bound.to_dict() if self.bound else None,
            "normality": [
                {"label": label, "result": r.to_dict() if r else None}
                for label, r in self.normality
            ],
            "score_summary": self.score_summary.to_dict() if self.score_summary else None,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ProbeReport":
        bound = StabilityBound(**doc["bound"]) if doc.get("bound") else None
        normality = [
            (e["label"], TestResult(**e["result"]) if e["result"] else None)
            for e in doc.get("normality", [])
        ]
        summary = (
            BoxplotSummary.from_dict(doc["score_summary"])
            if doc.get("score_summary")
            else None
        )
        return cls(
            probe_kind=doc["probe_kind"],
            per_condition=[ConditionResult.from_dict(c) for c in doc["per_condition"]],
            verdict=doc["verdict"],
            bound=bound,
            normality=normality,
            score_summary=summary,
            metadata=doc.get("metadata", {}),
        )


def cue_condition_label(cue: str) -> str:
    return "cue:" + json.dumps(cue, ensure_ascii=False)


def _normality_entry(label: str, diffs) -> tuple[str, TestResult | None]:
    # advisory gate: recorded when computable (3 <= n <= 5000, non-constant),
    # never branching logic
    try:
        return label, shapiro_wilk(diffs)
    except ValidationError:
        return label, None


def _verdict(conditions: list[ConditionResult]) -> str:
    rejects = [c.reject for c in conditions]
    if any(r is None for r in rejects):
        return VERDICT_INCONCLUSIVE
    if all(rejects):
        return VERDICT_COMPREHENDS
    return VERDICT_DOES_NOT


def _base_metadata(dataset: Dataset, config: ProbeConfig) -> dict:
    return {
        "dataset": dataset.name,
        "pairs": len(dataset),
        "alpha": config.alpha,
        "quartile_rule": QUARTILE_RULE,
        "zero_differences": "discarded before ranking",
        "p_underflow": "raw float64 p-values; values below ~5e-324 underflow to 0",
    }


def _original_scores(dataset: Dataset, provider) -> list[float]:
    scores = []
    for pair in dataset.pairs:
        image = provider.fetch(pair.id, KIND_IMAGE, VARIANT_ORIG)
        text = provider.fetch(pair.id, KIND_TEXT, PROMPT_ORIG)
        scores.append(clip_score(image, text))
    return scores


def probe_textual(dataset: Dataset, provider, config: ProbeConfig) -> ProbeReport:
    """Keyword-manipulation superiority probe across all configured generic cues.

    For every cue, scores each pair's image against the original prompt and
    against the cue-substituted prompt, records the Shapiro-Wilk normality of
    the differences, and runs the one-sided superiority test.  Verdict is
    "comprehends" only when every cue's test rejects at alpha.
    """
    originals = _original_scores(dataset, provider)
    conditions: list[ConditionResult] = []
    normality: list[tuple[str, TestResult | None]] = []
    for cue in config.generic_cues:
        label = cue_condition_label(cue)
        variant = generic_prompt_variant(cue)
        generics = []
        for pair in dataset.pairs:
            image = provider.fetch(pair.id, KIND_IMAGE, VARIANT_ORIG)
            text = provider.fetch(pair.id, KIND_TEXT, variant)
            generics.append(clip_score(image, text))
        diffs = [o - g for o, g in zip(originals, generics)]
        normality.append(_normality_entry(label, diffs))
        try:
            result, reject = superiority_test(originals, generics, config.alpha)
            conditions.append(ConditionResult(label, result, reject))
        except DegenerateSampleError:
            conditions.append(
                ConditionResult(
                    label, None, None, note="no evidence: all paired differences are zero"
                )
            )
    metadata = _base_metadata(dataset, config)
    metadata["generic_cues"] = list(config.generic_cues)
    metadata["format_cue"] = config.format_cue
    return ProbeReport(
        probe_kind="textual",
        per_condition=conditions,
        verdict=_verdict(conditions),
        normality=normality,
        score_summary=boxplot_summary(originals, "orig"),
        metadata=metadata,
    )


def probe_visual(dataset: Dataset, provider, config: ProbeConfig) -> ProbeReport:
    """Circular-shift stability probe across the full shift schedule.

    Derives the stability bound from horizontal-flip score differences
    (unless bound_override is given), then tests every scheduled shift
    against it.  Verdict is "comprehends" only when every shift's
    non-stability null is rejected at alpha.
    """
    originals = _original_scores(dataset, provider)
    texts = {
        pair.id: provider.fetch(pair.id, KIND_TEXT, PROMPT_ORIG)
        for pair in dataset.pairs
    }

    flip_scores = []
    for pair in dataset.pairs:
        image = provider.fetch(pair.id, KIND_IMAGE, VARIANT_FLIP)
        flip_scores.append(clip_score(image, texts[pair.id]))
    flip_abs_diffs = [abs(o - f) for o, f in zip(originals, flip_scores)]

    if config.bound_override is not None:
        if not config.bound_override > 0:
            raise ValidationError(
                f"bound_override must be positive, got {config.bound_override}"
            )
        bound = StabilityBound(
            beta=float(config.bound_override),
            q1=float("nan"),
            q3=float("nan"),
            iqr=float("nan"),
            sample_size=0,
        )
    else:
        bound = stability_bound(flip_abs_diffs)
        if not bound.beta > 0:
            raise ValidationError(
                "flip score differences are degenerate (beta = 0); "
                "supply bound_override to test against an external bound"
            )

    schedule = shift_schedule(dataset.width, config.divisions)
    conditions: list[ConditionResult] = []
    normality: list[tuple[str, TestResult | None]] = []
    for delta in schedule.magnitudes:
        label = shift_variant_label(delta)
        shifted = []
        for pair in dataset.pairs:
            image = provider.fetch(pair.id, KIND_IMAGE, label)
            shifted.append(clip_score(image, texts[pair.id]))
        abs_diffs = [abs(o - s) for o, s in zip(originals, shifted)]
        normality.append(_normality_entry(label, abs_diffs))
        try:
            result, reject = stability_test(originals, shifted, bound, config.alpha)
            conditions.append(ConditionResult(label, result, reject))
        except DegenerateSampleError:
            conditions.append(
                ConditionResult(
                    label, None, None,
                    note="no evidence: every |difference| equals the bound exactly",
                )
            )
    metadata = _base_metadata(dataset, config)
    metadata["divisions"] = config.divisions
    metadata["bound_source"] = (
        "override" if config.bound_override is not None else "flip quartiles"
    )
    return ProbeReport(
        probe_kind="visual",
        per_condition=conditions,
        verdict=_verdict(conditions),
        bound=bound,
        normality=normality,
        score_summary=boxplot_summary(originals, "orig"),
        metadata=metadata,
    )


def compare_reports(before: ProbeReport, after: ProbeReport) -> dict:
    """Per-condition decision flips plus score-distribution summaries for a
    frozen-vs-tuned comparison.  Both reports must cover the same probe kind
    and condition labels."""
    if before.probe_kind != after.probe_kind:
        raise ValidationError(
            f"cannot compare {before.probe_kind} report with {after.probe_kind} report"
        )
    before_labels = [c.label for c in before.per_condition]
    after_labels = [c.label for c in after.per_condition]
    if before_labels != after_labels:
        raise ValidationError(
            f"condition labels differ: {before_labels} vs {after_labels}"
        )
    after_by_label = {c.label: c for c in after.per_condition}
    flips = []
    for cond in before.per_condition:
        other = after_by_label[cond.label]
        flips.append(
            {
                "label": cond.label,
                "before": cond.reject,
                "after": other.reject,
                "flipped": cond.reject != other.reject,
            }
        )
    return {
        "probe_kind": before.probe_kind,
        "conditions": flips,
        "flipped_count": sum(1 for f in flips if f["flipped"]),
        "verdict_before": before.verdict,
        "verdict_after": after.verdict,
        "scores_before": before.score_summary.to_dict() if before.score_summary else None,
        "scores_after": after.score_summary.to_dict() if after.score_summary else None,
    }
