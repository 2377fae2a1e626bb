"""Quality control: prestudy tests, attention checks, and screening surveys.

The annotator flow is fixed: pre-surveys, then the prestudy qualification
test (when configured), then the main queue with attention items interleaved,
then post-surveys. Gold answers are compared by exact equality on the
canonical payload, so multiselect answers compare as sets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Mapping

from .ingest import Instance
from .schemes import (
    AnnotationScheme,
    SURVEY_KINDS,
    check_scheme,
    labels_from_json,
    validate_submission,
)


@dataclass(frozen=True)
class GoldItem:
    """A gold-labeled instance with the expected canonical answers."""

    instance: Instance
    answers: Mapping[str, Any]


@dataclass(frozen=True)
class PrestudyConfig:
    test_items: tuple[GoldItem, ...]
    pass_threshold: float


@dataclass(frozen=True)
class AttentionConfig:
    test_items: tuple[GoldItem, ...]
    insertion_rate: float
    fail_threshold: int
    on_fail: str = "flag"  # "flag" | "block"


@dataclass(frozen=True)
class SurveyPage:
    key: str
    title: str
    questions: tuple[AnnotationScheme, ...]
    template: str | None = None  # built-in template id this page came from


@dataclass(frozen=True)
class QualityControlConfig:
    prestudy: PrestudyConfig | None = None
    attention: AttentionConfig | None = None
    pre_surveys: tuple[SurveyPage, ...] = ()
    post_surveys: tuple[SurveyPage, ...] = ()


@dataclass
class QualityStatus:
    # "not_required" | "pending" | "passed" | "failed"; pending only while a
    # configured prestudy has unanswered items.
    prestudy_passed: str = "not_required"
    attention_failures: int = 0
    state: str = "active"  # "active" | "flagged" | "blocked"

    def as_dict(self) -> dict[str, Any]:
        return {
            "prestudy_passed": self.prestudy_passed,
            "attention_failures": self.attention_failures,
            "state": self.state,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "QualityStatus":
        return cls(
            prestudy_passed=raw.get("prestudy_passed", "not_required"),
            attention_failures=int(raw.get("attention_failures", 0)),
            state=raw.get("state", "active"),
        )


def check_quality_config(
    qc: QualityControlConfig, schemes: tuple[AnnotationScheme, ...]
) -> list[str]:
    """Structural checks; gold answers must validate against the task schemes."""
    problems: list[str] = []
    if qc.prestudy is not None:
        if not 0 < qc.prestudy.pass_threshold <= 1:
            problems.append("quality_control.prestudy.pass_threshold must be in (0, 1]")
        if not qc.prestudy.test_items:
            problems.append("quality_control.prestudy.test_items must be non-empty")
        problems += _check_gold_items(qc.prestudy.test_items, schemes, "prestudy")
    if qc.attention is not None:
        if not 0 <= qc.attention.insertion_rate < 1:
            problems.append("quality_control.attention.insertion_rate must be in [0, 1)")
        if qc.attention.fail_threshold < 1:
            problems.append("quality_control.attention.fail_threshold must be >= 1")
        if qc.attention.on_fail not in ("flag", "block"):
            problems.append("quality_control.attention.on_fail must be 'flag' or 'block'")
        if not qc.attention.test_items:
            problems.append("quality_control.attention.test_items must be non-empty")
        problems += _check_gold_items(qc.attention.test_items, schemes, "attention")
    for phase, pages in (("pre_surveys", qc.pre_surveys), ("post_surveys", qc.post_surveys)):
        for page in pages:
            names = [q.name for q in page.questions]
            if len(set(names)) != len(names):
                problems.append(f"{phase} page {page.title!r} has duplicate question names")
            for question in page.questions:
                if question.kind not in SURVEY_KINDS:
                    problems.append(
                        f"{phase} page {page.title!r}: question {question.name!r} kind "
                        f"{question.kind!r} is not usable in surveys"
                    )
                problems += check_scheme(question)
    return problems


def _check_gold_items(
    items: tuple[GoldItem, ...], schemes: tuple[AnnotationScheme, ...], where: str
) -> list[str]:
    problems = []
    for i, item in enumerate(items):
        try:
            validate_submission(
                list(schemes), labels_from_json(dict(item.answers)), item.instance
            )
        except Exception as exc:
            problems.append(
                f"quality_control.{where}.test_items[{i}]: gold answers invalid ({exc})"
            )
    return problems


def score_gold_answer(gold: GoldItem, payload: Mapping[str, Any]) -> bool:
    """Exact-match comparison on the canonical payload; no partial credit."""
    for scheme_name, expected in gold.answers.items():
        if payload.get(scheme_name) != expected:
            return False
    return True


def evaluate_prestudy(
    prestudy: PrestudyConfig, submitted: list[Mapping[str, Any]]
) -> tuple[str, float]:
    """Score a completed prestudy. Returns (verdict, score)."""
    if len(submitted) != len(prestudy.test_items):
        raise ValueError(
            f"prestudy expects {len(prestudy.test_items)} answers, got {len(submitted)}"
        )
    correct = sum(
        1
        for gold, payload in zip(prestudy.test_items, submitted)
        if score_gold_answer(gold, payload)
    )
    score = correct / len(prestudy.test_items)
    return ("passed" if score >= prestudy.pass_threshold else "failed"), score


def apply_prestudy_result(status: QualityStatus, verdict: str) -> QualityStatus:
    status.prestudy_passed = verdict
    if verdict == "failed":
        status.state = "blocked"
    return status


@dataclass(frozen=True)
class QueueEntry:
    """One slot in an annotator's queue: a real instance or an attention item."""

    instance_id: str
    kind: str = "main"  # "main" | "attention"
    gold_index: int | None = None

    def as_dict(self) -> dict[str, Any]:
        entry: dict[str, Any] = {"instance_id": self.instance_id, "kind": self.kind}
        if self.gold_index is not None:
            entry["gold_index"] = self.gold_index
        return entry

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "QueueEntry":
        return cls(
            instance_id=raw["instance_id"],
            kind=raw.get("kind", "main"),
            gold_index=raw.get("gold_index"),
        )


def insert_attention_tests(
    queue: list[QueueEntry], attention: AttentionConfig | None, seed: int
) -> list[QueueEntry]:
    """Interleave round(rate * |queue|) gold items at seeded uniform positions.

    Gold items are cycled from the configured test items. The returned entries
    carry the attention marker server-side only; the render model built from
    them is indistinguishable from a real item.
    """
    if attention is None or not queue:
        return list(queue)
    count = round(attention.insertion_rate * len(queue))
    if count == 0:
        return list(queue)
    final_len = len(queue) + count
    rng = random.Random(seed)
    positions = sorted(rng.sample(range(final_len), count))
    golds = [
        QueueEntry(
            instance_id=attention.test_items[i % len(attention.test_items)].instance.id,
            kind="attention",
            gold_index=i % len(attention.test_items),
        )
        for i in range(count)
    ]
    result: list[QueueEntry] = []
    main_iter = iter(queue)
    gold_iter = iter(golds)
    position_set = set(positions)
    for slot in range(final_len):
        result.append(next(gold_iter) if slot in position_set else next(main_iter))
    return result


def score_attention(
    status: QualityStatus,
    attention: AttentionConfig,
    gold: GoldItem,
    payload: Mapping[str, Any],
) -> bool:
    """Update attention failure count and state; returns whether answer matched."""
    matched = score_gold_answer(gold, payload)
    if not matched:
        status.attention_failures += 1
        if status.attention_failures >= attention.fail_threshold:
            if attention.on_fail == "block":
                status.state = "blocked"
            elif status.state == "active":
                status.state = "flagged"
    return matched


def validate_survey_submission(
    page: SurveyPage, labels: dict[str, Any]
) -> dict[str, Any]:
    """Survey answers are validated exactly like scheme submissions."""
    payload = validate_submission(list(page.questions), labels_from_json(labels), None)
    return payload


def consent_declined(page: SurveyPage, payload: Mapping[str, Any]) -> bool:
    if page.template != "consent":
        return False
    return payload.get("consent") == "decline"


# Built-in survey page templates, referenced from the config by id.

def builtin_survey_page(template_id: str, key: str) -> SurveyPage:
    if template_id == "consent":
        return SurveyPage(
            key=key,
            title="Consent",
            template="consent",
            questions=(
                AnnotationScheme(
                    name="consent",
                    kind="radio",
                    question=(
                        "Do you consent to participate in this annotation study? "
                        "Your responses will be stored and analyzed."
                    ),
                    options=_options(("agree", "I agree"), ("decline", "I do not agree")),
                    required=True,
                ),
            ),
        )
    if template_id == "demographics":
        return SurveyPage(
            key=key,
            title="About you",
            template="demographics",
            questions=(
                AnnotationScheme(
                    name="age",
                    kind="number",
                    question="Your age",
                    required=False,
                ),
                AnnotationScheme(
                    name="gender",
                    kind="free_text",
                    question="Gender (free text, optional)",
                    required=False,
                ),
                AnnotationScheme(
                    name="education",
                    kind="dropdown",
                    question="Highest level of education completed",
                    options=_options(
                        ("none", "No formal education"),
                        ("secondary", "Secondary school"),
                        ("bachelor", "Bachelor's degree"),
                        ("master", "Master's degree"),
                        ("doctorate", "Doctorate"),
                        ("other", "Other"),
                    ),
                    required=False,
                ),
            ),
        )
    raise ValueError(f"unknown survey template {template_id!r}")


def _options(*pairs: tuple[str, str]):
    from .schemes import Option

    return tuple(Option(value=v, display=d) for v, d in pairs)
