"""Annotation scheme definitions and submission validation.

Eight scheme kinds are supported: multiselect (checkboxes), radio, best-worst
scaling, Likert scale, free text, span labels, number, and dropdown. Schemes
are declared in the task config; submissions are validated against them here
before anything is persisted.

Span offsets are Unicode code-point offsets (Python string indices), not
bytes. The frontend converts its UTF-16 selection offsets before submitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, TYPE_CHECKING

if TYPE_CHECKING:
    from .ingest import Instance

SCHEME_KINDS = (
    "multiselect",
    "radio",
    "best_worst",
    "likert",
    "free_text",
    "span",
    "number",
    "dropdown",
)

# Kinds whose choice set comes from an explicit option list.
OPTION_KINDS = ("multiselect", "radio", "dropdown", "best_worst")

# Kinds a survey question may use (spans/best-worst need instance context).
SURVEY_KINDS = ("radio", "likert", "free_text", "number", "dropdown", "multiselect")


@dataclass(frozen=True)
class Option:
    value: str
    display: str
    keybinding: str | None = None
    tooltip: str | None = None
    image: str | None = None  # media reference shown instead of plain text


@dataclass(frozen=True)
class AnnotationScheme:
    name: str
    kind: str
    question: str = ""
    options: tuple[Option, ...] = ()
    likert_size: int | None = None
    span_labels: tuple[str, ...] = ()
    required: bool = False


@dataclass(frozen=True)
class SpanLabel:
    document_index: int
    start: int
    end: int
    label: str


@dataclass(frozen=True)
class LabelValue:
    """One submitted value for one scheme; shape depends on the scheme kind."""

    scheme: str
    value: Any


@dataclass(frozen=True)
class SchemeError:
    scheme: str
    error: str


class SubmissionError(Exception):
    """Raised when a submission violates scheme semantics; carries all errors."""

    def __init__(self, errors: list[SchemeError]):
        self.errors = errors
        super().__init__("; ".join(f"{e.scheme}: {e.error}" for e in errors))

    def as_payload(self) -> list[dict[str, str]]:
        return [{"scheme": e.scheme, "error": e.error} for e in self.errors]


def check_scheme(scheme: AnnotationScheme) -> list[str]:
    """Structural validation of a scheme declaration. Returns problem strings."""
    problems = []
    if not scheme.name:
        problems.append("scheme name must be non-empty")
    if scheme.kind not in SCHEME_KINDS:
        problems.append(
            f"unknown scheme kind {scheme.kind!r}; expected one of {', '.join(SCHEME_KINDS)}"
        )
        return problems
    if scheme.kind in OPTION_KINDS and not scheme.options:
        problems.append(f"{scheme.kind} scheme {scheme.name!r} requires non-empty options")
    if scheme.kind == "likert":
        if scheme.likert_size is None or scheme.likert_size < 2:
            problems.append(f"likert scheme {scheme.name!r} requires likert_size >= 2")
    if scheme.kind == "span" and not scheme.span_labels:
        problems.append(f"span scheme {scheme.name!r} requires non-empty span_labels")
    displays = [o.display for o in scheme.options]
    if len(set(displays)) != len(displays):
        problems.append(f"scheme {scheme.name!r} has duplicate option display names")
    values = [o.value for o in scheme.options]
    if len(set(values)) != len(values):
        problems.append(f"scheme {scheme.name!r} has duplicate option values")
    return problems


def _document_lengths(instance: "Instance | None") -> list[int]:
    if instance is None:
        return []
    from .ingest import instance_documents

    return [len(doc.payload) for _, doc in instance_documents(instance)]


def _canon_span_list(
    scheme: AnnotationScheme, value: Any, doc_lengths: list[int], errors: list[SchemeError]
) -> list[dict[str, Any]] | None:
    if not isinstance(value, (list, tuple)):
        errors.append(SchemeError(scheme.name, "span value must be a list of spans"))
        return None
    spans: list[dict[str, Any]] = []
    seen = set()
    for raw in value:
        if isinstance(raw, SpanLabel):
            span = raw
        elif isinstance(raw, dict):
            try:
                span = SpanLabel(
                    document_index=int(raw["document_index"]),
                    start=int(raw["start"]),
                    end=int(raw["end"]),
                    label=str(raw["label"]),
                )
            except (KeyError, TypeError, ValueError):
                errors.append(
                    SchemeError(
                        scheme.name,
                        "each span needs document_index, start, end, and label",
                    )
                )
                return None
        else:
            errors.append(SchemeError(scheme.name, "each span must be an object"))
            return None
        if span.label not in scheme.span_labels:
            errors.append(SchemeError(scheme.name, f"unknown span label {span.label!r}"))
            return None
        if span.start >= span.end:
            errors.append(SchemeError(scheme.name, "start must precede end"))
            return None
        if span.start < 0:
            errors.append(SchemeError(scheme.name, "span start must be >= 0"))
            return None
        if doc_lengths:
            if not 0 <= span.document_index < len(doc_lengths):
                errors.append(
                    SchemeError(scheme.name, f"no document at index {span.document_index}")
                )
                return None
            if span.end > doc_lengths[span.document_index]:
                errors.append(
                    SchemeError(
                        scheme.name,
                        f"span end {span.end} exceeds document length "
                        f"{doc_lengths[span.document_index]}",
                    )
                )
                return None
        key = (span.document_index, span.start, span.end, span.label)
        if key in seen:
            errors.append(
                SchemeError(scheme.name, "duplicate span with identical offsets and label")
            )
            return None
        seen.add(key)
        spans.append(
            {
                "document_index": span.document_index,
                "start": span.start,
                "end": span.end,
                "label": span.label,
            }
        )
    spans.sort(key=lambda s: (s["document_index"], s["start"], s["end"], s["label"]))
    return spans


def _best_worst_choices(scheme: AnnotationScheme, instance: "Instance | None") -> list[str]:
    """Selectable values for a best-worst scheme.

    Over list-content instances each document is a selectable slot; the
    scheme's options are mapped to documents by position, so the choice set
    is truncated to the document count when the instance has fewer documents.
    """
    values = [o.value for o in scheme.options]
    if instance is not None and isinstance(instance.content, tuple):
        return values[: len(instance.content)] if len(values) >= len(instance.content) else values
    return values


def _canon_value(
    scheme: AnnotationScheme,
    value: Any,
    instance: "Instance | None",
    errors: list[SchemeError],
) -> Any:
    kind = scheme.kind
    option_values = {o.value for o in scheme.options}

    if kind == "multiselect":
        if isinstance(value, str) or not isinstance(value, (list, tuple, set, frozenset)):
            errors.append(SchemeError(scheme.name, "multiselect value must be a list of options"))
            return None
        chosen = [str(v) for v in value]
        unknown = [v for v in chosen if v not in option_values]
        if unknown:
            errors.append(SchemeError(scheme.name, f"unknown option value {unknown[0]!r}"))
            return None
        return sorted(set(chosen))

    if kind in ("radio", "dropdown"):
        if not isinstance(value, str):
            errors.append(SchemeError(scheme.name, f"{kind} value must be a single option value"))
            return None
        if value not in option_values:
            errors.append(SchemeError(scheme.name, f"unknown option value {value!r}"))
            return None
        return value

    if kind == "best_worst":
        if isinstance(value, dict):
            best, worst = value.get("best"), value.get("worst")
        elif isinstance(value, (list, tuple)) and len(value) == 2:
            best, worst = value
        else:
            best = worst = None
        if not isinstance(best, str) or not isinstance(worst, str):
            errors.append(SchemeError(scheme.name, "best_worst value needs best and worst"))
            return None
        allowed = set(_best_worst_choices(scheme, instance))
        for v in (best, worst):
            if v not in allowed:
                errors.append(SchemeError(scheme.name, f"unknown option value {v!r}"))
                return None
        if best == worst:
            errors.append(SchemeError(scheme.name, "best and worst must differ"))
            return None
        return {"best": best, "worst": worst}

    if kind == "likert":
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(SchemeError(scheme.name, "likert value must be an integer"))
            return None
        assert scheme.likert_size is not None
        if not 1 <= value <= scheme.likert_size:
            errors.append(
                SchemeError(
                    scheme.name, f"likert value must be in [1, {scheme.likert_size}]"
                )
            )
            return None
        return value

    if kind == "free_text":
        if not isinstance(value, str):
            errors.append(SchemeError(scheme.name, "free_text value must be a string"))
            return None
        return value

    if kind == "number":
        if isinstance(value, bool):
            errors.append(SchemeError(scheme.name, "number value must be numeric"))
            return None
        if isinstance(value, (int, float)):
            return value
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
        errors.append(SchemeError(scheme.name, "number value must be numeric"))
        return None

    if kind == "span":
        return _canon_span_list(scheme, value, _document_lengths(instance), errors)

    raise AssertionError(f"unhandled kind {kind}")


def validate_submission(
    schemes: tuple[AnnotationScheme, ...] | list[AnnotationScheme],
    submitted: list[LabelValue],
    instance: "Instance | None" = None,
) -> dict[str, Any]:
    """Validate submitted label values against the task's schemes.

    Returns the canonical payload (scheme name -> JSON-friendly value) that is
    persisted and exported. Raises SubmissionError with the full per-scheme
    error list when anything is off; nothing is partially accepted.
    """
    by_name = {s.name: s for s in schemes}
    errors: list[SchemeError] = []
    payload: dict[str, Any] = {}
    seen: set[str] = set()

    for lv in submitted:
        if lv.scheme not in by_name:
            errors.append(SchemeError(lv.scheme, "unknown scheme"))
            continue
        if lv.scheme in seen:
            errors.append(SchemeError(lv.scheme, "duplicate value for scheme"))
            continue
        seen.add(lv.scheme)
        canon = _canon_value(by_name[lv.scheme], lv.value, instance, errors)
        if canon is not None:
            payload[lv.scheme] = canon

    for scheme in schemes:
        if scheme.required and scheme.name not in seen:
            errors.append(SchemeError(scheme.name, "missing required value"))
        elif scheme.required and scheme.name in payload:
            # An empty multiselect/free-text does not satisfy a required scheme.
            v = payload[scheme.name]
            if scheme.kind == "multiselect" and v == []:
                errors.append(SchemeError(scheme.name, "missing required value"))
            if scheme.kind == "free_text" and v == "":
                errors.append(SchemeError(scheme.name, "missing required value"))
            if scheme.kind == "span" and v == []:
                errors.append(SchemeError(scheme.name, "missing required value"))

    if errors:
        raise SubmissionError(errors)
    return payload


def labels_from_json(raw: dict[str, Any]) -> list[LabelValue]:
    """Convert a JSON submit body's labels object into LabelValue records."""
    return [LabelValue(scheme=name, value=value) for name, value in raw.items()]
