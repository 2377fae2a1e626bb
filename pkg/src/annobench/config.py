"""Task configuration: parsing, validation, and serialization.

A task is described by one YAML file. The schema is documented in the README
field reference; unknown top-level keys are errors so typos fail fast instead
of silently disabling a feature. Relative paths (data files, template
override) are resolved against the config file's directory at load time, so a
loaded TaskConfig is location-independent and `serialize_config` round-trips
it exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .ingest import record_to_instance
from .quality import (
    AttentionConfig,
    GoldItem,
    PrestudyConfig,
    QualityControlConfig,
    SurveyPage,
    builtin_survey_page,
    check_quality_config,
)
from .schemes import AnnotationScheme, Option, SCHEME_KINDS, SURVEY_KINDS, check_scheme


class ConfigError(Exception):
    """Config file is invalid; message names the offending field or line."""


LOGIN_MODES = ("email_signup", "url_argument", "both")
ORDERINGS = ("original", "random", "active_learning")
CONTENT_KINDS = ("text", "image")

TOP_LEVEL_KEYS = {
    "task_name",
    "data_files",
    "id_field",
    "text_field",
    "content_kind",
    "login_mode",
    "instructions",
    "template_override",
    "schemes",
    "highlight_config",
    "active_learning",
    "quality_control",
    "assignment",
    "server",
}


@dataclass(frozen=True)
class Instructions:
    kind: str  # "url" | "inline"
    value: str


@dataclass(frozen=True)
class HighlightConfig:
    keyword_groups: tuple[tuple[str, tuple[str, ...]], ...]
    decoy_rate: float = 0.0

    def groups(self) -> dict[str, tuple[str, ...]]:
        return dict(self.keyword_groups)


@dataclass(frozen=True)
class ActiveLearningConfig:
    target_scheme: str
    retrain_every: int = 20
    random_ratio: float = 0.2
    min_labels_to_start: int = 10


@dataclass(frozen=True)
class AssignmentConfig:
    annotations_per_instance: int = 0  # 0 = every annotator labels everything
    max_instances_per_annotator: int | None = None
    ordering: str = "original"


@dataclass(frozen=True)
class ServerConfig:
    port: int = 8000
    admin_user: str = "admin"
    admin_password: str = "change-me"
    output_dir: str = "annotation_output"


@dataclass(frozen=True)
class TaskConfig:
    task_name: str
    data_files: tuple[str, ...]
    id_field: str
    text_field: str | tuple[str, ...]
    schemes: tuple[AnnotationScheme, ...]
    instructions: Instructions | None = None
    template_override: str | None = None
    highlight_config: HighlightConfig | None = None
    active_learning: ActiveLearningConfig | None = None
    quality_control: QualityControlConfig | None = None
    assignment: AssignmentConfig = field(default_factory=AssignmentConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    login_mode: str = "email_signup"
    content_kind: str = "text"

    def scheme(self, name: str) -> AnnotationScheme:
        for scheme in self.schemes:
            if scheme.name == name:
                return scheme
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Parsing helpers


def _expect(mapping: Any, context: str) -> dict:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context} must be a mapping")
    return mapping


def _str_field(mapping: Mapping, key: str, context: str, default: Any = ...) -> Any:
    if key not in mapping:
        if default is ...:
            raise ConfigError(f"{context}: missing required field {key!r}")
        return default
    value = mapping[key]
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{context}.{key} must be a non-empty string")
    return value


def _int_field(mapping: Mapping, key: str, context: str, default: Any = ...,
               minimum: int | None = None) -> Any:
    if key not in mapping:
        if default is ...:
            raise ConfigError(f"{context}: missing required field {key!r}")
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}.{key} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{context}.{key} must be >= {minimum}")
    return value


def _float_field(mapping: Mapping, key: str, context: str, default: Any = ...) -> Any:
    if key not in mapping:
        if default is ...:
            raise ConfigError(f"{context}: missing required field {key!r}")
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number")
    return float(value)


def _reject_unknown(mapping: Mapping, allowed: set[str], context: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"{context}: unknown field {unknown[0]!r}")


def parse_option(raw: Any, context: str) -> Option:
    if isinstance(raw, str):
        if not raw:
            raise ConfigError(f"{context}: option value must be non-empty")
        return Option(value=raw, display=raw)
    raw = _expect(raw, context)
    _reject_unknown(raw, {"value", "display", "keybinding", "tooltip", "image"}, context)
    value = _str_field(raw, "value", context)
    display = _str_field(raw, "display", context, default=value)
    keybinding = raw.get("keybinding")
    if keybinding is not None:
        keybinding = str(keybinding)
        if len(keybinding) != 1:
            raise ConfigError(f"{context}.keybinding must be a single key")
    tooltip = raw.get("tooltip")
    if tooltip is not None and not isinstance(tooltip, str):
        raise ConfigError(f"{context}.tooltip must be a string")
    image = raw.get("image")
    if image is not None and not isinstance(image, str):
        raise ConfigError(f"{context}.image must be a string")
    return Option(value=value, display=display, keybinding=keybinding,
                  tooltip=tooltip, image=image)


def parse_scheme(raw: Any, context: str, kinds: tuple[str, ...] = SCHEME_KINDS) -> AnnotationScheme:
    raw = _expect(raw, context)
    _reject_unknown(
        raw,
        {"name", "kind", "question", "options", "likert_size", "span_labels", "required"},
        context,
    )
    name = _str_field(raw, "name", context)
    kind = _str_field(raw, "kind", context)
    if kind not in kinds:
        raise ConfigError(f"{context}.kind: unknown scheme kind {kind!r}")
    options = tuple(
        parse_option(o, f"{context}.options[{i}]")
        for i, o in enumerate(raw.get("options") or [])
    )
    span_labels_raw = raw.get("span_labels") or []
    if not isinstance(span_labels_raw, list):
        raise ConfigError(f"{context}.span_labels must be a list")
    scheme = AnnotationScheme(
        name=name,
        kind=kind,
        question=_str_field(raw, "question", context, default=""),
        options=options,
        likert_size=_int_field(raw, "likert_size", context, default=None),
        span_labels=tuple(str(s) for s in span_labels_raw),
        required=bool(raw.get("required", False)),
    )
    problems = check_scheme(scheme)
    if problems:
        raise ConfigError(f"{context}: {problems[0]}")
    return scheme


def _parse_gold_items(raw: Any, context: str) -> tuple[GoldItem, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{context} must be a non-empty list")
    items = []
    for i, entry in enumerate(raw):
        entry = _expect(entry, f"{context}[{i}]")
        _reject_unknown(entry, {"id", "text", "answers"}, f"{context}[{i}]")
        if "id" not in entry or "text" not in entry:
            raise ConfigError(f"{context}[{i}]: gold items need 'id' and 'text'")
        answers = _expect(entry.get("answers"), f"{context}[{i}].answers")
        record = {"id": entry["id"], "text": entry["text"]}
        if isinstance(entry["text"], dict):
            record = {"id": entry["id"], **entry["text"]}
            text_field: Any = tuple(entry["text"].keys())
        else:
            text_field = "text"
        instance = record_to_instance(record, "id", text_field, where=f"{context}[{i}]")
        items.append(GoldItem(instance=instance, answers=answers))
    return tuple(items)


def _parse_survey_pages(raw: Any, context: str) -> tuple[SurveyPage, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError(f"{context} must be a list of pages")
    pages = []
    for i, entry in enumerate(raw):
        entry = _expect(entry, f"{context}[{i}]")
        key = f"{context}[{i}]"
        if "template" in entry:
            _reject_unknown(entry, {"template"}, key)
            try:
                pages.append(builtin_survey_page(entry["template"], key=f"{context}:{i}"))
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
            continue
        _reject_unknown(entry, {"title", "questions"}, key)
        title = _str_field(entry, "title", key)
        questions_raw = entry.get("questions")
        if not isinstance(questions_raw, list) or not questions_raw:
            raise ConfigError(f"{key}.questions must be a non-empty list")
        questions = tuple(
            parse_scheme(q, f"{key}.questions[{j}]", kinds=SURVEY_KINDS)
            for j, q in enumerate(questions_raw)
        )
        pages.append(SurveyPage(key=f"{context}:{i}", title=title, questions=questions))
    return tuple(pages)


def _parse_quality_control(raw: Any) -> QualityControlConfig:
    raw = _expect(raw, "quality_control")
    _reject_unknown(
        raw, {"prestudy", "attention", "pre_surveys", "post_surveys"}, "quality_control"
    )
    prestudy = None
    if raw.get("prestudy") is not None:
        block = _expect(raw["prestudy"], "quality_control.prestudy")
        _reject_unknown(block, {"test_items", "pass_threshold"}, "quality_control.prestudy")
        prestudy = PrestudyConfig(
            test_items=_parse_gold_items(
                block.get("test_items"), "quality_control.prestudy.test_items"
            ),
            pass_threshold=_float_field(block, "pass_threshold", "quality_control.prestudy"),
        )
    attention = None
    if raw.get("attention") is not None:
        block = _expect(raw["attention"], "quality_control.attention")
        _reject_unknown(
            block,
            {"test_items", "insertion_rate", "fail_threshold", "on_fail"},
            "quality_control.attention",
        )
        attention = AttentionConfig(
            test_items=_parse_gold_items(
                block.get("test_items"), "quality_control.attention.test_items"
            ),
            insertion_rate=_float_field(block, "insertion_rate", "quality_control.attention"),
            fail_threshold=_int_field(
                block, "fail_threshold", "quality_control.attention", minimum=1
            ),
            on_fail=_str_field(block, "on_fail", "quality_control.attention", default="flag"),
        )
    return QualityControlConfig(
        prestudy=prestudy,
        attention=attention,
        pre_surveys=_parse_survey_pages(raw.get("pre_surveys"), "pre_surveys"),
        post_surveys=_parse_survey_pages(raw.get("post_surveys"), "post_surveys"),
    )


def _parse_highlight(raw: Any) -> HighlightConfig:
    raw = _expect(raw, "highlight_config")
    _reject_unknown(raw, {"keyword_groups", "decoy_rate"}, "highlight_config")
    groups_raw = _expect(raw.get("keyword_groups"), "highlight_config.keyword_groups")
    groups = []
    for group, patterns in groups_raw.items():
        if not isinstance(patterns, list) or not patterns:
            raise ConfigError(
                f"highlight_config.keyword_groups.{group} must be a non-empty list"
            )
        for pattern in patterns:
            if not isinstance(pattern, str) or not pattern or pattern == "*":
                raise ConfigError(
                    f"highlight_config.keyword_groups.{group}: invalid pattern {pattern!r}"
                )
            if "*" in pattern[:-1]:
                raise ConfigError(
                    f"highlight_config.keyword_groups.{group}: pattern {pattern!r} may only "
                    "use a single trailing * wildcard"
                )
        groups.append((str(group), tuple(patterns)))
    decoy_rate = _float_field(raw, "decoy_rate", "highlight_config", default=0.0)
    if not 0 <= decoy_rate < 1:
        raise ConfigError("highlight_config.decoy_rate must be in [0, 1)")
    return HighlightConfig(keyword_groups=tuple(groups), decoy_rate=decoy_rate)


def _parse_active_learning(raw: Any) -> ActiveLearningConfig:
    raw = _expect(raw, "active_learning")
    _reject_unknown(
        raw,
        {"target_scheme", "retrain_every", "random_ratio", "min_labels_to_start"},
        "active_learning",
    )
    random_ratio = _float_field(raw, "random_ratio", "active_learning", default=0.2)
    if not 0 <= random_ratio <= 1:
        raise ConfigError("active_learning.random_ratio must be in [0, 1]")
    return ActiveLearningConfig(
        target_scheme=_str_field(raw, "target_scheme", "active_learning"),
        retrain_every=_int_field(raw, "retrain_every", "active_learning", default=20, minimum=1),
        random_ratio=random_ratio,
        min_labels_to_start=_int_field(
            raw, "min_labels_to_start", "active_learning", default=10, minimum=1
        ),
    )


def _parse_assignment(raw: Any) -> AssignmentConfig:
    if raw is None:
        return AssignmentConfig()
    raw = _expect(raw, "assignment")
    _reject_unknown(
        raw,
        {"annotations_per_instance", "max_instances_per_annotator", "ordering"},
        "assignment",
    )
    ordering = _str_field(raw, "ordering", "assignment", default="original")
    if ordering not in ORDERINGS:
        raise ConfigError(
            f"assignment.ordering must be one of {', '.join(ORDERINGS)}, got {ordering!r}"
        )
    return AssignmentConfig(
        annotations_per_instance=_int_field(
            raw, "annotations_per_instance", "assignment", default=0, minimum=0
        ),
        max_instances_per_annotator=_int_field(
            raw, "max_instances_per_annotator", "assignment", default=None, minimum=1
        ),
        ordering=ordering,
    )


def _parse_server(raw: Any) -> ServerConfig:
    if raw is None:
        return ServerConfig()
    raw = _expect(raw, "server")
    _reject_unknown(raw, {"port", "admin_user", "admin_password", "output_dir"}, "server")
    return ServerConfig(
        port=_int_field(raw, "port", "server", default=8000, minimum=1),
        admin_user=_str_field(raw, "admin_user", "server", default="admin"),
        admin_password=_str_field(raw, "admin_password", "server", default="change-me"),
        output_dir=_str_field(raw, "output_dir", "server", default="annotation_output"),
    )


def _parse_instructions(raw: Any) -> Instructions:
    raw = _expect(raw, "instructions")
    _reject_unknown(raw, {"url", "inline"}, "instructions")
    if ("url" in raw) == ("inline" in raw):
        raise ConfigError("instructions needs exactly one of 'url' or 'inline'")
    if "url" in raw:
        return Instructions(kind="url", value=_str_field(raw, "url", "instructions"))
    return Instructions(kind="inline", value=_str_field(raw, "inline", "instructions"))


# ---------------------------------------------------------------------------
# Loading and cross-validation


def parse_config(raw: Any, base_dir: Path | None = None) -> TaskConfig:
    """Build a TaskConfig from parsed YAML; raises ConfigError on any problem."""
    raw = _expect(raw, "config")
    _reject_unknown(raw, TOP_LEVEL_KEYS, "config")

    task_name = _str_field(raw, "task_name", "config")
    id_field = _str_field(raw, "id_field", "config")

    data_files_raw = raw.get("data_files")
    if not isinstance(data_files_raw, list) or not data_files_raw:
        raise ConfigError("data_files must be a non-empty list of paths")
    data_files = []
    for entry in data_files_raw:
        if not isinstance(entry, str) or not entry:
            raise ConfigError("data_files entries must be non-empty strings")
        path = Path(entry)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        data_files.append(str(path))

    text_field_raw = raw.get("text_field")
    if isinstance(text_field_raw, str) and text_field_raw:
        text_field: str | tuple[str, ...] = text_field_raw
    elif isinstance(text_field_raw, list) and text_field_raw and all(
        isinstance(t, str) and t for t in text_field_raw
    ):
        text_field = tuple(text_field_raw)
        if len(set(text_field)) != len(text_field):
            raise ConfigError("text_field names must be unique")
    else:
        raise ConfigError("text_field must be a field name or a list of field names")

    schemes_raw = raw.get("schemes")
    if schemes_raw is None or schemes_raw == []:
        raise ConfigError("schemes must be non-empty")
    if not isinstance(schemes_raw, list):
        raise ConfigError("schemes must be a list")
    schemes = tuple(
        parse_scheme(s, f"schemes[{i}]") for i, s in enumerate(schemes_raw)
    )
    names = [s.name for s in schemes]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise ConfigError(f"schemes: duplicate scheme name {dup!r}")

    keybindings: dict[str, str] = {}
    for scheme in schemes:
        for option in scheme.options:
            if option.keybinding is None:
                continue
            owner = keybindings.get(option.keybinding)
            if owner is not None:
                raise ConfigError(
                    f"keybinding {option.keybinding!r} used by both {owner!r} and "
                    f"{scheme.name!r}: keybindings must be unique across the task"
                )
            keybindings[option.keybinding] = scheme.name

    login_mode = _str_field(raw, "login_mode", "config", default="email_signup")
    if login_mode not in LOGIN_MODES:
        raise ConfigError(f"login_mode must be one of {', '.join(LOGIN_MODES)}")

    content_kind = _str_field(raw, "content_kind", "config", default="text")
    if content_kind not in CONTENT_KINDS:
        raise ConfigError(f"content_kind must be one of {', '.join(CONTENT_KINDS)}")

    template_override = raw.get("template_override")
    if template_override is not None:
        if not isinstance(template_override, str) or not template_override:
            raise ConfigError("template_override must be a path")
        path = Path(template_override)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        template_override = str(path)

    config = TaskConfig(
        task_name=task_name,
        data_files=tuple(data_files),
        id_field=id_field,
        text_field=text_field,
        schemes=schemes,
        instructions=_parse_instructions(raw["instructions"]) if raw.get("instructions") else None,
        template_override=template_override,
        highlight_config=_parse_highlight(raw["highlight_config"])
        if raw.get("highlight_config")
        else None,
        active_learning=_parse_active_learning(raw["active_learning"])
        if raw.get("active_learning")
        else None,
        quality_control=_parse_quality_control(raw["quality_control"])
        if raw.get("quality_control")
        else None,
        assignment=_parse_assignment(raw.get("assignment")),
        server=_parse_server(raw.get("server")),
        login_mode=login_mode,
        content_kind=content_kind,
    )
    _cross_validate(config)
    return config


def _cross_validate(config: TaskConfig) -> None:
    scheme_by_name = {s.name: s for s in config.schemes}

    if config.assignment.ordering == "active_learning" and config.active_learning is None:
        raise ConfigError(
            "assignment.ordering is 'active_learning' but no active_learning block is configured"
        )

    if config.active_learning is not None:
        target = config.active_learning.target_scheme
        if target not in scheme_by_name:
            raise ConfigError(f"active_learning.target_scheme {target!r} is not a scheme name")
        if scheme_by_name[target].kind not in ("radio", "multiselect"):
            raise ConfigError(
                f"active_learning.target_scheme {target!r} must be a categorical "
                "scheme (radio or multiselect)"
            )

    if config.quality_control is not None:
        problems = check_quality_config(config.quality_control, config.schemes)
        if problems:
            raise ConfigError(problems[0])


def load_config(path: str | Path, check_files: bool = True) -> TaskConfig:
    """Load and fully validate a task config file.

    Referenced data files and the template override must exist when
    check_files is true (the default); the template override must reference
    every scheme by placeholder.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ConfigError(
                f"{path}: parse error at line {mark.line + 1}, column {mark.column + 1}"
            ) from exc
        raise ConfigError(f"{path}: parse error ({exc})") from exc

    config = parse_config(raw, base_dir=path.parent)

    if check_files:
        for data_file in config.data_files:
            if not Path(data_file).exists():
                raise ConfigError(f"data file not found: {data_file}")
        if config.template_override is not None:
            template_path = Path(config.template_override)
            if not template_path.exists():
                raise ConfigError(f"template_override file not found: {template_path}")
            template_text = template_path.read_text(encoding="utf-8")
            bindings, warnings = validate_template(template_text, config)
            missing = [w for w in warnings if w.startswith("scheme")]
            if missing:
                raise ConfigError(
                    f"template_override must reference every scheme: {missing[0]}"
                )
    return config


# ---------------------------------------------------------------------------
# Template validation

_PLACEHOLDER_RE = re.compile(r"\{\{\s*([A-Za-z0-9_.-]+)\s*\}\}")


@dataclass(frozen=True)
class PlaceholderBinding:
    placeholder: str
    kind: str  # "field" | "scheme"
    position: int


def template_placeholders(template_text: str) -> list[tuple[str, int]]:
    return [(m.group(1), m.start()) for m in _PLACEHOLDER_RE.finditer(template_text)]


def validate_template(
    template_text: str, config: TaskConfig
) -> tuple[list[PlaceholderBinding], list[str]]:
    """Resolve every {{placeholder}} to a known field or scheme.

    Returns bindings in document order plus warning-level findings (schemes
    not referenced by the template). Unknown placeholders raise ConfigError.
    """
    text_fields = (
        [config.text_field] if isinstance(config.text_field, str) else list(config.text_field)
    )
    known_fields = set(text_fields) | {config.id_field}
    scheme_names = {s.name for s in config.schemes}

    bindings = []
    for name, position in template_placeholders(template_text):
        if name in known_fields:
            bindings.append(PlaceholderBinding(name, "field", position))
        elif name in scheme_names:
            bindings.append(PlaceholderBinding(name, "scheme", position))
        else:
            raise ConfigError(f"template: unknown placeholder {{{{{name}}}}}")

    referenced = {b.placeholder for b in bindings if b.kind == "scheme"}
    warnings = [
        f"scheme {name!r} is not referenced by the template"
        for name in scheme_names - referenced
    ]
    return bindings, sorted(warnings)


# ---------------------------------------------------------------------------
# Serialization (round-trips through load_config)


def _option_to_raw(option: Option) -> Any:
    if option.display == option.value and not option.keybinding and not option.tooltip \
            and not option.image:
        return option.value
    raw: dict[str, Any] = {"value": option.value}
    if option.display != option.value:
        raw["display"] = option.display
    if option.keybinding is not None:
        raw["keybinding"] = option.keybinding
    if option.tooltip is not None:
        raw["tooltip"] = option.tooltip
    if option.image is not None:
        raw["image"] = option.image
    return raw


def _scheme_to_raw(scheme: AnnotationScheme) -> dict[str, Any]:
    raw: dict[str, Any] = {"name": scheme.name, "kind": scheme.kind}
    if scheme.question:
        raw["question"] = scheme.question
    if scheme.options:
        raw["options"] = [_option_to_raw(o) for o in scheme.options]
    if scheme.likert_size is not None:
        raw["likert_size"] = scheme.likert_size
    if scheme.span_labels:
        raw["span_labels"] = list(scheme.span_labels)
    if scheme.required:
        raw["required"] = True
    return raw


def _gold_to_raw(item: GoldItem) -> dict[str, Any]:
    from .ingest import Document, instance_documents

    content = item.instance.content
    if isinstance(content, Document):
        text: Any = content.payload
    elif isinstance(content, tuple):
        text = [d.payload for d in content]
    else:
        text = {name: doc.payload for name, doc in instance_documents(item.instance)}
    return {"id": item.instance.id, "text": text, "answers": dict(item.answers)}


def _survey_pages_to_raw(pages: tuple[SurveyPage, ...]) -> list[dict[str, Any]]:
    out = []
    for page in pages:
        if page.template is not None:
            out.append({"template": page.template})
        else:
            out.append(
                {
                    "title": page.title,
                    "questions": [_scheme_to_raw(q) for q in page.questions],
                }
            )
    return out


def config_to_raw(config: TaskConfig) -> dict[str, Any]:
    raw: dict[str, Any] = {
        "task_name": config.task_name,
        "data_files": list(config.data_files),
        "id_field": config.id_field,
        "text_field": config.text_field
        if isinstance(config.text_field, str)
        else list(config.text_field),
        "login_mode": config.login_mode,
        "content_kind": config.content_kind,
        "schemes": [_scheme_to_raw(s) for s in config.schemes],
        "assignment": {
            "annotations_per_instance": config.assignment.annotations_per_instance,
            "ordering": config.assignment.ordering,
        },
        "server": {
            "port": config.server.port,
            "admin_user": config.server.admin_user,
            "admin_password": config.server.admin_password,
            "output_dir": config.server.output_dir,
        },
    }
    if config.assignment.max_instances_per_annotator is not None:
        raw["assignment"]["max_instances_per_annotator"] = (
            config.assignment.max_instances_per_annotator
        )
    if config.instructions is not None:
        raw["instructions"] = {config.instructions.kind if config.instructions.kind == "url"
                               else "inline": config.instructions.value}
    if config.template_override is not None:
        raw["template_override"] = config.template_override
    if config.highlight_config is not None:
        raw["highlight_config"] = {
            "keyword_groups": {g: list(p) for g, p in config.highlight_config.keyword_groups},
            "decoy_rate": config.highlight_config.decoy_rate,
        }
    if config.active_learning is not None:
        al = config.active_learning
        raw["active_learning"] = {
            "target_scheme": al.target_scheme,
            "retrain_every": al.retrain_every,
            "random_ratio": al.random_ratio,
            "min_labels_to_start": al.min_labels_to_start,
        }
    if config.quality_control is not None:
        qc = config.quality_control
        block: dict[str, Any] = {}
        if qc.prestudy is not None:
            block["prestudy"] = {
                "pass_threshold": qc.prestudy.pass_threshold,
                "test_items": [_gold_to_raw(i) for i in qc.prestudy.test_items],
            }
        if qc.attention is not None:
            block["attention"] = {
                "insertion_rate": qc.attention.insertion_rate,
                "fail_threshold": qc.attention.fail_threshold,
                "on_fail": qc.attention.on_fail,
                "test_items": [_gold_to_raw(i) for i in qc.attention.test_items],
            }
        if qc.pre_surveys:
            block["pre_surveys"] = _survey_pages_to_raw(qc.pre_surveys)
        if qc.post_surveys:
            block["post_surveys"] = _survey_pages_to_raw(qc.post_surveys)
        raw["quality_control"] = block
    return raw


def serialize_config(config: TaskConfig) -> str:
    """YAML text that load_config parses back to an equal TaskConfig."""
    return yaml.safe_dump(config_to_raw(config), sort_keys=False, allow_unicode=True)


def write_config(config: TaskConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(serialize_config(config), encoding="utf-8")
    return path
