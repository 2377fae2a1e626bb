"""Interactive config generator driven by an injected prompt stream.

Launched as `annobench init`, the wizard walks the deployer through their
task and writes a ready-to-serve config file. All prompts flow through a
PromptStream, so the whole thing is scriptable: given a fixed answer
sequence, the wizard is a pure function from answers to TaskConfig, and tests
run it headless. In scripted mode an invalid answer is an error; at a real
TTY it re-prompts.

Quality-control blocks (prestudy, attention tests, surveys) are added by
editing the emitted file; the field reference in the README covers them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .config import (
    ConfigError,
    LOGIN_MODES,
    ORDERINGS,
    TaskConfig,
    parse_config,
    write_config,
)
from .schemes import OPTION_KINDS, SCHEME_KINDS


class WizardError(Exception):
    """An answer could not be used and no TTY is available to re-ask."""


class PromptStream:
    """Uniform prompt/answer plumbing for scripted and interactive runs."""

    def __init__(
        self,
        answers: Sequence[str] | Iterable[str] | None = None,
        input_fn: Callable[[str], str] | None = None,
        output_fn: Callable[[str], None] = lambda _: None,
    ):
        self.scripted = answers is not None
        self._answers = iter(answers) if answers is not None else None
        self._input = input_fn or input
        self._output = output_fn

    def say(self, message: str) -> None:
        self._output(message)

    def ask(
        self,
        prompt: str,
        default: str | None = None,
        check: Callable[[str], str | None] = lambda _: None,
    ) -> str:
        """Ask once (scripted) or until valid (interactive).

        `check` returns an error message or None; a blank answer takes the
        default when one exists.
        """
        shown = f"{prompt} [{default}]: " if default is not None else f"{prompt}: "
        while True:
            if self._answers is not None:
                try:
                    answer = next(self._answers)
                except StopIteration:
                    raise WizardError(f"ran out of answers at prompt: {prompt}") from None
            else:
                answer = self._input(shown)
            answer = answer.strip()
            if answer == "" and default is not None:
                answer = default
            problem = check(answer)
            if problem is None:
                return answer
            if self.scripted:
                raise WizardError(f"{prompt}: {problem} (got {answer!r})")
            self.say(f"  {problem}")


def _non_empty(answer: str) -> str | None:
    return None if answer else "a value is required"


def _one_of(*choices: str) -> Callable[[str], str | None]:
    def check(answer: str) -> str | None:
        return None if answer in choices else f"expected one of: {', '.join(choices)}"

    return check


def _int_check(minimum: int) -> Callable[[str], str | None]:
    def check(answer: str) -> str | None:
        try:
            value = int(answer)
        except ValueError:
            return "expected an integer"
        return None if value >= minimum else f"must be >= {minimum}"

    return check


def _float_check(lo: float, hi: float, inclusive_hi: bool) -> Callable[[str], str | None]:
    def check(answer: str) -> str | None:
        try:
            value = float(answer)
        except ValueError:
            return "expected a number"
        if value < lo or (value > hi if inclusive_hi else value >= hi):
            return f"must be in [{lo}, {hi}{']' if inclusive_hi else ')'}"
        return None

    return check


def _ask_option(stream: PromptStream, first: bool) -> dict[str, Any] | None:
    """One option in `value|display|keybinding|tooltip` form; blank to finish."""
    answer = stream.ask(
        "  Option (value|display|key|tooltip, blank when done)",
        default="",
        check=(lambda a: "at least one option is required" if first and not a else None),
    )
    if not answer:
        return None
    parts = [p.strip() for p in answer.split("|", 3)]
    raw: dict[str, Any] = {"value": parts[0]}
    if not parts[0]:
        raise WizardError("option value must be non-empty")
    if len(parts) > 1 and parts[1]:
        raw["display"] = parts[1]
    if len(parts) > 2 and parts[2]:
        raw["keybinding"] = parts[2]
    if len(parts) > 3 and parts[3]:
        raw["tooltip"] = parts[3]
    return raw


def _ask_scheme(stream: PromptStream, index: int) -> dict[str, Any]:
    raw: dict[str, Any] = {}
    raw["name"] = stream.ask(f"Scheme {index} name", check=_non_empty)
    raw["kind"] = stream.ask(
        f"Scheme {index} kind ({'/'.join(SCHEME_KINDS)})", check=_one_of(*SCHEME_KINDS)
    )
    question = stream.ask(f"Scheme {index} question shown to annotators", default="")
    if question:
        raw["question"] = question
    if stream.ask(f"Is scheme {index} required? (y/n)", default="n",
                  check=_one_of("y", "n")) == "y":
        raw["required"] = True

    if raw["kind"] in OPTION_KINDS:
        options = []
        while True:
            option = _ask_option(stream, first=not options)
            if option is None:
                break
            options.append(option)
        raw["options"] = options
    elif raw["kind"] == "likert":
        raw["likert_size"] = int(stream.ask("  Likert scale size", default="5",
                                            check=_int_check(2)))
    elif raw["kind"] == "span":
        labels = stream.ask("  Span labels (comma-separated)", check=_non_empty)
        raw["span_labels"] = [s.strip() for s in labels.split(",") if s.strip()]
        if not raw["span_labels"]:
            raise WizardError("span labels must be non-empty")
    return raw


def run_config_wizard(
    answers: Sequence[str] | Iterable[str] | None = None,
    out_path: str | Path | None = None,
    input_fn: Callable[[str], str] | None = None,
    output_fn: Callable[[str], None] = lambda _: None,
) -> TaskConfig:
    """Collect a task description prompt by prompt and return the TaskConfig.

    When `out_path` is given the config is also written there; the emitted
    file loads back to an equal TaskConfig.
    """
    stream = PromptStream(answers, input_fn=input_fn, output_fn=output_fn)
    raw: dict[str, Any] = {}

    stream.say("Describe your annotation task; blank answers accept [defaults].")
    raw["task_name"] = stream.ask("Task name", check=_non_empty)
    files = stream.ask("Data file path(s), comma-separated", check=_non_empty)
    raw["data_files"] = [f.strip() for f in files.split(",") if f.strip()]
    raw["id_field"] = stream.ask("Instance ID field", default="id", check=_non_empty)
    text_fields = stream.ask(
        "Text field(s), comma-separated (several fields show a named document set)",
        default="text",
        check=_non_empty,
    )
    parsed_fields = [f.strip() for f in text_fields.split(",") if f.strip()]
    raw["text_field"] = parsed_fields[0] if len(parsed_fields) == 1 else parsed_fields
    raw["content_kind"] = stream.ask(
        "Content kind (text/image)", default="text", check=_one_of("text", "image")
    )
    url = stream.ask("Instructions URL (blank for none)", default="")
    if url:
        raw["instructions"] = {"url": url}
    else:
        inline = stream.ask("Inline instructions HTML (blank for none)", default="")
        if inline:
            raw["instructions"] = {"inline": inline}
    raw["login_mode"] = stream.ask(
        f"Login mode ({'/'.join(LOGIN_MODES)})",
        default="email_signup",
        check=_one_of(*LOGIN_MODES),
    )

    schemes = [_ask_scheme(stream, 1)]
    while stream.ask("Add another scheme? (y/n)", default="n", check=_one_of("y", "n")) == "y":
        schemes.append(_ask_scheme(stream, len(schemes) + 1))
    raw["schemes"] = schemes

    if stream.ask("Add keyword highlight groups? (y/n)", default="n",
                  check=_one_of("y", "n")) == "y":
        groups: dict[str, list[str]] = {}
        while True:
            line = stream.ask(
                "  Group (name: pattern1, pattern2, ...; blank when done)", default=""
            )
            if not line:
                break
            if ":" not in line:
                if stream.scripted:
                    raise WizardError(f"highlight group needs 'name: patterns', got {line!r}")
                stream.say("  expected 'name: pattern1, pattern2'")
                continue
            name, _, patterns = line.partition(":")
            groups[name.strip()] = [p.strip() for p in patterns.split(",") if p.strip()]
        if groups:
            decoy = stream.ask(
                "  Decoy highlight rate (0 disables)",
                default="0",
                check=_float_check(0.0, 1.0, inclusive_hi=False),
            )
            raw["highlight_config"] = {
                "keyword_groups": groups,
                "decoy_rate": float(decoy),
            }

    assignment: dict[str, Any] = {}
    assignment["annotations_per_instance"] = int(
        stream.ask("Annotations per instance (0 = everyone labels everything)",
                    default="0", check=_int_check(0))
    )
    cap = stream.ask("Max instances per annotator (blank for no cap)", default="")
    if cap:
        if _int_check(1)(cap) is not None:
            raise WizardError(f"max instances per annotator: expected integer >= 1, got {cap!r}")
        assignment["max_instances_per_annotator"] = int(cap)
    assignment["ordering"] = stream.ask(
        f"Queue ordering ({'/'.join(ORDERINGS)})", default="original", check=_one_of(*ORDERINGS)
    )
    raw["assignment"] = assignment

    if assignment["ordering"] == "active_learning":
        al: dict[str, Any] = {}
        al["target_scheme"] = stream.ask("Active learning target scheme", check=_non_empty)
        al["retrain_every"] = int(
            stream.ask("Retrain after how many annotations?", default="20", check=_int_check(1))
        )
        al["random_ratio"] = float(
            stream.ask("Share of queue kept random (0-1)", default="0.2",
                        check=_float_check(0.0, 1.0, inclusive_hi=True))
        )
        al["min_labels_to_start"] = int(
            stream.ask("Labels needed before the first training run", default="10",
                        check=_int_check(1))
        )
        raw["active_learning"] = al

    raw["server"] = {
        "port": int(stream.ask("Server port", default="8000", check=_int_check(1))),
        "admin_user": stream.ask("Admin username", default="admin", check=_non_empty),
        "admin_password": stream.ask("Admin password", default="change-me", check=_non_empty),
        "output_dir": stream.ask("Output directory", default="annotation_output",
                                  check=_non_empty),
    }

    try:
        config = parse_config(raw)
    except ConfigError as exc:
        raise WizardError(f"answers do not form a valid config: {exc}") from exc

    if out_path is not None:
        write_config(config, out_path)
        stream.say(f"Wrote {out_path}")
    return config
