"""Instance loading from deployer data files, plus annotation export.

Input formats: .csv / .tsv (first row is a header; delimiter fixed by the
extension, never sniffed) and .jsonl (one JSON record per line). Files are
UTF-8; undecodable bytes are a hard error because silent repair would corrupt
span offsets downstream.

Each record becomes one Instance. The configured id field and text field(s)
are consumed; every other field rides along in display_meta and reappears
unchanged in the export.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, TYPE_CHECKING
from urllib.parse import urlparse

if TYPE_CHECKING:
    from .config import TaskConfig
    from .sessions import SessionManager


class DataError(Exception):
    """A data file could not be ingested; message names file and location."""


@dataclass(frozen=True)
class Document:
    kind: str  # "text" | "image_ref"
    payload: str


@dataclass(frozen=True)
class Instance:
    id: str
    # One document, an ordered list, or a named map (insertion-ordered).
    content: Document | tuple[Document, ...] | dict[str, Document]
    display_meta: dict[str, Any] = field(default_factory=dict)


def instance_documents(instance: Instance) -> list[tuple[str | None, Document]]:
    """Documents of an instance in display order, with map keys when named."""
    content = instance.content
    if isinstance(content, Document):
        return [(None, content)]
    if isinstance(content, tuple):
        return [(None, doc) for doc in content]
    return list(content.items())


def instance_text(instance: Instance) -> str:
    """All document payloads joined; the classifier featurizes this."""
    return "\n".join(doc.payload for _, doc in instance_documents(instance))


def _check_image_ref(payload: str, where: str) -> None:
    parsed = urlparse(payload)
    if parsed.scheme in ("http", "https", "data") and (parsed.netloc or parsed.scheme == "data"):
        return
    if os.path.exists(payload):
        return
    raise DataError(f"{where}: image reference {payload!r} is neither a URL nor an existing path")


def _make_document(value: Any, kind: str, where: str) -> Document:
    if not isinstance(value, str) or not value.strip():
        raise DataError(f"{where}: document content must be a non-empty string")
    if kind == "image_ref":
        _check_image_ref(value, where)
    return Document(kind=kind, payload=value)


def record_to_instance(
    record: Mapping[str, Any],
    id_field: str,
    text_field: str | tuple[str, ...] | list[str],
    content_kind: str = "text",
    where: str = "record",
) -> Instance:
    """Build an Instance from one raw record; raises DataError on bad shape."""
    if id_field not in record or record[id_field] in (None, ""):
        raise DataError(f"{where}: missing id field {id_field!r}")
    instance_id = str(record[id_field])
    doc_kind = "image_ref" if content_kind == "image" else "text"

    consumed = {id_field}
    if isinstance(text_field, str):
        if text_field not in record:
            raise DataError(f"{where}: missing text field {text_field!r}")
        consumed.add(text_field)
        value = record[text_field]
        if isinstance(value, list):
            if not value:
                raise DataError(f"{where}: text field {text_field!r} is an empty list")
            content: Any = tuple(
                _make_document(v, doc_kind, where) for v in value
            )
        else:
            content = _make_document(value, doc_kind, where)
    else:
        names = list(text_field)
        docs: dict[str, Document] = {}
        for name in names:
            if name not in record:
                raise DataError(f"{where}: missing text field {name!r}")
            consumed.add(name)
            docs[name] = _make_document(record[name], doc_kind, where)
        content = docs

    meta = {k: v for k, v in record.items() if k not in consumed}
    return Instance(id=instance_id, content=content, display_meta=meta)


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc})") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise DataError(f"{path}: line {lineno}: record must be a JSON object")
        yield lineno, record


def _iter_delimited(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    try:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle, delimiter=delimiter)
            if reader.fieldnames is None:
                return
            for record in reader:
                if None in record:
                    raise DataError(
                        f"{path}: line {reader.line_num}: more cells than header columns"
                    )
                yield reader.line_num, {k: v for k, v in record.items() if v is not None}
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc})") from exc


def iter_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line number, record) pairs from a data file by extension."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    suffix = path.suffix.lower()
    if suffix in (".csv", ".tsv"):
        yield from _iter_delimited(path)
    elif suffix in (".jsonl", ".json"):
        yield from _iter_jsonl(path)
    else:
        raise DataError(f"{path}: unsupported data file extension {suffix!r}")


def load_instances(config: "TaskConfig") -> list[Instance]:
    """Load all data files in config order into one ordered instance list."""
    instances: list[Instance] = []
    seen: dict[str, str] = {}
    for file_path in config.data_files:
        for lineno, record in iter_records(file_path):
            where = f"{file_path}: line {lineno}"
            instance = record_to_instance(
                record,
                config.id_field,
                config.text_field,
                content_kind=config.content_kind,
                where=where,
            )
            if instance.id in seen:
                raise DataError(
                    f"duplicate instance id {instance.id!r} at {where} "
                    f"(first seen at {seen[instance.id]})"
                )
            seen[instance.id] = where
            instances.append(instance)
    return instances


# ---------------------------------------------------------------------------
# Export


EXPORT_FIXED_FIELDS = ("user", "instance_id", "queue_position", "labels", "elapsed_ms",
                       "submitted_at", "revision")


def export_records(manager: "SessionManager") -> list[dict[str, Any]]:
    """One record per (annotator, instance) pair, attention items excluded.

    Ordering is deterministic: annotators sorted by user id, instances by
    queue position within each annotator.
    """
    records = []
    for user_id in sorted(manager.user_ids()):
        state = manager.get_user(user_id)
        position = {entry.instance_id: i for i, entry in enumerate(state.queue)
                    if entry.kind == "main"}
        for instance_id in sorted(state.annotations, key=lambda i: position.get(i, 1 << 30)):
            record = state.annotations[instance_id]
            instance = manager.instances.get(instance_id)
            records.append(
                {
                    "user": user_id,
                    "instance_id": instance_id,
                    "queue_position": position.get(instance_id),
                    "display_meta": dict(instance.display_meta) if instance else {},
                    "labels": record["labels"],
                    "elapsed_ms": state.per_item_timing.get(instance_id, 0),
                    "submitted_at": record["received_at"],
                    "revision": record["revision"],
                }
            )
    return records


def export_annotations(
    manager: "SessionManager",
    out_dir: str | Path,
    formats: tuple[str, ...] = ("jsonl",),
    scheme_names: tuple[str, ...] = (),
) -> list[Path]:
    """Write annotation exports plus the survey and attention side files."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create export directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise DataError(f"export directory {out_dir} is not writable")

    records = export_records(manager)
    written: list[Path] = []

    for fmt in formats:
        if fmt == "jsonl":
            path = out_dir / "annotations.jsonl"
            with path.open("w", encoding="utf-8") as handle:
                for record in records:
                    handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            written.append(path)
        elif fmt == "csv":
            path = out_dir / "annotations.csv"
            meta_fields = sorted({k for r in records for k in r["display_meta"]})
            header = ["user", "instance_id", "queue_position"] + meta_fields + [
                f"label:{name}" for name in scheme_names
            ] + ["elapsed_ms", "submitted_at", "revision"]
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(header)
                for r in records:
                    row = [r["user"], r["instance_id"], r["queue_position"]]
                    row += [_csv_cell(r["display_meta"].get(k)) for k in meta_fields]
                    row += [_csv_cell(r["labels"].get(name)) for name in scheme_names]
                    row += [r["elapsed_ms"], r["submitted_at"], r["revision"]]
                    writer.writerow(row)
            written.append(path)
        else:
            raise DataError(f"unknown export format {fmt!r}")

    surveys_path = out_dir / "surveys.jsonl"
    with surveys_path.open("w", encoding="utf-8") as handle:
        for entry in manager.survey_records():
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
    written.append(surveys_path)

    attention_path = out_dir / "attention_log.jsonl"
    with attention_path.open("w", encoding="utf-8") as handle:
        for entry in manager.attention_records():
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
    written.append(attention_path)

    return written


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return json.dumps(value, ensure_ascii=False)


def read_export(path: str | Path) -> list[dict[str, Any]]:
    """Read an annotations.jsonl export back into records (round-trip check)."""
    return [record for _, record in _iter_jsonl(Path(path))]
