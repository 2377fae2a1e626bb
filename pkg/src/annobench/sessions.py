"""Accounts, queue assignment, the annotate-next loop, and durable state.

Durability model: each user has an append-only event log
(`users/<key>/annotations.jsonl`) and a snapshot (`users/<key>/state.json`).
Every submission is appended and fsynced *before* it is acknowledged; the
snapshot only records identity and queue assignment (rewritten atomically on
registration and on active-learning reorders). Everything else — cursor,
timing, quality status, survey responses — is recomputed by replaying the
log, so killing the process after any acknowledgment loses nothing. A torn
trailing line (crash mid-append) is skipped on recovery; by then its
submission was never acknowledged.

Concurrency: a global lock serializes assignment-count updates and queue
swaps; a per-user lock serializes that user's submissions and navigation.
The instance store is immutable and read lock-free.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, Mapping

from .config import TaskConfig
from .ingest import Instance, instance_text
from .quality import (
    QualityStatus,
    QueueEntry,
    apply_prestudy_result,
    consent_declined,
    evaluate_prestudy,
    insert_attention_tests,
    score_attention,
    score_gold_answer,
    validate_survey_submission,
)
from .schemes import SubmissionError, labels_from_json, validate_submission

import random


class AuthError(Exception):
    """Login or signup was rejected; no state changed."""


class BlockedError(Exception):
    """The user is blocked by quality control and may not submit."""


class StaleSubmissionError(Exception):
    """Submitted item does not match the user's current (or editable) item."""


class FlowError(Exception):
    """Request does not fit the user's current step (e.g. survey out of turn)."""


@dataclass(frozen=True)
class ProgressInfo:
    completed: int
    total: int

    @property
    def remaining(self) -> int:
        return self.total - self.completed

    def as_dict(self) -> dict[str, int]:
        return {"completed": self.completed, "total": self.total,
                "remaining": self.remaining}


@dataclass
class UserState:
    user_id: str  # namespaced: "email:<address>" or "url:<crowd id>"
    auth: str  # "password_hash" | "url_argument"
    password_hash: str | None
    queue: list[QueueEntry]
    cursor: int = 0  # transient view position; resume resets it to the frontier
    per_item_timing: dict[str, int] = field(default_factory=dict)
    qc_status: QualityStatus = field(default_factory=QualityStatus)
    annotations: dict[str, dict[str, Any]] = field(default_factory=dict)
    answered_positions: set[int] = field(default_factory=set)
    prestudy_answers: list[dict[str, Any]] = field(default_factory=list)
    survey_responses: dict[str, dict[str, Any]] = field(default_factory=dict)
    survey_order: list[dict[str, Any]] = field(default_factory=list)
    attention_events: list[dict[str, Any]] = field(default_factory=list)
    annotation_events: int = 0
    created_at: str = ""

    def frontier(self) -> int:
        """First queue position with no stored annotation."""
        for position in range(len(self.queue)):
            if position not in self.answered_positions:
                return position
        return len(self.queue)

    def progress(self) -> ProgressInfo:
        return ProgressInfo(completed=len(self.answered_positions), total=len(self.queue))


def hash_password(password: str, salt: bytes | None = None) -> str:
    salt = salt if salt is not None else secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, 100_000)
    return f"{salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    salt_hex, _, digest_hex = stored.partition("$")
    candidate = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), bytes.fromhex(salt_hex), 100_000
    )
    return secrets.compare_digest(candidate.hex(), digest_hex)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _safe_dirkey(user_id: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9._-]", "_", user_id)[:60]
    return f"{cleaned}-{hashlib.sha1(user_id.encode('utf-8')).hexdigest()[:8]}"


class SessionManager:
    def __init__(
        self,
        config: TaskConfig,
        instances: list[Instance],
        output_dir: str | Path | None = None,
    ):
        self.config = config
        self.instances: dict[str, Instance] = {i.id: i for i in instances}
        self.instance_order: list[str] = [i.id for i in instances]
        self.output_dir = Path(output_dir if output_dir is not None else config.server.output_dir)
        self.users_dir = self.output_dir / "users"
        self.users_dir.mkdir(parents=True, exist_ok=True)
        self.users: dict[str, UserState] = {}
        self.assignment_counts: dict[str, int] = {i: 0 for i in self.instance_order}
        self._log_handles: dict[str, Any] = {}
        self._lock = threading.RLock()
        self._user_locks: dict[str, threading.RLock] = {}
        self._recover()

    # -- identity ----------------------------------------------------------

    def _user_lock(self, user_id: str) -> threading.RLock:
        with self._lock:
            return self._user_locks.setdefault(user_id, threading.RLock())

    def user_ids(self) -> list[str]:
        with self._lock:
            return list(self.users)

    def get_user(self, user_id: str) -> UserState:
        state = self.users.get(user_id)
        if state is None:
            raise AuthError(f"unknown user {user_id!r}")
        return state

    def register_or_login(self, credentials: Mapping[str, Any]) -> UserState:
        """Resolve credentials to a UserState, creating and assigning a queue
        for new users. Existing users resume their persisted state."""
        mode = credentials.get("mode")
        if mode == "url":
            if self.config.login_mode == "email_signup":
                raise AuthError("URL-argument login is not enabled for this task")
            raw_id = str(credentials.get("id", "")).strip()
            if not raw_id:
                raise AuthError("missing id parameter")
            user_id = f"url:{raw_id}"
            with self._lock:
                if user_id in self.users:
                    state = self.users[user_id]
                    state.cursor = state.frontier()
                    return state
                return self._create_user(user_id, auth="url_argument", password_hash=None)
        if mode == "email":
            if self.config.login_mode == "url_argument":
                raise AuthError("email login is not enabled for this task")
            email = str(credentials.get("email", "")).strip().lower()
            password = str(credentials.get("password", ""))
            if not email or "@" not in email:
                raise AuthError("a valid email address is required")
            if not password:
                raise AuthError("a password is required")
            user_id = f"email:{email}"
            with self._lock:
                existing = self.users.get(user_id)
                if credentials.get("signup"):
                    if existing is not None:
                        raise AuthError("account already exists; log in instead")
                    return self._create_user(
                        user_id, auth="password_hash", password_hash=hash_password(password)
                    )
                if existing is None:
                    raise AuthError("unknown account; sign up first")
                assert existing.password_hash is not None
                if not verify_password(password, existing.password_hash):
                    raise AuthError("wrong password")
                existing.cursor = existing.frontier()
                return existing
        raise AuthError("unsupported login mode")

    def _create_user(self, user_id: str, auth: str, password_hash: str | None) -> UserState:
        qc = self.config.quality_control
        status = QualityStatus()
        if qc is not None and qc.prestudy is not None:
            status.prestudy_passed = "pending"
        state = UserState(
            user_id=user_id,
            auth=auth,
            password_hash=password_hash,
            queue=[],
            qc_status=status,
            created_at=_now(),
        )
        state.queue = self.assign_queue(state)
        state.cursor = 0
        self.users[user_id] = state
        self._write_snapshot(state)
        return state

    # -- assignment ---------------------------------------------------------

    def assign_queue(self, state: UserState) -> list[QueueEntry]:
        """Build a new user's queue under the global assignment lock."""
        assignment = self.config.assignment
        with self._lock:
            if assignment.annotations_per_instance == 0:
                chosen = list(self.instance_order)
            else:
                quota = assignment.annotations_per_instance
                candidates = [
                    (self.assignment_counts[iid], index, iid)
                    for index, iid in enumerate(self.instance_order)
                    if self.assignment_counts[iid] < quota
                ]
                candidates.sort()
                if assignment.max_instances_per_annotator is not None:
                    candidates = candidates[: assignment.max_instances_per_annotator]
                chosen = [iid for _, _, iid in candidates]
            if (
                assignment.annotations_per_instance == 0
                and assignment.max_instances_per_annotator is not None
            ):
                chosen = chosen[: assignment.max_instances_per_annotator]

            chosen = self._apply_ordering(chosen, state.user_id)
            for iid in chosen:
                self.assignment_counts[iid] += 1

            queue = [QueueEntry(instance_id=iid) for iid in chosen]
            qc = self.config.quality_control
            if qc is not None and qc.attention is not None:
                seed = int.from_bytes(
                    hashlib.sha256(f"attention:{state.user_id}".encode()).digest()[:8], "big"
                )
                queue = insert_attention_tests(queue, qc.attention, seed)
            return queue

    def _apply_ordering(self, chosen: list[str], user_id: str) -> list[str]:
        ordering = self.config.assignment.ordering
        if ordering == "random":
            seed = int.from_bytes(
                hashlib.sha256(f"order:{user_id}".encode()).digest()[:8], "big"
            )
            shuffled = list(chosen)
            random.Random(seed).shuffle(shuffled)
            return shuffled
        if ordering == "active_learning" and getattr(self, "_plan_rank", None):
            rank = self._plan_rank
            return sorted(chosen, key=lambda iid: (rank.get(iid, -1), ))
        return chosen

    # -- flow ---------------------------------------------------------------

    def current_step(self, user_id: str) -> dict[str, Any]:
        """Where the user is in the pre-survey / prestudy / queue / post-survey
        flow; drives both GET /task and the no-script pages."""
        state = self.get_user(user_id)
        qc = self.config.quality_control
        if state.qc_status.state == "blocked":
            return {"step": "blocked", "reason": self._blocked_reason(state)}
        if qc is not None:
            pending = self._next_survey_page(state, "pre")
            if pending is not None:
                return pending
            if qc.prestudy is not None and state.qc_status.prestudy_passed == "pending":
                return {
                    "step": "prestudy",
                    "index": len(state.prestudy_answers),
                    "count": len(qc.prestudy.test_items),
                }
        frontier = state.frontier()
        if frontier < len(state.queue):
            position = min(state.cursor, frontier)
            return {"step": "annotate", "position": position, "frontier": frontier}
        if qc is not None:
            pending = self._next_survey_page(state, "post")
            if pending is not None:
                return pending
        return {"step": "complete", "completion_code": self.completion_code(user_id)}

    def _next_survey_page(self, state: UserState, phase: str) -> dict[str, Any] | None:
        qc = self.config.quality_control
        pages = qc.pre_surveys if phase == "pre" else qc.post_surveys
        for index, page in enumerate(pages):
            if f"{phase}:{page.key}" not in state.survey_responses:
                return {"step": "survey", "phase": phase, "page_index": index,
                        "page_count": len(pages)}
        return None

    def _blocked_reason(self, state: UserState) -> str:
        if state.qc_status.prestudy_passed == "failed":
            return "prestudy_failed"
        qc = self.config.quality_control
        if (
            qc is not None
            and qc.attention is not None
            and state.qc_status.attention_failures >= qc.attention.fail_threshold
        ):
            return "attention_failures"
        return "consent_declined"

    def completion_code(self, user_id: str) -> str:
        raw = f"{self.config.task_name}:{user_id}:complete"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:10].upper()

    # -- submissions --------------------------------------------------------

    def submit_survey(self, user_id: str, phase: str, page_index: int,
                      labels: dict[str, Any]) -> dict[str, Any]:
        state = self.get_user(user_id)
        qc = self.config.quality_control
        with self._user_lock(user_id):
            if state.qc_status.state == "blocked":
                raise BlockedError("user is blocked")
            if qc is None:
                raise FlowError("no surveys are configured")
            step = self.current_step(user_id)
            if step.get("step") != "survey" or step.get("phase") != phase \
                    or step.get("page_index") != page_index:
                raise StaleSubmissionError("survey page does not match the current step")
            pages = qc.pre_surveys if phase == "pre" else qc.post_surveys
            page = pages[page_index]
            payload = validate_survey_submission(page, labels)
            event = {
                "type": "survey",
                "phase": phase,
                "page_key": page.key,
                "labels": payload,
                "received_at": _now(),
            }
            self._append_event(state, event)
            self._apply_survey_event(state, page, event)
            return {"status": "ok"}

    def _apply_survey_event(self, state: UserState, page, event: dict[str, Any]) -> None:
        state.survey_responses[f"{event['phase']}:{event['page_key']}"] = event["labels"]
        state.survey_order.append(event)
        if consent_declined(page, event["labels"]):
            state.qc_status.state = "blocked"

    def submit_prestudy(self, user_id: str, index: int, labels: dict[str, Any]) -> dict[str, Any]:
        state = self.get_user(user_id)
        qc = self.config.quality_control
        if qc is None or qc.prestudy is None:
            raise FlowError("no prestudy is configured")
        with self._user_lock(user_id):
            if state.qc_status.state == "blocked":
                raise BlockedError("user is blocked")
            step = self.current_step(user_id)
            if step.get("step") != "prestudy" or step.get("index") != index:
                raise StaleSubmissionError("prestudy item does not match the current step")
            gold = qc.prestudy.test_items[index]
            payload = validate_submission(
                list(self.config.schemes), labels_from_json(labels), gold.instance
            )
            event = {"type": "prestudy", "index": index, "labels": payload,
                     "received_at": _now()}
            self._append_event(state, event)
            self._apply_prestudy_event(state, event)
            verdict = state.qc_status.prestudy_passed
            return {"status": "ok", "prestudy": verdict}

    def _apply_prestudy_event(self, state: UserState, event: dict[str, Any]) -> None:
        qc = self.config.quality_control
        assert qc is not None and qc.prestudy is not None
        state.prestudy_answers.append(event["labels"])
        if len(state.prestudy_answers) == len(qc.prestudy.test_items):
            verdict, _ = evaluate_prestudy(qc.prestudy, state.prestudy_answers)
            apply_prestudy_result(state.qc_status, verdict)

    def submit_and_advance(
        self,
        user_id: str,
        instance_id: str,
        labels: dict[str, Any],
        elapsed_ms: int = 0,
        revision: int | None = None,
    ) -> dict[str, Any]:
        """Validate, durably record, and advance to the first unannotated item.

        The submitted item must be the one at the user's cursor or an earlier,
        already-annotated item being edited; anything else is stale. A replay
        of an already-applied (instance, revision) acknowledges without
        writing, so records are never duplicated.
        """
        state = self.get_user(user_id)
        with self._user_lock(user_id):
            if state.qc_status.state == "blocked":
                raise BlockedError("user is blocked")
            step = self.current_step(user_id)
            if step.get("step") != "annotate":
                raise FlowError(f"not at an annotation step (at {step.get('step')})")
            position = step["position"]
            entry = state.queue[position]
            if entry.instance_id != instance_id:
                editable = self._editable_position(state, instance_id)
                if editable is None:
                    raise StaleSubmissionError(
                        f"submitted {instance_id!r} but the current item is "
                        f"{entry.instance_id!r}"
                    )
                position = editable
                entry = state.queue[position]

            if entry.kind == "attention":
                return self._submit_attention(state, position, entry, labels, elapsed_ms)

            instance = self.instances[entry.instance_id]
            payload = validate_submission(
                list(self.config.schemes), labels_from_json(labels), instance
            )
            current = state.annotations.get(entry.instance_id)
            next_revision = (current["revision"] + 1) if current else 0
            if revision is not None:
                if revision < next_revision:
                    # Idempotent replay of an applied submission.
                    state.cursor = state.frontier()
                    return {"status": "ok", "duplicate": True}
                if revision > next_revision:
                    raise StaleSubmissionError(
                        f"revision {revision} is ahead of the stored state"
                    )
            event = {
                "type": "annotation",
                "position": position,
                "instance_id": entry.instance_id,
                "labels": payload,
                "elapsed_ms": int(elapsed_ms),
                "revision": next_revision,
                "received_at": _now(),
            }
            self._append_event(state, event)
            self._apply_annotation_event(state, event)
            state.cursor = state.frontier()
            return {"status": "ok", "revision": next_revision}

    def _editable_position(self, state: UserState, instance_id: str) -> int | None:
        for position in sorted(state.answered_positions):
            entry = state.queue[position]
            if entry.instance_id == instance_id and entry.kind == "main":
                return position
        return None

    def _apply_annotation_event(self, state: UserState, event: dict[str, Any]) -> None:
        iid = event["instance_id"]
        state.annotations[iid] = {
            "labels": event["labels"],
            "revision": event["revision"],
            "received_at": event["received_at"],
        }
        state.per_item_timing[iid] = (
            state.per_item_timing.get(iid, 0) + int(event.get("elapsed_ms", 0))
        )
        state.answered_positions.add(event["position"])
        state.annotation_events += 1

    def _submit_attention(self, state, position, entry, labels, elapsed_ms) -> dict[str, Any]:
        qc = self.config.quality_control
        assert qc is not None and qc.attention is not None
        gold = qc.attention.test_items[entry.gold_index or 0]
        payload = validate_submission(
            list(self.config.schemes), labels_from_json(labels), gold.instance
        )
        event = {
            "type": "attention",
            "position": position,
            "instance_id": entry.instance_id,
            "gold_index": entry.gold_index or 0,
            "labels": payload,
            "elapsed_ms": int(elapsed_ms),
            "matched": score_gold_answer(gold, payload),
            "received_at": _now(),
        }
        self._append_event(state, event)
        self._apply_attention_event(state, event)
        state.cursor = state.frontier()
        if state.qc_status.state == "blocked":
            return {"status": "blocked"}
        return {"status": "ok"}

    def _apply_attention_event(self, state: UserState, event: dict[str, Any]) -> None:
        qc = self.config.quality_control
        assert qc is not None and qc.attention is not None
        gold = qc.attention.test_items[event["gold_index"]]
        score_attention(state.qc_status, qc.attention, gold, event["labels"])
        state.answered_positions.add(event["position"])
        state.attention_events.append(event)

    def navigate(self, user_id: str, direction: str) -> dict[str, Any]:
        """Move the view cursor one step within [0, frontier]."""
        state = self.get_user(user_id)
        with self._user_lock(user_id):
            frontier = state.frontier()
            position = min(state.cursor, frontier)
            if direction == "back":
                if position == 0:
                    return {"moved": False, "position": position,
                            "notice": "already at the first item"}
                state.cursor = position - 1
            elif direction == "forward":
                if position >= frontier:
                    return {"moved": False, "position": position,
                            "notice": "already at the first unannotated item"}
                state.cursor = position + 1
            else:
                raise FlowError(f"unknown direction {direction!r}")
            return {"moved": True, "position": state.cursor}

    # -- active learning hooks ---------------------------------------------

    def total_main_annotations(self) -> int:
        with self._lock:
            return sum(state.annotation_events for state in self.users.values())

    def training_examples(self, scheme_name: str) -> list[tuple[str, Any]]:
        """Pooled (text, value) pairs for the target scheme; attention items
        never appear here because they are not stored as annotations."""
        examples = []
        with self._lock:
            for user_id in sorted(self.users):
                state = self.users[user_id]
                for iid in sorted(state.annotations):
                    record = state.annotations[iid]
                    if scheme_name in record["labels"] and iid in self.instances:
                        examples.append(
                            (instance_text(self.instances[iid]), record["labels"][scheme_name])
                        )
        return examples

    def unlabeled_instances(self) -> list[tuple[str, str]]:
        with self._lock:
            labeled = set()
            for state in self.users.values():
                labeled.update(state.annotations)
            return [
                (iid, instance_text(self.instances[iid]))
                for iid in self.instance_order
                if iid not in labeled
            ]

    def apply_queue_plan(self, plan) -> None:
        """Atomically reorder every user's unannotated suffix to follow the
        plan; completed prefixes and attention slots stay where they are."""
        rank = {iid: i for i, (iid, _) in enumerate(plan.slots)}
        with self._lock:
            self._plan_rank = rank
            for user_id in sorted(self.users):
                state = self.users[user_id]
                with self._user_lock(user_id):
                    frontier = state.frontier()
                    suffix = state.queue[frontier:]
                    main_entries = [e for e in suffix if e.kind == "main"]
                    main_entries.sort(
                        key=lambda e: (e.instance_id in rank, rank.get(e.instance_id, 0))
                    )
                    rebuilt = []
                    main_iter = iter(main_entries)
                    for entry in suffix:
                        rebuilt.append(entry if entry.kind == "attention" else next(main_iter))
                    state.queue = state.queue[:frontier] + rebuilt
                    state.cursor = min(state.cursor, state.frontier())
                    self._write_snapshot(state)

    # -- persistence ---------------------------------------------------------

    def _user_dir(self, user_id: str) -> Path:
        return self.users_dir / _safe_dirkey(user_id)

    def _append_event(self, state: UserState, event: dict[str, Any]) -> None:
        handle = self._log_handles.get(state.user_id)
        if handle is None:
            path = self._user_dir(state.user_id) / "annotations.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            handle = path.open("a", encoding="utf-8")
            self._log_handles[state.user_id] = handle
        handle.write(json.dumps(event, ensure_ascii=False) + "\n")
        handle.flush()
        os.fsync(handle.fileno())

    def _write_snapshot(self, state: UserState) -> None:
        user_dir = self._user_dir(state.user_id)
        user_dir.mkdir(parents=True, exist_ok=True)
        snapshot = {
            "user_id": state.user_id,
            "auth": state.auth,
            "password_hash": state.password_hash,
            "queue": [entry.as_dict() for entry in state.queue],
            "created_at": state.created_at,
        }
        tmp = user_dir / "state.json.tmp"
        with tmp.open("w", encoding="utf-8") as handle:
            json.dump(snapshot, handle, ensure_ascii=False, indent=1)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, user_dir / "state.json")
        dir_fd = os.open(user_dir, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)

    def _recover(self) -> None:
        for snapshot_path in sorted(self.users_dir.glob("*/state.json")):
            snapshot = json.loads(snapshot_path.read_text(encoding="utf-8"))
            qc = self.config.quality_control
            status = QualityStatus()
            if qc is not None and qc.prestudy is not None:
                status.prestudy_passed = "pending"
            state = UserState(
                user_id=snapshot["user_id"],
                auth=snapshot["auth"],
                password_hash=snapshot.get("password_hash"),
                queue=[QueueEntry.from_dict(e) for e in snapshot["queue"]],
                qc_status=status,
                created_at=snapshot.get("created_at", ""),
            )
            for event in self._replay_log(snapshot_path.parent / "annotations.jsonl"):
                self._replay_event(state, event)
            state.cursor = state.frontier()
            self.users[state.user_id] = state
            for entry in state.queue:
                if entry.kind == "main" and entry.instance_id in self.assignment_counts:
                    self.assignment_counts[entry.instance_id] += 1

    def _replay_log(self, path: Path) -> Iterator[dict[str, Any]]:
        if not path.exists():
            return
        lines = path.read_text(encoding="utf-8").splitlines()
        for index, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                if index == len(lines) - 1:
                    # Torn trailing write from a crash mid-append; the matching
                    # submission was never acknowledged, so dropping it is safe.
                    return
                raise

    def _replay_event(self, state: UserState, event: dict[str, Any]) -> None:
        kind = event.get("type")
        if kind == "annotation":
            self._apply_annotation_event(state, event)
        elif kind == "attention":
            self._apply_attention_event(state, event)
        elif kind == "prestudy":
            self._apply_prestudy_event(state, event)
        elif kind == "survey":
            qc = self.config.quality_control
            page = None
            if qc is not None:
                for candidate in qc.pre_surveys + qc.post_surveys:
                    if candidate.key == event["page_key"]:
                        page = candidate
                        break
            if page is not None:
                self._apply_survey_event(state, page, event)

    def close(self) -> None:
        for handle in self._log_handles.values():
            handle.close()
        self._log_handles.clear()

    # -- reporting ------------------------------------------------------------

    def survey_records(self) -> list[dict[str, Any]]:
        records = []
        with self._lock:
            for user_id in sorted(self.users):
                for event in self.users[user_id].survey_order:
                    records.append(
                        {
                            "user": user_id,
                            "phase": event["phase"],
                            "page_key": event["page_key"],
                            "responses": event["labels"],
                            "received_at": event["received_at"],
                        }
                    )
        return records

    def attention_records(self) -> list[dict[str, Any]]:
        records = []
        with self._lock:
            for user_id in sorted(self.users):
                for event in self.users[user_id].attention_events:
                    records.append(
                        {
                            "user": user_id,
                            "position": event["position"],
                            "instance_id": event["instance_id"],
                            "gold_index": event["gold_index"],
                            "labels": event["labels"],
                            "matched": event["matched"],
                            "received_at": event["received_at"],
                        }
                    )
        return records

    def admin_snapshot(self) -> dict[str, Any]:
        """Read-only progress overview for the admin endpoints."""
        with self._lock:
            per_user = {}
            per_instance = {iid: 0 for iid in self.instance_order}
            attention_failures = {}
            total = 0
            for user_id in sorted(self.users):
                state = self.users[user_id]
                per_user[user_id] = {
                    "completed": len(state.answered_positions),
                    "queue_length": len(state.queue),
                    "annotated_instances": len(state.annotations),
                    "state": state.qc_status.state,
                }
                attention_failures[user_id] = state.qc_status.attention_failures
                for iid in state.annotations:
                    if iid in per_instance:
                        per_instance[iid] += 1
                        total += 1
            return {
                "task_name": self.config.task_name,
                "users": per_user,
                "instance_coverage": per_instance,
                "attention_failures": attention_failures,
                "total_annotations": total,
            }
