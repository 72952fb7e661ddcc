"""Persistent store of hyperparameter-accuracy observations.

The on-disk format is a single JSON document ``{"schema_version": 1,
"records": [...]}`` whose record objects carry exactly the keys ``uid``,
``model_id``, ``task``, ``epochs``, ``learning_rate``, ``momentum``,
``batch_size``, ``accuracy``, ``source``, ``cycle``, ``created_at``.
Round-trips are lossless and order-preserving.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .space import HyperparameterSet

SCHEMA_VERSION = 1

RECORD_KEYS = (
    "uid",
    "model_id",
    "task",
    "epochs",
    "learning_rate",
    "momentum",
    "batch_size",
    "accuracy",
    "source",
    "cycle",
    "created_at",
)

SOURCES = ("tpe", "random", "llm_cycle", "manual", "import")


class LedgerError(ValueError):
    """Base class for ledger failures."""


class DuplicateUidError(LedgerError):
    pass


class LedgerFormatError(LedgerError):
    """A ledger file failed to parse or violated a record invariant."""


class SchemaVersionError(LedgerFormatError):
    pass


class Task(str, Enum):
    IMAGE_CLASSIFICATION = "image_classification"
    TEXT_GENERATION = "text_generation"


_uid_counter = itertools.count()


def new_uid() -> str:
    """Creation-time identifier: UTC timestamp plus a process-local counter."""
    now = datetime.now(timezone.utc)
    return f"{now:%Y%m%dT%H%M%S%f}-{next(_uid_counter):06d}"


@dataclass(frozen=True)
class TrialRecord:
    """One (hyperparameters, accuracy) observation with provenance."""

    uid: str
    model_id: str
    task: Task
    epochs: int
    params: HyperparameterSet
    accuracy: float
    source: str
    created_at: datetime
    cycle: int = 0

    def __post_init__(self) -> None:
        if not self.uid:
            raise LedgerError("uid must be non-empty")
        if not isinstance(self.task, Task):
            raise LedgerError(f"task must be a Task, got {self.task!r}")
        if not (isinstance(self.epochs, int) and self.epochs >= 1):
            raise LedgerError(f"epochs must be a positive integer, got {self.epochs!r}")
        if not (isinstance(self.accuracy, (int, float)) and math.isfinite(self.accuracy)):
            raise LedgerError(f"accuracy must be finite, got {self.accuracy!r}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise LedgerError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.source not in SOURCES:
            raise LedgerError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "llm_cycle":
            if not (isinstance(self.cycle, int) and self.cycle >= 1):
                raise LedgerError(f"llm_cycle records need cycle >= 1, got {self.cycle!r}")
        elif self.cycle != 0:
            raise LedgerError(f"cycle must be 0 when source is {self.source!r}, got {self.cycle}")
        if self.created_at.tzinfo is None:
            raise LedgerError("created_at must be timezone-aware (UTC)")


@dataclass(frozen=True)
class GroupKey:
    """Selector for per-group statistics: model and epochs, with an optional
    source filter."""

    model_id: str
    epochs: int
    source: str | None = None


def _record_to_obj(record: TrialRecord) -> dict[str, Any]:
    return {
        "uid": record.uid,
        "model_id": record.model_id,
        "task": record.task.value,
        "epochs": record.epochs,
        "learning_rate": record.params.learning_rate,
        "momentum": record.params.momentum,
        "batch_size": record.params.batch_size,
        "accuracy": record.accuracy,
        "source": record.source,
        "cycle": record.cycle,
        "created_at": record.created_at.isoformat(),
    }


def _record_from_obj(obj: dict[str, Any], where: str) -> TrialRecord:
    if not isinstance(obj, dict):
        raise LedgerFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = [k for k in RECORD_KEYS if k not in obj]
    if missing:
        raise LedgerFormatError(f"{where}: missing fields {missing}")
    try:
        task = Task(obj["task"])
    except ValueError as exc:
        raise LedgerFormatError(f"{where}.task: {exc}") from None
    try:
        created = datetime.fromisoformat(obj["created_at"])
    except (TypeError, ValueError) as exc:
        raise LedgerFormatError(f"{where}.created_at: {exc}") from None
    params = HyperparameterSet(
        learning_rate=float(obj["learning_rate"]),
        momentum=float(obj["momentum"]),
        batch_size=int(obj["batch_size"]),
    )
    try:
        return TrialRecord(
            uid=str(obj["uid"]),
            model_id=str(obj["model_id"]),
            task=task,
            epochs=int(obj["epochs"]),
            params=params,
            accuracy=float(obj["accuracy"]),
            source=str(obj["source"]),
            created_at=created,
            cycle=int(obj["cycle"]),
        )
    except LedgerError as exc:
        raise LedgerFormatError(f"{where}: {exc}") from None


class Ledger:
    """Append-only, single-writer collection of trial records.

    Any number of readers may hold the ``records`` view between mutations;
    exactly one task appends or saves at a time.
    """

    def __init__(self, records: Iterable[TrialRecord] = ()) -> None:
        self._records: list[TrialRecord] = []
        self._uids: set[str] = set()
        for record in records:
            self.append(record)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[TrialRecord, ...]:
        return tuple(self._records)

    def append(self, record: TrialRecord) -> "Ledger":
        if record.uid in self._uids:
            raise DuplicateUidError(f"uid {record.uid!r} already present")
        self._records.append(record)
        self._uids.add(record.uid)
        return self

    def filter(self, key: GroupKey) -> list[TrialRecord]:
        """Records matching all provided key fields, in ledger order."""
        out = []
        for record in self._records:
            if record.model_id != key.model_id:
                continue
            if record.epochs != key.epochs:
                continue
            if key.source is not None and record.source != key.source:
                continue
            out.append(record)
        return out

    def save(self, path: str | Path) -> None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "records": [_record_to_obj(r) for r in self._records],
        }
        Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Ledger":
        raw = Path(path).read_text(encoding="utf-8")
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise LedgerFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if isinstance(doc, list):
            # Tolerated legacy shape: a bare array of record objects.
            items = doc
        elif isinstance(doc, dict):
            version = doc.get("schema_version")
            if version != SCHEMA_VERSION:
                raise SchemaVersionError(f"{path}: unknown schema_version {version!r}")
            items = doc.get("records")
            if not isinstance(items, list):
                raise LedgerFormatError(f"{path}: 'records' must be an array")
        else:
            raise LedgerFormatError(f"{path}: expected an object or array at top level")
        ledger = cls()
        for i, obj in enumerate(items):
            record = _record_from_obj(obj, where=f"records[{i}]")
            try:
                ledger.append(record)
            except DuplicateUidError as exc:
                raise LedgerFormatError(f"records[{i}]: {exc}") from None
        return ledger


@dataclass
class RowRejection:
    index: int
    reason: str


@dataclass
class ImportResult:
    ledger: Ledger
    rejections: list[RowRejection] = field(default_factory=list)


# Target fields an import mapping must provide a source name for.
IMPORT_TARGETS = ("model_id", "epochs", "learning_rate", "momentum", "batch_size", "accuracy")


def import_external(path: str | Path, mapping: dict[str, str]) -> ImportResult:
    """Adapt an external JSON array of flat row objects into a ledger.

    ``mapping`` has the shape ``{"target_field": "source_field"}`` and must
    cover every field in :data:`IMPORT_TARGETS` (``task`` is optional and
    defaults to image classification). Rows violating record invariants are
    collected into the rejection report rather than silently dropped; the
    importer never fabricates values.
    """
    missing_targets = [t for t in IMPORT_TARGETS if t not in mapping]
    if missing_targets:
        raise LedgerError(f"mapping lacks target fields {missing_targets}")
    raw = Path(path).read_text(encoding="utf-8")
    try:
        rows = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise LedgerFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(rows, list):
        raise LedgerFormatError(f"{path}: expected a JSON array of row objects")
    if rows and isinstance(rows[0], dict):
        absent = [src for src in mapping.values() if src not in rows[0]]
        if absent:
            raise LedgerError(f"mapping references fields absent from the data: {absent}")

    result = ImportResult(ledger=Ledger())
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            result.rejections.append(RowRejection(i, "not an object"))
            continue
        try:
            values = {target: row[source] for target, source in mapping.items()}
            task = Task(values.get("task", Task.IMAGE_CLASSIFICATION))
            params = HyperparameterSet(
                learning_rate=float(values["learning_rate"]),
                momentum=float(values["momentum"]),
                batch_size=int(values["batch_size"]),
            )
            record = TrialRecord(
                uid=new_uid(),
                model_id=str(values["model_id"]),
                task=task,
                epochs=int(values["epochs"]),
                params=params,
                accuracy=float(values["accuracy"]),
                source="import",
                created_at=datetime.now(timezone.utc),
            )
        except (KeyError, TypeError, ValueError, LedgerError) as exc:
            result.rejections.append(RowRejection(i, f"row {i}: {exc}"))
            continue
        result.ledger.append(record)
    return result
