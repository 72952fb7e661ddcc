"""Instruction-tuning export and feedback-cycle expansion of the ledger.

The export writes one JSON object per ledger record, ``{"text": <rendered
training example>}``, as UTF-8 JSON-Lines with LF endings and no trailing
blank line. A single text field keeps the file loadable by common
instruction-tuning pipelines; the input/response split stays recoverable
from the section headers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from .ledger import Ledger, Task, TrialRecord, new_uid
from .prompt import PromptTemplate, render_training_example
from .space import HyperparameterSet, SearchSpace, default_search_space, validate


class FinetuneError(ValueError):
    pass


def export_finetune_dataset(
    ledger: Ledger,
    model_code_lookup: Mapping[str, str],
    template: PromptTemplate,
    out_path: str | Path,
) -> int:
    """Write one training-example line per record; returns the line count.

    Byte-stable for identical inputs. Every model_id in the ledger must have
    a source-code entry in the lookup.
    """
    lines = []
    for record in ledger.records:
        code = model_code_lookup.get(record.model_id)
        if code is None:
            raise FinetuneError(f"no model code for model_id {record.model_id!r}")
        text = render_training_example(record, code, template)
        lines.append(json.dumps({"text": text}, ensure_ascii=False))
    content = "\n".join(lines) + "\n" if lines else ""
    Path(out_path).write_text(content, encoding="utf-8")
    return len(lines)


@dataclass
class CycleExpansion:
    appended: int
    rejections: list[str] = field(default_factory=list)


ValidatedSuggestion = tuple[str, int, HyperparameterSet, float]


def expand_cycle(
    ledger: Ledger,
    validated: Sequence[ValidatedSuggestion],
    cycle: int,
    task: Task = Task.IMAGE_CLASSIFICATION,
    space: SearchSpace | None = None,
) -> CycleExpansion:
    """Append measured (model_id, epochs, params, accuracy) tuples with
    source ``llm_cycle`` and the given cycle number.

    Invalid items go into the rejection report; valid items are still
    appended. The original records are untouched (append-only).
    """
    if not (isinstance(cycle, int) and cycle >= 1):
        raise FinetuneError(f"cycle must be a positive integer, got {cycle!r}")
    space = space if space is not None else default_search_space()
    result = CycleExpansion(appended=0)
    for i, (model_id, epochs, params, accuracy) in enumerate(validated):
        problems = []
        if not 0.0 <= accuracy <= 1.0:
            problems.append(f"accuracy {accuracy} outside [0, 1]")
        report = validate(params, space)
        problems.extend(f"{v.dimension}: {v.message}" for v in report.violations)
        if not (isinstance(epochs, int) and epochs >= 1):
            problems.append(f"epochs {epochs!r} not a positive integer")
        if problems:
            result.rejections.append(f"item {i} ({model_id}): " + "; ".join(problems))
            continue
        ledger.append(
            TrialRecord(
                uid=new_uid(),
                model_id=model_id,
                task=task,
                epochs=epochs,
                params=params,
                accuracy=float(accuracy),
                source="llm_cycle",
                created_at=datetime.now(timezone.utc),
                cycle=cycle,
            )
        )
        result.appended += 1
    return result
