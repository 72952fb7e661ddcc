"""Rendering and parsing of the three-section instruction format.

Documents have the shape::

    <system prompt>

    ### Input:
    <instruction embedding the model source and the target accuracy>

    ### Response:
    <the three hyperparameters>

Training examples carry the response body; queries stop right after the
response header so a language model can complete it. Responses coming back
are scanned with a tolerant grammar and screened into a small pathology
taxonomy (missing numbers, zero batch size, out-of-range values).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .space import HyperparameterSet, SearchSpace, validate

if TYPE_CHECKING:
    from .ledger import TrialRecord

INPUT_HEADER = "### Input:"
RESPONSE_HEADER = "### Response:"

DEFAULT_SYSTEM_PROMPT = (
    "You are a hyperparameter suggestion tool. Given a neural network "
    "implementation and a target accuracy, respond with learning rate, "
    "momentum, and batch size."
)

DEFAULT_INPUT_BODY = (
    "Suggest the learning rate, momentum, and batch size that train the "
    "model below to an accuracy of {target_accuracy}.\n\n{model_code}"
)

DEFAULT_RESPONSE_BODY = (
    "learning rate: {learning_rate}\nmomentum: {momentum}\nbatch size: {batch_size}"
)


class PromptError(ValueError):
    pass


class TemplateError(PromptError):
    pass


class ParseError(PromptError):
    """A response did not yield all three numeric fields."""

    def __init__(self, found: dict[str, float], missing: Sequence[str]) -> None:
        self.found = dict(found)
        self.missing = tuple(missing)
        super().__init__(f"missing numeric fields {list(missing)}; found {sorted(found)}")


@dataclass(frozen=True)
class PromptTemplate:
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    input_body_template: str = DEFAULT_INPUT_BODY
    response_body_template: str = DEFAULT_RESPONSE_BODY

    input_header: str = field(default=INPUT_HEADER, init=False)
    response_header: str = field(default=RESPONSE_HEADER, init=False)


def load_template(path: str | Path) -> PromptTemplate:
    """Template override file: a JSON object whose keys (all optional) are
    ``system_prompt``, ``input_body_template`` and ``response_body_template``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise TemplateError(f"{path}: expected a JSON object")
    allowed = {"system_prompt", "input_body_template", "response_body_template"}
    unknown = set(data) - allowed
    if unknown:
        raise TemplateError(f"{path}: unknown template keys {sorted(unknown)}")
    return PromptTemplate(**data)


def _require_placeholders(template: str, names: Sequence[str], which: str) -> None:
    missing = [n for n in names if "{" + n + "}" not in template]
    if missing:
        raise TemplateError(f"{which} lacks placeholders {missing}")


def format_learning_rate(value: float) -> str:
    """Decimal (positional) notation with up to 10 significant digits."""
    return np.format_float_positional(
        float(value), precision=10, unique=False, fractional=False, trim="-"
    )


def _render_input(model_code: str, target_accuracy: float, template: PromptTemplate) -> str:
    _require_placeholders(
        template.input_body_template, ("model_code", "target_accuracy"), "input body template"
    )
    return template.input_body_template.format(
        model_code=model_code, target_accuracy=f"{target_accuracy:.4f}"
    )


def render_training_example(record: "TrialRecord", model_code: str, template: PromptTemplate) -> str:
    """Full three-section document for one recorded trial.

    The input body embeds the model source and the achieved accuracy to four
    decimals; the response body embeds the trial's hyperparameters (learning
    rate in positional notation at 10 significant digits, momentum to four
    decimals, batch size as an integer).
    """
    if not model_code:
        raise PromptError("model_code must be non-empty")
    _require_placeholders(
        template.response_body_template,
        ("learning_rate", "momentum", "batch_size"),
        "response body template",
    )
    response = template.response_body_template.format(
        learning_rate=format_learning_rate(record.params.learning_rate),
        momentum=f"{record.params.momentum:.4f}",
        batch_size=str(int(record.params.batch_size)),
    )
    input_body = _render_input(model_code, record.accuracy, template)
    return (
        f"{template.system_prompt}\n\n"
        f"{INPUT_HEADER}\n{input_body}\n\n"
        f"{RESPONSE_HEADER}\n{response}\n"
    )


def render_query(model_code: str, target_accuracy: float, template: PromptTemplate) -> str:
    """Document ending right after the response header, ready for completion."""
    if not model_code:
        raise PromptError("model_code must be non-empty")
    if not 0.0 < target_accuracy <= 1.0:
        raise PromptError(f"target accuracy must lie in (0, 1], got {target_accuracy}")
    input_body = _render_input(model_code, target_accuracy, template)
    return f"{template.system_prompt}\n\n{INPUT_HEADER}\n{input_body}\n\n{RESPONSE_HEADER}\n"


@dataclass(frozen=True)
class ParsedSuggestion:
    params: HyperparameterSet
    raw_text: str
    extraction_spans: dict[str, tuple[int, int]]


class RelevanceClass(str, Enum):
    RELEVANT = "relevant"
    MISSING_NUMERIC = "missing_numeric"
    OUT_OF_RANGE = "out_of_range"
    ZERO_BATCH = "zero_batch"


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_SEP = r"\s*(?::|=|is)?\s*"

_FIELD_PATTERNS = {
    "learning_rate": re.compile(
        rf"(?:learning[ _]rate|\blr\b){_SEP}({_NUMBER})", re.IGNORECASE
    ),
    "momentum": re.compile(rf"momentum{_SEP}({_NUMBER})", re.IGNORECASE),
    "batch_size": re.compile(
        rf"(?:batch[ _]size|\bbatch\b){_SEP}({_NUMBER})", re.IGNORECASE
    ),
}


def parse_response(text: str) -> ParsedSuggestion:
    """Extract the three hyperparameters from free-form text.

    Case-insensitive label scan (``learning rate``/``learning_rate``/``lr``,
    ``momentum``, ``batch size``/``batch_size``/``batch``), each label
    optionally followed by ``:``, ``=`` or ``is``, then a decimal or
    scientific number. The first match per field wins; truncated generations
    tend to repeat themselves, so the earliest complete statement is the
    most reliable one. Raises :class:`ParseError` when any field is absent.
    """
    found: dict[str, float] = {}
    spans: dict[str, tuple[int, int]] = {}
    for name, pattern in _FIELD_PATTERNS.items():
        match = pattern.search(text)
        if match:
            found[name] = float(match.group(1))
            spans[name] = match.span(1)
    missing = [n for n in _FIELD_PATTERNS if n not in found]
    if missing:
        raise ParseError(found, missing)
    batch = found["batch_size"]
    params = HyperparameterSet(
        learning_rate=found["learning_rate"],
        momentum=found["momentum"],
        batch_size=int(batch) if float(batch).is_integer() else batch,  # type: ignore[arg-type]
    )
    return ParsedSuggestion(params=params, raw_text=text, extraction_spans=spans)


def classify_relevance(text: str, space: SearchSpace) -> RelevanceClass:
    """Screen a raw response: unparseable -> missing_numeric; a parsed batch
    size of zero -> zero_batch (it dominates other range problems); any
    other bound violation -> out_of_range; relevant otherwise."""
    try:
        parsed = parse_response(text)
    except ParseError:
        return RelevanceClass.MISSING_NUMERIC
    if parsed.params.batch_size == 0:
        return RelevanceClass.ZERO_BATCH
    if not validate(parsed.params, space).valid:
        return RelevanceClass.OUT_OF_RANGE
    return RelevanceClass.RELEVANT


def relevance_rate(classes: Sequence[RelevanceClass]) -> float:
    if not classes:
        raise PromptError("relevance rate of an empty list is undefined")
    relevant = sum(1 for c in classes if c is RelevanceClass.RELEVANT)
    return relevant / len(classes)
