"""Objective evaluation and the sequential tuning loops.

Objectives come in two flavors: a closed-form synthetic surface for fast,
deterministic experiments, and an external program spoken to over the
subprocess protocol::

    cmd [fixed_args...] --lr <decimal> --momentum <decimal> \
        --batch-size <integer> --epochs <integer>

The program must exit 0 and print, as its last non-empty stdout line, a JSON
object ``{"accuracy": <float in [0, 1]>}``. Standard error is never parsed.
"""
from __future__ import annotations

import json
import logging
import math
import subprocess
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .ledger import Ledger, Task, TrialRecord, new_uid
from .space import HyperparameterSet, SearchSpace, default_search_space, sample_uniform, validate
from .stats import best_trial
from .tpe import TpeConfig, suggest

logger = logging.getLogger(__name__)

DEFAULT_EVAL_TIMEOUT = 3600.0


class RunnerError(ValueError):
    pass


class EvaluationError(RuntimeError):
    """One objective evaluation failed (bad exit, timeout, bad output)."""


class RunError(RuntimeError):
    """Every trial of a run failed to evaluate."""


@dataclass(frozen=True)
class SyntheticValley:
    """Deterministic analytic accuracy surface with its optimum at
    lr=0.01, momentum=0.9, batch=16 (off every boundary)."""

    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.noise_sd < 0:
            raise RunnerError(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass(frozen=True)
class SubprocessObjective:
    command: str
    fixed_args: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.command:
            raise RunnerError("command must be non-empty")


ObjectiveSpec = SyntheticValley | SubprocessObjective


@dataclass(frozen=True)
class Budget:
    n_trials: int
    epochs: int

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise RunnerError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.epochs < 1:
            raise RunnerError(f"epochs must be >= 1, got {self.epochs}")


_BATCH_QUALITY = {4: 0.92, 5: 0.93, 8: 0.96, 16: 1.00, 32: 0.98, 64: 0.95}
_LR_CENTER = 0.01
_LR_WIDTH = 1.5  # in ln units; keeps the basin findable within ~50 trials


def synthetic_accuracy(params: HyperparameterSet, epochs: int) -> float:
    """Noise-free closed form, exactly reproducible across platforms:
    a product of per-hyperparameter quality factors and an epoch saturation
    term, clamped to [0, 1]."""
    report = validate(params, default_search_space())
    if not report.valid:
        raise RunnerError(f"invalid hyperparameters: {[v.message for v in report.violations]}")
    if epochs < 1:
        raise RunnerError(f"epochs must be >= 1, got {epochs}")
    g_lr = math.exp(-((math.log(params.learning_rate) - math.log(_LR_CENTER)) ** 2) / (2.0 * _LR_WIDTH**2))
    g_mom = 1.0 - 0.5 * (params.momentum - 0.9) ** 2
    g_batch = _BATCH_QUALITY[int(params.batch_size)]
    g_epoch = 1.0 - math.exp(-(epochs + 1) / 3.0)
    return min(max(g_lr * g_mom * g_batch * g_epoch, 0.0), 1.0)


def peak_synthetic_accuracy(epochs: int) -> float:
    """Value of the noise-free surface at its optimum for a given epoch count."""
    return synthetic_accuracy(HyperparameterSet(0.01, 0.9, 16), epochs)


def _format_arg(value: float) -> str:
    return repr(float(value))


def evaluate(
    objective: ObjectiveSpec,
    params: HyperparameterSet,
    epochs: int,
    rng: np.random.Generator | None = None,
    timeout: float = DEFAULT_EVAL_TIMEOUT,
) -> float:
    """Run one evaluation and return the accuracy.

    For a noisy synthetic objective the caller should pass the run's
    generator so successive calls draw successive noise; without one, a
    fresh generator is seeded from the objective each call.
    """
    if isinstance(objective, SyntheticValley):
        accuracy = synthetic_accuracy(params, epochs)
        if objective.noise_sd > 0:
            noise_rng = rng if rng is not None else np.random.default_rng(objective.seed)
            accuracy = min(max(accuracy + float(noise_rng.normal(0.0, objective.noise_sd)), 0.0), 1.0)
        return accuracy

    args = [
        objective.command,
        *objective.fixed_args,
        "--lr",
        _format_arg(params.learning_rate),
        "--momentum",
        _format_arg(params.momentum),
        "--batch-size",
        str(int(params.batch_size)),
        "--epochs",
        str(int(epochs)),
    ]
    try:
        proc = subprocess.run(args, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        raise EvaluationError(f"evaluation timed out after {timeout}s: {args}") from exc
    except OSError as exc:
        raise EvaluationError(f"could not launch {objective.command!r}: {exc}") from exc
    excerpt = (proc.stdout[-500:] + ("\n--- stderr ---\n" + proc.stderr[-500:] if proc.stderr else "")).strip()
    if proc.returncode != 0:
        raise EvaluationError(f"objective exited {proc.returncode}: {excerpt}")
    lines = [line for line in proc.stdout.splitlines() if line.strip()]
    if not lines:
        raise EvaluationError(f"objective produced no stdout: {excerpt}")
    try:
        payload = json.loads(lines[-1])
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"final stdout line is not JSON ({exc}): {lines[-1]!r}") from None
    if not isinstance(payload, dict) or "accuracy" not in payload:
        raise EvaluationError(f"final stdout line lacks an accuracy field: {lines[-1]!r}")
    accuracy = payload["accuracy"]
    if not isinstance(accuracy, (int, float)) or isinstance(accuracy, bool) or not math.isfinite(accuracy):
        raise EvaluationError(f"accuracy is not a finite number: {accuracy!r}")
    if not 0.0 <= accuracy <= 1.0:
        raise EvaluationError(f"accuracy {accuracy} outside [0, 1]")
    return float(accuracy)


def _run_loop(
    objective: ObjectiveSpec,
    space: SearchSpace,
    budget: Budget,
    ledger: Ledger,
    model_id: str,
    task: Task,
    source: str,
    propose,
    rng: np.random.Generator,
    timeout: float,
) -> TrialRecord:
    noise_rng = np.random.default_rng(objective.seed) if isinstance(objective, SyntheticValley) else None
    history: list[tuple[HyperparameterSet, float]] = []
    run_records: list[TrialRecord] = []
    failures: list[str] = []
    for trial_index in range(budget.n_trials):
        params = propose(history, rng)
        try:
            accuracy = evaluate(objective, params, budget.epochs, rng=noise_rng, timeout=timeout)
        except EvaluationError as exc:
            failures.append(f"trial {trial_index}: {exc}")
            logger.warning("trial %d failed: %s", trial_index, exc)
            continue
        record = TrialRecord(
            uid=new_uid(),
            model_id=model_id,
            task=task,
            epochs=budget.epochs,
            params=params,
            accuracy=accuracy,
            source=source,
            created_at=datetime.now(timezone.utc),
        )
        ledger.append(record)
        run_records.append(record)
        history.append((params, accuracy))
    if not run_records:
        raise RunError(f"all {budget.n_trials} trials failed: " + "; ".join(failures[:5]))
    return best_trial(run_records)


def tune(
    objective: ObjectiveSpec,
    space: SearchSpace,
    tpe_config: TpeConfig,
    budget: Budget,
    ledger: Ledger,
    model_id: str,
    task: Task = Task.IMAGE_CLASSIFICATION,
    timeout: float = DEFAULT_EVAL_TIMEOUT,
) -> TrialRecord:
    """Sequential TPE loop: suggest from this run's history, evaluate,
    append with source ``tpe``; returns the run's best record.

    Failed evaluations are logged and skipped, never written to the ledger,
    so downstream statistics see only observed accuracies.
    """
    rng = np.random.default_rng(tpe_config.seed)
    return _run_loop(
        objective,
        space,
        budget,
        ledger,
        model_id,
        task,
        source="tpe",
        propose=lambda history, r: suggest(history, space, tpe_config, r),
        rng=rng,
        timeout=timeout,
    )


def random_search(
    objective: ObjectiveSpec,
    space: SearchSpace,
    budget: Budget,
    seed: int,
    ledger: Ledger,
    model_id: str,
    task: Task = Task.IMAGE_CLASSIFICATION,
    timeout: float = DEFAULT_EVAL_TIMEOUT,
) -> TrialRecord:
    """Control baseline: the same loop with uniform sampling, source ``random``."""
    rng = np.random.default_rng(seed)
    return _run_loop(
        objective,
        space,
        budget,
        ledger,
        model_id,
        task,
        source="random",
        propose=lambda history, r: sample_uniform(space, r),
        rng=rng,
        timeout=timeout,
    )
