"""Command-line entry point.

One binary, six subcommands sharing the trial ledger:

* ``tune``            run the TPE loop (or random search) against an objective
* ``recommend``       ask an inference endpoint for a one-shot suggestion
* ``validate``        measure suggested configurations and fold them into the ledger
* ``evaluate``        grouped RMSE / confidence-interval report
* ``export-finetune`` write the ledger as instruction-tuning JSON-Lines
* ``classify``        screen raw model responses into the relevance taxonomy

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import finetune as finetune_mod
from . import llmclient, prompt, runner, stats
from .ledger import Ledger, LedgerError, TrialRecord
from .space import HyperparameterSet, default_search_space, validate as validate_params
from .tpe import TpeConfig, TpeError


class ConfigError(Exception):
    """A flag or configuration file value is unusable (exit code 2)."""


def _load_json(path: str, what: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{what} {path} must contain a JSON object")
    return data


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    config = _load_json(path, "config file")
    unknown = set(config) - {"tpe", "endpoint", "template"}
    if unknown:
        raise ConfigError(f"config file {path} has unknown sections {sorted(unknown)}")
    return config


def _tpe_config(config: dict, seed: int) -> TpeConfig:
    section = dict(config.get("tpe", {}))
    section["seed"] = seed
    try:
        return TpeConfig(**section)
    except (TypeError, TpeError) as exc:
        raise ConfigError(f"bad tpe config: {exc}") from None


def _template(config: dict) -> prompt.PromptTemplate:
    section = config.get("template")
    if not section:
        return prompt.PromptTemplate()
    try:
        return prompt.PromptTemplate(**section)
    except TypeError as exc:
        raise ConfigError(f"bad template override: {exc}") from None


def _objective(value: str) -> runner.ObjectiveSpec:
    if value == "synthetic":
        return runner.SyntheticValley()
    if value.startswith("cmd:"):
        parts = shlex.split(value[len("cmd:"):])
        if not parts:
            raise ConfigError("cmd: objective needs a program path")
        return runner.SubprocessObjective(command=parts[0], fixed_args=tuple(parts[1:]))
    raise ConfigError(f"objective must be 'synthetic' or 'cmd:PATH', got {value!r}")


def _load_or_new_ledger(path: str) -> Ledger:
    if Path(path).exists():
        return Ledger.load(path)
    return Ledger()


def _record_payload(record: TrialRecord) -> dict:
    # uid and created_at are run-unique by construction; the printed result
    # carries only the reproducible fields.
    return {
        "model_id": record.model_id,
        "task": record.task.value,
        "epochs": record.epochs,
        "learning_rate": record.params.learning_rate,
        "momentum": record.params.momentum,
        "batch_size": record.params.batch_size,
        "accuracy": record.accuracy,
        "source": record.source,
        "cycle": record.cycle,
    }


# --- subcommand handlers -----------------------------------------------------


def _cmd_tune(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    objective = _objective(args.objective)
    space = default_search_space()
    budget = runner.Budget(n_trials=args.trials, epochs=args.epochs)
    ledger = _load_or_new_ledger(args.ledger)
    model_id = args.model_id or (
        "synthetic" if isinstance(objective, runner.SyntheticValley) else Path(objective.command).stem
    )
    if args.sampler == "tpe":
        best = runner.tune(objective, space, _tpe_config(config, args.seed), budget, ledger, model_id)
    else:
        best = runner.random_search(objective, space, budget, args.seed, ledger, model_id)
    ledger.save(args.ledger)
    print(json.dumps(_record_payload(best)))
    return 0


def _cmd_recommend(args: argparse.Namespace) -> int:
    if not 0.0 < args.target_accuracy <= 1.0:
        raise ConfigError(f"--target-accuracy must lie in (0, 1], got {args.target_accuracy}")
    config = _load_config(args.config)
    endpoint_section = _load_json(args.endpoint_config, "endpoint config")
    try:
        endpoint = llmclient.EndpointConfig(**endpoint_section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad endpoint config: {exc}") from None
    template = _template(config)
    try:
        model_code = Path(args.model_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read model file {args.model_file}: {exc}") from None
    model_id = Path(args.model_file).stem

    for _ in range(args.repeat):
        rec = llmclient.recommend_one_shot(model_code, args.target_accuracy, endpoint, template)
        print(
            json.dumps(
                {
                    "learning_rate": rec.params.learning_rate,
                    "momentum": rec.params.momentum,
                    "batch_size": rec.params.batch_size,
                    "attempts": rec.attempts,
                    "endpoint_model": rec.endpoint_model,
                    "raw_response": rec.raw_response,
                }
            )
        )
        if args.out:
            line = json.dumps(
                {
                    "model_id": model_id,
                    "target_accuracy": args.target_accuracy,
                    "learning_rate": rec.params.learning_rate,
                    "momentum": rec.params.momentum,
                    "batch_size": rec.params.batch_size,
                }
            )
            with open(args.out, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    objective = _objective(args.objective)
    space = default_search_space()
    try:
        raw = Path(args.suggestions).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read suggestions file {args.suggestions}: {exc}") from None
    lines = [line for line in raw.splitlines() if line.strip()]
    if not lines:
        return 0

    ledger = _load_or_new_ledger(args.ledger)
    measured: list[finetune_mod.ValidatedSuggestion] = []
    failures = 0
    for i, line in enumerate(lines):
        try:
            obj = json.loads(line)
            params = HyperparameterSet(
                learning_rate=float(obj["learning_rate"]),
                momentum=float(obj["momentum"]),
                batch_size=int(obj["batch_size"]),
            )
            model_id = str(obj.get("model_id", "unknown"))
            target = obj.get("target_accuracy")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            print(f"rejected line {i}: {exc}", file=sys.stderr)
            failures += 1
            continue
        report = validate_params(params, space)
        if not report.valid:
            reasons = "; ".join(f"{v.dimension}: {v.message}" for v in report.violations)
            print(f"rejected line {i} ({model_id}): {reasons}", file=sys.stderr)
            failures += 1
            continue
        try:
            accuracy = runner.evaluate(objective, params, args.epochs)
        except runner.EvaluationError as exc:
            print(f"evaluation failed for line {i} ({model_id}): {exc}", file=sys.stderr)
            failures += 1
            continue
        target_txt = f"{float(target):.4f}" if isinstance(target, (int, float)) else "-"
        print(f"{model_id} epochs={args.epochs} target={target_txt} measured={accuracy:.4f}")
        measured.append((model_id, args.epochs, params, accuracy))

    if measured:
        finetune_mod.expand_cycle(ledger, measured, cycle=args.cycle, space=space)
        ledger.save(args.ledger)
        return 0
    return 1 if failures else 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        ledger = Ledger.load(args.ledger)
    except (OSError, LedgerError) as exc:
        print(f"cannot load ledger {args.ledger}: {exc}", file=sys.stderr)
        return 1
    group_by = tuple(f.strip() for f in args.group_by.split(",") if f.strip())
    try:
        rows = stats.aggregate_report(ledger, group_by=group_by, alpha=args.alpha)
    except stats.StatsError as exc:
        raise ConfigError(str(exc)) from None
    print(stats.format_report_table(rows))
    if args.csv:
        stats.write_report_csv(rows, args.csv)
    return 0


def _cmd_export_finetune(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    try:
        ledger = Ledger.load(args.ledger)
    except (OSError, LedgerError) as exc:
        print(f"cannot load ledger {args.ledger}: {exc}", file=sys.stderr)
        return 1
    codes_dir = Path(args.model_codes)
    lookup = {}
    for model_id in sorted({r.model_id for r in ledger.records}):
        code_path = codes_dir / f"{model_id}.txt"
        if not code_path.exists():
            raise ConfigError(f"missing model code file for {model_id!r}: {code_path}")
        lookup[model_id] = code_path.read_text(encoding="utf-8")
    count = finetune_mod.export_finetune_dataset(ledger, lookup, _template(config), args.out)
    print(count)
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    space = default_search_space()
    try:
        raw = Path(args.responses).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read responses file {args.responses}: {exc}", file=sys.stderr)
        return 1
    classes = []
    for i, line in enumerate(raw.splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            text = obj["text"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            print(f"bad response line {i}: {exc}", file=sys.stderr)
            return 1
        classes.append(prompt.classify_relevance(text, space))
    if not classes:
        print(f"no responses in {args.responses}", file=sys.stderr)
        return 1
    for klass in prompt.RelevanceClass:
        print(f"{klass.value}: {sum(1 for c in classes if c is klass)}")
    print(f"relevance_rate: {prompt.relevance_rate(classes):.4f}")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hptune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="run a tuning loop against an objective")
    p.add_argument("--objective", required=True, help="'synthetic' or 'cmd:PROGRAM [ARGS...]'")
    p.add_argument("--model-id", default=None, help="model identifier recorded in the ledger")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ledger", required=True, help="ledger JSON file (created if absent)")
    p.add_argument("--sampler", choices=("tpe", "random"), default="tpe")
    p.add_argument("--config", default=None, help="JSON config file (tpe/endpoint/template sections)")
    p.set_defaults(handler=_cmd_tune)

    p = sub.add_parser("recommend", help="one-shot suggestion from an inference endpoint")
    p.add_argument("--model-file", required=True, help="file with the model source to embed")
    p.add_argument("--target-accuracy", type=float, required=True)
    p.add_argument("--endpoint-config", required=True, help="JSON file with endpoint settings")
    p.add_argument("--out", default=None, help="append suggestions here for later 'validate'")
    p.add_argument("--repeat", type=int, default=1, help="number of independent recommendations")
    p.add_argument("--config", default=None)
    p.set_defaults(handler=_cmd_recommend)

    p = sub.add_parser("validate", help="measure suggestions and fold them into the ledger")
    p.add_argument("--suggestions", required=True, help="JSON-Lines file of suggested configurations")
    p.add_argument("--objective", required=True)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--ledger", required=True)
    p.add_argument("--cycle", type=int, required=True, help="feedback-cycle number to tag records with")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("evaluate", help="grouped RMSE / confidence-interval report")
    p.add_argument("--ledger", required=True)
    p.add_argument("--group-by", default="model,epochs,source")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--csv", default=None, help="also write the report as CSV")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("export-finetune", help="write the ledger as instruction-tuning JSONL")
    p.add_argument("--ledger", required=True)
    p.add_argument("--model-codes", required=True, help="directory of <model_id>.txt source files")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(handler=_cmd_export_finetune)

    p = sub.add_parser("classify", help="screen raw responses into the relevance taxonomy")
    p.add_argument("--responses", required=True, help="JSON-Lines file of {\"text\": ...} objects")
    p.set_defaults(handler=_cmd_classify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        llmclient.EndpointError,
        llmclient.MalformedResponseError,
        llmclient.RecommendationError,
        runner.EvaluationError,
        runner.RunError,
        LedgerError,
        finetune_mod.FinetuneError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
