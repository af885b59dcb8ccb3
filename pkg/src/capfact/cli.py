"""Command-line entry point.

Subcommands:
  corrupt    caption file -> corrupted pseudo-caption file + skip report
  balance    downsample a pseudo-caption file to uniform label counts
  export-it  pseudo captions -> instruction-tuning dialogue records
  eval       correlate any scorer with human ratings (or check stability)
  judge      rate predicted explanations against ground truth via a chat model

Exit codes: 0 success (warnings allowed), 1 data or partial failure,
2 usage/config error. A YAML config file can supply any gateway, pipeline,
or balance setting; command-line flags override the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import yaml

from .builder import (
    BalanceConfig,
    ExportError,
    balance_labels,
    export_instruction_records,
    label_histogram,
)
from .gateway import GatewayConfig, GatewayError, gateway_from_config
from .harness import (
    ExplanationCase,
    HarnessError,
    ScorerAdapter,
    correlation_eval,
    judge_explanations,
    render_report,
    score_dataset,
    stability_check,
)
from .metrics import MetricDomainError, UndefinedCorrelationError
from .pipeline import CORRUPTION_MODES, PipelineConfig, PipelineError, run
from .prompts import PromptError
from .records import RecordError, RecordParseError, load_records, save_records

LABELS = (1, 2, 3, 4, 5)

log = logging.getLogger("capfact")


class UsageError(Exception):
    """Bad flags/config; maps to exit code 2."""


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as stream:
            data = yaml.safe_load(stream) or {}
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"config file is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must be a mapping")
    return data


def _section(config: dict, name: str) -> dict:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section {name!r} must be a mapping")
    return section


def _pick(flag_value, section: dict, key: str, default):
    if flag_value is not None:
        return flag_value
    return section.get(key, default)


def _require_input(path: str) -> None:
    if not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")


def _require_distinct(*paths) -> None:
    seen: dict[str, str] = {}
    for path in paths:
        if path is None:
            continue
        resolved = os.path.abspath(path)
        if resolved in seen:
            raise UsageError(f"paths must be distinct: {path}")
        seen[resolved] = path


def _gateway_config(args, config: dict) -> GatewayConfig:
    section = _section(config, "gateway")
    gateway_config = GatewayConfig(
        endpoint_url=_pick(args.endpoint, section, "endpoint_url", ""),
        model=_pick(args.model, section, "model", GatewayConfig.model),
        api_key_source=_pick(
            args.api_key_source, section, "api_key_source", GatewayConfig.api_key_source
        ),
        retries=int(_pick(args.retries, section, "retries", GatewayConfig.retries)),
        backoff=float(_pick(args.backoff, section, "backoff", GatewayConfig.backoff)),
        timeout=float(
            _pick(args.gateway_timeout, section, "timeout", GatewayConfig.timeout)
        ),
        stub_fixture=_pick(args.stub, section, "stub_fixture", None),
    )
    return gateway_config


def _build_gateway(args, config: dict):
    gateway_config = _gateway_config(args, config)
    if not gateway_config.endpoint_url and not gateway_config.stub_fixture:
        raise UsageError("need --endpoint or --stub (or the same via config file)")
    try:
        return gateway_from_config(gateway_config)
    except (GatewayError, OSError) as exc:
        raise UsageError(str(exc)) from None


def _add_gateway_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("gateway")
    group.add_argument("--stub", metavar="FIXTURE", help="replay responses from this fixture file instead of calling an endpoint")
    group.add_argument("--endpoint", metavar="URL", help="chat-completions endpoint URL")
    group.add_argument("--model", help="model name sent with each request")
    group.add_argument("--api-key-source", metavar="ENV_VAR", help="environment variable holding the API key (default VCF_API_KEY)")
    group.add_argument("--retries", type=int, help="transient-failure retries (default 3)")
    group.add_argument("--backoff", type=float, help="base backoff seconds between retries (default 0.5)")
    group.add_argument("--gateway-timeout", type=float, help="per-request timeout seconds (default 60)")


def _print_histogram(counts: dict[int, int], title: str, stream) -> None:
    print(title, file=stream)
    for label in LABELS:
        print(f"  label {label}: {counts.get(label, 0)}", file=stream)


def cmd_corrupt(args) -> int:
    config = _load_config_file(args.config)
    _require_input(args.input)
    skip_report = args.skip_report or args.output + ".skips.jsonl"
    _require_distinct(args.input, args.output, skip_report)

    section = _section(config, "pipeline")
    pipeline_config = PipelineConfig(
        per_caption_count=int(
            _pick(args.per_caption, section, "per_caption_count", PipelineConfig.per_caption_count)
        ),
        corruption_mode=_pick(args.mode, section, "corruption_mode", PipelineConfig.corruption_mode),
        seed=int(_pick(args.seed, section, "seed", PipelineConfig.seed)),
        min_elements=int(
            _pick(args.min_elements, section, "min_elements", PipelineConfig.min_elements)
        ),
    )
    try:
        pipeline_config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gateway = _build_gateway(args, config)

    records = load_records(args.input, "caption")
    result = run(records, pipeline_config, gateway, jobs=args.jobs)
    save_records(result.pseudos, args.output)

    with open(skip_report, "w", encoding="utf-8", newline="\n") as stream:
        for record_id, reason in result.skips:
            stream.write(json.dumps({"id": record_id, "reason": reason}, ensure_ascii=False) + "\n")
        for record_id, message in result.failures:
            stream.write(
                json.dumps({"id": record_id, "reason": f"failed: {message}"}, ensure_ascii=False) + "\n"
            )

    _print_histogram(label_histogram(result.pseudos), "labels", sys.stdout)
    print(f"records in: {len(records)}  pseudo captions out: {len(result.pseudos)}")
    if result.skips:
        print(f"skipped {len(result.skips)} records (see {skip_report})", file=sys.stderr)
    if result.failures:
        ids = {record_id for record_id, _ in result.failures}
        print(
            f"warning: {len(result.failures)} failed attempts across {len(ids)} records "
            f"(see {skip_report})",
            file=sys.stderr,
        )
    return 0


def cmd_balance(args) -> int:
    config = _load_config_file(args.config)
    _require_input(args.input)
    _require_distinct(args.input, args.output)
    records = load_records(args.input, "pseudo")
    if not records:
        raise UsageError("input file has no records")

    section = _section(config, "balance")
    balance_config = BalanceConfig(
        per_label_target=_pick(args.target, section, "per_label_target", None),
        seed=int(_pick(args.seed, section, "seed", 0)),
    )
    try:
        balance_config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    selected, report = balance_labels(records, balance_config)
    save_records(selected, args.output)
    _print_histogram(report.before, "labels before", sys.stdout)
    _print_histogram(report.after, "labels after", sys.stdout)
    print(f"target per label: {report.target}  kept: {len(selected)}")
    for label in report.underfull:
        print(
            f"warning: label {label} has only {report.before.get(label, 0)} records "
            f"(target {report.target})",
            file=sys.stderr,
        )
    return 0


def cmd_export_it(args) -> int:
    _load_config_file(args.config)
    _require_input(args.input)
    _require_input(args.captions)
    _require_distinct(args.input, args.captions, args.output)
    pseudos = load_records(args.input, "pseudo")
    captions = load_records(args.captions, "caption")
    video_index = {record.id: record.video_ref for record in captions}

    missing = sorted({p.parent_id for p in pseudos} - set(video_index))
    if missing:
        shown = ", ".join(missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        print(f"error: no caption record for parent ids: {shown}{more}", file=sys.stderr)
        return 1

    out = export_instruction_records(
        pseudos, video_index, include_explanations=not args.no_explanations
    )
    save_records(out, args.output)
    print(f"wrote {len(out)} instruction records")
    return 0


def cmd_eval(args) -> int:
    config = _load_config_file(args.config)
    _require_input(args.input)
    data = load_records(args.input, "rated")

    chosen = [
        kind
        for kind, value in (
            ("precomputed_file", args.scores),
            ("external_command", args.command),
            ("chat_api", bool(args.chat)),
        )
        if value
    ]
    if len(chosen) != 1:
        raise UsageError("choose exactly one of --scores, --command, --chat")
    kind = chosen[0]

    gateway = None
    if kind == "precomputed_file":
        _require_input(args.scores)
        locator = args.scores
    elif kind == "external_command":
        locator = args.command
    else:
        gateway = _build_gateway(args, config)
        gateway_config = _gateway_config(args, config)
        locator = gateway_config.stub_fixture or gateway_config.endpoint_url
    adapter = ScorerAdapter(kind=kind, locator=locator, timeout=args.timeout)
    try:
        adapter.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    if args.stability:
        r = stability_check(data, adapter, gateway=gateway, jobs=args.jobs)
        print(f"pearson {r:.4f}")
        return 0

    result = score_dataset(
        data, adapter, gateway=gateway, journal_path=args.journal, jobs=args.jobs
    )
    report = correlation_eval(result.records, aggregation=args.aggregation)
    print(render_report(report, fmt=args.format))
    if result.failures:
        print(f"warning: {len(result.failures)} records failed scoring", file=sys.stderr)
    return 0


def _load_judge_cases(path: str) -> list[ExplanationCase]:
    cases: list[ExplanationCase] = []
    with open(path, "r", encoding="utf-8") as stream:
        for line_no, line in enumerate(stream, start=1):
            if not line.strip():
                raise RecordParseError("blank line", line_no)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordParseError(f"invalid JSON: {exc.msg}", line_no) from None
            case = ExplanationCase(
                context=str(obj.get("context", "")),
                caption=str(obj.get("caption", "")),
                gt_explanation=str(obj.get("gt_explanation", "")),
                pred_explanation=str(obj.get("pred_explanation", "")),
                id=str(obj.get("id", f"case-{line_no}")),
            )
            try:
                case.validate()
            except ValueError as exc:
                raise RecordParseError(str(exc), line_no) from None
            cases.append(case)
    return cases


def cmd_judge(args) -> int:
    config = _load_config_file(args.config)
    _require_input(args.input)
    _require_distinct(args.input, args.output)
    cases = _load_judge_cases(args.input)
    if not cases:
        raise UsageError("input file has no cases")
    gateway = _build_gateway(args, config)

    summary = judge_explanations(cases, gateway)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as stream:
            for result in summary.results:
                stream.write(json.dumps(result.to_json(), ensure_ascii=False) + "\n")
    if summary.mean_relative is None:
        print("mean_relative n/a")
    else:
        print(f"mean_relative {summary.mean_relative:.2f}")
    print(f"judged {len(summary.results)}  excluded {summary.excluded}")
    if summary.excluded:
        print(f"warning: {summary.excluded} cases excluded after retries", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capfact",
        description="Corrupt video captions into scored training data and "
        "evaluate caption-quality scorers against human ratings.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="YAML", help="config file; flags override its values")
    common.add_argument(
        "--log-level",
        choices=("debug", "info", "warning", "error"),
        default="warning",
        help="logging verbosity (default warning)",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", parents=[common], help="generate corrupted pseudo captions")
    p.add_argument("--input", required=True, help="caption records, one JSON object per line")
    p.add_argument("--output", required=True, help="where to write pseudo captions")
    p.add_argument("--skip-report", help="where to write skipped/failed record reasons (default OUTPUT.skips.jsonl)")
    p.add_argument("--seed", type=int, help="run seed (default 0)")
    p.add_argument("--mode", choices=CORRUPTION_MODES, help="which element kinds to corrupt (default both)")
    p.add_argument("--per-caption", type=int, metavar="N", help="pseudo captions per source caption (default 10)")
    p.add_argument("--min-elements", type=int, help="skip records with fewer extracted elements (default 1)")
    p.add_argument("--jobs", type=int, default=1, help="parallel records in flight (default 1)")
    _add_gateway_flags(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("balance", parents=[common], help="downsample to uniform label counts")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--target", type=int, help="records per label (default: smallest nonempty class)")
    p.add_argument("--seed", type=int, help="sampling seed (default 0)")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("export-it", parents=[common], help="write instruction-tuning dialogue records")
    p.add_argument("--input", required=True, help="pseudo-caption file")
    p.add_argument("--captions", required=True, help="source caption file (supplies video refs)")
    p.add_argument("--output", required=True)
    p.add_argument("--no-explanations", action="store_true", help="assistant turn carries the label only")
    p.set_defaults(func=cmd_export_it)

    p = sub.add_parser("eval", parents=[common], help="correlate a scorer with human ratings")
    p.add_argument("--input", required=True, help="rated candidates, one JSON object per line")
    p.add_argument("--scores", metavar="FILE", help="precomputed scores: lines of {id, score, explanation?}")
    p.add_argument("--command", metavar="CMD", help="scorer subprocess: JSON lines in, one reply per line out")
    p.add_argument("--chat", action="store_true", help="score through the chat gateway (needs --endpoint or --stub)")
    p.add_argument("--stability", action="store_true", help="score twice and report Pearson r between runs")
    p.add_argument("--journal", metavar="FILE", help="append-only journal; reruns skip ids already scored")
    p.add_argument("--aggregation", default="mean", help="human-rating aggregation (default mean)")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--timeout", type=float, default=120.0, help="scorer timeout seconds (default 120)")
    p.add_argument("--jobs", type=int, default=1, help="parallel scorer calls (default 1)")
    _add_gateway_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("judge", parents=[common], help="rate predicted explanations against ground truth")
    p.add_argument("--input", required=True, help="cases: {id?, context, caption, gt_explanation, pred_explanation} per line")
    p.add_argument("--output", help="per-case results file")
    _add_gateway_flags(p)
    p.set_defaults(func=cmd_judge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level.upper()))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        RecordError,
        ExportError,
        PipelineError,
        HarnessError,
        GatewayError,
        PromptError,
        MetricDomainError,
        UndefinedCorrelationError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
