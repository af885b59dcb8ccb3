"""Evaluation harness: drive a scorer over rated captions and report correlations.

A scorer is anything that maps (video_ref, candidate caption) to a quality
score, reached through one of three adapters:

  precomputed_file  JSONL of {id, score, explanation?}; must cover every id
  external_command  one JSON object per line on stdin, one raw evaluator
                    reply per line on stdout, order-preserving
  chat_api          the evaluator prompt sent per record over a chat gateway
                    at temperature 0.0, media refs forwarded opaquely

Scores join each record's aggregated human rating; Kendall tau_b and
Spearman rho (x100) make up the report. A journal file (JSONL, append-only)
lets interrupted chat/command runs resume by record id.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .gateway import ChatRequest, GatewayError
from .metrics import (
    aggregate_human_ratings,
    kendall_tau_b,
    pearson_r,
    spearman_rho,
)
from .prompts import EVALUATOR_USER, JUDGE, render
from .records import CorrelationReport, RatedCandidate, ScorerOutput

ADAPTER_KINDS = ("precomputed_file", "external_command", "chat_api")


class HarnessError(RuntimeError):
    pass


class AdapterError(HarnessError):
    """The scorer process/endpoint misbehaved (exit code, timeout, line count)."""


class CoverageError(HarnessError):
    """A precomputed score file lacks entries for some dataset ids."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        shown = ", ".join(self.missing[:10])
        more = "" if len(self.missing) <= 10 else f" (+{len(self.missing) - 10} more)"
        super().__init__(f"no scores for ids: {shown}{more}")


class InsufficientDataError(HarnessError):
    pass


class FormatError(ValueError):
    """A scorer reply violated the numeric-first-line output contract."""

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(f"{message}; reply was: {raw[:200]!r}")


@dataclass
class ScorerAdapter:
    kind: str
    locator: str
    timeout: float = 120.0

    def validate(self) -> None:
        if self.kind not in ADAPTER_KINDS:
            raise ValueError(f"adapter kind must be one of {ADAPTER_KINDS}")
        if not self.locator:
            raise ValueError("adapter locator is empty")


@dataclass
class EvaluatorOutput:
    score: int | float
    explanation: str | None = None


def parse_evaluator_output(raw: str) -> EvaluatorOutput:
    """Split a scorer reply into (score, explanation).

    The first line must be a bare number; remaining non-blank lines form the
    explanation. Works for both the 1-5 evaluator scale and the 1-10 judge
    scale, so range checks stay with the caller.
    """
    lines = raw.strip().splitlines()
    if not lines:
        raise FormatError("empty reply", raw)
    first = lines[0].strip()
    score: int | float
    try:
        score = int(first)
    except ValueError:
        try:
            score = float(first)
        except ValueError:
            raise FormatError(f"first line is not a number: {first!r}", raw) from None
    rest = [line for line in lines[1:] if line.strip()]
    return EvaluatorOutput(score=score, explanation="\n".join(rest) if rest else None)


@dataclass
class ScoreResult:
    records: list[RatedCandidate]
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def scored(self) -> list[RatedCandidate]:
        return [r for r in self.records if r.scorer_output is not None]


def _load_journal(path) -> dict[str, EvaluatorOutput]:
    entries: dict[str, EvaluatorOutput] = {}
    try:
        stream = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        return entries
    with stream:
        for line in stream:
            if not line.strip():
                continue
            obj = json.loads(line)
            entries[obj["id"]] = EvaluatorOutput(
                score=obj["score"], explanation=obj.get("explanation")
            )
    return entries


class _JournalWriter:
    """Append-only, single-writer journal of successful scores."""

    def __init__(self, path):
        self._stream = open(path, "a", encoding="utf-8", newline="\n")
        self._lock = threading.Lock()

    def append(self, record_id: str, output: EvaluatorOutput) -> None:
        entry: dict = {"id": record_id, "score": output.score}
        if output.explanation is not None:
            entry["explanation"] = output.explanation
        with self._lock:
            self._stream.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._stream.flush()

    def close(self) -> None:
        self._stream.close()


def _load_precomputed(path) -> dict[str, EvaluatorOutput]:
    table: dict[str, EvaluatorOutput] = {}
    with open(path, "r", encoding="utf-8") as stream:
        for line_no, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"score file line {line_no}: invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict) or "id" not in obj or "score" not in obj:
                raise AdapterError(f"score file line {line_no}: needs id and score")
            table[str(obj["id"])] = EvaluatorOutput(
                score=obj["score"], explanation=obj.get("explanation")
            )
    return table


def _interpret_reply_line(line: str) -> EvaluatorOutput:
    """A stdout line is JSON (string reply, bare number, or {score,...}) or raw text."""
    stripped = line.strip()
    try:
        value = json.loads(stripped)
    except json.JSONDecodeError:
        return parse_evaluator_output(stripped)
    if isinstance(value, str):
        return parse_evaluator_output(value)
    if isinstance(value, bool):
        raise FormatError("boolean is not a score", line)
    if isinstance(value, (int, float)):
        return EvaluatorOutput(score=value)
    if isinstance(value, dict) and "score" in value:
        explanation = value.get("explanation")
        if explanation is not None:
            explanation = str(explanation)
        return EvaluatorOutput(score=value["score"], explanation=explanation)
    raise FormatError("cannot interpret scorer line", line)


def _run_command(adapter: ScorerAdapter, records: list[RatedCandidate]) -> list[str]:
    stdin_text = "".join(
        json.dumps(
            {
                "id": r.id,
                "video_ref": r.video_ref,
                "candidate": r.candidate,
                "references": r.references,
            },
            ensure_ascii=False,
        )
        + "\n"
        for r in records
    )
    try:
        proc = subprocess.run(
            shlex.split(adapter.locator),
            input=stdin_text,
            capture_output=True,
            text=True,
            timeout=adapter.timeout,
        )
    except subprocess.TimeoutExpired:
        raise AdapterError(f"scorer command timed out after {adapter.timeout}s") from None
    except OSError as exc:
        raise AdapterError(f"cannot run scorer command: {exc}") from None
    if proc.returncode != 0:
        raise AdapterError(
            f"scorer command exited {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    lines = proc.stdout.splitlines()
    if len(lines) != len(records):
        raise AdapterError(
            f"scorer wrote {len(lines)} lines for {len(records)} records"
        )
    return lines


def _chat_score(gateway, record: RatedCandidate) -> EvaluatorOutput:
    prompt = render(EVALUATOR_USER, caption=record.candidate)
    request = ChatRequest(
        model=gateway.model,
        messages=[{"role": "user", "content": prompt}],
        temperature=0.0,
        media=[record.video_ref],
    )
    return parse_evaluator_output(gateway.complete(request))


def score_dataset(
    data: list[RatedCandidate],
    adapter: ScorerAdapter,
    gateway=None,
    journal_path=None,
    jobs: int = 1,
) -> ScoreResult:
    """Fill scorer_output on every record the adapter can score.

    Per-record scorer failures are recorded and the record is left unscored;
    only whole-adapter problems (coverage gaps, broken subprocess) raise.
    """
    adapter.validate()
    journal = _load_journal(journal_path) if journal_path else {}
    outputs: dict[str, EvaluatorOutput] = {
        r.id: journal[r.id] for r in data if r.id in journal
    }
    failures: dict[str, str] = {}
    pending = [r for r in data if r.id not in outputs]
    writer = _JournalWriter(journal_path) if journal_path else None

    def record_success(record_id: str, output: EvaluatorOutput) -> None:
        outputs[record_id] = output
        if writer is not None:
            writer.append(record_id, output)

    try:
        if adapter.kind == "precomputed_file":
            table = _load_precomputed(adapter.locator)
            missing = [r.id for r in pending if r.id not in table]
            if missing:
                raise CoverageError(missing)
            for r in pending:
                record_success(r.id, table[r.id])
        elif adapter.kind == "external_command":
            lines = _run_command(adapter, pending)
            for r, line in zip(pending, lines):
                try:
                    record_success(r.id, _interpret_reply_line(line))
                except FormatError as exc:
                    failures[r.id] = str(exc)
        elif adapter.kind == "chat_api":
            if gateway is None:
                from .gateway import GatewayConfig, HttpGateway

                gateway = HttpGateway(GatewayConfig(endpoint_url=adapter.locator))

            def one(record: RatedCandidate):
                try:
                    return record.id, _chat_score(gateway, record), None
                except (GatewayError, FormatError) as exc:
                    return record.id, None, str(exc)

            if jobs > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    results = list(pool.map(one, pending))
            else:
                results = [one(r) for r in pending]
            for record_id, output, error in results:
                if error is None:
                    record_success(record_id, output)
                else:
                    failures[record_id] = error
    finally:
        if writer is not None:
            writer.close()

    scored_records = [
        replace(
            r,
            scorer_output=ScorerOutput(
                score=float(outputs[r.id].score),
                explanation=outputs[r.id].explanation,
            ),
        )
        if r.id in outputs
        else r
        for r in data
    ]
    return ScoreResult(records=scored_records, failures=failures)


def correlation_eval(
    data: list[RatedCandidate], aggregation: str = "mean"
) -> CorrelationReport:
    """Rank correlations (x100) between scorer outputs and aggregated human ratings."""
    scores: list[float] = []
    human: list[float] = []
    excluded = 0
    for record in data:
        if record.scorer_output is None:
            excluded += 1
            continue
        scores.append(record.scorer_output.score)
        human.append(aggregate_human_ratings(record.human_ratings, aggregation))
    if len(scores) < 2:
        raise InsufficientDataError(
            f"need at least 2 scored records, have {len(scores)} ({excluded} unscored)"
        )
    return CorrelationReport(
        tau_b=100.0 * kendall_tau_b(scores, human),
        rho=100.0 * spearman_rho(scores, human),
        pearson=100.0 * pearson_r(scores, human),
        n=len(scores),
        scaled_by_100=True,
        excluded=excluded,
        aggregation=aggregation,
    )


def stability_check(
    data: list[RatedCandidate], adapter: ScorerAdapter, gateway=None, jobs: int = 1
) -> float:
    """Score everything twice from scratch; Pearson r between the two runs."""
    first = score_dataset(data, adapter, gateway=gateway, jobs=jobs)
    second = score_dataset(data, adapter, gateway=gateway, jobs=jobs)
    by_id = {r.id: r.scorer_output.score for r in second.scored}
    pairs = [
        (r.scorer_output.score, by_id[r.id]) for r in first.scored if r.id in by_id
    ]
    if len(pairs) < 2:
        raise InsufficientDataError(f"only {len(pairs)} records scored in both runs")
    return pearson_r([p[0] for p in pairs], [p[1] for p in pairs])


@dataclass
class ExplanationCase:
    """One explanation to judge against its ground truth."""

    context: str
    caption: str
    gt_explanation: str
    pred_explanation: str
    id: str = ""

    def validate(self) -> None:
        for name in ("context", "caption", "gt_explanation", "pred_explanation"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} empty")


@dataclass
class JudgeResult:
    id: str
    gt_score: float
    pred_score: float
    relative: float

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "gt_score": self.gt_score,
            "pred_score": self.pred_score,
            "relative": self.relative,
        }


@dataclass
class JudgeSummary:
    results: list[JudgeResult]
    mean_relative: float | None
    excluded: int


def _judge_score(gateway, prompt: str) -> float:
    for _ in range(2):
        request = ChatRequest(
            model=gateway.model,
            messages=[{"role": "user", "content": prompt}],
            temperature=0.0,
        )
        try:
            output = parse_evaluator_output(gateway.complete(request))
        except FormatError:
            continue
        score = float(output.score)
        if 1.0 <= score <= 10.0:
            return score
    raise FormatError("no usable 1-10 judge score after retry", prompt[:80])


def judge_explanations(cases: list[ExplanationCase], gateway) -> JudgeSummary:
    """Rate each predicted explanation relative to its ground truth.

    Both the predicted and the ground-truth explanation are judged through
    the same rubric prompt (the ground truth also appears as the reference in
    both calls); relative = 100 * pred / gt.
    """
    results: list[JudgeResult] = []
    excluded = 0
    for case in cases:
        case.validate()

        def prompt_for(candidate_explanation: str) -> str:
            return render(
                JUDGE,
                ground_truth_caption=case.context,
                caption_to_evaluate=case.caption,
                ground_truth_explanation=case.gt_explanation,
                predicted_explanation=candidate_explanation,
            )

        try:
            pred_score = _judge_score(gateway, prompt_for(case.pred_explanation))
            gt_score = _judge_score(gateway, prompt_for(case.gt_explanation))
        except (GatewayError, FormatError):
            excluded += 1
            continue
        results.append(
            JudgeResult(
                id=case.id,
                gt_score=gt_score,
                pred_score=pred_score,
                relative=100.0 * pred_score / gt_score,
            )
        )
    if results:
        mean_relative = sum(r.relative for r in results) / len(results)
    else:
        mean_relative = None
    return JudgeSummary(results=results, mean_relative=mean_relative, excluded=excluded)


def render_report(report: CorrelationReport, fmt: str = "table") -> str:
    """Report text: a two-decimal tau_b/rho table or round-trippable JSON."""
    if fmt == "json":
        return json.dumps(report.to_json(), sort_keys=True)
    if fmt != "table":
        raise ValueError(f"format must be table or json, got {fmt!r}")
    scale = 1.0 if report.scaled_by_100 else 100.0
    lines = [
        "tau_b  rho  n",
        f"{report.tau_b * scale:.2f}  {report.rho * scale:.2f}  {report.n}",
    ]
    if report.excluded:
        lines.append(f"excluded  {report.excluded}")
    return "\n".join(lines)
