"""Domain records and line-delimited JSON dataset I/O.

Dataset files are UTF-8 JSON lines: one record per line, LF terminated,
lower_snake_case field names. Unknown fields found while parsing are kept
on the record and re-emitted on write, so foreign corpora survive a round
trip unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterator

from .scoring import score_to_label

SCHEMAS = ("caption", "rated", "pseudo")

_SCORE_TOLERANCE = 1e-12


class RecordError(ValueError):
    """Problem with a dataset line; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.message = message
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class RecordParseError(RecordError):
    pass


class RecordValidationError(RecordError):
    pass


def _fail(message: str) -> None:
    raise RecordValidationError(message)


def _require_str(obj: dict, key: str) -> str:
    if key not in obj:
        _fail(f"{key} missing")
    value = obj[key]
    if not isinstance(value, str):
        _fail(f"{key} must be a string")
    return value


def _require_number(obj: dict, key: str) -> float:
    if key not in obj:
        _fail(f"{key} missing")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{key} must be a number")
    return float(value)


def dedupe_ci(items: list[str]) -> list[str]:
    """Drop blank entries and case-insensitive duplicates, keeping first spellings."""
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        item = item.strip()
        if not item:
            continue
        key = item.lower()
        if key in seen:
            continue
        seen.add(key)
        out.append(item)
    return out


@dataclass
class CaptionRecord:
    """A ground-truth caption for one video; video_ref is opaque and never opened."""

    id: str
    video_ref: str
    caption: str
    extra: dict = field(default_factory=dict)

    _FIELDS = ("id", "video_ref", "caption")

    @classmethod
    def from_json(cls, obj: dict) -> "CaptionRecord":
        record = cls(
            id=_require_str(obj, "id"),
            video_ref=_require_str(obj, "video_ref"),
            caption=_require_str(obj, "caption"),
        )
        record.extra = {k: v for k, v in obj.items() if k not in cls._FIELDS}
        return record

    def to_json(self) -> dict:
        out = {"id": self.id, "video_ref": self.video_ref, "caption": self.caption}
        out.update(self.extra)
        return out

    def validate(self) -> None:
        if not self.id:
            _fail("id empty")
        if not self.caption.strip():
            _fail("caption empty")


@dataclass
class FactualElements:
    """The object and action mentions extracted from one caption."""

    objects: list[str] = field(default_factory=list)
    actions: list[str] = field(default_factory=list)

    @classmethod
    def from_raw(cls, objects: list[str], actions: list[str]) -> "FactualElements":
        return cls(objects=dedupe_ci(objects), actions=dedupe_ci(actions))

    @property
    def total(self) -> int:
        return len(self.objects) + len(self.actions)

    def validate(self) -> None:
        for name, values in (("objects", self.objects), ("actions", self.actions)):
            seen: set[str] = set()
            for value in values:
                if not value.strip():
                    _fail(f"{name} entry empty")
                key = value.strip().lower()
                if key in seen:
                    _fail(f"{name} entry duplicated: {value!r}")
                seen.add(key)


@dataclass
class ReplacementSet:
    """Which elements were swapped, as (original, alternative) pairs."""

    object_swaps: list[tuple[str, str]] = field(default_factory=list)
    action_swaps: list[tuple[str, str]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.object_swaps) + len(self.action_swaps)

    def all_swaps(self) -> list[tuple[str, str]]:
        return list(self.object_swaps) + list(self.action_swaps)

    @classmethod
    def from_json(cls, obj: dict) -> "ReplacementSet":
        def pairs(key: str) -> list[tuple[str, str]]:
            raw = obj.get(key, [])
            if not isinstance(raw, list):
                _fail(f"{key} must be a list")
            out = []
            for entry in raw:
                if isinstance(entry, dict):
                    out.append((str(entry.get("original", "")), str(entry.get("alternative", ""))))
                elif isinstance(entry, (list, tuple)) and len(entry) == 2:
                    out.append((str(entry[0]), str(entry[1])))
                else:
                    _fail(f"{key} entry must be an original/alternative pair")
            return out

        return cls(object_swaps=pairs("object_swaps"), action_swaps=pairs("action_swaps"))

    def to_json(self) -> dict:
        return {
            "object_swaps": [
                {"original": o, "alternative": a} for o, a in self.object_swaps
            ],
            "action_swaps": [
                {"original": o, "alternative": a} for o, a in self.action_swaps
            ],
        }

    def validate(self, elements: FactualElements | None = None) -> None:
        for name, swaps in (("object_swaps", self.object_swaps), ("action_swaps", self.action_swaps)):
            seen: set[str] = set()
            for original, alternative in swaps:
                if not original.strip() or not alternative.strip():
                    _fail(f"{name} entry has an empty side")
                key = original.lower()
                if key in seen:
                    _fail(f"{name} original duplicated: {original!r}")
                seen.add(key)
                if original.lower() == alternative.lower():
                    _fail(f"{name} alternative equals original: {original!r}")
        if elements is not None:
            for original, _ in self.object_swaps:
                if original not in elements.objects:
                    _fail(f"object swap original not among extracted objects: {original!r}")
            for original, _ in self.action_swaps:
                if original not in elements.actions:
                    _fail(f"action swap original not among extracted actions: {original!r}")


@dataclass
class PseudoCaption:
    """A corrupted caption with its replacements, score, label, and explanation.

    n_elements stores the total object+action count of the parent caption so
    the score can be re-derived and checked from the record alone.
    """

    parent_id: str
    text: str
    replacements: ReplacementSet
    n_elements: int
    raw_score: float
    label: int
    explanation: str
    extra: dict = field(default_factory=dict)

    _FIELDS = ("parent_id", "text", "replacements", "n_elements", "raw_score", "label", "explanation")

    @classmethod
    def from_json(cls, obj: dict) -> "PseudoCaption":
        if "replacements" not in obj or not isinstance(obj["replacements"], dict):
            _fail("replacements missing or not an object")
        label = obj.get("label")
        if isinstance(label, bool) or not isinstance(label, int):
            _fail("label must be an integer")
        n_elements = obj.get("n_elements")
        if isinstance(n_elements, bool) or not isinstance(n_elements, int):
            _fail("n_elements must be an integer")
        record = cls(
            parent_id=_require_str(obj, "parent_id"),
            text=_require_str(obj, "text"),
            replacements=ReplacementSet.from_json(obj["replacements"]),
            n_elements=n_elements,
            raw_score=_require_number(obj, "raw_score"),
            label=label,
            explanation=_require_str(obj, "explanation"),
        )
        record.extra = {k: v for k, v in obj.items() if k not in cls._FIELDS}
        return record

    def to_json(self) -> dict:
        out = {
            "parent_id": self.parent_id,
            "text": self.text,
            "replacements": self.replacements.to_json(),
            "n_elements": self.n_elements,
            "raw_score": self.raw_score,
            "label": self.label,
            "explanation": self.explanation,
        }
        out.update(self.extra)
        return out

    def validate(self) -> None:
        if not self.parent_id:
            _fail("parent_id empty")
        if not self.text.strip():
            _fail("text empty")
        if not self.explanation:
            _fail("explanation empty")
        self.replacements.validate()
        if self.n_elements < 1:
            _fail("n_elements must be >= 1")
        if self.replacements.size > self.n_elements:
            _fail("more replacements than elements")
        if not 0.0 <= self.raw_score <= 1.0:
            _fail(f"raw_score out of [0, 1]: {self.raw_score}")
        expected = 1.0 - self.replacements.size / self.n_elements
        if abs(self.raw_score - expected) > _SCORE_TOLERANCE:
            _fail(
                f"raw_score inconsistent: stored {self.raw_score}, "
                f"recomputed {expected} from {self.replacements.size}/{self.n_elements}"
            )
        if self.label != score_to_label(self.raw_score):
            _fail(f"label {self.label} does not match raw_score {self.raw_score}")


@dataclass
class ScorerOutput:
    """What a caption-quality scorer returned for one candidate."""

    score: float
    explanation: str | None = None

    @classmethod
    def from_json(cls, obj: dict) -> "ScorerOutput":
        score = _require_number(obj, "score")
        explanation = obj.get("explanation")
        if explanation is not None and not isinstance(explanation, str):
            _fail("scorer explanation must be a string")
        return cls(score=score, explanation=explanation)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"score": self.score}
        if self.explanation is not None:
            out["explanation"] = self.explanation
        return out

    def validate(self) -> None:
        if not math.isfinite(self.score):
            _fail("scorer score not finite")


@dataclass
class RatedCandidate:
    """A candidate caption with human ratings; the unit of harness input."""

    id: str
    video_ref: str
    candidate: str
    human_ratings: list[float]
    references: list[str] = field(default_factory=list)
    scorer_output: ScorerOutput | None = None
    extra: dict = field(default_factory=dict)

    _FIELDS = ("id", "video_ref", "candidate", "human_ratings", "references", "scorer_output")

    @classmethod
    def from_json(cls, obj: dict) -> "RatedCandidate":
        ratings = obj.get("human_ratings")
        if not isinstance(ratings, list):
            _fail("human_ratings missing or not a list")
        parsed_ratings = []
        for value in ratings:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                _fail("human_ratings entries must be numbers")
            parsed_ratings.append(float(value))
        references = obj.get("references", [])
        if not isinstance(references, list) or not all(isinstance(r, str) for r in references):
            _fail("references must be a list of strings")
        scorer_output = None
        if obj.get("scorer_output") is not None:
            if not isinstance(obj["scorer_output"], dict):
                _fail("scorer_output must be an object")
            scorer_output = ScorerOutput.from_json(obj["scorer_output"])
        record = cls(
            id=_require_str(obj, "id"),
            video_ref=_require_str(obj, "video_ref"),
            candidate=_require_str(obj, "candidate"),
            human_ratings=parsed_ratings,
            references=list(references),
            scorer_output=scorer_output,
        )
        record.extra = {k: v for k, v in obj.items() if k not in cls._FIELDS}
        return record

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "id": self.id,
            "video_ref": self.video_ref,
            "candidate": self.candidate,
            "human_ratings": self.human_ratings,
            "references": self.references,
        }
        if self.scorer_output is not None:
            out["scorer_output"] = self.scorer_output.to_json()
        out.update(self.extra)
        return out

    def validate(self) -> None:
        if not self.id:
            _fail("id empty")
        if not self.human_ratings:
            _fail("human_ratings empty")
        for value in self.human_ratings:
            if not math.isfinite(value):
                _fail("human rating not finite")
        if self.scorer_output is not None:
            self.scorer_output.validate()


@dataclass
class CorrelationReport:
    """Correlation statistics between a scorer and aggregated human ratings.

    Values are stored x100 (the usual table convention) when scaled_by_100
    is set, which is how the harness emits them.
    """

    tau_b: float
    rho: float
    n: int
    pearson: float | None = None
    scaled_by_100: bool = True
    excluded: int = 0
    aggregation: str = "mean"

    @classmethod
    def from_json(cls, obj: dict) -> "CorrelationReport":
        return cls(
            tau_b=float(obj["tau_b"]),
            rho=float(obj["rho"]),
            n=int(obj["n"]),
            pearson=None if obj.get("pearson") is None else float(obj["pearson"]),
            scaled_by_100=bool(obj.get("scaled_by_100", True)),
            excluded=int(obj.get("excluded", 0)),
            aggregation=str(obj.get("aggregation", "mean")),
        )

    def to_json(self) -> dict:
        return {
            "tau_b": self.tau_b,
            "rho": self.rho,
            "pearson": self.pearson,
            "n": self.n,
            "scaled_by_100": self.scaled_by_100,
            "excluded": self.excluded,
            "aggregation": self.aggregation,
        }


_SCHEMA_TYPES = {
    "caption": CaptionRecord,
    "rated": RatedCandidate,
    "pseudo": PseudoCaption,
}


def _as_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def iter_records(source, schema: str) -> Iterator:
    """Yield validated records from a JSONL source, or raise a positioned error."""
    if schema not in _SCHEMA_TYPES:
        raise ValueError(f"unknown schema {schema!r}; expected one of {SCHEMAS}")
    cls = _SCHEMA_TYPES[schema]
    seen_ids: set[str] = set()
    text = _as_text(source)
    # split strictly on LF: JSON strings may legally contain other Unicode
    # line separators (U+2028 etc.) that must not break records apart
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            raise RecordParseError("blank line", line_no)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise RecordParseError(f"invalid JSON: {exc.msg}", line_no) from None
        if not isinstance(obj, dict):
            raise RecordParseError("expected a JSON object", line_no)
        try:
            record = cls.from_json(obj)
            record.validate()
        except RecordValidationError as exc:
            raise RecordValidationError(exc.message, line_no) from None
        if schema == "caption":
            if record.id in seen_ids:
                raise RecordValidationError(f"id duplicated: {record.id!r}", line_no)
            seen_ids.add(record.id)
        yield record


def parse_records(source, schema: str) -> list:
    return list(iter_records(source, schema))


def write_records(records) -> str:
    """Serialize records to JSONL text; parse_records(write_records(r)) == r."""
    return "".join(json.dumps(r.to_json(), ensure_ascii=False) + "\n" for r in records)


def save_records(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as stream:
        stream.write(write_records(records))


def load_records(path, schema: str) -> list:
    with open(path, "rb") as stream:
        return parse_records(stream, schema)
