"""Label balancing and instruction-record export.

balance_labels downsamples each 1-5 label class to a common target so the
training mix is uniform across quality levels; export_instruction_records
turns pseudo captions into (video, user turn, assistant turn) triples in
the evaluator dialogue format.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .prompts import EVALUATOR_USER, render
from .records import PseudoCaption

LABELS = (1, 2, 3, 4, 5)


class ExportError(ValueError):
    pass


@dataclass
class BalanceConfig:
    """per_label_target absent means: use the smallest nonempty class count."""

    per_label_target: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.per_label_target is not None and self.per_label_target < 1:
            raise ValueError("per_label_target must be >= 1 when present")


@dataclass
class BalanceReport:
    """Class counts before/after plus which classes came up short."""

    target: int
    before: dict[int, int] = field(default_factory=dict)
    after: dict[int, int] = field(default_factory=dict)
    underfull: list[int] = field(default_factory=list)


@dataclass
class InstructionRecord:
    video_ref: str
    user_text: str
    assistant_text: str

    @classmethod
    def from_json(cls, obj: dict) -> "InstructionRecord":
        return cls(
            video_ref=str(obj["video_ref"]),
            user_text=str(obj["user_text"]),
            assistant_text=str(obj["assistant_text"]),
        )

    def to_json(self) -> dict:
        return {
            "video_ref": self.video_ref,
            "user_text": self.user_text,
            "assistant_text": self.assistant_text,
        }

    def validate(self) -> None:
        if not self.user_text or not self.assistant_text:
            raise ExportError("instruction record with empty turn")


def label_histogram(records) -> dict[int, int]:
    counts = {label: 0 for label in LABELS}
    for record in records:
        counts[record.label] = counts.get(record.label, 0) + 1
    return counts


def balance_labels(
    records: list[PseudoCaption], config: BalanceConfig
) -> tuple[list[PseudoCaption], BalanceReport]:
    """Downsample each label class uniformly at random (seeded) to the target.

    Classes below the target are kept whole and flagged in the report rather
    than failing the run. Output preserves the input's relative order.
    """
    config.validate()
    before = label_histogram(records)
    nonempty = [count for count in before.values() if count > 0]
    if not nonempty:
        raise ValueError("no records to balance")
    target = config.per_label_target if config.per_label_target is not None else min(nonempty)

    by_label: dict[int, list[int]] = {label: [] for label in LABELS}
    for index, record in enumerate(records):
        by_label[record.label].append(index)

    keep: list[int] = []
    report = BalanceReport(target=target, before=before)
    for label in LABELS:
        indices = by_label[label]
        if len(indices) < target:
            report.underfull.append(label)
        if len(indices) > target:
            digest = hashlib.sha256(f"{config.seed}:{label}".encode("utf-8")).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            indices = list(indices)
            rng.shuffle(indices)
            indices = indices[:target]
        keep.extend(indices)

    keep.sort()
    selected = [records[i] for i in keep]
    report.after = label_histogram(selected)
    return selected, report


def export_instruction_records(
    records: list[PseudoCaption],
    video_index: dict[str, str],
    include_explanations: bool = True,
) -> list[InstructionRecord]:
    """Evaluator-format dialogue triples, one per pseudo caption, input order."""
    out: list[InstructionRecord] = []
    for record in records:
        if record.parent_id not in video_index:
            raise ExportError(f"no video for parent_id {record.parent_id!r}")
        user_text = render(EVALUATOR_USER, caption=record.text)
        if include_explanations:
            assistant_text = f"{record.label}\n\n{record.explanation}"
        else:
            assistant_text = f"{record.label}"
        out.append(
            InstructionRecord(
                video_ref=video_index[record.parent_id],
                user_text=user_text,
                assistant_text=assistant_text,
            )
        )
    return out
