"""Caption-corruption pipeline.

For each source caption: extract its object/action mentions, sample how many
of each to corrupt (uniform over 0..count, endpoints inclusive), fetch a
same-category alternative for each sampled element, substitute, then derive
the quality score (1 - replaced/total), its 1-5 label, and a templated
explanation naming the now-wrong elements.

All randomness comes from one RNG stream per source record, keyed by
(run seed, record id), so output is independent of processing order and
of how records are batched across threads.
"""

from __future__ import annotations

import hashlib
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .gateway import ChatRequest, GatewayError
from .prompts import (
    EXTRACT_ACTIONS,
    EXTRACT_OBJECTS,
    SIMILAR_ACTION,
    SIMILAR_OBJECT,
    SUBSTITUTE,
    PromptError,
    negative_explanation,
    parse_string_list,
    positive_explanation,
    render,
)
from .records import CaptionRecord, FactualElements, PseudoCaption, ReplacementSet
from .scoring import quality_score, score_to_label

CORRUPTION_MODES = ("objects_only", "actions_only", "both")

# The corruption-side prompts want diversity across the per-caption variants;
# evaluator/judge calls elsewhere run at 0.0.
GEN_TEMPERATURE = 0.7


class PipelineError(RuntimeError):
    pass


class ExtractionError(PipelineError):
    pass


class DegenerateAlternativeError(PipelineError):
    """The model kept returning the original element as its own alternative."""


class SubstitutionError(PipelineError):
    pass


@dataclass
class PipelineConfig:
    per_caption_count: int = 10
    corruption_mode: str = "both"
    seed: int = 0
    min_elements: int = 1
    emit_explanations: bool = True

    def validate(self) -> None:
        if self.per_caption_count < 1:
            raise ValueError("per_caption_count must be >= 1")
        if self.corruption_mode not in CORRUPTION_MODES:
            raise ValueError(f"corruption_mode must be one of {CORRUPTION_MODES}")
        if self.min_elements < 1:
            raise ValueError("min_elements must be >= 1")


@dataclass
class RecordOutcome:
    """What happened to one source record: pseudo captions, a skip, or failures."""

    record_id: str
    pseudos: list[PseudoCaption] = field(default_factory=list)
    skip_reason: str | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return not self.pseudos and self.skip_reason is None and bool(self.failures)


@dataclass
class PipelineResult:
    pseudos: list[PseudoCaption]
    skips: list[tuple[str, str]]
    failures: list[tuple[str, str]]


def record_rng(seed: int, record_id: str) -> random.Random:
    """Independent RNG stream for one record, stable across orderings."""
    digest = hashlib.sha256(f"{seed}:{record_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _ask(gateway, prompt: str, parse=None, temperature: float = GEN_TEMPERATURE) -> str:
    request = ChatRequest(
        model=gateway.model,
        messages=[{"role": "user", "content": prompt}],
        temperature=temperature,
    )
    reply = gateway.complete(request)
    if parse is None:
        return reply
    try:
        return parse(reply)
    except PromptError:
        # one retry with the identical prompt before giving up
        reply = gateway.complete(request)
        return parse(reply)


def extract_elements(caption: str, gateway) -> FactualElements:
    """Ask for object and action mentions, keeping only ones found in the caption."""
    objects = _ask(gateway, render(EXTRACT_OBJECTS, caption=caption), parse=parse_string_list)
    actions = _ask(gateway, render(EXTRACT_ACTIONS, caption=caption), parse=parse_string_list)
    lowered = caption.lower()
    objects = [el for el in objects if el.lower() in lowered]
    actions = [el for el in actions if el.lower() in lowered]
    return FactualElements.from_raw(objects, actions)


def sample_replacement_targets(
    elements: FactualElements, mode: str, rng: random.Random
) -> tuple[list[str], list[str]]:
    """Pick which elements to corrupt: counts ~ Unif{0..M} and Unif{0..N}."""
    if mode not in CORRUPTION_MODES:
        raise ValueError(f"corruption_mode must be one of {CORRUPTION_MODES}")
    targets_obj: list[str] = []
    targets_act: list[str] = []
    if mode in ("both", "objects_only"):
        k = rng.randint(0, len(elements.objects))
        targets_obj = [elements.objects[i] for i in sorted(rng.sample(range(len(elements.objects)), k))]
    if mode in ("both", "actions_only"):
        l = rng.randint(0, len(elements.actions))
        targets_act = [elements.actions[i] for i in sorted(rng.sample(range(len(elements.actions)), l))]
    return targets_obj, targets_act


def _clean_single_reply(raw: str) -> str:
    for line in raw.splitlines():
        line = line.strip()
        while True:  # quotes and periods can nest either way round
            trimmed = line.strip("\"'").rstrip(".").strip()
            if trimmed == line:
                break
            line = trimmed
        if line:
            return line
    return ""


def generate_alternative(element: str, kind: str, gateway) -> str:
    """Get a same-category-but-different replacement for one element."""
    if kind == "object":
        prompt = render(SIMILAR_OBJECT, object=element)
    elif kind == "action":
        prompt = render(SIMILAR_ACTION, action=element)
    else:
        raise ValueError(f"kind must be object or action, got {kind!r}")
    for attempt in range(2):
        alternative = _clean_single_reply(_ask(gateway, prompt))
        if alternative and alternative.lower() != element.lower():
            return alternative
    raise DegenerateAlternativeError(f"no usable alternative for {element!r} (got {alternative!r})")


def _match_case(template: str, replacement: str) -> str:
    if template.isupper() and len(template) > 1:
        return replacement.upper()
    if template[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _replace_all(caption: str, swaps: ReplacementSet) -> str:
    """Deterministic substitution: case-insensitive whole-word replacement.

    The original is guaranteed (by the extraction filter) to occur as a
    substring, but not necessarily on word boundaries; if the whole-word
    pattern finds nothing we replace the first raw occurrence instead, so
    the output still differs whenever there is at least one swap.
    """
    text = caption
    for original, alternative in swaps.all_swaps():
        pattern = re.compile(rf"\b{re.escape(original)}\b", re.IGNORECASE)
        replaced = pattern.subn(lambda m: _match_case(m.group(0), alternative), text)
        if replaced[1] > 0:
            text = replaced[0]
            continue
        at = text.lower().find(original.lower())
        if at == -1:
            raise SubstitutionError(f"original not present in caption: {original!r}")
        found = text[at : at + len(original)]
        text = text[:at] + _match_case(found, alternative) + text[at + len(original) :]
    return text


def substitute(caption: str, swaps: ReplacementSet, gateway=None) -> str:
    """Rewrite the caption with each swap applied, one at a time.

    With a gateway, each swap goes through the substitution prompt and the
    reply must contain the new element; any gateway or format failure falls
    back to deterministic whole-word replacement of all swaps from scratch.
    """
    if swaps.size == 0:
        return caption
    if gateway is None:
        return _replace_all(caption, swaps)
    text = caption
    try:
        for original, alternative in swaps.all_swaps():
            prompt = render(
                SUBSTITUTE, old_obj_act=original, caption=text, new_obj_act=alternative
            )
            reply = _ask(gateway, prompt).strip()
            if not reply:
                raise SubstitutionError(f"empty substitution reply for {original!r}")
            if not re.search(rf"\b{re.escape(alternative)}\b", reply, re.IGNORECASE):
                raise SubstitutionError(f"substitution reply lost the alternative {alternative!r}")
            text = reply
        if text == caption:
            raise SubstitutionError("substitution left the caption unchanged")
        return text
    except (GatewayError, SubstitutionError):
        return _replace_all(caption, swaps)


def build_explanation(swaps: ReplacementSet) -> str:
    if swaps.size == 0:
        return positive_explanation()
    return negative_explanation(
        [original for original, _ in swaps.object_swaps],
        [original for original, _ in swaps.action_swaps],
    )


def _corrupt_once(
    record: CaptionRecord,
    elements: FactualElements,
    targets_obj: list[str],
    targets_act: list[str],
    gateway,
) -> PseudoCaption:
    object_swaps = [(el, generate_alternative(el, "object", gateway)) for el in targets_obj]
    action_swaps = [(el, generate_alternative(el, "action", gateway)) for el in targets_act]
    swaps = ReplacementSet(object_swaps=object_swaps, action_swaps=action_swaps)
    swaps.validate(elements)
    text = substitute(record.caption, swaps, gateway)
    score = quality_score(elements.total, swaps.size)
    pseudo = PseudoCaption(
        parent_id=record.id,
        text=text,
        replacements=swaps,
        n_elements=elements.total,
        raw_score=score,
        label=score_to_label(score),
        explanation=build_explanation(swaps),
    )
    pseudo.validate()
    return pseudo


def process_record(record: CaptionRecord, config: PipelineConfig, gateway) -> RecordOutcome:
    """Run the full corruption sequence for one record, capturing all failures."""
    outcome = RecordOutcome(record_id=record.id)
    try:
        elements = extract_elements(record.caption, gateway)
    except (GatewayError, PromptError) as exc:
        outcome.failures.append(f"extraction: {exc}")
        return outcome
    if elements.total < config.min_elements:
        if elements.total == 0:
            outcome.skip_reason = "no factual elements"
        else:
            outcome.skip_reason = (
                f"only {elements.total} factual elements (min {config.min_elements})"
            )
        return outcome

    rng = record_rng(config.seed, record.id)
    seen: set[tuple[tuple[str, ...], tuple[str, ...]]] = set()
    for attempt in range(config.per_caption_count):
        # resample a few times rather than emit a duplicate replacement set
        for _ in range(4):
            targets_obj, targets_act = sample_replacement_targets(
                elements, config.corruption_mode, rng
            )
            signature = (tuple(targets_obj), tuple(targets_act))
            if signature not in seen:
                break
        seen.add(signature)
        try:
            outcome.pseudos.append(
                _corrupt_once(record, elements, targets_obj, targets_act, gateway)
            )
        except (GatewayError, PipelineError) as exc:
            outcome.failures.append(f"attempt {attempt + 1}: {exc}")
    return outcome


def generate_pseudo_captions(
    record: CaptionRecord, config: PipelineConfig, gateway
) -> list[PseudoCaption]:
    """Corrupted variants for one record; empty when the record was skipped."""
    config.validate()
    outcome = process_record(record, config, gateway)
    if outcome.failed:
        raise PipelineError(f"record {record.id}: all attempts failed: {outcome.failures[-1]}")
    return outcome.pseudos


def run(records, config: PipelineConfig, gateway, jobs: int = 1) -> PipelineResult:
    """Corrupt a whole dataset; output is sorted by record id, independent of order."""
    config.validate()
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    outcomes: dict[str, RecordOutcome] = {}
    if jobs == 1:
        for record in records:
            outcomes[record.id] = process_record(record, config, gateway)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(process_record, record, config, gateway): record.id
                for record in records
            }
            for future, record_id in futures.items():
                outcomes[record_id] = future.result()

    pseudos: list[PseudoCaption] = []
    skips: list[tuple[str, str]] = []
    failures: list[tuple[str, str]] = []
    for record_id in sorted(outcomes):
        outcome = outcomes[record_id]
        pseudos.extend(outcome.pseudos)
        if outcome.skip_reason is not None:
            skips.append((record_id, outcome.skip_reason))
        for message in outcome.failures:
            failures.append((record_id, message))
    return PipelineResult(pseudos=pseudos, skips=skips, failures=failures)
