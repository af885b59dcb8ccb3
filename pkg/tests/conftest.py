"""Shared fixtures: stub-gateway fixture builder and synthetic corpora."""

from __future__ import annotations

import json

import pytest

from capfact.gateway import StubGateway, user_request_key
from capfact.prompts import (
    EXTRACT_ACTIONS,
    EXTRACT_OBJECTS,
    SIMILAR_ACTION,
    SIMILAR_OBJECT,
    format_string_list,
    render,
)
from capfact.records import CaptionRecord


class StubFixture:
    """Accumulates (request key, response) pairs and writes a fixture file."""

    def __init__(self):
        self.entries: list[dict] = []

    def reply(self, prompt: str, response: str) -> "StubFixture":
        self.entries.append({"key": user_request_key(prompt), "response": response})
        return self

    def reply_seq(self, seq: int, response: str) -> "StubFixture":
        self.entries.append({"seq": seq, "response": response})
        return self

    def extraction(self, caption: str, objects: list[str], actions: list[str]) -> "StubFixture":
        self.reply(render(EXTRACT_OBJECTS, caption=caption), format_string_list(objects))
        self.reply(render(EXTRACT_ACTIONS, caption=caption), format_string_list(actions))
        return self

    def alternative(self, element: str, kind: str, response: str) -> "StubFixture":
        if kind == "object":
            self.reply(render(SIMILAR_OBJECT, object=element), response)
        else:
            self.reply(render(SIMILAR_ACTION, action=element), response)
        return self

    def text(self) -> str:
        return "".join(json.dumps(e, ensure_ascii=False) + "\n" for e in self.entries)

    def write(self, path) -> str:
        path = str(path)
        with open(path, "w", encoding="utf-8", newline="\n") as stream:
            stream.write(self.text())
        return path

    def gateway(self, tmp_path) -> StubGateway:
        return StubGateway(self.write(tmp_path / "stub_fixture.jsonl"))


@pytest.fixture
def stub_fixture() -> StubFixture:
    return StubFixture()


SUBJECTS = ["man", "woman", "girl", "boy", "chef", "teacher", "athlete", "musician"]
ACTIONS = ["feeding", "chopping", "reading", "painting", "lifting", "washing", "holding", "throwing"]
ITEMS = ["cat", "onions", "book", "canvas", "barbell", "plate", "guitar", "ball"]
PLACES = ["living room", "kitchen", "library", "studio", "gym", "garden", "stage", "park"]
SUBJECT_ALTS = ["robot", "statue", "puppet", "wizard", "clown", "pirate", "knight", "ghost"]
ITEM_ALTS = ["melon", "kettle", "lantern", "drum", "anvil", "bucket", "violin", "kite"]
PLACE_ALTS = ["basement", "rooftop", "hallway", "balcony", "cellar", "attic", "courtyard", "porch"]
ACTION_ALTS = ["burying", "launching", "dismantling", "freezing", "polishing", "shredding", "taping", "drenching"]


def synthetic_corpus(n: int) -> tuple[list[CaptionRecord], StubFixture]:
    """n caption records plus a fixture covering extraction and alternatives.

    Substitution prompts are left out on purpose: the pipeline then uses its
    deterministic whole-word replacement, keeping outputs fixture-independent.
    """
    fixture = StubFixture()
    records = []
    for i in range(n):
        subject = SUBJECTS[i % 8]
        action = ACTIONS[(i // 2) % 8]
        item = ITEMS[(i // 3) % 8]
        place = PLACES[(i // 5) % 8]
        caption = f"The {subject} is {action} the {item} in the {place}"
        records.append(
            CaptionRecord(id=f"syn-{i:04d}", video_ref=f"video://syn/{i:04d}", caption=caption)
        )
        fixture.extraction(caption, [subject, item, place], [action])
        fixture.alternative(subject, "object", SUBJECT_ALTS[i % 8])
        fixture.alternative(item, "object", ITEM_ALTS[(i // 3) % 8])
        fixture.alternative(place, "object", PLACE_ALTS[(i // 5) % 8])
        fixture.alternative(action, "action", ACTION_ALTS[(i // 2) % 8])
    return records, fixture
