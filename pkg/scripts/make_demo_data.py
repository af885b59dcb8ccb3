#!/usr/bin/env python3
"""Generate a small synthetic corpus plus a stub-gateway fixture.

Writes into --output-dir:
  captions.jsonl     source caption records
  fixture.jsonl      stub responses covering extraction and alternatives
                     (substitution prompts are deliberately absent, so the
                     pipeline exercises its deterministic fallback)
  rated.jsonl        rated candidates for the eval harness demo
  scores.jsonl       a precomputed score file matching rated.jsonl
  judge_cases.jsonl  explanation pairs for the judge demo
  judge_fixture.jsonl stub responses for the judge prompts
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from capfact.gateway import user_request_key
from capfact.prompts import (
    EXTRACT_ACTIONS,
    EXTRACT_OBJECTS,
    JUDGE,
    SIMILAR_ACTION,
    SIMILAR_OBJECT,
    format_string_list,
    render,
)

SUBJECTS = ["man", "woman", "girl", "boy", "chef", "teacher", "athlete", "musician"]
ACTIONS = ["feeding", "chopping", "reading", "painting", "lifting", "washing", "holding", "throwing"]
ITEMS = ["cat", "onions", "book", "canvas", "barbell", "plate", "guitar", "ball"]
PLACES = ["living room", "kitchen", "library", "studio", "gym", "garden", "stage", "park"]

# Replacement vocabulary is disjoint from the caption vocabulary so swapped
# words never collide with existing elements.
OBJECT_ALTS = [
    "robot", "statue", "puppet", "wizard", "clown", "pirate", "knight", "ghost",
    "melon", "kettle", "lantern", "drum", "anvil", "bucket", "violin", "kite",
    "basement", "rooftop", "hallway", "balcony", "cellar", "attic", "courtyard", "porch",
]
ACTION_ALTS = ["burying", "launching", "dismantling", "freezing", "polishing", "shredding", "taping", "drenching"]


def build_caption(i: int, rng: random.Random):
    subject = rng.choice(SUBJECTS)
    action = rng.choice(ACTIONS)
    item = rng.choice(ITEMS)
    place = rng.choice(PLACES)
    caption = f"The {subject} is {action} the {item} in the {place}"
    objects = [subject, item, place]
    return caption, objects, [action]


def alternative_for(element: str, kind: str) -> str:
    table = OBJECT_ALTS if kind == "object" else ACTION_ALTS
    return table[hash_index(element, len(table))]


def hash_index(text: str, size: int) -> int:
    return sum(text.encode("utf-8")) % size


def write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as stream:
        for row in rows:
            stream.write(json.dumps(row, ensure_ascii=False) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-dir", default="demo_data")
    parser.add_argument("--records", type=int, default=50)
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args(argv)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    captions = []
    fixture = []
    seen_prompts = set()

    def add_fixture(prompt: str, response: str) -> None:
        key = user_request_key(prompt)
        if key in seen_prompts:
            return
        seen_prompts.add(key)
        fixture.append({"key": key, "response": response})

    for i in range(args.records):
        caption, objects, actions = build_caption(i, rng)
        captions.append(
            {"id": f"demo-{i:04d}", "video_ref": f"video://demo/{i:04d}", "caption": caption}
        )
        add_fixture(render(EXTRACT_OBJECTS, caption=caption), format_string_list(objects))
        add_fixture(render(EXTRACT_ACTIONS, caption=caption), format_string_list(actions))
        for element in objects:
            add_fixture(render(SIMILAR_OBJECT, object=element), alternative_for(element, "object"))
        for element in actions:
            add_fixture(render(SIMILAR_ACTION, action=element), alternative_for(element, "action"))

    write_jsonl(out / "captions.jsonl", captions)
    write_jsonl(out / "fixture.jsonl", fixture)

    # A rated corpus whose precomputed scores track the human means, so the
    # demo eval shows strong (not perfect) correlations.
    rated = []
    scores = []
    for i in range(60):
        base = rng.randint(1, 5)
        ratings = [max(1, min(5, base + rng.choice([-1, 0, 0, 1]))) for _ in range(3)]
        rated.append(
            {
                "id": f"cand-{i:03d}",
                "video_ref": f"video://demo/{i % args.records:04d}",
                "candidate": f"A demo candidate caption number {i}",
                "human_ratings": ratings,
            }
        )
        noisy = max(1, min(5, base + rng.choice([-1, 0, 0, 0, 1])))
        scores.append({"id": f"cand-{i:03d}", "score": noisy})
    write_jsonl(out / "rated.jsonl", rated)
    write_jsonl(out / "scores.jsonl", scores)

    judge_cases = []
    judge_fixture = []
    for i in range(8):
        case = {
            "id": f"case-{i}",
            "context": f"A person performs activity {i} in a demo video",
            "caption": f"Candidate caption for video {i}",
            "gt_explanation": f"The caption misses the key action in video {i}.",
            "pred_explanation": f"The caption partially describes video {i}.",
        }
        judge_cases.append(case)
        for explanation, score in ((case["pred_explanation"], 7 + (i % 3)), (case["gt_explanation"], 9)):
            prompt = render(
                JUDGE,
                ground_truth_caption=case["context"],
                caption_to_evaluate=case["caption"],
                ground_truth_explanation=case["gt_explanation"],
                predicted_explanation=explanation,
            )
            judge_fixture.append(
                {"key": user_request_key(prompt), "response": f"{score}\n\nReasonable coverage."}
            )
    write_jsonl(out / "judge_cases.jsonl", judge_cases)
    write_jsonl(out / "judge_fixture.jsonl", judge_fixture)

    print(f"wrote demo corpus ({args.records} captions) under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
