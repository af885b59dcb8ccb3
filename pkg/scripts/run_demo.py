#!/usr/bin/env python3
"""Run the whole toolchain end to end on the synthetic demo corpus.

Generates demo data, then drives every CLI subcommand in-process, printing
the equivalent shell command before each step.
"""

from __future__ import annotations

import sys
from pathlib import Path

from capfact.cli import main as capfact_main

sys.path.insert(0, str(Path(__file__).parent))
from make_demo_data import main as make_demo_data  # noqa: E402


def step(args: list[str]) -> None:
    print(f"\n$ capfact {' '.join(args)}")
    code = capfact_main(args)
    if code != 0:
        print(f"exited {code}", file=sys.stderr)
        raise SystemExit(code)


def main() -> int:
    base = Path("demo_data")
    make_demo_data(["--output-dir", str(base), "--records", "50"])

    step(
        [
            "corrupt",
            "--input", str(base / "captions.jsonl"),
            "--output", str(base / "pseudo.jsonl"),
            "--stub", str(base / "fixture.jsonl"),
            "--seed", "7",
        ]
    )
    step(
        [
            "balance",
            "--input", str(base / "pseudo.jsonl"),
            "--output", str(base / "balanced.jsonl"),
            "--seed", "7",
        ]
    )
    step(
        [
            "export-it",
            "--input", str(base / "balanced.jsonl"),
            "--captions", str(base / "captions.jsonl"),
            "--output", str(base / "instructions.jsonl"),
        ]
    )
    step(
        [
            "eval",
            "--input", str(base / "rated.jsonl"),
            "--scores", str(base / "scores.jsonl"),
        ]
    )
    step(
        [
            "eval",
            "--input", str(base / "rated.jsonl"),
            "--scores", str(base / "scores.jsonl"),
            "--stability",
        ]
    )
    step(
        [
            "judge",
            "--input", str(base / "judge_cases.jsonl"),
            "--output", str(base / "judge_results.jsonl"),
            "--stub", str(base / "judge_fixture.jsonl"),
        ]
    )
    print("\ndemo complete; outputs under demo_data/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
