"""End-to-end command tests driving capfact.cli.main with on-disk data.

tests/data holds a 3-caption corpus, the stub-gateway fixture covering its
extraction/alternative prompts, and a frozen output file (seed 1, four
variants per caption) that corrupt runs must reproduce byte for byte.
"""

import json
import shlex
import subprocess
import sys
from pathlib import Path

import pytest

from capfact.cli import main
from capfact.prompts import EVALUATOR_USER, JUDGE, render
from capfact.records import RatedCandidate, load_records, save_records
from conftest import StubFixture

DATA = Path(__file__).parent / "data"
CAPTIONS = str(DATA / "captions_3.jsonl")
FIXTURE = str(DATA / "fixture_3.jsonl")
GOLDEN = DATA / "golden_corrupt.jsonl"


def _corrupt(tmp_path, *extra, captions=CAPTIONS, seed="1"):
    out = tmp_path / "pseudo.jsonl"
    rc = main(
        [
            "corrupt",
            "--input", captions,
            "--stub", FIXTURE,
            "--output", str(out),
            "--seed", seed,
            "--per-caption", "4",
            *extra,
        ]
    )
    return rc, out


def test_corrupt_reproduces_frozen_output(tmp_path, capsys):
    rc, out = _corrupt(tmp_path)
    assert rc == 0
    assert out.read_bytes() == GOLDEN.read_bytes()
    stdout = capsys.readouterr().out
    assert "labels" in stdout
    assert "pseudo captions out: 12" in stdout


def test_corrupt_identical_on_rerun_and_permuted_input(tmp_path):
    _, first = _corrupt(tmp_path)
    reversed_captions = tmp_path / "reversed.jsonl"
    lines = Path(CAPTIONS).read_text(encoding="utf-8").strip().split("\n")
    reversed_captions.write_text("\n".join(reversed(lines)) + "\n", encoding="utf-8")

    out2 = tmp_path / "second.jsonl"
    rc = main(
        [
            "corrupt",
            "--input", str(reversed_captions),
            "--stub", FIXTURE,
            "--output", str(out2),
            "--seed", "1",
            "--per-caption", "4",
            "--jobs", "3",
        ]
    )
    assert rc == 0
    assert out2.read_bytes() == first.read_bytes() == GOLDEN.read_bytes()


def test_corrupt_seed_changes_output(tmp_path):
    _, first = _corrupt(tmp_path)
    out2 = tmp_path / "other-seed.jsonl"
    rc = main(
        [
            "corrupt",
            "--input", CAPTIONS,
            "--stub", FIXTURE,
            "--output", str(out2),
            "--seed", "2",
            "--per-caption", "4",
        ]
    )
    assert rc == 0
    assert out2.read_bytes() != first.read_bytes()


def test_corrupt_objects_only(tmp_path):
    rc, out = _corrupt(tmp_path, "--mode", "objects_only")
    assert rc == 0
    for line in out.read_text(encoding="utf-8").splitlines():
        assert json.loads(line)["replacements"]["action_swaps"] == []


def test_corrupt_skip_report(tmp_path, capsys):
    captions = tmp_path / "captions.jsonl"
    captions.write_text(
        Path(CAPTIONS).read_text(encoding="utf-8")
        + json.dumps(
            {"id": "cap-004", "video_ref": "video://clips/004", "caption": "Nothing happens"}
        )
        + "\n",
        encoding="utf-8",
    )
    fixture = tmp_path / "fixture.jsonl"
    extra = StubFixture().extraction("Nothing happens", [], [])
    fixture.write_text(
        Path(FIXTURE).read_text(encoding="utf-8") + extra.text(), encoding="utf-8"
    )

    out = tmp_path / "pseudo.jsonl"
    rc = main(
        [
            "corrupt",
            "--input", str(captions),
            "--stub", str(fixture),
            "--output", str(out),
            "--seed", "1",
            "--per-caption", "4",
        ]
    )
    assert rc == 0
    skips = (tmp_path / "pseudo.jsonl.skips.jsonl").read_text(encoding="utf-8")
    assert json.loads(skips) == {"id": "cap-004", "reason": "no factual elements"}
    assert "skipped 1 records" in capsys.readouterr().err


def test_corrupt_honours_min_elements(tmp_path):
    rc, out = _corrupt(tmp_path, "--min-elements", "4")
    assert rc == 0
    parents = {json.loads(l)["parent_id"] for l in out.read_text().splitlines()}
    assert parents == {"cap-001", "cap-003"}  # cap-002 has 3 elements
    skips = json.loads((tmp_path / "pseudo.jsonl.skips.jsonl").read_text())
    assert skips["id"] == "cap-002"


# ------------------------------------------------------------- exit codes


def test_missing_input_is_usage_error(tmp_path, capsys):
    rc, _ = _corrupt(tmp_path, captions=str(tmp_path / "absent.jsonl"))
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_flag_exits_2(capsys):
    assert main(["corrupt", "--nonsense"]) == 2
    capsys.readouterr()


def test_bad_mode_exits_2(tmp_path, capsys):
    rc, _ = _corrupt(tmp_path, "--mode", "everything")
    assert rc == 2
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "corrupt" in capsys.readouterr().out


def test_output_must_differ_from_input(capsys):
    rc = main(
        ["corrupt", "--input", CAPTIONS, "--output", CAPTIONS, "--stub", FIXTURE]
    )
    assert rc == 2
    assert "distinct" in capsys.readouterr().err


def test_gateway_required(tmp_path, capsys):
    rc = main(
        ["corrupt", "--input", CAPTIONS, "--output", str(tmp_path / "o.jsonl")]
    )
    assert rc == 2
    assert "--endpoint or --stub" in capsys.readouterr().err


def test_stub_and_endpoint_conflict(tmp_path, capsys):
    rc = main(
        [
            "corrupt",
            "--input", CAPTIONS,
            "--output", str(tmp_path / "o.jsonl"),
            "--stub", FIXTURE,
            "--endpoint", "http://localhost:1/v1/chat/completions",
        ]
    )
    assert rc == 2
    assert "mutually exclusive" in capsys.readouterr().err


def test_malformed_input_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"\n', encoding="utf-8")
    rc = main(
        ["corrupt", "--input", str(bad), "--stub", FIXTURE, "--output", str(tmp_path / "o.jsonl")]
    )
    assert rc == 1
    assert "line 1" in capsys.readouterr().err


# ---------------------------------------------------------------- balance


def test_balance_cli(tmp_path, capsys):
    out = tmp_path / "balanced.jsonl"
    rc = main(
        ["balance", "--input", str(GOLDEN), "--output", str(out), "--target", "1", "--seed", "3"]
    )
    assert rc == 0
    rows = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
    assert sorted(r["label"] for r in rows) == [1, 2, 3, 4, 5]
    assert "target per label: 1  kept: 5" in capsys.readouterr().out


def test_balance_default_target_warns_underfull(tmp_path, capsys):
    out = tmp_path / "balanced.jsonl"
    rc = main(["balance", "--input", str(GOLDEN), "--output", str(out)])
    assert rc == 0
    captured = capsys.readouterr()
    # golden histogram is 2/2/2/5/1, so the target is 1 and nothing is underfull
    assert "target per label: 1" in captured.out
    assert captured.err == ""


def test_balance_empty_input_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    rc = main(["balance", "--input", str(empty), "--output", str(tmp_path / "o.jsonl")])
    assert rc == 2
    capsys.readouterr()


# -------------------------------------------------------------- export-it


def test_export_it_cli(tmp_path, capsys):
    out = tmp_path / "instructions.jsonl"
    rc = main(
        ["export-it", "--input", str(GOLDEN), "--captions", CAPTIONS, "--output", str(out)]
    )
    assert rc == 0
    assert "wrote 12 instruction records" in capsys.readouterr().out
    rows = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
    assert len(rows) == 12
    for row in rows:
        assert row["video_ref"].startswith("video://clips/")
        assert "<caption>" in row["user_text"]
        label = int(row["assistant_text"].split("\n")[0])
        assert 1 <= label <= 5


def test_export_it_label_only(tmp_path):
    out = tmp_path / "instructions.jsonl"
    rc = main(
        [
            "export-it",
            "--input", str(GOLDEN),
            "--captions", CAPTIONS,
            "--output", str(out),
            "--no-explanations",
        ]
    )
    assert rc == 0
    rows = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
    assert all(row["assistant_text"].isdigit() for row in rows)


def test_export_it_missing_parent_exits_1(tmp_path, capsys):
    captions = tmp_path / "captions.jsonl"
    lines = Path(CAPTIONS).read_text(encoding="utf-8").splitlines()
    captions.write_text("\n".join(lines[:2]) + "\n", encoding="utf-8")
    rc = main(
        [
            "export-it",
            "--input", str(GOLDEN),
            "--captions", str(captions),
            "--output", str(tmp_path / "o.jsonl"),
        ]
    )
    assert rc == 1
    assert "cap-003" in capsys.readouterr().err


# ------------------------------------------------------------------- eval


def _rated_file(tmp_path, n=6) -> tuple[str, list[RatedCandidate]]:
    records = [
        RatedCandidate(
            id=f"vid-{i}",
            video_ref=f"video://{i}",
            candidate=f"candidate caption {i}",
            human_ratings=[float(1 + i % 5), float(1 + (i * 2) % 5)],
        )
        for i in range(n)
    ]
    path = tmp_path / "rated.jsonl"
    save_records(records, path)
    return str(path), records


def _scores_file(tmp_path, records, score_of) -> str:
    path = tmp_path / "scores.jsonl"
    with open(path, "w", encoding="utf-8") as stream:
        for r in records:
            mean = sum(r.human_ratings) / len(r.human_ratings)
            stream.write(json.dumps({"id": r.id, "score": score_of(mean)}) + "\n")
    return str(path)


def test_eval_precomputed_table(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    scores = _scores_file(tmp_path, records, lambda mean: mean)
    rc = main(["eval", "--input", rated, "--scores", scores])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "tau_b  rho  n"
    assert "100.00  100.00  6" in out


def test_eval_json_format(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    scores = _scores_file(tmp_path, records, lambda mean: -mean)
    rc = main(["eval", "--input", rated, "--scores", scores, "--format", "json"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["tau_b"] == -100.0
    assert report["n"] == 6


def test_eval_command_adapter(tmp_path, capsys):
    rated, _ = _rated_file(tmp_path)
    script = tmp_path / "scorer.py"
    script.write_text(
        "import sys, json\n"
        "for line in sys.stdin:\n"
        "    if line.strip():\n"
        "        print(json.loads(line)['id'][-1])\n",
        encoding="utf-8",
    )
    command = f"{shlex.quote(sys.executable)} {shlex.quote(str(script))}"
    rc = main(["eval", "--input", rated, "--command", command])
    assert rc == 0
    assert "tau_b  rho  n" in capsys.readouterr().out


def test_eval_chat_adapter(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    fixture = StubFixture()
    for r in records:
        mean = sum(r.human_ratings) / len(r.human_ratings)
        fixture.reply(render(EVALUATOR_USER, caption=r.candidate), f"{mean}\n\nbecause")
    rc = main(["eval", "--input", rated, "--chat", "--stub", fixture.write(tmp_path / "f.jsonl")])
    assert rc == 0
    assert "100.00  100.00  6" in capsys.readouterr().out


def test_eval_adapter_flags_are_exclusive(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    scores = _scores_file(tmp_path, records, lambda mean: mean)
    assert main(["eval", "--input", rated, "--scores", scores, "--command", "true"]) == 2
    assert main(["eval", "--input", rated]) == 2
    capsys.readouterr()


def test_eval_stability(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    scores = _scores_file(tmp_path, records, lambda mean: 2.0 * mean + 1.0)
    rc = main(["eval", "--input", rated, "--scores", scores, "--stability"])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "pearson 1.0000"


def test_eval_journal_written_and_reused(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    scores = _scores_file(tmp_path, records, lambda mean: mean)
    journal = tmp_path / "journal.jsonl"
    assert main(["eval", "--input", rated, "--scores", scores, "--journal", str(journal)]) == 0
    entries = [json.loads(l) for l in journal.read_text(encoding="utf-8").splitlines()]
    assert {e["id"] for e in entries} == {r.id for r in records}

    # journal satisfies every id, so even an empty score file works now
    empty = tmp_path / "none.jsonl"
    empty.write_text("", encoding="utf-8")
    assert main(["eval", "--input", rated, "--scores", str(empty), "--journal", str(journal)]) == 0
    capsys.readouterr()


def test_eval_coverage_gap_exits_1(tmp_path, capsys):
    rated, records = _rated_file(tmp_path)
    partial = tmp_path / "partial.jsonl"
    partial.write_text(json.dumps({"id": records[0].id, "score": 3}) + "\n", encoding="utf-8")
    rc = main(["eval", "--input", rated, "--scores", str(partial)])
    assert rc == 1
    assert "no scores for ids" in capsys.readouterr().err


# ------------------------------------------------------------------ judge


def _judge_inputs(tmp_path, replies):
    cases = []
    fixture = StubFixture()
    for i, (pred_reply, gt_reply) in enumerate(replies):
        case = {
            "id": f"case-{i}",
            "context": f"A dog chases a ball ({i})",
            "caption": f"A cat sleeps ({i})",
            "gt_explanation": f"The animal and the action are both wrong ({i}).",
            "pred_explanation": f"The animal is wrong ({i}).",
        }
        cases.append(case)

        def prompt(candidate):
            return render(
                JUDGE,
                ground_truth_caption=case["context"],
                caption_to_evaluate=case["caption"],
                ground_truth_explanation=case["gt_explanation"],
                predicted_explanation=candidate,
            )

        fixture.reply(prompt(case["pred_explanation"]), pred_reply)
        fixture.reply(prompt(case["gt_explanation"]), gt_reply)
    path = tmp_path / "cases.jsonl"
    path.write_text(
        "".join(json.dumps(c, ensure_ascii=False) + "\n" for c in cases), encoding="utf-8"
    )
    return str(path), fixture.write(tmp_path / "judge_fixture.jsonl")


def test_judge_cli(tmp_path, capsys):
    cases, fixture = _judge_inputs(tmp_path, [("8\n\nok", "10\n\nfull marks"), ("9", "9")])
    out = tmp_path / "judged.jsonl"
    rc = main(["judge", "--input", cases, "--stub", fixture, "--output", str(out)])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "mean_relative 90.00" in stdout  # (80 + 100) / 2
    assert "judged 2  excluded 0" in stdout
    rows = [json.loads(l) for l in out.read_text(encoding="utf-8").splitlines()]
    assert rows[0] == {"id": "case-0", "gt_score": 10.0, "pred_score": 8.0, "relative": 80.0}


def test_judge_exclusion_exits_1(tmp_path, capsys):
    cases, fixture = _judge_inputs(tmp_path, [("8", "10"), ("gibberish", "9")])
    rc = main(["judge", "--input", cases, "--stub", fixture])
    assert rc == 1
    captured = capsys.readouterr()
    assert "judged 1  excluded 1" in captured.out
    assert "excluded after retries" in captured.err


def test_judge_rejects_incomplete_case(tmp_path, capsys):
    path = tmp_path / "cases.jsonl"
    path.write_text(json.dumps({"id": "x", "context": "c"}) + "\n", encoding="utf-8")
    rc = main(["judge", "--input", str(path), "--stub", FIXTURE])
    assert rc == 1
    assert "line 1" in capsys.readouterr().err


# ----------------------------------------------------------------- config


def test_config_file_supplies_settings(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text(
        "gateway:\n"
        f"  stub_fixture: {FIXTURE}\n"
        "pipeline:\n"
        "  seed: 1\n"
        "  per_caption_count: 4\n",
        encoding="utf-8",
    )
    out = tmp_path / "pseudo.jsonl"
    rc = main(["corrupt", "--config", str(config), "--input", CAPTIONS, "--output", str(out)])
    assert rc == 0
    assert out.read_bytes() == GOLDEN.read_bytes()


def test_flags_override_config(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text(
        f"gateway:\n  stub_fixture: {FIXTURE}\npipeline:\n  seed: 1\n  per_caption_count: 4\n",
        encoding="utf-8",
    )
    out = tmp_path / "pseudo.jsonl"
    rc = main(
        ["corrupt", "--config", str(config), "--input", CAPTIONS, "--output", str(out), "--seed", "2"]
    )
    assert rc == 0
    assert out.read_bytes() != GOLDEN.read_bytes()


def test_config_must_be_mapping(tmp_path, capsys):
    config = tmp_path / "config.yaml"
    config.write_text("- just\n- a list\n", encoding="utf-8")
    rc = main(["corrupt", "--config", str(config), "--input", CAPTIONS, "--output", "/tmp/x.jsonl"])
    assert rc == 2
    capsys.readouterr()


def test_missing_config_exits_2(tmp_path, capsys):
    rc = main(
        ["corrupt", "--config", str(tmp_path / "none.yaml"), "--input", CAPTIONS, "--output", "/tmp/x.jsonl"]
    )
    assert rc == 2
    capsys.readouterr()


# ------------------------------------------------------------ module entry


def test_python_dash_m_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "capfact", "--help"], capture_output=True, text=True
    )
    assert result.returncode == 0
    assert "corrupt" in result.stdout

    out = tmp_path / "pseudo.jsonl"
    result = subprocess.run(
        [
            sys.executable, "-m", "capfact", "corrupt",
            "--input", CAPTIONS,
            "--stub", FIXTURE,
            "--output", str(out),
            "--seed", "1",
            "--per-caption", "4",
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert out.read_bytes() == GOLDEN.read_bytes()


def test_round_trip_of_frozen_output():
    rows = load_records(str(GOLDEN), "pseudo")
    assert len(rows) == 12
    for row in rows:
        row.validate()
