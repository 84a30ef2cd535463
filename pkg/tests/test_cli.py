import json
import subprocess
import sys
from pathlib import Path

import pytest

from lintrans import checking
from lintrans.cli import main
from lintrans.datalog import NO, YES, Answer
from lintrans.kbformat import parse_kb

KB_DIR = Path(__file__).resolve().parent.parent / "kb"

LIMIT_KB = """
@transitive p0.
@transitive p2.
p1(X0) :- p2(X0,X0).
p3(X1) :- p0(X1,X1).
p0(X0,X0) :- p3(X0).
p1(X0) :- p2(X0,X1).
p0(c1,c2). p0(c2,c2). p0(c2,c3). p1(c1). p2(c0,c0). p2(c1,c3). p3(c2).
? :- p0(Y0,Y1), p2(Y0,Y0), p2(Y1,Y2).
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, text, name="kb.kb"):
    path = tmp_path / name
    path.write_text(text)
    return path


# entail -----------------------------------------------------------------------


def test_entail_yes(capsys):
    code, out, _ = run(capsys, "entail", KB_DIR / "reach.kb")
    assert code == 0
    assert out.strip() == "? :- edge(a,d). % yes"


def test_entail_any_no(capsys):
    code, out, _ = run(capsys, "entail", KB_DIR / "internal.kb")
    assert code == 1
    assert out.splitlines() == ["? :- t(a,c). % yes", "? :- t(c,a). % no"]


def test_entail_unknown_without_no(capsys):
    code, out, _ = run(capsys, "entail", KB_DIR / "unsafe.kb")
    assert code == 2
    assert out.splitlines()[1].endswith("% unknown")


def test_no_takes_precedence_over_unknown(capsys, tmp_path):
    text = (KB_DIR / "unsafe.kb").read_text() + "? :- s1(c,c,c).\n"
    code, out, _ = run(capsys, "entail", write(tmp_path, text))
    assert [line.rsplit("% ", 1)[1] for line in out.splitlines()] == ["yes", "unknown", "no"]
    assert code == 1


def test_entail_output_parses_back(capsys):
    _, out, _ = run(capsys, "entail", KB_DIR / "internal.kb")
    doc = parse_kb(out)
    assert len(doc.queries) == 2
    assert doc == parse_kb(out)


def test_entail_runs_on_all_example_files(capsys):
    for path in sorted(KB_DIR.glob("*.kb")):
        code, out, _ = run(capsys, "entail", path)
        assert code in (0, 1, 2), path
        assert out


# rewrite ----------------------------------------------------------------------


def test_rewrite_emits_grown_pattern_rule(capsys):
    code, out, _ = run(capsys, "rewrite", KB_DIR / "internal.kb")
    assert code == 0
    assert "t__tc(X,Y) :- s(X,Y)." in out.splitlines()
    assert "? :- t__tc(a,c)." in out.splitlines()


def test_rewrite_unmodified_limit_exit(capsys, tmp_path):
    path = write(tmp_path, LIMIT_KB)
    code, out, _ = run(capsys, "rewrite", path, "--mode", "unmodified", "--max-steps", 5, "--max-pcqs", 40)
    assert code == 3
    assert "termination=limit_hit" in out
    code, _, _ = run(capsys, "rewrite", path)
    assert code == 0


def test_rewrite_json_report(capsys):
    code, out, _ = run(capsys, "rewrite", KB_DIR / "two_patterns.kb", "--emit", "json")
    assert code == 0
    report = json.loads(out)
    assert list(report) == ["split", "specializations", "safety", "grd", "rewrite_stats", "answers"]
    (stats,) = report["rewrite_stats"]
    assert stats["termination"] == "completed" and stats["complete"] is True
    assert stats["pcqs"] >= len(stats["ucq"]) >= 1
    assert report["answers"] == [{"query": "? :- p1(a,Z), p2(Z,b), s1(a,b).", "verdict": "yes"}]


def test_rewrite_json_limit_exit(capsys, tmp_path):
    path = write(tmp_path, LIMIT_KB)
    args = ("rewrite", path, "--emit", "json", "--mode", "unmodified", "--max-steps", 5, "--max-pcqs", 40)
    code, out, _ = run(capsys, *args)
    assert code == 3
    assert json.loads(out)["rewrite_stats"][0]["termination"] == "limit_hit"


# analyze ----------------------------------------------------------------------


def test_analyze_text(capsys):
    code, out, _ = run(capsys, "analyze", KB_DIR / "safe.kb")
    assert code == 0
    assert "s1 of p2 on {{3},{1}}" in out
    assert "safety: safe" in out
    assert "witness s1: positions 1,3" in out


def test_analyze_unsafe(capsys):
    code, out, _ = run(capsys, "analyze", KB_DIR / "unsafe.kb")
    assert code == 0
    assert "safety: unsafe" in out and "no common position pair for s1" in out


def test_analyze_json_keys(capsys):
    code, out, _ = run(capsys, "analyze", KB_DIR / "safe.kb", "--json")
    assert code == 0
    report = json.loads(out)
    assert list(report) == ["split", "specializations", "safety", "grd", "rewrite_stats", "answers"]
    assert report["safety"]["witness"] == {"s1": [1, 3], "s2": [1, 2]}


def test_analyze_outside_fragment_still_exits_zero(capsys, tmp_path):
    path = write(tmp_path, "r(X) :- p(X,Y), q(Y).\n")
    code, out, _ = run(capsys, "analyze", path, "--json")
    assert code == 0
    report = json.loads(out)
    assert report["safety"] is None
    assert report["split"]["rejected"][0]["reason"].startswith("body has 2 atoms")


# saturate and chase -----------------------------------------------------------


def test_saturate_prints_closure_facts(capsys):
    code, out, _ = run(capsys, "saturate", KB_DIR / "reach.kb")
    assert code == 0
    lines = out.splitlines()
    assert "edge__tc(a,d)." in lines and "edge(a,b)." in lines
    assert len([x for x in lines if x.startswith("edge__tc")]) == 6


def test_chase_prints_rounds(capsys):
    code, out, _ = run(capsys, "chase", KB_DIR / "reach.kb", "--depth", 6)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "% round 0"
    assert "% round 1" in lines and "edge(a,c)." in lines
    assert lines[-1].startswith("% fixpoint after")


# check ------------------------------------------------------------------------


def strip_timing(out: str) -> str:
    return "\n".join(x for x in out.splitlines() if not x.startswith("elapsed"))


def test_check_passes_and_is_deterministic(capsys):
    code, one, _ = run(capsys, "check", "--seed", 1, "--cases", 200)
    assert code == 0
    assert "disagreements=0" in one
    _, two, _ = run(capsys, "check", "--seed", 1, "--cases", 200)
    assert strip_timing(one) == strip_timing(two)


def test_check_reports_a_counterexample(capsys, monkeypatch):
    real = checking.entails_compiled

    def flipped(*args, **kwargs):
        ans = real(*args, **kwargs)
        return Answer(NO if ans.verdict == YES else YES, ans.ucq_size, ans.termination, ans.complete)

    monkeypatch.setattr(checking, "entails_compiled", flipped)
    code, out, _ = run(capsys, "check", "--seed", 3, "--cases", 5)
    assert code == 70
    assert "% counterexample case 0" in out
    start = out.index("% counterexample case 0")
    body = out[start:].split("% counterexample case", 2)[1]
    doc = parse_kb(body.split("\n", 1)[1])
    assert doc.queries


# errors -----------------------------------------------------------------------


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 64
    with pytest.raises(SystemExit) as info:
        main(["rewrite", str(KB_DIR / "reach.kb"), "--mode", "sideways"])
    assert info.value.code == 64
    with pytest.raises(SystemExit) as info:
        main(["check", "--cases", "0"])
    assert info.value.code == 64


def test_missing_file_is_an_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "entail", tmp_path / "absent.kb")
    assert code == 74
    assert "cannot read" in err


def test_syntax_error_reports_position(capsys, tmp_path):
    code, _, err = run(capsys, "entail", write(tmp_path, "h(a).\np(a,b.\n"))
    assert code == 65
    assert "line 2, column 6" in err


def test_arity_clash_is_a_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "saturate", write(tmp_path, "p(a,b). p(a)."))
    assert code == 65
    assert "arities" in err


def test_rules_outside_fragment_are_a_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "entail", write(tmp_path, "r(X) :- p(X,Y), q(Y). ? :- r(a)."))
    assert code == 65
    assert "linear+transitivity" in err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "lintrans", "entail", str(KB_DIR / "reach.kb")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith("% yes")
