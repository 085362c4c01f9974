"""Top-level acceptance suite.

Each test exercises one release criterion end to end and prints a single
PASS line with its measured cost; any assertion failure marks the
criterion failed.
"""

from __future__ import annotations

import itertools
import json
import random
import time

import pytest

from lwidget import ast as A
from lwidget import parser, typecheck
from lwidget.parser import parse_lin_type
from lwidget.runtime import TiePolicy, conformance, run
from lwidget.semantics import (
    ERROR_OUTCOME,
    Attach,
    OnClick,
    OnKeypress,
    SetColor,
    Stimulus,
    compatible,
    enumerate_outcomes,
    prefix_of,
    render_state,
    shift,
    widget_union,
)

from conftest import POSITIVE, checked, corpus_path
from test_semantics import COMMANDS, _join, _logbooks_up_to
from test_typecheck import EXPECTED_TYPES, _random_instance


def report(name: str, detail: str) -> None:
    print(f"ACCEPTANCE PASS: {name} ({detail})")


def test_01_corpus_programs_typecheck_with_stated_types():
    t0 = time.perf_counter()
    for name, defs in EXPECTED_TYPES.items():
        result = checked(corpus_path(name))
        assert result.ok, (name, result.errors)
        for defn, expected in defs.items():
            assert A.alpha_eq(result.types[defn], parse_lin_type(expected)), (name, defn)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"checker took {elapsed:.3f}s"
    report("corpus typechecks", f"{len(EXPECTED_TYPES)} files in {elapsed * 1000:.0f} ms")


def test_02_negative_programs_rejected():
    for name in ("zip_attempt.lw", "select_outer.lw"):
        result = checked(corpus_path(name))
        assert not result.ok
        assert any(e.kind == "LinearVariableUnavailableInSelect" for e in result.errors), name
    # Contradictory color commands are a semantic error, not a type error.
    double = checked(corpus_path("double_set.lw"))
    assert double.ok
    outcomes = enumerate_outcomes(double.program, 4)
    assert [o.canonical for o in outcomes] == [ERROR_OUTCOME]
    report("negative programs rejected", "2 type rejections + 1 semantic clash")


def test_03_golden_derivation():
    result = checked(corpus_path("turn_red_core.lw"))
    assert result.ok
    events = result.derivations["turnRedOnClick"]
    bind_x = next(e for e in events if e.kind == "bind-index")
    assert (bind_x.name, bind_x.type, bind_x.line) == ("x", "Time", 4)
    discharge = next(e for e in events if e.kind == "discharge")
    assert (discharge.line, discharge.rule) == (6, "I_t-E")
    assert discharge.consumed == [("c2", "I", "x")]
    join = next(e for e in events if e.kind == "apply" and e.name == "join")
    assert join.line == 9
    assert sorted(join.consumed) == [("p", "Prefix i x", "0"), ("w3", "Widget i", "x")]
    report("golden derivation", "lines 4, 6, 9 match exactly")


def test_04_algebraic_laws():
    t0 = time.perf_counter()
    exhaustive = 0
    for log in _logbooks_up_to(5, 3):
        for t in range(6):
            assert _join(t, prefix_of(t, log), shift(t, log)) == log
            exhaustive += 1

    rng = random.Random(99)
    for _ in range(1000):
        log = set()
        for _ in range(rng.randrange(0, 14)):
            entry = (rng.randrange(0, 64), rng.choice(COMMANDS))
            if all(compatible(entry, e) for e in log):
                log.add(entry)
        log = frozenset(log)
        t = rng.randrange(0, 70)
        assert _join(t, prefix_of(t, log), shift(t, log)) == log
        a, b = rng.randrange(0, 20), rng.randrange(0, 20)
        assert shift(a, shift(b, log)) == shift(a + b, log)
        pre = prefix_of(t, log)
        suf = frozenset((tt + t, c) for tt, c in shift(t, log))
        assert pre | suf == log and not (pre & suf)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    report(
        "algebraic laws",
        f"join-split id x{exhaustive} exhaustive + 1000 random; shift composition;"
        f" partition; {elapsed:.2f}s",
    )


def test_05_substitution_preserves_typability():
    checks = 0
    for path in POSITIVE:
        rng = random.Random(len(path))
        prog = parser.desugar(parser.parse(open(path).read()))
        for _ in range(100):
            target = rng.choice(prog.definitions)
            variant = _random_instance(target, rng)
            defs = [variant if d.name == target.name else d for d in prog.definitions]
            result = typecheck.check_program(A.SourceProgram(defs, prog.entry))
            assert result.ok, (path, target.name, result.errors[:1])
            checks += 1
    report("substitution preservation", f"{checks} random substitutions, zero failures")


def test_06_conformance():
    t0 = time.perf_counter()
    total_runs = 0
    for path in POSITIVE:
        result = checked(path)
        horizon = 6
        # the two fan-out-heavy programs stay within budget at 6 as well,
        # but every file must finish inside the global limit
        report_ = conformance(result.program, horizon)
        assert report_.ok, (path, report_.failures[:2])
        total_runs += report_.runs
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report("conformance", f"{total_runs} replays at horizon 6 in {elapsed:.1f}s, zero violations")


def test_07_behavioral_distinction():
    prog = checked(corpus_path("click_then_keep.lw")).program
    trace = [Stimulus(1, 0, "click"), Stimulus(2, 0, "click"), Stimulus(3, 0, "click")]
    set_once = run(prog, 8, trace, entry="setOnce")
    rearming = run(prog, 8, trace, entry="main")
    assert render_state(set_once.value, 4) == {0: "Blue"}
    assert render_state(rearming.value, 4) == {0: "Red"}
    report("behavioral distinction", "set-once Blue vs re-arming Red at probe time 4")


def test_08_push_discipline():
    prog = checked(corpus_path("keep_turning_red.lw")).program
    trace = [Stimulus(1, 0, "click"), Stimulus(3, 0, "click")]
    baseline = run(prog, 4, trace).steps
    for h in (8, 16, 1024, 4 * 10**6):
        assert run(prog, h, trace).steps == baseline
    report("push discipline", f"{baseline} steps at every horizon from 4 to 4e6")
