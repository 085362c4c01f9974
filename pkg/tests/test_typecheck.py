from __future__ import annotations

import dataclasses
import random

import pytest

from lwidget import ast as A
from lwidget import parser, typecheck
from lwidget.parser import parse_lin_type
from lwidget.typecheck import subst_index_in_term

from conftest import ALL_PROGRAMS, POSITIVE, checked, corpus_path

# Every positive corpus file with the expected type of each definition.
EXPECTED_TYPES = {
    "turn_red.lw": {"turnRedOnClick": "forall (i : Id). Widget i -o Widget i"},
    "turn_red_core.lw": {"turnRedOnClick": "forall (i : Id). Widget i -o Widget i"},
    "keep_turning_red.lw": {"keepTurningRed": "forall (i : Id). Widget i -o Widget i"},
    "click_then_keep.lw": {
        "turnRedOnClick": "forall (i : Id). Widget i -o Widget i",
        "turnBlueOnClick": "forall (i : Id). Widget i -o Widget i",
        "keepTurningRed": "forall (i : Id). Widget i -o Widget i",
        "setOnce": "forall (i : Id). Widget i -o Widget i",
        "main": "forall (i : Id). Widget i -o Widget i",
    },
    "change_color.lw": {
        "main": "forall (i : Id). Widget i -o Widget i * Ev (F Color * Ev (F Char) + F Color * Ev I)",
    },
    "interleave.lw": {
        "interleave": "(nu s. Ev (F Char * s)) -o (nu s. Ev (F Char * s)) -o nu s. Ev (F Char * s)",
    },
    "stream_map.lw": {
        "mapStr": "F (G (F Char -o F Char)) -o (nu s. Ev (F Char * s)) -o nu s. Ev (F Char * s)",
    },
    "button_stack.lw": {"main": "I -o exists (i : Id). Widget i"},
    "s43.lw": {
        "axT": "F Color -o Ev (F Color)",
        "ax4": "Ev (Ev (F Color)) -o Ev (F Color)",
        "ax3": "Ev (F Color) * Ev (F Char) -o Ev (F Color * Ev (F Char) + F Char * Ev (F Color))",
    },
    "double_set.lw": {"main": "I -o exists (i : Id). Widget i"},
    "drop.lw": {"main": "I -o I"},
    "two_events.lw": {
        "main": "forall (i : Id). forall (j : Id). Widget i -o Widget j"
        " -o (exists (x : Time). I @ x) * (exists (y : Time). I @ y)",
    },
}


# ---------------------------------------------------------------------------
# Positive corpus
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(EXPECTED_TYPES))
def test_corpus_program_types(name: str):
    result = checked(corpus_path(name))
    assert result.ok, result.errors
    for defn, expected in EXPECTED_TYPES[name].items():
        assert A.alpha_eq(result.types[defn], parse_lin_type(expected)), defn


def test_every_positive_file_is_covered():
    import os

    assert {os.path.basename(p) for p in POSITIVE} == set(EXPECTED_TYPES)


# ---------------------------------------------------------------------------
# Negative corpus and single-error programs
# ---------------------------------------------------------------------------


def errors_of(source: str):
    prog = parser.desugar(parser.parse(source))
    return typecheck.check_program(prog).errors


class TestNegativeCorpus:
    def test_zip_attempt_rejected(self):
        result = checked(corpus_path("zip_attempt.lw"))
        assert not result.ok
        assert any(e.kind == "LinearVariableUnavailableInSelect" for e in result.errors)

    def test_select_touching_outer_linear_variable_rejected(self):
        result = checked(corpus_path("select_outer.lw"))
        assert not result.ok
        assert any(e.kind == "LinearVariableUnavailableInSelect" for e in result.errors)


class TestErrorKinds:
    @pytest.mark.parametrize(
        "source,kind",
        [
            ("main : I -o I\n  = fn u. v;", "UnboundVariable"),
            ("main : I -o I\n  = fn u. ();", "LinearVariableUnused"),
            ("main : I -o I * I\n  = fn u. (u, u);", "LinearVariableReused"),
            ("main : I * I\n  = ();", "TypeMismatch"),
            ("main : I -o I @ 2\n  = fn u. u @ 2;", "TimeMismatch"),
            ("main : I -o F (G I)\n  = fn u. F (G u);", "NonEmptyLinearContextUnderG"),
            (
                "main : forall (i : Id). Widget i -o I @ i\n  = idx (i : Id). fn w. ();",
                "SortMismatch",
            ),
        ],
    )
    def test_kind(self, source: str, kind: str):
        errs = errors_of(source)
        assert errs and errs[0].kind == kind

    def test_error_record_shape(self):
        errs = errors_of("main : I -o I\n  = fn u. v;")
        rec = errs[0].to_record("f.lw")
        assert rec["file"] == "f.lw"
        assert rec["kind"] == "UnboundVariable"
        assert rec["line"] == 2 and rec["col"] >= 1
        assert "v" in rec["message"]


# ---------------------------------------------------------------------------
# Golden derivation for the core one-shot click handler
# ---------------------------------------------------------------------------


class TestGoldenDerivation:
    @pytest.fixture()
    def events(self):
        result = checked(corpus_path("turn_red_core.lw"))
        assert result.ok
        return result.derivations["turnRedOnClick"]

    def test_time_variable_enters_at_line_4(self, events):
        ev = next(e for e in events if e.kind == "bind-index")
        assert (ev.name, ev.type, ev.line) == ("x", "Time", 4)

    def test_unit_discharged_at_time_x_at_line_6(self, events):
        ev = next(e for e in events if e.kind == "discharge")
        assert ev.line == 6
        assert ev.rule == "I_t-E"
        assert ev.consumed == [("c2", "I", "x")]

    def test_payload_is_bound_at_time_x(self, events):
        ev = next(e for e in events if e.kind == "bind" and e.name == "c2")
        assert (ev.type, ev.time, ev.line) == ("I", "x", 5)

    def test_final_join_consumes_split_halves(self, events):
        ev = next(e for e in events if e.kind == "apply" and e.name == "join")
        assert ev.line == 9
        assert sorted(ev.consumed) == [
            ("p", "Prefix i x", "0"),
            ("w3", "Widget i", "x"),
        ]

    def test_delayed_widget_enters_join_at_time_x(self, events):
        ev = next(e for e in events if e.kind == "delay")
        assert ev.line == 9
        assert ev.consumed == [("w3", "Widget i", "x")]


# ---------------------------------------------------------------------------
# Select opacity
# ---------------------------------------------------------------------------


def test_select_branches_only_consume_branch_locals():
    """Inside a select branch, every consumed variable was introduced by the
    branch itself (the payload, the opposite event, or a local binding)."""
    for path in POSITIVE:
        result = checked(path)
        assert result.ok
        for events in result.derivations.values():
            scope_locals: dict[int, set[str]] = {0: set()}
            scope_parent: dict[int, int] = {}
            current = 0
            for ev in events:
                if ev.kind == "select-branch":
                    scope_parent[ev.scope] = current
                    scope_locals[ev.scope] = {ev.name}
                    current = ev.scope
                if ev.scope not in scope_locals:
                    scope_locals[ev.scope] = set()
                current = ev.scope
                if ev.kind == "bind":
                    scope_locals[ev.scope].add(ev.name)
                if ev.kind == "consume" and ev.scope in scope_parent:
                    # Allowed: the payload, local binds, or the opposite
                    # select arm (re-exposed under its own name).
                    allowed = scope_locals[ev.scope]
                    outer_binds = {
                        e.name for e in events if e.kind == "bind" and e.scope == 0
                    }
                    # the opposite arm's event variable is permitted
                    assert ev.name in allowed or ev.name in outer_binds, (path, ev)


def test_select_branch_consuming_outer_widget_is_rejected():
    src = (
        "bad : forall (i : Id). Widget i -o Ev I -o Ev I -o Ev I\n"
        "  = idx (i : Id). fn w. fn e1. fn e2.\n"
        "      select e1 as u => evt (let () = u in dropWidget [i] w)\n"
        "           | e2 as v => evt (let () = v in ());\n"
    )
    errs = errors_of(src)
    assert any(e.kind == "LinearVariableUnavailableInSelect" for e in errs)


# ---------------------------------------------------------------------------
# Substitution preserves typability
# ---------------------------------------------------------------------------


def _strip_binders(d: A.Definition):
    ty, body = d.declared_type, d.body
    binders: list[tuple[str, A.IndexSort]] = []
    while isinstance(ty, A.TForall) and isinstance(body, A.IdxAbs):
        if body.var != ty.var:
            body = dataclasses.replace(
                body,
                var=ty.var,
                body=subst_index_in_term({body.var: A.IVar(ty.var)}, body.body),
            )
        binders.append((ty.var, ty.sort))
        ty, body = ty.body, body.body
    return binders, ty, body


def _random_instance(d: A.Definition, rng: random.Random) -> A.Definition:
    """Apply a random sort-preserving index substitution to a definition's
    top-level index binders and rebuild it."""
    binders, ty, body = _strip_binders(d)
    zeta: dict[str, A.IndexTerm] = {}
    fresh: list[tuple[str, A.IndexSort]] = []
    for var, sort in binders:
        if sort is A.IndexSort.TIME and rng.random() < 0.5:
            zeta[var] = A.ILit(rng.randrange(0, 6))
        else:
            new = f"{var}_{rng.randrange(10**6)}"
            zeta[var] = A.IVar(new)
            fresh.append((new, sort))
    ty = A.subst_index_in_type(zeta, ty)
    body = subst_index_in_term(zeta, body)
    for new, sort in reversed(fresh):
        ty = A.TForall(new, sort, ty)
        body = A.IdxAbs(new, sort, body)
    return dataclasses.replace(d, declared_type=ty, body=body)


@pytest.mark.parametrize("path", POSITIVE)
def test_substitution_preserves_typability(path: str):
    rng = random.Random(hash(path) & 0xFFFF)
    base = checked(path)
    assert base.ok
    prog = parser.desugar(parser.parse(open(path).read()))
    for _ in range(100):
        target = rng.choice(prog.definitions)
        variant = _random_instance(target, rng)
        defs = [variant if d.name == target.name else d for d in prog.definitions]
        result = typecheck.check_program(A.SourceProgram(defs, prog.entry))
        assert result.ok, (target.name, result.errors[:2])
