from __future__ import annotations

import json

import pytest

from lwidget import runtime
from lwidget.errors import TraceTargetInvalid
from lwidget.runtime import RunResult, TiePolicy, conformance, parse_trace, run
from lwidget.semantics import Stimulus, render_state

from conftest import checked, corpus_path


def program_of(name: str):
    result = checked(corpus_path(name))
    assert result.ok, result.errors
    return result.program


def clicks(*times: int, widget: int = 0) -> list[Stimulus]:
    return [Stimulus(t, widget, "click") for t in times]


# ---------------------------------------------------------------------------
# Trace parsing
# ---------------------------------------------------------------------------


class TestParseTrace:
    def test_accepts_clicks_and_keypresses(self):
        lines = [
            '{"t": 1, "widget": 0, "kind": "click"}',
            '{"t": 3, "widget": 1, "kind": "keypress", "char": "a"}',
        ]
        assert parse_trace(lines) == [
            Stimulus(1, 0, "click"),
            Stimulus(3, 1, "keypress", "a"),
        ]

    def test_blank_lines_are_skipped(self):
        assert parse_trace(["", '{"t": 1, "widget": 0, "kind": "click"}', "  "]) == clicks(1)

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            "[1, 2]",
            '{"t": 0, "widget": 0, "kind": "click"}',  # events start at 1
            '{"t": 1.5, "widget": 0, "kind": "click"}',
            '{"t": 1, "widget": -1, "kind": "click"}',
            '{"t": 1, "widget": 0, "kind": "hover"}',
            '{"t": 1, "widget": 0, "kind": "keypress"}',  # missing char
            '{"t": 1, "widget": 0, "kind": "keypress", "char": "ab"}',
            '{"t": 1, "widget": 0, "kind": "click", "char": "a"}',
            '{"t": 1, "widget": 0, "kind": "click", "extra": 1}',
        ],
    )
    def test_invalid_records_rejected(self, line: str):
        with pytest.raises(TraceTargetInvalid):
            parse_trace([line])

    def test_times_must_be_nondecreasing(self):
        lines = [
            '{"t": 5, "widget": 0, "kind": "click"}',
            '{"t": 3, "widget": 0, "kind": "click"}',
        ]
        with pytest.raises(TraceTargetInvalid):
            parse_trace(lines)

    def test_equal_times_are_allowed(self):
        lines = [
            '{"t": 2, "widget": 0, "kind": "click"}',
            '{"t": 2, "widget": 0, "kind": "keypress", "char": "x"}',
        ]
        assert len(parse_trace(lines)) == 2


# ---------------------------------------------------------------------------
# Running against a trace
# ---------------------------------------------------------------------------


class TestRun:
    def test_click_writes_set_color_at_click_time(self):
        prog = program_of("turn_red.lw")
        r = run(prog, 8, clicks(5))
        doc = json.loads(r.canonical)
        assert doc["log"] == [[0, "onClick"], [5, "setColor", "Red"]]

    def test_no_click_leaves_registration_only(self):
        prog = program_of("turn_red.lw")
        r = run(prog, 8, [])
        assert json.loads(r.canonical)["log"] == [[0, "onClick"]]

    def test_stimulus_beyond_horizon_is_ignored(self):
        prog = program_of("turn_red.lw")
        r = run(prog, 4, clicks(9))
        assert json.loads(r.canonical)["log"] == [[0, "onClick"]]

    def test_keep_turning_red_rearms(self):
        prog = program_of("keep_turning_red.lw")
        r = run(prog, 8, clicks(2, 6))
        assert render_state(r.value, 6) == {0: "Red"}
        log = json.loads(r.canonical)["log"]
        assert [2, "setColor", "Red"] in log and [6, "setColor", "Red"] in log
        # each click re-registers the handler
        assert sum(1 for e in log if e[1] == "onClick") == 3

    def test_determinism_bit_identical(self):
        prog = program_of("change_color.lw")
        trace = [Stimulus(2, 0, "click"), Stimulus(2, 0, "keypress", "a")]
        a = run(prog, 6, trace, TiePolicy.SEEDED, seed=11)
        b = run(prog, 6, trace, TiePolicy.SEEDED, seed=11)
        assert a.canonical == b.canonical
        assert a.steps == b.steps
        assert a.choices == b.choices

    def test_unknown_widget_raises(self):
        prog = program_of("turn_red.lw")
        with pytest.raises(TraceTargetInvalid):
            run(prog, 8, clicks(2, widget=7))

    def test_unmatched_stimulus_on_known_widget_is_reported_dropped(self):
        prog = program_of("turn_red.lw")
        r = run(prog, 8, clicks(2, 5))
        assert [s.t for s in r.fired] == [2]
        assert [s.t for s in r.dropped] == [5]

    def test_result_shape(self):
        prog = program_of("turn_red.lw")
        r = run(prog, 8, clicks(2))
        assert isinstance(r, RunResult)
        assert r.steps > 0
        assert r.choices == []


class TestTiePolicies:
    @pytest.fixture()
    def tie_trace(self):
        return [Stimulus(2, 0, "click"), Stimulus(2, 0, "keypress", "a")]

    def test_left_and_right_differ(self, tie_trace):
        prog = program_of("change_color.lw")
        left = run(prog, 6, tie_trace, TiePolicy.LEFT)
        right = run(prog, 6, tie_trace, TiePolicy.RIGHT)
        assert left.canonical != right.canonical
        assert left.choices == [(2, "Left")]
        assert right.choices == [(2, "Right")]

    def test_seeded_choices_are_logged(self, tie_trace):
        prog = program_of("change_color.lw")
        r = run(prog, 6, tie_trace, TiePolicy.SEEDED, seed=0)
        assert len(r.choices) == 1
        assert r.choices[0][0] == 2
        assert r.choices[0][1] in ("Left", "Right")

    def test_no_choice_logged_without_tie(self):
        prog = program_of("change_color.lw")
        trace = [Stimulus(1, 0, "click"), Stimulus(3, 0, "keypress", "a")]
        r = run(prog, 6, trace, TiePolicy.SEEDED)
        assert r.choices == []


class TestPushDiscipline:
    def test_steps_invariant_under_horizon_growth(self):
        prog = program_of("turn_red.lw")
        trace = clicks(2)
        baseline = run(prog, 4, trace).steps
        for h in (8, 100, 100000):
            assert run(prog, h, trace).steps == baseline

    def test_steps_invariant_for_recursive_program(self):
        prog = program_of("keep_turning_red.lw")
        trace = clicks(1, 2, 3)
        baseline = run(prog, 4, trace).steps
        for h in (8, 1000, 1000000):
            assert run(prog, h, trace).steps == baseline

    def test_idle_program_costs_the_same_at_any_horizon(self):
        prog = program_of("turn_red.lw")
        assert run(prog, 4, []).steps == run(prog, 10**9, []).steps


class TestBehavioralDistinction:
    def test_set_once_stays_blue_but_rearming_turns_red(self):
        prog = program_of("click_then_keep.lw")
        trace = clicks(1, 2, 3)
        set_once = run(prog, 8, trace, entry="setOnce")
        rearming = run(prog, 8, trace, entry="main")
        probe = 4
        assert render_state(set_once.value, probe) == {0: "Blue"}
        assert render_state(rearming.value, probe) == {0: "Red"}


# ---------------------------------------------------------------------------
# Conformance
# ---------------------------------------------------------------------------


class TestConformance:
    @pytest.mark.parametrize(
        "name", ["turn_red.lw", "keep_turning_red.lw", "change_color.lw", "double_set.lw"]
    )
    def test_replayed_traces_land_in_outcome_set(self, name: str):
        report = conformance(program_of(name), 3)
        assert report.ok, report.failures[:3]
        assert report.runs == 2 * report.outcomes

    def test_report_counts(self):
        report = conformance(program_of("turn_red.lw"), 4)
        assert report.outcomes == 5
        assert report.runs == 10
        assert report.failures == []
