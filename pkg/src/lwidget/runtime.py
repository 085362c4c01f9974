"""Trace-driven event-loop runtime, and conformance checking against the
logbook semantics.

Where the logbook evaluator forks one branch per possible arrival time, this
runtime reads arrivals from an externally supplied stimulus trace. Each event
source registers a handler; a stimulus is delivered to the earliest-registered
live handler on its target widget that was registered strictly before the
stimulus time. Delivery is computed by a pure matching pass over the trace,
so work done is proportional to the program and the trace, never to the
horizon: an idle program costs nothing no matter how far the clock could run.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

from . import ast as A
from .errors import CompatError, HorizonExceeded, StuckTerm, TraceTargetInvalid
from .semantics import (
    ERROR_OUTCOME,
    INF,
    AtV,
    Attach,
    BuiltinV,
    ClosV,
    EventV,
    FV,
    FoldV,
    GV,
    IdxClosV,
    InlV,
    InrV,
    OnClick,
    OnKeypress,
    Outcome,
    PackV,
    PairV,
    PendingV,
    PrefixV,
    SetColor,
    Stimulus,
    Time,
    UnitV,
    Value,
    WidgetV,
    canonical_json,
    enumerate_outcomes,
    prefix_of,
    widget_union,
    _BUILTIN_ARITY,
)

# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

_KINDS = ("click", "keypress")


def parse_trace(lines: Iterable[str]) -> list[Stimulus]:
    """Parse a line-delimited JSON stimulus trace and validate each record."""
    out: list[Stimulus] = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceTargetInvalid(f"trace line {n}: invalid JSON ({e})")
        if not isinstance(doc, dict):
            raise TraceTargetInvalid(f"trace line {n}: expected an object")
        t = doc.get("t")
        widget = doc.get("widget")
        kind = doc.get("kind")
        char = doc.get("char")
        if not isinstance(t, int) or t < 1:
            raise TraceTargetInvalid(f"trace line {n}: 't' must be an integer >= 1")
        if not isinstance(widget, int) or widget < 0:
            raise TraceTargetInvalid(f"trace line {n}: 'widget' must be a non-negative integer")
        if kind not in _KINDS:
            raise TraceTargetInvalid(f"trace line {n}: 'kind' must be one of {_KINDS}")
        if kind == "keypress":
            if not isinstance(char, str) or len(char) != 1:
                raise TraceTargetInvalid(f"trace line {n}: keypress needs a single-character 'char'")
        elif char is not None:
            raise TraceTargetInvalid(f"trace line {n}: 'char' is only valid for keypress")
        unknown = set(doc) - {"t", "widget", "kind", "char"}
        if unknown:
            raise TraceTargetInvalid(f"trace line {n}: unknown keys {sorted(unknown)}")
        if out and t < out[-1].t:
            raise TraceTargetInvalid(f"trace line {n}: times must be nondecreasing")
        out.append(Stimulus(t, widget, kind, char))
    return out


def load_trace(path: str) -> list[Stimulus]:
    with open(path, encoding="utf-8") as f:
        return parse_trace(f)


# ---------------------------------------------------------------------------
# Handlers and tie policies
# ---------------------------------------------------------------------------


@dataclass
class Handler:
    seq: int
    widget: int
    kind: str
    reg_time: Time


@dataclass
class EventRefV:
    """An event whose arrival is determined by the stimulus trace."""

    handler: Handler


class TiePolicy:
    LEFT = "left"
    RIGHT = "right"
    SEEDED = "seeded"


@dataclass
class RunResult:
    value: Value
    canonical: str
    steps: int
    fired: list[Stimulus]
    dropped: list[Stimulus]
    choices: list[tuple[Time, str]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# The runtime
# ---------------------------------------------------------------------------


class Runtime:
    def __init__(
        self,
        program: A.SourceProgram,
        horizon: int,
        stimuli: list[Stimulus],
        tie_policy: str = TiePolicy.LEFT,
        seed: int = 0,
    ):
        self.defs = {d.name: d.body for d in program.definitions}
        self.horizon = horizon
        self.stimuli = sorted(stimuli, key=lambda s: s.t)
        self.tie_policy = tie_policy
        self.rng = random.Random(seed)
        self.handlers: list[Handler] = []
        self.choices: list[tuple[Time, str]] = []
        self.minted: set[int] = set()
        self.steps = 0
        self.next_id = 0
        self.now: Time = 0
        self.base: Time = 0

    # -- identifiers and frames ------------------------------------------------

    def fresh_id(self) -> int:
        wid = self.next_id
        self.next_id += 1
        self.minted.add(wid)
        return wid

    def _in_frame(self, now: Time, base: Time, f):
        saved = (self.now, self.base)
        self.now, self.base = now, base
        try:
            return f()
        finally:
            self.now, self.base = saved

    # -- delivery ------------------------------------------------------------------

    def _match(self) -> dict[int, Stimulus]:
        """Assign each stimulus, in time order, to the earliest-registered
        live handler of the right widget and kind. Pure in the runtime state:
        called again after more handlers exist, earlier assignments persist,
        because later-registered handlers never take a stimulus from an
        earlier one."""
        assigned: dict[int, Stimulus] = {}
        for st in self.stimuli:
            if st.t > self.horizon:
                continue
            candidates = [
                h
                for h in self.handlers
                if h.widget == st.widget and h.kind == st.kind and h.seq not in assigned and st.t > h.reg_time
            ]
            if candidates:
                assigned[min(candidates, key=lambda h: h.seq).seq] = st
        return assigned

    def resolve(self, ev: Value) -> EventV:
        if isinstance(ev, EventV):
            return ev
        if not isinstance(ev, EventRefV):
            raise StuckTerm(f"expected an event, got {type(ev).__name__}")
        st = self._match().get(ev.handler.seq)
        if st is None:
            return EventV(INF, None)
        payload: Value = UnitV() if st.kind == "click" else FV(st.char)
        return EventV(st.t - self.base, payload)

    def _register(self, w: WidgetV, kind: str) -> tuple[WidgetV, EventRefV]:
        cmd = OnClick() if kind == "click" else OnKeypress()
        w2 = w.add((self.base + self.now, cmd))
        h = Handler(len(self.handlers), w.ident, kind, self.base + self.now)
        self.handlers.append(h)
        return w2, EventRefV(h)

    # -- builtins -------------------------------------------------------------------

    def _apply_builtin(self, b: BuiltinV) -> Value:
        name = b.name
        if name == "newWidget":
            wid = self.fresh_id()
            return PackV(wid, A.IndexSort.ID, WidgetV(wid))
        if name == "dropWidget":
            return UnitV()
        if name == "setColor":
            pair = b.args[0]
            assert isinstance(pair, PairV)
            w, col = pair.left, pair.right
            assert isinstance(w, WidgetV) and isinstance(col, FV)
            return w.add((self.base + self.now, SetColor(col.payload)))
        if name == "onClick":
            w = b.args[0]
            assert isinstance(w, WidgetV)
            return PairV(*self._register(w, "click"))
        if name == "onKeypress":
            w = b.args[0]
            assert isinstance(w, WidgetV)
            return PairV(*self._register(w, "keypress"))
        if name == "out":
            ev = self.resolve(b.args[0])
            return PackV(ev.time, A.IndexSort.TIME, AtV(ev.time, ev.payload))
        if name == "into":
            pk = b.args[0]
            assert isinstance(pk, PackV) and isinstance(pk.payload, AtV)
            return EventV(pk.payload.time, pk.payload.payload)
        if name == "split":
            t = b.indices[1]
            w = b.args[0]
            assert isinstance(w, WidgetV)
            # Logbook times are absolute here, so splitting and rejoining is
            # pure bookkeeping: both halves view the same log.
            pre = PrefixV(w.ident, prefix_of(self.base + t, w.log), t, w.children)
            return PairV(pre, AtV(t, w if t != INF else None))
        if name == "join":
            pair = b.args[0]
            assert isinstance(pair, PairV)
            pre, at = pair.left, pair.right
            assert isinstance(pre, PrefixV) and isinstance(at, AtV)
            if at.time == INF or at.payload is None:
                return WidgetV(pre.ident, pre.log, pre.children)
            w = at.payload
            assert isinstance(w, WidgetV)
            return WidgetV(pre.ident, widget_union(pre.log, w.log), pre.children + w.children)
        if name == "vAttach":
            parent, child = b.args
            assert isinstance(parent, WidgetV) and isinstance(child, WidgetV)
            w2 = parent.add((self.base + self.now, Attach(child.ident)))
            return replace(w2, children=w2.children + (child,))
        raise StuckTerm(f"unknown builtin {name!r}")

    # -- evaluation --------------------------------------------------------------------

    def apply(self, fn: Value, arg: Value) -> Value:
        if isinstance(fn, ClosV):
            return self.eval(fn.body, {**fn.env, fn.var: arg})
        if isinstance(fn, BuiltinV):
            fn = replace(fn, args=fn.args + (arg,))
            need_ix, need_args = _BUILTIN_ARITY[fn.name]
            if len(fn.indices) == need_ix and len(fn.args) == need_args:
                return self._apply_builtin(fn)
            return fn
        raise StuckTerm(f"applying non-function value {type(fn).__name__}")

    def apply_index(self, fn: Value, ix: Time) -> Value:
        if isinstance(fn, IdxClosV):
            return self.eval(fn.body, {**fn.env, fn.var: ix})
        if isinstance(fn, BuiltinV):
            return replace(fn, indices=fn.indices + (ix,))
        raise StuckTerm(f"index-applying non-polymorphic value {type(fn).__name__}")

    def eval_index(self, ix: A.IndexTerm, env: dict) -> Time:
        if isinstance(ix, A.IVar):
            if ix.name not in env:
                raise StuckTerm(f"unbound index variable {ix.name!r}")
            return env[ix.name]
        if isinstance(ix, A.ILit):
            return ix.value
        if isinstance(ix, A.IInf):
            return INF
        raise StuckTerm("unresolved index metavariable at evaluation time")

    def eval(self, t: A.Term, env: dict) -> Value:
        self.steps += 1
        if isinstance(t, A.Var):
            if t.name in env:
                return env[t.name]
            if t.name in _BUILTIN_ARITY:
                return BuiltinV(t.name)
            if t.name in self.defs:
                return self.eval(self.defs[t.name], {})
            raise StuckTerm(f"unbound variable {t.name!r}")
        if isinstance(t, A.Const):
            return t.value
        if isinstance(t, A.Unit):
            return UnitV()
        if isinstance(t, A.Lam):
            return ClosV(t.var, t.body, env)
        if isinstance(t, A.IdxAbs):
            return IdxClosV(t.var, t.body, env)
        if isinstance(t, A.App):
            return self.apply(self.eval(t.fn, env), self.eval(t.arg, env))
        if isinstance(t, A.IdxApp):
            return self.apply_index(self.eval(t.fn, env), self.eval_index(t.index, env))
        if isinstance(t, A.Pair):
            return PairV(self.eval(t.left, env), self.eval(t.right, env))
        if isinstance(t, A.LetPair):
            v = self.eval(t.scrutinee, env)
            assert isinstance(v, PairV)
            return self.eval(t.body, {**env, t.left_var: v.left, t.right_var: v.right})
        if isinstance(t, A.LetUnit):
            self.eval(t.scrutinee, env)
            return self.eval(t.body, env)
        if isinstance(t, A.Evt):
            return EventV(self.now, self.eval(t.body, env))
        if isinstance(t, A.LetEvt):
            ev = self.resolve(self.eval(t.scrutinee, env))
            if ev.time == INF:
                return EventV(INF, None)
            run = lambda: self.eval(t.body, {**env, t.var: ev.payload})  # noqa: E731
            out = self._in_frame(ev.time, self.base, run)
            return self.resolve(out)
        if isinstance(t, A.Delay):
            x = self.eval_index(t.time, env)
            if x == INF:
                return AtV(INF, None)
            if self.base + x > self.horizon:
                raise HorizonExceeded(f"delayed computation at {self.base + x} exceeds horizon {self.horizon}")
            run = lambda: self.eval(t.body, env)  # noqa: E731
            return AtV(x, self._in_frame(0, self.base + x, run))
        if isinstance(t, A.LetAt):
            at = self.eval(t.scrutinee, env)
            assert isinstance(at, AtV)
            payload = at.payload if at.payload is not None else PendingV()
            return self.eval(t.body, {**env, t.var: payload})
        if isinstance(t, A.LetUnitAt):
            self.eval(t.scrutinee, env)
            return self.eval(t.body, env)
        if isinstance(t, A.LetPairAt):
            v = self.eval(t.scrutinee, env)
            if isinstance(v, PendingV):
                return self.eval(t.body, {**env, t.left_var: PendingV(), t.right_var: PendingV()})
            assert isinstance(v, PairV)
            return self.eval(t.body, {**env, t.left_var: v.left, t.right_var: v.right})
        if isinstance(t, A.GIntro):
            return GV(t.body, env)
        if isinstance(t, A.RunG):
            g = self.eval(t.body, env)
            assert isinstance(g, GV)
            return self.eval(g.term, g.env)
        if isinstance(t, A.FIntro):
            return FV(self.eval(t.body, env))
        if isinstance(t, A.LetF):
            v = self.eval(t.scrutinee, env)
            assert isinstance(v, FV)
            return self.eval(t.body, {**env, t.var: v.payload})
        if isinstance(t, A.Pack):
            sort = t.sort if t.sort is not None else A.IndexSort.TIME
            return PackV(self.eval_index(t.index, env), sort, self.eval(t.body, env))
        if isinstance(t, A.LetPack):
            v = self.eval(t.scrutinee, env)
            assert isinstance(v, PackV)
            return self.eval(t.body, {**env, t.index_var: v.witness, t.var: v.payload})
        if isinstance(t, A.Select):
            return self._eval_select(t, env)
        if isinstance(t, A.Fold):
            return FoldV(self.eval(t.body, env))
        if isinstance(t, A.Unfold):
            v = self.eval(t.body, env)
            assert isinstance(v, FoldV)
            return v.payload
        if isinstance(t, A.Inl):
            return InlV(self.eval(t.body, env))
        if isinstance(t, A.Inr):
            return InrV(self.eval(t.body, env))
        if isinstance(t, A.Case):
            v = self.eval(t.scrutinee, env)
            if isinstance(v, InlV):
                return self.eval(t.left_body, {**env, t.left_var: v.payload})
            assert isinstance(v, InrV)
            return self.eval(t.right_body, {**env, t.right_var: v.payload})
        raise StuckTerm(f"cannot evaluate term form {type(t).__name__}")

    def _eval_select(self, t: A.Select, env: dict) -> Value:
        e1 = self.resolve(self.eval(t.left, env))
        e2 = self.resolve(self.eval(t.right, env))
        if e1.time == INF and e2.time == INF:
            return EventV(INF, None)
        if e1.time < e2.time:
            left = True
        elif e2.time < e1.time:
            left = False
        else:
            if self.tie_policy == TiePolicy.LEFT:
                left = True
            elif self.tie_policy == TiePolicy.RIGHT:
                left = False
            else:
                left = self.rng.random() < 0.5
            self.choices.append((self.base + e1.time, "Left" if left else "Right"))
        if left:
            k, var, body, other_term, other_ev, payload = e1.time, t.left_var, t.left_body, t.right, e2, e1.payload
        else:
            k, var, body, other_term, other_ev, payload = e2.time, t.right_var, t.right_body, t.left, e1, e2.payload
        benv = {**env, var: payload}
        if isinstance(other_term, A.Var):
            benv[other_term.name] = other_ev
        out = self._in_frame(k, self.base, lambda: self.eval(body, benv))
        return self.resolve(out)

    # -- finishing a run ----------------------------------------------------------------

    def _materialize(self, v: Value) -> Value:
        if isinstance(v, EventRefV):
            return self.resolve(v)
        if isinstance(v, PairV):
            return PairV(self._materialize(v.left), self._materialize(v.right))
        if isinstance(v, EventV):
            return v if v.payload is None else EventV(v.time, self._materialize(v.payload))
        if isinstance(v, AtV):
            return v if v.payload is None else AtV(v.time, self._materialize(v.payload))
        if isinstance(v, PackV):
            return replace(v, payload=self._materialize(v.payload))
        if isinstance(v, (FV, InlV, InrV, FoldV)):
            return replace(v, payload=self._materialize(v.payload))
        return v


def run(
    program: A.SourceProgram,
    horizon: int,
    stimuli: list[Stimulus],
    tie_policy: str = TiePolicy.LEFT,
    seed: int = 0,
    entry: Optional[str] = None,
    entry_type: Optional[A.AnyType] = None,
) -> RunResult:
    """Evaluate the entry point against a stimulus trace. Function-typed
    entries are applied to fresh widgets, mirroring outcome enumeration."""
    from .semantics import _drive_with, _wants_widget

    name = entry or program.entry
    defn = program.get(name)
    ty = entry_type if entry_type is not None else defn.declared_type
    rt = Runtime(program, horizon, stimuli, tie_policy, seed)
    seed_widget = WidgetV(rt.fresh_id()) if _wants_widget(ty) else None
    value = rt.eval(defn.body, {})
    value = _drive_with(rt, value, ty, seed_widget)
    value = rt._materialize(value)

    assigned = rt._match()
    taken = {id(st) for st in assigned.values()}
    fired, dropped = [], []
    for st in rt.stimuli:
        (fired if id(st) in taken else dropped).append(st)
    for st in dropped:
        if st.widget not in rt.minted:
            raise TraceTargetInvalid(
                f"stimulus at t={st.t} targets widget {st.widget}, which never existed"
            )
    return RunResult(value, canonical_json(value), rt.steps, fired, dropped, rt.choices)


# ---------------------------------------------------------------------------
# Conformance: replay every enumerated trace through the runtime
# ---------------------------------------------------------------------------


@dataclass
class ConformanceFailure:
    trace: list[Stimulus]
    tie_policy: str
    got: str


@dataclass
class ConformanceReport:
    outcomes: int
    runs: int
    failures: list[ConformanceFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def conformance(
    program: A.SourceProgram,
    horizon: int,
    alphabet: tuple[str, ...] = ("a",),
    entry: Optional[str] = None,
    entry_type: Optional[A.AnyType] = None,
) -> ConformanceReport:
    """For every outcome the logbook semantics enumerates, replay its stimulus
    trace through the runtime under both tie policies; each replay must land
    on some enumerated outcome (up to widget-id renaming)."""
    outcomes = enumerate_outcomes(program, horizon, alphabet, entry, entry_type)
    allowed = {o.canonical for o in outcomes}
    report = ConformanceReport(outcomes=len(outcomes), runs=0)
    for o in outcomes:
        for policy in (TiePolicy.LEFT, TiePolicy.RIGHT):
            try:
                got = run(program, horizon, list(o.trace), policy, entry=entry, entry_type=entry_type).canonical
            except CompatError:
                got = ERROR_OUTCOME
            report.runs += 1
            if got not in allowed:
                report.failures.append(ConformanceFailure(o.trace, policy, got))
    return report
