"""Logbook semantics and exhaustive outcome enumeration.

A widget denotes a logbook: a set of timestamped commands. Programs are
evaluated without a global clock; every event source forks one branch per
admissible arrival time (plus one "never fires" branch), so evaluating a
program under a finite horizon yields the complete, finite set of observable
outcomes. Each outcome carries the stimulus trace that produces it, which is
what the event-loop runtime is checked against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Union

from . import ast as A
from .errors import CompatError, HorizonExceeded, StuckTerm

INF = float("inf")
Time = Union[int, float]

# ---------------------------------------------------------------------------
# Commands and logbooks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SetColor:
    color: str


@dataclass(frozen=True)
class OnClick:
    pass


@dataclass(frozen=True)
class OnKeypress:
    pass


@dataclass(frozen=True)
class Attach:
    child: int


Command = Union[SetColor, OnClick, OnKeypress, Attach]

Entry = tuple[Time, Command]
Logbook = frozenset[Entry]

EMPTY_LOG: Logbook = frozenset()


def compatible(e1: Entry, e2: Entry) -> bool:
    """Two entries clash only when they set different colors at the same time."""
    t1, c1 = e1
    t2, c2 = e2
    if t1 != t2:
        return True
    if isinstance(c1, SetColor) and isinstance(c2, SetColor):
        return c1.color == c2.color
    return True


def widget_union(a: Logbook, b: Logbook) -> Logbook:
    for e1 in a:
        t1 = e1[0]
        for e2 in b:
            if e2[0] == t1 and not compatible(e1, e2):
                raise CompatError(t1, repr(e1[1]), repr(e2[1]))
    return a | b


def shift(t: Time, log: Logbook) -> Logbook:
    """Drop everything before t and rebase the rest so t becomes 0."""
    if t == INF:
        return EMPTY_LOG
    return frozenset((tt - t, c) for tt, c in log if tt >= t)


def prefix_of(t: Time, log: Logbook) -> Logbook:
    return frozenset((tt, c) for tt, c in log if tt < t)


# ---------------------------------------------------------------------------
# Semantic values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitV:
    pass


@dataclass(frozen=True)
class PendingV:
    """Placeholder bound by eliminations whose witness time is infinite."""


@dataclass(frozen=True)
class WidgetV:
    ident: int
    log: Logbook = EMPTY_LOG
    children: tuple["WidgetV", ...] = ()

    def add(self, entry: Entry) -> "WidgetV":
        return replace(self, log=widget_union(self.log, frozenset({entry})))


@dataclass(frozen=True)
class PrefixV:
    ident: int
    log: Logbook
    cutoff: Time
    children: tuple[WidgetV, ...] = ()


@dataclass
class PairV:
    left: "Value"
    right: "Value"


@dataclass
class EventV:
    time: Time
    payload: Optional["Value"]  # None iff the event never fires


@dataclass
class AtV:
    time: Time
    payload: Optional["Value"]


@dataclass
class PackV:
    witness: Time  # an id or a time, depending on sort
    sort: A.IndexSort
    payload: "Value"


@dataclass
class FV:
    payload: "Value"


@dataclass
class GV:
    term: A.Term
    env: dict


@dataclass
class InlV:
    payload: "Value"


@dataclass
class InrV:
    payload: "Value"


@dataclass
class FoldV:
    payload: "Value"


@dataclass
class ClosV:
    var: str
    body: A.Term
    env: dict


@dataclass
class IdxClosV:
    var: str
    body: A.Term
    env: dict


@dataclass
class BuiltinV:
    name: str
    indices: tuple[Time, ...] = ()
    args: tuple["Value", ...] = ()


Value = Union[
    UnitV, PendingV, WidgetV, PrefixV, PairV, EventV, AtV, PackV, FV, GV,
    InlV, InrV, FoldV, ClosV, IdxClosV, BuiltinV, str,
]

_BUILTIN_ARITY: dict[str, tuple[int, int]] = {
    # name -> (index args, value args)
    "newWidget": (0, 1),
    "dropWidget": (1, 1),
    "setColor": (1, 1),
    "onClick": (1, 1),
    "onKeypress": (1, 1),
    "out": (0, 1),
    "into": (0, 1),
    "split": (2, 1),
    "join": (2, 1),
    "vAttach": (2, 2),
}


# ---------------------------------------------------------------------------
# Choice scripting: deterministic replay of one branch of the choice tree
# ---------------------------------------------------------------------------


class Chooser:
    def __init__(self, script: tuple[int, ...] = ()):
        self.script = script
        self.taken: list[int] = []
        self.pending: list[tuple[int, ...]] = []

    def choose(self, n: int) -> int:
        """Pick an option in [0, n); enqueue the siblings for later runs."""
        pos = len(self.taken)
        if pos < len(self.script):
            idx = self.script[pos]
        else:
            idx = 0
            prefix = tuple(self.taken)
            self.pending.extend(prefix + (j,) for j in range(1, n))
        self.taken.append(idx)
        return idx


def explore(run: Callable[[Chooser], object]) -> list:
    results = []
    stack: list[tuple[int, ...]] = [()]
    while stack:
        chooser = Chooser(stack.pop())
        results.append(run(chooser))
        stack.extend(chooser.pending)
    return results


# ---------------------------------------------------------------------------
# The evaluator
# ---------------------------------------------------------------------------


@dataclass
class Stimulus:
    t: Time
    widget: int
    kind: str  # click | keypress
    char: Optional[str] = None

    def to_json(self) -> dict:
        d = {"t": self.t, "widget": self.widget, "kind": self.kind}
        if self.char is not None:
            d["char"] = self.char
        return d


ERROR_OUTCOME = json.dumps({"error": "IncompatibleCommands"}, sort_keys=True, separators=(",", ":"))


@dataclass
class Outcome:
    value: Optional["Value"]
    trace: list[Stimulus]
    canonical: str  # canonical JSON of the id-renamed value


class Evaluator:
    def __init__(
        self,
        program: A.SourceProgram,
        horizon: int,
        chooser: Chooser,
        alphabet: tuple[str, ...] = ("a",),
    ):
        self.defs = {d.name: d.body for d in program.definitions}
        self.horizon = horizon
        self.chooser = chooser
        self.alphabet = alphabet
        self.trace: list[Stimulus] = []
        self.next_id = 0
        # Frame coordinates: times inside a delayed body are relative to the
        # frame; `base` recovers absolute time for the stimulus trace.
        self.now: Time = 0
        self.lo: Time = 1
        self.hi: Time = horizon
        self.base: Time = 0

    # -- frames -------------------------------------------------------------

    def _in_frame(self, now, lo, hi, base, f):
        saved = (self.now, self.lo, self.hi, self.base)
        self.now, self.lo, self.hi, self.base = now, lo, hi, base
        try:
            return f()
        finally:
            self.now, self.lo, self.hi, self.base = saved

    def fresh_id(self) -> int:
        self.next_id += 1
        return self.next_id - 1

    # -- events ---------------------------------------------------------------

    def _fork_arrival(self) -> Time:
        slots = [t for t in range(int(self.lo), int(self.hi) + 1)] if self.lo <= self.hi else []
        options = slots + [INF]
        return options[self.chooser.choose(len(options))]

    def _register(self, w: WidgetV, kind: str) -> tuple[WidgetV, EventV]:
        cmd: Command = OnClick() if kind == "click" else OnKeypress()
        w2 = w.add((self.now, cmd))
        k = self._fork_arrival()
        if k == INF:
            return w2, EventV(INF, None)
        if kind == "click":
            self.trace.append(Stimulus(self.base + k, w.ident, "click"))
            return w2, EventV(k, UnitV())
        ch = self.alphabet[self.chooser.choose(len(self.alphabet))]
        self.trace.append(Stimulus(self.base + k, w.ident, "keypress", ch))
        return w2, EventV(k, FV(ch))

    # -- builtin application ----------------------------------------------------

    def _apply_builtin(self, b: BuiltinV) -> Value:
        name = name_ = b.name
        if name_ == "newWidget":
            wid = self.fresh_id()
            return PackV(wid, A.IndexSort.ID, WidgetV(wid))
        if name == "dropWidget":
            return UnitV()
        if name == "setColor":
            pair = b.args[0]
            assert isinstance(pair, PairV)
            w, col = pair.left, pair.right
            assert isinstance(w, WidgetV) and isinstance(col, FV)
            return w.add((self.now, SetColor(col.payload)))
        if name == "onClick":
            w = b.args[0]
            assert isinstance(w, WidgetV)
            w2, ev = self._register(w, "click")
            return PairV(w2, ev)
        if name == "onKeypress":
            w = b.args[0]
            assert isinstance(w, WidgetV)
            w2, ev = self._register(w, "keypress")
            return PairV(w2, ev)
        if name == "out":
            ev = b.args[0]
            assert isinstance(ev, EventV)
            return PackV(ev.time, A.IndexSort.TIME, AtV(ev.time, ev.payload))
        if name == "into":
            pk = b.args[0]
            assert isinstance(pk, PackV) and isinstance(pk.payload, AtV)
            return EventV(pk.payload.time, pk.payload.payload)
        if name == "split":
            t = b.indices[1]
            w = b.args[0]
            assert isinstance(w, WidgetV)
            pre = PrefixV(w.ident, prefix_of(t, w.log), t, w.children)
            return PairV(pre, AtV(t, WidgetV(w.ident, shift(t, w.log)) if t != INF else None))
        if name == "join":
            t = b.indices[1]
            pair = b.args[0]
            assert isinstance(pair, PairV)
            pre, at = pair.left, pair.right
            assert isinstance(pre, PrefixV) and isinstance(at, AtV)
            if at.time == INF or at.payload is None:
                return WidgetV(pre.ident, pre.log, pre.children)
            w = at.payload
            assert isinstance(w, WidgetV)
            shifted = frozenset((tt + t, c) for tt, c in w.log)
            return WidgetV(pre.ident, widget_union(pre.log, shifted), pre.children + w.children)
        if name == "vAttach":
            parent, child = b.args
            assert isinstance(parent, WidgetV) and isinstance(child, WidgetV)
            w2 = parent.add((self.now, Attach(child.ident)))
            return replace(w2, children=w2.children + (child,))
        raise StuckTerm(f"unknown builtin {name!r}")

    # -- terms --------------------------------------------------------------------

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
            ev = self.eval(t.scrutinee, env)
            assert isinstance(ev, EventV)
            if ev.time == INF:
                return EventV(INF, None)
            run = lambda: self.eval(t.body, {**env, t.var: ev.payload})  # noqa: E731
            out = self._in_frame(ev.time, ev.time + 1, self.hi, self.base, run)
            assert isinstance(out, EventV)
            return out
        if isinstance(t, A.Delay):
            x = self.eval_index(t.time, env)
            if x == INF:
                return AtV(INF, None)
            if x > self.hi:
                raise HorizonExceeded(f"delayed computation at {self.base + x} exceeds horizon {self.horizon}")
            run = lambda: self.eval(t.body, env)  # noqa: E731
            v = self._in_frame(0, 1, self.hi - x, self.base + x, run)
            return AtV(x, v)
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
        e1 = self.eval(t.left, env)
        e2 = self.eval(t.right, env)
        assert isinstance(e1, EventV) and isinstance(e2, EventV)
        if e1.time == INF and e2.time == INF:
            return EventV(INF, None)
        if e1.time < e2.time:
            left = True
        elif e2.time < e1.time:
            left = False
        else:
            left = self.chooser.choose(2) == 0
        if left:
            k, var, body, other_term, other_ev = e1.time, t.left_var, t.left_body, t.right, e2
            payload = e1.payload
        else:
            k, var, body, other_term, other_ev = e2.time, t.right_var, t.right_body, t.left, e1
            payload = e2.payload
        benv = {**env, var: payload}
        if isinstance(other_term, A.Var):
            benv[other_term.name] = other_ev
        run = lambda: self.eval(body, benv)  # noqa: E731
        out = self._in_frame(k, k + 1, self.hi, self.base, run)
        assert isinstance(out, EventV)
        return out


# ---------------------------------------------------------------------------
# Canonical outcomes
# ---------------------------------------------------------------------------


def _time_json(t: Time):
    return "inf" if t == INF else int(t)


def _entry_json(t: Time, c: Command) -> list:
    if isinstance(c, SetColor):
        return [_time_json(t), "setColor", c.color]
    if isinstance(c, OnClick):
        return [_time_json(t), "onClick"]
    if isinstance(c, OnKeypress):
        return [_time_json(t), "onKeypress"]
    return [_time_json(t), "attach", c.child]


def log_to_json(log: Logbook) -> list:
    return sorted((_entry_json(t, c) for t, c in log), key=_entry_key)


def value_to_json(v: Value):
    if isinstance(v, UnitV):
        return "unit"
    if isinstance(v, PendingV):
        return "pending"
    if isinstance(v, str):
        return v
    if isinstance(v, WidgetV):
        return {
            "widget": v.ident,
            "log": log_to_json(v.log),
            "children": [value_to_json(c) for c in v.children],
        }
    if isinstance(v, PrefixV):
        return {
            "prefix": v.ident,
            "cutoff": _time_json(v.cutoff),
            "log": log_to_json(v.log),
        }
    if isinstance(v, PairV):
        return {"pair": [value_to_json(v.left), value_to_json(v.right)]}
    if isinstance(v, EventV):
        if v.time == INF:
            return {"event": "pending"}
        return {"event": {"at": _time_json(v.time), "value": value_to_json(v.payload)}}
    if isinstance(v, AtV):
        if v.time == INF or v.payload is None:
            return {"at": _time_json(v.time), "value": "pending"}
        return {"at": _time_json(v.time), "value": value_to_json(v.payload)}
    if isinstance(v, PackV):
        return {
            "pack": {
                "sort": v.sort.value,
                "witness": _time_json(v.witness),
                "value": value_to_json(v.payload),
            }
        }
    if isinstance(v, FV):
        return {"F": value_to_json(v.payload)}
    if isinstance(v, InlV):
        return {"inl": value_to_json(v.payload)}
    if isinstance(v, InrV):
        return {"inr": value_to_json(v.payload)}
    if isinstance(v, FoldV):
        return {"fold": value_to_json(v.payload)}
    if isinstance(v, (ClosV, IdxClosV, GV, BuiltinV)):
        return "closure"
    raise TypeError(v)


def _entry_key(e):
    t = e[0]
    rest = json.dumps(e[1:], sort_keys=True)
    return (1, 0, rest) if t == "inf" else (0, t, rest)


def rename_ids(doc, mapping: Optional[dict[int, int]] = None):
    """Quotient a canonical document by widget-identifier renaming: relabel
    ids 0,1,2,... in order of first appearance."""
    if mapping is None:
        mapping = {}

    def fresh(i: int) -> int:
        if i not in mapping:
            mapping[i] = len(mapping)
        return mapping[i]

    def go(d):
        if isinstance(d, list):
            if len(d) == 3 and d[1] == "attach" and isinstance(d[2], int):
                return [d[0], "attach", fresh(d[2])]
            return [go(x) for x in d]
        if isinstance(d, dict):
            out = {}
            for k, v in d.items():
                if k in ("widget", "prefix") and isinstance(v, int):
                    out[k] = fresh(v)
                elif k == "pack" and isinstance(v, dict) and v.get("sort") == "Id":
                    out[k] = {**v, "witness": fresh(v["witness"]), "value": go(v["value"])}
                else:
                    out[k] = go(v)
            return out
        return d

    return go(doc)


def canonical_json(v: Value) -> str:
    return json.dumps(rename_ids(value_to_json(v)), sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Enumeration and rendering
# ---------------------------------------------------------------------------


def _sorted_trace(trace) -> tuple:
    return tuple(sorted(trace, key=lambda s: s.t))


def enumerate_outcomes(
    program: A.SourceProgram,
    horizon: int,
    alphabet: tuple[str, ...] = ("a",),
    entry: Optional[str] = None,
    entry_type: Optional[A.AnyType] = None,
) -> list[Outcome]:
    """Run every branch of the choice tree; outcomes are deduplicated up to
    widget-id renaming, keeping one representative trace per outcome."""
    name = entry or program.entry
    defn = program.get(name)
    ty = entry_type if entry_type is not None else defn.declared_type

    def one(chooser: Chooser) -> Outcome:
        ev = Evaluator(program, horizon, chooser, alphabet)
        seed_widget = None
        if _wants_widget(ty):
            seed_widget = WidgetV(ev.fresh_id())
        try:
            value = ev.eval(defn.body, {})
            value = _drive_with(ev, value, ty, seed_widget)
        except CompatError:
            # This combination of arrivals demands contradictory commands at
            # one instant; the composed logbook does not exist.
            return Outcome(None, _sorted_trace(ev.trace), ERROR_OUTCOME)
        return Outcome(value, _sorted_trace(ev.trace), canonical_json(value))

    raw = explore(one)
    seen: dict[str, Outcome] = {}
    for o in raw:
        if o.canonical not in seen:
            seen[o.canonical] = o
    return list(seen.values())


def _wants_widget(ty: Optional[A.AnyType]) -> bool:
    while isinstance(ty, A.TForall):
        ty = ty.body
    return isinstance(ty, A.TLolli) and isinstance(ty.dom, A.TWidget)


def _drive_with(ev: Evaluator, value: Value, ty: Optional[A.AnyType], seed: Optional[WidgetV]) -> Value:
    while ty is not None:
        if isinstance(ty, A.TForall) and isinstance(value, IdxClosV):
            witness = seed.ident if (seed is not None and ty.sort is A.IndexSort.ID) else (
                ev.fresh_id() if ty.sort is A.IndexSort.ID else 0
            )
            value = ev.apply_index(value, witness)
            ty = ty.body
            continue
        if isinstance(ty, A.TLolli) and isinstance(ty.dom, A.TWidget):
            value = ev.apply(value, seed if seed is not None else WidgetV(ev.fresh_id()))
            seed = None
            ty = ty.cod
            continue
        if isinstance(ty, A.TLolli) and isinstance(ty.dom, A.TI):
            value = ev.apply(value, UnitV())
            ty = ty.cod
            continue
        break
    return value


def widget_snapshots(v: Value, t: Time) -> list[dict]:
    """Displayable widget tree at time t: one record per reachable widget with
    its current color, the event kinds it listens for, and nested children."""

    def of_widget(w) -> dict:
        color: tuple[Time, str] | None = None
        handlers: list[str] = []
        for tt, c in sorted(w.log, key=lambda e: e[0]):
            if tt > t:
                continue
            if isinstance(c, SetColor) and (color is None or tt >= color[0]):
                color = (tt, c.color)
            elif isinstance(c, OnClick):
                handlers.append("click")
            elif isinstance(c, OnKeypress):
                handlers.append("keypress")
        return {
            "id": w.ident,
            "color": color[1] if color else None,
            "handlers": handlers,
            "children": [of_widget(ch) for ch in w.children],
        }

    out: list[dict] = []

    def visit(v) -> None:
        if isinstance(v, (WidgetV, PrefixV)):
            out.append(of_widget(v))
        elif isinstance(v, PairV):
            visit(v.left)
            visit(v.right)
        elif isinstance(v, (EventV, AtV)):
            if v.payload is not None:
                visit(v.payload)
        elif isinstance(v, (PackV, FV, InlV, InrV, FoldV)):
            visit(v.payload)

    visit(v)
    return out


def render_state(v: Value, t: Time) -> dict[int, Optional[str]]:
    """The visible state at time t: for each widget reachable from the value,
    the color set by the latest setColor at or before t (None if unset)."""
    out: dict[int, Optional[str]] = {}

    def visit_widget(w) -> None:
        best: tuple[Time, str] | None = None
        for tt, c in w.log:
            if isinstance(c, SetColor) and tt <= t:
                if best is None or tt >= best[0]:
                    best = (tt, c.color)
        out[w.ident] = best[1] if best else None
        for ch in w.children:
            visit_widget(ch)

    def visit(v) -> None:
        if isinstance(v, (WidgetV, PrefixV)):
            visit_widget(v)
        elif isinstance(v, PairV):
            visit(v.left)
            visit(v.right)
        elif isinstance(v, (EventV, AtV)):
            if v.payload is not None:
                visit(v.payload)
        elif isinstance(v, (PackV, FV, InlV, InrV, FoldV)):
            visit(v.payload)

    visit(v)
    return out
