"""Typechecker for the three judgments: indices, Cartesian terms, linear terms.

Linear checking uses the leftover-context discipline: the context is threaded
through with usage marks instead of being split nondeterministically, which is
the standard algorithmic presentation of the declarative splitting rules.

Eliminations synthesize, introductions check; index arguments omitted in the
source are inference metavariables solved by first-order unification.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from . import ast as A
from .api import API_TABLE
from .errors import (
    LINEAR_VARIABLE_REUSED,
    LINEAR_VARIABLE_UNAVAILABLE_IN_SELECT,
    LINEAR_VARIABLE_UNUSED,
    NONEMPTY_LINEAR_CONTEXT_UNDER_G,
    SORT_MISMATCH,
    TIME_MISMATCH,
    TYPE_MISMATCH,
    UNBOUND_VARIABLE,
    UNSOLVED_INDEX_METAVARIABLE,
    LwTypeError,
    NO_SPAN,
    Span,
)
from .pretty import pp_index, pp_type

# ---------------------------------------------------------------------------
# Contexts
# ---------------------------------------------------------------------------


@dataclass
class IndexContext:
    entries: list[tuple[str, A.IndexSort]] = field(default_factory=list)

    def lookup(self, name: str) -> Optional[A.IndexSort]:
        for n, s in reversed(self.entries):
            if n == name:
                return s
        return None

    def extend(self, name: str, sort: A.IndexSort) -> None:
        self.entries.append((name, sort))

    def pop(self) -> None:
        self.entries.pop()

    def names(self) -> set[str]:
        return {n for n, _ in self.entries}


@dataclass
class CartContext:
    entries: list[tuple[str, A.CartType]] = field(default_factory=list)

    def lookup(self, name: str) -> Optional[A.CartType]:
        for n, t in reversed(self.entries):
            if n == name:
                return t
        return None


@dataclass
class LinEntry:
    name: str
    type: A.LinType
    time: A.IndexTerm
    used: bool = False
    span: Span = NO_SPAN


@dataclass
class LinearContext:
    entries: list[LinEntry] = field(default_factory=list)

    def lookup(self, name: str) -> Optional[LinEntry]:
        for e in reversed(self.entries):
            if e.name == name:
                return e
        return None

    def names(self) -> set[str]:
        return {e.name for e in self.entries}

    def snapshot(self) -> list[tuple[str, str, str, bool]]:
        return [(e.name, pp_type(e.type), pp_index(e.time), e.used) for e in self.entries]


@dataclass
class DerivEvent:
    """One recorded step of a derivation, for golden tests and audits."""

    kind: str  # bind | bind-index | consume | discharge | delay | apply | select-branch
    line: int
    name: str = ""
    type: str = ""
    time: str = ""
    rule: str = ""
    consumed: list[tuple[str, str, str]] = field(default_factory=list)
    context: list[tuple[str, str, str, bool]] = field(default_factory=list)
    scope: int = 0  # id of the linear scope the event happened in


@dataclass
class CheckResult:
    types: dict[str, A.AnyType]
    errors: list[LwTypeError]
    derivations: dict[str, list[DerivEvent]]
    program: Optional[A.SourceProgram] = None  # bodies with all index metas resolved

    @property
    def ok(self) -> bool:
        return not self.errors


# ---------------------------------------------------------------------------
# Index operations
# ---------------------------------------------------------------------------


class Solutions:
    """Union-find-free metavariable store (indices have no structure)."""

    def __init__(self) -> None:
        self.assignments: dict[int, A.IndexTerm] = {}

    def zonk(self, ix: A.IndexTerm) -> A.IndexTerm:
        while isinstance(ix, A.IMeta) and ix.uid in self.assignments:
            ix = self.assignments[ix.uid]
        return ix

    def zonk_type(self, ty: A.AnyType) -> A.AnyType:
        return _map_type_indices(ty, self.zonk)


def _map_type_indices(ty: A.AnyType, f) -> A.AnyType:
    if isinstance(ty, (A.TI, A.CUnit, A.CBase, A.TVarRef)):
        return ty
    if isinstance(ty, A.CArrow):
        return A.CArrow(_map_type_indices(ty.dom, f), _map_type_indices(ty.cod, f))
    if isinstance(ty, A.CG):
        return A.CG(_map_type_indices(ty.body, f))
    if isinstance(ty, A.TTensor):
        return A.TTensor(_map_type_indices(ty.left, f), _map_type_indices(ty.right, f))
    if isinstance(ty, A.TPlus):
        return A.TPlus(_map_type_indices(ty.left, f), _map_type_indices(ty.right, f))
    if isinstance(ty, A.TLolli):
        return A.TLolli(_map_type_indices(ty.dom, f), _map_type_indices(ty.cod, f))
    if isinstance(ty, A.TDia):
        return A.TDia(_map_type_indices(ty.body, f))
    if isinstance(ty, A.TAt):
        return A.TAt(_map_type_indices(ty.body, f), f(ty.time))
    if isinstance(ty, A.TF):
        return A.TF(_map_type_indices(ty.body, f))
    if isinstance(ty, (A.TForall, A.TExists)):
        ctor = type(ty)
        return ctor(ty.var, ty.sort, _map_type_indices(ty.body, f))
    if isinstance(ty, A.TWidget):
        return A.TWidget(f(ty.ident))
    if isinstance(ty, A.TPrefix):
        return A.TPrefix(f(ty.ident), f(ty.time))
    if isinstance(ty, A.TNu):
        return A.TNu(ty.var, _map_type_indices(ty.body, f))
    raise TypeError(ty)


def index_sort_of(ix: A.IndexTerm, theta: IndexContext) -> Optional[A.IndexSort]:
    if isinstance(ix, A.IVar):
        return theta.lookup(ix.name)
    if isinstance(ix, A.ILit):
        return ix.sort
    if isinstance(ix, A.IInf):
        return A.IndexSort.TIME
    if isinstance(ix, A.IMeta):
        return ix.sort
    return None


# ---------------------------------------------------------------------------
# The checker
# ---------------------------------------------------------------------------

def _rename(ix: A.IndexTerm, env: dict[str, str]) -> A.IndexTerm:
    if isinstance(ix, A.IVar) and ix.name in env:
        return A.IVar(env[ix.name])
    return ix


# Lookup reasons for names hidden from the current linear scope.
_HIDDEN_SELECT = "select"
_HIDDEN_G = "g-body"


class Checker:
    def __init__(self, signatures: Optional[dict[str, A.AnyType]] = None):
        self.signatures = signatures or {}
        self.solutions = Solutions()
        self.theta = IndexContext()
        self.gamma = CartContext()
        self.delta = LinearContext()
        self.now: A.IndexTerm = A.TIME_ZERO
        self.hidden: dict[str, str] = {}
        self.derivation: list[DerivEvent] = []
        self._scope_id = 0
        self._current_scope = 0

    # -- recording -------------------------------------------------------

    def _event(self, kind: str, span: Span, **kw) -> None:
        self.derivation.append(
            DerivEvent(
                kind=kind,
                line=span.line,
                context=self.delta.snapshot(),
                scope=self._current_scope,
                **kw,
            )
        )

    # -- index unification -------------------------------------------------

    def unify_index(self, a: A.IndexTerm, b: A.IndexTerm, span: Span, kind: str = TYPE_MISMATCH) -> bool:
        a = self.solutions.zonk(a)
        b = self.solutions.zonk(b)
        if isinstance(a, A.IMeta) and isinstance(b, A.IMeta) and a.uid == b.uid:
            return True
        if isinstance(a, A.IMeta):
            self.solutions.assignments[a.uid] = b
            return True
        if isinstance(b, A.IMeta):
            self.solutions.assignments[b.uid] = a
            return True
        if isinstance(a, A.IVar) and isinstance(b, A.IVar):
            return a.name == b.name
        if isinstance(a, A.ILit) and isinstance(b, A.ILit):
            return a.value == b.value
        if isinstance(a, A.IInf) and isinstance(b, A.IInf):
            return True
        return False

    def require_index_eq(self, a: A.IndexTerm, b: A.IndexTerm, span: Span, kind: str) -> None:
        if not self.unify_index(a, b, span, kind):
            raise LwTypeError(
                kind,
                f"index mismatch: {pp_index(self.solutions.zonk(a))} vs {pp_index(self.solutions.zonk(b))}",
                span,
            )

    # -- judgment: indices ---------------------------------------------------

    def check_index(self, ix: A.IndexTerm, sort: A.IndexSort, span: Span) -> None:
        ix = self.solutions.zonk(ix)
        if isinstance(ix, A.IVar):
            found = self.theta.lookup(ix.name)
            if found is None:
                raise LwTypeError(UNBOUND_VARIABLE, f"unbound index variable {ix.name!r}", span)
            if found is not sort:
                raise LwTypeError(SORT_MISMATCH, f"{ix.name} has sort {found}, expected {sort}", span)
            return
        if isinstance(ix, A.ILit):
            if ix.sort is not None and ix.sort is not sort:
                raise LwTypeError(SORT_MISMATCH, f"literal {ix.value} has sort {ix.sort}, expected {sort}", span)
            return
        if isinstance(ix, A.IMeta):
            if ix.sort is not sort:
                raise LwTypeError(SORT_MISMATCH, f"metavariable has sort {ix.sort}, expected {sort}", span)
            return
        if isinstance(ix, A.IInf):
            if sort is not A.IndexSort.TIME:
                raise LwTypeError(SORT_MISMATCH, "infinity has sort Time", span)
            return
        raise TypeError(ix)

    # -- type well-formedness -----------------------------------------------

    def check_type_wf(self, ty: A.AnyType, span: Span, tyvars: frozenset[str] = frozenset()) -> None:
        if isinstance(ty, (A.TI, A.CUnit, A.CBase)):
            return
        if isinstance(ty, A.TVarRef):
            if ty.name not in tyvars:
                raise LwTypeError(UNBOUND_VARIABLE, f"unbound type variable {ty.name!r}", span)
            return
        if isinstance(ty, A.CArrow):
            self.check_type_wf(ty.dom, span, tyvars)
            self.check_type_wf(ty.cod, span, tyvars)
            return
        if isinstance(ty, (A.CG, A.TDia, A.TF)):
            self.check_type_wf(ty.body, span, tyvars)
            return
        if isinstance(ty, (A.TTensor, A.TPlus)):
            self.check_type_wf(ty.left, span, tyvars)
            self.check_type_wf(ty.right, span, tyvars)
            return
        if isinstance(ty, A.TLolli):
            self.check_type_wf(ty.dom, span, tyvars)
            self.check_type_wf(ty.cod, span, tyvars)
            return
        if isinstance(ty, A.TAt):
            self.check_index(ty.time, A.IndexSort.TIME, span)
            self.check_type_wf(ty.body, span, tyvars)
            return
        if isinstance(ty, (A.TForall, A.TExists)):
            self.theta.extend(ty.var, ty.sort)
            try:
                self.check_type_wf(ty.body, span, tyvars)
            finally:
                self.theta.pop()
            return
        if isinstance(ty, A.TWidget):
            self.check_index(ty.ident, A.IndexSort.ID, span)
            return
        if isinstance(ty, A.TPrefix):
            self.check_index(ty.ident, A.IndexSort.ID, span)
            self.check_index(ty.time, A.IndexSort.TIME, span)
            return
        if isinstance(ty, A.TNu):
            if not _strictly_positive(ty.body, ty.var, positive=True):
                raise LwTypeError(TYPE_MISMATCH, f"nu body is not strictly positive in {ty.var!r}", span)
            self.check_type_wf(ty.body, span, tyvars | {ty.var})
            return
        raise TypeError(ty)

    # -- type unification -----------------------------------------------------

    def unify_type(self, a: A.AnyType, b: A.AnyType, span: Span, env: Optional[dict[str, str]] = None) -> None:
        env = env or {}
        if type(a) is not type(b):
            self._type_mismatch(a, b, span)
        if isinstance(a, (A.TI, A.CUnit)):
            return
        if isinstance(a, A.CBase):
            if a.name != b.name:
                self._type_mismatch(a, b, span)
            return
        if isinstance(a, A.CArrow):
            self.unify_type(a.dom, b.dom, span, env)
            self.unify_type(a.cod, b.cod, span, env)
            return
        if isinstance(a, (A.CG, A.TDia, A.TF)):
            self.unify_type(a.body, b.body, span, env)
            return
        if isinstance(a, (A.TTensor, A.TPlus)):
            self.unify_type(a.left, b.left, span, env)
            self.unify_type(a.right, b.right, span, env)
            return
        if isinstance(a, A.TLolli):
            self.unify_type(a.dom, b.dom, span, env)
            self.unify_type(a.cod, b.cod, span, env)
            return
        if isinstance(a, A.TAt):
            if not self.unify_index(_rename(a.time, env), b.time, span):
                self._type_mismatch(a, b, span)
            self.unify_type(a.body, b.body, span, env)
            return
        if isinstance(a, (A.TForall, A.TExists)):
            if a.sort is not b.sort:
                self._type_mismatch(a, b, span)
            self.unify_type(a.body, b.body, span, {**env, a.var: b.var})
            return
        if isinstance(a, A.TWidget):
            if not self.unify_index(_rename(a.ident, env), b.ident, span):
                self._type_mismatch(a, b, span)
            return
        if isinstance(a, A.TPrefix):
            if not self.unify_index(_rename(a.ident, env), b.ident, span) or not self.unify_index(
                _rename(a.time, env), b.time, span
            ):
                self._type_mismatch(a, b, span)
            return
        if isinstance(a, A.TNu):
            self.unify_type(a.body, b.body, span, {**env, a.var: b.var})
            return
        if isinstance(a, A.TVarRef):
            if env.get(a.name, a.name) != b.name:
                self._type_mismatch(a, b, span)
            return
        raise TypeError(a)

    def _type_mismatch(self, a: A.AnyType, b: A.AnyType, span: Span) -> None:
        za = pp_type(self.solutions.zonk_type(a))
        zb = pp_type(self.solutions.zonk_type(b))
        raise LwTypeError(TYPE_MISMATCH, f"type mismatch: {za} vs {zb}", span)

    # -- judgment: Cartesian terms ---------------------------------------------

    def cart_check(self, t: A.Term, expected: A.CartType) -> None:
        if isinstance(t, A.Lam):
            if not isinstance(expected, A.CArrow):
                raise LwTypeError(TYPE_MISMATCH, f"function against non-arrow {pp_type(expected)}", t.span)
            self.gamma.entries.append((t.var, expected.dom))
            try:
                self.cart_check(t.body, expected.cod)
            finally:
                self.gamma.entries.pop()
            return
        if isinstance(t, A.GIntro):
            if not isinstance(expected, A.CG):
                raise LwTypeError(TYPE_MISMATCH, f"G-term against {pp_type(expected)}", t.span)
            self._check_closed_linear(t.body, expected.body, t.span)
            return
        got = self.cart_synth(t)
        self.unify_type(expected, got, t.span)

    def cart_synth(self, t: A.Term) -> A.CartType:
        if isinstance(t, A.Var):
            found = self.gamma.lookup(t.name)
            if found is not None:
                return found
            sig = self.signatures.get(t.name)
            if sig is not None and A.is_cart_type(sig):
                return sig
            raise LwTypeError(UNBOUND_VARIABLE, f"unbound Cartesian variable {t.name!r}", t.span)
        if isinstance(t, A.Unit):
            return A.CUnit()
        if isinstance(t, A.Const):
            return t.base
        if isinstance(t, A.App):
            if isinstance(t.fn, A.Lam):
                arg_ty = self.cart_synth(t.arg)
                self.gamma.entries.append((t.fn.var, arg_ty))
                try:
                    return self.cart_synth(t.fn.body)
                finally:
                    self.gamma.entries.pop()
            fty = self.cart_synth(t.fn)
            if not isinstance(fty, A.CArrow):
                raise LwTypeError(TYPE_MISMATCH, f"applying non-function of type {pp_type(fty)}", t.span)
            self.cart_check(t.arg, fty.dom)
            return fty.cod
        if isinstance(t, A.GIntro):
            raise LwTypeError(TYPE_MISMATCH, "cannot infer a type for a G-introduction", t.span)
        if isinstance(t, A.Lam):
            raise LwTypeError(TYPE_MISMATCH, "cannot infer a type for an unannotated function", t.span)
        raise LwTypeError(TYPE_MISMATCH, f"term form not valid in the Cartesian fragment: {type(t).__name__}", t.span)

    def _check_closed_linear(self, t: A.Term, expected: A.LinType, span: Span) -> None:
        """G-introduction: check the body with an empty linear context."""
        saved_delta, saved_hidden, saved_now = self.delta, self.hidden, self.now
        hidden = dict(saved_hidden)
        for name in saved_delta.names():
            hidden[name] = _HIDDEN_G
        self.delta, self.hidden, self.now = LinearContext(), hidden, A.TIME_ZERO
        try:
            self.lin_check(t, expected)
        finally:
            self.delta, self.hidden, self.now = saved_delta, saved_hidden, saved_now

    # -- judgment: linear terms --------------------------------------------------

    def lin_check(self, t: A.Term, expected: A.LinType) -> None:
        expected = self._zonk_head(expected)
        if isinstance(t, A.Lam):
            if not isinstance(expected, A.TLolli):
                raise LwTypeError(TYPE_MISMATCH, f"function against non-lolli {pp_type(expected)}", t.span)
            self._bind_and_check(t.var, expected.dom, t.span, t.body, expected.cod)
            return
        if isinstance(t, A.IdxAbs):
            if not isinstance(expected, A.TForall):
                raise LwTypeError(TYPE_MISMATCH, f"index abstraction against {pp_type(expected)}", t.span)
            if expected.sort is not t.sort:
                raise LwTypeError(SORT_MISMATCH, f"binder sort {t.sort} does not match {expected.sort}", t.span)
            body_ty = A.subst_index_in_type({expected.var: A.IVar(t.var)}, expected.body)
            self.theta.extend(t.var, t.sort)
            try:
                self.lin_check(t.body, body_ty)
            finally:
                self.theta.pop()
            return
        if isinstance(t, A.Unit):
            if not isinstance(expected, A.TI):
                raise LwTypeError(TYPE_MISMATCH, f"unit against {pp_type(expected)}", t.span)
            return
        if isinstance(t, A.Pair):
            if not isinstance(expected, A.TTensor):
                raise LwTypeError(TYPE_MISMATCH, f"pair against {pp_type(expected)}", t.span)
            self.lin_check(t.left, expected.left)
            self.lin_check(t.right, expected.right)
            return
        if isinstance(t, A.Evt):
            if not isinstance(expected, A.TDia):
                raise LwTypeError(TYPE_MISMATCH, f"evt against {pp_type(expected)}", t.span)
            self.lin_check(t.body, expected.body)
            return
        if isinstance(t, A.Inl):
            if not isinstance(expected, A.TPlus):
                raise LwTypeError(TYPE_MISMATCH, f"inl against {pp_type(expected)}", t.span)
            self.lin_check(t.body, expected.left)
            return
        if isinstance(t, A.Inr):
            if not isinstance(expected, A.TPlus):
                raise LwTypeError(TYPE_MISMATCH, f"inr against {pp_type(expected)}", t.span)
            self.lin_check(t.body, expected.right)
            return
        if isinstance(t, A.Fold):
            if not isinstance(expected, A.TNu):
                raise LwTypeError(TYPE_MISMATCH, f"fold against {pp_type(expected)}", t.span)
            self.lin_check(t.body, A.unfold_nu(expected))
            return
        if isinstance(t, A.Pack):
            if not isinstance(expected, A.TExists):
                raise LwTypeError(TYPE_MISMATCH, f"pack against {pp_type(expected)}", t.span)
            self.check_index(t.index, expected.sort, t.span)
            t.sort = expected.sort
            self.lin_check(t.body, A.subst_index_in_type({expected.var: t.index}, expected.body))
            return
        if isinstance(t, A.FIntro):
            if not isinstance(expected, A.TF):
                raise LwTypeError(TYPE_MISMATCH, f"F-term against {pp_type(expected)}", t.span)
            self.cart_check(t.body, expected.body)
            return
        if isinstance(t, A.Delay):
            if not isinstance(expected, A.TAt):
                raise LwTypeError(TYPE_MISMATCH, f"delayed term against {pp_type(expected)}", t.span)
            self.check_index(t.time, A.IndexSort.TIME, t.span)
            self.require_index_eq(t.time, expected.time, t.span, TIME_MISMATCH)
            self._check_delayed(t, expected.body)
            return
        if isinstance(t, A.Select):
            if not isinstance(expected, A.TDia):
                raise LwTypeError(TYPE_MISMATCH, f"select against {pp_type(expected)}", t.span)
            self._check_select(t, expected)
            return
        if isinstance(t, A.Case):
            scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            if not isinstance(scrut_ty, A.TPlus):
                raise LwTypeError(TYPE_MISMATCH, f"case scrutinee has type {pp_type(scrut_ty)}", t.span)
            self._branch_check(t.left_var, scrut_ty.left, t.left_body, expected, t.span)
            self._branch_check(t.right_var, scrut_ty.right, t.right_body, expected, t.span)
            return
        if isinstance(t, (A.LetUnit, A.LetPair, A.LetEvt, A.LetAt, A.LetUnitAt, A.LetPairAt, A.LetF, A.LetPack)):
            self._check_let(t, expected)
            return
        if isinstance(t, A.App) and isinstance(t.fn, A.Lam):
            self._synth_app(t, expected)
            return
        got = self.lin_synth(t)
        self.unify_type(expected, got, t.span)

    def _branch_check(self, var: str, ty: A.LinType, body: A.Term, expected: A.LinType, span: Span) -> None:
        self._bind_and_check(var, ty, span, body, expected)

    def _bind_and_check(
        self,
        var: str,
        ty: A.LinType,
        span: Span,
        body: A.Term,
        expected: A.LinType,
        time: Optional[A.IndexTerm] = None,
    ) -> None:
        entry = LinEntry(var, ty, time if time is not None else self.now, span=span)
        self.delta.entries.append(entry)
        self._event("bind", span, name=var, type=pp_type(self.solutions.zonk_type(ty)), time=pp_index(entry.time))
        try:
            self.lin_check(body, expected)
        finally:
            self.delta.entries.remove(entry)
        if not entry.used:
            raise LwTypeError(LINEAR_VARIABLE_UNUSED, f"linear variable {var!r} is never used", span)

    def _check_delayed(self, t: A.Delay, body_expected: A.LinType) -> None:
        """The delay rule: check the body in the timestep named by the index;
        the Var rule then only admits entries annotated at that timestep."""
        before = {id(e): e.used for e in self.delta.entries}
        saved_now = self.now
        self.now = t.time
        try:
            self.lin_check(t.body, body_expected)
        finally:
            self.now = saved_now
        consumed = [
            (e.name, pp_type(self.solutions.zonk_type(e.type)), pp_index(self.solutions.zonk(e.time)))
            for e in self.delta.entries
            if e.used and not before.get(id(e), False)
        ]
        self._event("delay", t.span, time=pp_index(self.solutions.zonk(t.time)), consumed=consumed)

    def _check_select(self, t: A.Select, expected: Optional[A.TDia]) -> A.LinType:
        lty = self._zonk_head(self.lin_synth(t.left))
        rty = self._zonk_head(self.lin_synth(t.right))
        if not isinstance(lty, A.TDia) or not isinstance(rty, A.TDia):
            raise LwTypeError(
                TYPE_MISMATCH,
                f"select scrutinees must be events, got {pp_type(lty)} and {pp_type(rty)}",
                t.span,
            )
        left_other = t.right.name if isinstance(t.right, A.Var) else None
        right_other = t.left.name if isinstance(t.left, A.Var) else None
        result = expected
        for var, payload, other_name, other_ty, body in (
            (t.left_var, lty.body, left_other, rty, t.left_body),
            (t.right_var, rty.body, right_other, lty, t.right_body),
        ):
            branch_ty = self._select_branch(t, var, payload, other_name, other_ty, body, result)
            if result is None:
                branch_ty = self._zonk_head(branch_ty)
                if not isinstance(branch_ty, A.TDia):
                    raise LwTypeError(TYPE_MISMATCH, "select branches must produce events", t.span)
                result = branch_ty
        return result

    def _select_branch(
        self,
        t: A.Select,
        var: str,
        payload: A.LinType,
        other_name: Optional[str],
        other_ty: A.LinType,
        body: A.Term,
        expected: Optional[A.LinType],
    ) -> A.LinType:
        saved_delta, saved_hidden = self.delta, self.hidden
        hidden = dict(saved_hidden)
        for name in saved_delta.names():
            hidden[name] = _HIDDEN_SELECT
        entries = [LinEntry(var, payload, self.now, span=t.span)]
        if other_name is not None:
            hidden.pop(other_name, None)
            entries.append(LinEntry(other_name, other_ty, self.now, span=t.span))
        else:
            entries.append(LinEntry(f"<pending:{A.fresh_uid()}>", other_ty, self.now, span=t.span))
        self.delta, self.hidden = LinearContext(entries), hidden
        self._scope_id += 1
        saved_scope, self._current_scope = self._current_scope, self._scope_id
        self._event("select-branch", t.span, name=var, type=pp_type(self.solutions.zonk_type(payload)))
        try:
            if expected is not None:
                self.lin_check(body, expected)
                result = expected
            else:
                result = self.lin_synth(body)
            for e in self.delta.entries:
                if not e.used:
                    raise LwTypeError(
                        LINEAR_VARIABLE_UNUSED, f"linear variable {e.name!r} is never used in select branch", t.span
                    )
        finally:
            self.delta, self.hidden = saved_delta, saved_hidden
            self._current_scope = saved_scope
        return result

    def _check_let(self, t: A.Term, expected: Optional[A.LinType]) -> Optional[A.LinType]:
        """Handle all primitive let eliminations; `expected` may be None for
        the synthesis direction, in which case the body's type is returned."""
        if isinstance(t, A.LetUnit):
            self.lin_check(t.scrutinee, A.TI())
            return self._finish_body(t.body, expected)
        if isinstance(t, A.LetUnitAt):
            self.check_index(t.time, A.IndexSort.TIME, t.span)
            before = {id(e): e.used for e in self.delta.entries}
            saved_now = self.now
            self.now = t.time
            try:
                self.lin_check(t.scrutinee, A.TI())
            finally:
                self.now = saved_now
            consumed = [
                (e.name, pp_type(self.solutions.zonk_type(e.type)), pp_index(self.solutions.zonk(e.time)))
                for e in self.delta.entries
                if e.used and not before.get(id(e), False)
            ]
            self._event("discharge", t.span, rule="I_t-E", time=pp_index(self.solutions.zonk(t.time)), consumed=consumed)
            return self._finish_body(t.body, expected)
        if isinstance(t, A.LetPairAt):
            self.check_index(t.time, A.IndexSort.TIME, t.span)
            saved_now = self.now
            self.now = t.time
            try:
                scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            finally:
                self.now = saved_now
            if not isinstance(scrut_ty, A.TTensor):
                raise LwTypeError(TYPE_MISMATCH, f"timed pair elimination of {pp_type(scrut_ty)}", t.span)
            self._event("discharge", t.span, rule="Tensor_t-E", time=pp_index(self.solutions.zonk(t.time)))
            return self._bind_two(
                (t.left_var, scrut_ty.left, t.time), (t.right_var, scrut_ty.right, t.time), t.body, expected, t.span
            )
        if isinstance(t, A.LetPair):
            scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            if not isinstance(scrut_ty, A.TTensor):
                raise LwTypeError(TYPE_MISMATCH, f"pair elimination of {pp_type(scrut_ty)}", t.span)
            return self._bind_two(
                (t.left_var, scrut_ty.left, None), (t.right_var, scrut_ty.right, None), t.body, expected, t.span
            )
        if isinstance(t, A.LetEvt):
            scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            if not isinstance(scrut_ty, A.TDia):
                raise LwTypeError(TYPE_MISMATCH, f"event elimination of {pp_type(scrut_ty)}", t.span)
            return self._check_evt_continuation(t, scrut_ty.body, expected)
        if isinstance(t, A.LetAt):
            self.check_index(t.time, A.IndexSort.TIME, t.span)
            scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            if not isinstance(scrut_ty, A.TAt):
                raise LwTypeError(TYPE_MISMATCH, f"@-elimination of {pp_type(scrut_ty)}", t.span)
            self.require_index_eq(t.time, scrut_ty.time, t.span, TIME_MISMATCH)
            return self._bind_one(t.var, scrut_ty.body, t.time, t.body, expected, t.span)
        if isinstance(t, A.LetF):
            scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            if not isinstance(scrut_ty, A.TF):
                raise LwTypeError(TYPE_MISMATCH, f"F-elimination of {pp_type(scrut_ty)}", t.span)
            self.gamma.entries.append((t.var, scrut_ty.body))
            try:
                return self._finish_body(t.body, expected)
            finally:
                self.gamma.entries.pop()
        if isinstance(t, A.LetPack):
            scrut_ty = self._zonk_head(self.lin_synth(t.scrutinee))
            if not isinstance(scrut_ty, A.TExists):
                raise LwTypeError(TYPE_MISMATCH, f"existential elimination of {pp_type(scrut_ty)}", t.span)
            body_ty = A.subst_index_in_type({scrut_ty.var: A.IVar(t.index_var)}, scrut_ty.body)
            self.theta.extend(t.index_var, scrut_ty.sort)
            self._event("bind-index", t.span, name=t.index_var, type=str(scrut_ty.sort))
            try:
                result = self._bind_one(t.var, body_ty, None, t.body, expected, t.span)
            finally:
                self.theta.pop()
            if result is not None:
                escaped = A.free_index_vars_type(self.solutions.zonk_type(result)) & {t.index_var}
                if escaped:
                    raise LwTypeError(
                        TYPE_MISMATCH, f"existential witness {t.index_var!r} escapes its scope", t.span
                    )
            return result
        raise TypeError(t)

    def _bind_one(
        self,
        var: str,
        ty: A.LinType,
        time: Optional[A.IndexTerm],
        body: A.Term,
        expected: Optional[A.LinType],
        span: Span,
    ) -> Optional[A.LinType]:
        entry = LinEntry(var, ty, time if time is not None else self.now, span=span)
        self.delta.entries.append(entry)
        self._event("bind", span, name=var, type=pp_type(self.solutions.zonk_type(ty)), time=pp_index(entry.time))
        try:
            result = self._finish_body(body, expected)
        finally:
            self.delta.entries.remove(entry)
        if not entry.used:
            raise LwTypeError(LINEAR_VARIABLE_UNUSED, f"linear variable {var!r} is never used", span)
        return result

    def _bind_two(self, left, right, body, expected, span) -> Optional[A.LinType]:
        lv, lty, ltime = left
        rv, rty, rtime = right
        e1 = LinEntry(lv, lty, ltime if ltime is not None else self.now, span=span)
        e2 = LinEntry(rv, rty, rtime if rtime is not None else self.now, span=span)
        self.delta.entries.extend((e1, e2))
        for e in (e1, e2):
            self._event("bind", span, name=e.name, type=pp_type(self.solutions.zonk_type(e.type)), time=pp_index(e.time))
        try:
            result = self._finish_body(body, expected)
        finally:
            self.delta.entries.remove(e1)
            self.delta.entries.remove(e2)
        for e in (e1, e2):
            if not e.used:
                raise LwTypeError(LINEAR_VARIABLE_UNUSED, f"linear variable {e.name!r} is never used", e.span)
        return result

    def _check_evt_continuation(self, t: A.LetEvt, payload: A.LinType, expected: Optional[A.LinType]) -> A.LinType:
        """The event elimination checks its continuation in the singleton
        context holding only the payload binding."""
        if expected is not None:
            expected_z = self._zonk_head(expected)
            if not isinstance(expected_z, A.TDia):
                raise LwTypeError(TYPE_MISMATCH, f"event elimination must produce an event, not {pp_type(expected_z)}", t.span)
        saved_delta, saved_hidden = self.delta, self.hidden
        hidden = dict(saved_hidden)
        for name in saved_delta.names():
            hidden[name] = _HIDDEN_SELECT
        entry = LinEntry(t.var, payload, self.now, span=t.span)
        self.delta, self.hidden = LinearContext([entry]), hidden
        self._scope_id += 1
        saved_scope, self._current_scope = self._current_scope, self._scope_id
        self._event("bind", t.span, name=t.var, type=pp_type(self.solutions.zonk_type(payload)), time=pp_index(entry.time))
        try:
            if expected is not None:
                self.lin_check(t.body, expected)
                result = expected
            else:
                result = self.lin_synth(t.body)
                result_z = self._zonk_head(result)
                if not isinstance(result_z, A.TDia):
                    raise LwTypeError(TYPE_MISMATCH, "event continuation must produce an event", t.span)
            if not entry.used:
                raise LwTypeError(LINEAR_VARIABLE_UNUSED, f"linear variable {t.var!r} is never used", t.span)
        finally:
            self.delta, self.hidden = saved_delta, saved_hidden
            self._current_scope = saved_scope
        return result

    def _finish_body(self, body: A.Term, expected: Optional[A.LinType]) -> Optional[A.LinType]:
        if expected is not None:
            self.lin_check(body, expected)
            return None
        return self.lin_synth(body)

    # -- synthesis ---------------------------------------------------------------

    def lin_synth(self, t: A.Term) -> A.LinType:
        if isinstance(t, A.Var):
            return self._synth_var(t)
        if isinstance(t, A.App):
            return self._synth_app(t)
        if isinstance(t, A.IdxApp):
            fty = self._zonk_head(self.lin_synth(t.fn))
            if not isinstance(fty, A.TForall):
                raise LwTypeError(TYPE_MISMATCH, f"index application to non-quantified type {pp_type(fty)}", t.span)
            self.check_index(t.index, fty.sort, t.span)
            return A.subst_index_in_type({fty.var: t.index}, fty.body)
        if isinstance(t, A.Unit):
            return A.TI()
        if isinstance(t, A.Evt):
            return A.TDia(self.lin_synth(t.body))
        if isinstance(t, A.Pair):
            return A.TTensor(self.lin_synth(t.left), self.lin_synth(t.right))
        if isinstance(t, A.FIntro):
            return A.TF(self.cart_synth(t.body))
        if isinstance(t, A.RunG):
            gty = self.cart_synth(t.body)
            if not isinstance(gty, A.CG):
                raise LwTypeError(TYPE_MISMATCH, f"runG of non-G type {pp_type(gty)}", t.span)
            return gty.body
        if isinstance(t, A.Delay):
            self.check_index(t.time, A.IndexSort.TIME, t.span)
            before = {id(e): e.used for e in self.delta.entries}
            saved_now = self.now
            self.now = t.time
            try:
                body_ty = self.lin_synth(t.body)
            finally:
                self.now = saved_now
            consumed = [
                (e.name, pp_type(self.solutions.zonk_type(e.type)), pp_index(self.solutions.zonk(e.time)))
                for e in self.delta.entries
                if e.used and not before.get(id(e), False)
            ]
            self._event("delay", t.span, time=pp_index(self.solutions.zonk(t.time)), consumed=consumed)
            return A.TAt(body_ty, t.time)
        if isinstance(t, A.Unfold):
            ty = self._zonk_head(self.lin_synth(t.body))
            if not isinstance(ty, A.TNu):
                raise LwTypeError(TYPE_MISMATCH, f"unfold of non-recursive type {pp_type(ty)}", t.span)
            return A.unfold_nu(ty)
        if isinstance(t, A.Select):
            return self._check_select(t, None)
        if isinstance(t, (A.LetUnit, A.LetPair, A.LetEvt, A.LetAt, A.LetUnitAt, A.LetPairAt, A.LetF, A.LetPack)):
            result = self._check_let(t, None)
            assert result is not None
            return result
        if isinstance(t, (A.Lam, A.IdxAbs, A.Pack, A.Fold, A.Inl, A.Inr, A.Case, A.GIntro)):
            raise LwTypeError(
                TYPE_MISMATCH, f"cannot infer a type for {type(t).__name__}; add an annotation", t.span
            )
        if isinstance(t, A.Const):
            raise LwTypeError(TYPE_MISMATCH, "base constants live in the Cartesian fragment; wrap with F", t.span)
        if isinstance(t, A.LetPat):
            raise LwTypeError(TYPE_MISMATCH, "internal: pattern let reached the checker (desugar first)", t.span)
        raise TypeError(t)

    def _synth_var(self, t: A.Var) -> A.LinType:
        entry = self.delta.lookup(t.name)
        if entry is not None:
            if entry.used:
                raise LwTypeError(LINEAR_VARIABLE_REUSED, f"linear variable {t.name!r} used twice", t.span)
            if not self.unify_index(entry.time, self.now, t.span):
                raise LwTypeError(
                    TIME_MISMATCH,
                    f"{t.name!r} is available at time {pp_index(self.solutions.zonk(entry.time))}, "
                    f"but the current timestep is {pp_index(self.solutions.zonk(self.now))}",
                    t.span,
                )
            entry.used = True
            self._event(
                "consume",
                t.span,
                name=t.name,
                type=pp_type(self.solutions.zonk_type(entry.type)),
                time=pp_index(self.solutions.zonk(entry.time)),
            )
            return entry.type
        if t.name in self.hidden:
            if self.hidden[t.name] == _HIDDEN_G:
                raise LwTypeError(
                    NONEMPTY_LINEAR_CONTEXT_UNDER_G,
                    f"linear variable {t.name!r} from the enclosing context is not available under G",
                    t.span,
                )
            raise LwTypeError(
                LINEAR_VARIABLE_UNAVAILABLE_IN_SELECT,
                f"linear variable {t.name!r} from the enclosing context is not available here: "
                "event continuations cannot capture outer linear resources",
                t.span,
            )
        if t.name in API_TABLE:
            return API_TABLE[t.name]
        sig = self.signatures.get(t.name)
        if sig is not None and not A.is_cart_type(sig):
            return sig
        if sig is not None and A.is_cart_type(sig):
            raise LwTypeError(TYPE_MISMATCH, f"{t.name!r} is Cartesian; use runG or F to import it", t.span)
        raise LwTypeError(UNBOUND_VARIABLE, f"unbound variable {t.name!r}", t.span)

    def _synth_app(self, t: A.App, expected: Optional[A.LinType] = None) -> Optional[A.LinType]:
        if isinstance(t.fn, A.Lam):
            # A let-binding in redex form: synthesize the bound term, then
            # continue with the body.
            arg_ty = self.lin_synth(t.arg)
            return self._bind_one(t.fn.var, arg_ty, None, t.fn.body, expected, t.span)
        head = t.fn
        while isinstance(head, A.IdxApp):
            head = head.fn
        if isinstance(head, A.Var) and head.name == "out" and head is t.fn:
            arg_ty = self._zonk_head(self.lin_synth(t.arg))
            if not isinstance(arg_ty, A.TDia):
                raise LwTypeError(TYPE_MISMATCH, f"out expects an event, got {pp_type(arg_ty)}", t.span)
            var = f"k{A.fresh_uid()}"
            return A.TExists(var, A.IndexSort.TIME, A.TAt(arg_ty.body, A.IVar(var)))
        if isinstance(head, A.Var) and head.name == "into" and head is t.fn:
            arg_ty = self._zonk_head(self.lin_synth(t.arg))
            if (
                not isinstance(arg_ty, A.TExists)
                or arg_ty.sort is not A.IndexSort.TIME
                or not isinstance(arg_ty.body, A.TAt)
                or not isinstance(arg_ty.body.time, A.IVar)
                or arg_ty.body.time.name != arg_ty.var
            ):
                raise LwTypeError(
                    TYPE_MISMATCH, f"into expects a time-existential over an @-type, got {pp_type(arg_ty)}", t.span
                )
            payload = arg_ty.body.body
            if arg_ty.var in A.free_index_vars_type(payload):
                raise LwTypeError(TYPE_MISMATCH, "into: payload type depends on the witness time", t.span)
            return A.TDia(payload)

        before = {id(e): e.used for e in self.delta.entries}
        fty = self._zonk_head(self.lin_synth(t.fn))
        while isinstance(fty, A.TForall):
            # Auto-instantiate an omitted index argument.
            meta = A.fresh_meta(fty.sort)
            fty = self._zonk_head(A.subst_index_in_type({fty.var: meta}, fty.body))
        if not isinstance(fty, A.TLolli):
            raise LwTypeError(TYPE_MISMATCH, f"applying non-function of type {pp_type(fty)}", t.span)
        self.lin_check(t.arg, fty.dom)
        if isinstance(head, A.Var) and head.name not in self.delta.names():
            consumed = [
                (e.name, pp_type(self.solutions.zonk_type(e.type)), pp_index(self.solutions.zonk(e.time)))
                for e in self.delta.entries
                if e.used and not before.get(id(e), False)
            ]
            self._event("apply", t.span, name=head.name, consumed=consumed)
        return fty.cod

    def _zonk_head(self, ty: A.LinType) -> A.LinType:
        # Types contain metas only at index positions; nothing to chase at the
        # head, but zonking keeps error messages readable.
        return ty


# ---------------------------------------------------------------------------
# Metavariable audit
# ---------------------------------------------------------------------------


def _iter_term_indices(t: A.Term) -> Iterator[A.IndexTerm]:
    for f in t.__dataclass_fields__:
        v = getattr(t, f)
        if isinstance(v, (A.IVar, A.ILit, A.IInf, A.IMeta)):
            yield v
        elif isinstance(v, tuple(_TERM_NODE_TYPES)):
            yield from _iter_term_indices(v)


_TERM_NODE_TYPES = (
    A.Var, A.Const, A.Lam, A.App, A.Unit, A.LetUnit, A.Pair, A.LetPair, A.Evt,
    A.LetEvt, A.Delay, A.LetAt, A.LetUnitAt, A.LetPairAt, A.GIntro, A.RunG,
    A.FIntro, A.LetF, A.IdxAbs, A.IdxApp, A.Pack, A.LetPack, A.Select, A.Fold,
    A.Unfold, A.Inl, A.Inr, A.Case,
)


def _unsolved_metas(t: A.Term, solutions: Solutions) -> list[A.IMeta]:
    out = []
    for ix in _iter_term_indices(t):
        if isinstance(ix, A.IMeta):
            z = solutions.zonk(ix)
            if isinstance(z, A.IMeta):
                out.append(z)
    return out


# ---------------------------------------------------------------------------
# Term substitution (the three term-level substitution kinds share one engine)
# ---------------------------------------------------------------------------


def _pattern_term_vars(p: A.Pattern) -> set[str]:
    if isinstance(p, (A.PVar, A.PEvt, A.PF)):
        return {p.name}
    if isinstance(p, A.PPair):
        return _pattern_term_vars(p.left) | _pattern_term_vars(p.right)
    if isinstance(p, (A.PAt, A.PPack)):
        return _pattern_term_vars(p.inner)
    return set()


def _pattern_index_vars(p: A.Pattern) -> set[str]:
    if isinstance(p, A.PPack):
        return {p.index_var} | _pattern_index_vars(p.inner)
    if isinstance(p, A.PPair):
        return _pattern_index_vars(p.left) | _pattern_index_vars(p.right)
    if isinstance(p, A.PAt):
        return _pattern_index_vars(p.inner)
    return set()


def _rename_pattern_var(p: A.Pattern, old: str, new: str) -> A.Pattern:
    if isinstance(p, (A.PVar, A.PEvt, A.PF)):
        return dataclasses.replace(p, name=new) if p.name == old else p
    if isinstance(p, A.PPair):
        return dataclasses.replace(
            p, left=_rename_pattern_var(p.left, old, new), right=_rename_pattern_var(p.right, old, new)
        )
    if isinstance(p, (A.PAt, A.PPack)):
        return dataclasses.replace(p, inner=_rename_pattern_var(p.inner, old, new))
    return p


def subst_term(x: str, replacement: A.Term, t: A.Term) -> A.Term:
    """Capture-avoiding substitution of a term for a variable. Covers the
    Cartesian-into-Cartesian, Cartesian-into-linear, and linear-into-linear
    kinds; the typing side conditions are the caller's responsibility."""
    free = _free_vars(replacement)

    def go(t: A.Term, shadowed: frozenset[str]) -> A.Term:
        if isinstance(t, A.Var):
            if t.name == x and x not in shadowed:
                return replacement
            return t
        if isinstance(t, A.LetPat):
            scrut = go(t.scrutinee, shadowed)
            bound = _pattern_term_vars(t.pattern)
            if x in bound:
                return dataclasses.replace(t, scrutinee=scrut)
            pat, body = t.pattern, t.body
            for old in sorted(bound & free):
                new = f"{old}_{A.fresh_uid()}"
                pat = _rename_pattern_var(pat, old, new)
                body = subst_term(old, A.Var(new), body)
            return A.LetPat(pat, scrut, go(body, shadowed), span=t.span)
        binder_fields = _BINDERS.get(type(t), ())
        updates = {}
        bound_here = {getattr(t, bf) for bf in binder_fields}
        if x in bound_here:
            # The substituted variable is shadowed below; still need to
            # recurse into non-scoped fields (the scrutinee).
            for f, v in _term_children(t):
                if f in _SCOPED_FIELDS.get(type(t), ()):  # body under the binder
                    continue
                updates[f] = go(v, shadowed)
            return dataclasses.replace(t, **updates) if updates else t
        capture = bound_here & free
        if capture:
            t = _freshen_binders(t, capture)
        for f, v in _term_children(t):
            updates[f] = go(v, shadowed)
        return dataclasses.replace(t, **updates) if updates else t

    return go(t, frozenset())


_BINDERS: dict[type, tuple[str, ...]] = {
    A.Lam: ("var",),
    A.LetPair: ("left_var", "right_var"),
    A.LetEvt: ("var",),
    A.LetAt: ("var",),
    A.LetPairAt: ("left_var", "right_var"),
    A.LetF: ("var",),
    A.IdxAbs: ("var",),
    A.LetPack: ("index_var", "var"),
    A.Select: ("left_var", "right_var"),
    A.Case: ("left_var", "right_var"),
}

_SCOPED_FIELDS: dict[type, tuple[str, ...]] = {
    A.Lam: ("body",),
    A.LetPair: ("body",),
    A.LetEvt: ("body",),
    A.LetAt: ("body",),
    A.LetPairAt: ("body",),
    A.LetF: ("body",),
    A.IdxAbs: ("body",),
    A.LetPack: ("body",),
    A.Select: ("left_body", "right_body"),
    A.Case: ("left_body", "right_body"),
}


def _term_children(t: A.Term):
    for f in t.__dataclass_fields__:
        v = getattr(t, f)
        if isinstance(v, _TERM_NODE_TYPES):
            yield f, v


def _free_vars(t: A.Term, shadowed: frozenset[str] = frozenset()) -> frozenset[str]:
    if isinstance(t, A.Var):
        return frozenset() if t.name in shadowed else frozenset({t.name})
    if isinstance(t, A.LetPat):
        return _free_vars(t.scrutinee, shadowed) | _free_vars(
            t.body, shadowed | _pattern_term_vars(t.pattern)
        )
    out: frozenset[str] = frozenset()
    binders = {getattr(t, bf) for bf in _BINDERS.get(type(t), ())}
    scoped = _SCOPED_FIELDS.get(type(t), ())
    for f, v in _term_children(t):
        inner = shadowed | binders if f in scoped else shadowed
        out |= _free_vars(v, inner)
    return out


def _freshen_binders(t: A.Term, names: set[str]) -> A.Term:
    updates: dict[str, object] = {}
    for bf in _BINDERS.get(type(t), ()):
        old = getattr(t, bf)
        if old in names:
            fresh = f"{old}_{A.fresh_uid()}"
            updates[bf] = fresh
            for sf in _SCOPED_FIELDS.get(type(t), ()):
                body = updates.get(sf, getattr(t, sf))
                updates[sf] = subst_term(old, A.Var(fresh), body)
    return dataclasses.replace(t, **updates)


# ---------------------------------------------------------------------------
# Index substitution into terms
# ---------------------------------------------------------------------------


def subst_index_in_term(zeta: dict[str, A.IndexTerm], t: A.Term) -> A.Term:
    """Capture-avoiding simultaneous index substitution into a term."""
    if not zeta:
        return t
    if isinstance(t, A.IdxAbs) and t.var in zeta:
        zeta = {k: v for k, v in zeta.items() if k != t.var}
        return dataclasses.replace(t, body=subst_index_in_term(zeta, t.body))
    if isinstance(t, A.LetPack) and t.index_var in zeta:
        inner = {k: v for k, v in zeta.items() if k != t.index_var}
        return dataclasses.replace(
            t,
            scrutinee=subst_index_in_term(zeta, t.scrutinee),
            body=subst_index_in_term(inner, t.body),
        )
    if isinstance(t, A.LetPat):
        bound = _pattern_index_vars(t.pattern) | _pattern_term_vars(t.pattern)
        inner = {k: v for k, v in zeta.items() if k not in bound}
        return dataclasses.replace(
            t,
            pattern=_subst_index_in_pattern(inner, t.pattern),
            scrutinee=subst_index_in_term(zeta, t.scrutinee),
            body=subst_index_in_term(inner, t.body),
        )
    updates: dict[str, object] = {}
    for f in t.__dataclass_fields__:
        v = getattr(t, f)
        if isinstance(v, (A.IVar, A.ILit, A.IInf, A.IMeta)):
            updates[f] = A.subst_index_in_index(zeta, v)
        elif isinstance(v, _TERM_NODE_TYPES):
            updates[f] = subst_index_in_term(zeta, v)
    return dataclasses.replace(t, **updates) if updates else t


def _subst_index_in_pattern(zeta: dict[str, A.IndexTerm], p: A.Pattern) -> A.Pattern:
    if isinstance(p, A.PPair):
        return dataclasses.replace(
            p, left=_subst_index_in_pattern(zeta, p.left), right=_subst_index_in_pattern(zeta, p.right)
        )
    if isinstance(p, A.PAt):
        return dataclasses.replace(
            p,
            inner=_subst_index_in_pattern(zeta, p.inner),
            time=A.subst_index_in_index(zeta, p.time),
        )
    if isinstance(p, A.PPack):
        inner = {k: v for k, v in zeta.items() if k != p.index_var}
        return dataclasses.replace(p, inner=_subst_index_in_pattern(inner, p.inner))
    return p


def subst_index_in_context(zeta: dict[str, A.IndexTerm], delta: LinearContext) -> LinearContext:
    return LinearContext(
        [
            LinEntry(
                e.name,
                A.subst_index_in_type(zeta, e.type),
                A.subst_index_in_index(zeta, e.time),
                e.used,
                e.span,
            )
            for e in delta.entries
        ]
    )


def _strictly_positive(ty: A.LinType, var: str, positive: bool) -> bool:
    if isinstance(ty, A.TVarRef) and ty.name == var:
        return positive
    if isinstance(ty, A.TLolli):
        return _strictly_positive(ty.dom, var, False) and _strictly_positive(ty.cod, var, positive)
    if isinstance(ty, (A.TTensor, A.TPlus)):
        return _strictly_positive(ty.left, var, positive) and _strictly_positive(ty.right, var, positive)
    if isinstance(ty, (A.TDia, A.TAt)):
        return _strictly_positive(ty.body, var, positive)
    if isinstance(ty, (A.TForall, A.TExists)):
        return _strictly_positive(ty.body, var, positive)
    if isinstance(ty, A.TNu):
        if ty.var == var:
            return True
        return _strictly_positive(ty.body, var, positive)
    if isinstance(ty, A.TF):
        return var not in _tyvars_of_cart(ty.body) or positive
    return True


def _tyvars_of_cart(ty: A.CartType) -> set[str]:
    if isinstance(ty, A.CG):
        return _tyvars_of_lin(ty.body)
    if isinstance(ty, A.CArrow):
        return _tyvars_of_cart(ty.dom) | _tyvars_of_cart(ty.cod)
    return set()


def _tyvars_of_lin(ty: A.LinType) -> set[str]:
    if isinstance(ty, A.TVarRef):
        return {ty.name}
    out: set[str] = set()
    for f in getattr(ty, "__dataclass_fields__", {}):
        v = getattr(ty, f)
        if isinstance(v, (A.TI, A.TTensor, A.TPlus, A.TLolli, A.TDia, A.TAt, A.TF, A.TForall, A.TExists, A.TWidget, A.TPrefix, A.TNu, A.TVarRef)):
            out |= _tyvars_of_lin(v)
        elif isinstance(v, (A.CUnit, A.CBase, A.CArrow, A.CG)):
            out |= _tyvars_of_cart(v)
    if isinstance(ty, A.TNu):
        out.discard(ty.var)
    return out


# ---------------------------------------------------------------------------
# Program checking
# ---------------------------------------------------------------------------


def _is_referenceable(ty: A.AnyType) -> bool:
    """Top-level names usable inside other definitions: Cartesian values, or
    closed linear function schemes (this admits the recursive definitions the
    source language needs, and nothing else)."""
    if A.is_cart_type(ty):
        return True
    while isinstance(ty, A.TForall):
        ty = ty.body
    return isinstance(ty, A.TLolli)


def check_program(program: A.SourceProgram) -> CheckResult:
    """Check every definition; aggregate errors in source order."""
    types: dict[str, A.AnyType] = {}
    errors: list[LwTypeError] = []
    derivations: dict[str, list[DerivEvent]] = {}

    signatures = {
        d.name: d.declared_type for d in program.definitions if _is_referenceable(d.declared_type)
    }
    resolved: list[A.Definition] = []

    for d in program.definitions:
        checker = Checker(signatures)
        try:
            checker.check_type_wf(d.declared_type, d.span)
            if d.is_cartesian:
                checker.cart_check(d.body, d.declared_type)
            else:
                checker.lin_check(d.body, d.declared_type)
            unsolved = _unsolved_metas(d.body, checker.solutions)
            if unsolved:
                raise LwTypeError(
                    UNSOLVED_INDEX_METAVARIABLE,
                    f"{len(unsolved)} index metavariable(s) left unsolved in {d.name!r}",
                    d.span,
                )
            types[d.name] = d.declared_type
            resolved.append(dataclasses.replace(d, body=zonk_term(d.body, checker.solutions)))
        except LwTypeError as e:
            errors.append(e)
            resolved.append(d)
        derivations[d.name] = checker.derivation
    zonked = A.SourceProgram(resolved, program.entry)
    return CheckResult(types, errors, derivations, zonked)


def zonk_term(t: A.Term, solutions: Solutions) -> A.Term:
    """Replace every solved index metavariable with its solution."""
    updates: dict[str, object] = {}
    for f in t.__dataclass_fields__:
        v = getattr(t, f)
        if isinstance(v, (A.IVar, A.ILit, A.IInf, A.IMeta)):
            z = solutions.zonk(v)
            if z is not v:
                updates[f] = z
        elif isinstance(v, _TERM_NODE_TYPES):
            nv = zonk_term(v, solutions)
            if nv is not v:
                updates[f] = nv
    return dataclasses.replace(t, **updates) if updates else t
