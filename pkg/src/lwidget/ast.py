"""Core abstract syntax: indices, Cartesian and linear types, terms, programs.

All nodes are plain dataclasses. Index terms and types are frozen (hashable,
usable as dict keys); terms carry a source span that is excluded from
structural equality.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import NO_SPAN, Span


class IndexSort(enum.Enum):
    ID = "Id"
    TIME = "Time"

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------------------
# Index terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ILit:
    value: int
    # None means the literal's sort is not yet pinned by its syntactic
    # position; the checker resolves it against the expected sort.
    sort: Optional[IndexSort] = None

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class IInf:
    """The point at infinity. Never written in source programs."""

    def __str__(self) -> str:
        return "inf"


@dataclass(frozen=True)
class IMeta:
    uid: int
    sort: IndexSort

    def __str__(self) -> str:
        return f"?{self.uid}"


IndexTerm = Union[IVar, ILit, IInf, IMeta]

TIME_ZERO = ILit(0, IndexSort.TIME)

_meta_counter = itertools.count()


def fresh_meta(sort: IndexSort) -> IMeta:
    return IMeta(next(_meta_counter), sort)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CUnit:
    pass


@dataclass(frozen=True)
class CBase:
    name: str  # "Color" or "Char"


@dataclass(frozen=True)
class CArrow:
    dom: "CartType"
    cod: "CartType"


@dataclass(frozen=True)
class CG:
    body: "LinType"


CartType = Union[CUnit, CBase, CArrow, CG]

COLOR = CBase("Color")
CHAR = CBase("Char")


@dataclass(frozen=True)
class TI:
    pass


@dataclass(frozen=True)
class TTensor:
    left: "LinType"
    right: "LinType"


@dataclass(frozen=True)
class TPlus:
    left: "LinType"
    right: "LinType"


@dataclass(frozen=True)
class TLolli:
    dom: "LinType"
    cod: "LinType"


@dataclass(frozen=True)
class TDia:
    body: "LinType"


@dataclass(frozen=True)
class TAt:
    body: "LinType"
    time: IndexTerm


@dataclass(frozen=True)
class TF:
    body: CartType


@dataclass(frozen=True)
class TForall:
    var: str
    sort: IndexSort
    body: "LinType"


@dataclass(frozen=True)
class TExists:
    var: str
    sort: IndexSort
    body: "LinType"


@dataclass(frozen=True)
class TWidget:
    ident: IndexTerm


@dataclass(frozen=True)
class TPrefix:
    ident: IndexTerm
    time: IndexTerm


@dataclass(frozen=True)
class TNu:
    var: str
    body: "LinType"


@dataclass(frozen=True)
class TVarRef:
    name: str


LinType = Union[
    TI,
    TTensor,
    TPlus,
    TLolli,
    TDia,
    TAt,
    TF,
    TForall,
    TExists,
    TWidget,
    TPrefix,
    TNu,
    TVarRef,
]

AnyType = Union[LinType, CartType]


def is_cart_type(ty: AnyType) -> bool:
    return isinstance(ty, (CUnit, CBase, CArrow, CG))


# ---------------------------------------------------------------------------
# Terms (shared node set for the Cartesian and linear fragments; the checker
# knows which fragment it is in)
# ---------------------------------------------------------------------------

_uid_counter = itertools.count(1)


def fresh_uid() -> int:
    return next(_uid_counter)


def _span_field():
    return field(default=NO_SPAN, compare=False, repr=False)


def _uid_field():
    return field(default_factory=fresh_uid, compare=False, repr=False)


@dataclass
class Var:
    name: str
    span: Span = _span_field()


@dataclass
class Const:
    """Cartesian base constant: a color name or a character literal."""

    value: Union[str, int]
    base: CBase = COLOR
    span: Span = _span_field()


@dataclass
class Lam:
    var: str
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class App:
    fn: "Term"
    arg: "Term"
    span: Span = _span_field()


@dataclass
class Unit:
    span: Span = _span_field()


@dataclass
class LetUnit:
    scrutinee: "Term"
    body: "Term"
    span: Span = _span_field()


@dataclass
class Pair:
    left: "Term"
    right: "Term"
    span: Span = _span_field()


@dataclass
class LetPair:
    left_var: str
    right_var: str
    scrutinee: "Term"
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class Evt:
    body: "Term"
    span: Span = _span_field()


@dataclass
class LetEvt:
    var: str
    scrutinee: "Term"
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class Delay:
    """`t @ tau`: run the body in the timestep named by `tau`."""

    body: "Term"
    time: IndexTerm
    span: Span = _span_field()


@dataclass
class LetAt:
    """`let a @ tau = t1 in t2`: bind a value available at time tau."""

    var: str
    time: IndexTerm
    scrutinee: "Term"
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class LetUnitAt:
    """Discharge a unit known at time tau."""

    time: IndexTerm
    scrutinee: "Term"
    body: "Term"
    span: Span = _span_field()


@dataclass
class LetPairAt:
    """Split a pair known at time tau into two bindings at tau."""

    left_var: str
    right_var: str
    time: IndexTerm
    scrutinee: "Term"
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class GIntro:
    body: "Term"
    span: Span = _span_field()


@dataclass
class RunG:
    body: "Term"
    span: Span = _span_field()


@dataclass
class FIntro:
    body: "Term"
    span: Span = _span_field()


@dataclass
class LetF:
    var: str
    scrutinee: "Term"
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class IdxAbs:
    var: str
    sort: IndexSort
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class IdxApp:
    fn: "Term"
    index: IndexTerm
    span: Span = _span_field()


@dataclass
class Pack:
    index: IndexTerm
    body: "Term"
    span: Span = _span_field()
    # Filled in by the typechecker; tells evaluators whether the witness is a
    # widget identifier or a time.
    sort: Optional[IndexSort] = field(default=None, compare=False)


@dataclass
class LetPack:
    index_var: str
    var: str
    scrutinee: "Term"
    body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class Select:
    left: "Term"
    left_var: str
    left_body: "Term"
    right: "Term"
    right_var: str
    right_body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


@dataclass
class Fold:
    body: "Term"
    span: Span = _span_field()


@dataclass
class Unfold:
    body: "Term"
    span: Span = _span_field()


@dataclass
class Inl:
    body: "Term"
    span: Span = _span_field()


@dataclass
class Inr:
    body: "Term"
    span: Span = _span_field()


@dataclass
class Case:
    scrutinee: "Term"
    left_var: str
    left_body: "Term"
    right_var: str
    right_body: "Term"
    uid: int = _uid_field()
    span: Span = _span_field()


# --- sugar-only nodes, removed by desugaring -------------------------------


@dataclass
class PVar:
    name: str
    span: Span = _span_field()


@dataclass
class PUnit:
    span: Span = _span_field()


@dataclass
class PPair:
    left: "Pattern"
    right: "Pattern"
    span: Span = _span_field()


@dataclass
class PAt:
    inner: "Pattern"
    time: IndexTerm
    span: Span = _span_field()


@dataclass
class PEvt:
    name: str
    span: Span = _span_field()


@dataclass
class PF:
    name: str
    span: Span = _span_field()


@dataclass
class PPack:
    index_var: str
    inner: "Pattern"
    span: Span = _span_field()


Pattern = Union[PVar, PUnit, PPair, PAt, PEvt, PF, PPack]


@dataclass
class LetPat:
    pattern: Pattern
    scrutinee: "Term"
    body: "Term"
    span: Span = _span_field()


Term = Union[
    Var,
    Const,
    Lam,
    App,
    Unit,
    LetUnit,
    Pair,
    LetPair,
    Evt,
    LetEvt,
    Delay,
    LetAt,
    LetUnitAt,
    LetPairAt,
    GIntro,
    RunG,
    FIntro,
    LetF,
    IdxAbs,
    IdxApp,
    Pack,
    LetPack,
    Select,
    Fold,
    Unfold,
    Inl,
    Inr,
    Case,
    LetPat,
]


@dataclass
class Definition:
    name: str
    declared_type: AnyType
    body: Term
    span: Span = _span_field()

    @property
    def is_cartesian(self) -> bool:
        return is_cart_type(self.declared_type)


@dataclass
class SourceProgram:
    definitions: list[Definition]
    entry: str

    def get(self, name: str) -> Definition:
        for d in self.definitions:
            if d.name == name:
                return d
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Alpha equality of types
# ---------------------------------------------------------------------------


def _var_eq(a_name: str, b_name: str, env: dict[str, str]) -> bool:
    if a_name in env:
        return env[a_name] == b_name
    # A free variable on the left may not match a bound one on the right.
    return a_name == b_name and b_name not in env.values()


def index_eq(a: IndexTerm, b: IndexTerm, env: dict[str, str]) -> bool:
    if isinstance(a, IVar) and isinstance(b, IVar):
        return _var_eq(a.name, b.name, env)
    if isinstance(a, ILit) and isinstance(b, ILit):
        return a.value == b.value
    if isinstance(a, IInf) and isinstance(b, IInf):
        return True
    if isinstance(a, IMeta) and isinstance(b, IMeta):
        return a.uid == b.uid
    return False


def alpha_eq(a: AnyType, b: AnyType, _env: Optional[dict[str, str]] = None) -> bool:
    """Equality of types up to renaming of index and type binders.

    Index literals compare by value; metavariables by identity.
    """
    env = _env if _env is not None else {}
    if type(a) is not type(b):
        return False
    if isinstance(a, (TI, CUnit)):
        return True
    if isinstance(a, CBase):
        return a.name == b.name
    if isinstance(a, CArrow):
        return alpha_eq(a.dom, b.dom, env) and alpha_eq(a.cod, b.cod, env)
    if isinstance(a, CG):
        return alpha_eq(a.body, b.body, env)
    if isinstance(a, (TTensor, TPlus)):
        return alpha_eq(a.left, b.left, env) and alpha_eq(a.right, b.right, env)
    if isinstance(a, TLolli):
        return alpha_eq(a.dom, b.dom, env) and alpha_eq(a.cod, b.cod, env)
    if isinstance(a, TDia):
        return alpha_eq(a.body, b.body, env)
    if isinstance(a, TAt):
        return index_eq(a.time, b.time, env) and alpha_eq(a.body, b.body, env)
    if isinstance(a, TF):
        return alpha_eq(a.body, b.body, env)
    if isinstance(a, (TForall, TExists)):
        if a.sort is not b.sort:
            return False
        return alpha_eq(a.body, b.body, {**env, a.var: b.var})
    if isinstance(a, TWidget):
        return index_eq(a.ident, b.ident, env)
    if isinstance(a, TPrefix):
        return index_eq(a.ident, b.ident, env) and index_eq(a.time, b.time, env)
    if isinstance(a, TNu):
        return alpha_eq(a.body, b.body, {**env, a.var: b.var})
    if isinstance(a, TVarRef):
        return _var_eq(a.name, b.name, env)
    raise TypeError(f"not a type: {a!r}")


# ---------------------------------------------------------------------------
# Substitution into types
# ---------------------------------------------------------------------------


def subst_index_in_index(zeta: dict[str, IndexTerm], ix: IndexTerm) -> IndexTerm:
    if isinstance(ix, IVar) and ix.name in zeta:
        return zeta[ix.name]
    return ix


def subst_index_in_type(zeta: dict[str, IndexTerm], ty: AnyType) -> AnyType:
    """Capture-avoiding simultaneous index substitution into a type."""
    z = subst_index_in_index
    if isinstance(ty, (TI, CUnit, CBase, TVarRef)):
        return ty
    if isinstance(ty, CArrow):
        return CArrow(subst_index_in_type(zeta, ty.dom), subst_index_in_type(zeta, ty.cod))
    if isinstance(ty, CG):
        return CG(subst_index_in_type(zeta, ty.body))
    if isinstance(ty, TTensor):
        return TTensor(subst_index_in_type(zeta, ty.left), subst_index_in_type(zeta, ty.right))
    if isinstance(ty, TPlus):
        return TPlus(subst_index_in_type(zeta, ty.left), subst_index_in_type(zeta, ty.right))
    if isinstance(ty, TLolli):
        return TLolli(subst_index_in_type(zeta, ty.dom), subst_index_in_type(zeta, ty.cod))
    if isinstance(ty, TDia):
        return TDia(subst_index_in_type(zeta, ty.body))
    if isinstance(ty, TAt):
        return TAt(subst_index_in_type(zeta, ty.body), z(zeta, ty.time))
    if isinstance(ty, TF):
        return TF(subst_index_in_type(zeta, ty.body))
    if isinstance(ty, (TForall, TExists)):
        ctor = TForall if isinstance(ty, TForall) else TExists
        var = ty.var
        body = ty.body
        free = set()
        for v in zeta.values():
            if isinstance(v, IVar):
                free.add(v.name)
        if var in free or var in zeta:
            fresh = _fresh_name(var, free | set(zeta))
            body = subst_index_in_type({var: IVar(fresh)}, body)
            var = fresh
        inner = {k: v for k, v in zeta.items() if k != var}
        return ctor(var, ty.sort, subst_index_in_type(inner, body))
    if isinstance(ty, TWidget):
        return TWidget(z(zeta, ty.ident))
    if isinstance(ty, TPrefix):
        return TPrefix(z(zeta, ty.ident), z(zeta, ty.time))
    if isinstance(ty, TNu):
        return TNu(ty.var, subst_index_in_type(zeta, ty.body))
    raise TypeError(f"not a type: {ty!r}")


def subst_tyvar(name: str, replacement: LinType, ty: LinType) -> LinType:
    """Substitute a recursive-type variable. Nu bodies are strictly positive,
    so no capture trickery beyond binder shadowing is needed."""
    if isinstance(ty, TVarRef):
        return replacement if ty.name == name else ty
    if isinstance(ty, TI):
        return ty
    if isinstance(ty, TTensor):
        return TTensor(subst_tyvar(name, replacement, ty.left), subst_tyvar(name, replacement, ty.right))
    if isinstance(ty, TPlus):
        return TPlus(subst_tyvar(name, replacement, ty.left), subst_tyvar(name, replacement, ty.right))
    if isinstance(ty, TLolli):
        return TLolli(subst_tyvar(name, replacement, ty.dom), subst_tyvar(name, replacement, ty.cod))
    if isinstance(ty, TDia):
        return TDia(subst_tyvar(name, replacement, ty.body))
    if isinstance(ty, TAt):
        return TAt(subst_tyvar(name, replacement, ty.body), ty.time)
    if isinstance(ty, TF):
        return ty
    if isinstance(ty, (TForall, TExists)):
        ctor = TForall if isinstance(ty, TForall) else TExists
        return ctor(ty.var, ty.sort, subst_tyvar(name, replacement, ty.body))
    if isinstance(ty, (TWidget, TPrefix)):
        return ty
    if isinstance(ty, TNu):
        if ty.var == name:
            return ty
        return TNu(ty.var, subst_tyvar(name, replacement, ty.body))
    raise TypeError(f"not a linear type: {ty!r}")


def unfold_nu(ty: TNu) -> LinType:
    return subst_tyvar(ty.var, ty, ty.body)


def _fresh_name(base: str, taken: set[str]) -> str:
    n = 1
    while f"{base}{n}" in taken:
        n += 1
    return f"{base}{n}"


def free_index_vars_type(ty: AnyType) -> set[str]:
    out: set[str] = set()

    def ix(i: IndexTerm, bound: frozenset[str]):
        if isinstance(i, IVar) and i.name not in bound:
            out.add(i.name)

    def go(t: AnyType, bound: frozenset[str]):
        if isinstance(t, (TI, CUnit, CBase, TVarRef)):
            return
        if isinstance(t, CArrow):
            go(t.dom, bound), go(t.cod, bound)
        elif isinstance(t, CG):
            go(t.body, bound)
        elif isinstance(t, (TTensor, TPlus)):
            go(t.left, bound), go(t.right, bound)
        elif isinstance(t, TLolli):
            go(t.dom, bound), go(t.cod, bound)
        elif isinstance(t, (TDia, TF, TNu)):
            go(t.body, bound)
        elif isinstance(t, TAt):
            go(t.body, bound), ix(t.time, bound)
        elif isinstance(t, (TForall, TExists)):
            go(t.body, bound | {t.var})
        elif isinstance(t, TWidget):
            ix(t.ident, bound)
        elif isinstance(t, TPrefix):
            ix(t.ident, bound), ix(t.time, bound)
        else:
            raise TypeError(f"not a type: {t!r}")

    go(ty, frozenset())
    return out
