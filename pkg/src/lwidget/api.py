"""Builtin widget API: names, type schemes, and index arities.

`out` and `into` are schematic in their payload type (the calculus has no
type-level abstraction), so they are special-cased by the checker; they still
appear here so tooling can enumerate the full API surface.
"""

from __future__ import annotations

from .ast import (
    CHAR,
    COLOR,
    IVar,
    IndexSort,
    LinType,
    TAt,
    TDia,
    TExists,
    TF,
    TForall,
    TI,
    TLolli,
    TPrefix,
    TTensor,
    TWidget,
)

_i = IVar("i")
_j = IVar("j")
_t = IVar("t")


def _forall_i(body: LinType) -> LinType:
    return TForall("i", IndexSort.ID, body)


def _forall_it(body: LinType) -> LinType:
    return TForall("i", IndexSort.ID, TForall("t", IndexSort.TIME, body))


API_TABLE: dict[str, LinType] = {
    "newWidget": TLolli(TI(), TExists("i", IndexSort.ID, TWidget(_i))),
    "dropWidget": _forall_i(TLolli(TWidget(_i), TI())),
    "setColor": _forall_i(TLolli(TTensor(TWidget(_i), TF(COLOR)), TWidget(_i))),
    "onClick": _forall_i(TLolli(TWidget(_i), TTensor(TWidget(_i), TDia(TI())))),
    "onKeypress": _forall_i(TLolli(TWidget(_i), TTensor(TWidget(_i), TDia(TF(CHAR))))),
    "split": _forall_it(TLolli(TWidget(_i), TTensor(TPrefix(_i, _t), TAt(TWidget(_i), _t)))),
    "join": _forall_it(TLolli(TTensor(TPrefix(_i, _t), TAt(TWidget(_i), _t)), TWidget(_i))),
    "vAttach": _forall_i(
        TForall("j", IndexSort.ID, TLolli(TWidget(_i), TLolli(TWidget(_j), TWidget(_i))))
    ),
}

# Schematic builtins; their types are families over the payload type A.
SCHEMATIC_BUILTINS = ("out", "into")


def index_binder_sorts(scheme: LinType) -> tuple[IndexSort, ...]:
    sorts: list[IndexSort] = []
    while isinstance(scheme, TForall):
        sorts.append(scheme.sort)
        scheme = scheme.body
    return tuple(sorts)


BUILTIN_INDEX_ARITY: dict[str, tuple[IndexSort, ...]] = {
    name: index_binder_sorts(ty) for name, ty in API_TABLE.items()
}
BUILTIN_INDEX_ARITY["out"] = ()
BUILTIN_INDEX_ARITY["into"] = ()

BUILTIN_NAMES = frozenset(API_TABLE) | frozenset(SCHEMATIC_BUILTINS)
