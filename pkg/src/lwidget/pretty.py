"""Canonical printer for types and terms.

The printed form of a core program parses back to an alpha-equivalent AST;
`pp(parse(pp(t))) == pp(t)` is the round-trip contract.
"""

from __future__ import annotations

from . import ast as A

# Linear type precedence levels, loosest first.
_LOLLI, _PLUS, _TENSOR, _AT, _PREFIX, _ATOM = range(6)


def _paren(s: str, ambient: int, own: int) -> str:
    return f"({s})" if ambient > own else s


def pp_index(ix: A.IndexTerm) -> str:
    return str(ix)


def pp_type(ty: A.AnyType) -> str:
    if A.is_cart_type(ty):
        return _pp_cart(ty, 0)
    return _pp_lin(ty, _LOLLI)


def _pp_cart(ty: A.CartType, level: int) -> str:
    if isinstance(ty, A.CUnit):
        return "Unit"
    if isinstance(ty, A.CBase):
        return ty.name
    if isinstance(ty, A.CArrow):
        s = f"{_pp_cart(ty.dom, 1)} -> {_pp_cart(ty.cod, 0)}"
        return _paren(s, level, 0)
    if isinstance(ty, A.CG):
        return f"G ({_pp_lin(ty.body, _LOLLI)})"
    raise TypeError(ty)


def _pp_lin(ty: A.LinType, level: int) -> str:
    if isinstance(ty, A.TI):
        return "I"
    if isinstance(ty, A.TVarRef):
        return ty.name
    if isinstance(ty, A.TWidget):
        return f"Widget {pp_index(ty.ident)}"
    if isinstance(ty, A.TPrefix):
        return f"Prefix {pp_index(ty.ident)} {pp_index(ty.time)}"
    if isinstance(ty, A.TLolli):
        s = f"{_pp_lin(ty.dom, _PLUS)} -o {_pp_lin(ty.cod, _LOLLI)}"
        return _paren(s, level, _LOLLI)
    if isinstance(ty, A.TPlus):
        s = f"{_pp_lin(ty.left, _TENSOR)} + {_pp_lin(ty.right, _PLUS)}"
        return _paren(s, level, _PLUS)
    if isinstance(ty, A.TTensor):
        s = f"{_pp_lin(ty.left, _AT)} * {_pp_lin(ty.right, _TENSOR)}"
        return _paren(s, level, _TENSOR)
    if isinstance(ty, A.TAt):
        s = f"{_pp_lin(ty.body, _PREFIX)} @ {pp_index(ty.time)}"
        return _paren(s, level, _AT)
    if isinstance(ty, A.TDia):
        s = f"Ev {_pp_lin(ty.body, _ATOM)}"
        return _paren(s, level, _PREFIX)
    if isinstance(ty, A.TF):
        s = f"F {_pp_cart_atom(ty.body)}"
        return _paren(s, level, _PREFIX)
    if isinstance(ty, (A.TForall, A.TExists)):
        kw = "forall" if isinstance(ty, A.TForall) else "exists"
        s = f"{kw} ({ty.var} : {ty.sort}). {_pp_lin(ty.body, _LOLLI)}"
        return _paren(s, level, _LOLLI)
    if isinstance(ty, A.TNu):
        s = f"nu {ty.var}. {_pp_lin(ty.body, _LOLLI)}"
        return _paren(s, level, _LOLLI)
    raise TypeError(ty)


def _pp_cart_atom(ty: A.CartType) -> str:
    if isinstance(ty, (A.CUnit, A.CBase)):
        return _pp_cart(ty, 1)
    return f"({_pp_cart(ty, 0)})"


# Term precedence: let-like (loosest), delay, application, atom.
_T_LOW, _T_DELAY, _T_APP, _T_ATOM = range(4)


def pp_term(t: A.Term) -> str:
    return _pp_term(t, _T_LOW)


def _pp_term(t: A.Term, level: int) -> str:
    s, lv = _render(t)
    return _paren(s, level, lv)


def _low(s: str) -> tuple[str, int]:
    return s, _T_LOW


def _render(t: A.Term) -> tuple[str, int]:
    if isinstance(t, A.Var):
        return t.name, _T_ATOM
    if isinstance(t, A.Const):
        if t.base == A.CHAR:
            return f"'{t.value}'", _T_ATOM
        return str(t.value), _T_ATOM
    if isinstance(t, A.Unit):
        return "()", _T_ATOM
    if isinstance(t, A.Pair):
        return f"({_pp_term(t.left, _T_LOW)}, {_pp_term(t.right, _T_LOW)})", _T_ATOM
    if isinstance(t, A.Lam):
        return _low(f"fn {t.var}. {_pp_term(t.body, _T_LOW)}")
    if isinstance(t, A.IdxAbs):
        return _low(f"idx ({t.var} : {t.sort}). {_pp_term(t.body, _T_LOW)}")
    if isinstance(t, A.App):
        return f"{_pp_term(t.fn, _T_APP)} {_pp_term(t.arg, _T_ATOM)}", _T_APP
    if isinstance(t, A.IdxApp):
        return f"{_pp_term(t.fn, _T_APP)} [{pp_index(t.index)}]", _T_APP
    if isinstance(t, A.Delay):
        return f"{_pp_term(t.body, _T_APP)} @ {pp_index(t.time)}", _T_DELAY
    if isinstance(t, A.Evt):
        return f"evt {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.Fold):
        return f"fold {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.Unfold):
        return f"unfold {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.Inl):
        return f"inl {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.Inr):
        return f"inr {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.GIntro):
        return f"G {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.FIntro):
        return f"F {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.RunG):
        return f"runG {_pp_term(t.body, _T_ATOM)}", _T_APP
    if isinstance(t, A.Pack):
        return f"pack({pp_index(t.index)}, {_pp_term(t.body, _T_LOW)})", _T_ATOM
    if isinstance(t, A.LetUnit):
        return _low(f"let () = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}")
    if isinstance(t, A.LetUnitAt):
        return _low(
            f"let () @ {pp_index(t.time)} = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}"
        )
    if isinstance(t, A.LetPair):
        return _low(
            f"let ({t.left_var}, {t.right_var}) = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}"
        )
    if isinstance(t, A.LetPairAt):
        return _low(
            f"let ({t.left_var}, {t.right_var}) @ {pp_index(t.time)} = "
            f"{_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}"
        )
    if isinstance(t, A.LetEvt):
        return _low(f"let evt {t.var} = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}")
    if isinstance(t, A.LetAt):
        return _low(
            f"let {t.var} @ {pp_index(t.time)} = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}"
        )
    if isinstance(t, A.LetF):
        return _low(f"let F {t.var} = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}")
    if isinstance(t, A.LetPack):
        return _low(
            f"let pack({t.index_var}, {t.var}) = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}"
        )
    if isinstance(t, A.Select):
        return _low(
            f"select {_pp_term(t.left, _T_APP)} as {t.left_var} => {_pp_term(t.left_body, _T_LOW)} "
            f"| {_pp_term(t.right, _T_APP)} as {t.right_var} => {_pp_term(t.right_body, _T_LOW)}"
        )
    if isinstance(t, A.Case):
        return _low(
            f"case {_pp_term(t.scrutinee, _T_LOW)} of inl {t.left_var} => {_pp_term(t.left_body, _T_LOW)} "
            f"| inr {t.right_var} => {_pp_term(t.right_body, _T_LOW)}"
        )
    if isinstance(t, A.LetPat):
        return _low(
            f"let {_pp_pattern(t.pattern)} = {_pp_term(t.scrutinee, _T_LOW)} in {_pp_term(t.body, _T_LOW)}"
        )
    raise TypeError(t)


def _pp_pattern(p: A.Pattern) -> str:
    if isinstance(p, A.PVar):
        return p.name
    if isinstance(p, A.PUnit):
        return "()"
    if isinstance(p, A.PPair):
        return f"({_pp_pattern(p.left)}, {_pp_pattern(p.right)})"
    if isinstance(p, A.PAt):
        return f"{_pp_pattern(p.inner)} @ {pp_index(p.time)}"
    if isinstance(p, A.PEvt):
        return f"evt {p.name}"
    if isinstance(p, A.PF):
        return f"F {p.name}"
    if isinstance(p, A.PPack):
        return f"pack({p.index_var}, {_pp_pattern(p.inner)})"
    raise TypeError(p)


def pp_program(p: A.SourceProgram) -> str:
    chunks = []
    for d in p.definitions:
        chunks.append(f"{d.name} : {pp_type(d.declared_type)}\n  = {pp_term(d.body)};\n")
    return "\n".join(chunks)
