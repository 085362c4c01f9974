"""Lexer, recursive-descent parser, and desugaring for the surface syntax.

The surface grammar (see README for the full reference):

    program  ::= definition*
    defn     ::= NAME ':' type '=' term ';'
    term     ::= 'fn' NAME '.' term
               | 'idx' '(' NAME ':' sort ')' '.' term
               | 'let' pattern '=' term 'in' term
               | 'select' delay 'as' NAME '=>' term '|' delay 'as' NAME '=>' term
               | 'case' term 'of' 'inl' NAME '=>' term '|' 'inr' NAME '=>' term
               | delay
    delay    ::= app ('@' index)*
    app      ::= atom (atom | '[' index ']')*

Pattern lets are sugar and are expanded by `desugar`; omitted index
applications on builtins and top-level names become fresh inference
metavariables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import ast as A
from .api import BUILTIN_INDEX_ARITY
from .errors import DesugarError, LwSyntaxError, Span

KEYWORDS = {
    "fn",
    "idx",
    "let",
    "in",
    "as",
    "select",
    "case",
    "of",
    "evt",
    "fold",
    "unfold",
    "inl",
    "inr",
    "pack",
    "runG",
    "forall",
    "exists",
    "nu",
    "Id",
    "Time",
    "I",
    "Ev",
    "F",
    "G",
    "Widget",
    "Prefix",
    "Unit",
    "Color",
    "Char",
    "Red",
    "Green",
    "Blue",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>--[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>->|-o|=>)
  | (?P<char>'(?:[^'\\]|\\.)')
  | (?P<nat>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[()\[\],.:;=|@*+])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'name', 'nat', 'char', 'sym', 'kw', 'eof'
    text: str
    span: Span


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise LwSyntaxError(f"unexpected character {source[pos]!r}", Span(line, col))
        text = m.group(0)
        span = Span(line, col)
        if m.lastgroup == "nl":
            line += 1
            col = 1
        else:
            col += len(text)
            if m.lastgroup == "name":
                kind = "kw" if text in KEYWORDS else "name"
                tokens.append(Token(kind, text, span))
            elif m.lastgroup == "nat":
                tokens.append(Token("nat", text, span))
            elif m.lastgroup == "char":
                tokens.append(Token("char", text, span))
            elif m.lastgroup in ("sym", "arrow"):
                tokens.append(Token("sym", text, span))
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, col)))
    return tokens


_ATOM_STARTERS_KW = {"evt", "fold", "unfold", "inl", "inr", "F", "G", "runG", "pack", "Red", "Green", "Blue"}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.text == text and tok.kind in ("sym", "kw")

    def eat(self, text: str) -> Token:
        if not self.at(text):
            tok = self.peek()
            raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=(text,))
        return self.next()

    def eat_name(self) -> Token:
        tok = self.peek()
        if tok.kind != "name":
            raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("identifier",))
        return self.next()

    def try_eat(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    # -- indices and sorts ----------------------------------------------

    def parse_sort(self) -> A.IndexSort:
        tok = self.next()
        if tok.text == "Id":
            return A.IndexSort.ID
        if tok.text == "Time":
            return A.IndexSort.TIME
        raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("Id", "Time"))

    def parse_index(self, sort: Optional[A.IndexSort] = None) -> A.IndexTerm:
        tok = self.peek()
        if tok.kind == "name":
            self.next()
            if tok.text == "inf":
                return A.IInf()
            return A.IVar(tok.text)
        if tok.kind == "nat":
            self.next()
            return A.ILit(int(tok.text), sort)
        raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("index",))

    # -- types -----------------------------------------------------------

    def parse_def_type(self) -> A.AnyType:
        mark = self.pos
        try:
            return self.parse_lin_type()
        except LwSyntaxError:
            self.pos = mark
            return self.parse_cart_type()

    def parse_cart_type(self) -> A.CartType:
        dom = self.parse_cart_atom()
        if self.try_eat("->"):
            return A.CArrow(dom, self.parse_cart_type())
        return dom

    def parse_cart_atom(self) -> A.CartType:
        tok = self.peek()
        if tok.text == "Unit":
            self.next()
            return A.CUnit()
        if tok.text in ("Color", "Char"):
            self.next()
            return A.CBase(tok.text)
        if tok.text == "G":
            self.next()
            if self.try_eat("("):
                body = self.parse_lin_type()
                self.eat(")")
            else:
                body = self.parse_lin_atom()
            return A.CG(body)
        if tok.text == "(":
            self.next()
            ty = self.parse_cart_type()
            self.eat(")")
            return ty
        raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("Cartesian type",))

    def parse_lin_type(self) -> A.LinType:
        tok = self.peek()
        if tok.text in ("forall", "exists"):
            self.next()
            self.eat("(")
            names = [self.eat_name().text]
            while self.try_eat(","):
                names.append(self.eat_name().text)
            self.eat(":")
            sort = self.parse_sort()
            self.eat(")")
            self.eat(".")
            body = self.parse_lin_type()
            ctor = A.TForall if tok.text == "forall" else A.TExists
            for name in reversed(names):
                body = ctor(name, sort, body)
            return body
        if tok.text == "nu":
            self.next()
            var = self.eat_name().text
            self.eat(".")
            return A.TNu(var, self.parse_lin_type())
        return self.parse_lolli()

    def parse_lolli(self) -> A.LinType:
        dom = self.parse_plus()
        if self.try_eat("-o"):
            return A.TLolli(dom, self.parse_lin_type())
        return dom

    def parse_plus(self) -> A.LinType:
        left = self.parse_tensor()
        if self.try_eat("+"):
            return A.TPlus(left, self.parse_plus())
        return left

    def parse_tensor(self) -> A.LinType:
        left = self.parse_at_type()
        if self.try_eat("*"):
            return A.TTensor(left, self.parse_tensor())
        return left

    def parse_at_type(self) -> A.LinType:
        ty = self.parse_lin_prefix()
        while self.at("@"):
            self.next()
            ty = A.TAt(ty, self.parse_index(A.IndexSort.TIME))
        return ty

    def parse_lin_prefix(self) -> A.LinType:
        tok = self.peek()
        if tok.text == "Ev":
            self.next()
            return A.TDia(self.parse_lin_atom())
        if tok.text == "F":
            self.next()
            return A.TF(self.parse_cart_atom())
        return self.parse_lin_atom()

    def parse_lin_atom(self) -> A.LinType:
        tok = self.peek()
        if tok.text == "I":
            self.next()
            return A.TI()
        if tok.text == "Widget":
            self.next()
            return A.TWidget(self.parse_index(A.IndexSort.ID))
        if tok.text == "Prefix":
            self.next()
            ident = self.parse_index(A.IndexSort.ID)
            return A.TPrefix(ident, self.parse_index(A.IndexSort.TIME))
        if tok.text in ("Ev", "F"):
            return self.parse_lin_prefix()
        if tok.kind == "name":
            self.next()
            return A.TVarRef(tok.text)
        if tok.text == "(":
            self.next()
            ty = self.parse_lin_type()
            self.eat(")")
            return ty
        raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("linear type",))

    # -- terms -----------------------------------------------------------

    def parse_term(self) -> A.Term:
        tok = self.peek()
        if tok.text == "fn":
            self.next()
            var = self.eat_name().text
            self.eat(".")
            return A.Lam(var, self.parse_term(), span=tok.span)
        if tok.text == "idx":
            self.next()
            self.eat("(")
            names = [self.eat_name().text]
            while self.try_eat(","):
                names.append(self.eat_name().text)
            self.eat(":")
            sort = self.parse_sort()
            self.eat(")")
            self.eat(".")
            body = self.parse_term()
            for name in reversed(names):
                body = A.IdxAbs(name, sort, body, span=tok.span)
            return body
        if tok.text == "let":
            self.next()
            pat = self.parse_pattern()
            self.eat("=")
            scrutinee = self.parse_term()
            self.eat("in")
            body = self.parse_term()
            return A.LetPat(pat, scrutinee, body, span=tok.span)
        if tok.text == "select":
            self.next()
            left = self.parse_delay()
            self.eat("as")
            left_var = self.eat_name().text
            self.eat("=>")
            left_body = self.parse_term()
            self.eat("|")
            right = self.parse_delay()
            self.eat("as")
            right_var = self.eat_name().text
            self.eat("=>")
            right_body = self.parse_term()
            return A.Select(left, left_var, left_body, right, right_var, right_body, span=tok.span)
        if tok.text == "case":
            self.next()
            scrutinee = self.parse_term()
            self.eat("of")
            self.eat("inl")
            lv = self.eat_name().text
            self.eat("=>")
            lb = self.parse_term()
            self.eat("|")
            self.eat("inr")
            rv = self.eat_name().text
            self.eat("=>")
            rb = self.parse_term()
            return A.Case(scrutinee, lv, lb, rv, rb, span=tok.span)
        return self.parse_delay()

    def parse_delay(self) -> A.Term:
        t = self.parse_app()
        while self.at("@"):
            span = self.next().span
            t = A.Delay(t, self.parse_index(A.IndexSort.TIME), span=span)
        return t

    def _at_atom(self) -> bool:
        tok = self.peek()
        if tok.kind in ("name", "char"):
            return True
        if tok.kind == "kw":
            return tok.text in _ATOM_STARTERS_KW
        return tok.text == "("

    def parse_app(self) -> A.Term:
        t = self.parse_atom()
        while True:
            if self.at("["):
                span = self.next().span
                index = self.parse_index()
                self.eat("]")
                t = A.IdxApp(t, index, span=span)
            elif self._at_atom():
                arg = self.parse_atom()
                t = A.App(t, arg, span=t.span)
            else:
                return t

    def parse_atom(self) -> A.Term:
        tok = self.peek()
        if tok.kind == "name":
            self.next()
            return A.Var(tok.text, span=tok.span)
        if tok.text in ("Red", "Green", "Blue"):
            self.next()
            return A.Const(tok.text, A.COLOR, span=tok.span)
        if tok.kind == "char":
            self.next()
            return A.Const(tok.text[1:-1].replace("\\'", "'"), A.CHAR, span=tok.span)
        unary = {
            "evt": A.Evt,
            "fold": A.Fold,
            "unfold": A.Unfold,
            "inl": A.Inl,
            "inr": A.Inr,
            "G": A.GIntro,
            "F": A.FIntro,
            "runG": A.RunG,
        }
        if tok.text in unary:
            self.next()
            return unary[tok.text](self.parse_atom(), span=tok.span)
        if tok.text == "pack":
            self.next()
            self.eat("(")
            index = self.parse_index()
            self.eat(",")
            body = self.parse_term()
            self.eat(")")
            return A.Pack(index, body, span=tok.span)
        if tok.text == "(":
            self.next()
            if self.try_eat(")"):
                return A.Unit(span=tok.span)
            t = self.parse_term()
            if self.try_eat(","):
                right = self.parse_term()
                self.eat(")")
                return A.Pair(t, right, span=tok.span)
            self.eat(")")
            return t
        raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("term",))

    # -- patterns ----------------------------------------------------------

    def parse_pattern(self) -> A.Pattern:
        pat = self.parse_pattern_atom()
        if self.try_eat("@"):
            time = self.parse_index(A.IndexSort.TIME)
            return A.PAt(pat, time, span=pat.span)
        return pat

    def parse_pattern_atom(self) -> A.Pattern:
        tok = self.peek()
        if tok.kind == "name":
            self.next()
            return A.PVar(tok.text, span=tok.span)
        if tok.text == "evt":
            self.next()
            return A.PEvt(self.eat_name().text, span=tok.span)
        if tok.text == "F":
            self.next()
            return A.PF(self.eat_name().text, span=tok.span)
        if tok.text == "pack":
            self.next()
            self.eat("(")
            iv = self.eat_name().text
            self.eat(",")
            inner = self.parse_pattern()
            self.eat(")")
            return A.PPack(iv, inner, span=tok.span)
        if tok.text == "(":
            self.next()
            if self.try_eat(")"):
                return A.PUnit(span=tok.span)
            left = self.parse_pattern()
            self.eat(",")
            right = self.parse_pattern()
            self.eat(")")
            return A.PPair(left, right, span=tok.span)
        raise LwSyntaxError(f"unexpected {tok.text!r}", tok.span, expected=("pattern",))

    # -- programs ----------------------------------------------------------

    def parse_program(self) -> A.SourceProgram:
        defs: list[A.Definition] = []
        while self.peek().kind != "eof":
            name_tok = self.eat_name()
            self.eat(":")
            ty = self.parse_def_type()
            self.eat("=")
            body = self.parse_term()
            self.eat(";")
            if any(d.name == name_tok.text for d in defs):
                raise LwSyntaxError(f"duplicate definition {name_tok.text!r}", name_tok.span)
            defs.append(A.Definition(name_tok.text, ty, body, span=name_tok.span))
        if not defs:
            raise LwSyntaxError("empty program", self.peek().span)
        entry = "main" if any(d.name == "main" for d in defs) else defs[0].name
        return A.SourceProgram(defs, entry)


def parse(source: str) -> A.SourceProgram:
    return Parser(tokenize(source)).parse_program()


def parse_term(source: str) -> A.Term:
    p = Parser(tokenize(source))
    t = p.parse_term()
    if p.peek().kind != "eof":
        tok = p.peek()
        raise LwSyntaxError(f"trailing input {tok.text!r}", tok.span)
    return t


def parse_lin_type(source: str) -> A.LinType:
    p = Parser(tokenize(source))
    ty = p.parse_lin_type()
    if p.peek().kind != "eof":
        tok = p.peek()
        raise LwSyntaxError(f"trailing input {tok.text!r}", tok.span)
    return ty


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------


class _FreshNames:
    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.counter = 0

    def fresh(self, base: str = "p") -> str:
        while True:
            self.counter += 1
            name = f"{base}{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def _collect_names(t: A.Term, out: set[str]) -> None:
    if isinstance(t, A.Var):
        out.add(t.name)
    for f in getattr(t, "__dataclass_fields__", {}):
        v = getattr(t, f)
        if isinstance(v, str):
            out.add(v)
        elif hasattr(v, "__dataclass_fields__") and not isinstance(v, (A.IVar, A.ILit, A.IInf, A.IMeta)):
            _collect_names(v, out)


def desugar(
    program: A.SourceProgram,
    extra_arities: Optional[dict[str, tuple[A.IndexSort, ...]]] = None,
) -> A.SourceProgram:
    """Expand pattern lets to primitive eliminations and insert index
    metavariables for omitted index applications. Idempotent."""
    arities = dict(BUILTIN_INDEX_ARITY)
    if extra_arities:
        arities.update(extra_arities)
    for d in program.definitions:
        ty = d.declared_type
        sorts: list[A.IndexSort] = []
        while isinstance(ty, A.TForall):
            sorts.append(ty.sort)
            ty = ty.body
        arities[d.name] = tuple(sorts)

    names: set[str] = set()
    for d in program.definitions:
        _collect_names(d.body, names)
    fresh = _FreshNames(names)

    new_defs = [
        A.Definition(d.name, d.declared_type, _desugar_term(d.body, arities, fresh), span=d.span)
        for d in program.definitions
    ]
    return A.SourceProgram(new_defs, program.entry)


def _desugar_term(t: A.Term, arities: dict[str, int], fresh: _FreshNames) -> A.Term:
    go = lambda s: _desugar_term(s, arities, fresh)  # noqa: E731

    if isinstance(t, A.LetPat):
        return _expand_let(t.pattern, go(t.scrutinee), go(t.body), fresh, t.span)
    if isinstance(t, A.App):
        fn = go(t.fn)
        arg = go(t.arg)
        fn = _saturate_indices(fn, arities)
        return A.App(fn, arg, span=t.span)
    if isinstance(t, (A.Var, A.Const, A.Unit)):
        return t

    # Generic structural recursion over the remaining nodes.
    updates = {}
    for f in t.__dataclass_fields__:
        v = getattr(t, f)
        if isinstance(v, tuple(_TERM_CLASSES)):
            updates[f] = go(v)
    if updates:
        t = _replace(t, updates)
    return t


_TERM_CLASSES = (
    A.Var,
    A.Const,
    A.Lam,
    A.App,
    A.Unit,
    A.LetUnit,
    A.Pair,
    A.LetPair,
    A.Evt,
    A.LetEvt,
    A.Delay,
    A.LetAt,
    A.LetUnitAt,
    A.LetPairAt,
    A.GIntro,
    A.RunG,
    A.FIntro,
    A.LetF,
    A.IdxAbs,
    A.IdxApp,
    A.Pack,
    A.LetPack,
    A.Select,
    A.Fold,
    A.Unfold,
    A.Inl,
    A.Inr,
    A.Case,
    A.LetPat,
)


def _replace(t: A.Term, updates: dict) -> A.Term:
    import dataclasses

    return dataclasses.replace(t, **updates)


def _saturate_indices(fn: A.Term, arities: dict[str, tuple[A.IndexSort, ...]]) -> A.Term:
    """Insert fresh index metavariables for omitted index applications when a
    polymorphic builtin or top-level name is applied to a term argument."""
    head = fn
    explicit = 0
    while isinstance(head, A.IdxApp):
        explicit += 1
        head = head.fn
    if not isinstance(head, A.Var) or head.name not in arities:
        return fn
    for sort in arities[head.name][explicit:]:
        fn = A.IdxApp(fn, A.fresh_meta(sort), span=head.span)
    return fn


def _expand_let(pat: A.Pattern, scrutinee: A.Term, body: A.Term, fresh: _FreshNames, span) -> A.Term:
    if isinstance(pat, A.PVar):
        return A.App(A.Lam(pat.name, body, span=span), scrutinee, span=span)
    if isinstance(pat, A.PUnit):
        return A.LetUnit(scrutinee, body, span=span)
    if isinstance(pat, A.PEvt):
        return A.LetEvt(pat.name, scrutinee, body, span=span)
    if isinstance(pat, A.PF):
        return A.LetF(pat.name, scrutinee, body, span=span)
    if isinstance(pat, A.PPack):
        if isinstance(pat.inner, A.PVar):
            return A.LetPack(pat.index_var, pat.inner.name, scrutinee, body, span=span)
        v = fresh.fresh()
        inner = _expand_let(pat.inner, A.Var(v, span=span), body, fresh, span)
        return A.LetPack(pat.index_var, v, scrutinee, inner, span=span)
    if isinstance(pat, A.PAt):
        if isinstance(pat.inner, A.PVar):
            return A.LetAt(pat.inner.name, pat.time, scrutinee, body, span=span)
        if isinstance(pat.inner, A.PUnit):
            return A.LetUnitAt(pat.time, scrutinee, body, span=span)
        if isinstance(pat.inner, A.PPair):
            lp, rp = pat.inner.left, pat.inner.right
            if isinstance(lp, A.PVar) and isinstance(rp, A.PVar):
                return A.LetPairAt(lp.name, rp.name, pat.time, scrutinee, body, span=span)
            raise DesugarError("timed pair patterns must bind plain variables", span)
        raise DesugarError("pattern not expressible as primitive eliminations", span)
    if isinstance(pat, A.PPair):
        lp, rp = pat.left, pat.right
        # `let (x, a @ x) = t in u` unpacks an existential over the witness x.
        if (
            isinstance(lp, A.PVar)
            and isinstance(rp, A.PAt)
            and isinstance(rp.time, A.IVar)
            and rp.time.name == lp.name
        ):
            v = fresh.fresh()
            inner = _expand_let(rp, A.Var(v, span=span), body, fresh, span)
            return A.LetPack(lp.name, v, scrutinee, inner, span=span)
        lname = lp.name if isinstance(lp, A.PVar) else fresh.fresh()
        rname = rp.name if isinstance(rp, A.PVar) else fresh.fresh()
        inner = body
        if not isinstance(rp, A.PVar):
            inner = _expand_let(rp, A.Var(rname, span=span), inner, fresh, span)
        if not isinstance(lp, A.PVar):
            inner = _expand_let(lp, A.Var(lname, span=span), inner, fresh, span)
        return A.LetPair(lname, rname, scrutinee, inner, span=span)
    raise DesugarError("unsupported pattern", span)
