from __future__ import annotations

from lwidget import ast as A
from lwidget.parser import parse_lin_type, parse_term
from lwidget.pretty import pp_term
from lwidget.typecheck import subst_index_in_term, subst_term


def lt(src: str) -> A.LinType:
    return parse_lin_type(src)


class TestAlphaEq:
    def test_identical(self):
        assert A.alpha_eq(lt("Widget i -o Widget i"), lt("Widget i -o Widget i"))

    def test_forall_binder_renaming(self):
        assert A.alpha_eq(
            lt("forall (i : Id). Widget i -o Widget i"),
            lt("forall (j : Id). Widget j -o Widget j"),
        )

    def test_exists_binder_renaming(self):
        assert A.alpha_eq(lt("exists (x : Time). I @ x"), lt("exists (t : Time). I @ t"))

    def test_nu_binder_renaming(self):
        assert A.alpha_eq(lt("nu s. Ev (F Char * s)"), lt("nu r. Ev (F Char * r)"))

    def test_free_variables_must_match(self):
        assert not A.alpha_eq(lt("Widget i"), lt("Widget j"))

    def test_structure_must_match(self):
        assert not A.alpha_eq(lt("I * I"), lt("I + I"))
        assert not A.alpha_eq(lt("Ev I"), lt("I"))

    def test_binder_renaming_is_consistent(self):
        # Both binders map to the same name on one side: not alpha-equal.
        assert not A.alpha_eq(
            lt("forall (i : Id). forall (j : Id). Widget i"),
            lt("forall (j : Id). forall (i : Id). Widget i"),
        )

    def test_sorts_must_match(self):
        assert not A.alpha_eq(
            lt("forall (i : Id). I"), lt("forall (i : Time). I")
        )


class TestIndexSubstitutionInTypes:
    def test_substitutes_free_occurrences(self):
        ty = lt("Widget i -o Prefix i x")
        out = A.subst_index_in_type({"x": A.ILit(3)}, ty)
        assert A.alpha_eq(out, lt("Widget i -o Prefix i 3"))

    def test_bound_occurrences_are_untouched(self):
        ty = lt("forall (x : Time). I @ x")
        out = A.subst_index_in_type({"x": A.ILit(3)}, ty)
        assert A.alpha_eq(out, ty)

    def test_capture_avoidance(self):
        # Substituting y for x under a binder named y must not capture.
        ty = lt("forall (y : Time). I @ x")
        out = A.subst_index_in_type({"x": A.IVar("y")}, ty)
        assert not A.alpha_eq(out, lt("forall (y : Time). I @ y"))
        assert A.alpha_eq(out, lt("forall (z : Time). I @ y"))

    def test_simultaneous_swap(self):
        ty = lt("Prefix i x @ y")
        out = A.subst_index_in_type({"x": A.IVar("y"), "y": A.IVar("x")}, ty)
        assert A.alpha_eq(out, lt("Prefix i y @ x"))


class TestTypeVariableSubstitution:
    def test_unfold_nu(self):
        ty = lt("nu s. Ev (F Char * s)")
        assert isinstance(ty, A.TNu)
        out = A.unfold_nu(ty)
        assert A.alpha_eq(out, lt("Ev (F Char * (nu s. Ev (F Char * s)))"))

    def test_subst_tyvar_respects_shadowing(self):
        ty = lt("s * (nu s. s)")
        out = A.subst_tyvar("s", lt("I"), ty)
        assert A.alpha_eq(out, lt("I * (nu s. s)"))


class TestFreeIndexVars:
    def test_free_vars_of_open_type(self):
        assert A.free_index_vars_type(lt("Prefix i x -o I @ y")) == {"i", "x", "y"}

    def test_binders_remove_vars(self):
        assert A.free_index_vars_type(lt("forall (i : Id). Widget i")) == set()
        assert A.free_index_vars_type(lt("exists (x : Time). I @ x * I @ y")) == {"y"}


class TestTermSubstitution:
    def test_simple_substitution(self):
        t = parse_term("fn y. (x, y)")
        out = subst_term("x", parse_term("()"), t)
        assert pp_term(out) == pp_term(parse_term("fn y. ((), y)"))

    def test_shadowed_binder_blocks_substitution(self):
        t = parse_term("fn x. x")
        out = subst_term("x", parse_term("()"), t)
        assert pp_term(out) == pp_term(t)

    def test_capture_avoidance_renames_binder(self):
        # Substituting a term mentioning y under a y-binder must rename it.
        t = parse_term("fn y. (x, y)")
        out = subst_term("x", parse_term("y"), t)
        assert isinstance(out, A.Lam)
        assert out.var != "y"
        assert isinstance(out.body, A.Pair)
        assert isinstance(out.body.left, A.Var) and out.body.left.name == "y"
        assert isinstance(out.body.right, A.Var) and out.body.right.name == out.var

    def test_let_scrutinee_is_substituted_but_bound_body_not(self):
        t = parse_term("let (a, x) = x in (a, x)")
        out = subst_term("x", parse_term("()"), t)
        assert isinstance(out, A.LetPat)
        assert isinstance(out.scrutinee, A.Unit)
        # x is rebound by the pattern, so the body keeps its own x.
        assert pp_term(out.body) == pp_term(parse_term("(a, x)"))


class TestIndexSubstitutionInTerms:
    def test_free_index_is_substituted(self):
        t = parse_term("u @ x")
        out = subst_index_in_term({"x": A.ILit(2)}, t)
        assert isinstance(out, A.Delay)
        assert out.time == A.ILit(2)

    def test_bound_index_is_untouched(self):
        t = parse_term("let pack(x, q) = e in q @ x")
        out = subst_index_in_term({"x": A.ILit(2)}, t)
        assert isinstance(out, A.LetPat)
        body = out.body
        assert isinstance(body, A.Delay)
        assert body.time == A.IVar("x")
