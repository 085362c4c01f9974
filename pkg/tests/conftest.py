from __future__ import annotations

import functools
import glob
import os

import pytest

from lwidget import parser, typecheck

HERE = os.path.dirname(__file__)
CORPUS = os.path.abspath(os.path.join(HERE, "..", "corpus"))
TRACES = os.path.join(CORPUS, "traces")

POSITIVE = sorted(
    p
    for p in glob.glob(os.path.join(CORPUS, "*.lw"))
    if os.path.basename(p) not in ("zip_attempt.lw", "select_outer.lw")
)
NEGATIVE = sorted(
    os.path.join(CORPUS, n) for n in ("zip_attempt.lw", "select_outer.lw")
)
ALL_PROGRAMS = sorted(POSITIVE + NEGATIVE)


def corpus_path(name: str) -> str:
    return os.path.join(CORPUS, name)


def read(name: str) -> str:
    with open(corpus_path(name), encoding="utf-8") as f:
        return f.read()


@functools.lru_cache(maxsize=None)
def checked(path: str) -> typecheck.CheckResult:
    """Parse, desugar, and typecheck a corpus file (cached per session)."""
    with open(path, encoding="utf-8") as f:
        prog = parser.desugar(parser.parse(f.read()))
    return typecheck.check_program(prog)


@pytest.fixture
def turn_red():
    result = checked(corpus_path("turn_red.lw"))
    assert result.ok
    return result
