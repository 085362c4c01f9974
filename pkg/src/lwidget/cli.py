"""Command-line interface: check, run, enumerate, conform, serve.

Exit codes: 0 on success, 1 when the program is rejected or a run fails,
2 for usage errors (bad flags, unreadable files, malformed traces).
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import parser, runtime, semantics, server, typecheck
from .errors import CompatError, LwSyntaxError, StuckTerm, TraceTargetInvalid
from .pretty import pp_type
from .semantics import rename_ids, value_to_json


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, sort_keys=True))


def _check_file(path: str):
    """Parse, desugar, and typecheck; returns (result, error records)."""
    with open(path, encoding="utf-8") as f:
        source = f.read()
    try:
        prog = parser.desugar(parser.parse(source))
    except LwSyntaxError as e:
        return None, [{"kind": "SyntaxError", "message": e.message, "file": path,
                       "line": e.span.line, "col": e.span.col}]
    result = typecheck.check_program(prog)
    if not result.ok:
        return None, [e.to_record(path) for e in result.errors]
    return result, []


def _load_checked(path: str, as_json: bool = True):
    """Like _check_file, but print diagnostics and exit on failure."""
    result, errors = _check_file(path)
    if result is None:
        if as_json:
            _echo_json({"errors": errors})
        else:
            for e in errors:
                click.echo(
                    f"{e.get('file', path)}:{e.get('line', '?')}:{e.get('col', '?')}: "
                    f"{e['kind']}: {e['message']}",
                    err=True,
                )
        sys.exit(1)
    return result


@click.group()
def main() -> None:
    """Tools for the linear temporal widget language."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit the type table as JSON.")
def check(file: str, as_json: bool) -> None:
    """Typecheck FILE and print the signature of every definition."""
    result = _load_checked(file, as_json=as_json)
    if as_json:
        _echo_json({"ok": {name: pp_type(ty) for name, ty in result.types.items()}})
    else:
        for name, ty in result.types.items():
            click.echo(f"{name} : {pp_type(ty)}")


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False),
              help="Line-delimited JSON stimulus trace.")
@click.option("--horizon", type=click.IntRange(min=0), default=16, show_default=True)
@click.option("--tie", type=click.Choice(["left", "right", "seeded"]), default="seeded", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--entry", type=str, default=None, help="Definition to run (default: the program entry).")
@click.option("--render-at", type=int, default=None, help="Also report widget colors at this time.")
def run(file: str, trace_path: str | None, horizon: int, tie: str, seed: int,
        entry: str | None, render_at: int | None) -> None:
    """Run FILE against a stimulus trace and print the outcome."""
    result = _load_checked(file)
    try:
        stimuli = runtime.load_trace(trace_path) if trace_path else []
    except TraceTargetInvalid as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    try:
        r = runtime.run(result.program, horizon, stimuli, tie, seed, entry=entry)
    except (TraceTargetInvalid, CompatError, StuckTerm) as e:
        _echo_json({"error": {"kind": type(e).__name__, "message": str(e)}})
        sys.exit(1)
    doc = {
        "value": rename_ids(value_to_json(r.value)),
        "steps": r.steps,
        "choices": [[t, side] for t, side in r.choices],
        "fired": [s.to_json() for s in r.fired],
        "dropped": [s.to_json() for s in r.dropped],
    }
    if render_at is not None:
        doc["render"] = {str(k): v for k, v in sorted(semantics.render_state(r.value, render_at).items())}
    _echo_json(doc)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--horizon", type=click.IntRange(min=0), default=16, show_default=True)
@click.option("--alphabet", type=str, default="a", show_default=True,
              help="Characters a keypress may deliver.")
@click.option("--entry", type=str, default=None)
@click.option("--traces/--no-traces", default=False, help="Include one witness trace per outcome.")
def enumerate(file: str, horizon: int, alphabet: str, entry: str | None, traces: bool) -> None:
    """List every observable outcome of FILE under the horizon."""
    result = _load_checked(file)
    if not alphabet:
        click.echo("error: --alphabet must be non-empty", err=True)
        sys.exit(2)
    outcomes = semantics.enumerate_outcomes(result.program, horizon, tuple(alphabet), entry)
    outcomes.sort(key=lambda o: o.canonical)
    doc = {"count": len(outcomes),
           "outcomes": [json.loads(o.canonical) for o in outcomes]}
    if traces:
        doc["traces"] = [[s.to_json() for s in o.trace] for o in outcomes]
    _echo_json(doc)


@main.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("--horizon", type=click.IntRange(min=0), default=4, show_default=True)
@click.option("--alphabet", type=str, default="a", show_default=True)
@click.option("--entry", type=str, default=None)
def conform(path: str, horizon: int, alphabet: str, entry: str | None) -> None:
    """Replay every enumerated trace through the runtime and compare.

    PATH may be a single program or a directory of .lw files; ill-typed
    files in a directory are skipped.
    """
    if os.path.isdir(path):
        files = sorted(
            os.path.join(path, f) for f in os.listdir(path) if f.endswith(".lw")
        )
        if not files:
            click.echo(f"error: no .lw files in {path}", err=True)
            sys.exit(2)
    else:
        files = [path]
    docs = []
    ok = True
    for f in files:
        result, errors = _check_file(f)
        if result is None:
            if len(files) == 1:
                _echo_json({"errors": errors})
                sys.exit(1)
            docs.append({"file": f, "skipped": "does not typecheck"})
            continue
        report = runtime.conformance(result.program, horizon, tuple(alphabet), entry)
        ok = ok and report.ok
        docs.append({
            "file": f,
            "ok": report.ok,
            "outcomes": report.outcomes,
            "runs": report.runs,
            "failures": [
                {"tie": fl.tie_policy, "trace": [s.to_json() for s in fl.trace], "got": json.loads(fl.got)}
                for fl in report.failures
            ],
        })
    _echo_json(docs[0] if len(files) == 1 else {"ok": ok, "files": docs})
    if not ok:
        sys.exit(1)


@main.command()
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
def serve(host: str, port: int) -> None:
    """Serve the playground protocol over HTTP."""
    server.serve(host, port)


if __name__ == "__main__":
    main()
