"""Command-line surface: the figure-reproduction demo, scripted merges,
log replay, rendering, fixture regeneration, and the HTTP service."""

from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
from pathlib import Path

from . import demo
from .merge import (
    Conflict,
    ConflictsUnresolved,
    FailOnConflict,
    MergeError,
    PolicyResolver,
    Resolution,
    merge,
    merge_interactive,
)
from .model import render
from .persistence import (
    PersistenceError,
    canonical_bytes,
    load_document,
    load_log,
    replay,
    save_document,
)

DEFAULT_FIXTURES = os.environ.get("BLOCKMERGE_FIXTURES", "fixtures")


def _fixture_dir(args: argparse.Namespace) -> Path:
    return Path(args.fixtures or DEFAULT_FIXTURES)


def cmd_demo(args: argparse.Namespace) -> int:
    """Rebuild every paper figure from the base document and the organizer
    logs, and compare renders and canonical snapshots byte-for-byte against
    the golden fixtures."""
    fixtures = _fixture_dir(args)
    if not fixtures.is_dir():
        print(f"fixture directory not found: {fixtures}", file=sys.stderr)
        return 1
    figures = demo.build_figures()
    failures = 0
    for name in demo.FIGURE_NAMES:
        doc = figures[name]
        problems = []
        expected_render = (fixtures / f"{name}.txt").read_text(encoding="utf-8")
        actual_render = render(doc) + "\n"
        if actual_render != expected_render:
            problems.append(
                "".join(
                    difflib.unified_diff(
                        expected_render.splitlines(keepends=True),
                        actual_render.splitlines(keepends=True),
                        fromfile=f"{name}.txt (golden)",
                        tofile=f"{name}.txt (rebuilt)",
                    )
                )
            )
        expected_bytes = (fixtures / f"{name}.json").read_bytes()
        if canonical_bytes(doc) != expected_bytes:
            problems.append(f"{name}.json: canonical serialization differs")
        label = name.replace("fig", "Fig.")
        if problems:
            failures += 1
            print(f"{label} MISMATCH")
            for problem in problems:
                print(problem)
        else:
            print(f"{label} OK")
    return 1 if failures else 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    written = demo.write_fixtures(_fixture_dir(args))
    for name in written:
        print(name)
    return 0


class _TerminalChannel:
    """Interactive conflict prompts on stdin/stdout."""

    def ask(self, conflict: Conflict) -> Resolution | None:
        print(f"conflict {conflict.conflict_id}: {conflict.kind} at {conflict.site}")
        print(f"  [a] {conflict.option_a.description}")
        print(f"  [b] {conflict.option_b.description}")
        while True:
            answer = input("choose a/b (or q to abort): ").strip().lower()
            if answer == "a":
                return Resolution("take-a")
            if answer == "b":
                return Resolution("take-b")
            if answer == "q":
                return None


def cmd_merge(args: argparse.Namespace) -> int:
    try:
        base = load_document(args.base)
        log_a = load_log(args.log_a)
        log_b = load_log(args.log_b)
    except PersistenceError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        if args.policy == "prompt":
            outcome = merge_interactive(base, log_a, log_b, _TerminalChannel())
            if outcome.incomplete:
                print("merge aborted", file=sys.stderr)
                return 2
        else:
            resolvers = {
                "prefer-a": PolicyResolver("a"),
                "prefer-b": PolicyResolver("b"),
                "fail-on-conflict": FailOnConflict(),
            }
            outcome = merge(base, log_a, log_b, resolvers[args.policy])
    except ConflictsUnresolved as exc:
        print(f"conflict: {exc}", file=sys.stderr)
        return 2
    except MergeError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    assert outcome.document is not None
    if args.out:
        save_document(outcome.document, args.out)
    else:
        sys.stdout.write(canonical_bytes(outcome.document).decode("utf-8"))
    report = {
        "conflicts": [c.to_jsonable() for c in outcome.conflicts],
        "dirty": sorted(str(i) for i in outcome.dirty),
    }
    if args.conflicts_out:
        Path(args.conflicts_out).write_text(
            json.dumps(report, indent=2) + "\n", encoding="utf-8"
        )
    else:
        sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        base = load_document(args.base)
        log = load_log(args.log)
        doc = replay(base, log)
    except PersistenceError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    sys.stdout.write(canonical_bytes(doc).decode("utf-8"))
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    try:
        doc = load_document(args.document)
    except PersistenceError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(render(doc))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    figures = demo.build_figures()
    app = create_app(fixture_docs={"demo": figures["fig2"]})
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockmerge",
        description="Local-first structural document merging with computed values",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_demo = sub.add_parser("demo", help="reproduce the paper figures")
    p_demo.add_argument("--fixtures", help="fixture directory override")
    p_demo.set_defaults(func=cmd_demo)

    p_fix = sub.add_parser("fixtures", help="regenerate fixture files")
    p_fix.add_argument("--fixtures", help="fixture directory override")
    p_fix.set_defaults(func=cmd_fixtures)

    p_merge = sub.add_parser("merge", help="merge two edit logs over a base document")
    p_merge.add_argument("base")
    p_merge.add_argument("log_a")
    p_merge.add_argument("log_b")
    p_merge.add_argument(
        "--policy",
        choices=["prefer-a", "prefer-b", "fail-on-conflict", "prompt"],
        default="prefer-a",
    )
    p_merge.add_argument("--out", help="write the merged document here")
    p_merge.add_argument("--conflicts-out", help="write the conflict report here")
    p_merge.set_defaults(func=cmd_merge)

    p_replay = sub.add_parser("replay", help="replay a log and print the document")
    p_replay.add_argument("base")
    p_replay.add_argument("log")
    p_replay.set_defaults(func=cmd_replay)

    p_render = sub.add_parser("render", help="print a document's text rendering")
    p_render.add_argument("document")
    p_render.set_defaults(func=cmd_render)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8400)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
