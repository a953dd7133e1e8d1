"""Command-line front end: replay dialogues, emit traces, check gold files.

Usage::

    refdom resolve --kb kb.json --dialogue dlg.txt [--scene scene.json]
                   [--trace text|json] [--ambiguity first|report]
                   [--agreement on|off] [--proximity-threshold R]
    refdom check   ...same options... --gold gold.json

Dialogue files are plain text, one utterance per line; blank lines, comment
lines starting with '#' and "A1:"-style speaker prefixes are ignored.  Exit
codes: 0 when no expression failed (resolve) or every expectation held
(check), 2 otherwise, and 1 on any input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .domains import DomainError
from .engine import Resolution, Session, Verdict
from .kb import KBError, load_kb
from .parser import ParseError, TokenError
from .scene import GroupingParams, SceneError

_INPUT_ERRORS = (KBError, SceneError, TokenError, ParseError, DomainError, OSError, ValueError)


def _read_dialogue(path: str) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.strip().startswith("#")]


def record_dict(resolution: Resolution) -> dict:
    """Stable-keyed trace record for one referring expression."""
    record = {
        "utterance": resolution.utterance_index,
        "arg": resolution.arg_index,
        "surface": resolution.surface,
        "det": resolution.det,
        "usd": resolution.usd,
        "candidates": [{"domain": d, "outcome": o} for d, o in resolution.candidates],
        "accommodation": resolution.accommodation,
        "selected": resolution.domain,
        "referent": resolution.referent,
        "verdict": resolution.verdict.value if resolution.verdict else None,
        "fresh": resolution.fresh,
        "fail_reason": resolution.fail_reason,
        "restructure": resolution.restructure,
        "activation_head": resolution.activation_head,
    }
    if resolution.passing is not None:
        record["passing"] = resolution.passing
    return record


def _print_text(resolution: Resolution, out) -> None:
    tag = f"u{resolution.utterance_index}.a{resolution.arg_index}"
    if resolution.passing is not None:
        domains = ", ".join(resolution.passing) or "none"
        print(f'{tag} "{resolution.surface}" [{resolution.det}] passing: {domains}', file=out)
        return
    verdict = resolution.verdict.value if resolution.verdict else "-"
    target = resolution.referent or "-"
    via = f" via {resolution.domain}" if resolution.domain else ""
    print(f'{tag} "{resolution.surface}" [{resolution.det}] -> {target}{via} [{verdict}]', file=out)
    if resolution.candidates:
        tried = "; ".join(f"{d} {o}" for d, o in resolution.candidates)
        print(f"    tried: {tried}", file=out)
    if resolution.accommodation:
        print(f"    accommodation: {resolution.accommodation}", file=out)
    if resolution.restructure:
        print(f"    restructure: {resolution.restructure}", file=out)
    if resolution.fail_reason:
        print(f"    fail reason: {resolution.fail_reason}", file=out)


def _build_session(args) -> Session:
    kb = load_kb(args.kb)
    params = GroupingParams(proximity_threshold=args.proximity_threshold)
    return Session(
        kb,
        scene_path=args.scene,
        params=params,
        agreement=args.agreement == "on",
        ambiguity=args.ambiguity,
    )


def run_resolve(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        session = _build_session(args)
        lines = _read_dialogue(args.dialogue)
        for line in lines:
            session.process_line(line)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return 1
    for resolution in session.resolutions:
        if args.trace == "json":
            print(json.dumps(record_dict(resolution), ensure_ascii=False), file=out)
        else:
            _print_text(resolution, out)
    failed = any(r.verdict is Verdict.FAIL for r in session.resolutions)
    return 2 if failed else 0


def _load_gold(path: str) -> list[dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    expectations = data.get("expectations")
    if not isinstance(expectations, list):
        raise ValueError("gold file needs an 'expectations' list")
    return expectations


def _check_expectation(session: Session, annotation: dict) -> tuple[bool, str]:
    utt, arg = annotation["utt"], annotation["arg"]
    resolution = session.resolution_at(utt, arg)
    if resolution is None:
        raise ValueError(f"annotation points at missing expression u{utt}.a{arg}")
    expect = annotation["expect"]
    if expect == "new-referent":
        ok = resolution.fresh and resolution.verdict is not Verdict.FAIL
        return ok, f"expected a fresh referent, got {resolution.referent} (fresh={resolution.fresh})"
    if isinstance(expect, dict) and "verdict" in expect:
        actual = resolution.verdict.value if resolution.verdict else None
        return actual == expect["verdict"], f"expected verdict {expect['verdict']}, got {actual}"
    if isinstance(expect, dict) and "referent" in expect:
        return (
            resolution.referent == expect["referent"],
            f"expected referent {expect['referent']}, got {resolution.referent}",
        )
    if isinstance(expect, dict) and "coreferent_with" in expect:
        other_utt, other_arg = expect["coreferent_with"]
        other = session.resolution_at(other_utt, other_arg)
        if other is None:
            raise ValueError(f"annotation points at missing expression u{other_utt}.a{other_arg}")
        ok = (
            resolution.referent is not None
            and resolution.verdict is not Verdict.FAIL
            and resolution.referent == other.referent
        )
        return ok, f"expected coreference with u{other_utt}.a{other_arg} ({other.referent}), got {resolution.referent}"
    raise ValueError(f"unknown expectation {expect!r}")


def run_check(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        session = _build_session(args)
        for line in _read_dialogue(args.dialogue):
            session.process_line(line)
        expectations = _load_gold(args.gold)
        results = []
        for annotation in expectations:
            ok, detail = _check_expectation(session, annotation)
            results.append((annotation, ok, detail))
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=err)
        return 1
    all_ok = True
    for annotation, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        label = f"u{annotation['utt']}.a{annotation['arg']} {json.dumps(annotation['expect'], ensure_ascii=False)}"
        line = f"{status} {label}" if ok else f"{status} {label}: {detail}"
        print(line, file=out)
        all_ok = all_ok and ok
    print(f"{'all expectations satisfied' if all_ok else 'expectations violated'}", file=out)
    return 0 if all_ok else 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kb", required=True, help="knowledge-base JSON file")
    parser.add_argument("--dialogue", required=True, help="dialogue text file, one utterance per line")
    parser.add_argument("--scene", default=None, help="optional scene JSON file")
    parser.add_argument("--trace", choices=("text", "json"), default="text")
    parser.add_argument("--ambiguity", choices=("first", "report"), default="first")
    parser.add_argument("--agreement", choices=("on", "off"), default="off")
    parser.add_argument("--proximity-threshold", type=float, default=1.5)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="refdom", description="reference-domain dialogue replay")
    commands = parser.add_subparsers(dest="command", required=True)
    resolve = commands.add_parser("resolve", help="replay a dialogue and print one trace record per expression")
    _add_common(resolve)
    check = commands.add_parser("check", help="replay a dialogue and compare against gold expectations")
    _add_common(check)
    check.add_argument("--gold", required=True, help="gold expectations JSON file")
    args = parser.parse_args(argv)
    if args.command == "resolve":
        return run_resolve(args)
    return run_check(args)


if __name__ == "__main__":
    sys.exit(main())
