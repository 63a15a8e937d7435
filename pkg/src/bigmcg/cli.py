"""Command-line entry point: ``bigmcg <command> ...``."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import script as sc
from .action import apply_to_curve, end_permutation
from .homology import (OracleError, TruncationWindow, format_sparse, lattice,
                       word_matrix)
from .model import (MODEL_DIR_ENV, ModelError, UnknownCurve, available_models,
                    instantiate, load_model, parse_curve, read_template,
                    validate_model)
from .word import parse_word

REPORT_DIR = "reports"


class UsageError(Exception):
    pass


def _window(args) -> TruncationWindow:
    return TruncationWindow(args.window, args.margin)


def _load(ref: str) -> sc.Script:
    if os.path.isfile(ref):
        with open(ref, encoding="utf-8") as fh:
            name = os.path.splitext(os.path.basename(ref))[0]
            return sc.parse(fh.read(), name)
    if ref not in sc.CORPUS:
        raise UsageError(f"no script file or corpus entry named {ref!r}")
    return sc.load_script(ref)


def _report_path(rep: sc.Report, fmt: str, where: str) -> str:
    stem = rep.script + ("" if rep.n is None else f"-n{rep.n}")
    ext = "json" if fmt == "json" else "txt"
    if where and not os.path.isdir(where) and not where.endswith(os.sep):
        return where
    return os.path.join(where or REPORT_DIR, f"{stem}.{ext}")


def _emit(rep: sc.Report, args, where: str | None) -> None:
    body = rep.to_json(timing=False) + "\n" if args.format == "json" else rep.to_text()
    sys.stdout.write(body)
    if where is not None:
        path = _report_path(rep, args.format, where)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rep.to_json(timing=True) + "\n" if args.format == "json" else body)


def _replay(job):
    name, n, N, margin = job
    return sc.replay(sc.load_script(name), n, TruncationWindow(N, margin))


def cmd_verify(args) -> int:
    s = _load(args.script)
    ns = [args.n] if args.n is not None else list(sc.parameter_sets(s))
    ok = True
    for n in ns:
        rep = sc.replay(s, n, _window(args))
        _emit(rep, args, args.report)
        ok &= rep.passed
    return 0 if ok else 1


def cmd_verify_all(args) -> int:
    jobs = []
    for name in sorted(sc.CORPUS):
        for n in sc.parameter_sets(sc.load_script(name)):
            if args.n_list and n is not None and n not in args.n_list:
                continue
            jobs.append((name, n, args.window, args.margin))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_replay, jobs))
    else:
        reports = [_replay(j) for j in jobs]
    for rep in reports:
        if args.format == "summary":
            n = "" if rep.n is None else f" n={rep.n}"
            print(f"{'PASS' if rep.passed else 'FAIL'} {rep.script}{n}")
        else:
            _emit(rep, args, args.report)
    return 0 if all(r.passed for r in reports) else 1


def _model(args):
    try:
        return load_model(args.model, args.n)
    except ModelError as exc:
        raise UsageError(str(exc)) from exc


def cmd_action(args) -> int:
    m = _model(args)
    w = parse_word(args.word, m)
    c = parse_curve(args.curve, m.n)
    out = apply_to_curve(w, c, m)
    if out.resolved:
        print(out.curve)
        return 0
    print(f"unresolved: {out.term} ({out.reason})")
    return 1


def cmd_ends(args) -> int:
    m = _model(args)
    print(end_permutation(parse_word(args.word, m), m))
    return 0


def cmd_matrix(args) -> int:
    m = _model(args)
    win = _window(args)
    try:
        M = word_matrix(parse_word(args.word, m), m, win)
    except OracleError as exc:
        print(f"no matrix: {exc}", file=sys.stderr)
        return 1
    print(format_sparse(M, lattice(m, win)))
    return 0


def cmd_validate(args) -> int:
    tpl = read_template(args.file)
    ns = [None]
    if tpl.kind == "s_n":
        ns = [args.n] if args.n is not None else sorted({tpl.min_n or 3, 8})
    bad = 0
    for n in ns:
        problems = validate_model(instantiate(tpl, n), args.bound)
        tag = tpl.name + ("" if n is None else f" n={n}")
        print(f"{tag}: {'valid' if not problems else f'{len(problems)} violation(s)'}")
        for p in problems:
            print(f"  {p}")
        bad += len(problems)
    return 0 if bad == 0 else 1


def cmd_models(args) -> int:
    for name in available_models():
        tpl = read_template(name)
        extra = f" (n >= {tpl.min_n})" if tpl.kind == "s_n" else ""
        print(f"{name}  kind={tpl.kind}{extra}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bigmcg",
        description="Replay and check generation proofs in big mapping class groups.",
        epilog=f"Extra model files are looked up in ${MODEL_DIR_ENV}.")
    sub = p.add_subparsers(dest="command", required=True)

    def window_opts(q):
        q.add_argument("--window", type=int, default=16, metavar="N",
                       help="truncation genus N of the homology oracle (default 16)")
        q.add_argument("--margin", type=int, default=4, help="extra handles past N (default 4)")

    q = sub.add_parser("verify", help="replay one script")
    q.add_argument("script", help="corpus name or path to a .mcg file")
    q.add_argument("--n", type=int, help="number of ends (default: every standard value)")
    window_opts(q)
    q.add_argument("--report", nargs="?", const="", metavar="PATH",
                   help=f"also write the report (default directory {REPORT_DIR}/)")
    q.add_argument("--format", choices=("text", "json"), default="text")
    q.set_defaults(func=cmd_verify)

    q = sub.add_parser("verify-all", help="replay the whole corpus")
    q.add_argument("--n-list", type=int, nargs="+", metavar="K",
                   help="restrict parametric scripts to these n")
    window_opts(q)
    q.add_argument("--report", nargs="?", const="", metavar="DIR")
    q.add_argument("--format", choices=("text", "json", "summary"), default="summary")
    q.add_argument("--jobs", type=int, default=1, help="worker processes")
    q.set_defaults(func=cmd_verify_all)

    q = sub.add_parser("action", help="image of a curve under a word")
    q.add_argument("word")
    q.add_argument("curve")
    q.add_argument("--model", required=True)
    q.add_argument("--n", type=int)
    q.set_defaults(func=cmd_action)

    q = sub.add_parser("ends", help="permutation of the ends induced by a word")
    q.add_argument("word")
    q.add_argument("--model", required=True)
    q.add_argument("--n", type=int)
    q.set_defaults(func=cmd_ends)

    q = sub.add_parser("matrix", help="sparse homology matrix (M - I) of a word")
    q.add_argument("word")
    q.add_argument("--model", required=True)
    q.add_argument("--n", type=int)
    window_opts(q)
    q.set_defaults(func=cmd_matrix)

    q = sub.add_parser("validate-model", help="check a model file's invariants")
    q.add_argument("file", help="path to a .model file or a shipped model name")
    q.add_argument("--n", type=int)
    q.add_argument("--bound", type=int, default=3, help="largest |index| checked")
    q.set_defaults(func=cmd_validate)

    q = sub.add_parser("models", help="list available models")
    q.set_defaults(func=cmd_models)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ModelError, UnknownCurve, sc.ScriptError, ValueError) as exc:
        print(f"bigmcg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
