"""Derivation scripts: parsing, printing and replay.

A script is a list of statements, one per line (a trailing ``\\`` joins the
next line)::

    model s_n
    require n >= 8
    let R = R
    let F1 = B[1,1]*C[0,3]*A[1,4]*H[n-1]
    step F2 = F1^R^R expect B[1,3]*C[0,5]*A[1,6]*H[1]
    claim F2 in G
"""
from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import rewrite as rw
from .action import apply_to_curve, end_permutation, sym_generation_check
from .homology import TruncationWindow, oracle_check
from .model import (BoundViolation, CurveId, ModelError, Pattern, evaluate_int, load_model,
                    read_template,
                    parse_curve)
from .word import Word, normal_form, parse_word


class ScriptError(Exception):
    pass


class ScriptSyntaxError(ScriptError):
    def __init__(self, msg: str, line: int, col: int = 1):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line, self.col = line, col


class UnboundIdentifier(ScriptError):
    pass


class ConstraintUnsatisfiable(ScriptError):
    pass


# --- statements ---------------------------------------------------------------

@dataclass(frozen=True)
class Require:
    op: str
    bound: int


@dataclass(frozen=True)
class Let:
    name: str
    expr: object


@dataclass(frozen=True)
class Step:
    name: str
    expr: object
    expect: object = None
    via: tuple = ()
    when: int | None = None     # only replayed for n >= when


@dataclass(frozen=True)
class Define:
    curve: str
    expr: object
    base: str


@dataclass(frozen=True)
class ClaimMember:
    expr: object


@dataclass(frozen=True)
class ClaimSym:
    names: tuple


@dataclass(frozen=True)
class ClaimEnds:
    expr: object
    cycles: str                 # "(1 2)(3 4)" or "cycle(n)"


@dataclass(frozen=True)
class Assume:
    name: str
    text: str
    grants: tuple = ()


@dataclass(frozen=True)
class Refute:
    lhs: object
    rhs: object


@dataclass
class Script:
    name: str = ""
    model: str = ""
    statements: list = field(default_factory=list)

    def __eq__(self, other) -> bool:
        return isinstance(other, Script) and self.model == other.model \
            and self.statements == other.statements

    @property
    def requires(self) -> list:
        return [s for s in self.statements if isinstance(s, Require)]


# --- expression parser ---------------------------------------------------------

_TOKENS = re.compile(r"""
    (?P<ws>\s+)
  | (?P<letter>A'\[[^\]]*\]|[ABCD]\[[^\]]*\]|H\[[^\]]*\]|TAU1\b|TAU2\b|TAU\b|H\b|R\b)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<int>\d+)
  | (?P<op>[*~^(),\-])
""", re.X)

_FUNCS = {"conj", "inv", "pow"}


class _Parser:
    def __init__(self, text: str, line: int, col0: int = 0):
        self.text, self.line, self.col0 = text, line, col0
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKENS.match(text, pos)
            if not m:
                self.fail("unexpected character", pos)
            if m.lastgroup != "ws":
                self.toks.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.k = 0

    def fail(self, msg, pos=None):
        if pos is None:
            pos = self.toks[self.k][2] if self.k < len(self.toks) else len(self.text)
        raise ScriptSyntaxError(msg, self.line, self.col0 + pos + 1)

    def peek(self, value=None):
        if self.k >= len(self.toks):
            return None
        t = self.toks[self.k]
        return t if value is None or t[1] == value else None

    def take(self, value=None):
        t = self.peek(value)
        if t is None:
            self.fail(f"expected {value!r}" if value else "unexpected end of expression")
        self.k += 1
        return t

    def done(self):
        if self.k != len(self.toks):
            self.fail(f"unexpected {self.toks[self.k][1]!r}")

    def expr(self):
        items = [self.term()]
        while self.peek("*"):
            self.take("*")
            items.append(self.term())
        return items[0] if len(items) == 1 else rw.Mul(tuple(items))

    def term(self):
        node = self.factor()
        while self.peek("^"):
            self.take("^")
            t = self.peek()
            if t and (t[0] == "int" or t[1] == "-"):
                sign = "-" if t[1] == "-" and self.take("-") else ""
                node = rw.Pow(node, sign + self.take()[1])
            else:
                node = rw.Conj(node, self.factor())
        return node

    def factor(self):
        if self.peek("~"):
            self.take("~")
            return rw.Inv(self.factor())
        return self.atom()

    def atom(self):
        t = self.peek()
        if t is None:
            self.fail("unexpected end of expression")
        kind, val, _ = t
        if val == "(":
            self.take("(")
            e = self.expr()
            self.take(")")
            return e if not isinstance(e, rw.Mul) else rw.Mul(e.items)
        if kind == "letter":
            self.take()
            return rw.Lit(val)
        if kind == "int" and val == "1":
            self.take()
            return rw.Ident()
        if kind == "name" and val in _FUNCS and self.k + 1 < len(self.toks) \
                and self.toks[self.k + 1][1] == "(":
            self.take()
            self.take("(")
            a = self.expr()
            if val == "inv":
                self.take(")")
                return rw.Inv(a)
            self.take(",")
            if val == "conj":
                b = self.expr()
                self.take(")")
                return rw.Conj(a, b)
            start = self.toks[self.k][2]
            depth = 0
            while True:
                t = self.take()
                if t[1] == "(":
                    depth += 1
                elif t[1] == ")":
                    if depth == 0:
                        break
                    depth -= 1
            exp = self.text[start:t[2]].strip()
            return rw.Pow(a, exp)
        if kind == "name":
            self.take()
            return rw.Name(val)
        self.fail(f"unexpected {val!r}")


def parse_expr(text: str, line: int = 1, col0: int = 0):
    p = _Parser(text, line, col0)
    e = p.expr()
    p.done()
    return e


# --- statement parser -----------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_']*"
_STEP_TAIL = re.compile(r"\s+(expect|via|when)\s+")


def _split_step(body: str):
    """Split ``expr [expect e] [via a,b] [when n >= K]`` on its keywords."""
    parts = {"expr": None}
    cur, start = "expr", 0
    for m in _STEP_TAIL.finditer(body):
        parts[cur] = body[start:m.start()]
        cur, start = m.group(1), m.end()
    parts[cur] = body[start:]
    return parts


def _logical_lines(text: str):
    buf, first = "", None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip() if not raw.lstrip().startswith("assume") \
            else _strip_comment_outside_quotes(raw).rstrip()
        if first is None:
            first = no
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        if buf.strip():
            yield first, buf.strip()
        buf, first = "", None
    if buf.strip():
        yield first, buf.strip()


def _strip_comment_outside_quotes(s: str) -> str:
    inq = False
    for i, ch in enumerate(s):
        if ch == '"':
            inq = not inq
        elif ch == "#" and not inq:
            return s[:i]
    return s


def parse(text: str, name: str = "") -> Script:
    """Parse script source; raises ScriptSyntaxError or UnboundIdentifier."""
    s = Script(name=name)
    known: set = set()
    for no, line in _logical_lines(text):
        kw, _, rest = line.partition(" ")
        rest = rest.strip()
        col = len(line) - len(rest)
        if kw == "model":
            if not re.fullmatch(r"[\w.-]+", rest):
                raise ScriptSyntaxError("expected a model name", no, col + 1)
            s.model = rest
        elif kw == "require":
            m = re.fullmatch(r"n\s*(>=|>)\s*(\d+)", rest)
            if not m:
                raise ScriptSyntaxError("expected 'require n >= K'", no, col + 1)
            s.statements.append(Require(m.group(1), int(m.group(2))))
        elif kw in ("let", "step"):
            m = re.fullmatch(rf"({_NAME})\s*=\s*(.+)", rest)
            if not m:
                raise ScriptSyntaxError(f"expected '{kw} NAME = expression'", no, col + 1)
            nm = m.group(1)
            if nm in known:
                raise ScriptSyntaxError(f"{nm} is already bound", no, col + 1)
            off = col + m.start(2)
            if kw == "let":
                e = parse_expr(m.group(2), no, off)
                _check_bound(e, known, no)
                s.statements.append(Let(nm, e))
            else:
                parts = _split_step(m.group(2))
                e = parse_expr(parts["expr"], no, off)
                _check_bound(e, known, no)
                exp = None
                if parts.get("expect") is not None:
                    exp = parse_expr(parts["expect"], no)
                    _check_bound(exp, known, no)
                via = tuple(v.strip() for v in parts["via"].split(",")) \
                    if parts.get("via") else ()
                for v in via:
                    if v not in rw.STRATEGIES:
                        raise ScriptSyntaxError(f"unknown strategy {v!r}", no)
                when = None
                if parts.get("when") is not None:
                    w = re.fullmatch(r"n\s*>=\s*(\d+)", parts["when"].strip())
                    if not w:
                        raise ScriptSyntaxError("expected 'when n >= K'", no)
                    when = int(w.group(1))
                s.statements.append(Step(nm, e, exp, via, when))
            known.add(nm)
        elif kw == "define":
            m = re.fullmatch(r"(D\[[^\]]+\])\s*=\s*image\((.+),\s*((?:A'|[ABCD])\[[^\]]*\])\s*\)",
                             rest)
            if not m:
                raise ScriptSyntaxError("expected 'define D[k] = image(expr, CURVE)'", no, col + 1)
            e = parse_expr(m.group(2), no)
            _check_bound(e, known, no)
            s.statements.append(Define(m.group(1), e, m.group(3)))
        elif kw == "claim":
            if rest.startswith("sym "):
                s.statements.append(ClaimSym(tuple(rest[4:].split())))
                continue
            m = re.fullmatch(r"ends\((.+)\)\s*=\s*(.+)", rest)
            if m:
                e = parse_expr(m.group(1), no)
                _check_bound(e, known, no)
                s.statements.append(ClaimEnds(e, m.group(2).strip()))
                continue
            m = re.fullmatch(r"(.+?)\s+in\s+G", rest)
            if not m:
                raise ScriptSyntaxError("expected 'claim EXPR in G', 'claim sym ...' or "
                                        "'claim ends(EXPR) = CYCLES'", no, col + 1)
            e = parse_expr(m.group(1), no)
            _check_bound(e, known, no)
            s.statements.append(ClaimMember(e))
        elif kw == "assume":
            m = re.fullmatch(rf'({_NAME})\s*:\s*"([^"]*)"(?:\s+grants\s+(.+))?', rest)
            if not m:
                raise ScriptSyntaxError('expected \'assume NAME: "text" [grants PATTERNS]\'',
                                        no, col + 1)
            grants = tuple(g.strip() for g in m.group(3).split(";")) if m.group(3) else ()
            for g in grants:
                try:
                    Pattern.parse(g)
                except ModelError as exc:
                    raise ScriptSyntaxError(str(exc), no) from exc
            s.statements.append(Assume(m.group(1), m.group(2), grants))
        elif kw == "refute":
            m = re.fullmatch(r"(.+?)\s*=\s*(.+)", rest)
            if not m:
                raise ScriptSyntaxError("expected 'refute EXPR = EXPR'", no, col + 1)
            a, b = parse_expr(m.group(1), no), parse_expr(m.group(2), no)
            _check_bound(a, known, no)
            _check_bound(b, known, no)
            s.statements.append(Refute(a, b))
        else:
            raise ScriptSyntaxError(f"unknown statement {kw!r}", no, 1)
    if s.requires and s.model:
        try:
            kind = read_template(s.model).kind
        except ModelError:
            kind = None
        if kind is not None and kind != "s_n":
            raise ConstraintUnsatisfiable(
                f"model {s.model} has no parameter n, so 'require' cannot be met")
    return s


def _names(e) -> set:
    if isinstance(e, rw.Name):
        return {e.id}
    if isinstance(e, rw.Mul):
        out = set()
        for x in e.items:
            out |= _names(x)
        return out
    if isinstance(e, (rw.Inv, rw.Pow)):
        return _names(e.arg)
    if isinstance(e, rw.Conj):
        return _names(e.arg) | _names(e.by)
    return set()


def _check_bound(e, known: set, line: int) -> None:
    missing = sorted(_names(e) - known)
    if missing:
        raise UnboundIdentifier(f"line {line}: {missing[0]} is not defined")


# --- printer -----------------------------------------------------------------------

def print_expr(e, top: bool = True) -> str:
    if isinstance(e, rw.Name):
        return e.id
    if isinstance(e, rw.Lit):
        return e.text
    if isinstance(e, rw.Ident):
        return "1"
    if isinstance(e, rw.Mul):
        body = "*".join(print_expr(x, False) for x in e.items)
        return body if top else f"({body})"
    if isinstance(e, rw.Inv):
        if isinstance(e.arg, (rw.Lit, rw.Name)):
            return "~" + e.arg.text if isinstance(e.arg, rw.Lit) else "~" + e.arg.id
        return f"inv({print_expr(e.arg)})"
    if isinstance(e, rw.Pow):
        return f"pow({print_expr(e.arg)}, {e.exp})"
    if isinstance(e, rw.Conj):
        return f"conj({print_expr(e.arg)}, {print_expr(e.by)})"
    raise TypeError(e)


def print_script(s: Script) -> str:
    out = [f"model {s.model}"] if s.model else []
    for st in s.statements:
        if isinstance(st, Require):
            out.append(f"require n {st.op} {st.bound}")
        elif isinstance(st, Let):
            out.append(f"let {st.name} = {print_expr(st.expr)}")
        elif isinstance(st, Step):
            line = f"step {st.name} = {print_expr(st.expr)}"
            if st.expect is not None:
                line += f" expect {print_expr(st.expect)}"
            if st.via:
                line += " via " + ",".join(st.via)
            if st.when is not None:
                line += f" when n >= {st.when}"
            out.append(line)
        elif isinstance(st, Define):
            out.append(f"define {st.curve} = image({print_expr(st.expr)}, {st.base})")
        elif isinstance(st, ClaimMember):
            out.append(f"claim {print_expr(st.expr)} in G")
        elif isinstance(st, ClaimSym):
            out.append("claim sym " + " ".join(st.names))
        elif isinstance(st, ClaimEnds):
            out.append(f"claim ends({print_expr(st.expr)}) = {st.cycles}")
        elif isinstance(st, Assume):
            line = f'assume {st.name}: "{st.text}"'
            if st.grants:
                line += " grants " + "; ".join(st.grants)
            out.append(line)
        elif isinstance(st, Refute):
            out.append(f"refute {print_expr(st.lhs)} = {print_expr(st.rhs)}")
    return "\n".join(out) + "\n"


# --- replay ---------------------------------------------------------------------------

@dataclass
class StepResult:
    name: str
    status: str               # certified+oracle-equal, certified, failed, skipped
    value: str = ""
    witness: str = ""
    certificate: dict | None = None
    oracle: str = ""
    reason: str = ""
    assumptions: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status in ("certified", "certified+oracle-equal", "skipped")


@dataclass
class ClaimResult:
    text: str
    holds: bool
    detail: str = ""


@dataclass
class Report:
    script: str
    model: str
    n: int | None
    window: TruncationWindow
    header: str = "ok"
    steps: list = field(default_factory=list)
    claims: list = field(default_factory=list)
    assumptions: list = field(default_factory=list)
    duration: float = 0.0

    @property
    def passed(self) -> bool:
        return self.header == "ok" and all(s.ok for s in self.steps) \
            and all(c.holds for c in self.claims)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "script": self.script,
            "model": self.model,
            "n": self.n,
            "window": {"N": self.window.N, "margin": self.window.margin},
            "header": self.header,
            "passed": self.passed,
            "steps": [{k: v for k, v in s.__dict__.items() if v not in ("", None, ())}
                      for s in self.steps],
            "claims": [c.__dict__ for c in self.claims],
            "assumptions": self.assumptions,
        }
        if timing:
            out["duration_s"] = round(self.duration, 4)
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=False)

    def to_text(self, timing: bool = True) -> str:
        n = "" if self.n is None else f" n={self.n}"
        lines = [f"script {self.script} model {self.model}{n} window N={self.window.N}"
                 f" margin={self.window.margin}"]
        if self.header != "ok":
            lines.append(f"header: {self.header}")
        for s in self.steps:
            tail = f"  [{s.reason}]" if s.reason else ""
            lines.append(f"  {s.status:<24} {s.name} = {s.value}{tail}")
            if s.oracle and s.status != "certified+oracle-equal" and s.status != "failed":
                lines.append(f"      oracle: {s.oracle}")
            if s.assumptions:
                lines.append(f"      rests on: {', '.join(s.assumptions)}")
        for c in self.claims:
            lines.append(f"  claim {'holds' if c.holds else 'FAILS'}: {c.text}"
                         + (f"  ({c.detail})" if c.detail else ""))
        for a in self.assumptions:
            lines.append(f"  assumption {a['name']}: {a['text']}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"{verdict}" + (f" in {self.duration:.3f}s" if timing else ""))
        return "\n".join(lines) + "\n"


def _header(s: Script, n: int | None) -> str:
    for r in s.requires:
        if n is None:
            return f"script requires n {r.op} {r.bound} but no n was given"
        if (r.op == ">=" and n < r.bound) or (r.op == ">" and n <= r.bound):
            return f"constraint n {r.op} {r.bound} fails at n={n}"
    return "ok"


def replay(s: Script, n: int | None = None, window: TruncationWindow | None = None) -> Report:
    return replay_session(s, n, window)[0]


def replay_session(s: Script, n: int | None = None, window: TruncationWindow | None = None
                   ) -> tuple[Report, rw.Session | None]:
    """Like ``replay`` but also hands back the final session (None on header failure)."""
    window = window or TruncationWindow()
    rep = Report(s.name, s.model, n, window)
    ses = None
    t0 = time.perf_counter()
    rep.header = _header(s, n)
    if rep.header == "ok" and not s.model and not s.statements:
        pass
    elif rep.header == "ok":
        try:
            model = load_model(s.model, n if s.requires else None)
        except (BoundViolation, ModelError, OSError) as exc:
            rep.header = f"model: {exc}"
        else:
            ses = rw.Session(model, window)
            _run(s, ses, rep, n)
    rep.duration = time.perf_counter() - t0
    return rep, ses


def _run(s: Script, ses: rw.Session, rep: Report, n: int | None) -> None:
    for st in s.statements:
        if isinstance(st, Require):
            continue
        if isinstance(st, Let):
            try:
                ses.add_generator(st.name, st.expr)
            except (rw.RewriteError, ValueError, ModelError) as exc:
                rep.steps.append(StepResult(st.name, "failed", reason=f"generator: {exc}"))
        elif isinstance(st, Assume):
            pats = tuple(Pattern.parse(g) for g in st.grants)
            ses.add_assumption(st.name, st.text, pats)
            rep.assumptions.append({"name": st.name, "text": st.text,
                                    "grants": list(st.grants)})
        elif isinstance(st, Step):
            rep.steps.append(_step(ses, st, n))
        elif isinstance(st, Define):
            rep.steps.append(_define(ses, st))
        elif isinstance(st, ClaimMember):
            rep.claims.append(_claim_member(ses, st))
        elif isinstance(st, ClaimSym):
            rep.claims.append(_claim_sym(ses, st))
        elif isinstance(st, ClaimEnds):
            rep.claims.append(_claim_ends(ses, st))
        elif isinstance(st, Refute):
            rep.claims.append(_refute(ses, st))


def _step(ses: rw.Session, st: Step, n: int | None) -> StepResult:
    if st.when is not None and (n is None or n < st.when):
        return StepResult(st.name, "skipped", reason=f"guard n >= {st.when} not met")
    try:
        ent, ev, cert = rw.session_step(ses, st.name, st.expr, st.expect, st.via)
    except rw.NotCertified as exc:
        verdict = oracle_check(exc.lhs, exc.rhs, ses.model, ses.window)
        return StepResult(st.name, "failed", value=str(exc.lhs), oracle=str(verdict),
                          reason=f"not certified: {exc.lhs} vs {exc.rhs}")
    except (rw.RewriteError, ValueError, ModelError) as exc:
        return StepResult(st.name, "failed", reason=str(exc))
    verdict = oracle_check(ev.literal, ent.value, ses.model, ses.window)
    if st.expect is not None and verdict.status != "unequal":
        target = ses.evaluate(st.expect).literal
        second = oracle_check(ev.literal, target, ses.model, ses.window)
        if second.status == "unequal":
            verdict = second
    cert.oracle = verdict.status
    res = StepResult(st.name, "", value=str(ent.value), witness=str(ev.literal),
                     certificate=cert.to_dict(), oracle=str(verdict),
                     assumptions=tuple(sorted(ent.deps)))
    if verdict.status == "unequal":
        res.status, res.reason = "failed", "oracle reports unequal matrices"
    elif not ent.member:
        res.status, res.reason = "failed", "not a member: uses letters outside G"
    elif not ev.expanded:
        res.status, res.reason = "failed", "; ".join(ev.notes)
    else:
        res.status = "certified+oracle-equal" if verdict.status == "equal" else "certified"
    return res


def _define(ses: rw.Session, st: Define) -> StepResult:
    n = ses.model.n
    try:
        curve = parse_curve(st.curve, n)
        base = parse_curve(st.base, n)
        d = ses.define(curve, st.expr, base)
    except (rw.RewriteError, ValueError, ModelError) as exc:
        return StepResult(st.curve, "failed", reason=str(exc))
    klass = ", ".join(f"{k}{','.join(map(str, h))}:{v}"
                      for (k, h), v in sorted((d.klass or {}).items(), key=str))
    return StepResult(str(curve), "certified", value=f"image of {base}",
                      witness=" ".join(map(str, d.word)),
                      certificate={"kind": "Definition", "lhs": str(curve),
                                   "rhs": f"({Word(d.word)})({base})",
                                   "rule": f"class {klass}" if klass else "class as declared"})


def _claim_member(ses: rw.Session, st: ClaimMember) -> ClaimResult:
    text = f"{print_expr(st.expr)} in G"
    try:
        ev = ses.evaluate(st.expr)
    except (rw.RewriteError, ValueError, ModelError) as exc:
        return ClaimResult(text, False, str(exc))
    if ev.member:
        deps = f"rests on {', '.join(sorted(ev.deps))}" if ev.deps else ""
        return ClaimResult(text, True, deps)
    hit = ses.member(ev.value)
    if hit is not None:
        return ClaimResult(text, True, f"equals {hit.name}")
    return ClaimResult(text, False, f"{ev.value} is not a certified element")


def _claim_sym(ses: rw.Session, st: ClaimSym) -> ClaimResult:
    text = "sym " + " ".join(st.names)
    try:
        perms = [end_permutation(ses.evaluate(rw.Name(x)).value, ses.model) for x in st.names]
    except rw.RewriteError as exc:
        return ClaimResult(text, False, str(exc))
    k = ses.model.num_ends
    ok = sym_generation_check(perms, k)
    return ClaimResult(text, ok, f"images {' '.join(map(str, perms))} "
                                 f"{'generate' if ok else 'do not generate'} Sym_{k}")


def _claim_ends(ses: rw.Session, st: ClaimEnds) -> ClaimResult:
    text = f"ends({print_expr(st.expr)}) = {st.cycles}"
    try:
        p = end_permutation(ses.evaluate(st.expr).value, ses.model)
    except rw.RewriteError as exc:
        return ClaimResult(text, False, str(exc))
    want = st.cycles.replace(" ", "")
    m = re.fullmatch(r"cycle\((.+)\)", want)
    if m:
        k = evaluate_int(m.group(1), {"n": ses.model.n} if ses.model.n else {})
        cyc = p.cycles()
        ok = len(cyc) == 1 and len(cyc[0]) == k
    else:
        ok = str(p).replace(" ", "") == want or (want == "()" and not p.cycles())
    return ClaimResult(text, ok, f"computed {p}")


def _refute(ses: rw.Session, st: Refute) -> ClaimResult:
    text = f"{print_expr(st.lhs)} != {print_expr(st.rhs)}"
    try:
        a, b = ses.evaluate(st.lhs).literal, ses.evaluate(st.rhs).literal
    except (rw.RewriteError, ValueError, ModelError) as exc:
        return ClaimResult(text, False, str(exc))
    v = oracle_check(a, b, ses.model, ses.window)
    return ClaimResult(text, v.status == "unequal", f"oracle {v}")


# --- corpus -----------------------------------------------------------------------

CORPUS = ("lemma-2.2R", "thm-n8", "thm-n3plus", "jacob-lemma", "thm-jacob",
          "lochness-lemma", "thm-lochness")

DEFAULT_PARAMS = {
    "lemma-2.2R": (3, 6),
    "thm-n8": (8, 10, 12),
    "thm-n3plus": (3, 5, 8),
}


def script_source(name: str) -> str:
    p = Path(name)
    if p.suffix == ".mcg" and p.exists():
        return p.read_text(encoding="utf-8")
    return resources.files("bigmcg").joinpath("data", "scripts", f"{name}.mcg") \
        .read_text(encoding="utf-8")


def load_script(name: str) -> Script:
    src = script_source(name)
    return parse(src, Path(name).stem if name.endswith(".mcg") else name)


def corpus() -> list[Script]:
    return [load_script(x) for x in CORPUS]


def parameter_sets(s: Script) -> tuple:
    if s.name in DEFAULT_PARAMS:
        return DEFAULT_PARAMS[s.name]
    return (None,) if not s.requires else (max(r.bound for r in s.requires),)


# --- mutations -----------------------------------------------------------------------

_INDEX = re.compile(r"(\[)(-?\d+)")


def mutation_sites(s: Script) -> list[int]:
    """Positions of steps whose expected word carries a literal genus index."""
    return [k for k, st in enumerate(s.statements)
            if isinstance(st, Step) and st.expect is not None
            and any(isinstance(x, rw.Lit) and _INDEX.search(x.text) for x in _lits(st.expect))]


def _lits(e):
    if isinstance(e, rw.Lit):
        yield e
    elif isinstance(e, rw.Mul):
        for x in e.items:
            yield from _lits(x)
    elif isinstance(e, (rw.Inv, rw.Pow)):
        yield from _lits(e.arg)
    elif isinstance(e, rw.Conj):
        yield from _lits(e.arg)
        yield from _lits(e.by)


def mutate(s: Script, site: int, which: int = 0, delta: int = 1) -> Script:
    """Copy of ``s`` with one genus index of one expected word shifted by ``delta``."""
    st = s.statements[site]
    lits = [x for x in _lits(st.expect) if _INDEX.search(x.text)]
    target = lits[which % len(lits)]

    def bump(m):
        v = int(m.group(2)) + delta
        if v == 0 and target.text.startswith(("A", "B")) and "," not in target.text:
            v += delta
        return f"{m.group(1)}{v}"

    new = rw.Lit(_INDEX.sub(bump, target.text, count=1))
    done = [False]

    def swap(e):
        if e is target and not done[0]:
            done[0] = True
            return new
        if isinstance(e, rw.Mul):
            return rw.Mul(tuple(swap(x) for x in e.items))
        if isinstance(e, rw.Inv):
            return rw.Inv(swap(e.arg))
        if isinstance(e, rw.Pow):
            return rw.Pow(swap(e.arg), e.exp)
        if isinstance(e, rw.Conj):
            return rw.Conj(swap(e.arg), swap(e.by))
        return e

    out = Script(s.name, s.model, list(s.statements))
    out.statements[site] = Step(st.name, st.expr, swap(st.expect), st.via, st.when)
    return out
