"""Declarative surface models: curve families, intersections, relabelings.

A model file is plain UTF-8 text split into bracketed sections.  The format
is described in ``docs/model-format.md``; the three shipped models live in
``bigmcg/data/models``.
"""
from __future__ import annotations

import ast
import os
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Iterable, Iterator

TWIST_FAMILIES = ("A", "A'", "B", "C")
FAMILY_RANK = {"A": 0, "A'": 1, "B": 2, "C": 3, "D": 4}

DOMAINS = {
    "positive": lambda i: i >= 1,
    "nonnegative": lambda i: i >= 0,
    "nonzero": lambda i: i != 0,
    "integers": lambda i: True,
}

MODEL_DIR_ENV = "BIGMCG_MODEL_DIR"


class ModelError(Exception):
    pass


class BoundViolation(ModelError):
    pass


class MalformedTemplate(ModelError):
    pass


class UnknownCurve(ModelError):
    pass


class RelabelGap(ModelError):
    def __init__(self, letter: str, curve: "CurveId"):
        super().__init__(f"{letter} has no relabel rule for {curve}")
        self.letter = letter
        self.curve = curve


@dataclass(frozen=True)
class CurveId:
    family: str
    index: int | str
    end: int | None = None

    def __str__(self) -> str:
        if self.end is None:
            return f"{self.family}[{self.index}]"
        return f"{self.family}[{self.index},{self.end}]"

    def sort_key(self) -> tuple:
        idx = (0, self.index, "") if isinstance(self.index, int) else (1, 0, self.index)
        return (self.end or 0, FAMILY_RANK[self.family], idx)


_CURVE_RE = re.compile(r"^\s*(A'|[ABCD])\[([^\]]*)\]\s*$")


def parse_curve(text: str, n: int | None = None) -> CurveId:
    """Parse ``A[1,2]``, ``C[-1]`` or ``D[e]``; index arithmetic may use ``n``."""
    m = _CURVE_RE.match(text)
    if not m:
        raise ValueError(f"not a curve: {text!r}")
    fam, body = m.group(1), m.group(2)
    parts = [p.strip() for p in body.split(",")]
    env = {} if n is None else {"n": n}
    if fam == "D":
        if len(parts) != 1:
            raise ValueError(f"D curves take a single key: {text!r}")
        key = parts[0]
        return CurveId("D", int(key) if re.fullmatch(r"-?\d+", key) else key)
    vals = [evaluate_int(p, env) for p in parts]
    if len(vals) == 1:
        return CurveId(fam, vals[0])
    if len(vals) == 2:
        end = vals[1] if n is None else (vals[1] - 1) % n + 1
        return CurveId(fam, vals[0], end)
    raise ValueError(f"bad curve index list: {text!r}")


# --- index expressions ---------------------------------------------------

_FUNCS = ("up", "down", "swap")


def _compile(text: str) -> ast.expr:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise MalformedTemplate(f"cannot parse expression {text!r}") from exc
    for node in ast.walk(tree):
        ok = isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Name, ast.Load,
                               ast.Add, ast.Sub, ast.Mult, ast.USub, ast.UAdd, ast.Compare,
                               ast.BoolOp, ast.And, ast.Or, ast.Eq, ast.NotEq, ast.Lt,
                               ast.LtE, ast.Gt, ast.GtE, ast.Call))
        if isinstance(node, ast.Constant):
            ok = isinstance(node.value, int)
        if isinstance(node, ast.Call):
            ok = isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1
        if not ok:
            raise MalformedTemplate(f"unsupported syntax in {text!r}")
    return tree.body


_NAME_CACHE: dict = {}


def _names(node: ast.expr) -> set[str]:
    got = _NAME_CACHE.get(id(node))
    if got is not None and got[0] is node:
        return got[1]
    out = _walk_names(node)
    _NAME_CACHE[id(node)] = (node, out)
    return out


def _walk_names(node: ast.expr) -> frozenset:
    out = set()
    for sub in ast.walk(node):
        if isinstance(sub, ast.Name):
            out.add(sub.id)
    out -= set(_FUNCS)
    return frozenset(out)


class _Ctx:
    def __init__(self, env: dict, n: int | None, endvars: frozenset = frozenset(),
                 swap: tuple[int, int] = (1, 2)):
        self.env = env
        self.n = n
        self.endvars = endvars
        self.swap = swap


def _ev(node: ast.expr, ctx: _Ctx):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in ctx.env:
            return ctx.env[node.id]
        raise MalformedTemplate(f"unresolved symbol {node.id!r}")
    if isinstance(node, ast.UnaryOp):
        v = _ev(node.operand, ctx)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _ev(node.left, ctx), _ev(node.right, ctx)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        return a * b
    if isinstance(node, ast.Call):
        v = _ev(node.args[0], ctx)
        name = node.func.id
        if name == "up":
            return 1 if v == -1 else v + 1
        if name == "down":
            return -1 if v == 1 else v - 1
        p, q = ctx.swap
        v = _wrap(v, ctx.n) if ctx.n else v
        return q if v == p else p if v == q else v
    if isinstance(node, ast.BoolOp):
        vals = [_ev(v, ctx) for v in node.values]
        return all(vals) if isinstance(node.op, ast.And) else any(vals)
    if isinstance(node, ast.Compare):
        left = node.left
        for op, right in zip(node.ops, node.comparators):
            a, b = _ev(left, ctx), _ev(right, ctx)
            if ctx.n and (_names(left) | _names(right)) & ctx.endvars:
                a, b = _wrap(a, ctx.n), _wrap(b, ctx.n)
            if not _cmp(op, a, b):
                return False
            left = right
        return True
    raise MalformedTemplate("bad expression node")


def _cmp(op, a, b) -> bool:
    return {ast.Eq: a == b, ast.NotEq: a != b, ast.Lt: a < b, ast.LtE: a <= b,
            ast.Gt: a > b, ast.GtE: a >= b}[type(op)]


def _wrap(v: int, n: int) -> int:
    return (v - 1) % n + 1


def evaluate_int(text: str, env: dict | None = None) -> int:
    return int(_ev(_compile(text), _Ctx(env or {}, None)))


# --- patterns -------------------------------------------------------------

_PAT_RE = re.compile(r"^\s*((?:A'|[ABCDX])(?:\|(?:A'|[ABCD]))*)\[([^\]]*)\]\s*$")


@dataclass(frozen=True)
class Pattern:
    families: tuple[str, ...] | None  # None means the family variable X
    args: tuple[ast.expr, ...]
    text: str

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        m = _PAT_RE.match(text)
        if not m:
            raise MalformedTemplate(f"bad curve pattern {text!r}")
        fams = None if m.group(1) == "X" else tuple(m.group(1).split("|"))
        args = tuple(_compile(a) for a in m.group(2).split(","))
        return cls(fams, args, text.strip())

    def match(self, curve: CurveId, env: dict, model: "SurfaceModel") -> dict | None:
        if self.families is None:
            if curve.family == "D":
                return None
            env = {**env, "X": curve.family}
        elif curve.family not in self.families:
            return None
        else:
            env = {**env, "X": curve.family}
        slots = model._slots(curve)
        if len(slots) != len(self.args):
            return None
        for pos, (arg, val) in enumerate(zip(self.args, slots)):
            is_end = model.parametric and pos == 1
            if isinstance(arg, ast.Name) and arg.id not in env:
                env = {**env, arg.id: val}
                if is_end:
                    env["__ends__"] = env.get("__ends__", frozenset()) | {arg.id}
                continue
            if not isinstance(val, int):
                return None
            free = _names(arg) - set(env) - {"n"}
            if free:
                env = _solve(arg, free, val, env, model, is_end)
                if env is None:
                    return None
                continue
            got = _ev(arg, model._ctx(env))
            if is_end:
                if _wrap(got, model.n) != val:
                    return None
            elif got != val:
                return None
        return env

    def build(self, env: dict, model: "SurfaceModel") -> CurveId:
        fam = env["X"] if self.families is None else self.families[0]
        vals = [_ev(a, model._ctx(env)) for a in self.args]
        if model.parametric:
            return CurveId(fam, vals[0], _wrap(vals[1], model.n))
        return CurveId(fam, vals[0])


def _solve(arg: ast.expr, free: set, val: int, env: dict, model: "SurfaceModel",
           is_end: bool) -> dict | None:
    """Bind the single free variable of ``arg`` so that it evaluates to ``val``."""
    if len(free) != 1:
        return None
    var = next(iter(free))

    def f(v):
        e = {**env, var: v}
        return _ev(arg, model._ctx(e))

    b = f(0)
    a = f(1) - b
    cands = []
    if a in (1, -1):
        cands.append((val - b) * a)
    cands += [val + d for d in (-2, -1, 0, 1, 2)] + [-val + d for d in (-1, 0, 1)]
    for v in cands:
        got = f(v)
        if (is_end and _wrap(got, model.n) == val) or (not is_end and got == val):
            if is_end:
                v = _wrap(v, model.n)
                out = {**env, var: v}
                out["__ends__"] = env.get("__ends__", frozenset()) | {var}
                return out
            return {**env, var: v}
    return None


def _split_when(text: str) -> tuple[str, ast.expr | None]:
    if " when " in text:
        head, cond = text.split(" when ", 1)
        cond = " and ".join(f"({c.strip()})" for c in cond.split(","))
        return head.strip(), _compile(cond)
    return text.strip(), None


def _split_flag(text: str) -> tuple[str, bool]:
    t = text.rstrip()
    if t.endswith("(figure)"):
        return t[: -len("(figure)")].rstrip(), True
    return t, False


# --- rules ----------------------------------------------------------------

@dataclass(frozen=True)
class IntersectionRule:
    left: Pattern
    right: Pattern
    value: int
    symmetric: bool
    cond: ast.expr | None
    figure: bool
    text: str


@dataclass(frozen=True)
class RelabelRule:
    letter: str          # "R", "H", "TAU1", ...
    inverse: bool
    param: str | None    # label variable, e.g. "k" for H[k]
    left: Pattern
    right: Pattern
    cond: ast.expr | None
    text: str


@dataclass(frozen=True)
class EndRule:
    letter: str
    inverse: bool
    param: str | None
    var: str
    expr: ast.expr
    text: str


@dataclass(frozen=True)
class SupportRule:
    letter: str | None       # relabel/shift letter name, or None for a curve pattern
    param: str | None
    pattern: Pattern | None
    cond: ast.expr | None
    kind: str                # "ends", "all", "local"
    ends: tuple[ast.expr, ...]
    text: str


@dataclass(frozen=True)
class Lantern:
    name: str
    boundary: tuple[CurveId, ...]
    interior: tuple[CurveId, ...]
    figure: bool


@dataclass(frozen=True)
class HomologyRule:
    pattern: Pattern | None
    curve: CurveId | None
    cond: ast.expr | None
    expr: ast.expr
    text: str


@dataclass(frozen=True)
class Definition:
    """A derived curve ``word . base``; ``word`` holds letter objects."""
    curve: CurveId
    word: tuple
    base: CurveId
    klass: dict | None
    resolver: Callable[[CurveId], int | None] | None = None
    support: frozenset | str | None = None


_LETTER_RE = re.compile(r"^\s*(~?)([A-Z][A-Z0-9]*)(?:\[(\w+)\])?\s*$")


@dataclass(frozen=True)
class SurfaceModel:
    name: str
    kind: str
    n: int | None
    min_n: int | None
    swap: tuple[int, int]
    letters: tuple[str, ...]             # relabeling letter names in use
    shift_letters: tuple[str, ...]
    families: dict
    intersections: tuple[IntersectionRule, ...]
    relabels: dict                        # (letter, inverse) -> tuple[RelabelRule]
    end_rules: dict                       # (letter, inverse) -> EndRule
    involutions: frozenset
    composites: dict                      # letter -> tuple[(letter, inverse)], written order
    supports: tuple[SupportRule, ...]
    lanterns: tuple[Lantern, ...]
    homology: tuple[HomologyRule, ...]
    num_ends: int
    definitions: dict = field(default_factory=dict)
    source: str = ""

    # -- basics
    @property
    def parametric(self) -> bool:
        return self.kind == "s_n"

    def _slots(self, c: CurveId) -> tuple:
        return (c.index, c.end) if self.parametric else (c.index,)

    def _ctx(self, env: dict) -> _Ctx:
        base = {} if self.n is None else {"n": self.n}
        return _Ctx({**base, **env}, self.n, env.get("__ends__", frozenset()), self.swap)

    def _holds(self, cond: ast.expr | None, env: dict) -> bool:
        return cond is None or bool(_ev(cond, self._ctx(env)))

    def is_registered(self, c: CurveId) -> bool:
        if c.family == "D":
            return c.index in self.definitions or any(
                c in lt.interior or c in lt.boundary for lt in self.lanterns)
        if c.family not in self.families:
            return False
        if not isinstance(c.index, int) or not DOMAINS[self.families[c.family]](c.index):
            return False
        if self.parametric:
            return c.end is not None and 1 <= c.end <= self.n
        return c.end is None

    def check(self, c: CurveId) -> CurveId:
        if not self.is_registered(c):
            raise UnknownCurve(f"{c} is not a curve of model {self.name}")
        return c

    def shift_labels(self) -> list:
        if self.parametric:
            return list(range(1, self.n + 1))
        return [None]

    def with_definition(self, d: Definition) -> "SurfaceModel":
        defs = dict(self.definitions)
        defs[d.curve.index] = d
        return replace(self, definitions=defs)

    # -- intersections
    def declared_intersection(self, c1: CurveId, c2: CurveId) -> int | None:
        """Directional lookup: rules whose left side matches ``c1``."""
        hits = []
        for rule in self.intersections:
            for a, b in ((c1, c2), (c2, c1)) if rule.symmetric else ((c1, c2),):
                env = rule.left.match(a, {}, self)
                if env is None:
                    continue
                env = rule.right.match(b, env, self)
                if env is None or not self._holds(rule.cond, env):
                    continue
                hits.append(rule.value)
                break
        if not hits:
            return 0
        return max(hits)

    def matching_rules(self, c1: CurveId, c2: CurveId) -> list[IntersectionRule]:
        out = []
        for rule in self.intersections:
            for a, b in ((c1, c2), (c2, c1)) if rule.symmetric else ((c1, c2),):
                env = rule.left.match(a, {}, self)
                if env is None:
                    continue
                env = rule.right.match(b, env, self)
                if env is not None and self._holds(rule.cond, env):
                    out.append(rule)
                    break
        return out

    def _lantern_fact(self, c1: CurveId, c2: CurveId) -> int | None:
        for lt in self.lanterns:
            allc = lt.boundary + lt.interior
            if c1 in allc and c2 in allc and (c1 in lt.boundary or c2 in lt.boundary):
                return 0
        return None

    def intersection(self, c1: CurveId, c2: CurveId) -> int | None:
        """Geometric intersection in {0, 1}; ``None`` when unknown (derived curves)."""
        self.check(c1)
        self.check(c2)
        if c1 == c2:
            return 0
        if c1.family == "D" or c2.family == "D":
            fact = self._lantern_fact(c1, c2)
            if fact is not None:
                return fact
            for d, other in ((c1, c2), (c2, c1)):
                if d.family == "D":
                    defn = self.definitions.get(d.index)
                    if defn is not None and defn.resolver is not None:
                        got = defn.resolver(other)
                        if got is not None:
                            return got
            return None
        cache = self._memo("_isect_cache")
        key = (c1, c2)
        if key not in cache:
            cache[key] = cache[(c2, c1)] = self.declared_intersection(c1, c2)
        return cache[key]

    def neighbors(self, c: CurveId) -> list[CurveId]:
        """Curves declared to meet ``c`` (either rule direction)."""
        out = []
        for rule in self.intersections:
            if rule.value != 1:
                continue
            sides = ((rule.left, rule.right), (rule.right, rule.left)) if rule.symmetric \
                else ((rule.left, rule.right),)
            for p, q in sides:
                env = p.match(c, {}, self)
                if env is None or _names_free(q, env):
                    continue
                try:
                    d = q.build(env, self)
                except MalformedTemplate:
                    continue
                if not self.is_registered(d):
                    continue
                full = q.match(d, env, self)
                if full is not None and self._holds(rule.cond, full):
                    out.append(d)
        return sorted(set(out), key=CurveId.sort_key)

    # -- relabelings
    def relabel(self, letter: str, label, inverse: bool, c: CurveId) -> CurveId:
        """Image of ``c`` under a relabeling letter; raises RelabelGap."""
        if c.family != "D":
            cache = self._memo("_relabel_cache")
            key = (letter, label, inverse, c)
            got = cache.get(key)
            if got is None:
                try:
                    got = self._relabel(letter, label, inverse, c)
                except RelabelGap as gap:
                    got = gap
                cache[key] = got
            if isinstance(got, RelabelGap):
                raise RelabelGap(got.letter, got.curve)
            return got
        return self._relabel(letter, label, inverse, c)

    def _memo(self, slot: str) -> dict:
        try:
            return self.__dict__[slot]
        except KeyError:
            d: dict = {}
            object.__setattr__(self, slot, d)
            return d

    def _relabel(self, letter: str, label, inverse: bool, c: CurveId) -> CurveId:
        name = self._letter_text(letter, label, inverse)
        if letter in self.composites:
            parts = self.composites[letter]
            seq = parts if not inverse else [(l, not inv) for l, inv in reversed(parts)]
            for l, inv in reversed(seq):
                c = self.relabel(l, label, inv, c)
            return c
        if inverse and letter in self.involutions:
            inverse = False
        if c.family == "D":
            raise RelabelGap(name, c)
        rules = self.relabels.get((letter, inverse), ())
        for rule in rules:
            env = {} if rule.param is None else {rule.param: label,
                                                  "__ends__": frozenset({rule.param})}
            env = rule.left.match(c, env, self)
            if env is None or not self._holds(rule.cond, env):
                continue
            out = rule.right.build(env, self)
            if not self.is_registered(out):
                raise RelabelGap(name, c)
            return out
        raise RelabelGap(name, c)

    def has_curve_action(self, letter: str) -> bool:
        if letter in self.composites:
            return all(self.has_curve_action(l) for l, _ in self.composites[letter])
        return bool(self.relabels.get((letter, False)))

    def end_image(self, letter: str, label, inverse: bool, end: int) -> int:
        if letter in self.composites:
            parts = self.composites[letter]
            seq = parts if not inverse else [(l, not inv) for l, inv in reversed(parts)]
            for l, inv in reversed(seq):
                end = self.end_image(l, label, inv, end)
            return end
        if inverse and letter in self.involutions:
            inverse = False
        rule = self.end_rules.get((letter, inverse))
        if rule is None:
            return end
        env = {rule.var: end, "__ends__": frozenset({rule.var})}
        if rule.param is not None:
            env[rule.param] = label
        v = _ev(rule.expr, _Ctx({**env, **({} if self.n is None else {"n": self.n})},
                                self.n, frozenset(), self.swap))
        return _wrap(v, self.num_ends)

    @staticmethod
    def _letter_text(letter: str, label, inverse: bool) -> str:
        s = letter if label is None else f"{letter}[{label}]"
        return ("~" if inverse else "") + s

    # -- supports
    def curve_support(self, c: CurveId):
        """Set of ends touched by ``c``, or the string "local"/"all"."""
        if c.family == "D":
            d = self.definitions.get(c.index)
            if d is not None and d.support is not None:
                return d.support
            return "all"
        for rule in self.supports:
            if rule.pattern is None:
                continue
            env = rule.pattern.match(c, {}, self)
            if env is None or not self._holds(rule.cond, env):
                continue
            return self._support_value(rule, env)
        return "all"

    def letter_support(self, letter: str, label):
        for rule in self.supports:
            if rule.letter != letter:
                continue
            env = {} if rule.param is None else {rule.param: label}
            if not self._holds(rule.cond, env):
                continue
            return self._support_value(rule, env)
        return "all"

    def _support_value(self, rule: SupportRule, env: dict):
        if rule.kind != "ends":
            return rule.kind
        vals = [_ev(e, self._ctx(env)) for e in rule.ends]
        if self.n:
            vals = [_wrap(v, self.n) for v in vals]
        return frozenset(vals)

    # -- homology templates
    def homology_terms(self, c: CurveId) -> list[tuple[str, tuple, int]]:
        """Class of ``c`` as a list of (``x``|``y``, handle, coefficient)."""
        if c.family == "D":
            d = self.definitions.get(c.index)
            if d is not None and d.klass is not None:
                return [(k[0], k[1], v) for k, v in sorted(d.klass.items(), key=repr)]
        for rule in self.homology:
            if rule.curve is not None:
                if rule.curve != c:
                    continue
                env = {}
            else:
                if c.family == "D":
                    continue
                env = rule.pattern.match(c, {}, self)
                if env is None or not self._holds(rule.cond, env):
                    continue
            return _linear_terms(rule.expr, self._ctx(env), self)
        raise UnknownCurve(f"no homology class registered for {c}")

    # -- enumeration
    def curves(self, bound: int) -> list[CurveId]:
        out = []
        for fam, dom in self.families.items():
            rng = range(-bound, bound + 1)
            for i in rng:
                if not DOMAINS[dom](i):
                    continue
                if self.parametric:
                    out.extend(CurveId(fam, i, j) for j in range(1, self.n + 1))
                else:
                    out.append(CurveId(fam, i))
        return out

    def summary(self) -> str:
        ends = f"n={self.n}" if self.parametric else f"{self.num_ends} end(s)"
        fams = ", ".join(f"{k}:{v}" for k, v in self.families.items())
        return f"{self.name} ({ends}; families {fams}; letters {' '.join(self.letters)})"


def _names_free(p: Pattern, env: dict) -> bool:
    for a in p.args:
        if _names(a) - set(env) - {"n"}:
            return True
    return False


# --- file parsing -----------------------------------------------------------

_HOM_CALL = re.compile(r"\b([xy])\(([^()]*)\)")


def _parse_linear(text: str, parametric: bool):
    """Turn ``x(i,j) - x(i+1,j)`` into a list of (coeff-sign, kind, arg-exprs)."""
    # Replace each x(...)/y(...) by a placeholder variable so the rest can use ast.
    calls = []

    def sub(m):
        calls.append((m.group(1), tuple(_compile(a) for a in m.group(2).split(","))))
        return f"__t{len(calls) - 1}"

    body = _HOM_CALL.sub(sub, text)
    expr = ast.parse(body.strip(), mode="eval").body
    for node in ast.walk(expr):
        if not isinstance(node, (ast.BinOp, ast.UnaryOp, ast.Name, ast.Constant, ast.Add,
                                 ast.Sub, ast.Mult, ast.USub, ast.UAdd, ast.Load)):
            raise MalformedTemplate(f"bad homology expression {text!r}")
    for kind, args in calls:
        if len(args) != (2 if parametric else 1):
            raise MalformedTemplate(f"wrong handle arity in {text!r}")
    return expr, calls


def _collect(node, calls, ctx, model, sign, out):
    if isinstance(node, ast.Name):
        kind, args = calls[int(node.id[3:])]
        vals = [_ev(a, ctx) for a in args]
        if model.parametric:
            vals[1] = _wrap(vals[1], model.n)
        out.append((kind, tuple(vals), sign))
    elif isinstance(node, ast.UnaryOp):
        _collect(node.operand, calls, ctx, model, -sign if isinstance(node.op, ast.USub) else sign, out)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
        _collect(node.left, calls, ctx, model, sign, out)
        _collect(node.right, calls, ctx, model,
                 -sign if isinstance(node.op, ast.Sub) else sign, out)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        k = node.left if isinstance(node.left, ast.Constant) else node.right
        t = node.right if k is node.left else node.left
        if not isinstance(k, ast.Constant):
            raise MalformedTemplate("homology coefficients must be integer literals")
        _collect(t, calls, ctx, model, sign * k.value, out)
    else:
        raise MalformedTemplate("bad homology expression")


@dataclass(frozen=True)
class _HomExpr:
    expr: ast.expr
    calls: tuple


def _linear_terms(node, ctx, model):
    out: list = []
    _collect(node.expr, node.calls, ctx, model, 1, out)
    merged: dict = {}
    for kind, h, k in out:
        merged[(kind, h)] = merged.get((kind, h), 0) + k
    return [(kind, h, k) for (kind, h), k in merged.items() if k]


@dataclass
class ModelTemplate:
    name: str
    text: str
    header: dict
    sections: dict

    @property
    def kind(self) -> str:
        return self.header.get("kind", "")

    @property
    def min_n(self) -> int | None:
        v = self.header.get("min_n")
        return int(v) if v else None


def parse_template(text: str, name: str | None = None) -> ModelTemplate:
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = re.fullmatch(r"\s*\[([A-Z]+)\]\s*", line)
        if m:
            current = m.group(1)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise MalformedTemplate(f"line {lineno}: content before first section")
        sections[current].append((lineno, line.strip()))
    header = {}
    for lineno, line in sections.get("MODEL", []):
        if "=" not in line:
            raise MalformedTemplate(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        header[k.strip()] = v.strip()
    for required in ("name", "kind"):
        if required not in header:
            raise MalformedTemplate(f"[MODEL] lacks {required!r}")
    if header["kind"] not in ("s_n", "jacob", "lochness"):
        raise MalformedTemplate(f"unknown model kind {header['kind']!r}")
    return ModelTemplate(name or header["name"], text, header, sections)


def _letter_head(text: str) -> tuple[str, bool, str | None]:
    m = _LETTER_RE.match(text)
    if not m:
        raise MalformedTemplate(f"bad letter {text!r}")
    return m.group(2), bool(m.group(1)), m.group(3)


def instantiate(template: ModelTemplate, n: int | None = None) -> SurfaceModel:
    """Resolve a template into a concrete model (``n`` only for S(n))."""
    h = template.header
    kind = h["kind"]
    if kind == "s_n":
        if n is None:
            raise BoundViolation(f"model {template.name} needs a parameter n")
        if template.min_n is not None and n < template.min_n:
            raise BoundViolation(f"model {template.name} requires n >= {template.min_n}, got {n}")
        num_ends = n
    else:
        if n is not None:
            raise BoundViolation(f"model {template.name} takes no parameter n")
        num_ends = int(h.get("ends", "1"))
    swap = tuple(int(v) for v in h.get("swap", "1 2").split())
    letters = tuple(h.get("letters", "").split())
    shift_letters = tuple(h.get("shifts", "").split())

    families = {}
    for lineno, line in template.sections.get("FAMILIES", []):
        k, v = (s.strip() for s in line.split("=", 1))
        if v not in DOMAINS:
            raise MalformedTemplate(f"line {lineno}: unknown domain {v!r}")
        families[k] = v

    inters = []
    for lineno, line in template.sections.get("INTERSECTIONS", []):
        body, fig = _split_flag(line)
        body, cond = _split_when(body)
        lhs, value = body.rsplit("=", 1)
        sym = "<->" in lhs
        parts = lhs.split("<->" if sym else "->")
        if len(parts) != 2:
            raise MalformedTemplate(f"line {lineno}: expected 'P <-> Q = v' or 'P -> Q = v'")
        inters.append(IntersectionRule(Pattern.parse(parts[0]), Pattern.parse(parts[1]),
                                       int(value), sym, cond, fig, line))

    relabels: dict = {}
    end_rules = {}
    involutions = set()
    composites = {}
    for lineno, line in template.sections.get("RELABELS", []):
        line, _ = _split_flag(line)
        head, body = (s.strip() for s in line.split(":", 1))
        ends = head.endswith(" ends")
        if ends:
            head = head[: -len(" ends")].strip()
        letter, inv, param = _letter_head(head)
        if body == "involution":
            involutions.add(letter)
            continue
        if body.startswith("compose "):
            parts = []
            for tok in body[len("compose "):].split():
                l, i, _ = _letter_head(tok)
                parts.append((l, i))
            composites[letter] = tuple(parts)
            continue
        if ends:
            var, expr = (s.strip() for s in body.split("->", 1))
            end_rules[(letter, inv)] = EndRule(letter, inv, param, var, _compile(expr), line)
            continue
        body, cond = _split_when(body)
        src, dst = (s.strip() for s in body.split("->", 1))
        relabels.setdefault((letter, inv), []).append(
            RelabelRule(letter, inv, param, Pattern.parse(src), Pattern.parse(dst), cond, line))

    supports = []
    for lineno, line in template.sections.get("SUPPORTS", []):
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        rhs, cond = _split_when(rhs)
        words = rhs.split()
        kind_ = words[0]
        if kind_ not in ("ends", "all", "local"):
            raise MalformedTemplate(f"line {lineno}: support must be ends/all/local")
        ends = tuple(_compile(w) for w in words[1:])
        if _PAT_RE.match(lhs):
            supports.append(SupportRule(None, None, Pattern.parse(lhs), cond, kind_, ends, line))
        else:
            letter, _, param = _letter_head(lhs)
            supports.append(SupportRule(letter, param, None, cond, kind_, ends, line))

    lanterns = []
    for lineno, line in template.sections.get("LANTERNS", []):
        body, fig = _split_flag(line)
        name, rel = (s.strip() for s in body.split(":", 1))
        left, right = rel.split("=")
        b = tuple(parse_curve(t, n) for t in left.split())
        i = tuple(parse_curve(t, n) for t in right.split())
        if len(b) != 4 or len(i) != 3:
            raise MalformedTemplate(f"line {lineno}: a lantern has 4 boundary and 3 interior curves")
        lanterns.append(Lantern(name, b, i, fig))

    homology = []
    parametric = kind == "s_n"
    for lineno, line in template.sections.get("HOMOLOGY", []):
        line, _ = _split_flag(line)
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        rhs, cond = _split_when(rhs)
        expr, calls = _parse_linear(rhs, parametric)
        he = _HomExpr(expr, tuple(calls))
        if lhs.startswith("D["):
            homology.append(HomologyRule(None, parse_curve(lhs, n), cond, he, line))
        else:
            homology.append(HomologyRule(Pattern.parse(lhs), None, cond, he, line))

    model = SurfaceModel(
        name=template.name, kind=kind, n=n, min_n=template.min_n, swap=swap,
        letters=letters, shift_letters=shift_letters, families=families,
        intersections=tuple(inters),
        relabels={k: tuple(v) for k, v in relabels.items()}, end_rules=end_rules,
        involutions=frozenset(involutions), composites=composites,
        supports=tuple(supports), lanterns=tuple(lanterns), homology=tuple(homology),
        num_ends=num_ends, source=template.text)
    # Touch every rule once so unresolved symbols surface now.
    try:
        for c in model.curves(2):
            model.neighbors(c)
            model.curve_support(c)
            model.homology_terms(c)
    except MalformedTemplate:
        raise
    except (KeyError, UnknownCurve) as exc:
        raise MalformedTemplate(str(exc)) from exc
    return model


# --- shipped models ---------------------------------------------------------

def model_dir() -> str | None:
    return os.environ.get(MODEL_DIR_ENV)


def available_models() -> list[str]:
    names = set()
    d = model_dir()
    if d and os.path.isdir(d):
        names |= {f[:-6] for f in os.listdir(d) if f.endswith(".model")}
    pkg = resources.files("bigmcg") / "data" / "models"
    names |= {p.name[:-6] for p in pkg.iterdir() if p.name.endswith(".model")}
    return sorted(names)


def read_template(name_or_path: str) -> ModelTemplate:
    if os.path.isfile(name_or_path):
        with open(name_or_path, encoding="utf-8") as fh:
            return parse_template(fh.read())
    d = model_dir()
    if d:
        p = os.path.join(d, name_or_path + ".model")
        if os.path.isfile(p):
            with open(p, encoding="utf-8") as fh:
                return parse_template(fh.read())
    res = resources.files("bigmcg") / "data" / "models" / f"{name_or_path}.model"
    if not res.is_file():
        raise ModelError(f"unknown model {name_or_path!r}")
    return parse_template(res.read_text(encoding="utf-8"))


_CACHE: dict = {}


def load_model(name: str, n: int | None = None) -> SurfaceModel:
    key = (name, n, model_dir())
    if key not in _CACHE:
        _CACHE[key] = instantiate(read_template(name), n)
    return _CACHE[key]


# --- validation -------------------------------------------------------------

def _rule_for(model: SurfaceModel, letter: str, inverse: bool, label, c: CurveId) -> str:
    for rule in model.relabels.get((letter, inverse), ()):
        env = {} if rule.param is None else {rule.param: label,
                                              "__ends__": frozenset({rule.param})}
        env = rule.left.match(c, env, model)
        if env is not None and model._holds(rule.cond, env):
            return rule.text
    return f"{letter} (composite)"


def validate_model(model: SurfaceModel, bound: int = 3) -> list[str]:
    """Check the model's invariants on every curve with index at most ``bound``.

    Returns one line per violation; an empty list means the model is valid.
    """
    from .homology import TruncationWindow, curve_class, word_matrix
    from .word import Word, twist

    out: list[str] = []
    curves = model.curves(bound)
    pairs = [(a, b) for k, a in enumerate(curves) for b in curves[k + 1:]]

    # Pairs with an ill-defined intersection are reported once and then
    # left out of the checks that depend on that number.
    bad = set()
    for a, b in pairs:
        ab, ba = model.declared_intersection(a, b), model.declared_intersection(b, a)
        if ab != ba:
            bad |= {(a, b), (b, a)}
            out.append(f"asymmetric intersection: i({a},{b})={ab} but i({b},{a})={ba}")
        rules = model.matching_rules(a, b)
        if len(rules) > 1:
            bad |= {(a, b), (b, a)}
            out.append(f"overlapping intersection rules for ({a},{b}): "
                       + " | ".join(r.text for r in rules))
        for r in rules:
            if r.value not in (0, 1):
                out.append(f"intersection value {r.value} outside {{0,1}}: {r.text}")

    classes = {}
    for c in curves:
        try:
            classes[c] = curve_class(model, c)
        except UnknownCurve as exc:
            out.append(f"missing homology class: {exc}")
    for a, b in pairs:
        if a not in classes or b not in classes or (a, b) in bad:
            continue
        p = abs(classes[a].pairing(classes[b]))
        i = model.intersection(a, b)
        if p % 2 != i or (i == 1 and p != 1):
            out.append(f"pairing parity: i({a},{b})={i} but |<[{a}],[{b}]>|={p}")

    labels = model.shift_labels()
    for letter in model.letters:
        if not model.has_curve_action(letter):
            continue
        for label in labels if letter in model.shift_letters else [None]:
            for inv in (False, True):
                img = {}
                for c in curves:
                    try:
                        img[c] = model.relabel(letter, label, inv, c)
                    except RelabelGap:
                        continue
                    try:
                        back = model.relabel(letter, label, not inv, img[c])
                    except RelabelGap:
                        back = None
                    if back != c:
                        name = model._letter_text(letter, label, inv)
                        out.append(f"relabel round trip: {name} sends {c} to {img[c]}, "
                                   f"whose inverse image is {back}")
                for a, b in pairs:
                    if a not in img or b not in img:
                        continue
                    if (a, b) in bad or (img[a], img[b]) in bad:
                        continue
                    i0, i1 = model.intersection(a, b), model.intersection(img[a], img[b])
                    if i0 != i1:
                        name = model._letter_text(letter, label, inv)
                        ra = _rule_for(model, letter, inv, label, a)
                        rb = _rule_for(model, letter, inv, label, b)
                        rule = ra if ra == rb else f"{ra}' / '{rb}"
                        out.append(f"relabel rule '{rule}' breaks intersection: "
                                   f"{name} maps ({a},{b}) i={i0} to "
                                   f"({img[a]},{img[b]}) i={i1}")

    for lt in model.lanterns:
        for k, a in enumerate(lt.boundary):
            for b in lt.boundary[k + 1:]:
                if model.declared_intersection(a, b) != 0:
                    out.append(f"lantern {lt.name}: boundary curves {a} and {b} meet")
        bnd = Word([twist(c) for c in lt.boundary])
        inner = Word([twist(c) for c in lt.interior])
        try:
            reach = max(abs(h[0]) for c in lt.boundary + lt.interior
                        for (_, h) in curve_class(model, c).coeffs)
            win = TruncationWindow(reach + 1, 2)
            same = (word_matrix(bnd, model, win) == word_matrix(inner, model, win)).all()
        except (UnknownCurve, KeyError) as exc:
            out.append(f"lantern {lt.name}: no homology class ({exc})")
            continue
        if not same:
            out.append(f"lantern {lt.name}: matrix identity fails")
    return out
