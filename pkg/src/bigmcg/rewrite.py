"""Certification of word identities and subgroup membership bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

from .action import apply_to_curve, try_apply
from .homology import (HomologyClass, OracleError, TruncationWindow, curve_class, lattice,
                       word_matrix)
from .model import CurveId, Definition, RelabelGap, SurfaceModel, evaluate_int, parse_curve
from .word import (SHIFT, TWIST, Letter, Word, commutes, normal_form, parse_word, power, reduce,
                   symmetry, twist)


class RewriteError(Exception):
    pass


class UnresolvedCurve(RewriteError):
    def __init__(self, term, reason: str = "stuck"):
        super().__init__(f"image of a curve did not resolve: {term} ({reason})")
        self.term = term


class PartialConjugation(RewriteError):
    pass


class NotCertified(RewriteError):
    def __init__(self, lhs: Word, rhs: Word, note: str = ""):
        msg = f"could not certify {lhs} = {rhs}"
        super().__init__(msg + (f" ({note})" if note else ""))
        self.lhs = lhs
        self.rhs = rhs


class NameClash(RewriteError):
    pass


class UnknownName(RewriteError):
    pass


@dataclass
class Certificate:
    kind: str              # FreeCommutation, ConjugationExpansion, BraidSubstitution, ...
    lhs: Word
    rhs: Word
    rule: str = ""
    children: list = field(default_factory=list)
    oracle: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "lhs": str(self.lhs), "rhs": str(self.rhs)}
        if self.rule:
            out["rule"] = self.rule
        if self.oracle:
            out["oracle"] = self.oracle
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    def kinds(self) -> set:
        out = {self.kind}
        for c in self.children:
            out |= c.kinds()
        return out


# --- conjugation ----------------------------------------------------------

def _sample_curves(model: SurfaceModel) -> list[CurveId]:
    return model.curves(2)


def conjugate_shift(model: SurfaceModel, g: Letter, s: Letter) -> Letter:
    """The shift letter equal to g s g^-1, found by comparing curve actions."""
    cache = _conj_cache(model)
    key = (g, s)
    if key in cache:
        return cache[key]
    ginv = g.inverse(model)
    target = {}
    for c in _sample_curves(model):
        target[c] = try_apply(Word([g, s, ginv]), c, model)
    found = None
    labels = list(model.shift_labels())
    if s.label is not None:
        guess = model.end_image(g.name, g.label, g.exp < 0, s.label) if g.kind != TWIST \
            else s.label
        labels.sort(key=lambda x: x != guess)
    for label in labels:
        for exp in ((1, -1) if s.exp > 0 else (-1, 1)):
            cand = symmetry("H", label, exp)
            if all(try_apply(Word([cand]), c, model) == v for c, v in target.items()):
                found = cand
                break
        if found:
            break
    if found is None:
        raise PartialConjugation(f"{g} does not conjugate {s} to a shift letter")
    cache[key] = found
    return found


def _conj_cache(model: SurfaceModel) -> dict:
    try:
        return model.__dict__["_shift_conj"]
    except KeyError:
        c: dict = {}
        object.__setattr__(model, "_shift_conj", c)
        return c


def _image(g: Word, c: CurveId, model: SurfaceModel, trace: list) -> CurveId:
    try:
        got = apply_to_curve(g, c, model)
    except RelabelGap as gap:
        raise UnresolvedCurve(f"({g})({c})", str(gap)) from gap
    if not got.resolved:
        raise UnresolvedCurve(got.term, got.reason)
    trace.extend(got.trace)
    return got.curve


def _conj_shift(g: list, s: Letter, model: SurfaceModel, trace: list) -> list:
    for k in range(len(g) - 1, -1, -1):
        l = g[k]
        if l.generator == s.generator or commutes(l, s, model):
            continue
        if l.kind != TWIST and l.kind != SHIFT:
            s = conjugate_shift(model, l, s)
            continue
        if l.kind == TWIST:
            prefix = Word(g[:k])
            try:
                moved = model.relabel(s.name, s.label, s.exp < 0, l.curve)
            except RelabelGap as gap:
                raise PartialConjugation(str(gap)) from gap
            c1 = _image(prefix, l.curve, model, trace)
            c2 = _image(prefix, moved, model, trace)
            return [twist(c1, l.exp), twist(c2, -l.exp)] + _conj_shift(g[:k], s, model, trace)
        raise PartialConjugation(f"shift {l} does not commute with {s}")
    return [s]


def conj_word(g: Word, w: Word, model: SurfaceModel, trace: list | None = None) -> Word:
    """Normal form of g w g^-1, expanded letter by letter."""
    trace = [] if trace is None else trace
    out: list = []
    for l in w.letters:
        if l.kind == TWIST:
            out.append(twist(_image(g, l.curve, model, trace), l.exp))
        elif l.kind == SHIFT:
            out.extend(_conj_shift(list(g.letters), l, model, trace))
        else:
            if all(x.generator == l.generator for x in g.letters):
                out.append(l)
            else:
                raise PartialConjugation(f"cannot move {l} through the conjugator")
    return normal_form(Word(out), model)


def expand_composites(w: Word, model: SurfaceModel) -> Word:
    """Replace each composite symmetry letter by its defining product."""
    out: list = []
    for l in w.letters:
        if l.kind != TWIST and l.name in model.composites:
            parts = [symmetry(nm, l.label, -1 if inv else 1) for nm, inv in model.composites[l.name]]
            part = Word(parts)
            out += list(part.letters if l.exp > 0 else part.inverse(model).letters)
        else:
            out.append(l)
    return Word(out)


def push_relabels(w: Word, model: SurfaceModel) -> Word:
    """Move symmetry letters rightward through twists (s t_c = t_{s(c)} s)."""
    letters = list(reduce(w, model).letters)
    changed = True
    while changed:
        changed = False
        for p in range(len(letters) - 1):
            a, b = letters[p], letters[p + 1]
            if a.kind == TWIST:
                continue
            if b.kind == TWIST:
                try:
                    c = model.relabel(a.name, a.label, a.exp < 0, b.curve)
                except RelabelGap:
                    continue
                letters[p], letters[p + 1] = twist(c, b.exp), a
                changed = True
                break
            if b.kind == SHIFT and a.kind not in (TWIST, SHIFT):
                try:
                    s = conjugate_shift(model, a, b)
                except PartialConjugation:
                    continue
                letters[p], letters[p + 1] = s, a
                changed = True
                break
        if not changed:
            new = list(reduce(Word(letters), model).letters)
            if new != letters:
                letters = new
                changed = True
    return normal_form(Word(letters), model)


# --- substitutions ----------------------------------------------------------

def braid_rewrites(w: Word, model: SurfaceModel):
    """Words obtained by one braid move t_x t_y t_x -> t_y t_x t_y."""
    L = list(w.letters)
    for p in range(len(L) - 2):
        a, b, c = L[p:p + 3]
        if a.kind == b.kind == c.kind == TWIST and a == c and a.exp == b.exp \
                and model.intersection(a.curve, b.curve) == 1:
            yield Word(L[:p] + [b, a, b] + L[p + 3:]), f"braid {a.curve},{b.curve}"


def _gather(L: list, seq: list, model: SurfaceModel, ordered: bool):
    """Positions of the letters of ``seq`` that can be slid together at the first one."""
    n = len(L)
    for p0 in range(n):
        if ordered and L[p0] != seq[0]:
            continue
        if not ordered and L[p0] not in seq:
            continue
        todo = list(seq[1:]) if ordered else [x for x in seq]
        if not ordered:
            todo.remove(L[p0])
        taken = [p0]
        q = p0 + 1
        while todo and q < n:
            cand = L[q]
            want = todo[0] if ordered else (cand if cand in todo else None)
            if want is not None and cand == want:
                ok = all(commutes(cand, L[r], model) for r in range(p0 + 1, q) if r not in taken)
                if ok:
                    taken.append(q)
                    todo.remove(cand)
            q += 1
        if not todo:
            return taken
    return None


def lantern_rewrites(w: Word, model: SurfaceModel):
    L = list(w.letters)
    for lt in model.lanterns:
        for exp in (1, -1):
            inner = [twist(c, exp) for c in lt.interior]
            outer = [twist(c, exp) for c in lt.boundary]
            if exp < 0:
                inner.reverse()
                outer.reverse()
            for r in range(3):
                seq = inner[r:] + inner[:r]
                taken = _gather(L, seq, model, True)
                if taken:
                    rest = [L[k] for k in range(taken[0] + 1, len(L)) if k not in taken]
                    yield Word(L[:taken[0]] + outer + rest), f"lantern {lt.name} interior->boundary"
            taken = _gather(L, outer, model, False)
            if taken:
                rest = [L[k] for k in range(taken[0] + 1, len(L)) if k not in taken]
                yield Word(L[:taken[0]] + inner + rest), f"lantern {lt.name} boundary->interior"


def unfold_definitions(w: Word, model: SurfaceModel) -> Word:
    out: list = []
    for l in w.letters:
        if l.kind == TWIST and l.curve.family == "D" and l.curve.index in model.definitions:
            d = model.definitions[l.curve.index]
            dw = Word(d.word)
            out += list(dw.letters) + [twist(d.base, l.exp)] + list(dw.inverse(model).letters)
        else:
            out.append(l)
    return Word(out)


STRATEGIES = ("commutation", "conjugation", "braid", "lantern", "definition")


def certify_identity(lhs: Word, rhs: Word, model: SurfaceModel,
                     strategies: Iterable[str] = ("commutation",)) -> Certificate:
    """Certificate that lhs = rhs, or NotCertified with both normal forms."""
    nl, nr = normal_form(lhs, model), normal_form(rhs, model)
    for strat in strategies:
        if strat == "commutation":
            if nl == nr:
                return Certificate("FreeCommutation", lhs, rhs, "reduce+commute_sort")
        elif strat == "conjugation":
            a = push_relabels(expand_composites(lhs, model), model)
            if a == push_relabels(expand_composites(rhs, model), model):
                return Certificate("ConjugationExpansion", lhs, rhs, "push symmetry letters")
        elif strat == "braid":
            for side, other, flip in ((nl, nr, False), (nr, nl, True)):
                for cand, rule in braid_rewrites(side, model):
                    if normal_form(cand, model) == other:
                        return Certificate("BraidSubstitution", lhs, rhs, rule)
        elif strat == "lantern":
            for side, other in ((nl, nr), (nr, nl)):
                for cand, rule in lantern_rewrites(side, model):
                    if normal_form(cand, model) == other:
                        return Certificate("LanternAxiom", lhs, rhs, rule)
        elif strat == "definition":
            a = normal_form(unfold_definitions(nl, model), model)
            b = normal_form(unfold_definitions(nr, model), model)
            if a == b:
                return Certificate("Definition", lhs, rhs, "unfold derived curves")
        else:
            raise ValueError(f"unknown strategy {strat!r}")
    raise NotCertified(nl, nr)


# --- derived curves ---------------------------------------------------------

def _union_support(parts: list):
    if any(p == "all" for p in parts):
        return "all"
    sets = [p for p in parts if isinstance(p, frozenset)]
    if sets and len(sets) == len(parts):
        out = frozenset()
        for s in sets:
            out |= s
        return out
    if all(p == "local" for p in parts):
        return "local"
    return "all"


def define_curve(name: CurveId, w: Word, base: CurveId, model: SurfaceModel,
                 window: TruncationWindow | None = None,
                 current: Callable[[], SurfaceModel] | None = None) -> SurfaceModel:
    """Register the derived curve ``name := w(base)`` and return the extended model."""
    if name.family != "D":
        raise NameClash(f"derived curves use the D family, not {name}")
    if name.index in model.definitions:
        raise NameClash(f"{name} is already defined")
    model.check(base)
    try:
        got = apply_to_curve(w, base, model)
        if got.resolved and got.curve != name:
            raise NameClash(f"{w} maps {base} to the named curve {got.curve}")
    except RelabelGap:
        pass
    window = window or TruncationWindow()
    from .homology import WindowTooSmall, OutsideWindow
    import numpy as np

    try:
        M = word_matrix(w, model, window)
        L = lattice(model, window)
        v = M @ L.vector(curve_class(model, base, window))
    except (WindowTooSmall, OutsideWindow) as exc:
        raise RewriteError(f"WindowTooSmall: cannot compute the class of {name}: {exc}") from exc
    coeffs = {}
    for k in np.nonzero(v)[0]:
        h = L.handles[k // 2]
        coeffs[("y" if k % 2 else "x", h)] = int(v[k])
    klass = HomologyClass(coeffs)
    declared = None
    if model.is_registered(name):
        try:
            declared = curve_class(model, name)
        except Exception:
            declared = None
    if declared is not None and klass.coeffs != declared.coeffs \
            and klass.coeffs != declared.negated().coeffs:
        raise RewriteError(f"class mismatch: {w}({base}) has class {klass}, "
                           f"but the model records {declared} for {name}")
    sup = _union_support([model.curve_support(base)] +
                         [model.curve_support(l.curve) if l.kind == TWIST
                          else model.letter_support(l.name, l.label) for l in w.letters])
    winv = w.inverse(model)
    busy: set = set()

    def resolver(y: CurveId):
        if (name, y) in busy or y.family == "D" and y.index == name.index:
            return None
        busy.add((name, y))
        try:
            m = current() if current else extended
            img = try_apply(winv, y, m)
            if img is None:
                return None
            return m.intersection(base, img)
        finally:
            busy.discard((name, y))

    d = Definition(name, tuple(w.letters), base, coeffs if declared is None else None,
                   resolver, sup)
    extended = model.with_definition(d)
    return extended


# --- expressions and sessions ---------------------------------------------

@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Lit:
    text: str          # a single letter, possibly with a leading ~


@dataclass(frozen=True)
class Ident:
    pass


@dataclass(frozen=True)
class Mul:
    items: tuple


@dataclass(frozen=True)
class Inv:
    arg: object


@dataclass(frozen=True)
class Pow:
    arg: object
    exp: str           # integer expression, may mention n


@dataclass(frozen=True)
class Conj:
    arg: object        # arg^by = by * arg * inv(by)
    by: object


@dataclass
class Evaluation:
    value: Word            # normal form
    literal: Word          # names replaced by their values, conjugations written out
    member: bool
    deps: frozenset
    children: list = field(default_factory=list)
    expanded: bool = True
    notes: list = field(default_factory=list)


@dataclass
class Entry:
    name: str
    value: Word
    expr: object
    member: bool
    deps: frozenset
    kind: str              # "generator" or "step"
    certificate: Certificate | None = None


@dataclass
class Assumption:
    name: str
    text: str
    grants: tuple = ()     # curve patterns whose twists become members


class Session:
    """Named elements of the subgroup G, their witnesses and certificates."""

    def __init__(self, model: SurfaceModel, window: TruncationWindow | None = None):
        self.model = model
        self.window = window or TruncationWindow()
        self.entries: dict[str, Entry] = {}
        self.assumptions: dict[str, Assumption] = {}

    # -- evaluation
    def _letter(self, text: str) -> Word:
        return parse_word(text, self.model)

    def _letter_member(self, l: Letter) -> tuple[bool, frozenset]:
        for e in self.entries.values():
            if e.member and len(e.value) == 1 and e.value[0].generator == l.generator:
                return True, e.deps
        if l.kind == TWIST:
            for a in self.assumptions.values():
                for pat in a.grants:
                    if pat.match(l.curve, {}, self.model) is not None:
                        return True, frozenset({a.name})
        return False, frozenset()

    def evaluate(self, e) -> Evaluation:
        m = self.model
        if isinstance(e, Name):
            if e.id not in self.entries:
                raise UnknownName(f"{e.id} is not defined")
            ent = self.entries[e.id]
            return Evaluation(ent.value, ent.value, ent.member, ent.deps)
        if isinstance(e, Ident):
            return Evaluation(Word(), Word(), True, frozenset())
        if isinstance(e, Lit):
            w = self._letter(e.text)
            mem, deps = True, frozenset()
            for l in w.letters:
                ok, d = self._letter_member(l)
                mem = mem and ok
                deps |= d
            return Evaluation(normal_form(w, m), w, mem, deps)
        if isinstance(e, Mul):
            parts = [self.evaluate(x) for x in e.items]
            lit = Word()
            val = Word()
            for p in parts:
                lit = lit + p.literal
                val = val + p.value
            return self._combine(parts, normal_form(val, m), lit)
        if isinstance(e, Inv):
            p = self.evaluate(e.arg)
            return self._combine([p], normal_form(p.value.inverse(m), m), p.literal.inverse(m))
        if isinstance(e, Pow):
            p = self.evaluate(e.arg)
            k = evaluate_int(e.exp, {} if m.n is None else {"n": m.n})
            return self._combine([p], normal_form(power(p.value, k, m), m),
                                 power(p.literal, k, m))
        if isinstance(e, Conj):
            a, g = self.evaluate(e.arg), self.evaluate(e.by)
            lit = g.literal + a.literal + g.literal.inverse(m)
            out = self._combine([a, g], None, lit)
            trace: list = []
            try:
                val = conj_word(g.value, a.value, m, trace)
                cert = Certificate("ConjugationExpansion", lit, val,
                                   f"conjugate by {g.value}")
                for t in trace:
                    if t.startswith("braid"):
                        cert.children.append(Certificate("BraidSubstitution", Word(), Word(), t))
                out.children.append(cert)
            except (UnresolvedCurve, PartialConjugation) as exc:
                val = push_relabels(g.value + a.value + g.value.inverse(m), m)
                out.expanded = False
                out.notes.append(f"conjugation left partly unexpanded: {exc}")
            out.value = val
            return out
        raise TypeError(f"not an expression: {e!r}")

    @staticmethod
    def _combine(parts: list, value, literal) -> Evaluation:
        ev = Evaluation(value, literal, all(p.member for p in parts),
                        frozenset().union(*[p.deps for p in parts]) if parts else frozenset())
        for p in parts:
            ev.children += p.children
            ev.notes += p.notes
            ev.expanded = ev.expanded and p.expanded
        return ev

    # -- statements
    def add_generator(self, name: str, expr) -> Entry:
        if name in self.entries:
            raise NameClash(f"{name} is already defined")
        ev = self.evaluate(expr)
        ent = Entry(name, ev.value, expr, True, frozenset(), "generator")
        self.entries[name] = ent
        return ent

    def add_assumption(self, name: str, text: str, grants: tuple = ()) -> Assumption:
        a = Assumption(name, text, grants)
        self.assumptions[name] = a
        return a

    def member(self, w: Word) -> Entry | None:
        nf = normal_form(w, self.model)
        for ent in self.entries.values():
            if ent.member and ent.value == nf:
                return ent
        return None

    def witness(self, e, limit: int = 10_000) -> Word:
        """Expand ``e`` down to generator values and granted letters, unreduced."""
        m = self.model
        memo: dict = {}
        active: set = set()

        def go(x) -> Word:
            if isinstance(x, Name):
                if x.id not in memo:
                    active.add(x.id)
                    ent = self.entries.get(x.id)
                    if ent is None:
                        raise UnknownName(f"{x.id} is not defined")
                    memo[x.id] = ent.value if ent.kind == "generator" else go(ent.expr)
                    active.discard(x.id)
                w = memo[x.id]
            elif isinstance(x, Ident):
                w = Word()
            elif isinstance(x, Lit):
                w = self._letter(x.text)
                if len(w) == 1:
                    for ent in self.entries.values():
                        if ent.kind == "step" and ent.member and ent.name not in active \
                                and len(ent.value) == 1 \
                                and ent.value[0].generator == w[0].generator:
                            w = power(go(Name(ent.name)), w[0].exp * ent.value[0].exp, m)
                            break
            elif isinstance(x, Mul):
                w = Word()
                for y in x.items:
                    w = w + go(y)
            elif isinstance(x, Inv):
                w = go(x.arg).inverse(m)
            elif isinstance(x, Pow):
                k = evaluate_int(x.exp, {} if m.n is None else {"n": m.n})
                w = power(go(x.arg), k, m)
            elif isinstance(x, Conj):
                g = go(x.by)
                w = g + go(x.arg) + g.inverse(m)
            else:
                raise TypeError(f"not an expression: {x!r}")
            if len(w) > limit:
                raise RewriteError(f"witness longer than {limit} letters")
            return w

        return go(e)

    def define(self, curve: CurveId, expr, base: CurveId) -> Definition:
        ev = self.evaluate(expr)
        self.model = define_curve(curve, ev.value, base, self.model, self.window,
                                  current=lambda: self.model)
        return self.model.definitions[curve.index]


def session_step(s: Session, name: str, expr, expect=None,
                 strategies: Iterable[str] = ()) -> tuple[Entry, Evaluation, Certificate]:
    """Evaluate, certify against ``expect`` and record ``name``; raises on failure."""
    if name in s.entries:
        raise NameClash(f"{name} is already defined")
    ev = s.evaluate(expr)
    strategies = ("commutation", "conjugation") + tuple(x for x in strategies)
    if expect is not None:
        target = s.evaluate(expect).value
        cert = certify_identity(ev.value, target, s.model, strategies)
        cert.lhs = ev.literal
        value = normal_form(target, s.model)
    else:
        cert = Certificate("FreeCommutation", ev.literal, ev.value, "evaluation")
        value = ev.value
    if ev.children:
        cert = Certificate("Composite", ev.literal, value, cert.rule, ev.children + [cert])
    ent = Entry(name, value, expr, ev.member, ev.deps, "step", cert)
    s.entries[name] = ent
    return ent, ev, cert
