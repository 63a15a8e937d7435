"""Partial action of words on curves, and the total action on ends."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .model import CurveId, RelabelGap, SurfaceModel
from .word import TWIST, Letter, Word, commutes, reduce, symmetry


@dataclass(frozen=True)
class CurveTerm:
    pending: Word
    base: CurveId

    def __str__(self) -> str:
        return f"({self.pending})({self.base})" if len(self.pending) else str(self.base)


@dataclass(frozen=True)
class Resolved:
    curve: CurveId
    trace: tuple = ()

    resolved = True


@dataclass(frozen=True)
class Unresolved:
    term: CurveTerm
    reason: str
    trace: tuple = ()

    resolved = False


class _Budget:
    def __init__(self, steps: int):
        self.steps = steps

    def spend(self) -> bool:
        self.steps -= 1
        return self.steps >= 0


def apply_to_curve(w: Word, c: CurveId, model: SurfaceModel, budget: int = 4000):
    """Image of ``c`` under ``w``; ``Resolved`` or ``Unresolved`` with the stuck term.

    Raises ``RelabelGap`` when the only obstruction is a symmetry letter without
    a rule for the current curve.
    """
    model.check(c)
    out = _run(list(w.letters), c, model, _Budget(budget), 0, ())
    if isinstance(out, Unresolved) and out.reason.startswith("relabel-gap"):
        letter = out.reason.split(":", 1)[1]
        raise RelabelGap(letter, out.term.base)
    return out


def try_apply(w: Word, c: CurveId, model: SurfaceModel, budget: int = 4000):
    """Like ``apply_to_curve`` but never raises; returns a CurveId or None."""
    try:
        out = apply_to_curve(w, c, model, budget)
    except RelabelGap:
        return None
    return out.curve if out.resolved else None


def _partner_right(pending: list, head: CurveId, exp: int, model: SurfaceModel):
    """Index of a ``Twist(head)^exp`` that can slide right next to the last letter."""
    target = Letter(TWIST, head.family, head, None, exp)
    for q in range(len(pending) - 2, -1, -1):
        l = pending[q]
        if l == target:
            return q
        if not commutes(l, target, model):
            return None
    return None


def _run(pending: list, head: CurveId, model: SurfaceModel, budget: _Budget, depth: int,
         trace: tuple):
    pending = list(pending)
    while pending:
        if not budget.spend():
            return Unresolved(CurveTerm(Word(pending), head), "budget", trace)
        last = pending[-1]
        if last.kind == TWIST:
            x = last.curve
            if x == head:
                pending.pop()
                continue
            i = model.intersection(x, head)
            if i == 0:
                pending.pop()
                continue
            if i == 1:
                p = _partner_right(pending, head, last.exp, model)
                if p is not None:
                    del pending[-1]
                    del pending[p]
                    trace = trace + (f"braid {head}->{x}",)
                    head = x
                    continue
            stuck = "stuck"
        else:
            try:
                head = model.relabel(last.name, last.label, last.exp < 0, head)
                pending.pop()
                continue
            except RelabelGap as gap:
                stuck = f"relabel-gap:{gap.letter}"
        return _unstick(pending, head, model, budget, depth, trace, stuck)
    return Resolved(head, trace)


def _unstick(pending: list, head: CurveId, model: SurfaceModel, budget: _Budget, depth: int,
             trace: tuple, reason: str):
    fail = Unresolved(CurveTerm(Word(pending), head), reason, trace)
    if depth >= 6:
        return fail
    last = pending[-1]
    # Slide the blocking letter left past letters it commutes with, so that
    # those letters act on the current curve first.
    if last.kind == TWIST:
        for t in range(len(pending) - 2, -1, -1):
            if not commutes(last, pending[t], model):
                break
            if pending[t].kind == TWIST and model.intersection(pending[t].curve, head) == 0 \
                    and pending[t].curve != head:
                continue
            moved = pending[:t] + [last] + pending[t:-1]
            got = _run(moved, head, model, budget, depth + 1, trace)
            if got.resolved:
                return got
    # Fold a pending suffix into a registered derived curve based at ``head``.
    for key in sorted(model.definitions, key=str):
        d = model.definitions[key]
        if d.base != head:
            continue
        rest = reduce(Word(pending) + Word(d.word).inverse(model), model)
        if len(rest) < len(pending):
            got = _run(list(rest), d.curve, model, budget, depth + 1,
                       trace + (f"fold {d.curve}",))
            if got.resolved:
                return got
    # Unfold a derived head into its defining word.
    if head.family == "D" and head.index in model.definitions:
        d = model.definitions[head.index]
        rest = reduce(Word(pending) + Word(d.word), model)
        got = _run(list(rest), d.base, model, budget, depth + 1, trace + (f"unfold {head}",))
        if got.resolved:
            return got
    return fail


# --- ends -----------------------------------------------------------------

@dataclass(frozen=True)
class EndPermutation:
    """Permutation of the ends 1..k, stored as the tuple of images."""
    images: tuple

    @classmethod
    def identity(cls, k: int) -> "EndPermutation":
        return cls(tuple(range(1, k + 1)))

    def __call__(self, e: int) -> int:
        return self.images[e - 1]

    def compose(self, other: "EndPermutation") -> "EndPermutation":
        """``self`` after ``other``."""
        return EndPermutation(tuple(self(other(e)) for e in range(1, len(self.images) + 1)))

    def inverse(self) -> "EndPermutation":
        out = [0] * len(self.images)
        for i, v in enumerate(self.images, 1):
            out[v - 1] = i
        return EndPermutation(tuple(out))

    def cycles(self) -> list[tuple]:
        seen, out = set(), []
        for s in range(1, len(self.images) + 1):
            if s in seen or self(s) == s:
                seen.add(s)
                continue
            cyc, e = [], s
            while e not in seen:
                seen.add(e)
                cyc.append(e)
                e = self(e)
            out.append(tuple(cyc))
        return out

    def __str__(self) -> str:
        cyc = self.cycles()
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cyc) if cyc else "()"


def end_permutation(w: Word, model: SurfaceModel) -> EndPermutation:
    k = model.num_ends
    perm = EndPermutation.identity(k)
    for l in w.letters:  # leftmost is applied last
        if l.kind == TWIST:
            continue
        img = EndPermutation(tuple(model.end_image(l.name, l.label, l.exp < 0, e)
                                   for e in range(1, k + 1)))
        perm = perm.compose(img)
    return perm


def sym_generation_check(perms: Iterable[EndPermutation], n: int) -> bool:
    """True iff the permutations generate the full symmetric group on n points."""
    gens = [p for p in perms if len(p.images) == n]
    if n <= 1:
        return True
    if n <= 7:
        return len(_closure(gens, n)) == math.factorial(n)
    from sympy.combinatorics import Permutation, PermutationGroup

    if not gens:
        return False
    group = PermutationGroup([Permutation([v - 1 for v in g.images]) for g in gens])
    return group.order() == math.factorial(n)


def _closure(gens: list, n: int) -> set:
    ident = tuple(range(1, n + 1))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                q = tuple(g.images[v - 1] for v in p)
                if q not in seen:
                    seen.add(q)
                    nxt.append(q)
        frontier = nxt
    return seen
