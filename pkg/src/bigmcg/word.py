"""Words over Dehn twists, handle shifts and the relabeling symmetries.

Words act right to left: the rightmost letter is applied first.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .model import FAMILY_RANK, CurveId, SurfaceModel, parse_curve

TWIST, SHIFT, ROTATION, SWAP = "twist", "shift", "rotation", "swap"
KIND_RANK = {TWIST: 0, SHIFT: 1, ROTATION: 2, SWAP: 3}
_RELABEL_KIND = {"R": ROTATION, "TAU1": ROTATION, "TAU2": ROTATION, "TAU": SWAP, "H": SHIFT}


@dataclass(frozen=True)
class Letter:
    kind: str
    name: str                    # twist family, or the symmetry name
    curve: CurveId | None = None
    label: int | None = None     # end label of a shift on S(n)
    exp: int = 1

    def inverse(self, model: SurfaceModel | None = None) -> "Letter":
        if model is not None and self.kind != TWIST and self.name in model.involutions:
            return self
        return Letter(self.kind, self.name, self.curve, self.label, -self.exp)

    @property
    def generator(self) -> tuple:
        return (self.kind, self.name, self.curve, self.label)

    def sort_key(self) -> tuple:
        if self.kind == TWIST:
            end, fam, idx = self.curve.sort_key()
        else:
            end, fam, idx = (self.label or 0), 5, (0, 0, "")
        return (end, fam, idx, KIND_RANK[self.kind], self.name, self.exp)

    def __str__(self) -> str:
        if self.kind == TWIST:
            body = str(self.curve)
        elif self.label is not None:
            body = f"{self.name}[{self.label}]"
        else:
            body = self.name
        return ("~" if self.exp < 0 else "") + body


def twist(curve: CurveId, exp: int = 1) -> Letter:
    return Letter(TWIST, curve.family, curve, None, exp)


def symmetry(name: str, label: int | None = None, exp: int = 1) -> Letter:
    return Letter(_RELABEL_KIND[name], name, None, label, exp)


class Word:
    """Immutable sequence of letters."""

    __slots__ = ("letters",)

    def __init__(self, letters: Iterable[Letter] = ()):
        object.__setattr__(self, "letters", tuple(letters))

    def __setattr__(self, *_):
        raise AttributeError("Word is immutable")

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __getitem__(self, i):
        got = self.letters[i]
        return Word(got) if isinstance(i, slice) else got

    def __eq__(self, other) -> bool:
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __repr__(self) -> str:
        return f"Word({str(self)!r})"

    def __str__(self) -> str:
        return "*".join(str(l) for l in self.letters) if self.letters else "1"

    def inverse(self, model: SurfaceModel | None = None) -> "Word":
        return Word(l.inverse(model) for l in reversed(self.letters))


IDENTITY = Word()


def normalize_letters(w: Word, model: SurfaceModel) -> Word:
    """Involutions always carry exponent +1."""
    return Word(Letter(l.kind, l.name, l.curve, l.label, 1)
                if l.kind != TWIST and l.name in model.involutions else l for l in w)


def inverse(w: Word, model: SurfaceModel | None = None) -> Word:
    return w.inverse(model)


def power(w: Word, k: int, model: SurfaceModel | None = None) -> Word:
    base = w if k >= 0 else w.inverse(model)
    return Word(base.letters * abs(k))


def concat(w1: Word, w2: Word, model: SurfaceModel | None = None) -> Word:
    return reduce(w1 + w2, model)


# --- commutation ----------------------------------------------------------

def _cache(model: SurfaceModel) -> dict:
    try:
        return model.__dict__["_commute_cache"]
    except KeyError:
        c: dict = {}
        object.__setattr__(model, "_commute_cache", c)
        return c


def support(letter: Letter, model: SurfaceModel):
    if letter.kind == TWIST:
        return model.curve_support(letter.curve)
    return model.letter_support(letter.name, letter.label)


def commutes(a: Letter, b: Letter, model: SurfaceModel) -> bool:
    """Sufficient test for commutation; ``False`` means "not known to commute"."""
    if a.generator == b.generator:
        return True
    key = (a.generator, b.generator) if repr(a.generator) <= repr(b.generator) \
        else (b.generator, a.generator)
    cache = _cache(model)
    if key in cache:
        return cache[key]
    if a.kind == TWIST and b.kind == TWIST:
        out = model.intersection(a.curve, b.curve) == 0
    elif a.kind in (ROTATION, SWAP) or b.kind in (ROTATION, SWAP):
        out = False
    else:
        sa, sb = support(a, model), support(b, model)
        out = isinstance(sa, frozenset) and isinstance(sb, frozenset) and not (sa & sb)
    cache[key] = out
    return out


def reduce(w: Word, model: SurfaceModel | None = None) -> Word:
    """Cancel ``x ... x^-1`` when everything in between commutes with ``x``.

    Without a model this is plain free reduction of adjacent pairs.
    """
    letters = list(w.letters if model is None else normalize_letters(w, model).letters)
    changed = True
    while changed:
        changed = False
        for p in range(len(letters)):
            x = letters[p]
            inv = x.inverse(model)
            for q in range(p + 1, len(letters)):
                y = letters[q]
                if y == inv:
                    del letters[q]
                    del letters[p]
                    changed = True
                    break
                if model is None or not commutes(x, y, model):
                    break
            if changed:
                break
    return Word(letters)


def commute_sort(w: Word, model: SurfaceModel) -> Word:
    """Lexicographically least rearrangement reachable by swapping commuting letters."""
    remaining = list(w.letters)
    out = []
    while remaining:
        best = None
        for idx, l in enumerate(remaining):
            if best is not None and l.sort_key() >= remaining[best].sort_key():
                continue
            if all(commutes(l, m, model) for m in remaining[:idx]):
                best = idx
        out.append(remaining.pop(best))
    return Word(out)


def normal_form(w: Word, model: SurfaceModel) -> Word:
    return commute_sort(reduce(w, model), model)


def equal_mod_commutation(w1: Word, w2: Word, model: SurfaceModel) -> bool:
    """True means certified equal; False is *not* a proof of inequality."""
    return normal_form(w1, model) == normal_form(w2, model)


# --- text syntax ----------------------------------------------------------

_TOKEN = re.compile(r"\s*(~?)\s*(A'\[[^\]]*\]|[ABCD]\[[^\]]*\]|H\[[^\]]*\]|TAU1|TAU2|TAU|H|R|1)\s*")


def parse_letter(text: str, model: SurfaceModel) -> Letter:
    w = parse_word(text, model)
    if len(w) != 1:
        raise ValueError(f"expected a single letter: {text!r}")
    return w[0]


def parse_word(text: str, model: SurfaceModel) -> Word:
    """Parse ``B[1,1]*~C[0,3]*H[n-1]``; ``*`` or whitespace separates letters."""
    from .model import evaluate_int

    env = {} if model.n is None else {"n": model.n}
    letters = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        if text[pos] in "* ":
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot parse word at {text[pos:]!r}")
        pos = m.end()
        neg, tok = m.group(1), m.group(2)
        if tok == "1":
            continue
        exp = -1 if neg else 1
        if tok.startswith("H"):
            if model.parametric:
                if "[" not in tok:
                    raise ValueError("shifts on S(n) need an end label, e.g. H[1]")
                label = (evaluate_int(tok[2:-1], env) - 1) % model.n + 1
                letters.append(symmetry("H", label, exp))
            else:
                if "[" in tok:
                    raise ValueError("this model has a single unlabelled shift H")
                letters.append(symmetry("H", None, exp))
        elif tok in ("R", "TAU", "TAU1", "TAU2"):
            if tok not in model.letters:
                raise ValueError(f"{tok} is not a letter of model {model.name}")
            letters.append(symmetry(tok, None, exp))
        else:
            c = parse_curve(tok, model.n)
            model.check(c)
            letters.append(twist(c, exp))
    return normalize_letters(Word(letters), model)
