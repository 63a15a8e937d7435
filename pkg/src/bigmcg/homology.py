"""Integer symplectic oracle on a truncated homology lattice.

Every handle h in the window carries a basis pair (x_h, y_h) with
<x_h, y_h> = 1.  A right-handed twist about c acts as the transvection
v -> v + <v, c> c; symmetry letters permute handles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CurveId, RelabelGap, SurfaceModel, UnknownCurve
from .word import TWIST, Word

_LIMIT = 1 << 60


class OracleError(Exception):
    pass


class OutsideWindow(OracleError):
    pass


class WindowTooSmall(OracleError):
    pass


class Overflow(OracleError):
    pass


class NoMatrix(OracleError):
    pass


@dataclass(frozen=True)
class TruncationWindow:
    N: int = 16
    margin: int = 4

    @property
    def size(self) -> int:
        return self.N + self.margin


class Lattice:
    """Basis bookkeeping for one model and window."""

    def __init__(self, model: SurfaceModel, window: TruncationWindow):
        self.model = model
        self.window = window
        W = window.size
        if model.parametric:
            self.handles = [(i, j) for j in range(1, model.n + 1) for i in range(1, W + 1)]
        else:
            self.handles = [(i,) for i in range(-W, W + 1) if i != 0]
        self.pos = {h: k for k, h in enumerate(self.handles)}
        self.dim = 2 * len(self.handles)
        self._perm_cache: dict = {}
        self._wrapped: dict = {}

    def genus(self, h: tuple) -> int:
        return abs(h[0])

    def vector(self, klass: "HomologyClass") -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.int64)
        for (kind, h), k in klass.coeffs.items():
            if h not in self.pos:
                raise OutsideWindow(f"handle {h} lies outside the window")
            v[2 * self.pos[h] + (kind == "y")] += k
        return v

    def handle_curve(self, h: tuple) -> CurveId:
        return CurveId("B", h[0], h[1]) if self.model.parametric else CurveId("B", h[0])

    def perm(self, name: str, label, inverse: bool) -> np.ndarray:
        """Handle permutation of a symmetry letter, completed cyclically at the window edge."""
        key = (name, label, inverse)
        if key in self._perm_cache:
            return self._perm_cache[key]
        if inverse:
            fwd = self.perm(name, label, False)
            out = np.empty_like(fwd)
            out[fwd] = np.arange(len(fwd))
            self._perm_cache[key] = out
            self._wrapped[key] = frozenset(int(fwd[k]) for k in self._wrapped[(name, label, False)])
            return out
        if not self.model.has_curve_action(name):
            raise NoMatrix(f"{name} has no curve action (only its end permutation is modelled)")
        img = {}
        sources = []
        for h in self.handles:
            try:
                b = self.model.relabel(name, label, False, self.handle_curve(h))
            except RelabelGap as exc:
                raise NoMatrix(str(exc)) from exc
            t = (b.index, b.end) if self.model.parametric else (b.index,)
            if t in self.pos:
                img[h] = t
            else:
                sources.append(h)
        hit = set(img.values())
        sinks = [h for h in self.handles if h not in hit]
        if len(sinks) != len(sources):
            raise NoMatrix(f"{name} does not restrict to a bijection of the window")
        for s, t in zip(sources, sinks):
            img[s] = t
        out = np.array([self.pos[img[h]] for h in self.handles], dtype=np.int64)
        self._perm_cache[key] = out
        self._wrapped[key] = frozenset(self.pos[h] for h in sources)
        return out

    def wrapped(self, name: str, label, inverse: bool) -> frozenset:
        """Handle positions whose image under the letter is a cyclic filler."""
        self.perm(name, label, inverse)
        return self._wrapped[(name, label, inverse)]

    def wrapped_mask(self, name: str, label, inverse: bool) -> np.ndarray:
        key = ("mask", name, label, inverse)
        if key not in self._perm_cache:
            m = np.zeros(len(self.handles), dtype=bool)
            m[list(self.wrapped(name, label, inverse))] = True
            self._perm_cache[key] = m
        return self._perm_cache[key]


@dataclass(frozen=True)
class HomologyClass:
    coeffs: dict

    def pairing(self, other: "HomologyClass") -> int:
        s = 0
        for (kind, h), a in self.coeffs.items():
            if kind == "x":
                s += a * other.coeffs.get(("y", h), 0)
            else:
                s -= a * other.coeffs.get(("x", h), 0)
        return s

    def negated(self) -> "HomologyClass":
        return HomologyClass({k: -v for k, v in self.coeffs.items()})

    def __str__(self) -> str:
        parts = []
        for (kind, h), k in sorted(self.coeffs.items(), key=lambda t: (t[0][1], t[0][0])):
            name = f"{kind}{','.join(map(str, h))}"
            parts.append(f"{'+' if k > 0 else '-'}{'' if abs(k) == 1 else abs(k)}{name}")
        s = "".join(parts) or "0"
        return s[1:] if s.startswith("+") else s


def curve_class(model: SurfaceModel, c: CurveId, window: TruncationWindow | None = None):
    try:
        terms = model.homology_terms(c)
    except UnknownCurve as exc:
        raise UnknownCurve(f"unregistered class for {c}") from exc
    klass = HomologyClass({(kind, h): k for kind, h, k in terms})
    if window is not None:
        for (_, h) in klass.coeffs:
            if abs(h[0]) > window.N:
                raise OutsideWindow(f"{c} touches handle {h} beyond N={window.N}")
    return klass


_LATTICES: dict = {}


def lattice(model: SurfaceModel, window: TruncationWindow) -> Lattice:
    key = (id(model), window)
    got = _LATTICES.get(key)
    if got is None or got[0] is not model:
        got = (model, Lattice(model, window))
        _LATTICES[key] = got
    return got[1]


def _symmetry_steps(l, model: SurfaceModel) -> list:
    """Primitive (name, label, inverse) steps of a symmetry letter, leftmost first."""
    if l.name in model.composites:
        parts = model.composites[l.name]
        if l.exp < 0 and l.name not in model.involutions:
            parts = [(nm, not inv) for nm, inv in reversed(parts)]
        return [(nm, l.label, inv and nm not in model.involutions) for nm, inv in parts]
    return [(l.name, l.label, l.exp < 0 and l.name not in model.involutions)]


def check_window(w: Word, model: SurfaceModel, window: TruncationWindow) -> None:
    """Refuse words whose truncated matrix could differ from the true action.

    Every twist class must sit at genus at most N, and carrying it through
    the symmetry letters to its left must never use a cyclic filler slot of
    the truncated permutations.
    """
    L = lattice(model, window)
    # safe[k]: handle position k can be carried through every symmetry letter
    # seen so far (all of which lie to the left) without touching a filler.
    safe = np.ones(len(L.handles), dtype=bool)
    for l in w.letters:
        if l.kind != TWIST:
            for name, label, inv in _symmetry_steps(l, model):
                safe = safe[L.perm(name, label, inv)] & ~L.wrapped_mask(name, label, inv)
            continue
        hs = {h for (_, h) in curve_class(model, l.curve).coeffs}
        top = max((abs(h[0]) for h in hs), default=0)
        if top > window.N:
            raise WindowTooSmall(f"{l.curve} touches genus {top} beyond N={window.N}")
        if not all(safe[L.pos[h]] for h in hs):
            raise WindowTooSmall(
                f"{l.curve} is carried past the edge of N+m={window.size} "
                f"by the symmetry letters to its left")


def _transvect(M: np.ndarray, c: np.ndarray, exp: int) -> None:
    # T_c(v) = v + <v,c> c,  <v,c> = v . (Jc) with J x = -y-part, J y = x-part
    Jc = np.zeros_like(c)
    Jc[0::2] = c[1::2]
    Jc[1::2] = -c[0::2]
    idx = np.nonzero(Jc)[0]
    r = Jc[idx] @ M[idx]
    rows = np.nonzero(c)[0]
    M[rows] += exp * np.outer(c[rows], r)


def word_matrix(w: Word, model: SurfaceModel, window: TruncationWindow | None = None,
                check: bool = True) -> np.ndarray:
    window = window or TruncationWindow()
    if check:
        check_window(w, model, window)
    L = lattice(model, window)
    M = np.eye(L.dim, dtype=np.int64)
    for l in reversed(w.letters):
        apply_letter(M, l, L)
        if np.abs(M).max() > _LIMIT:
            raise Overflow("matrix entries exceed the int64 safety bound")
    return M


def apply_letter(M: np.ndarray, l, L: Lattice) -> np.ndarray:
    """Left-multiply ``M`` in place by the matrix of letter ``l``."""
    if l.kind == TWIST:
        c = L.vector(curve_class(L.model, l.curve))
        _transvect(M, c, l.exp)
        return M
    model = L.model
    if l.name in model.composites:
        parts = model.composites[l.name]
        seq = parts if l.exp > 0 else [(n, not inv) for n, inv in reversed(parts)]
        from .word import symmetry
        for name, inv in reversed(seq):
            apply_letter(M, symmetry(name, l.label, -1 if inv else 1), L)
        return M
    inv = l.exp < 0 and l.name not in model.involutions
    p = L.perm(l.name, l.label, inv)
    new = np.empty_like(M)
    rows = np.empty(L.dim, dtype=np.int64)
    rows[0::2] = 2 * p
    rows[1::2] = 2 * p + 1
    new[rows] = M
    M[:] = new
    return M


@dataclass(frozen=True)
class OracleVerdict:
    status: str          # "equal", "unequal", "inapplicable"
    reason: str = ""

    def __str__(self) -> str:
        return self.status if not self.reason else f"{self.status} ({self.reason})"


def oracle_check(lhs: Word, rhs: Word, model: SurfaceModel,
                 window: TruncationWindow | None = None) -> OracleVerdict:
    window = window or TruncationWindow()
    try:
        a = word_matrix(lhs, model, window)
        b = word_matrix(rhs, model, window)
    except (WindowTooSmall, OutsideWindow) as exc:
        return OracleVerdict("inapplicable", f"window too small: {exc}")
    except NoMatrix as exc:
        return OracleVerdict("inapplicable", f"curve action undefined: {exc}")
    except Overflow as exc:
        return OracleVerdict("inapplicable", f"overflow: {exc}")
    except UnknownCurve as exc:
        return OracleVerdict("inapplicable", f"unregistered class: {exc}")
    return OracleVerdict("equal" if np.array_equal(a, b) else "unequal")


def symplectic_form(L: Lattice) -> np.ndarray:
    J = np.zeros((L.dim, L.dim), dtype=np.int64)
    for k in range(len(L.handles)):
        J[2 * k, 2 * k + 1] = 1
        J[2 * k + 1, 2 * k] = -1
    return J


def format_sparse(M: np.ndarray, L: Lattice) -> str:
    """Nonzero entries of M - I, one ``row col value`` line each, basis-labelled."""
    names = []
    for h in L.handles:
        tag = ",".join(map(str, h))
        names += [f"x{tag}", f"y{tag}"]
    D = M - np.eye(L.dim, dtype=np.int64)
    lines = [f"# dim {L.dim}; entries of M - I (row col value)"]
    for r, c in zip(*np.nonzero(D)):
        lines.append(f"{names[r]} {names[c]} {int(D[r, c])}")
    return "\n".join(lines)
