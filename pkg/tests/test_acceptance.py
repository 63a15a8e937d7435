"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines are printed even with output capture on) or directly
with ``python tests/test_acceptance.py``.
"""
import os
import random
import subprocess
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from action_table import TABLE, table_model  # noqa: E402
from wordgen import alphabet, random_word  # noqa: E402

from bigmcg.action import apply_to_curve, end_permutation, sym_generation_check  # noqa: E402
from bigmcg.homology import (OutsideWindow, TruncationWindow, WindowTooSmall,  # noqa: E402
                             curve_class, word_matrix)
from bigmcg.model import (instantiate, load_model, parse_curve, parse_template,  # noqa: E402
                          read_template, validate_model)
from bigmcg.script import (CORPUS, Step, load_script, mutate, mutation_sites,  # noqa: E402
                           parameter_sets, print_expr, replay)
from bigmcg.word import Word, commute_sort, parse_word, reduce, twist  # noqa: E402

WIN = TruncationWindow()
EXPECTED_PARAMS = {"thm-n8": (8, 10, 12), "thm-n3plus": (3, 5, 8), "lemma-2.2R": (3, 6),
                   "jacob-lemma": (None,), "thm-jacob": (None,), "lochness-lemma": (None,),
                   "thm-lochness": (None,)}
ANCHORS = [("thm-n8", "conj(F1, pow(R, 2))"), ("thm-n3plus", "conj(CC3, pow(R, 2-n))"),
           ("thm-jacob", "F4*~F5"), ("thm-lochness", "F7*~F8")]

_TIMER = """
import time
from bigmcg.script import corpus, parameter_sets, replay
t = time.perf_counter()
ok = all(replay(s, n).passed for s in corpus() for n in parameter_sets(s))
print(ok, time.perf_counter() - t)
"""


def corpus_replay():
    bad = []
    for name in CORPUS:
        s = load_script(name)
        if tuple(parameter_sets(s)) != EXPECTED_PARAMS[name]:
            bad.append(f"{name} parameter sets {parameter_sets(s)}")
        for n in parameter_sets(s):
            if not replay(s, n).passed:
                bad.append(f"{name} n={n} fails")
    for name, expr in ANCHORS:
        s = load_script(name)
        rep = replay(s, parameter_sets(s)[-1])
        hit = [st.name for st in s.statements
               if isinstance(st, Step) and print_expr(st.expr) == expr]
        if not hit or not all(r.status == "certified+oracle-equal"
                              for r in rep.steps if r.name in hit):
            bad.append(f"anchor {expr} in {name}")
    out = subprocess.run([sys.executable, "-c", _TIMER], capture_output=True, text=True,
                         check=True).stdout.split()
    secs = float(out[1])
    if out[0] != "True" or secs >= 5.0:
        bad.append(f"cold replay took {secs:.2f}s")
    return not bad, f"12 script/parameter pairs, cold replay {secs:.2f}s" + _why(bad)


def oracle_concordance():
    equal, other = 0, []
    for name in CORPUS:
        s = load_script(name)
        for n in parameter_sets(s):
            for st in replay(s, n).steps:
                if st.status in ("skipped",) or st.certificate.get("kind") == "Definition":
                    continue
                if st.oracle == "equal":
                    equal += 1
                else:
                    other.append(f"{name}/{n}/{st.name}: {st.oracle or st.status}")
    return not other, f"{equal} certified steps oracle-equal" + _why(other)


def _T(m, *cs):
    return word_matrix(Word([twist(c) for c in cs]), m, WIN)


def _in_window(m, c):
    try:
        curve_class(m, c, WIN)
        return True
    except OutsideWindow:
        return False


def matrix_relations():
    bad, braids, comms, lanterns = [], 0, 0, 0
    rng = random.Random(2024)
    for name, n in (("s_n", 8), ("jacob", None), ("lochness", None)):
        m = load_model(name, n)
        cs = [c for c in m.curves(WIN.N) if _in_window(m, c)]
        for a in cs:
            for b in m.neighbors(a):
                if a.sort_key() < b.sort_key() and _in_window(m, b):
                    braids += 1
                    if not np.array_equal(_T(m, a, b, a), _T(m, b, a, b)):
                        bad.append(f"braid {a},{b}")
        k = 0
        while k < 200:
            a, b = rng.sample(cs, 2)
            if m.intersection(a, b) == 0:
                k += 1
                comms += 1
                if not np.array_equal(_T(m, a, b), _T(m, b, a)):
                    bad.append(f"commute {a},{b}")
        for lt in m.lanterns:
            lanterns += 1
            if not np.array_equal(_T(m, *lt.boundary), _T(m, *lt.interior)):
                bad.append(f"lantern {lt.name}")
    return not bad, (f"{braids} braid pairs, {comms} disjoint pairs, "
                     f"{lanterns} lanterns exact" + _why(bad))


def symmetric_group():
    bad = []
    for n in range(3, 13):
        m = load_model("s_n", n)
        gens = {end_permutation(parse_word(x, m), m) for x in ("R", "TAU")}
        if not sym_generation_check(gens, n):
            bad.append(str(n))
    return not bad, "R and TAU generate Sym_n for n = 3..12" + _why(bad)


def mutation_suite():
    bad, total = [], 0
    for name in CORPUS:
        s = load_script(name)
        n = parameter_sets(s)[-1]
        m = load_model(s.model, n if s.requires else None)
        count = 0
        for site in mutation_sites(s):
            mutant = mutate(s, site)
            if not _mutant_in_system(s, mutant, site, m):
                continue
            rep = replay(mutant, n)
            res = next(r for r in rep.steps if r.name == s.statements[site].name)
            count += 1
            if res.status != "failed" or not res.oracle.startswith("unequal") or rep.passed:
                bad.append(f"{name}/{res.name}: {res.status} {res.oracle}")
        if count < 3:
            bad.append(f"{name} has only {count} mutations")
        total += count
    return not bad, f"{total} mutants, all fail with oracle unequal" + _why(bad)


def _mutant_in_system(s, mutant, site, m):
    from bigmcg.script import _lits
    pairs = zip(_lits(s.statements[site].expect), _lits(mutant.statements[site].expect))
    lit = next(b for a, b in pairs if a != b).text.lstrip("~")
    if lit[0] not in "ABCD":
        return True
    c = parse_curve(lit, m.n)
    return c.family != "D" and m.is_registered(c)


def action_table():
    bad = []
    for name, n, session, word, curve, image in TABLE:
        m = table_model(name, n, session)
        out = apply_to_curve(parse_word(word, m), parse_curve(curve, m.n), m)
        if not (out.resolved and out.curve == parse_curve(image, m.n)):
            got = out.curve if out.resolved else f"unresolved {out.term}"
            bad.append(f"({word})({curve}) = {got}, quoted {image}")
    return not bad, f"{len(TABLE) - len(bad)}/{len(TABLE)} quoted images" + _why(bad)


def normalization_soundness():
    rng = random.Random(1)
    bad, done = [], 0
    for name, n, count in (("s_n", 8, 500), ("jacob", None, 250), ("lochness", None, 250)):
        m = load_model(name, n)
        pool = alphabet(m)
        k = 0
        while k < count:
            w = random_word(rng, m, 12, pool)
            try:
                a = word_matrix(w, m, WIN)
            except WindowTooSmall:
                continue
            k += 1
            if not np.array_equal(a, word_matrix(reduce(commute_sort(w, m), m), m, WIN)):
                bad.append(f"{name}: {w}")
        done += k
    return not bad, f"{done} random words (length <= 12)" + _why(bad)


def model_validation():
    bad = []
    for name, n in (("s_n", 3), ("s_n", 8), ("s_n", 12), ("jacob", None), ("lochness", None)):
        if validate_model(load_model(name, n)):
            bad.append(f"{name} n={n} not clean")
    seeded = {
        "asymmetry": ("s_n", "[RELABELS]", "A[1,1] -> B[2,1] = 1\n\n[RELABELS]",
                      "asymmetric intersection"),
        "relabel": ("s_n", "H[k]: B[1,k] -> B[1,k+1]", "H[k]: B[1,k] -> B[2,k+1]",
                    "breaks intersection"),
        "parity": ("s_n", "C[0,j] = x(1,j) - x(1,j+1)", "C[0,j] = x(1,j) + y(1,j+1)",
                   "pairing parity"),
        "lantern": ("jacob", "D[1] = x(3) - x(1)", "D[1] = x(3) + x(1)", "matrix identity"),
    }
    for label, (name, old, new, needle) in seeded.items():
        tpl = read_template(name)
        m = instantiate(parse_template(tpl.text.replace(old, new, 1)),
                        5 if tpl.kind == "s_n" else None)
        if not any(needle in v for v in validate_model(m)):
            bad.append(f"{label} not detected")
    return not bad, "shipped models clean, 4 seeded violation classes caught" + _why(bad)


def _why(bad):
    if not bad:
        return ""
    more = f" (+{len(bad) - 3} more)" if len(bad) > 3 else ""
    return "; problems: " + "; ".join(bad[:3]) + more


CRITERIA = [
    (1, "corpus replay", corpus_replay),
    (2, "oracle concordance", oracle_concordance),
    (3, "matrix relation suite", matrix_relations),
    (4, "symmetric group generation", symmetric_group),
    (5, "mutation suite", mutation_suite),
    (6, "action instance table", action_table),
    (7, "normalization soundness", normalization_soundness),
    (8, "model validation", model_validation),
]


def _report(num, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {num} ({title}): {detail}"


@pytest.mark.parametrize("num,title,check", CRITERIA, ids=[c[1].replace(" ", "-") for c in CRITERIA])
def test_criterion(num, title, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _report(num, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for num, title, check in CRITERIA:
        ok, detail = check()
        results.append(ok)
        print(_report(num, title, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
