"""Curve images quoted in the source derivations, as (model, n, session, word, curve, image).

``session`` names a corpus script whose replayed model supplies derived curves.
"""

TABLE = [
    # handle shift h_{1,2} on the first two b curves
    ("s_n", 8, None, "H[1]", "B[1,1]", "B[1,2]"),
    ("s_n", 8, None, "H[1]", "B[1,2]", "B[2,2]"),
    # ladder braid move: (A1 ~A2)(B1 ~B2) on (a1, a3)
    ("jacob", None, None, "A[1]*~A[2]*B[1]*~B[2]", "A[1]", "B[1]"),
    ("jacob", None, None, "A[1]*~A[2]*B[1]*~B[2]", "A[3]", "A[3]"),
    # lantern curves on the ladder: (b2, a1) -> (d1, a1) and (d1, a1) -> (d2, a1)
    ("jacob", None, "jacob-lemma", "B[2]*~A[1]*C[1]*~A[1]*A[1]*~A[2]*C[1]*~A[2]", "B[2]", "D[1]"),
    ("jacob", None, "jacob-lemma", "B[2]*~A[1]*C[1]*~A[1]*A[1]*~A[2]*C[1]*~A[2]", "A[1]", "A[1]"),
    ("jacob", None, "jacob-lemma", "B[3]*~A[1]*C[2]*~A[1]*A[3]*~A[1]*B[3]*~A[1]", "D[1]", "D[2]"),
    ("jacob", None, "jacob-lemma", "B[3]*~A[1]*C[2]*~A[1]*A[3]*~A[1]*B[3]*~A[1]", "A[1]", "A[1]"),
    # one-ended surface: (C_-1 ~A_-1) F1 on (a_-1, c_-1), F1 = A4 C0 B_-2
    ("lochness", None, None, "C[-1]*~A[-1]*A[4]*C[0]*B[-2]", "A[-1]", "A[-1]"),
    ("lochness", None, None, "C[-1]*~A[-1]*A[4]*C[0]*B[-2]", "C[-1]", "B[-2]"),
]


def table_model(name, n, session):
    from bigmcg.model import load_model
    if session is None:
        return load_model(name, n)
    from bigmcg.script import load_script, replay_session
    return replay_session(load_script(session), n)[1].model
