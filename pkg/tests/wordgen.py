"""Random words for property tests."""
from hypothesis import strategies as st

from bigmcg.word import Word, symmetry, twist


def alphabet(model, bound=3):
    out = [twist(c) for c in model.curves(bound)]
    for name in model.letters:
        if not model.has_curve_action(name) and name != "TAU":
            continue
        if name == "TAU":
            continue
        labels = model.shift_labels() if name in model.shift_letters else [None]
        out += [symmetry(name, lab) for lab in labels]
    return out


def random_word(rng, model, maxlen=12, pool=None):
    pool = pool or alphabet(model)
    k = rng.randint(0, maxlen)
    return Word([rng.choice(pool).inverse(model) if rng.random() < 0.5 else rng.choice(pool)
                 for _ in range(k)])


def words(model, maxlen=12, pool=None):
    pool = pool or alphabet(model)
    letter = st.sampled_from(pool).flatmap(
        lambda l: st.sampled_from([l, l.inverse(model)]))
    return st.lists(letter, max_size=maxlen).map(Word)
