import pytest

from bigmcg.model import load_model
from bigmcg.word import parse_word


@pytest.fixture(scope="session")
def s8():
    return load_model("s_n", 8)


@pytest.fixture(scope="session")
def jacob():
    return load_model("jacob")


@pytest.fixture(scope="session")
def lochness():
    return load_model("lochness")


@pytest.fixture
def w():
    def parse(text, model):
        return parse_word(text, model)
    return parse
