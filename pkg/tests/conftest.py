import numpy as np
import pytest
from hypothesis import settings, strategies as st

from pidkd import Joint3

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@st.composite
def joints(draw, max_card=3, min_card=2):
    """Random Joint3 with cardinalities in [min_card, max_card] and some exact zeros."""
    cards = tuple(draw(st.integers(min_card, max_card)) for _ in range(3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(int(np.prod(cards)), draw(st.sampled_from([0.3, 1.0, 3.0]))))
    if draw(st.booleans()):
        p[rng.random(p.size) < 0.2] = 0.0
        if p.sum() == 0:
            p[0] = 1.0
        p /= p.sum()
    return Joint3(p.reshape(cards))


def and_gate():
    p = np.zeros((2, 2, 2))
    for t in (0, 1):
        for s in (0, 1):
            p[t & s, t, s] = 0.25
    return Joint3(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdicts, echoed at the end of the run so they survive output capture
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
