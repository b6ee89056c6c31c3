import random
from fractions import Fraction

import pytest
from hypothesis import settings

from randml.dist import Dist

settings.register_profile("suite", max_examples=60, deadline=None)
settings.load_profile("suite")


def random_subdist(rng: random.Random, outcomes, max_den: int = 8) -> Dist:
    """A random subdistribution over a subset of ``outcomes``."""
    picks = [a for a in outcomes if rng.random() < 0.7]
    if not picks:
        picks = [rng.choice(list(outcomes))]
    raw = [Fraction(rng.randrange(0, max_den + 1), max_den) for _ in picks]
    total = sum(raw, Fraction(0))
    if total > 1:
        raw = [w / total for w in raw]
    return Dist(zip(picks, raw))


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
