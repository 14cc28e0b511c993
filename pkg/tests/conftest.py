import json

import numpy as np
import pytest

from bdpz import bounds as bd
from bdpz import model as md


def constant_model(lam: float, mu: float, name: str = "const") -> md.RateModel:
    """State-independent constant rates; X(t) is then a difference of two
    Poisson counts (the closed-form cross-check law)."""
    doc = {
        "name": name,
        "horizon": 1,
        "birth": [{"lo": "-inf", "hi": "+inf", "base": lam}],
        "death": [{"lo": "-inf", "hi": "+inf", "base": mu}],
    }
    return md.load_model(json.dumps(doc))


def skellam_pmf(ks, lam: float, mu: float, t: float):
    """Difference-of-Poissons law via exponentially scaled Bessel I."""
    from scipy.special import ive

    ks = np.asarray(ks)
    x = 2.0 * t * np.sqrt(lam * mu)
    return ive(ks, x) * np.exp(x - (lam + mu) * t) * (lam / mu) ** (ks / 2.0)


@pytest.fixture(scope="session")
def ex1():
    return md.build_ex1()


@pytest.fixture(scope="session")
def ex2():
    return md.build_ex2()


@pytest.fixture(scope="session")
def w_ex1():
    return bd.BUILTIN_WEIGHTS["ex1"]()


@pytest.fixture(scope="session")
def w_ex1_star():
    return bd.BUILTIN_WEIGHTS["ex1-star"]()


@pytest.fixture(scope="session")
def w_ex2():
    return bd.BUILTIN_WEIGHTS["ex2"]()


@pytest.fixture(scope="session")
def w_ex2_star():
    return bd.BUILTIN_WEIGHTS["ex2-star"]()


@pytest.fixture(scope="session")
def zero_model():
    return constant_model(0.0, 0.0, name="zero")
