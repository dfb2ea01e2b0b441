import numpy as np
import pytest

from tripoint.coefficients import CoefficientPair, PeriodicCoefficient, pair_p1


@pytest.fixture(scope="session")
def p1():
    return pair_p1()


@pytest.fixture(scope="session")
def zero_pair():
    return CoefficientPair()


def generic_pairs():
    """Three pairs used by the symmetry and reality checks."""
    return [
        pair_p1(),
        CoefficientPair(PeriodicCoefficient(0.1, (0.2, -0.05), (0.0, 0.1)),
                        PeriodicCoefficient(-0.3, (0.15,), (0.25, 0.0, 0.05))),
        CoefficientPair(PeriodicCoefficient(0.0, (), (0.4,)),
                        PeriodicCoefficient(0.5, (0.0, 0.3))),
    ]


def random_coefficient(rng: np.random.Generator, degree: int) -> PeriodicCoefficient:
    return PeriodicCoefficient(rng.normal(), tuple(rng.normal(size=degree)), tuple(rng.normal(size=degree)))
