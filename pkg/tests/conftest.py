from fractions import Fraction

import pytest

from fklab.minimize import minimizer_set
from fklab.numbertheory import C_kr_of, select_parameters
from fklab.perturbation import certified_Ck
from fklab.potentials import fk_nn

# desk-scale relaxed destruction setup: omega is a quadratic irrational close to 1/2
RELAXED_OMEGA = "quadratic:41419,2,2,82842"
RELAXED_RELAX = Fraction(1, 10 ** 6)


def relaxed_eps() -> Fraction:
    return C_kr_of(Fraction(3), certified_Ck(2), 1) / 10


@pytest.fixture(scope="session")
def minimizers_5_3():
    return minimizer_set(fk_nn(1.0), 5, 3, n_starts=10, seed=0)


@pytest.fixture(scope="session")
def liouville_selection():
    return select_parameters("liouville:10", 1, 14, 2, 1, Fraction(1, 100), 3)


@pytest.fixture(scope="session")
def relaxed_selection():
    return select_parameters(RELAXED_OMEGA, 1, 14, 2, 1, relaxed_eps(), 3, relax=RELAXED_RELAX)
