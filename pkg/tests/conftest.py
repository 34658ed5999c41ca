from __future__ import annotations

import math

import pytest

from nodalcx.coeffs import select_waveset, solve_perturbation
from nodalcx.nodal import trace, unperturbed_trace
from nodalcx.solution import SolutionU, build_domain, build_h

# ε certified for the canonical waveset; the search itself is tested in test_epsilon
CANONICAL_EPS = math.ldexp(1.0, -42)


@pytest.fixture(scope="session")
def waveset():
    return select_waveset(6)


@pytest.fixture(scope="session")
def pert(waveset):
    return solve_perturbation(waveset)


@pytest.fixture(scope="session")
def eps():
    return CANONICAL_EPS


@pytest.fixture(scope="session")
def tr(pert, eps):
    return trace(eps, pert)


@pytest.fixture(scope="session")
def dom(tr, pert, eps):
    return build_domain(tr, eps, pert)


@pytest.fixture(scope="session")
def sol(dom):
    return SolutionU(dom)


@pytest.fixture(scope="session")
def h(sol, tr):
    return build_h(sol, tr)


@pytest.fixture(scope="session")
def tr0():
    return unperturbed_trace()


@pytest.fixture(scope="session")
def sol0(tr0):
    return SolutionU(build_domain(tr0, 0.0, None))


@pytest.fixture(scope="session")
def h0(sol0, tr0):
    return build_h(sol0, tr0)
