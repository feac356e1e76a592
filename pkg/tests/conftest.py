from __future__ import annotations

import numpy as np
import pytest

from ldhit.geometry import OrthantTarget, half_space_geometry, mpp_orthant
from ldhit.jump_models import Exponential, GaussianJumpModel, ProportionalClaims, build_sparre_andersen
from ldhit.rates import RateEvaluator

from oracles import G, MU, SIGMA


@pytest.fixture(scope="session")
def gauss():
    return GaussianJumpModel(MU, SIGMA)


@pytest.fixture
def ev(gauss):
    return RateEvaluator(gauss)


@pytest.fixture(scope="session")
def report(gauss):
    return mpp_orthant(OrthantTarget(G, RateEvaluator(gauss)))


@pytest.fixture(scope="session")
def geom(gauss):
    return half_space_geometry(OrthantTarget(G, RateEvaluator(gauss)))


@pytest.fixture(scope="session")
def sa_model():
    """Exp(1) claims split (0.6, 0.4), Poisson(1) arrivals, unit premiums."""
    claims = ProportionalClaims([0.6, 0.4], Exponential(1.0))
    return build_sparre_andersen([1.0, 1.0], claims, Exponential(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_ACCEPTANCE: list = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and return the flag."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
