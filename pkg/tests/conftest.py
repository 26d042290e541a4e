import numpy as np
import pytest

from embedcal.core import EmbeddedParameter, InferenceProblem, LikelihoodSpec, LogNormal, Normal
from embedcal.datagen import LinearGenSpec, generate_linear
from embedcal.models.linear import LinearModel


def linear_problem(obs, kind="in", epsilon=0.05, center=False):
    param = EmbeddedParameter("t", Normal(4.5, 0.5), LogNormal(-1.0, 0.5))
    spec = LikelihoodSpec(kind, epsilon=epsilon if kind == "abc" else None, center_variance=center)
    return InferenceProblem((param,), LinearModel(obs.x), obs, spec, pce_degree=1)


@pytest.fixture
def linear_obs():
    return generate_linear(LinearGenSpec(seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")
