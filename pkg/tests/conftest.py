from contextlib import contextmanager

import numpy as np
import pytest

from rnnkit.data import data_dir
from rnnkit.model import RnnParameters


def recurrent_pair() -> RnnParameters:
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    return RnnParameters.from_weights(w, None, [0.5, 0.0], [0.5, 0.5])


def feedforward_pair() -> RnnParameters:
    w = np.array([[0.0, 1.0], [0.0, 0.0]])
    return RnnParameters.from_weights(w, None, [0.5, 0.0], [0.0, 1.0])


def mm1() -> RnnParameters:
    # one pure-departure neuron with an explicit firing rate
    z = np.zeros((1, 1))
    return RnnParameters(z, z, [1.0], [0.0], [1.0], [2.0])


def have_dataset(name: str) -> bool:
    return (data_dir() / f"{name}.csv").exists()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register their outcome here; printed at the end of the run
CRITERIA: dict[int, tuple[bool, str, str]] = {}


@contextmanager
def recorded(number: int, title: str):
    """Context for one criterion: call the yielded function with (passed, detail).

    An exception inside the block records a failure with its message; a
    recorded failure also fails the test.
    """
    result = {}

    def rec(passed: bool, detail: str) -> None:
        result["passed"], result["detail"] = bool(passed), detail

    try:
        yield rec
    except BaseException as exc:
        msg = getattr(exc, "msg", None) or f"{type(exc).__name__}: {exc}"
        CRITERIA[number] = (False, title, msg)
        raise
    CRITERIA[number] = (result.get("passed", False), title, result.get("detail", "no result"))
    print(f"criterion {number} {'PASS' if result.get('passed') else 'FAIL'}: "
          f"{result.get('detail')}")
    assert result.get("passed"), result.get("detail")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, title, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if passed else 'FAIL'}  "
                                    f"{title}: {detail}")
