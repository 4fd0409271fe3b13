import random
import sys
from fractions import Fraction as F

import pytest

from pingpong.constructions import (AvoidanceInstance, avoid_step, avoidance_base, build_profinitely_dense,
                                    family_spec, starting_system)
from pingpong.errors import PreconditionViolated
from pingpong.exact_core import ProjHyperplane, ProjPoint
from pingpong.schottky import add_generator, throw

THREE_CYCLE = ((0, 0, 1), (1, 0, 0), (0, 1, 0))


def P(*c):
    return ProjPoint(c)


def H(*c):
    return ProjHyperplane(c)


@pytest.fixture(scope="session")
def dense_build():
    return build_profinitely_dense(P(1, 0, 0), H(0, 1, 0), F(1, 100) ** 2, F(1, 50) ** 2)


@pytest.fixture(scope="session")
def dense_system(dense_build):
    return dense_build.system


@pytest.fixture(scope="session")
def added_system(dense_system):
    return add_generator(dense_system, P(0, 1, 0), H(1, 0, 0), F(1, 100), F(1, 100))


@pytest.fixture(scope="session")
def thrown(dense_system):
    g = ((1, 0, 0), (0, 1, 0), (0, -1, 1))
    for j in range(2, 12):
        r2 = F(1, 4 ** j)
        try:
            return throw(dense_system, g, P(0, 1, 0), P(0, 1, 1), H(2, 0, 1), H(1, 1, -1), r2, r2)
        except PreconditionViolated:
            continue
    raise AssertionError("no radius worked for the throw instance")


@pytest.fixture(scope="session")
def start_anchors():
    return [(P(1, 0, 0), H(0, 1, 1)), (P(0, 1, 0), H(1, 0, 1)), (P(0, 0, 1), H(1, -1, 0))]


@pytest.fixture(scope="session")
def started(start_anchors):
    return starting_system(THREE_CYCLE, start_anchors, F(1, 16), F(1, 16))


@pytest.fixture(scope="session")
def spec8():
    return family_spec(8)


@pytest.fixture(scope="session")
def avoidance():
    inst = AvoidanceInstance(H(1, 0, 0), H(0, 0, 1), H(0, 1, 0), P(0, 1, 1), F(1, 100))
    base = avoidance_base(inst)
    g = ((1, 0, 0), (0, 0, -1), (0, 1, 0))
    out, cert = avoid_step(base, inst, g, H(0, 1, 0))
    return inst, base, out, cert


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.LINES, key=lambda l: int(l.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return random.Random(12345)
