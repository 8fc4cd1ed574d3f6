import math

import pytest

from rwre.env import EnvironmentSpec, SiteLaw

GOLDEN_S = math.log2((1 + math.sqrt(5)) / 2)

LAW_A = SiteLaw.from_dict({-2: 0.1, -1: 0.2, 0: 0.2, 1: 0.5})
LAW_B = SiteLaw.from_dict({-2: 0.3, -1: 0.2, 0: 0.1, 1: 0.4})


def golden_spec():
    return EnvironmentSpec.nearest_neighbor([0.25, 2.0], kappa=0.1)


def mirror_spec():
    return EnvironmentSpec.nearest_neighbor([4.0, 0.5], kappa=0.1)


def positive_speed_spec():
    return EnvironmentSpec.nearest_neighbor([1 / 9, 1 / 3], kappa=0.05)


def unit_rho_spec():
    return EnvironmentSpec.nearest_neighbor([1.0], kappa=0.5)


def pointmass_l2_spec():
    return EnvironmentSpec.point_mass(LAW_A, kappa=0.1)


def two_atom_l2_spec():
    return EnvironmentSpec(2, 0.1, ((LAW_A, 0.5), (LAW_B, 0.5)))


@pytest.fixture
def golden():
    return golden_spec()


@pytest.fixture
def two_atom_l2():
    return two_atom_l2_spec()


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line for the acceptance summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def log(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
