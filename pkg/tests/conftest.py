import numpy as np
import pytest

from madoa.geometry import ArrayGeometry, GeometryConfig, Scenario, build_geometry


def uniform_geometry(M=12, Mc=7, ape_scale=0.0, seed=0):
    rng = np.random.default_rng(seed)
    nominal = np.arange(M) * 12.0 / (M - 1)
    dx = ape_scale * rng.uniform(-0.5, 0.5, M)
    dy = ape_scale * rng.uniform(-0.5, 0.5, M)
    dx[:Mc] = dy[:Mc] = 0.0
    return ArrayGeometry(nominal_x=nominal, ape_x=dx, ape_y=dy, n_calibrated=Mc)


def reference_geometry(seed):
    """Random layout with the default position-error model."""
    return build_geometry(GeometryConfig(), np.random.default_rng(seed))


def scenario(theta_deg, noise_power=0.0, n_snapshots=100):
    theta = np.deg2rad(np.sort(np.asarray(theta_deg, dtype=float)))
    return Scenario(theta=theta, source_powers=np.ones(theta.size), noise_power=noise_power,
                    n_snapshots=n_snapshots)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one acceptance line: ``report(criterion, passed, detail)``."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(criterion, passed, detail):
        lines.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
        print(lines[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
