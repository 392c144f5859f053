import numpy as np
import pytest

from otfs_mimo.channel import GridDims, all_domain_channels, draw_user_channel

# acceptance criteria report: {number: (passed, detail)}
ACCEPTANCE = {}


def record(number: int, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def random_users(seed, dims, n_high, n_low, *, P=2, l_max=2, k_max=(2.0, 1.0)):
    rng = np.random.default_rng(seed)
    users = []
    for k in range(n_high + n_low):
        high = k < n_high
        users.append(draw_user_channel(rng, "high" if high else "low", dims, P, l_max,
                                       k_max[0] if high else k_max[1], user_id=k))
    return users


@pytest.fixture
def small_dims():
    return GridDims(4, 2, 12)


@pytest.fixture
def small_users(small_dims):
    return random_users(7, small_dims, 2, 2)


@pytest.fixture
def small_channels(small_users):
    return {u.user_id: all_domain_channels(u) for u in small_users}
