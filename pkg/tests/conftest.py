"""Shared fixtures: a tiny exhaustible group, a fast 64-bit group, RSA keys,
and the acceptance-criteria report plumbing."""

import random

import pytest

from parksense.groups import gen_params
from parksense.server import ServerConfig
from parksense.signatures import keygen

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class QueueRng:
    """Deterministic rng stub: hands out a fixed queue of values.

    random_scalar() calls randrange(p), so queuing scalars enumerates a
    prover's randomness exactly; tests use it to walk every transcript.
    """

    def __init__(self, values):
        self._values = list(values)

    def randrange(self, n):
        return self._values.pop(0) % n

    def getrandbits(self, k):
        return self._values.pop(0) % (1 << k)


@pytest.fixture(scope="session")
def q23():
    params = gen_params(5, b"conftest tiny group")
    assert params.q == 23 and params.p == 11
    return params


@pytest.fixture(scope="session")
def p64():
    return gen_params(64, b"conftest 64-bit group")


@pytest.fixture(scope="session")
def rsa512():
    return keygen(512, random.Random(b"conftest rsa keys"))


@pytest.fixture()
def config64(p64, rsa512):
    # Huge slot_length pins current_slot for the duration of any test.
    return ServerConfig(
        params=p64,
        keys=rsa512,
        b0=0,
        c_q=1,
        credit_per_entry=1,
        epsilon=1,
        slot_length=1e6,
        nn_bits=8,
    )
