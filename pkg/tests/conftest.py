import pytest

from crankback import Scenario

DEADLINES = (16.0, 15.0, 14.0)


@pytest.fixture(scope="session")
def benchmark_scenarios():
    """The three reference scenarios: n=6, M=3, V=1, p_tr=0.9, T in 16/15/14."""
    return {
        t: Scenario(n=6, hop_mean=3.0, hop_var=1.0, deadline=t, p_tr=0.9)
        for t in DEADLINES
    }


@pytest.fixture(scope="session")
def t16(benchmark_scenarios):
    return benchmark_scenarios[16.0]
