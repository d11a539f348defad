import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sparseshare.field import FieldOrder
from sparseshare.leakage import SourceModel, build_conditional_pmf, sparsity_levels

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# q = 256, s = 0.95 is the reference configuration used throughout
REF_FIELD = FieldOrder.binary(8)
REF_SOURCE = SourceModel(REF_FIELD, 0.95)


def random_feasible(rng, q, s_lo=0.6, s_hi=0.99):
    """(source, targets) reached by a random structured PMF, hence feasible."""
    f = FieldOrder.from_q(q)
    src = SourceModel(f, float(rng.uniform(s_lo, s_hi)))
    p2, p3, _ = rng.dirichlet([1.0, 1.0, 1.0])
    pmf = build_conditional_pmf(float(rng.uniform(0.05, 0.999)), float(p2), float(p3), f.q)
    return src, sparsity_levels(pmf, src)


def binomial_sigma(p, n):
    return float(np.sqrt(p * (1 - p) / n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
