import numpy as np
import pytest

from mtvip.model import NetworkModel, NodeCacheConfig, ObjectCatalog, TierSpec, build_routing


def line(n, capacity=10.0):
    return NetworkModel.from_edges([str(i) for i in range(n)],
                                   [(i, i + 1, capacity) for i in range(n - 1)])


def two_tier(c1=5, c2=100, r1=20.0, r2=10.0):
    return NodeCacheConfig((TierSpec(c1, r1, r1, 4.0, 2.0), TierSpec(c2, r2, r2, 2.0, 1.0)))


def catalog(sources, lam=10.0, zipf=0.75):
    return ObjectCatalog(np.asarray(sources, dtype=np.int64), zipf, lam)


@pytest.fixture
def line3():
    """0 - 1 - 2 - 3 with every object sourced at node 3."""
    model = line(4)
    cat = catalog([3, 3, 3])
    return model, cat, build_routing(model, cat)


ACCEPTANCE = {}


def record(criterion, passed, detail):
    """Store one acceptance verdict; printed at the end of the session."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
