import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from onlinecolor.graph import EdgeStream, Graph

# first calls pay kernel compilation, so per-example deadlines are meaningless
settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion id")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = report.user_properties and dict(report.user_properties).get("criterion")
    if crit:
        prev = _criteria.get(crit[0], (crit[1], True))
        _criteria[crit[0]] = (crit[1], prev[1] and report.outcome == "passed")


@pytest.fixture(autouse=True)
def _tag_criterion(request):
    m = request.node.get_closest_marker("criterion")
    if m:
        request.node.user_properties.append(("criterion", (m.args[0], m.args[1])))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c[2:])):
        title, ok = _criteria[cid]
        terminalreporter.write_line(f"{cid:5s} {'PASS' if ok else 'FAIL'}  {title}")


@st.composite
def streams(draw, max_n=12, max_m=30):
    """Small simple graphs with a random arrival order."""
    n = draw(st.integers(2, max_n))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=max_m))
    seen, edges = set(), []
    for u, v in pairs:
        if u != v and (min(u, v), max(u, v)) not in seen:
            seen.add((min(u, v), max(u, v)))
            edges.append((u, v))
    if not edges:
        edges = [(0, 1)]
    e = np.array(edges, dtype=np.int64)
    delta = int(np.bincount(e.ravel(), minlength=n).max())
    order = draw(st.permutations(range(len(edges))))
    return EdgeStream(Graph(n, e, delta), np.array(order, dtype=np.int64))
