import numpy as np
import pytest

from topolink.graph_store import TemporalEdgeList, snapshot


def edges_from_pairs(pairs, n_nodes=None, t=0):
    recs = [(u, v, t) for u, v in pairs]
    return TemporalEdgeList.from_records(np.array(recs, dtype=np.int64).reshape(-1, 3), n_nodes=n_nodes)


@pytest.fixture
def g1():
    """Four-node graph on ids 1..4 (id 0 isolated): triangle 1-2-3 plus 3-4."""
    return snapshot(edges_from_pairs([(1, 2), (1, 3), (2, 3), (3, 4)]), 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20211212)


# --- acceptance reporting --------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        line = f"criterion {number} [{title}]: {status}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
