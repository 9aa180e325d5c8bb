import os
import sys

import pytest

from nrpredict.ingest import derive_features
from nrpredict.preprocess import prepare
from nrpredict.synthgen import GeneratorConfig, generate_trace

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# criterion id -> (title, outcome); filled by the acceptance tests
_CRITERIA: dict[str, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    cid, title = mark.args
    entry = _CRITERIA.setdefault(cid, [title, "PASS"])
    if rep.failed or (rep.when == "setup" and rep.skipped):
        entry[1] = "FAIL" if rep.failed else "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c.lstrip("AC"))):
        title, status = _CRITERIA[cid]
        terminalreporter.write_line(f"{status} {cid} {title}")


@pytest.fixture(scope="session")
def default_trace():
    return generate_trace(GeneratorConfig())


@pytest.fixture(scope="session")
def default_splits(default_trace):
    """(train, test, outlier result) per target for the default trace."""
    return {t: prepare(derive_features(default_trace, t)) for t in ("throughput", "bler")}


@pytest.fixture(scope="session")
def default_comparison(default_splits):
    from nrpredict.eval import compare_models
    return {t: compare_models(tr, te) for t, (tr, te, _) in default_splits.items()}


sys.path.insert(0, os.path.dirname(__file__))
