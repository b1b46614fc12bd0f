import os

import pytest

from cabopt.oracle import ensure_catalog

# (criterion id, verdict, description, detail) lines collected by the
# acceptance module and printed in the terminal summary
ACCEPTANCE_LINES: list[tuple[str, str, str, str]] = []


@pytest.fixture(scope="session")
def catalog_dir(tmp_path_factory):
    directory = os.environ.get("CABOPT_TEST_CATALOG_DIR")
    if directory:
        return directory
    return str(tmp_path_factory.mktemp("catalogs"))


@pytest.fixture(scope="session")
def catalog(catalog_dir):
    cache = {}

    def get(id):
        if id not in cache:
            cache[id] = ensure_catalog(id, catalog_dir)
        return cache[id]

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for cid, verdict, description, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{verdict:4}  {cid:4}  {description}: {detail}")
