import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from molhier import parse_smiles  # noqa: E402


@pytest.fixture(scope="session")
def oracle():
    data = json.loads((HERE / "fixtures" / "rdkit_oracle.json").read_text())
    return data["molecules"]


@pytest.fixture(scope="session")
def oracle_mols(oracle):
    return [(rec, parse_smiles(rec["smiles"])) for rec in oracle]


@pytest.fixture(scope="session")
def random_mols():
    from molgen import random_corpus

    return [parse_smiles(s) for s in random_corpus(7, 1000)]


# One summary line per acceptance criterion, collected from tests marked
# ``@pytest.mark.criterion(n, title)``.
_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, [title, True, []])
    if report.failed:
        entry[1] = False
        entry[2].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, failed = _criteria[number]
        status = "PASS" if ok else "FAIL"
        extra = f"  ({', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}{extra}")
