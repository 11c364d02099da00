import numpy as np
import pytest
from hypothesis import settings

from utiliconf.distributions import Discrete
from utiliconf.harness import benchmark_family
from utiliconf.utility import LogLaplace, Uniform

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ll():
    return LogLaplace(60.0, 1.0)


@pytest.fixture(scope="session")
def unif():
    return Uniform(60.0)


@pytest.fixture(scope="session")
def family():
    return benchmark_family()


@pytest.fixture
def two_point():
    return Discrete([(10.0, 0.5), (100.0, 0.5)])


def random_discrete(rng: np.random.Generator, max_atoms: int = 6, t_max: float = 200.0) -> Discrete:
    k = int(rng.integers(1, max_atoms + 1))
    times = np.unique(np.round(rng.uniform(0.5, t_max, size=k), 3))
    probs = rng.dirichlet(np.ones(len(times)))
    return Discrete(list(zip(times.tolist(), probs.tolist())))


# acceptance criteria: tests tagged @pytest.mark.criterion(n, title) are
# folded into one PASS/FAIL line per criterion at the end of the session
_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "notes": []})
    entry["ok"] = entry["ok"] and rep.passed
    entry["notes"] += [str(v) for k, v in item.user_properties if k == "detail" and str(v) not in entry["notes"]]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_criteria):
        c = _criteria[number]
        line = f"criterion {number:2d}: {'PASS' if c['ok'] else 'FAIL'}  {c['title']}"
        if c["notes"]:
            line += "  [" + "; ".join(c["notes"]) + "]"
        terminalreporter.write_line(line)
