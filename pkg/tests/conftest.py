import os
import time

import matplotlib
import pytest
from hypothesis import settings

matplotlib.use("Agg")

settings.register_profile("repro", derandomize=True, deadline=None, database=None)
settings.register_profile("explore", deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repro"))


@pytest.fixture(scope="session")
def scenarios():
    from stochext.scenario import bundled_scenarios, load_scenario
    return {name: load_scenario(name) for name in bundled_scenarios()}


class TraceCache:
    """Traces of bundled scenarios, optionally shifted or on a refined grid, computed once."""

    def __init__(self, scenarios):
        self.scenarios = scenarios
        self._store = {}

    def process(self, name, shift=0.0):
        from stochext import expr as ex
        pr = self.scenarios[name].process
        if shift == 0.0:
            return pr
        return ex.ProcessSpec(ex.add(pr.expr, ex.Const(shift)), pr.interval, pr.omega_dim)

    def get(self, name, refine=1, shift=0.0):
        """The trace, or the NumericalError it raised."""
        from stochext.errors import NumericalError
        from stochext.extremum import trace_curve
        key = (name, refine, shift)
        if key not in self._store:
            sc = self.scenarios[name]
            t0 = time.perf_counter()
            try:
                value = trace_curve(self.process(name, shift), sc.model, sc.bump.with_normalized(),
                                    sc.k_max, sc.plan, sc.k_grid(), lambda_refine=refine)
            except NumericalError as exc:
                value = exc
            self._store[key] = (value, time.perf_counter() - t0)
        return self._store[key][0]

    def seconds(self, name, refine=1, shift=0.0):
        self.get(name, refine, shift)
        return self._store[(name, refine, shift)][1]


@pytest.fixture(scope="session")
def traces(scenarios):
    return TraceCache(scenarios)


# one PASS/FAIL line per acceptance criterion, printed after the run
_CRITERIA = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props or not (report.when == "call" or report.failed):
        return
    status = "PASS" if report.passed else "FAIL"
    _CRITERIA.append(f"{status} {props['criterion']}: {props.get('detail', 'no detail recorded')}")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
