import warnings

import numpy as np
import pytest

from mfgs_lha.bath import BathContext, SpectralDensity, SpectralKind


def drude_ctx(gamma, beta=2.0, omega_c=5.0, mass=1.0, n_terms=100_000, **kw):
    return BathContext(beta, SpectralDensity(SpectralKind.DRUDE_LORENTZ, gamma, omega_c, mass), n_terms, **kw)


def exp_ctx(gamma, beta=2.0, omega_c=5.0, mass=1.0, n_terms=100_000, **kw):
    return BathContext(beta, SpectralDensity(SpectralKind.EXPONENTIAL, gamma, omega_c, mass), n_terms, **kw)


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


SESSION = {"start": None, "bad": [], "others": 0}


def pytest_collection_modifyitems(items):
    # acceptance last, so the property-suite check sees every other result
    items.sort(key=lambda it: "test_acceptance" in it.nodeid)
    SESSION["others"] = sum("test_acceptance" not in it.nodeid for it in items)


def pytest_sessionstart(session):
    import time

    SESSION["start"] = time.perf_counter()


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid:
        return
    if report.failed:
        SESSION["bad"].append(report.nodeid)
    if report.when == "call":
        SESSION.setdefault("done", 0)
        SESSION["done"] += 1
    elif report.when == "setup" and report.skipped:
        SESSION.setdefault("done", 0)
        SESSION["done"] += 1


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: (int(k.split("[")[0].rstrip("abc")), k)):
        tr.write_line(mod.RESULTS[key])
