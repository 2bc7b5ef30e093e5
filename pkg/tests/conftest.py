import numpy as np
import pytest

from theragan import simdata

# Corpora are expensive enough to share; session scope keeps the suite quick.


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Two simple activities, one complex, one sensor, three subjects."""
    spec = simdata.CorpusSpec(
        sensors=["left_wrist"],
        simple_activities={"raise": "arm_raise", "twist": "wrist_twist"},
        complex_activities={"combo": ["raise", "twist"]},
        subjects=["s1", "s2", "s3"],
        samples_per_subject=2,
        noise_sigma=0.005,
    )
    path = tmp_path_factory.mktemp("corpus") / "small"
    return simdata.synth_corpus(spec, path, 42)


@pytest.fixture(scope="session")
def eval_corpus(tmp_path_factory):
    """Two complex classes over three simple activities; enough frames to window."""
    spec = simdata.CorpusSpec(
        sensors=["left_wrist"],
        simple_activities={"raise": "arm_raise", "twist": "wrist_twist",
                           "bend": "knee_bend"},
        complex_activities={"combo_a": ["raise", "twist", "raise"],
                            "combo_b": ["bend", "twist", "bend"]},
        subjects=["s1", "s2", "s3", "s4"],
        samples_per_subject=3,
        noise_sigma=0.01,
    )
    path = tmp_path_factory.mktemp("corpus") / "eval"
    return simdata.synth_corpus(spec, path, 7)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------------------
# acceptance summary: one visible line per criterion at the end of the run

_ACCEPTANCE_RESULTS: dict[tuple[int, str], str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(num, slug): marks a top-level acceptance check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num, slug = marker.args
    _ACCEPTANCE_RESULTS[(int(num), slug)] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, slug in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[(num, slug)]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{slug}]: {status}")
