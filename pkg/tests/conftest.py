import numpy as np
import pytest

from pdfts.txchain import WaveformConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def small_cfg(m=8, n_i=3, s=0, n_null=None, n_fft=32, **kw):
    """Punctured config on a short grid, for noiseless structural tests."""
    n_p = m // (n_i + 1)
    exact = m - (n_p if n_null is None else n_null) <= n_p
    return WaveformConfig(
        n_fft=n_fft, m_alloc=m, n_interval=n_i, offset=s, n_null=n_null, cp_len=4,
        subcarrier_start=(n_fft - m) // 3, exact_alpha=kw.pop("exact_alpha", exact), **kw
    )


def valid_triples(ms=(8, 24, 48), offsets=None):
    out = []
    for m in ms:
        for ni in range(1, m):
            if m % (ni + 1):
                continue
            for s in sorted({0, 1, ni} if offsets is None else set(offsets(ni))):
                out.append((m, ni, s))
    return out


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# --- acceptance reporting -------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and short title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "passed": 0, "failed": 0, "notes": []})
    entry["passed" if rep.passed else "failed"] += 1
    entry["notes"] += [f"{item.callspec.id if hasattr(item, 'callspec') else item.name}: {v}"
                       for k, v in item.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["failed"] == 0 else "FAIL"
        tr.write_line(f"criterion {n}: {status}  {e['title']}  ({e['passed']} passed, {e['failed']} failed)")
        for note in e["notes"]:
            tr.write_line(f"    {note}")
