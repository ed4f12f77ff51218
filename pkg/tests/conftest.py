import os

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "awgn: opt-in AWGN runs (set ISI_SCLDPC_AWGN=1)")


@pytest.fixture
def acceptance():
    """record(n, ok, detail) stores the verdict printed in the terminal summary."""

    def record(n: int, ok: bool | None, detail: str):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        _RESULTS[n] = (status, detail)
        print(f"criterion {n}: {status}  {detail}")

    return record


@pytest.fixture(scope="session")
def awgn_enabled() -> bool:
    return os.environ.get("ISI_SCLDPC_AWGN", "") not in ("", "0")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_RESULTS):
        status, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
