from __future__ import annotations

import ipaddress
import socket
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SUITE_LIMIT_S = 300.0
_acceptance: dict[int, dict] = {}
_started = time.perf_counter()


@pytest.fixture(autouse=True, scope="session")
def offline():
    """Fail any attempt to reach a non-loopback address; only the local mock server is allowed."""
    original = socket.socket.connect

    def guarded(self, address):
        if self.family in (socket.AF_INET, socket.AF_INET6):
            host = address[0]
            try:
                loopback = host == "localhost" or ipaddress.ip_address(host).is_loopback
            except ValueError:
                loopback = False
            if not loopback:
                raise OSError(f"network access blocked in tests: {host}")
        return original(self, address)

    socket.socket.connect = guarded
    yield
    socket.socket.connect = original


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _acceptance.setdefault(number, {"title": title, "ok": True, "ran": False})
    if call.when == "call":
        entry["ran"] = True
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    elapsed = time.perf_counter() - _started
    if 10 in _acceptance:
        entry = _acceptance[10]
        entry["ok"] = entry["ok"] and elapsed < SUITE_LIMIT_S
        entry["title"] += f" [session {elapsed:.1f} s]"
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        entry = _acceptance[number]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"AC{number:<3d}{status}  {entry['title']}")
