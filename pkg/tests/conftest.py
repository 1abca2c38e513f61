import warnings
from collections import defaultdict

import pytest

_RESULTS: dict[int, list[tuple[bool, str]]] = defaultdict(list)


class Recorder:
    def __call__(self, criterion: int, passed: bool, detail: str) -> None:
        _RESULTS[criterion].append((bool(passed), detail))


@pytest.fixture(scope="session")
def record():
    return Recorder()


def pytest_configure(config):
    warnings.filterwarnings("ignore", message=".*dimension condition.*")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        parts = _RESULTS[crit]
        ok = all(p for p, _ in parts)
        failed = [d for p, d in parts if not p]
        detail = "; ".join(failed) if failed else "; ".join(d for _, d in parts[:3])
        if len(parts) > 3 and not failed:
            detail += f"; ... ({len(parts)} checks)"
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
