import pytest

ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    """Remember one check for the acceptance summary (``ok=None`` is a skip)."""
    ACCEPTANCE.setdefault(criterion, []).append((ok, detail))


@pytest.fixture
def accept():
    return record


def _status(checks):
    flags = [ok for ok, _ in checks if ok is not None]
    if not flags:
        return "SKIP"
    return "PASS" if all(flags) else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        status = _status(checks)
        n_ok = sum(ok is True for ok, _ in checks)
        n = sum(ok is not None for ok, _ in checks)
        if status == "SKIP":
            detail = "; ".join(d for _, d in checks if d)
        elif status == "PASS":
            detail = f"{n_ok}/{n} checks"
        else:
            bad = "; ".join(d for ok, d in checks if ok is False)
            detail = f"{n_ok}/{n} checks, failing: {bad}"
        terminalreporter.write_line(f"{status}  {crit}  {detail}")
        if status != "SKIP" and terminalreporter.verbosity > 0:
            for ok, d in checks:
                terminalreporter.write_line(f"        {'ok ' if ok else 'BAD'} {d}")
