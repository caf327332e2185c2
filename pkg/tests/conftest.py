from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.fixture
def write_toml(tmp_path):
    def _write(text, name="run.toml"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """``acceptance(criterion, part, passed, detail)`` records one sub-check."""
    store = request.config.stash.setdefault(ACCEPTANCE, {})

    def _record(criterion, part, passed, detail=""):
        store.setdefault(criterion, []).append((part, bool(passed), detail))
        print(f"criterion {criterion} [{part}]: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(store):
        parts = store[crit]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name} {'ok' if good else 'FAILED'}: {d}" for name, good, d in parts)
        terminalreporter.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
