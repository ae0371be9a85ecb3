import pytest

from visvol import fixtures
from visvol.kernels import available
from visvol.raycast import build_bvh


@pytest.fixture(params=sorted(available()))
def impl(request):
    """Every importable kernel backend."""
    return available()[request.param]


@pytest.fixture(scope="session")
def two_buildings_bvh():
    return build_bvh(fixtures.two_buildings_scene())


@pytest.fixture(scope="session")
def pillar_bvh():
    return build_bvh(fixtures.pillar_scene())


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
