import numpy as np
import pytest

from gfscma.codebook import load_codebook, make_codebook
from gfscma.config import SystemConfig
from gfscma.pattern import build_pattern
from gfscma.pilots import generate_zc_pilots


class System:
    """Config plus the pattern, codebook and pilots derived from it."""

    def __init__(self, config, codebook=None):
        self.config = config
        self.pattern = build_pattern(config)
        if codebook is None:
            codebook = make_codebook(self.pattern, config.M)
        self.codebook = codebook
        self.pilots = generate_zc_pilots(config, self.pattern)


@pytest.fixture(scope="session")
def default_system():
    cfg = SystemConfig()
    pattern = build_pattern(cfg)
    return System(cfg, load_codebook(None, pattern))


@pytest.fixture(scope="session")
def small_system():
    # one 12 x 6 base tile, three blocks: B*d_v = 6 = L
    return System(SystemConfig(B=3, N=6, K=12, N_s=16))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: ``(criterion, passed, detail)`` lines recorded by the acceptance tests.
ACCEPTANCE = []


def report(number, title, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
