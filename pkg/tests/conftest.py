import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from itmstab import harness  # noqa: E402
from itmstab.terrain import synth_grid  # noqa: E402

DESK = dict(
    n_links=50,
    frequencies=(900.0, 2400.0, 5280.0),
    climates=(4, 5),
    grounds=("average", "good"),
    precisions=(11, 24, 53, 64, 128, 256, 512, 1024),
    seed=1,
)
DESK_TERRAIN = {"min": 1562.15, "max": 2550.28}
DESK_TERRAIN_SEED = 1


class DeskSweep:
    def __init__(self):
        self.config = harness.SweepConfig(**DESK)
        self.grid = synth_grid("random_hills", DESK_TERRAIN, DESK_TERRAIN_SEED)
        c = self.config
        self.links = harness.gen_links(c.seed, c.n_links, c.bbox, c.height_range, c.min_link_distance)
        self.cases = harness.build_cases(self.links, c)

    def run(self, workers=1, keep_traces=False):
        return harness.run_sweep(self.cases, self.config.precisions, self.grid, self.config,
                                 workers=workers, keep_traces=keep_traces)


@pytest.fixture(scope="session")
def desk():
    return DeskSweep()


@pytest.fixture(scope="session")
def desk_records(desk):
    return desk.run(workers=1, keep_traces=True)


# one line per acceptance criterion at the end of the run

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_results: dict = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    ok = _results.get(n, True)
    if report.failed or (report.when == "call" and report.skipped):
        ok = False
    _results[n] = ok


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if _results[n] else 'FAIL'}")
