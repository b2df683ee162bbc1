import time

import pytest

from carfir.evaluation import SynthSpec, fit_sugeno, make_benchmark

BENCH_SEED = 0

# acceptance results collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def benchmark():
    start = time.perf_counter()
    bench = make_benchmark(SynthSpec(seed=BENCH_SEED))
    srb = fit_sugeno(bench.prb)
    return bench, srb, time.perf_counter() - start


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
