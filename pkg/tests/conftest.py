import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number:>2} {status}  {name}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)


def random_cloud(seed, n, d, scale=1.0):
    return scale * np.random.default_rng(seed).normal(size=(n, d))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def central_diff(f, x, y, h=1e-5):
    """Central finite-difference gradient of scalar f(x, y) w.r.t. both arrays."""
    out = []
    for which in (0, 1):
        base = (x, y)[which]
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            args = [x.copy(), y.copy()]
            args[which][idx] += h
            fp = f(*args)
            args[which][idx] -= 2 * h
            fm = f(*args)
            g[idx] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def max_rel_err(analytic, numeric, floor=1e-6):
    """Largest elementwise |a - n| / max(|a|, |n|, floor).

    The floor keeps exactly-zero entries from dividing central-difference
    round-off (about eps * |f| / h ~ 1e-11 at h = 1e-5) by zero.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


BENCH_SEEDS = tuple(range(10))


@pytest.fixture(scope="session")
def benchmark_runs():
    """Final metrics of the standard benchmark for c = 0 and c = 0.5, seeds 0..9."""
    import time

    from toma.trainer import run_benchmark

    t0 = time.perf_counter()
    runs = {c: run_benchmark(c=c, variant="toma", seeds=BENCH_SEEDS, steps=300) for c in (0.0, 0.5)}
    runs["seconds"] = time.perf_counter() - t0
    return runs
