import random

import pytest

from leafelect.trees import random_tree


def sample_trees(count, n_min, n_max, seed):
    rng = random.Random(seed)
    return [random_tree(rng.randint(n_min, n_max), rng.randrange(2**32)) for _ in range(count)]


@pytest.fixture(scope="session")
def small_trees():
    return sample_trees(100, 1, 9, seed=20240611)


def z_score(p_hat, p, trials):
    se = (p * (1 - p) / trials) ** 0.5
    if se == 0:
        return 0.0 if p_hat == p else float("inf")
    return (p_hat - p) / se


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {detail}")
