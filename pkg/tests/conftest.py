import random

import pytest

ACCEPTANCE_LINES = []


def random_scored(rng: random.Random, max_distinct: int = 8, max_n: int = 20):
    """Random (score, label) pairs with at most ``max_distinct`` distinct scores."""
    k = rng.randint(1, max_distinct)
    grid = sorted(rng.sample(range(-50, 50), k))
    n = rng.randint(1, max_n)
    bias = rng.random()
    return [(float(rng.choice(grid)), int(rng.random() < bias)) for _ in range(n)]


@pytest.fixture
def record_criterion():
    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
