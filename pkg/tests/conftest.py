import itertools
import random

import numpy as np
import pytest


def brute_force_jeps(t, M):
    """Minimal JEPs of ``t`` vs ``M`` by enumerating every subset of ``t``.

    Independent of the miner: no edge family, no transversals, just the
    definitions (absent from every instance of M, no JEP strictly inside).
    """
    t = sorted(set(t))
    M = [set(s) for s in M]
    jeps = []
    for size in range(1, len(t) + 1):
        for combo in itertools.combinations(t, size):
            cand = set(combo)
            if any(cand <= s for s in M):
                continue
            if any(j < cand for j in jeps):
                continue
            jeps.append(cand)
    return {frozenset(j) for j in jeps}


def brute_force_min_length(t, M):
    jeps = brute_force_jeps(t, M)
    return min((len(j) for j in jeps), default=float("inf"))


def random_case(rng: random.Random, max_items=12, max_m=20, universe=16):
    t = set(rng.sample(range(universe), rng.randint(1, max_items)))
    M = []
    for _ in range(rng.randint(1, max_m)):
        keep = {i for i in t if rng.random() < rng.choice([0.5, 0.7, 0.9])}
        extra = set(rng.sample(range(universe, universe + 8), rng.randint(0, 3)))
        M.append(keep | extra)
    return t, M


@pytest.fixture
def worked_example():
    return {1, 2, 3, 4}, [{3, 4, 5, 6}, {2, 4, 7, 9}, {2, 3, 5, 8}]


def synthetic_rows(n_normal=60, n_anomaly=20, seed=7, difficulty=True):
    """NSL-KDD-shaped rows: 41 features, label, optional difficulty.

    Normal rows share a narrow profile, anomalies push several attributes
    to unusual values, which gives them short emerging patterns.
    """
    rng = np.random.default_rng(seed)
    rows = []
    protos = ["tcp", "udp", "icmp"]
    for i in range(n_normal + n_anomaly):
        anomaly = i >= n_normal
        cells = []
        for j in range(41):
            if j == 1:
                cells.append(protos[int(rng.integers(0, 2))] if not anomaly else "icmp")
            elif j == 2:
                cells.append(str(rng.choice(["http", "smtp", "ftp"])) if not anomaly else "private")
            elif j == 3:
                cells.append("SF" if not anomaly else str(rng.choice(["S0", "REJ"])))
            elif anomaly and j in (4, 22, 23, 31):
                cells.append(f"{float(rng.uniform(80, 100)):.2f}")
            else:
                cells.append(f"{float(rng.integers(0, 4) * 10):.2f}")
        cells.append("neptune" if anomaly else "normal")
        if difficulty:
            cells.append(str(int(rng.integers(10, 22))))
        rows.append(cells)
    order = rng.permutation(len(rows))
    return [rows[i] for i in order]


def write_csv(path, rows):
    path.write_text("\n".join(",".join(r) for r in rows) + "\n")
    return path


@pytest.fixture
def toy_files(tmp_path):
    train = write_csv(tmp_path / "train.csv", synthetic_rows(60, 20, seed=7))
    test = write_csv(tmp_path / "test.csv", synthetic_rows(25, 15, seed=11))
    return train, test


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
