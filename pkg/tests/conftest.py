from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from toricnet import load_network, parse_network
from toricnet.netmodel import graph_from_dict

NETWORKS = Path(__file__).resolve().parents[1] / "networks"

ACCEPTANCE_LINES: list[str] = []


def net(name: str):
    return load_network(NETWORKS / name)


@pytest.fixture(scope="session")
def segre():
    return net("segre.crn")


@pytest.fixture(scope="session")
def ab():
    return net("ab.crn")


@pytest.fixture(scope="session")
def cycle3():
    return net("3cycle.crn")


@pytest.fixture(scope="session")
def mixed():
    return net("mixed.crn")


@pytest.fixture(scope="session")
def irrev():
    return net("irrev.crn")


def segre_member_rates(rng, size=None):
    k12, k21, k34 = rng.uniform(0.2, 5.0, (3,) if size is None else (size, 3)).T
    return np.stack([k12, k21, k34, k34 * k21 / k12], axis=-1)


def random_strongly_connected(rng, sizes, n_species=3, extra=0.4):
    """Random weakly reversible graph: one component per entry of ``sizes``.

    Each component gets a random Hamiltonian cycle plus random chords; vertex
    coordinates are distinct random integer vectors.
    """
    total = sum(sizes)
    coords = set()
    while len(coords) < total:
        coords.add(tuple(int(c) for c in rng.integers(0, 4, n_species)))
    coords = list(coords)
    rng.shuffle(coords)
    vertices = [{"label": f"v{i}", "exponents": list(map(float, c))} for i, c in enumerate(coords)]
    edges = []
    start = 0
    for size in sizes:
        comp = list(range(start, start + size))
        order = list(rng.permutation(comp))
        pairs = {(order[i], order[(i + 1) % size]) for i in range(size)} if size > 1 else set()
        for a in comp:
            for b in comp:
                if a != b and rng.random() < extra:
                    pairs.add((a, b))
        edges.extend(sorted((int(a), int(b)) for a, b in pairs))
        start += size
    data = {
        "species": [f"S{i}" for i in range(n_species)],
        "vertices": vertices,
        "edges": [{"src": a, "dst": b, "index": i} for i, (a, b) in enumerate(edges)],
    }
    return graph_from_dict(data)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


__all__ = ["net", "parse_network", "segre_member_rates", "random_strongly_connected"]


_SESSION_START = []
SUITE_BUDGET_S = 60.0


def pytest_sessionstart(session):
    import time

    _SESSION_START.append(time.perf_counter())


def pytest_sessionfinish(session, exitstatus):
    import time

    if not _SESSION_START or not ACCEPTANCE_LINES:
        return
    elapsed = time.perf_counter() - _SESSION_START[0]
    ok = elapsed < SUITE_BUDGET_S
    ACCEPTANCE_LINES.append(
        f"[{'PASS' if ok else 'FAIL'}] AC7 suite runtime: {elapsed:.1f}s < {SUITE_BUDGET_S:.0f}s"
    )
    if not ok and session.exitstatus == 0:
        session.exitstatus = 1
