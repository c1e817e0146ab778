import numpy as np
import pytest

from pdpcd.solution import Solution
from pdpcd.toy import toy_instance

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(
            f"criterion {num} ({title}): {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def toy():
    return toy_instance()


# published schedule of the demonstration network: service starts per vehicle
PUBLISHED_STARTS = (
    {"o1": 360.0, 3: 429.8, 1: 442.0, "o2": 599.99,
     "o3": 643.99, 7: 913.0, 5: 823.0, "o4": 1123.99},
    {"o1": 360.0, 2: 544.5, 4: 595.0, "o2": 646.82,
     "o3": 743.77, 6: 852.0, 8: 1009.5, "o4": 1223.77},
)
PUBLISHED_ROUTES = (((3, 1), (7, 5)), ((2, 4), (6, 8)))


def published_solution(inst):
    """Routes and service starts as published; every request rides on one vehicle."""
    n = inst.n
    pr, dr, starts = [], [], []
    for (pick, drop), raw in zip(PUBLISHED_ROUTES, PUBLISHED_STARTS):
        pr.append([inst.o1, *pick, inst.o2])
        dr.append([inst.o3, *drop, inst.o4])
        starts.append({inst.vertex(k) if isinstance(k, str) else k: v for k, v in raw.items()})
    serve = {v: t for s in starts for v, t in s.items() if v <= 2 * n}
    ride = np.array([serve[n + i] - serve[i] for i in inst.pickups])
    tau = np.array([s[inst.o2] for s in starts])
    cost = sum(inst.c(a, b) for route in pr + dr for a, b in zip(route, route[1:]))
    return Solution(
        pickup_routes=pr, delivery_routes=dr, service_start=starts,
        unload=np.zeros((2, n), dtype=int), reload=np.zeros((2, n), dtype=int),
        unload_any=np.zeros(2, dtype=int), reload_any=np.zeros(2, dtype=int),
        unload_done=tau, reload_start=np.array([s[inst.o3] for s in starts]),
        unload_time=np.array([tau[0], tau[1], tau[0], tau[1]]), ride_time=ride, cost=cost)
