"""Four-request demonstration network.

The original figure only shows rounded arc labels, so the travel-time matrix
is rebuilt from the published route totals: each route arc gets a length so
that the four routes sum to 99.813, 170.025, 369.310 and 462.086, and every
other entry is the shortest directed path over those arcs.  The closure keeps
the triangle inequality and makes each published route strictly cheaper than
its reversal.  Windows, demands, fleet and crossdock data are the published
values.
"""
import numpy as np

from .instance import make_instance

# (tail, head, length) over matrix indices, depot = 0
ROUTE_ARCS = (
    (0, 3, 50.0), (3, 1, 10.0), (1, 0, 39.813),       # 99.813
    (0, 2, 80.0), (2, 4, 45.0), (4, 0, 45.025),       # 170.025
    (0, 7, 150.0), (7, 5, 30.0), (5, 0, 189.31),      # 369.310
    (0, 6, 150.0), (6, 8, 160.0), (8, 0, 152.086),    # 462.086
)

WINDOWS = {1: (442, 562), 2: (455, 575), 3: (360, 471), 4: (475, 595),
           5: (823, 943), 6: (852, 972), 7: (793, 913), 8: (1007, 1127)}
DEMAND = (16, 10, 4, 4)

OPTIMAL_COST = 1101.234
ROUTE_TIMES = {"o1-3-1-o2": 99.813, "o1-2-4-o2": 170.025,
               "o3-7-5-o4": 369.310, "o3-6-8-o4": 462.086}


def toy_travel_times():
    size = 9
    dist = np.full((size, size), np.inf)
    np.fill_diagonal(dist, 0.0)
    for a, b, length in ROUTE_ARCS:
        dist[a, b] = length
    for k in range(size):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def toy_instance():
    pickups = [(None, None, DEMAND[i - 1], *WINDOWS[i]) for i in range(1, 5)]
    deliveries = [(None, None, *WINDOWS[i]) for i in range(5, 9)]
    return make_instance(
        "toy", (None, None), pickups, deliveries,
        vehicles=[(20, 480), (20, 480)], depot_window=(360, 1320),
        fixed_time=10, per_unit_time=1, max_ride_time=550,
        travel_time_matrix=toy_travel_times())
