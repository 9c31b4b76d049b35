"""Classical route solvers: exact brute force, nearest neighbor, random.

Brute force enumerates every customer permutation and every split of that
permutation into consecutive per-vehicle segments, which covers all
assignments of ordered routes to identical vehicles.  It is the normalization
denominator for small instances; nearest neighbor takes over past 9 customers.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .env import VrpInstance, reset, route_cost, select_vehicle, step, valid_action_mask

BRUTE_FORCE_LIMIT = 9


def _distances(instance: VrpInstance) -> tuple[list[float], list[list[float]]]:
    diff = instance.customers - instance.depot
    d0 = np.linalg.norm(diff, axis=1).tolist()
    pair = instance.customers[:, None, :] - instance.customers[None, :, :]
    dmat = np.linalg.norm(pair, axis=2).tolist()
    return d0, dmat


def brute_force_optimal(instance: VrpInstance) -> tuple[dict[int, list[int]], float]:
    """Exact optimum by exhaustive search; refuses more than 9 customers."""
    n, k = instance.n_customers, instance.n_vehicles
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is capped at {BRUTE_FORCE_LIMIT} customers, got {n}")
    d0, dmat = _distances(instance)

    best_cost = float("inf")
    best_perm: tuple[int, ...] = ()
    best_splits: tuple[int, ...] = ()
    for perm in permutations(range(n)):
        # seg_cost[i][j]: closed-tour cost of serving perm[i:j] with one vehicle.
        pref = [0.0]
        for a, b in zip(perm, perm[1:]):
            pref.append(pref[-1] + dmat[a][b])
        # DP over vehicles: cost of covering the first j cities with <= m routes.
        prev = [0.0] + [float("inf")] * n
        for _ in range(k):
            cur = [0.0] + [float("inf")] * n
            for j in range(1, n + 1):
                lo = cur[j]
                for i in range(j):
                    if prev[i] == float("inf"):
                        continue
                    c = prev[i] + d0[perm[i]] + (pref[j - 1] - pref[i]) + d0[perm[j - 1]]
                    if c < lo:
                        lo = c
                cur[j] = min(lo, prev[j])
            prev = cur
        if prev[n] < best_cost:
            best_cost = prev[n]
            best_perm = perm

    # Recover the split points for the winning permutation.
    best_routes = _split_routes(best_perm, k, d0, dmat)
    return best_routes, float(best_cost)


def _split_routes(perm: tuple[int, ...], k: int, d0, dmat) -> dict[int, list[int]]:
    n = len(perm)
    pref = [0.0]
    for a, b in zip(perm, perm[1:]):
        pref.append(pref[-1] + dmat[a][b])

    def seg(i: int, j: int) -> float:
        return d0[perm[i]] + (pref[j - 1] - pref[i]) + d0[perm[j - 1]]

    INF = float("inf")
    cost = [[INF] * (n + 1) for _ in range(k + 1)]
    choice = [[0] * (n + 1) for _ in range(k + 1)]
    cost[0][0] = 0.0
    for m in range(1, k + 1):
        cost[m][0] = 0.0
        for j in range(1, n + 1):
            for i in range(j + 1):
                c = cost[m - 1][i] + (seg(i, j) if i < j else 0.0)
                if c < cost[m][j] - 1e-15:
                    cost[m][j] = c
                    choice[m][j] = i
    routes: dict[int, list[int]] = {}
    j = n
    for m in range(k, 0, -1):
        i = choice[m][j]
        routes[m - 1] = list(perm[i:j])
        j = i
    return routes


def nearest_neighbor(instance: VrpInstance) -> tuple[dict[int, list[int]], float]:
    """Greedy construction; vehicles take turns claiming their nearest
    unvisited customer, ties broken toward the lowest customer index."""
    n, k = instance.n_customers, instance.n_vehicles
    positions = [instance.depot.copy() for _ in range(k)]
    visited = [False] * n
    routes: dict[int, list[int]] = {v: [] for v in range(k)}
    for turn in range(n):
        v = turn % k
        best, best_d = -1, float("inf")
        for c in range(n):
            if visited[c]:
                continue
            d = float(np.linalg.norm(positions[v] - instance.customers[c]))
            if d < best_d:
                best, best_d = c, d
        routes[v].append(best)
        positions[v] = instance.customers[best]
        visited[best] = True
    return routes, route_cost(instance, routes)


def random_policy_rollout(instance: VrpInstance, seed: int,
                          rule: str = "nearest") -> tuple[dict[int, list[int]], float]:
    """Uniformly random valid actions through the environment."""
    rng = np.random.default_rng(seed)
    state = reset(instance)
    routes: dict[int, list[int]] = {v: [] for v in range(instance.n_vehicles)}
    total = 0.0
    while not state.done:
        valid = np.flatnonzero(valid_action_mask(state))
        action = int(rng.choice(valid))
        routes[select_vehicle(state, instance, action, rule)].append(action)
        outcome = step(instance, state, action, rule)
        total += outcome.reward
        state = outcome.state
    return routes, -total


def oracle_cost(instance: VrpInstance) -> float:
    """Normalization denominator: exact optimum when feasible, else greedy."""
    if instance.n_customers <= BRUTE_FORCE_LIMIT:
        return brute_force_optimal(instance)[1]
    return nearest_neighbor(instance)[1]
