"""QAOA warm start: pre-optimize circuit angles on a problem subgraph.

The policy register is smaller than the problem, so the cost Hamiltonian is
built from the customers nearest the depot (the depot itself carries no
qubit).  Pairwise distances are normalized so the largest weight is exactly
1.0.  Angles are fit with Nelder-Mead, a derivative-free local search; the
recorded history keeps only accepted (strictly improving) costs, so it is
non-increasing by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .env import VrpInstance
from .sim import ZZHamiltonian, apply_cost_layer, apply_mixer_layer, expectation_zz, init_plus_state

MAX_ITERS = 150
PATIENCE = 10
MIN_IMPROVEMENT = 1e-6


@dataclass(frozen=True)
class Subgraph:
    selected_customers: list[int]   # instance indices, ascending
    pairwise_weights: np.ndarray    # (n_sub, n_sub) symmetric, max entry 1.0


@dataclass(frozen=True)
class WarmStartAngles:
    gammas: np.ndarray
    betas: np.ndarray
    final_cost: float
    iterations_used: int
    cost_history: list[float]


def build_subgraph(instance: VrpInstance, n_qubits: int) -> Subgraph:
    """Pick min(n_qubits, N) customers nearest the depot, ties by index."""
    if n_qubits < 1:
        raise ValueError("subgraph needs at least one qubit")
    if instance.n_customers < 1:
        raise ValueError("instance has no customers")
    n_sub = min(n_qubits, instance.n_customers)
    depot_dist = np.linalg.norm(instance.customers - instance.depot, axis=1)
    # stable sort keeps index order among exact ties
    chosen = sorted(np.argsort(depot_dist, kind="stable")[:n_sub].tolist())

    coords = instance.customers[chosen]
    diff = coords[:, None, :] - coords[None, :, :]
    weights = np.linalg.norm(diff, axis=2)
    w_max = weights.max()
    if w_max > 0.0:
        weights = weights / w_max
    return Subgraph(chosen, weights)


def build_cost_hamiltonian(subgraph: Subgraph, n_qubits: int | None = None) -> ZZHamiltonian:
    """One ZZ term per customer pair, weighted by normalized distance."""
    n_sub = len(subgraph.selected_customers)
    width = n_sub if n_qubits is None else n_qubits
    if width < n_sub:
        raise ValueError("register narrower than the subgraph")
    terms = [(i, j, float(subgraph.pairwise_weights[i, j]))
             for i in range(n_sub) for j in range(i + 1, n_sub)]
    return ZZHamiltonian(width, terms)


def qaoa_expectation(hamiltonian: ZZHamiltonian, gammas: np.ndarray, betas: np.ndarray) -> float:
    """<H_C> of the depth-p ansatz (cost layer then mixer, p times) on |+>^n."""
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if gammas.shape != betas.shape:
        raise ValueError("gamma and beta vectors must have equal length")
    state = init_plus_state(hamiltonian.n_qubits)
    for g, b in zip(gammas, betas):
        state = apply_cost_layer(state, hamiltonian, g)
        state = apply_mixer_layer(state, b)
    return expectation_zz(state, hamiltonian)


class _Stop(Exception):
    pass


def optimize_angles(hamiltonian: ZZHamiltonian, p: int, max_iters: int = MAX_ITERS,
                    seed: int = 0) -> WarmStartAngles:
    """Minimize the QAOA expectation from seeded-uniform initial angles.

    Iterations count objective evaluations.  Stops at the budget, or once the
    last 10 accepted steps each improved by less than 1e-6.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    rng = np.random.default_rng(seed)
    x0 = np.concatenate([rng.uniform(0.0, 2.0 * np.pi, p), rng.uniform(0.0, np.pi, p)])

    history: list[float] = []
    improvements: list[float] = []
    best_x = x0.copy()
    best = float("inf")
    nfev = 0

    def objective(x: np.ndarray) -> float:
        nonlocal best, best_x, nfev
        if nfev >= max_iters:
            raise _Stop
        nfev += 1
        cost = qaoa_expectation(hamiltonian, x[:p], x[p:])
        if cost < best:
            if np.isfinite(best):
                improvements.append(best - cost)
            best = cost
            best_x = x.copy()
            history.append(cost)
            if len(improvements) >= PATIENCE and max(improvements[-PATIENCE:]) < MIN_IMPROVEMENT:
                raise _Stop
        return cost

    try:
        objective(x0)
        if max_iters > 1:
            minimize(objective, x0, method="Nelder-Mead",
                     options={"maxfev": 10 * max_iters, "xatol": 1e-10, "fatol": 1e-12})
    except _Stop:
        pass
    return WarmStartAngles(best_x[:p].copy(), best_x[p:].copy(), best, nfev, history)


def export_warm_start(angles: WarmStartAngles, params):
    """Copy (gamma_l, beta_l) into the policy's QAOA slots, layer by layer."""
    n_layers = params.qaoa_angles.shape[0]
    if len(angles.gammas) != n_layers:
        raise ValueError(f"warm start has p={len(angles.gammas)} but the policy has "
                         f"{n_layers} layers")
    stacked = np.column_stack([angles.gammas, angles.betas])
    return replace(params, qaoa_angles=stacked)


def run_warmstart(instance: VrpInstance, n_qubits: int, p: int,
                  max_iters: int = MAX_ITERS, seed: int = 0) -> tuple[WarmStartAngles, Subgraph]:
    subgraph = build_subgraph(instance, n_qubits)
    hamiltonian = build_cost_hamiltonian(subgraph)
    return optimize_angles(hamiltonian, p, max_iters, seed), subgraph


def warmstart_to_json(angles: WarmStartAngles, subgraph: Subgraph, seed: int) -> dict:
    return {
        "p": len(angles.gammas),
        "gammas": [float(g) for g in angles.gammas],
        "betas": [float(b) for b in angles.betas],
        "final_cost": float(angles.final_cost),
        "cost_history": [float(c) for c in angles.cost_history],
        "seed": seed,
        "subgraph_indices": list(subgraph.selected_customers),
    }


def warmstart_from_json(data: dict) -> WarmStartAngles:
    return WarmStartAngles(
        gammas=np.array(data["gammas"], dtype=float),
        betas=np.array(data["betas"], dtype=float),
        final_cost=float(data["final_cost"]),
        iterations_used=len(data["cost_history"]),
        cost_history=[float(c) for c in data["cost_history"]],
    )


def save_warmstart(angles: WarmStartAngles, subgraph: Subgraph, seed: int, path: str | Path) -> None:
    Path(path).write_text(json.dumps(warmstart_to_json(angles, subgraph, seed), indent=2) + "\n")


def load_warmstart(path: str | Path) -> WarmStartAngles:
    return warmstart_from_json(json.loads(Path(path).read_text()))
