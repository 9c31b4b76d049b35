"""Dense statevector simulator for small QAOA-style circuits.

Conventions: qubit q maps to bit q of the amplitude index (qubit 0 is the
least significant bit).  All rotations use the half-angle form

    RX(t) = exp(-i t X / 2),   RY, RZ likewise,   RZZ(t) = exp(-i t Z@Z / 2),

so a cost layer applies RZZ(2*gamma*w) per weighted ZZ term and a mixer
layer applies RX(2*beta) per qubit.  Every generator squares to the
identity, which keeps the pi/2 parameter-shift rule exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_QUBITS = 20
GATE_KINDS = ("H", "RX", "RY", "RZ", "CNOT", "RZZ")
_PARAMETRIC = ("RX", "RY", "RZ", "RZZ")

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)


@dataclass(frozen=True)
class StateVector:
    """Immutable wrapper around a normalized complex amplitude vector."""

    n_qubits: int
    amplitudes: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class GateOp:
    """One gate: fixed angle, or a slot index into a parameter vector."""

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    slot: int | None = None


@dataclass
class ZZHamiltonian:
    """Weighted sum of two-body ZZ terms, sum_k w_k Z_i Z_j with i < j."""

    n_qubits: int
    terms: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for i, j, w in self.terms:
            if not (0 <= i < j < self.n_qubits):
                raise ValueError(f"bad ZZ term ({i}, {j}) for {self.n_qubits} qubits")
            if not (0.0 <= w <= 1.0):
                raise ValueError(f"term weight {w} outside [0, 1]")


def init_plus_state(n_qubits: int) -> StateVector:
    """Uniform superposition |+>^n, every amplitude 2^(-n/2)."""
    _check_width(n_qubits)
    amps = np.full(2**n_qubits, 2.0 ** (-n_qubits / 2.0), dtype=np.complex128)
    return StateVector(n_qubits, amps)


def basis_state(n_qubits: int, index: int = 0) -> StateVector:
    _check_width(n_qubits)
    if not 0 <= index < 2**n_qubits:
        raise ValueError(f"basis index {index} out of range")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(n_qubits, amps)


def _check_width(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_normalized(amps: np.ndarray) -> None:
    norm = np.sum(np.abs(amps) ** 2)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"state is not normalized (|psi|^2 = {norm})")


def _rotation_matrix(kind: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]])
    if kind == "RZ":
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])
    raise ValueError(f"unsupported rotation kind {kind!r}")


def _apply_1q(amps: np.ndarray, mat: np.ndarray, q: int, n: int) -> None:
    # In-place: expose bit q as its own axis (stride 2^q) and mix the halves.
    view = amps.reshape(-1, 2, 2**q)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = mat[0, 0] * a0 + mat[0, 1] * a1
    view[:, 1, :] = mat[1, 0] * a0 + mat[1, 1] * a1


@lru_cache(maxsize=256)
def _pair_parity(n: int, i: int, j: int) -> np.ndarray:
    idx = np.arange(2**n)
    parity = ((idx >> i) ^ (idx >> j)) & 1
    parity.setflags(write=False)
    return parity


def _apply_rzz(amps: np.ndarray, angle: float, i: int, j: int, n: int) -> None:
    parity = _pair_parity(n, i, j)
    phase_same = np.exp(-0.5j * angle)
    amps *= np.where(parity, np.conj(phase_same), phase_same)


def _apply_cnot(amps: np.ndarray, control: int, target: int, n: int) -> None:
    idx = np.arange(2**n)
    sel = (idx >> control) & 1 == 1
    flipped = idx[sel] ^ (1 << target)
    amps[idx[sel]], amps[flipped] = amps[flipped].copy(), amps[idx[sel]].copy()


def _apply_kind(amps: np.ndarray, kind: str, targets: tuple[int, ...], angle: float | None, n: int) -> None:
    if kind in ("RX", "RY", "RZ"):
        _apply_1q(amps, _rotation_matrix(kind, angle), targets[0], n)
    elif kind == "H":
        _apply_1q(amps, _H, targets[0], n)
    elif kind == "RZZ":
        _apply_rzz(amps, angle, targets[0], targets[1], n)
    elif kind == "CNOT":
        _apply_cnot(amps, targets[0], targets[1], n)
    else:
        raise ValueError(f"unsupported gate kind {kind!r}")


def _check_gate(gate: GateOp, n: int) -> None:
    if gate.kind not in GATE_KINDS:
        raise ValueError(f"unsupported gate kind {gate.kind!r}")
    arity = 2 if gate.kind in ("CNOT", "RZZ") else 1
    if len(gate.targets) != arity:
        raise ValueError(f"{gate.kind} expects {arity} target(s), got {gate.targets}")
    for q in gate.targets:
        if not 0 <= q < n:
            raise ValueError(f"target qubit {q} out of range for {n} qubits")
    if len(set(gate.targets)) != len(gate.targets):
        raise ValueError(f"duplicate targets in {gate.targets}")
    if gate.kind in _PARAMETRIC:
        if gate.angle is None and gate.slot is None:
            raise ValueError(f"{gate.kind} needs an angle or a parameter slot")
    elif gate.slot is not None:
        raise ValueError(f"{gate.kind} cannot carry a parameter slot")


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply one gate and return the evolved state (input left untouched)."""
    _check_gate(gate, state.n_qubits)
    if gate.slot is not None and gate.angle is None:
        raise ValueError("gate has an unbound parameter slot; use run_circuit with params")
    _check_normalized(state.amplitudes)
    amps = state.amplitudes.copy()
    _apply_kind(amps, gate.kind, gate.targets, gate.angle, state.n_qubits)
    return StateVector(state.n_qubits, amps)


def run_circuit(state: StateVector, circuit: Sequence[GateOp], params: np.ndarray | None = None) -> StateVector:
    """Apply a gate list in order, resolving parameter slots from params."""
    _check_normalized(state.amplitudes)
    n = state.n_qubits
    amps = state.amplitudes.copy()
    for gate in circuit:
        _check_gate(gate, n)
        angle = gate.angle
        if gate.slot is not None:
            if params is None:
                raise ValueError("circuit has parameter slots but no params were given")
            angle = float(params[gate.slot])
        _apply_kind(amps, gate.kind, gate.targets, angle, n)
    return StateVector(n, amps)


def apply_cost_layer(state: StateVector, hamiltonian: ZZHamiltonian, gamma: float) -> StateVector:
    """exp(-i gamma H_C) for H_C = sum w Z_i Z_j, i.e. RZZ(2*gamma*w) per term."""
    if hamiltonian.n_qubits != state.n_qubits:
        raise ValueError("hamiltonian width does not match the state")
    amps = state.amplitudes.copy()
    for i, j, w in hamiltonian.terms:
        _apply_rzz(amps, 2.0 * gamma * w, i, j, state.n_qubits)
    return StateVector(state.n_qubits, amps)


def apply_mixer_layer(state: StateVector, beta: float) -> StateVector:
    """exp(-i beta H_B) for H_B = sum X_q, i.e. RX(2*beta) on every qubit."""
    amps = state.amplitudes.copy()
    mat = _rotation_matrix("RX", 2.0 * beta)
    for q in range(state.n_qubits):
        _apply_1q(amps, mat, q, state.n_qubits)
    return StateVector(state.n_qubits, amps)


@lru_cache(maxsize=64)
def _z_sign_matrix(n: int) -> np.ndarray:
    """(2^n, n) matrix of Z eigenvalue signs, column q for qubit q."""
    idx = np.arange(2**n)
    signs = np.column_stack([1.0 - 2.0 * ((idx >> q) & 1) for q in range(n)])
    signs.setflags(write=False)
    return signs


def _z_signs(n: int, q: int) -> np.ndarray:
    return _z_sign_matrix(n)[:, q]


def expectation_z(state: StateVector, qubit: int, shots: int | None = None,
                  rng: np.random.Generator | None = None) -> float:
    """<Z_q>, analytic by default; with shots, a sampled estimate."""
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range")
    probs = _measure_probs(state, shots, rng)
    return float(np.dot(_z_signs(state.n_qubits, qubit), probs))


def expectation_zz(state: StateVector, hamiltonian: ZZHamiltonian, shots: int | None = None,
                   rng: np.random.Generator | None = None) -> float:
    """<H_C> = sum_k w_k <Z_i Z_j>."""
    if hamiltonian.n_qubits != state.n_qubits:
        raise ValueError("hamiltonian width does not match the state")
    probs = _measure_probs(state, shots, rng)
    total = 0.0
    for i, j, w in hamiltonian.terms:
        signs = 1.0 - 2.0 * _pair_parity(state.n_qubits, i, j)
        total += w * np.dot(signs, probs)
    return float(total)


def all_z_expectations(state: StateVector) -> np.ndarray:
    """<Z_q> for every qubit, analytic."""
    return state.probabilities() @ _z_sign_matrix(state.n_qubits)


def _measure_probs(state: StateVector, shots: int | None, rng: np.random.Generator | None) -> np.ndarray:
    probs = state.probabilities()
    if shots is None:
        return probs
    if shots <= 0:
        raise ValueError("shots must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    counts = rng.multinomial(shots, probs / probs.sum())
    return counts / shots


def _validate_slots(circuit: Sequence[GateOp], params: np.ndarray) -> None:
    slots = [g.slot for g in circuit if g.slot is not None]
    if not slots:
        raise ValueError("circuit has no parameter slots")
    if sorted(slots) != list(range(len(slots))):
        raise ValueError("parameter slots must be 0..P-1, each used exactly once")
    if len(params) != len(slots):
        raise ValueError(f"expected {len(slots)} params, got {len(params)}")


def _apply_1q_batch(batch: np.ndarray, mat: np.ndarray, q: int) -> None:
    view = batch.reshape(batch.shape[0], -1, 2, 2**q)
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :]
    view[:, :, 0, :] = mat[0, 0] * a0 + mat[0, 1] * a1
    view[:, :, 1, :] = mat[1, 0] * a0 + mat[1, 1] * a1


def _apply_kind_batch(batch: np.ndarray, kind: str, targets: tuple[int, ...],
                      angle: float | None, n: int) -> None:
    if kind in ("RX", "RY", "RZ"):
        _apply_1q_batch(batch, _rotation_matrix(kind, angle), targets[0])
    elif kind == "H":
        _apply_1q_batch(batch, _H, targets[0])
    elif kind == "RZZ":
        parity = _pair_parity(n, targets[0], targets[1])
        phase_same = np.exp(-0.5j * angle)
        batch *= np.where(parity, np.conj(phase_same), phase_same)
    elif kind == "CNOT":
        idx = np.arange(2**n)
        sel = idx[(idx >> targets[0]) & 1 == 1]
        flipped = sel ^ (1 << targets[1])
        batch[:, sel], batch[:, flipped] = batch[:, flipped].copy(), batch[:, sel].copy()
    else:
        raise ValueError(f"unsupported gate kind {kind!r}")


def _shifted_final_states(circuit: Sequence[GateOp], params: np.ndarray,
                          n_qubits: int) -> tuple[np.ndarray, list[int]]:
    """Final states of every +/- pi/2 shifted circuit, advanced as one batch.

    Rows 2i and 2i+1 hold the +/- shift of the i-th parameterized gate in
    circuit order; the returned list maps i to that gate's slot index.
    """
    dim = 2**n_qubits
    n_slots = sum(1 for g in circuit if g.slot is not None)
    batch = np.empty((2 * n_slots, dim), dtype=np.complex128)
    fill = 0
    slot_order: list[int] = []

    prefix = np.zeros(dim, dtype=np.complex128)
    prefix[0] = 1.0
    for gate in circuit:
        angle = float(params[gate.slot]) if gate.slot is not None else gate.angle
        if fill:
            _apply_kind_batch(batch[:fill], gate.kind, gate.targets, angle, n_qubits)
        if gate.slot is not None:
            for delta in (np.pi / 2.0, -np.pi / 2.0):
                batch[fill] = prefix
                _apply_kind(batch[fill], gate.kind, gate.targets, angle + delta, n_qubits)
                fill += 1
            slot_order.append(gate.slot)
        _apply_kind(prefix, gate.kind, gate.targets, angle, n_qubits)
    return batch, slot_order


def parameter_shift_gradient(circuit: Sequence[GateOp], params: np.ndarray, observable) -> np.ndarray:
    """Exact gradient of <observable> via the pi/2 parameter-shift rule.

    Component k is [f(theta_k + pi/2) - f(theta_k - pi/2)] / 2, with f the
    expectation after running the circuit from |0...0>.  Exact here because
    every parametric gate's generator squares to the identity and each slot
    feeds exactly one gate.
    """
    _validate_slots(circuit, params)
    n = max(q for g in circuit for q in g.targets) + 1
    if isinstance(observable, ZZHamiltonian):
        n = max(n, observable.n_qubits)
    elif isinstance(observable, (int, np.integer)):
        n = max(n, int(observable) + 1)

    if isinstance(observable, ZZHamiltonian):
        weight_signs = np.zeros(2**n)
        for i, j, w in observable.terms:
            weight_signs += w * (1.0 - 2.0 * _pair_parity(n, i, j))
    elif isinstance(observable, (int, np.integer)):
        weight_signs = _z_sign_matrix(n)[:, int(observable)].copy()
    else:
        raise ValueError(f"unsupported observable {observable!r}")

    batch, slot_order = _shifted_final_states(circuit, params, n)
    values = (np.abs(batch) ** 2) @ weight_signs
    grads = np.zeros(len(params))
    for i, slot in enumerate(slot_order):
        grads[slot] = 0.5 * (values[2 * i] - values[2 * i + 1])
    return grads


def z_readout_gradients(circuit: Sequence[GateOp], params: np.ndarray, n_qubits: int) -> np.ndarray:
    """d<Z_q>/d(theta_k) for all slots and qubits, shape (P, n_qubits)."""
    _validate_slots(circuit, params)
    batch, slot_order = _shifted_final_states(circuit, params, n_qubits)
    z_rows = (np.abs(batch) ** 2) @ _z_sign_matrix(n_qubits)
    out = np.zeros((len(params), n_qubits))
    for i, slot in enumerate(slot_order):
        out[slot] = 0.5 * (z_rows[2 * i] - z_rows[2 * i + 1])
    return out


@dataclass(frozen=True)
class CircuitMetrics:
    depth: int
    qubit_count: int
    gate_count: int


def circuit_metrics(circuit: Sequence[GateOp]) -> CircuitMetrics:
    """Depth is the longest dependency chain through shared qubits."""
    if not circuit:
        return CircuitMetrics(0, 0, 0)
    frontier: dict[int, int] = {}
    for gate in circuit:
        level = max((frontier.get(q, 0) for q in gate.targets), default=0) + 1
        for q in gate.targets:
            frontier[q] = level
    return CircuitMetrics(max(frontier.values()), max(frontier) + 1, len(circuit))


def circuit_to_json(circuit: Sequence[GateOp]) -> list[dict]:
    out = []
    for g in circuit:
        entry: dict = {"kind": g.kind, "targets": list(g.targets)}
        if g.angle is not None:
            entry["angle"] = g.angle
        if g.slot is not None:
            entry["slot"] = g.slot
        out.append(entry)
    return out


def circuit_from_json(data: Sequence[dict]) -> list[GateOp]:
    return [GateOp(d["kind"], tuple(d["targets"]), d.get("angle"), d.get("slot")) for d in data]
