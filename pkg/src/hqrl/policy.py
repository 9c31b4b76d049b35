"""Quantum-circuit policy with a classical encoder, head and value baseline.

The circuit is fixed at 4 qubits and 2 layers no matter how many customers
the instance has.  A flat observation is squashed to RY data-loading angles,
then each layer applies a trainable RY/RZ rotation block, a cost layer over
the warm-start Hamiltonian scaled by gamma_l, and a mixer scaled by beta_l.
Per-qubit <Z> readouts feed a linear head whose masked softmax is the action
distribution.

Gradients for circuit angles come from the parameter-shift rule with one
slot per gate; shared angles (gamma_l, beta_l, encoder outputs) are chained
through the per-gate slots analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sim import GateOp, ZZHamiltonian, all_z_expectations, basis_state, run_circuit, z_readout_gradients

N_QUBITS = 4
N_LAYERS = 2
VALUE_HIDDEN = 32

# The classical encoder and head start deterministic: a fixed random
# projection feeds the circuit and a +/-1 bit-code readout gives the four
# <Z> values authority over every logit.  At the slow classical learning
# rate these parts move little over a run, so the circuit angles (the only
# per-seed draws besides the value net) carry the learning, and paired runs
# of two methods differ in nothing but their angle initialization.
ENCODER_SCALE = 0.3
ENCODER_SEED = 1234567
HEAD_SCALE = 0.5
ANGLE_SCALE = 0.1

QUANTUM_GROUPS = ("rotation_angles", "qaoa_angles")


@dataclass(frozen=True)
class PolicyParams:
    encoder_w: np.ndarray       # (Q, D)
    encoder_b: np.ndarray       # (Q,)
    rotation_angles: np.ndarray # (L, Q, 2) -> RY, RZ per layer and qubit
    qaoa_angles: np.ndarray     # (L, 2)   -> gamma_l, beta_l
    head_w: np.ndarray          # (A, Q)
    head_b: np.ndarray          # (A,)

    @property
    def n_qubits(self) -> int:
        return self.encoder_w.shape[0]

    @property
    def n_layers(self) -> int:
        return self.rotation_angles.shape[0]

    @property
    def n_actions(self) -> int:
        return self.head_w.shape[0]


@dataclass(frozen=True)
class ValueParams:
    w1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: np.ndarray  # ()


@dataclass(frozen=True)
class ActionDistribution:
    probabilities: np.ndarray
    logits: np.ndarray
    mask: np.ndarray


def action_codes(n_actions: int, n_qubits: int) -> np.ndarray:
    """+/-1 matrix whose row a is the bit pattern of a modulo 2**n_qubits.

    Rows repeat once n_actions exceeds 2**n_qubits; the trainable head and
    the state-dependent readouts are what separates code-sharing actions.
    """
    rows = np.empty((n_actions, n_qubits))
    for a in range(n_actions):
        for q in range(n_qubits):
            rows[a, q] = 1.0 if (a >> q) & 1 else -1.0
    return rows


def init_policy_params(obs_dim: int, n_actions: int, rng: np.random.Generator,
                       n_qubits: int = N_QUBITS, n_layers: int = N_LAYERS) -> PolicyParams:
    """Seeded init; the QAOA angles drawn here are the vanilla baseline's
    random scheme and get overwritten when a warm start is exported."""
    fixed = np.random.default_rng(ENCODER_SEED)
    return PolicyParams(
        encoder_w=fixed.normal(0.0, ENCODER_SCALE, (n_qubits, obs_dim)),
        encoder_b=np.zeros(n_qubits),
        rotation_angles=rng.normal(0.0, ANGLE_SCALE, (n_layers, n_qubits, 2)),
        qaoa_angles=rng.normal(0.0, ANGLE_SCALE, (n_layers, 2)),
        head_w=HEAD_SCALE * action_codes(n_actions, n_qubits),
        head_b=np.zeros(n_actions),
    )


def init_value_params(obs_dim: int, rng: np.random.Generator,
                      hidden: int = VALUE_HIDDEN) -> ValueParams:
    return ValueParams(
        w1=rng.normal(0.0, 0.1, (hidden, obs_dim)),
        b1=np.zeros(hidden),
        w2=rng.normal(0.0, 0.1, hidden),
        b2=np.zeros(()),
    )


def encode_observation(state_vec: np.ndarray, params: PolicyParams) -> np.ndarray:
    """Data-loading angles tanh(W s + b) * pi, each strictly inside (-pi, pi)."""
    if state_vec.shape[0] != params.encoder_w.shape[1]:
        raise ValueError(f"observation dim {state_vec.shape[0]} does not match "
                         f"encoder dim {params.encoder_w.shape[1]}")
    return np.pi * np.tanh(params.encoder_w @ state_vec + params.encoder_b)


_TEMPLATE_CACHE: dict[tuple, tuple[list[GateOp], list[tuple[str, tuple, float]]]] = {}


def _circuit_template(n_qubits: int, n_layers: int, h_policy: ZZHamiltonian):
    """Static gate list and slot metadata for a circuit shape; values change
    per state and per update, the structure never does."""
    key = (n_qubits, n_layers, tuple(h_policy.terms))
    cached = _TEMPLATE_CACHE.get(key)
    if cached is not None:
        return cached

    circuit: list[GateOp] = []
    spec: list[tuple[str, tuple, float]] = []

    def add(kind: str, targets: tuple[int, ...], group: str, index: tuple, scale: float) -> None:
        circuit.append(GateOp(kind, targets, slot=len(spec)))
        spec.append((group, index, scale))

    for q in range(n_qubits):
        add("RY", (q,), "data", (q,), 1.0)
    for l in range(n_layers):
        for q in range(n_qubits):
            add("RY", (q,), "rotation_angles", (l, q, 0), 1.0)
        for q in range(n_qubits):
            add("RZ", (q,), "rotation_angles", (l, q, 1), 1.0)
        for i, j, w in h_policy.terms:
            add("RZZ", (i, j), "qaoa_angles", (l, 0), 2.0 * w)
        for q in range(n_qubits):
            add("RX", (q,), "qaoa_angles", (l, 1), 2.0)
    _TEMPLATE_CACHE[key] = (circuit, spec)
    return circuit, spec


def build_policy_circuit(data_angles: np.ndarray, params: PolicyParams,
                         h_policy: ZZHamiltonian):
    """Gate list with one parameter slot per gate, plus slot metadata.

    Slot metadata rows are (group, index, scale): the gate angle equals
    scale * parameter[group][index], which is what the chain rule needs.
    """
    q_count, layers = params.n_qubits, params.n_layers
    circuit, spec = _circuit_template(q_count, layers, h_policy)
    weights = np.array([w for _, _, w in h_policy.terms])
    blocks = [np.asarray(data_angles, dtype=float)]
    for l in range(layers):
        gamma, beta = params.qaoa_angles[l]
        blocks.append(params.rotation_angles[l, :, 0])
        blocks.append(params.rotation_angles[l, :, 1])
        blocks.append(2.0 * gamma * weights)
        blocks.append(np.full(q_count, 2.0 * beta))
    return circuit, np.concatenate(blocks), spec


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Probabilities over valid entries only; masked-out entries are exactly 0."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask leaves no valid action")
    shifted = logits[mask] - logits[mask].max()
    weights = np.exp(shifted)
    probs = np.zeros_like(logits, dtype=float)
    probs[mask] = weights / weights.sum()
    return probs


def _forward_parts(state_vec: np.ndarray, params: PolicyParams, h_policy: ZZHamiltonian,
                   mask: np.ndarray):
    pre = params.encoder_w @ state_vec + params.encoder_b
    data_angles = np.pi * np.tanh(pre)
    circuit, values, spec = build_policy_circuit(data_angles, params, h_policy)
    state = run_circuit(basis_state(params.n_qubits), circuit, values)
    z = all_z_expectations(state)
    logits = params.head_w @ z + params.head_b
    probs = masked_softmax(logits, mask)
    dist = ActionDistribution(probs, logits, np.asarray(mask, dtype=bool))
    return dist, z, circuit, values, spec, pre


def policy_forward(state_vec: np.ndarray, params: PolicyParams, h_policy: ZZHamiltonian,
                   mask: np.ndarray) -> ActionDistribution:
    """Action distribution for one observation; masked cities get probability 0."""
    return _forward_parts(state_vec, params, h_policy, mask)[0]


def sample_action(dist: ActionDistribution, rng: np.random.Generator,
                  greedy: bool = False) -> int:
    """Draw from the distribution, or argmax (lowest index wins ties)."""
    if greedy:
        return int(np.argmax(dist.probabilities))
    p = dist.probabilities / dist.probabilities.sum()
    return int(rng.choice(p.size, p=p))


def value_forward(state_vec: np.ndarray, vparams: ValueParams) -> float:
    """Scalar state-value estimate from the tanh MLP baseline."""
    if state_vec.shape[0] != vparams.w1.shape[1]:
        raise ValueError("observation dim does not match value network")
    hidden = np.tanh(vparams.w1 @ state_vec + vparams.b1)
    return float(vparams.w2 @ hidden + vparams.b2)


def _zero_policy_grads(params: PolicyParams) -> dict[str, np.ndarray]:
    return {
        "encoder_w": np.zeros_like(params.encoder_w),
        "encoder_b": np.zeros_like(params.encoder_b),
        "rotation_angles": np.zeros_like(params.rotation_angles),
        "qaoa_angles": np.zeros_like(params.qaoa_angles),
        "head_w": np.zeros_like(params.head_w),
        "head_b": np.zeros_like(params.head_b),
    }


def _zero_value_grads(vparams: ValueParams) -> dict[str, np.ndarray]:
    return {"w1": np.zeros_like(vparams.w1), "b1": np.zeros_like(vparams.b1),
            "w2": np.zeros_like(vparams.w2), "b2": np.zeros_like(vparams.b2)}


def reinforce_gradients(trajectory, params: PolicyParams, vparams: ValueParams,
                        h_policy: ZZHamiltonian, value_baseline: bool = True):
    """Loss gradients for one episode.

    Policy loss is -sum_t log pi(a_t|s_t) * A_t with A_t = G_t - V(s_t), the
    baseline treated as constant; value loss is mean squared (V - G_t).
    Returns (policy_grads, value_grads, policy_loss, value_loss) with grads
    keyed like the parameter fields.
    """
    states = np.asarray(trajectory.states, dtype=float)
    actions = np.asarray(trajectory.actions, dtype=int)
    targets = np.asarray(trajectory.normalized_returns, dtype=float)
    t_len = actions.shape[0]
    n_actions = params.n_actions

    pg = _zero_policy_grads(params)
    vg = _zero_value_grads(vparams)
    policy_loss = 0.0
    value_loss = 0.0

    for t in range(t_len):
        s = states[t]
        a = int(actions[t])
        mask = s[-n_actions:] == 0.0

        if value_baseline:
            hidden = np.tanh(vparams.w1 @ s + vparams.b1)
            v = float(vparams.w2 @ hidden + vparams.b2)
            err = v - targets[t]
            value_loss += err * err
            scale = 2.0 * err / t_len
            vg["w2"] += scale * hidden
            vg["b2"] += scale
            back = scale * vparams.w2 * (1.0 - hidden**2)
            vg["w1"] += np.outer(back, s)
            vg["b1"] += back
            advantage = targets[t] - v
        else:
            advantage = targets[t]

        dist, z, circuit, values, spec, pre = _forward_parts(s, params, h_policy, mask)
        policy_loss += -np.log(dist.probabilities[a]) * advantage

        d_logits = -dist.probabilities.copy()
        d_logits[a] += 1.0
        d_logits[~mask] = 0.0
        d_logits *= -advantage  # d(policy_loss)/d(logits)

        pg["head_w"] += np.outer(d_logits, z)
        pg["head_b"] += d_logits
        d_z = params.head_w.T @ d_logits

        dz_dtheta = z_readout_gradients(circuit, values, params.n_qubits)
        d_slots = dz_dtheta @ d_z

        d_data = np.zeros(params.n_qubits)
        for k, (group, index, gate_scale) in enumerate(spec):
            if group == "data":
                d_data[index[0]] += d_slots[k] * gate_scale
            else:
                pg[group][index] += d_slots[k] * gate_scale

        d_pre = d_data * np.pi * (1.0 - np.tanh(pre) ** 2)
        pg["encoder_w"] += np.outer(d_pre, s)
        pg["encoder_b"] += d_pre

    value_loss /= t_len
    return pg, vg, float(policy_loss), float(value_loss)


@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def adam_init(params: PolicyParams, vparams: ValueParams) -> AdamState:
    shapes = {**_zero_policy_grads(params),
              **{f"value_{k}": z for k, z in _zero_value_grads(vparams).items()}}
    return AdamState(0, {k: z.copy() for k, z in shapes.items()},
                     {k: z.copy() for k, z in shapes.items()})


def apply_update(params: PolicyParams, vparams: ValueParams,
                 policy_grads: dict[str, np.ndarray], value_grads: dict[str, np.ndarray],
                 opt: AdamState, lr_quantum: float = 0.01, lr_classical: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam step; quantum angle groups get their own learning rate."""
    grads = {**policy_grads, **{f"value_{k}": g for k, g in value_grads.items()}}
    t = opt.step + 1
    new_m, new_v, deltas = {}, {}, {}
    for name, g in grads.items():
        m = beta1 * opt.m[name] + (1.0 - beta1) * g
        v = beta2 * opt.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        lr = lr_quantum if name in QUANTUM_GROUPS else lr_classical
        deltas[name] = lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v

    new_params = replace(
        params,
        encoder_w=params.encoder_w - deltas["encoder_w"],
        encoder_b=params.encoder_b - deltas["encoder_b"],
        rotation_angles=params.rotation_angles - deltas["rotation_angles"],
        qaoa_angles=params.qaoa_angles - deltas["qaoa_angles"],
        head_w=params.head_w - deltas["head_w"],
        head_b=params.head_b - deltas["head_b"],
    )
    new_vparams = ValueParams(
        w1=vparams.w1 - deltas["value_w1"],
        b1=vparams.b1 - deltas["value_b1"],
        w2=vparams.w2 - deltas["value_w2"],
        b2=vparams.b2 - deltas["value_b2"],
    )
    return new_params, new_vparams, AdamState(t, new_m, new_v)


def policy_circuit_for_size(params: PolicyParams, h_policy: ZZHamiltonian):
    """The full circuit at zero data angles, for resource accounting."""
    circuit, values, _ = build_policy_circuit(np.zeros(params.n_qubits), params, h_policy)
    return circuit, values
