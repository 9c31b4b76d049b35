"""Training, transfer, evaluation and benchmark orchestration.

A run is fully determined by its config: the instance comes from the config
seed, parameter init and action sampling use separate seeded streams, and the
warm start is itself seeded, so repeated runs write identical artifacts.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import solvers
from .env import (Trajectory, VrpInstance, discounted_returns, encode_state, generate_instance,
                  reset, select_vehicle, state_dim, step, valid_action_mask)
from .policy import (AdamState, PolicyParams, ValueParams, adam_init, apply_update,
                     init_policy_params, init_value_params, policy_circuit_for_size,
                     policy_forward, reinforce_gradients, sample_action)
from .sim import ZZHamiltonian, circuit_metrics
from .warmstart import build_cost_hamiltonian, build_subgraph, export_warm_start, optimize_angles

TRAINED_METHODS = ("hqrl-qaoa", "vanilla-qrl")
ALL_METHODS = TRAINED_METHODS + ("random", "nearest-neighbor", "brute-force")
DEFAULT_SEEDS = (7, 77, 88, 101, 2024)
FINETUNE_EPISODES = 40


@dataclass(frozen=True)
class RunConfig:
    method: str = "hqrl-qaoa"
    n_customers: int = 8
    n_vehicles: int = 2
    episodes: int = 250
    seed: int = 7
    warm_start: bool = True
    value_baseline: bool = True
    discount: float = 0.99
    invalid_penalty: float = 10.0
    n_qubits: int = 4
    n_layers: int = 2
    p: int = 2
    warmstart_max_iters: int = 150
    lr_quantum: float = 0.01
    lr_classical: float = 0.001
    vehicle_rule: str = "nearest"

    def __post_init__(self) -> None:
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def config_from_dict(data: dict) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    total_reward: float
    policy_loss: float
    value_loss: float
    route_cost: float


@dataclass
class TrainingLog:
    config: RunConfig
    records: list[EpisodeRecord]
    wall_time_s: float
    peak_mem_bytes: int

    def rewards(self) -> np.ndarray:
        return np.array([r.total_reward for r in self.records])


@dataclass
class Checkpoint:
    config: RunConfig
    params: PolicyParams
    vparams: ValueParams
    opt: AdamState
    episode_count: int


@dataclass(frozen=True)
class EvalResult:
    routes: dict[int, list[int]]
    cost: float
    oracle: float
    normalized_cost: float
    total_reward: float


def policy_hamiltonian(config: RunConfig) -> ZZHamiltonian:
    """Cost Hamiltonian the policy layers use, rebuilt from the config seed."""
    instance = generate_instance(config.n_customers, config.n_vehicles, config.seed)
    subgraph = build_subgraph(instance, config.n_qubits)
    return build_cost_hamiltonian(subgraph, n_qubits=config.n_qubits)


def rollout(instance: VrpInstance, params: PolicyParams, h_policy: ZZHamiltonian,
            rng: np.random.Generator, greedy: bool = False, rule: str = "nearest",
            discount: float = 0.99, penalty: float = 10.0):
    """One masked episode; returns (trajectory, routes, total_reward, cost)."""
    state = reset(instance)
    states, actions, rewards = [], [], []
    routes: dict[int, list[int]] = {v: [] for v in range(instance.n_vehicles)}
    total = 0.0
    while not state.done:
        obs = encode_state(instance, state)
        mask = valid_action_mask(state)
        dist = policy_forward(obs, params, h_policy, mask)
        action = sample_action(dist, rng, greedy=greedy)
        routes[select_vehicle(state, instance, action, rule)].append(action)
        outcome = step(instance, state, action, rule, penalty=penalty)
        states.append(obs)
        actions.append(action)
        rewards.append(outcome.reward)
        total += outcome.reward
        state = outcome.state
    rewards = np.array(rewards)
    returns, normalized = discounted_returns(rewards, discount)
    traj = Trajectory(np.array(states), np.array(actions), rewards, returns, normalized)
    cost = -total  # masked rollouts never pay the invalid penalty
    return traj, routes, total, cost


def _init_checkpoint(config: RunConfig) -> Checkpoint:
    if config.method not in TRAINED_METHODS:
        raise ValueError(f"method {config.method!r} is not trainable")
    obs_dim = state_dim(config.n_customers, config.n_vehicles)
    rng = np.random.default_rng([config.seed, 0])
    params = init_policy_params(obs_dim, config.n_customers, rng,
                                config.n_qubits, config.n_layers)
    vparams = init_value_params(obs_dim, rng)

    use_warm = config.warm_start and config.method == "hqrl-qaoa"
    if use_warm:
        instance = generate_instance(config.n_customers, config.n_vehicles, config.seed)
        subgraph = build_subgraph(instance, config.n_qubits)
        angles = optimize_angles(build_cost_hamiltonian(subgraph), config.p,
                                 config.warmstart_max_iters, config.seed)
        params = export_warm_start(angles, params)
    return Checkpoint(config, params, vparams, adam_init(params, vparams), 0)


def _run_episodes(ck: Checkpoint, episodes: int) -> tuple[TrainingLog, Checkpoint]:
    config = ck.config
    instance = generate_instance(config.n_customers, config.n_vehicles, config.seed)
    h_policy = policy_hamiltonian(config)
    rng = np.random.default_rng([config.seed, 1])
    params, vparams, opt = ck.params, ck.vparams, ck.opt

    started = time.perf_counter()
    records: list[EpisodeRecord] = []
    for episode in range(episodes):
        traj, routes, total, cost = rollout(instance, params, h_policy, rng,
                                            rule=config.vehicle_rule,
                                            discount=config.discount,
                                            penalty=config.invalid_penalty)
        pg, vg, ploss, vloss = reinforce_gradients(traj, params, vparams, h_policy,
                                                   config.value_baseline)
        if not (np.isfinite(ploss) and np.isfinite(vloss)):
            raise RuntimeError(f"non-finite loss at episode {episode}: "
                               f"policy={ploss}, value={vloss}")
        params, vparams, opt = apply_update(params, vparams, pg, vg, opt,
                                            config.lr_quantum, config.lr_classical)
        records.append(EpisodeRecord(episode, total, ploss, vloss, cost))

    wall = time.perf_counter() - started
    new_ck = Checkpoint(config, params, vparams, opt, ck.episode_count + episodes)
    log = TrainingLog(config, records, wall, peak_memory_estimate(new_ck))
    return log, new_ck


def train(config: RunConfig) -> tuple[TrainingLog, Checkpoint]:
    """REINFORCE on one seeded instance; episodes=0 yields an empty log."""
    ck = _init_checkpoint(config)
    return _run_episodes(ck, config.episodes)


def transfer_params(ck: Checkpoint, new_config: RunConfig) -> Checkpoint:
    """Carry quantum angles (and overlapping encoder/value weights) to a new
    problem size; the head is rebuilt because the action count changes.

    When the problem shape is unchanged nothing needs rebuilding, so the
    checkpoint passes through whole and fine-tuning is continued training."""
    old, new = ck.config, new_config
    if (old.n_qubits, old.n_layers) != (new.n_qubits, new.n_layers):
        raise ValueError("fine-tuning cannot change the circuit shape")
    if (old.n_customers, old.n_vehicles) == (new.n_customers, new.n_vehicles):
        return Checkpoint(new_config, ck.params, ck.vparams, ck.opt, ck.episode_count)
    obs_dim = state_dim(new.n_customers, new.n_vehicles)
    rng = np.random.default_rng([new.seed, 2])
    fresh = init_policy_params(obs_dim, new.n_customers, rng, new.n_qubits, new.n_layers)
    fresh_v = init_value_params(obs_dim, rng)

    encoder_w = _transfer_obs_matrix(ck.params.encoder_w, fresh.encoder_w, old, new)
    value_w1 = _transfer_obs_matrix(ck.vparams.w1, fresh_v.w1, old, new)
    params = replace(fresh,
                     encoder_w=encoder_w,
                     encoder_b=ck.params.encoder_b.copy(),
                     rotation_angles=ck.params.rotation_angles.copy(),
                     qaoa_angles=ck.params.qaoa_angles.copy())
    vparams = ValueParams(value_w1, ck.vparams.b1.copy(), ck.vparams.w2.copy(),
                          ck.vparams.b2.copy())
    return Checkpoint(new_config, params, vparams, adam_init(params, vparams),
                      ck.episode_count)


def _transfer_obs_matrix(w_old: np.ndarray, w_fresh: np.ndarray, old: RunConfig,
                         new: RunConfig) -> np.ndarray:
    """Block-aware pad/truncate over the [vehicles | customers | mask] layout.

    Overlapping columns keep their trained values; columns that exist only at
    the new size keep the fresh initialization, so inputs the agent has never
    seen start out weighted exactly like a newly built agent's."""
    w_new = w_fresh.copy()
    blocks_old = (2 * old.n_vehicles, 2 * old.n_customers, old.n_customers)
    blocks_new = (2 * new.n_vehicles, 2 * new.n_customers, new.n_customers)
    src = dst = 0
    for size_old, size_new in zip(blocks_old, blocks_new):
        keep = min(size_old, size_new)
        w_new[:, dst:dst + keep] = w_old[:, src:src + keep]
        src += size_old
        dst += size_new
    return w_new


def finetune(ck: Checkpoint, new_config: RunConfig) -> tuple[TrainingLog, Checkpoint]:
    """Transfer to a new size and keep training (default budget 40 episodes)."""
    moved = transfer_params(ck, new_config)
    return _run_episodes(moved, new_config.episodes)


def evaluate(ck: Checkpoint, instance: VrpInstance) -> EvalResult:
    """Greedy rollout; cost normalized by the exact optimum when N <= 9,
    otherwise by nearest neighbor."""
    expected = state_dim(instance.n_customers, instance.n_vehicles)
    if ck.params.encoder_w.shape[1] != expected:
        raise ValueError("checkpoint was trained for a different problem shape")
    h_policy = policy_hamiltonian(ck.config)
    rng = np.random.default_rng(0)  # unused in greedy mode
    _, routes, total, cost = rollout(instance, ck.params, h_policy, rng, greedy=True,
                                     rule=ck.config.vehicle_rule,
                                     discount=ck.config.discount,
                                     penalty=ck.config.invalid_penalty)
    oracle = solvers.oracle_cost(instance)
    return EvalResult(routes, cost, oracle, cost / oracle, total)


def peak_memory_estimate(ck: Checkpoint) -> int:
    """Deterministic accounting of our own buffers: parameters, Adam moments
    and the prefix-state cache the parameter-shift sweep keeps alive."""
    arrays = [ck.params.encoder_w, ck.params.encoder_b, ck.params.rotation_angles,
              ck.params.qaoa_angles, ck.params.head_w, ck.params.head_b,
              ck.vparams.w1, ck.vparams.b1, ck.vparams.w2, np.atleast_1d(ck.vparams.b2)]
    param_bytes = sum(int(a.nbytes) for a in arrays)
    h_policy = policy_hamiltonian(ck.config)
    circuit, _ = policy_circuit_for_size(ck.params, h_policy)
    state_bytes = 16 * 2**ck.config.n_qubits
    cache_bytes = state_bytes * (len(circuit) + 2)
    return 3 * param_bytes + cache_bytes


def convergence_episodes(rewards: np.ndarray, thresholds: list[float],
                         window: int = 10) -> list[int | None]:
    """First episode whose trailing moving average reaches each threshold.

    Thresholds must be ascending; unreached ones map to None.
    """
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty reward log")
    smoothed = [rewards[max(0, e - window + 1):e + 1].mean() for e in range(rewards.size)]
    out: list[int | None] = []
    for th in thresholds:
        hit = next((e for e, s in enumerate(smoothed) if s >= th), None)
        out.append(hit)
    return out


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    n_customers: int
    normalized_cost: float | str
    qubits: int | str
    depth: int | str
    peak_mem_bytes: int | str


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def comparison_to_csv(rows: list[ComparisonRow]) -> str:
    lines = ["method,n_customers,normalized_cost,qubits,depth,peak_mem_bytes"]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in
                              [r.method, r.n_customers, r.normalized_cost,
                               r.qubits, r.depth, r.peak_mem_bytes]))
    return "\n".join(lines) + "\n"


def metrics_to_csv(log: TrainingLog) -> str:
    lines = ["episode,total_reward,policy_loss,value_loss,route_cost"]
    for r in log.records:
        lines.append(f"{r.episode},{r.total_reward!r},{r.policy_loss!r},"
                     f"{r.value_loss!r},{r.route_cost!r}")
    return "\n".join(lines) + "\n"


def scalability_sweep(sizes: list[int], config: RunConfig) -> list[ComparisonRow]:
    """Train both policy variants per size and record cost plus resources.

    Rows tagged -analytic carry textbook resource formulas (grover-style
    search needs N*K qubits and exponential depth; flat QAOA on the full
    problem needs N qubits and depth O(p*N)); they are not measured here.
    """
    rows: list[ComparisonRow] = []
    for size in sizes:
        for method in TRAINED_METHODS:
            cfg = replace(config, method=method, n_customers=size,
                          warm_start=method == "hqrl-qaoa")
            log, ck = train(cfg)
            instance = generate_instance(size, cfg.n_vehicles, cfg.seed)
            result = evaluate(ck, instance)
            metrics = circuit_metrics(policy_circuit_for_size(ck.params,
                                                              policy_hamiltonian(cfg))[0])
            rows.append(ComparisonRow(method, size, result.normalized_cost,
                                      metrics.qubit_count, metrics.depth,
                                      log.peak_mem_bytes))
        rows.append(ComparisonRow("gas-analytic", size, "n/a",
                                  size * config.n_vehicles, "exponential", "n/a"))
        rows.append(ComparisonRow("qaoa-analytic", size, "n/a",
                                  size, config.p * size, "n/a"))
    return rows


def ablate(base: RunConfig, sizes: list[int],
           finetune_episodes: int = FINETUNE_EPISODES) -> list[ComparisonRow]:
    """Normalized cost per size for the full method and three ablations.

    full / no-warm-start / no-value-baseline pretrain at the base size and
    fine-tune to each target size; no-fine-tune trains from scratch per size.
    """
    variants = {
        "full": base,
        "no-warm-start": replace(base, warm_start=False),
        "no-value-baseline": replace(base, value_baseline=False),
    }
    rows: list[ComparisonRow] = []
    for name, cfg in variants.items():
        _, pretrained = train(cfg)
        for size in sizes:
            target = replace(cfg, n_customers=size, episodes=finetune_episodes)
            _, ck = finetune(pretrained, target)
            instance = generate_instance(size, cfg.n_vehicles, cfg.seed)
            rows.append(ComparisonRow(name, size, evaluate(ck, instance).normalized_cost,
                                      "", "", ""))
    for size in sizes:
        scratch = replace(base, n_customers=size)
        _, ck = train(scratch)
        instance = generate_instance(size, base.n_vehicles, base.seed)
        rows.append(ComparisonRow("no-fine-tune", size,
                                  evaluate(ck, instance).normalized_cost, "", "", ""))
    return rows


def checkpoint_to_json(ck: Checkpoint) -> dict:
    return {
        "config": ck.config.to_dict(),
        "encoder_weights": {"w": ck.params.encoder_w.tolist(),
                            "b": ck.params.encoder_b.tolist()},
        "rotation_angles": ck.params.rotation_angles.tolist(),
        "qaoa_angles": ck.params.qaoa_angles.tolist(),
        "head_weights": {"w": ck.params.head_w.tolist(), "b": ck.params.head_b.tolist()},
        "value_params": {"w1": ck.vparams.w1.tolist(), "b1": ck.vparams.b1.tolist(),
                         "w2": ck.vparams.w2.tolist(), "b2": float(ck.vparams.b2)},
        "optimizer_state": {
            "step": ck.opt.step,
            "m": {k: v.tolist() for k, v in ck.opt.m.items()},
            "v": {k: v.tolist() for k, v in ck.opt.v.items()},
        },
        "episode_count": ck.episode_count,
    }


def checkpoint_from_json(data: dict) -> Checkpoint:
    config = config_from_dict(data["config"])
    params = PolicyParams(
        encoder_w=np.array(data["encoder_weights"]["w"], dtype=float),
        encoder_b=np.array(data["encoder_weights"]["b"], dtype=float),
        rotation_angles=np.array(data["rotation_angles"], dtype=float),
        qaoa_angles=np.array(data["qaoa_angles"], dtype=float),
        head_w=np.array(data["head_weights"]["w"], dtype=float),
        head_b=np.array(data["head_weights"]["b"], dtype=float),
    )
    vparams = ValueParams(
        w1=np.array(data["value_params"]["w1"], dtype=float),
        b1=np.array(data["value_params"]["b1"], dtype=float),
        w2=np.array(data["value_params"]["w2"], dtype=float),
        b2=np.array(data["value_params"]["b2"], dtype=float),
    )
    opt = AdamState(
        step=int(data["optimizer_state"]["step"]),
        m={k: np.array(v, dtype=float) for k, v in data["optimizer_state"]["m"].items()},
        v={k: np.array(v, dtype=float) for k, v in data["optimizer_state"]["v"].items()},
    )
    return Checkpoint(config, params, vparams, opt, int(data["episode_count"]))


def save_checkpoint(ck: Checkpoint, path: str | Path) -> None:
    Path(path).write_text(json.dumps(checkpoint_to_json(ck), indent=2) + "\n")


def load_checkpoint(path: str | Path) -> Checkpoint:
    return checkpoint_from_json(json.loads(Path(path).read_text()))
