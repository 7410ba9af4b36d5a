"""MDP translation layer: state encoding, action decoding, reward.

All functions here are pure; the episode loop lives in episode.py.
"""

from dataclasses import dataclass

import numpy as np

from .cell import CellConfig, RateReport
from .errors import ConfigurationError, ContractViolation


@dataclass(frozen=True)
class TaskSpec:
    """One learning task: a cell plus its service-demand band [c_min, c_max)."""

    demand_min: float  # bits/s
    demand_max: float  # bits/s
    cell_config: CellConfig
    task_id: int = 0

    def __post_init__(self):
        if not (0 <= self.demand_min < self.demand_max):
            raise ConfigurationError("need 0 <= demand_min < demand_max")


@dataclass(frozen=True)
class AllocationAction:
    """Decoded, physically feasible allocation."""

    rb_indicator: np.ndarray  # (N, K) binary, each RB owned by <= 1 UE
    rb_requested: np.ndarray  # (N,) pre-truncation requested counts
    per_rb_power: np.ndarray  # (K,) mW, 0 on unassigned RBs
    ue_power: np.ndarray  # (N,) mW, the power each UE's RBs would carry


@dataclass(frozen=True)
class MdpState:
    """Observation: normalized QoS stats plus the previous action."""

    q_avg: float
    q_min: float
    q_max: float
    prev_rb: np.ndarray  # (N,) requested counts / K
    prev_power: np.ndarray  # (N,) powers mapped back to [-1, 1]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(
            [[self.q_avg, self.q_min, self.q_max], self.prev_rb, self.prev_power]
        )


def observation_dim(num_ues: int) -> int:
    return 3 + 2 * num_ues


def action_dim(num_ues: int) -> int:
    return 2 * num_ues


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


def decode_action(
    raw: np.ndarray, config: CellConfig, idle_mask: np.ndarray | None = None
) -> AllocationAction:
    """Turn a raw [-1,1]^(2N) actor output into a feasible allocation.

    First half scales to requested RB counts, second half to per-UE power.
    RBs are handed out first-fit in ascending UE order until K is exhausted;
    idle UEs are skipped entirely.
    """
    n, k = config.num_ues, config.num_rbs
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (2 * n,):
        raise ContractViolation(f"raw action must have length {2 * n}")
    raw = np.clip(raw, -1.0, 1.0)

    requested = np.rint((raw[:n] + 1.0) / 2.0 * k).astype(int)
    ue_power = config.p_min + (raw[n:] + 1.0) / 2.0 * (config.p_max - config.p_min)
    if idle_mask is not None:
        requested = np.where(idle_mask, 0, requested)

    e = np.zeros((n, k), dtype=np.int8)
    per_rb_power = np.zeros(k)
    next_free = 0
    for u in range(n):
        take = min(requested[u], k - next_free)
        if take > 0:
            e[u, next_free : next_free + take] = 1
            per_rb_power[next_free : next_free + take] = ue_power[u]
            next_free += take
    return AllocationAction(
        rb_indicator=e,
        rb_requested=requested,
        per_rb_power=per_rb_power,
        ue_power=ue_power,
    )


def compute_penalties(alloc: AllocationAction, config: CellConfig):
    """Normalized consumed power and normalized requested-RB excess."""
    consumed = float((alloc.rb_indicator * alloc.per_rb_power[None, :]).sum())
    p_c = consumed / (config.num_rbs * config.p_max)
    k_r = max(0, int(alloc.rb_requested.sum()) - config.num_rbs) / config.num_rbs
    return p_c, k_r


def compute_reward(
    report: RateReport, alloc: AllocationAction, task: TaskSpec
) -> float:
    """sigmoid(normalized min QoS) minus sigmoid of each penalty; in (-2, 1).

    With every UE idle the demand is trivially met, so Q_m is taken as c_max.
    """
    cfg = task.cell_config
    q_m = report.min_rate if report.active.any() else task.demand_max
    q_norm = (q_m - task.demand_min) / (task.demand_max - task.demand_min)
    p_c, k_r = compute_penalties(alloc, cfg)
    return float(sigmoid(q_norm) - sigmoid(p_c) - sigmoid(k_r))


def encode_state(
    report: RateReport, prev: AllocationAction, task: TaskSpec
) -> MdpState:
    """Build the observation from the latest rates and the previous action."""
    cfg = task.cell_config
    if report.active.any():
        rates = report.per_ue_rate[report.active]
        q_avg, q_min, q_max = rates.mean(), rates.min(), rates.max()
    else:
        q_avg = q_min = q_max = task.demand_max
    c_x = task.demand_max
    span = cfg.p_max - cfg.p_min
    return MdpState(
        q_avg=float(q_avg / c_x),
        q_min=float(q_min / c_x),
        q_max=float(q_max / c_x),
        prev_rb=prev.rb_requested / cfg.num_rbs,
        prev_power=2.0 * (prev.ue_power - cfg.p_min) / span - 1.0,
    )


def zero_allocation(config: CellConfig) -> AllocationAction:
    """The empty allocation (used as the previous action at episode start)."""
    n, k = config.num_ues, config.num_rbs
    return AllocationAction(
        rb_indicator=np.zeros((n, k), dtype=np.int8),
        rb_requested=np.zeros(n, dtype=int),
        per_rb_power=np.zeros(k),
        ue_power=np.full(n, config.p_min),
    )
