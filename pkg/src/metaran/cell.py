"""Single-cell downlink OFDMA world model.

One DU/RU pair serves N UEs on K resource blocks inside a disc-shaped cell.
UEs move, carry a four-level traffic state, and see unit-mean Rayleigh power
fading plus random background interference from a few fixed neighbor RUs.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, ContractViolation

TRAFFIC_LEVELS = ("idle", "low", "mid", "high")
IDLE = 0

# Allowed headings (radians): +-pi/3, +-pi/6, +-pi/12 and 0.
DIRECTIONS = np.array(
    [-np.pi / 3, -np.pi / 6, -np.pi / 12, 0.0, np.pi / 12, np.pi / 6, np.pi / 3]
)
SPEED_MIN = 10.0
SPEED_MAX = 20.0
TRAFFIC_SWITCH_PROB = 0.01

# Interfering RUs sit on a ring at this distance from the serving RU.
NEIGHBOR_DISTANCE = 1000.0
# Floor on any RU-UE distance, avoids the d**-eta singularity.
MIN_DISTANCE = 1.0


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * np.log10(mw)


@dataclass(frozen=True)
class CellConfig:
    """Static per-cell parameters. Powers in mW, bandwidth in Hz."""

    num_rbs: int = 60
    num_ues: int = 30
    rb_bandwidth: float = 200e3
    p_min: float = dbm_to_mw(3.0)
    p_max: float = dbm_to_mw(6.0)
    path_loss_exp: float = 3.0
    noise_psd: float = -173.0  # dBm/Hz
    cell_radius: float = 500.0
    num_neighbors: int = 2
    neighbor_occupancy: float = 0.5
    subcarrier_spacing: float = 15e3  # informational only

    def __post_init__(self):
        if self.num_rbs <= 0 or self.num_ues <= 0:
            raise ConfigurationError("num_rbs and num_ues must be positive")
        if not (0 < self.p_min <= self.p_max):
            raise ConfigurationError("need 0 < p_min <= p_max")
        if self.path_loss_exp <= 0:
            raise ConfigurationError("path_loss_exp must be positive")
        if self.rb_bandwidth <= 0:
            raise ConfigurationError("rb_bandwidth must be positive")
        if self.cell_radius <= 0:
            raise ConfigurationError("cell_radius must be positive")
        if not (0.0 <= self.neighbor_occupancy <= 1.0):
            raise ConfigurationError("neighbor_occupancy must be in [0, 1]")
        if self.num_neighbors < 0:
            raise ConfigurationError("num_neighbors must be >= 0")

    @property
    def noise_rb_mw(self) -> float:
        """Noise power per RB in mW (PSD in dBm/Hz integrated over the RB)."""
        return 10.0 ** ((self.noise_psd + 10.0 * np.log10(self.rb_bandwidth)) / 10.0)

    def neighbor_positions(self) -> np.ndarray:
        """(M, 2) positions of interfering RUs, evenly spread on a ring."""
        m = self.num_neighbors
        angles = 2.0 * np.pi * np.arange(m) / max(m, 1)
        return NEIGHBOR_DISTANCE * np.stack([np.cos(angles), np.sin(angles)], axis=1)


@dataclass(frozen=True)
class EnvSnapshot:
    """Dynamic world state at one decision step."""

    ue_positions: np.ndarray  # (N, 2) meters, serving RU at origin
    ue_speeds: np.ndarray  # (N,) m/s
    ue_directions: np.ndarray  # (N,) radians
    traffic_levels: np.ndarray  # (N,) ints indexing TRAFFIC_LEVELS
    time_index: int = 0

    @property
    def active_mask(self) -> np.ndarray:
        return self.traffic_levels != IDLE


@dataclass(frozen=True)
class ChannelRealization:
    """One fading + interference draw."""

    gain: np.ndarray  # (N, K) unit-mean Rayleigh power gains
    neighbor_gain: np.ndarray  # (M, N, K) gains from neighbor RUs
    neighbor_power: np.ndarray  # (M, K) mW, 0 where the neighbor RB is idle


@dataclass(frozen=True)
class RateReport:
    """Per-UE achievable rates for one allocation."""

    per_ue_rate: np.ndarray  # (N,) bits/s
    min_rate: float  # bits/s, min over active UEs (0 if none active)
    interference: np.ndarray  # (N, K) mW
    sinr: np.ndarray  # (N, K) dimensionless
    active: np.ndarray  # (N,) bool, traffic level != idle


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def reset(config: CellConfig, seed) -> EnvSnapshot:
    """Place UEs uniformly in the cell disc with fresh speeds/headings/traffic."""
    rng = _as_rng(seed)
    n = config.num_ues
    radii = config.cell_radius * np.sqrt(rng.uniform(size=n))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
    positions = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    speeds = rng.uniform(SPEED_MIN, SPEED_MAX, size=n)
    directions = rng.choice(DIRECTIONS, size=n)
    traffic = rng.integers(0, len(TRAFFIC_LEVELS), size=n)
    return EnvSnapshot(
        ue_positions=positions,
        ue_speeds=speeds,
        ue_directions=directions,
        traffic_levels=traffic,
        time_index=0,
    )


def step_mobility(
    s: EnvSnapshot, config: CellConfig, dt: float, rng: np.random.Generator
) -> EnvSnapshot:
    """Advance every UE along its heading, reflecting off the cell edge.

    A UE that crosses the boundary is mirrored back across the circle and gets
    a fresh heading and speed.
    """
    if dt <= 0:
        raise ContractViolation("dt must be positive")
    step = (s.ue_speeds * dt)[:, None] * np.stack(
        [np.cos(s.ue_directions), np.sin(s.ue_directions)], axis=1
    )
    pos = s.ue_positions + step
    dist = np.linalg.norm(pos, axis=1)
    out = dist > config.cell_radius
    speeds = s.ue_speeds.copy()
    directions = s.ue_directions.copy()
    if np.any(out):
        # Mirror across the circle: new radius = 2R - r, same bearing.
        scale = (2.0 * config.cell_radius - dist[out]) / dist[out]
        pos[out] *= scale[:, None]
        directions[out] = rng.choice(DIRECTIONS, size=int(out.sum()))
        speeds[out] = rng.uniform(SPEED_MIN, SPEED_MAX, size=int(out.sum()))
    return replace(
        s,
        ue_positions=pos,
        ue_speeds=speeds,
        ue_directions=directions,
        time_index=s.time_index + 1,
    )


def step_traffic(
    s: EnvSnapshot, rng: np.random.Generator, switch_prob: float = TRAFFIC_SWITCH_PROB
) -> EnvSnapshot:
    """Each UE independently jumps to a random *other* level with switch_prob."""
    n = len(s.traffic_levels)
    switch = rng.uniform(size=n) < switch_prob
    # Offset in 1..3 guarantees the new level differs from the old one.
    offsets = rng.integers(1, len(TRAFFIC_LEVELS), size=n)
    levels = s.traffic_levels.copy()
    levels[switch] = (levels[switch] + offsets[switch]) % len(TRAFFIC_LEVELS)
    return replace(s, traffic_levels=levels)


def sample_channel(
    s: EnvSnapshot, config: CellConfig, rng: np.random.Generator
) -> ChannelRealization:
    """Draw Rayleigh power gains and random neighbor-RU background activity."""
    n, k, m = config.num_ues, config.num_rbs, config.num_neighbors
    gain = rng.exponential(1.0, size=(n, k))
    neighbor_gain = rng.exponential(1.0, size=(m, n, k))
    occupied = rng.uniform(size=(m, k)) < config.neighbor_occupancy
    power = rng.uniform(config.p_min, config.p_max, size=(m, k))
    neighbor_power = np.where(occupied, power, 0.0)
    return ChannelRealization(
        gain=gain, neighbor_gain=neighbor_gain, neighbor_power=neighbor_power
    )


def _validate_alloc(alloc, config: CellConfig) -> None:
    e = alloc.rb_indicator
    p = alloc.per_rb_power
    if e.shape != (config.num_ues, config.num_rbs):
        raise ContractViolation("rb_indicator has wrong shape")
    if not np.isin(e, (0, 1)).all():
        raise ContractViolation("rb_indicator must be binary")
    if e.sum() > config.num_rbs:
        raise ContractViolation("more RBs assigned than available")
    if (e.sum(axis=0) > 1).any():
        raise ContractViolation("an RB is assigned to more than one UE")
    assigned = e.sum(axis=0) > 0
    eps = 1e-9
    if (p[assigned] < config.p_min - eps).any() or (p[assigned] > config.p_max + eps).any():
        raise ContractViolation("assigned RB power outside [p_min, p_max]")
    if (np.abs(p[~assigned]) > eps).any():
        raise ContractViolation("unassigned RB carries power")


def compute_rates(
    alloc, ch: ChannelRealization, s: EnvSnapshot, config: CellConfig
) -> RateReport:
    """Shannon rate per UE with path loss, fading and neighbor interference.

    c_u = sum_k B * e[u,k] * log2(1 + p[k] * d_u**-eta * g[u,k] / (I[u,k] + noise)).
    """
    _validate_alloc(alloc, config)
    eta = config.path_loss_exp
    d_own = np.maximum(np.linalg.norm(s.ue_positions, axis=1), MIN_DISTANCE)
    signal = alloc.per_rb_power[None, :] * d_own[:, None] ** (-eta) * ch.gain

    if config.num_neighbors > 0:
        diff = s.ue_positions[None, :, :] - config.neighbor_positions()[:, None, :]
        d_nb = np.maximum(np.linalg.norm(diff, axis=2), MIN_DISTANCE)  # (M, N)
        interference = np.sum(
            ch.neighbor_power[:, None, :] * d_nb[:, :, None] ** (-eta) * ch.neighbor_gain,
            axis=0,
        )
    else:
        interference = np.zeros_like(ch.gain)

    sinr = signal / (interference + config.noise_rb_mw)
    rates = config.rb_bandwidth * np.sum(alloc.rb_indicator * np.log2(1.0 + sinr), axis=1)
    active = s.active_mask
    min_rate = float(rates[active].min()) if active.any() else 0.0
    return RateReport(
        per_ue_rate=rates,
        min_rate=min_rate,
        interference=interference,
        sinr=sinr,
        active=active,
    )
