"""DDPG inner learner: replay buffer, actor-critic updates, evaluation."""

import json
from dataclasses import dataclass, asdict

import numpy as np

from . import nets
from .errors import BufferNotReady, ConfigurationError, ContractViolation, TrainingDivergence


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


@dataclass(frozen=True)
class Hyper:
    """Agent hyperparameters (defaults: evaluation-scale values)."""

    gamma: float = 0.99
    lr: float = 1e-4
    # Separate (usually smaller) step size for the actor; 0 means "same as
    # lr". A slower actor keeps it from chasing a half-trained critic into
    # saturated corners of the action box.
    actor_lr: float = 0.0
    tau: float = 0.005
    noise_std: float = 0.2
    noise_decay: float = 0.999
    noise_floor: float = 0.02
    batch_size: int = 128
    buffer_capacity: int = 100_000
    horizon: int = 200
    hidden_sizes: tuple = (300, 400, 400)
    # Extra transitions collected before the first update (0 means updates
    # start as soon as the buffer can serve disjoint support/query batches).
    warmup_transitions: int = 0

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ConfigurationError("gamma must be in (0, 1)")
        if self.buffer_capacity % 2 != 0:
            raise ConfigurationError("buffer_capacity must be even")

    @property
    def effective_actor_lr(self) -> float:
        return self.actor_lr if self.actor_lr > 0 else self.lr


class ReplayBuffer:
    """FIFO ring of transitions, split by insertion parity into a support
    partition (even inserts) and a query partition (odd inserts) so the two
    never overlap within one update."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity <= 0 or capacity % 2 != 0:
            raise ConfigurationError("capacity must be positive and even")
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.insert_count = 0

    def __len__(self):
        return min(self.insert_count, self.capacity)

    def add(self, tr: Transition) -> None:
        i = self.insert_count % self.capacity
        self.states[i] = tr.state
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state
        self.insert_count += 1

    def partition_indices(self, partition: str) -> np.ndarray:
        size = len(self)
        idx = np.arange(size)
        # Capacity is even, so slot parity == insertion parity.
        if partition == "support":
            return idx[idx % 2 == 0]
        if partition == "query":
            return idx[idx % 2 == 1]
        raise ContractViolation(f"unknown partition {partition!r}")


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray


def sample_batch(
    buffer: ReplayBuffer, batch_size: int, partition: str, rng: np.random.Generator
) -> Batch:
    """Uniform without-replacement sample from one partition."""
    if len(buffer) < 2 * batch_size:
        raise BufferNotReady(
            f"buffer holds {len(buffer)} < {2 * batch_size} transitions"
        )
    pool = buffer.partition_indices(partition)
    idx = rng.choice(pool, size=batch_size, replace=False)
    return Batch(
        states=buffer.states[idx],
        actions=buffer.actions[idx],
        rewards=buffer.rewards[idx],
        next_states=buffer.next_states[idx],
    )


class DdpgAgent:
    """Actor-critic pair with target networks and Gaussian exploration."""

    def __init__(self, obs_dim: int, act_dim: int, hyper: Hyper, rng: np.random.Generator):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hyper = hyper
        self.rng = rng
        actor_sizes = (obs_dim, *hyper.hidden_sizes, act_dim)
        critic_sizes = (obs_dim + act_dim, *hyper.hidden_sizes, 1)
        self.actor = nets.init_network(
            actor_sizes, seed=int(rng.integers(2**31)), output_activation="tanh"
        )
        self.critic = nets.init_network(
            critic_sizes, seed=int(rng.integers(2**31)), output_activation="identity"
        )
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = nets.init_adam(
            self.actor.parameters(), lr=hyper.effective_actor_lr
        )
        self.critic_opt = nets.init_adam(self.critic.parameters(), lr=hyper.lr)
        self.buffer = ReplayBuffer(hyper.buffer_capacity, obs_dim, act_dim)
        self.noise_std = hyper.noise_std

    # -- parameter exchange ------------------------------------------------

    def actor_vector(self) -> np.ndarray:
        return nets.params_as_vector(self.actor)

    def critic_vector(self) -> np.ndarray:
        return nets.params_as_vector(self.critic)

    def load_vectors(self, actor_vec: np.ndarray, critic_vec: np.ndarray) -> None:
        """Set online and target networks from flat vectors; fresh optimizers."""
        nets.set_params_from_vector(self.actor, actor_vec)
        nets.set_params_from_vector(self.critic, critic_vec)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = nets.init_adam(
            self.actor.parameters(), lr=self.hyper.effective_actor_lr
        )
        self.critic_opt = nets.init_adam(self.critic.parameters(), lr=self.hyper.lr)

    # -- acting ------------------------------------------------------------

    def select_action(self, state: np.ndarray, explore: bool, rng=None) -> np.ndarray:
        if len(state) != self.obs_dim:
            raise ContractViolation("state dimension does not match the actor")
        action, _ = nets.forward(self.actor, state)
        if explore and self.noise_std > 0:
            r = rng if rng is not None else self.rng
            action = action + r.normal(0.0, self.noise_std, size=self.act_dim)
        return np.clip(action, -1.0, 1.0)

    def decay_noise(self) -> None:
        self.noise_std = max(
            self.hyper.noise_floor, self.noise_std * self.hyper.noise_decay
        )

    # -- learning ----------------------------------------------------------

    def critic_gradients(self, batch: Batch):
        """TD-loss value and gradients of the critic on a batch."""
        h = self.hyper
        b = len(batch.rewards)
        next_a, _ = nets.forward(self.target_actor, batch.next_states)
        next_q, _ = nets.forward(
            self.target_critic, np.concatenate([batch.next_states, next_a], axis=1)
        )
        y = batch.rewards + h.gamma * next_q[:, 0]
        q, tape = nets.forward(
            self.critic, np.concatenate([batch.states, batch.actions], axis=1)
        )
        td = q[:, 0] - y
        loss = float(np.mean(td**2))
        grads, _ = nets.backward(self.critic, tape, (2.0 * td / b)[:, None])
        return loss, grads

    def actor_gradients(self, batch: Batch):
        """Objective -mean Q(s, mu(s)) and its gradients for the actor."""
        b = len(batch.rewards)
        mu, tape_a = nets.forward(self.actor, batch.states)
        q, tape_q = nets.forward(
            self.critic, np.concatenate([batch.states, mu], axis=1)
        )
        _, in_grad = nets.backward(self.critic, tape_q, np.full((b, 1), 1.0 / b))
        dq_da = in_grad[:, self.obs_dim :]
        grads, _ = nets.backward(self.actor, tape_a, -dq_da)
        return float(-np.mean(q)), grads

    def train_step(self, batch: Batch):
        """One critic + one actor Adam step on the batch, then soft updates."""
        critic_loss, c_grads = self.critic_gradients(batch)
        nets.adam_step(self.critic.parameters(), c_grads, self.critic_opt)
        actor_loss, a_grads = self.actor_gradients(batch)
        nets.adam_step(self.actor.parameters(), a_grads, self.actor_opt)
        if not (np.isfinite(critic_loss) and np.isfinite(actor_loss)):
            raise TrainingDivergence(
                f"non-finite loss (critic={critic_loss}, actor={actor_loss})"
            )
        tau = self.hyper.tau
        nets.soft_update(self.target_actor.parameters(), self.actor.parameters(), tau)
        nets.soft_update(self.target_critic.parameters(), self.critic.parameters(), tau)
        return critic_loss, actor_loss


def run_episode(agent: DdpgAgent, env, horizon: int, explore: bool, train: bool):
    """One episode; returns (discounted return, mean QoS stats dict).

    With train=True every post-warm-up step also performs one train_step on a
    support batch and the noise schedule advances at episode end.
    """
    state = env.reset()
    total = 0.0
    discount = 1.0
    q_sums = np.zeros(3)
    for _ in range(horizon):
        action = agent.select_action(state, explore=explore)
        next_state, reward, info = env.step(action)
        if train:
            agent.buffer.add(Transition(state, action, reward, next_state))
            if len(agent.buffer) >= agent.hyper.warmup_transitions:
                try:
                    batch = sample_batch(
                        agent.buffer, agent.hyper.batch_size, "support", agent.rng
                    )
                except BufferNotReady:
                    pass
                else:
                    agent.train_step(batch)
        total += discount * reward
        discount *= agent.hyper.gamma
        q_sums += (info["q_avg"], info["q_min"], info["q_max"])
        state = next_state
    if train:
        agent.decay_noise()
    if horizon > 0:
        q_sums /= horizon
    return total, {"q_avg": q_sums[0], "q_min": q_sums[1], "q_max": q_sums[2]}


def evaluate_policy(agent: DdpgAgent, env, episodes: int, horizon: int) -> float:
    """Mean discounted return of the greedy (noise-free) policy."""
    if episodes < 1:
        raise ContractViolation("episodes must be >= 1")
    returns = [
        run_episode(agent, env, horizon, explore=False, train=False)[0]
        for _ in range(episodes)
    ]
    return float(np.mean(returns))


# -- checkpointing ---------------------------------------------------------


def save_agent(path, agent: DdpgAgent) -> None:
    """Full agent checkpoint: networks, optimizer states, noise position."""
    blob = {
        "format_version": 1,
        "obs_dim": agent.obs_dim,
        "act_dim": agent.act_dim,
        "hyper": json.dumps(asdict(agent.hyper)),
        "noise_std": agent.noise_std,
        "actor": agent.actor_vector(),
        "critic": agent.critic_vector(),
        "target_actor": nets.params_as_vector(agent.target_actor),
        "target_critic": nets.params_as_vector(agent.target_critic),
    }
    for name, opt in (("aopt", agent.actor_opt), ("copt", agent.critic_opt)):
        for key, val in nets.state_as_blob(opt).items():
            blob[f"{name}_{key}"] = val
    np.savez(path, **blob)


def load_agent(path) -> DdpgAgent:
    with np.load(path, allow_pickle=False) as data:
        hyper_dict = json.loads(str(data["hyper"]))
        hyper_dict["hidden_sizes"] = tuple(hyper_dict["hidden_sizes"])
        hyper = Hyper(**hyper_dict)
        agent = DdpgAgent(
            int(data["obs_dim"]), int(data["act_dim"]), hyper,
            rng=np.random.default_rng(0),
        )
        nets.set_params_from_vector(agent.actor, data["actor"])
        nets.set_params_from_vector(agent.critic, data["critic"])
        nets.set_params_from_vector(agent.target_actor, data["target_actor"])
        nets.set_params_from_vector(agent.target_critic, data["target_critic"])
        agent.noise_std = float(data["noise_std"])
        for name in ("aopt", "copt"):
            sub = {
                key[len(name) + 1 :]: data[key]
                for key in data.files
                if key.startswith(name + "_")
            }
            opt = nets.state_from_blob(sub)
            if name == "aopt":
                agent.actor_opt = opt
            else:
                agent.critic_opt = opt
    return agent
