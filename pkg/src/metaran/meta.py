"""Meta-training loop (first-order MAML over DDPG learners) and baselines.

Outer loop: every task agent restarts from the shared meta parameters, trains
for a few episodes on its own environment (support samples), then reports the
gradient of its loss on a query sample evaluated at the adapted parameters.
The meta parameters take one Adam step on the task-summed query gradients.
"""

from dataclasses import dataclass

import numpy as np

from . import mdp, nets
from .ddpg import BufferNotReady, DdpgAgent, Hyper, run_episode, sample_batch
from .episode import TaskEnv
from .errors import ConfigurationError, TrainingDivergence
from .mdp import TaskSpec
from .seeding import derive_rng, derive_seed

META_SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class MetaSchedule:
    outer_iters: int  # T
    eval_episodes: int = 10  # T_e, episodes per task per outer iteration
    num_tasks: int = 6  # N_g
    # Step sizes of the meta-level Adam updates; 0 means "reuse the inner
    # actor/critic step sizes". A meta critic faster than the meta actor keeps
    # the shared policy from racing past regions the value estimate has not
    # mapped yet.
    meta_actor_lr: float = 0.0
    meta_critic_lr: float = 0.0

    def __post_init__(self):
        if self.outer_iters < 1 or self.eval_episodes < 1 or self.num_tasks < 1:
            raise ConfigurationError("schedule counts must be >= 1")
        if self.meta_actor_lr < 0 or self.meta_critic_lr < 0:
            raise ConfigurationError("meta step sizes must be >= 0")

    @property
    def adapt_budget(self) -> int:
        """Adaptation episodes on a new task: 10% of the outer iterations."""
        return round(0.1 * self.outer_iters)


@dataclass
class MetaModel:
    actor_vec: np.ndarray
    critic_vec: np.ndarray
    actor_opt: nets.AdamState
    critic_opt: nets.AdamState
    actor_sizes: tuple
    critic_sizes: tuple
    lr: float


def init_meta_model(
    obs_dim: int,
    act_dim: int,
    hyper: Hyper,
    seed: int,
    actor_lr: float = 0.0,
    critic_lr: float = 0.0,
) -> MetaModel:
    actor_sizes = (obs_dim, *hyper.hidden_sizes, act_dim)
    critic_sizes = (obs_dim + act_dim, *hyper.hidden_sizes, 1)
    rng = np.random.default_rng(seed)
    actor = nets.init_network(actor_sizes, int(rng.integers(2**31)), "tanh")
    critic = nets.init_network(critic_sizes, int(rng.integers(2**31)), "identity")
    return MetaModel(
        actor_vec=nets.params_as_vector(actor),
        critic_vec=nets.params_as_vector(critic),
        actor_opt=nets.init_adam(
            [np.zeros(actor.num_parameters())],
            lr=actor_lr if actor_lr > 0 else hyper.effective_actor_lr,
        ),
        critic_opt=nets.init_adam(
            [np.zeros(critic.num_parameters())],
            lr=critic_lr if critic_lr > 0 else hyper.lr,
        ),
        actor_sizes=actor_sizes,
        critic_sizes=critic_sizes,
        lr=hyper.lr,
    )


def _flatten(grads: list) -> np.ndarray:
    return np.concatenate([g.ravel() for g in grads])


def query_gradients(agent: DdpgAgent, rng: np.random.Generator):
    """Flat (actor, critic) loss gradients on a query batch at the adapted
    parameters, or None while the buffer is still warming up."""
    try:
        batch = sample_batch(agent.buffer, agent.hyper.batch_size, "query", rng)
    except BufferNotReady:
        return None
    _, c_grads = agent.critic_gradients(batch)
    _, a_grads = agent.actor_gradients(batch)
    return _flatten(a_grads), _flatten(c_grads)


def apply_meta_update(meta: MetaModel, actor_grads: list, critic_grads: list) -> None:
    """One Adam step on the summed task query gradients (no-op if empty)."""
    if not actor_grads:
        return
    g_actor = np.sum(actor_grads, axis=0)
    g_critic = np.sum(critic_grads, axis=0)
    if not (np.isfinite(g_actor).all() and np.isfinite(g_critic).all()):
        raise TrainingDivergence("non-finite meta gradient")
    nets.adam_step([meta.actor_vec], [g_actor], meta.actor_opt)
    nets.adam_step([meta.critic_vec], [g_critic], meta.critic_opt)


def meta_train(
    tasks: list,
    schedule: MetaSchedule,
    hyper: Hyper,
    seed: int,
    on_outer_start=None,
) -> MetaModel:
    """Run the full meta-training loop and return the trained meta model.

    on_outer_start(iteration, meta, agents) is invoked after the per-iteration
    re-initialization of every task agent from the meta parameters.
    """
    if len(tasks) != schedule.num_tasks:
        raise ConfigurationError(
            f"expected {schedule.num_tasks} tasks, got {len(tasks)}"
        )
    dims = {(mdp.observation_dim(t.cell_config.num_ues),
             mdp.action_dim(t.cell_config.num_ues)) for t in tasks}
    if len(dims) != 1:
        raise ConfigurationError("tasks must share observation/action dimensions")
    obs_dim, act_dim = dims.pop()

    meta = init_meta_model(
        obs_dim, act_dim, hyper, derive_seed(seed, "meta-init"),
        actor_lr=schedule.meta_actor_lr, critic_lr=schedule.meta_critic_lr,
    )
    envs = [
        TaskEnv(task, derive_rng(seed, "meta-train", "env", task.task_id))
        for task in tasks
    ]
    agents = [
        DdpgAgent(obs_dim, act_dim, hyper,
                  derive_rng(seed, "meta-train", "agent", task.task_id))
        for task in tasks
    ]
    query_rngs = [
        derive_rng(seed, "meta-train", "query", task.task_id) for task in tasks
    ]

    for it in range(1, schedule.outer_iters + 1):
        for agent in agents:
            agent.load_vectors(meta.actor_vec, meta.critic_vec)
        if on_outer_start is not None:
            on_outer_start(it, meta, agents)
        actor_grads, critic_grads = [], []
        for env, agent, qrng in zip(envs, agents, query_rngs):
            for _ in range(schedule.eval_episodes):
                run_episode(agent, env, hyper.horizon, explore=True, train=True)
            grads = query_gradients(agent, qrng)
            if grads is not None:
                actor_grads.append(grads[0])
                critic_grads.append(grads[1])
        apply_meta_update(meta, actor_grads, critic_grads)
    return meta


def inner_adapt(
    meta: MetaModel,
    task: TaskSpec,
    budget: int,
    hyper: Hyper,
    seed: int,
    stream: str = "adapt",
    eval_episodes: int = 3,
):
    """Initialize an agent from the meta parameters and train it on the task.

    Returns (agent, trace) where trace holds one record per adaptation shot:
    the mean greedy evaluation return and mean QoS stats over eval_episodes
    evaluation episodes (averaging tames episode-to-episode traffic noise
    without touching the training trajectory).
    """
    obs_dim = mdp.observation_dim(task.cell_config.num_ues)
    act_dim = mdp.action_dim(task.cell_config.num_ues)
    agent = DdpgAgent(obs_dim, act_dim, hyper,
                      derive_rng(seed, stream, "agent", task.task_id))
    agent.load_vectors(meta.actor_vec, meta.critic_vec)
    env = TaskEnv(task, derive_rng(seed, stream, "env", task.task_id))
    eval_env = TaskEnv(task, derive_rng(seed, stream, "eval-env", task.task_id))
    trace = []
    for shot in range(1, budget + 1):
        run_episode(agent, env, hyper.horizon, explore=True, train=True)
        trace.append({"shot": shot, **_greedy_eval(agent, eval_env, hyper, eval_episodes)})
    return agent, trace


def _greedy_eval(agent: DdpgAgent, eval_env, hyper: Hyper, episodes: int) -> dict:
    rets, qoses = [], []
    for _ in range(episodes):
        ret, qos = run_episode(
            agent, eval_env, hyper.horizon, explore=False, train=False
        )
        rets.append(ret)
        qoses.append(qos)
    mean_qos = {k: float(np.mean([q[k] for q in qoses])) for k in qoses[0]}
    return {"episode_return": float(np.mean(rets)), **mean_qos}


def meta_adapt_new(meta: MetaModel, new_task: TaskSpec, schedule: MetaSchedule,
                   hyper: Hyper, seed: int):
    """Few-shot adaptation on an unseen task with the scheduled budget."""
    return inner_adapt(meta, new_task, schedule.adapt_budget, hyper, seed)


def random_init_model(task: TaskSpec, hyper: Hyper, seed: int) -> MetaModel:
    """Untrained meta model (used so scratch shares the adaptation code path)."""
    obs_dim = mdp.observation_dim(task.cell_config.num_ues)
    act_dim = mdp.action_dim(task.cell_config.num_ues)
    return init_meta_model(obs_dim, act_dim, hyper, derive_seed(seed, "scratch-init"))


def mtl_schedule(budget: int) -> list:
    """Alternating episode plan for multi-task learning, new task last."""
    plan = []
    for i in range(budget):
        plan.append("new" if (budget - 1 - i) % 2 == 0 else "donor")
    return plan


def run_baseline(
    kind: str,
    new_task: TaskSpec,
    donor_tasks: list,
    budget: int,
    hyper: Hyper,
    seed: int,
    donor_budget: int = 0,
):
    """Train one of the comparison methods on the new task.

    scratch: random init, budget episodes on the new task.
    tl: pre-train on the first donor task for donor_budget episodes, then
        fine-tune on the new task.
    mtl: one agent alternates episodes between a randomly chosen donor task
        and the new task (even split, new task last), evaluated on the new task.
    """
    if kind == "scratch":
        # Same code path and environment streams as meta adaptation, so the
        # comparison is paired: only the initialization differs.
        init = random_init_model(new_task, hyper, seed)
        return inner_adapt(init, new_task, budget, hyper, seed)

    if kind == "tl":
        if not donor_tasks:
            raise ConfigurationError("transfer learning needs a donor task")
        donor = donor_tasks[0]
        init = random_init_model(donor, hyper, seed)
        donor_agent, _ = inner_adapt(init, donor, donor_budget, hyper, seed, stream="tl-donor")
        donor_model = MetaModel(
            actor_vec=donor_agent.actor_vector(),
            critic_vec=donor_agent.critic_vector(),
            actor_opt=init.actor_opt,
            critic_opt=init.critic_opt,
            actor_sizes=init.actor_sizes,
            critic_sizes=init.critic_sizes,
            lr=hyper.lr,
        )
        return inner_adapt(donor_model, new_task, budget, hyper, seed)

    if kind == "mtl":
        if not donor_tasks:
            raise ConfigurationError("multi-task learning needs a donor task")
        rng = derive_rng(seed, "mtl", "task-pick")
        donor = donor_tasks[int(rng.integers(len(donor_tasks)))]
        obs_dim = mdp.observation_dim(new_task.cell_config.num_ues)
        act_dim = mdp.action_dim(new_task.cell_config.num_ues)
        agent = DdpgAgent(obs_dim, act_dim, hyper, derive_rng(seed, "mtl", "agent"))
        donor_env = TaskEnv(donor, derive_rng(seed, "mtl", "donor-env"))
        new_env = TaskEnv(new_task, derive_rng(seed, "mtl", "new-env"))
        eval_env = TaskEnv(new_task, derive_rng(seed, "mtl", "eval-env"))
        trace = []
        for shot, which in enumerate(mtl_schedule(budget), start=1):
            env = new_env if which == "new" else donor_env
            run_episode(agent, env, hyper.horizon, explore=True, train=True)
            trace.append({"shot": shot, **_greedy_eval(agent, eval_env, hyper, 3)})
        return agent, trace

    raise ConfigurationError(f"unknown baseline kind {kind!r}")


# -- checkpointing ---------------------------------------------------------


def save_meta_model(path, meta: MetaModel) -> None:
    np.savez(
        path,
        format_version=META_SNAPSHOT_VERSION,
        actor_sizes=np.array(meta.actor_sizes),
        critic_sizes=np.array(meta.critic_sizes),
        actor_vec=meta.actor_vec,
        critic_vec=meta.critic_vec,
        lr=meta.lr,
        actor_opt_header=nets.state_as_blob(meta.actor_opt)["header"],
        actor_opt_m0=meta.actor_opt.m[0],
        actor_opt_v0=meta.actor_opt.v[0],
        critic_opt_header=nets.state_as_blob(meta.critic_opt)["header"],
        critic_opt_m0=meta.critic_opt.m[0],
        critic_opt_v0=meta.critic_opt.v[0],
    )


def load_meta_model(path) -> MetaModel:
    with np.load(path) as data:
        if int(data["format_version"]) != META_SNAPSHOT_VERSION:
            raise ConfigurationError("unsupported meta snapshot version")
        actor_opt = nets.state_from_blob(
            {"header": data["actor_opt_header"],
             "m0": data["actor_opt_m0"], "v0": data["actor_opt_v0"]}
        )
        critic_opt = nets.state_from_blob(
            {"header": data["critic_opt_header"],
             "m0": data["critic_opt_m0"], "v0": data["critic_opt_v0"]}
        )
        return MetaModel(
            actor_vec=np.array(data["actor_vec"]),
            critic_vec=np.array(data["critic_vec"]),
            actor_opt=actor_opt,
            critic_opt=critic_opt,
            actor_sizes=tuple(int(s) for s in data["actor_sizes"]),
            critic_sizes=tuple(int(s) for s in data["critic_sizes"]),
            lr=float(data["lr"]),
        )
