"""Experiment driver: config files, metric collection, CDFs, summaries."""

import csv
import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import meta as meta_mod
from .cell import CellConfig, dbm_to_mw
from .ddpg import Hyper
from .errors import ConfigurationError
from .mdp import TaskSpec
from .meta import MetaSchedule

SCHEMA_VERSION = 1
METHODS = ("meta", "scratch", "tl", "mtl")


# -- configuration ---------------------------------------------------------


@dataclass(frozen=True)
class CellBlock:
    num_ues: int = 30
    rb_bandwidth: float = 200e3
    p_min_dbm: float = 3.0
    p_max_dbm: float = 6.0
    path_loss_exp: float = 3.0
    noise_psd_dbm_hz: float = -173.0
    cell_radius_m: float = 500.0
    num_neighbors: int = 2
    neighbor_occupancy: float = 0.5
    subcarrier_spacing: float = 15e3


@dataclass(frozen=True)
class TaskBlock:
    num_rbs: int
    demand_min: float
    demand_max: float


@dataclass(frozen=True)
class ScheduleBlock:
    outer_iters: int = 100
    eval_episodes: int = 10
    meta_actor_lr: float = 0.0  # 0 means "same as agent actor step size"
    meta_critic_lr: float = 0.0  # 0 means "same as agent critic step size"


@dataclass(frozen=True)
class AgentBlock:
    gamma: float = 0.99
    lr: float = 1e-4
    actor_lr: float = 0.0  # 0 means "same as lr"
    tau: float = 0.005
    noise_std: float = 0.2
    noise_decay: float = 0.999
    noise_floor: float = 0.02
    batch_size: int = 128
    buffer_capacity: int = 100_000
    horizon: int = 200
    hidden_sizes: tuple = (300, 400, 400)
    warmup_transitions: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str
    cell: CellBlock
    tasks: tuple  # donor TaskBlocks
    new_task: TaskBlock
    schedule: ScheduleBlock
    agent: AgentBlock
    seeds: tuple
    out_dir: str
    donor_budget: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"schema_version: expected {SCHEMA_VERSION}, got {self.schema_version}"
            )
        if not self.seeds:
            raise ConfigurationError("seeds: at least one seed is required")
        if self.cell.p_min_dbm > self.cell.p_max_dbm:
            raise ConfigurationError("cell.p_min_dbm must not exceed cell.p_max_dbm")
        if not self.tasks:
            raise ConfigurationError("tasks: at least one donor task is required")
        for name, tb in [("new_task", self.new_task)] + [
            (f"tasks[{i}]", t) for i, t in enumerate(self.tasks)
        ]:
            if not (0 <= tb.demand_min < tb.demand_max):
                raise ConfigurationError(f"{name}: need 0 <= demand_min < demand_max")
            if tb.num_rbs <= 0:
                raise ConfigurationError(f"{name}: num_rbs must be positive")

    # -- derived objects ---------------------------------------------------

    def cell_config(self, num_rbs: int) -> CellConfig:
        c = self.cell
        return CellConfig(
            num_rbs=num_rbs,
            num_ues=c.num_ues,
            rb_bandwidth=c.rb_bandwidth,
            p_min=dbm_to_mw(c.p_min_dbm),
            p_max=dbm_to_mw(c.p_max_dbm),
            path_loss_exp=c.path_loss_exp,
            noise_psd=c.noise_psd_dbm_hz,
            cell_radius=c.cell_radius_m,
            num_neighbors=c.num_neighbors,
            neighbor_occupancy=c.neighbor_occupancy,
            subcarrier_spacing=c.subcarrier_spacing,
        )

    def donor_task_specs(self) -> list:
        return [
            TaskSpec(
                demand_min=t.demand_min,
                demand_max=t.demand_max,
                cell_config=self.cell_config(t.num_rbs),
                task_id=i,
            )
            for i, t in enumerate(self.tasks)
        ]

    def new_task_spec(self) -> TaskSpec:
        t = self.new_task
        return TaskSpec(
            demand_min=t.demand_min,
            demand_max=t.demand_max,
            cell_config=self.cell_config(t.num_rbs),
            task_id=len(self.tasks),
        )

    def meta_schedule(self) -> MetaSchedule:
        return MetaSchedule(
            outer_iters=self.schedule.outer_iters,
            eval_episodes=self.schedule.eval_episodes,
            num_tasks=len(self.tasks),
            meta_actor_lr=self.schedule.meta_actor_lr,
            meta_critic_lr=self.schedule.meta_critic_lr,
        )

    def hyper(self) -> Hyper:
        return Hyper(**dataclasses.asdict(self.agent))


def _from_dict(cls, data, path):
    """Build a dataclass from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}"
        if name == "cell":
            value = _from_dict(CellBlock, value, sub)
        elif name == "schedule":
            value = _from_dict(ScheduleBlock, value, sub)
        elif name == "agent":
            value = _from_dict(AgentBlock, value, sub)
        elif name == "new_task":
            value = _from_dict(TaskBlock, value, sub)
        elif name == "tasks":
            value = tuple(
                _from_dict(TaskBlock, v, f"{sub}[{i}]") for i, v in enumerate(value)
            )
        elif name in ("seeds", "hidden_sizes"):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return _from_dict(ExperimentConfig, data, "config")


def save_config(path, config: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(config), fh, indent=2)
        fh.write("\n")


def default_config(profile: str = "paper", out_dir: str = "results") -> ExperimentConfig:
    """Built-in profiles.

    paper: evaluation-scale settings (expensive to train on a desktop).
    toy:   small cells and networks for quick, fully reproducible runs.
    """
    if profile == "paper":
        c_x = 10e6
        return ExperimentConfig(
            profile="paper",
            cell=CellBlock(),
            tasks=tuple(
                TaskBlock(num_rbs=k, demand_min=c_m, demand_max=c_x)
                for k in (60, 80, 100)
                for c_m in (1e6, 3e6)
            ),
            new_task=TaskBlock(num_rbs=80, demand_min=2e6, demand_max=c_x),
            schedule=ScheduleBlock(outer_iters=100, eval_episodes=10),
            agent=AgentBlock(),
            seeds=(0, 1, 2),
            out_dir=out_dir,
            donor_budget=1000,
        )
    if profile == "toy":
        # Small cell, few UEs and coarse RB grids: the "serve every active UE
        # one or two blocks" region is wide in action space, so learning shows
        # within a few hundred episodes.
        c_x = 2e6
        return ExperimentConfig(
            profile="toy",
            cell=CellBlock(num_ues=5, cell_radius_m=150.0, neighbor_occupancy=0.25),
            tasks=(
                TaskBlock(num_rbs=8, demand_min=0.3e6, demand_max=c_x),
                TaskBlock(num_rbs=10, demand_min=0.5e6, demand_max=c_x),
                TaskBlock(num_rbs=12, demand_min=0.7e6, demand_max=c_x),
            ),
            new_task=TaskBlock(num_rbs=10, demand_min=0.4e6, demand_max=c_x),
            schedule=ScheduleBlock(
                outer_iters=200,
                eval_episodes=1,
                meta_actor_lr=3e-4,
                meta_critic_lr=3e-3,
            ),
            agent=AgentBlock(
                gamma=0.9,
                lr=1e-3,
                actor_lr=3e-5,
                noise_std=0.3,
                noise_decay=0.999,
                noise_floor=0.3,
                batch_size=128,
                buffer_capacity=20_000,
                horizon=40,
                hidden_sizes=(64, 64),
                warmup_transitions=600,
            ),
            seeds=(0, 1, 2, 3, 4),
            out_dir=out_dir,
            donor_budget=100,
        )
    raise ConfigurationError(f"unknown profile {profile!r}")


# -- metrics ---------------------------------------------------------------


@dataclass
class MetricsLog:
    """Append-only per-episode records, one CSV per (method, seed)."""

    records: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add(self, method, task_id, seed, episode, ret, q_avg, q_min, q_max):
        self.records.append(
            {
                "method": method,
                "task_id": task_id,
                "seed": seed,
                "episode": episode,
                "return": ret,
                "q_avg": q_avg,
                "q_min": q_min,
                "q_max": q_max,
            }
        )

    def methods(self) -> list:
        seen = []
        for r in self.records:
            if r["method"] not in seen:
                seen.append(r["method"])
        return seen

    def seeds(self) -> list:
        return sorted({r["seed"] for r in self.records})

    def select(self, **keys) -> list:
        return [r for r in self.records if all(r[k] == v for k, v in keys.items())]

    def write_csvs(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for method in self.methods():
            for seed in sorted({r["seed"] for r in self.select(method=method)}):
                path = out / f"{method}_seed{seed}.csv"
                with open(path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["episode", "return", "q_avg", "q_min", "q_max"])
                    for r in self.select(method=method, seed=seed):
                        writer.writerow(
                            [
                                r["episode"],
                                repr(r["return"]),
                                repr(r["q_avg"]),
                                repr(r["q_min"]),
                                repr(r["q_max"]),
                            ]
                        )
                written.append(path)
        return written

    @classmethod
    def read_csvs(cls, out_dir) -> "MetricsLog":
        log = cls()
        for path in sorted(Path(out_dir).glob("*_seed*.csv")):
            method, seed_part = path.stem.rsplit("_seed", 1)
            with open(path, newline="") as fh:
                for row in csv.DictReader(fh):
                    log.add(
                        method,
                        task_id=-1,
                        seed=int(seed_part),
                        episode=int(row["episode"]),
                        ret=float(row["return"]),
                        q_avg=float(row["q_avg"]),
                        q_min=float(row["q_min"]),
                        q_max=float(row["q_max"]),
                    )
        return log


# -- experiment driver -----------------------------------------------------


def _record_trace(log, method, task_id, seed, trace):
    for entry in trace:
        log.add(
            method,
            task_id,
            seed,
            entry["shot"],
            entry["episode_return"],
            entry["q_avg"],
            entry["q_min"],
            entry["q_max"],
        )


def run_experiment(config: ExperimentConfig, mode: str = "all") -> MetricsLog:
    """Run meta-training/adaptation and/or baselines for every seed.

    Writes one metrics CSV per (method, seed) plus meta checkpoints and the
    per-shot adaptation trace. Interrupted runs restart cleanly (no resume).
    """
    if mode not in METHODS + ("all",):
        raise ConfigurationError(f"unknown mode {mode!r}")
    wanted = list(METHODS) if mode == "all" else [mode]
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    donors = config.donor_task_specs()
    new_task = config.new_task_spec()
    schedule = config.meta_schedule()
    hyper = config.hyper()
    budget = schedule.adapt_budget
    log = MetricsLog()

    for seed in config.seeds:
        if "meta" in wanted:
            start = time.perf_counter()
            model = meta_mod.meta_train(donors, schedule, hyper, seed)
            log.timings[f"meta-train/seed{seed}"] = time.perf_counter() - start
            meta_mod.save_meta_model(out / f"meta_model_seed{seed}.npz", model)
            _, trace = meta_mod.meta_adapt_new(model, new_task, schedule, hyper, seed)
            _record_trace(log, "meta", new_task.task_id, seed, trace)
            _write_adaptation_trace(out / f"adaptation_meta_seed{seed}.csv", trace)
        for kind in ("scratch", "tl", "mtl"):
            if kind in wanted:
                start = time.perf_counter()
                _, trace = meta_mod.run_baseline(
                    kind, new_task, donors, budget, hyper, seed,
                    donor_budget=config.donor_budget,
                )
                log.timings[f"{kind}/seed{seed}"] = time.perf_counter() - start
                _record_trace(log, kind, new_task.task_id, seed, trace)
    log.write_csvs(out)
    return log


def _write_adaptation_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shot", "episode_return"])
        for entry in trace:
            writer.writerow([entry["shot"], repr(entry["episode_return"])])


# -- analysis --------------------------------------------------------------


def compute_cdf(samples) -> list:
    """Empirical CDF: sorted values with F(x_i) = i/n (i one-based)."""
    samples = list(samples)
    if not samples:
        raise ConfigurationError("compute_cdf needs at least one sample")
    values = np.sort(np.asarray(samples, dtype=float))
    n = len(values)
    return [(float(v), (i + 1) / n) for i, v in enumerate(values)]


def five_number_summary(samples) -> tuple:
    """(min, Q1, median, Q3, max)."""
    arr = np.asarray(list(samples), dtype=float)
    if arr.size == 0:
        raise ConfigurationError("five_number_summary needs at least one sample")
    return tuple(float(q) for q in np.percentile(arr, [0, 25, 50, 75, 100]))


def relative_gain(r_meta: float, r_base: float) -> float:
    return (r_meta - r_base) / abs(r_base)


def summarize(log: MetricsLog) -> str:
    """Plain-text report: final returns, gains, QoS spread, adaptation table."""
    methods = log.methods()
    if len(methods) < 2:
        raise ConfigurationError("summarize needs records from at least two methods")
    lines = []
    missing = [m for m in METHODS if m not in methods]
    if missing:
        lines.append(f"WARNING: no records for {missing}; partial report")
        lines.append("")
    lines.append("== Final mean discounted return (per method) ==")
    finals = {}
    for method in methods:
        per_seed = []
        for seed in sorted({r["seed"] for r in log.select(method=method)}):
            rows = log.select(method=method, seed=seed)
            per_seed.append(rows[-1]["return"])
        mean = float(np.mean(per_seed))
        std = float(np.std(per_seed))
        finals[method] = mean
        flag = "  (single seed, std not meaningful)" if len(per_seed) == 1 else ""
        lines.append(f"  {method:8s} {mean:12.6f} +- {std:.6f}{flag}")

    if "meta" in finals and len(finals) > 1:
        baselines = {m: v for m, v in finals.items() if m != "meta"}
        best_base = max(baselines, key=baselines.get)
        gain = relative_gain(finals["meta"], baselines[best_base])
        lines.append("")
        lines.append(
            f"Relative gain of meta over best baseline ({best_base}): {gain * 100:.1f}%"
        )
        lines.append(
            "(reported figure for the evaluation-scale setup in the source study: 19.8%)"
        )

    lines.append("")
    lines.append("== Min-QoS five-number summary (bits/s) ==")
    for method in methods:
        q = [r["q_min"] for r in log.select(method=method)]
        mn, q1, med, q3, mx = five_number_summary(q)
        lines.append(
            f"  {method:8s} min={mn:.3e} q1={q1:.3e} med={med:.3e} q3={q3:.3e} max={mx:.3e}"
        )

    lines.append("")
    lines.append("== Mean return per adaptation shot ==")
    shots = sorted({r["episode"] for r in log.records})
    header = "  shot  " + "  ".join(f"{m:>10s}" for m in methods)
    lines.append(header)
    for shot in shots:
        cells = []
        for method in methods:
            vals = [r["return"] for r in log.select(method=method, episode=shot)]
            cells.append(f"{np.mean(vals):10.4f}" if vals else " " * 10)
        lines.append(f"  {shot:4d}  " + "  ".join(cells))
    return "\n".join(lines)
