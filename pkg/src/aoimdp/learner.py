"""Replay-buffer training loop over the AoI-MDP and the agents it drives.

During every environment step each agent's learner is updated while the
agent is "in the delay period" and again "in the waiting period".  The number
of update passes for a period of ``p`` seconds is ``floor(p)``, and at least
one when ``p > 0``; each pass samples one batch from the agent's own buffer.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from .aoi_mdp import (
    AoIMDPEnv,
    AugmentedAction,
    AugmentedState,
    ObservationLayout,
    RewardVector,
    WorldConfig,
    total_reward,
)
from .delay_models import DelayModel, empirical_quantile_edges
from .errors import ConfigError, DomainError, StateError

SNAPSHOT_MAGIC = "AOIMDP1"
AGENT_KINDS = ("zero_wait", "fixed_wait", "threshold_wait", "q_discrete")
MOTIONS = ("nearest", "straight", "hold")
METRICS = ("mean_time_avg_aoi_s", "energy_j", "sum_data_rate_bps", "cumulative_reward")


@dataclass(frozen=True)
class Transition:
    state: AugmentedState
    action: AugmentedAction
    reward: float
    next_state: AugmentedState
    done: bool = False


class ReplayBuffer:
    """Bounded FIFO of transitions; oldest entries are evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self):
        return len(self._items)

    def push(self, t: Transition):
        self._items.append(t)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if not self._items:
            raise StateError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]


def buffer_push(buffer: ReplayBuffer, t: Transition):
    buffer.push(t)


def buffer_sample(buffer: ReplayBuffer, n: int, rng) -> list[Transition]:
    return buffer.sample(n, rng)


def update_passes(period: float) -> int:
    if period <= 0:
        return 0
    return max(1, math.floor(period))


class AgentPolicy(Protocol):
    kind: str

    def act(self, state: AugmentedState, greedy: bool = False) -> AugmentedAction: ...

    def update(self, batch: Sequence[Transition]) -> None: ...

    def snapshot(self) -> dict: ...


# ---------------------------------------------------------------------------
# scripted motion shared by the baselines and the q_discrete features


def _geometry(obs, layout: ObservationLayout, cfg: WorldConfig):
    scale = np.array([cfg.width, cfg.height])
    own = obs[layout.own] * scale
    nodes = obs[layout.nodes].reshape(-1, 2) * scale
    buffers = obs[layout.buffers]
    return own, nodes, buffers


def nearest_target(obs, layout: ObservationLayout, cfg: WorldConfig):
    """Offset and distance to the closest node that still holds data, or ``None``."""
    own, nodes, buffers = _geometry(obs, layout, cfg)
    live = np.flatnonzero(buffers > 0)
    if live.size == 0:
        return None
    off = nodes[live] - own
    dist = np.linalg.norm(off, axis=1)
    k = int(np.argmin(dist))
    return off[k], float(dist[k])


class ScriptedMotion:
    """Task action independent of learning.

    ``nearest`` heads at full speed for the closest node with data and hovers
    once inside half the communication range; ``straight`` keeps a fixed
    heading and speed; ``hold`` stays in place.
    """

    def __init__(self, cfg: WorldConfig, motion="nearest", heading=0.0, speed=None):
        if motion not in MOTIONS:
            raise ConfigError(f"agent.motion={motion!r} not one of {MOTIONS}")
        self.cfg = cfg
        self.layout = ObservationLayout(cfg.num_auvs, cfg.num_nodes)
        self.motion = motion
        self.heading = float(heading)
        self.speed = cfg.max_speed if speed is None else float(speed)

    def __call__(self, obs) -> tuple[float, float]:
        if self.motion == "hold":
            return 0.0, 0.0
        if self.motion == "straight":
            return self.heading, self.speed
        tgt = nearest_target(obs, self.layout, self.cfg)
        if tgt is None:
            return 0.0, 0.0
        off, dist = tgt
        if dist <= self.cfg.comm_range / 2:
            return 0.0, 0.0
        heading = math.atan2(off[1], off[0]) % (2 * math.pi)
        return heading, min(self.cfg.max_speed, dist / self.cfg.step_s)


class _ScriptedAgent:
    kind = ""

    def __init__(self, cfg: WorldConfig, motion="nearest", heading=0.0, speed=None, **params):
        self.cfg = cfg
        self.motion = ScriptedMotion(cfg, motion, heading, speed)
        self.params = {"motion": motion, "heading": heading, "speed": speed, **params}

    def wait_for(self, state: AugmentedState) -> float:
        raise NotImplementedError

    def act(self, state, greedy=False):
        h, v = self.motion(state.observation)
        return AugmentedAction(h, v, self.wait_for(state))

    def update(self, batch):
        pass

    def snapshot(self) -> dict:
        return {"kind": self.kind, "params": self.params}


class ZeroWaitAgent(_ScriptedAgent):
    kind = "zero_wait"

    def wait_for(self, state):
        return 0.0


class FixedWaitAgent(_ScriptedAgent):
    kind = "fixed_wait"

    def __init__(self, cfg, wait=0.0, **kw):
        if not 0 <= wait <= cfg.z_max:
            raise ConfigError(f"agent.wait={wait} outside [0, env.z_max={cfg.z_max}]")
        super().__init__(cfg, wait=wait, **kw)
        self.wait = float(wait)

    def wait_for(self, state):
        return self.wait


class ThresholdWaitAgent(_ScriptedAgent):
    """Waits until the delivered observation would be ``theta`` seconds old."""

    kind = "threshold_wait"

    def __init__(self, cfg, theta=1.0, **kw):
        if theta < 0:
            raise ConfigError(f"agent.theta={theta} must be >= 0")
        super().__init__(cfg, theta=theta, **kw)
        self.theta = float(theta)

    def wait_for(self, state):
        return min(max(0.0, self.theta - state.delay), self.cfg.z_max)


# ---------------------------------------------------------------------------
# tabular learner


class TabularQ:
    """Action-value table with one-step TD updates.

    Greedy ties resolve to the lowest action index.
    """

    def __init__(self, n_states: int, n_actions: int, alpha: float, gamma: float):
        if n_states < 1 or n_actions < 1:
            raise ConfigError("q table needs at least one state and one action")
        if not 0 < alpha <= 1:
            raise ConfigError(f"agent.alpha={alpha} must lie in (0, 1]")
        if not 0 <= gamma <= 1:
            raise ConfigError(f"agent.gamma={gamma} must lie in [0, 1]")
        self.q = np.zeros((n_states, n_actions))
        self.alpha = alpha
        self.gamma = gamma

    def update(self, s: int, a: int, r: float, s2: int, done: bool = False):
        target = r if done else r + self.gamma * self.q[s2].max()
        new = self.q[s, a] + self.alpha * (target - self.q[s, a])
        if not math.isfinite(new):
            raise StateError(f"non-finite Q value at state {s}, action {a}")
        self.q[s, a] = new

    def greedy(self, s: int) -> int:
        return int(np.argmax(self.q[s]))


@dataclass(frozen=True)
class Discretization:
    heading_buckets: int = 8
    speed_buckets: int = 3
    wait_buckets: int = 6
    delay_bins: int = 4
    direction_buckets: int = 8

    def __post_init__(self):
        bad = [f"agent.{k}={v}" for k, v in self.__dict__.items() if not (isinstance(v, int) and v >= 1)]
        if bad:
            raise ConfigError("discretization needs integer bucket counts >= 1: " + ", ".join(bad))


class QDiscreteAgent:
    """Epsilon-greedy tabular learner over a discretized AoI-MDP.

    State features: direction bucket of the nearest node with data (plus one
    bucket for "no data left"), whether that node is within communication
    range, and the quantile bin of the observation delay.  Actions are the
    product of heading, speed and wait buckets.
    """

    kind = "q_discrete"

    def __init__(
        self,
        cfg: WorldConfig,
        disc: Discretization = Discretization(),
        delay_edges=(),
        alpha: float = 0.2,
        gamma: float = 0.9,
        epsilon: float = 1.0,
        seed=0,
    ):
        self.cfg = cfg
        self.disc = disc
        self.layout = ObservationLayout(cfg.num_auvs, cfg.num_nodes)
        self.delay_edges = np.asarray(delay_edges, dtype=float)
        if self.delay_edges.size != disc.delay_bins - 1:
            raise ConfigError(
                f"need {disc.delay_bins - 1} delay bin edges, got {self.delay_edges.size}"
            )
        self.headings = np.arange(disc.heading_buckets) * (2 * math.pi / disc.heading_buckets)
        self.speeds = (
            np.array([cfg.max_speed])
            if disc.speed_buckets == 1
            else np.linspace(0.0, cfg.max_speed, disc.speed_buckets)
        )
        self.waits = (
            np.array([0.0]) if disc.wait_buckets == 1 else np.linspace(0.0, cfg.z_max, disc.wait_buckets)
        )
        self.n_dir = disc.direction_buckets + 1
        n_states = self.n_dir * 2 * disc.delay_bins
        n_actions = disc.heading_buckets * self.speeds.size * self.waits.size
        self.table = TabularQ(n_states, n_actions, alpha, gamma)
        self.epsilon = epsilon
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        # id(transition) -> (transition, s, a, s2); holding the transition pins its id
        self._encoded: dict[int, tuple] = {}

    @property
    def q(self) -> np.ndarray:
        return self.table.q

    def state_index(self, state: AugmentedState) -> int:
        tgt = nearest_target(state.observation, self.layout, self.cfg)
        if tgt is None:
            direction, near = self.disc.direction_buckets, 0
        else:
            off, dist = tgt
            ang = math.atan2(off[1], off[0]) % (2 * math.pi)
            width = 2 * math.pi / self.disc.direction_buckets
            direction = int(round(ang / width)) % self.disc.direction_buckets
            near = int(dist <= self.cfg.comm_range)
        ybin = int(np.searchsorted(self.delay_edges, state.delay, side="left"))
        return (direction * 2 + near) * self.disc.delay_bins + ybin

    def action_from_index(self, a: int) -> AugmentedAction:
        nw, ns = self.waits.size, self.speeds.size
        h, rest = divmod(a, ns * nw)
        s, w = divmod(rest, nw)
        return AugmentedAction(float(self.headings[h]), float(self.speeds[s]), float(self.waits[w]))

    def action_index(self, action: AugmentedAction) -> int:
        width = 2 * math.pi / self.disc.heading_buckets
        h = int(round((action.heading % (2 * math.pi)) / width)) % self.disc.heading_buckets
        s = int(np.argmin(np.abs(self.speeds - action.speed)))
        w = int(np.argmin(np.abs(self.waits - action.wait)))
        return (h * self.speeds.size + s) * self.waits.size + w

    def act(self, state, greedy=False):
        s = self.state_index(state)
        if not greedy and self.rng.random() < self.epsilon:
            a = int(self.rng.integers(self.q.shape[1]))
        else:
            a = self.table.greedy(s)
        return self.action_from_index(a)

    def _encode(self, t: Transition):
        hit = self._encoded.get(id(t))
        if hit is None:
            if len(self._encoded) >= 200_000:
                self._encoded.clear()
            hit = (t, self.state_index(t.state), self.action_index(t.action), self.state_index(t.next_state))
            self._encoded[id(t)] = hit
        return hit[1:]

    def update(self, batch: Sequence[Transition]):
        for t in batch:
            s, a, s2 = self._encode(t)
            self.table.update(s, a, t.reward, s2, t.done)

    def snapshot(self) -> dict:
        return {
            "kind": self.kind,
            "params": {
                **self.disc.__dict__,
                "delay_edges": self.delay_edges.tolist(),
                "alpha": self.table.alpha,
                "gamma": self.table.gamma,
                "epsilon": self.epsilon,
            },
            "q": self.q,
        }


def make_baseline_agent(kind: str, cfg: WorldConfig, **params) -> AgentPolicy:
    if kind == "zero_wait":
        return ZeroWaitAgent(cfg, **params)
    if kind == "fixed_wait":
        return FixedWaitAgent(cfg, **params)
    if kind == "threshold_wait":
        return ThresholdWaitAgent(cfg, **params)
    if kind == "q_discrete":
        disc_keys = set(Discretization.__dataclass_fields__)
        disc = Discretization(**{k: params.pop(k) for k in list(params) if k in disc_keys})
        return QDiscreteAgent(cfg, disc, **params)
    raise ConfigError(f"agent.kind={kind!r} not one of {AGENT_KINDS}")


# ---------------------------------------------------------------------------
# snapshots


def save_policy(agent: AgentPolicy, path) -> None:
    """Text snapshot: magic line, JSON header, then one Q-table row per line."""
    snap = agent.snapshot()
    q = snap.pop("q", None)
    header = dict(snap)
    if q is not None:
        header["shape"] = list(q.shape)
    lines = [SNAPSHOT_MAGIC, json.dumps(header, sort_keys=True)]
    if q is not None:
        lines.extend(" ".join(repr(float(v)) for v in row) for row in q)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_policy(path, cfg: WorldConfig, seed=0) -> AgentPolicy:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SNAPSHOT_MAGIC:
        raise DomainError(f"{path}: not a policy snapshot (missing {SNAPSHOT_MAGIC} header)")
    header = json.loads(lines[1])
    params = dict(header["params"])
    if header["kind"] != "q_discrete":
        return make_baseline_agent(header["kind"], cfg, **params)
    agent = make_baseline_agent("q_discrete", cfg, seed=seed, **params)
    rows, cols = header["shape"]
    q = np.array([[float(v) for v in line.split()] for line in lines[2 : 2 + rows]])
    if q.shape != (rows, cols) or q.shape != agent.q.shape:
        raise DomainError(f"{path}: Q table shape {q.shape} does not match the agent")
    agent.table.q = q
    return agent


# ---------------------------------------------------------------------------
# training and evaluation


def epsilon_schedule(epoch: int, epochs: int, start=1.0, end=0.05, fraction=0.5) -> float:
    """Linear anneal from ``start`` to ``end`` over the first ``fraction`` of epochs."""
    span = fraction * epochs
    if span <= 0 or epoch >= span:
        return end
    return start + (end - start) * epoch / span


@dataclass
class TrainSettings:
    epochs: int = 300
    steps: int = 100
    seed: int = 0
    buffer_capacity: int = 10000
    batch: int = 16
    updates: bool = True
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5


@dataclass
class EpisodeResult:
    metrics: dict
    log_rows: list = field(default_factory=list)


def _episode_metrics(env: AoIMDPEnv, energy_used: float, collected_rates: list, reward_sum: float):
    n = env.cfg.num_auvs
    return {
        "mean_time_avg_aoi_s": float(np.mean([env.running_time_avg_aoi(j) for j in range(n)])),
        "energy_j": float(energy_used),
        "sum_data_rate_bps": float(np.mean(collected_rates)) if collected_rates else 0.0,
        "cumulative_reward": float(reward_sum),
    }


def run_episode(
    env: AoIMDPEnv,
    agents: Sequence[AgentPolicy],
    seed,
    steps: int,
    weights: Sequence[float] | None = None,
    greedy: bool = False,
    learn: Callable | None = None,
    epoch: int = 0,
    log: bool = False,
) -> EpisodeResult:
    """Roll out one episode; ``learn(j, transition)`` is called after every step."""
    weights = env.weights if weights is None else weights
    states = env.reset(seed)
    energy_used = 0.0
    rates = []
    reward_sum = 0.0
    rows = []
    for step in range(steps):
        actions = [ag.act(s, greedy=greedy) for ag, s in zip(agents, states)]
        next_states, rewards, done, info = env.step(actions)
        out = info["outcome"]
        energy_used += float(out.energy_used.sum())
        rates.append(float(out.collected_bits.sum()) / env.cfg.step_s)
        for j, ag in enumerate(agents):
            r = total_reward(rewards[j], weights)
            reward_sum += r
            if learn is not None:
                learn(j, Transition(states[j], actions[j], r, next_states[j], done))
            if log:
                rows.append(
                    {
                        "epoch": epoch,
                        "step": step,
                        "agent": j,
                        "clock_s": env.clock(j),
                        "wait_s": actions[j].wait,
                        "delay_s": next_states[j].delay,
                        "inst_aoi_s": env.instantaneous_aoi(j),
                        "run_avg_aoi_s": env.running_time_avg_aoi(j),
                        "data_rate_bps": float(out.collected_bits[j]) / env.cfg.step_s,
                        "energy_j": float(env.world.energy[j]),
                        "reward_total": r,
                        "done": int(done),
                    }
                )
        states = next_states
        if done:
            break
    return EpisodeResult(_episode_metrics(env, energy_used, rates, reward_sum), rows)


def train(
    cfg: WorldConfig,
    delay_model: DelayModel,
    agents: Sequence[AgentPolicy],
    settings: TrainSettings,
    log_episodes: bool = False,
):
    """Train ``agents`` (one per AUV) in place.

    Returns the per-epoch metric rows and, if requested, the step log rows.
    """
    if len(agents) != cfg.num_auvs:
        raise DomainError(f"need {cfg.num_auvs} agents, got {len(agents)}")
    env = AoIMDPEnv(cfg, delay_model)
    buffers = [ReplayBuffer(settings.buffer_capacity) for _ in agents]
    sample_rngs = [np.random.default_rng([settings.seed, 3, j]) for j in range(len(agents))]

    def refresh(j):
        if len(buffers[j]):
            agents[j].update(buffers[j].sample(settings.batch, sample_rngs[j]))

    def learn(j, t: Transition):
        if not settings.updates:
            buffers[j].push(t)
            return
        for _ in range(update_passes(t.next_state.delay)):
            refresh(j)
        buffers[j].push(t)
        for _ in range(update_passes(t.action.wait)):
            refresh(j)

    metrics = []
    log_rows = []
    for epoch in range(settings.epochs):
        eps = epsilon_schedule(
            epoch, settings.epochs, settings.eps_start, settings.eps_end, settings.eps_fraction
        )
        for ag in agents:
            if hasattr(ag, "epsilon"):
                ag.epsilon = eps
        res = run_episode(
            env, agents, [settings.seed, 0, epoch], settings.steps,
            learn=learn, epoch=epoch, log=log_episodes,
        )
        metrics.append({"epoch": epoch, **res.metrics})
        log_rows.extend(res.log_rows)
    return metrics, log_rows


def evaluate(
    cfg: WorldConfig,
    delay_model: DelayModel,
    agents: Sequence[AgentPolicy],
    episodes: int,
    steps: int,
    seed: int = 0,
    log_episodes: bool = False,
):
    """Greedy rollouts; returns ``{metric: (mean, std)}`` and optional step logs."""
    if episodes < 1:
        raise DomainError(f"episodes must be >= 1, got {episodes}")
    env = AoIMDPEnv(cfg, delay_model)
    per_ep = []
    log_rows = []
    for e in range(episodes):
        res = run_episode(env, agents, [seed, 1, e], steps, greedy=True, epoch=e, log=log_episodes)
        per_ep.append(res.metrics)
        log_rows.extend(res.log_rows)
    summary = {}
    for m in METRICS:
        vals = np.array([r[m] for r in per_ep])
        summary[m] = (float(vals.mean()), float(vals.std()))
    return summary, log_rows


def delay_edges_for(cfg: WorldConfig, model: DelayModel, n_bins: int, seed=0) -> np.ndarray:
    """Quantile bin edges for the delay feature, estimated by sampling the model.

    For geometry-driven models distances come from uniformly placed AUVs and nodes.
    """
    size = np.array([cfg.width, cfg.height])

    def distance(rng):
        auv = rng.uniform(0, 1, 2) * size
        nodes = rng.uniform(0, 1, (cfg.num_nodes, 2)) * size
        return float(np.min(np.linalg.norm(nodes - auv, axis=1)))

    rng = np.random.default_rng([seed, 4])
    return empirical_quantile_edges(model, n_bins, rng, distance_sampler=distance)


def format_pm(mean: float, std: float) -> str:
    return f"{mean:.2f}±{std:.2f}"
