"""Delay-aware multi-AUV data collection environment.

The world is a rectangular arena with sensor nodes holding data buffers and
AUVs that move, harvest data over an acoustic link, and spend energy.  Two
views of the same world are provided:

``StandardMDPEnv``
    Every step the agent sees the current world and acts immediately.

``AoIMDPEnv``
    Each agent has its own clock.  A step lasts ``wait + step_s`` seconds.  At
    the end of a step a new observation is generated if the previous one has
    already been delivered (one observation in flight per agent); it reaches
    the agent after a delay drawn from the delay model.  Agents always act on
    the most recently delivered observation, whose delay is part of the state.
    The reward vector gains a final component equal to minus the agent's
    time-averaged age of information.

Observation layout for agent ``j`` (positions scaled by the arena size,
buffers by the initial buffer, energy by the initial energy)::

    [own x, own y,
     x, y of every other AUV in index order,
     x, y of every node,
     buffer fraction of every node,
     own energy fraction]
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .aoi_core import AgeTracker, AoIProcess
from .delay_models import DelayModel
from .errors import ConfigError, DomainError, StateError

log = logging.getLogger(__name__)

TASK_COMPONENTS = ("data_rate", "energy", "collision", "boundary")
COMPONENTS = TASK_COMPONENTS + ("aoi",)
AOI_REWARD_MODES = ("episode", "interval")


@dataclass(frozen=True)
class WorldConfig:
    width: float = 100.0
    height: float = 100.0
    num_auvs: int = 2
    num_nodes: int = 5
    step_s: float = 1.0
    horizon: int = 100
    z_max: float = 5.0
    max_speed: float = 5.0
    energy_init: float = 5000.0
    move_coef: float = 1.0
    hover_power: float = 2.0
    tx_power: float = 5.0
    bandwidth: float = 5000.0
    snr0: float = 1e4
    rate_floor: float = 1.0
    comm_range: float = 20.0
    node_buffer: float = 1e5
    collision_radius: float = 2.0
    data_scale: float = 1e4
    energy_scale: float = 10.0
    aoi_reward: str = "episode"
    weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        bad = []
        positive = (
            "width height step_s max_speed energy_init bandwidth snr0 "
            "rate_floor comm_range node_buffer data_scale energy_scale"
        ).split()
        for name in positive:
            if not getattr(self, name) > 0:
                bad.append(f"env.{name}={getattr(self, name)!r} (must be > 0)")
        for name in ("move_coef", "hover_power", "tx_power", "collision_radius", "z_max"):
            if not getattr(self, name) >= 0:
                bad.append(f"env.{name}={getattr(self, name)!r} (must be >= 0)")
        for name in ("num_auvs", "num_nodes", "horizon"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                bad.append(f"env.{name}={v!r} (must be an integer >= 1)")
        if self.aoi_reward not in AOI_REWARD_MODES:
            bad.append(f"env.aoi_reward={self.aoi_reward!r} (one of {AOI_REWARD_MODES})")
        if len(self.weights) != len(COMPONENTS):
            bad.append(f"env.weights has {len(self.weights)} entries (need {len(COMPONENTS)})")
        elif any(w < 0 for w in self.weights) or not any(w > 0 for w in self.weights):
            bad.append("env.weights must be nonnegative with at least one > 0")
        if bad:
            raise ConfigError("invalid world config: " + "; ".join(bad))

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def replace(self, **changes) -> "WorldConfig":
        d = asdict(self)
        d.update(changes)
        return WorldConfig(**d)


@dataclass(frozen=True)
class ObservationLayout:
    num_auvs: int
    num_nodes: int

    @property
    def size(self) -> int:
        return 2 + 2 * (self.num_auvs - 1) + 3 * self.num_nodes + 1

    @property
    def own(self) -> slice:
        return slice(0, 2)

    @property
    def others(self) -> slice:
        return slice(2, 2 + 2 * (self.num_auvs - 1))

    @property
    def nodes(self) -> slice:
        start = 2 + 2 * (self.num_auvs - 1)
        return slice(start, start + 2 * self.num_nodes)

    @property
    def buffers(self) -> slice:
        start = self.nodes.stop
        return slice(start, start + self.num_nodes)

    @property
    def energy(self) -> int:
        return self.size - 1


@dataclass(frozen=True)
class AugmentedState:
    observation: np.ndarray
    delay: float

    def __post_init__(self):
        if not self.delay >= 0:
            raise DomainError(f"delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class AugmentedAction:
    heading: float
    speed: float
    wait: float = 0.0

    @property
    def task_action(self) -> np.ndarray:
        return np.array([self.heading, self.speed])


@dataclass(frozen=True)
class RewardVector:
    components: tuple[float, ...]
    names: tuple[str, ...] = COMPONENTS

    def __post_init__(self):
        if len(self.components) != len(self.names):
            raise DomainError("component/name arity mismatch")

    def __getitem__(self, name: str) -> float:
        return self.components[self.names.index(name)]


def total_reward(r: RewardVector | Sequence[float], w: Sequence[float]) -> float:
    comps = r.components if isinstance(r, RewardVector) else tuple(r)
    if len(comps) != len(w):
        raise DomainError(f"reward has {len(comps)} components but {len(w)} weights")
    return float(sum(wk * rk for wk, rk in zip(w, comps)))


def link_rate(distance, cfg: WorldConfig):
    """Achievable bit rate at ``distance`` metres."""
    d2 = np.square(distance)
    return cfg.bandwidth * np.log2(1.0 + cfg.snr0 / (d2 + cfg.rate_floor))


@dataclass
class StepOutcome:
    task_rewards: list[tuple[float, ...]]
    collected_bits: np.ndarray
    energy_used: np.ndarray
    clamped: list[int] = field(default_factory=list)


class DataCollectionWorld:
    """Physical state shared by both MDP views.  Not thread-safe."""

    def __init__(self, cfg: WorldConfig):
        self.cfg = cfg
        self.layout = ObservationLayout(cfg.num_auvs, cfg.num_nodes)
        self.auv_pos = np.zeros((cfg.num_auvs, 2))
        self.node_pos = np.zeros((cfg.num_nodes, 2))
        self.energy = np.zeros(cfg.num_auvs)
        self.buffers = np.zeros(cfg.num_nodes)
        self.collected_total = 0.0

    def place(self, rng, auv_positions=None, node_positions=None):
        cfg = self.cfg
        size = np.array([cfg.width, cfg.height])
        # draw both sets unconditionally so overrides do not shift the stream
        auv = rng.uniform(0, 1, (cfg.num_auvs, 2)) * size
        nodes = rng.uniform(0, 1, (cfg.num_nodes, 2)) * size
        if auv_positions is not None:
            auv = self._checked_positions(auv_positions, cfg.num_auvs, "auv_positions")
        if node_positions is not None:
            nodes = self._checked_positions(node_positions, cfg.num_nodes, "node_positions")
        self.auv_pos = auv
        self.node_pos = nodes
        self.energy = np.full(cfg.num_auvs, cfg.energy_init, dtype=float)
        self.buffers = np.full(cfg.num_nodes, cfg.node_buffer, dtype=float)
        self.collected_total = 0.0

    def _checked_positions(self, pos, n, name):
        pos = np.array(pos, dtype=float)
        if pos.shape != (n, 2):
            raise ConfigError(f"{name} must have shape ({n}, 2), got {pos.shape}")
        if np.any(pos < 0) or np.any(pos[:, 0] > self.cfg.width) or np.any(pos[:, 1] > self.cfg.height):
            raise ConfigError(f"{name} must lie inside the arena")
        return pos

    def observe(self, j: int) -> np.ndarray:
        cfg = self.cfg
        scale = np.array([cfg.width, cfg.height])
        others = np.delete(self.auv_pos, j, axis=0)
        return np.concatenate(
            [
                self.auv_pos[j] / scale,
                (others / scale).ravel(),
                (self.node_pos / scale).ravel(),
                self.buffers / cfg.node_buffer,
                [self.energy[j] / cfg.energy_init],
            ]
        )

    def nearest_node_distance(self, j: int) -> float:
        return float(np.min(np.linalg.norm(self.node_pos - self.auv_pos[j], axis=1)))

    def advance(self, headings, speeds, waits) -> StepOutcome:
        """Move, harvest and pay energy for one step of ``step_s`` seconds.

        Waiting costs hover power for the wait duration.
        """
        cfg = self.cfg
        n = cfg.num_auvs
        dt = cfg.step_s
        alive = self.energy > 0
        speeds = np.where(alive, speeds, 0.0)
        target = self.auv_pos + (speeds * dt)[:, None] * np.column_stack(
            [np.cos(headings), np.sin(headings)]
        )
        clipped = np.clip(target, 0.0, [cfg.width, cfg.height])
        hit_wall = np.any(clipped != target, axis=1)
        self.auv_pos = clipped

        collected = np.zeros(n)
        tx_time = np.zeros(n)
        for j in range(n):
            if not alive[j]:
                continue
            dist = np.linalg.norm(self.node_pos - self.auv_pos[j], axis=1)
            for k in np.flatnonzero(dist <= cfg.comm_range):
                if self.buffers[k] <= 0:
                    continue
                bits = min(float(link_rate(dist[k], cfg)) * dt, self.buffers[k])
                self.buffers[k] -= bits
                collected[j] += bits
                tx_time[j] = dt
        self.collected_total += float(collected.sum())

        cost = cfg.move_coef * speeds**2 * dt + cfg.hover_power * waits + cfg.tx_power * tx_time
        used = np.minimum(cost, self.energy)
        self.energy = self.energy - used

        gap = np.linalg.norm(self.auv_pos[:, None, :] - self.auv_pos[None, :, :], axis=2)
        np.fill_diagonal(gap, np.inf)
        collisions = np.sum(gap < 2 * cfg.collision_radius, axis=1)

        rewards = [
            (
                collected[j] / cfg.data_scale,
                -used[j] / cfg.energy_scale,
                -float(collisions[j]),
                -1.0 if hit_wall[j] else 0.0,
            )
            for j in range(n)
        ]
        return StepOutcome(rewards, collected, used)

    def exhausted(self) -> bool:
        return bool(np.all(self.buffers <= 0) or np.any(self.energy <= 0))


def _clamp_actions(actions, cfg: WorldConfig, allow_wait: bool):
    if len(actions) != cfg.num_auvs:
        raise DomainError(f"expected {cfg.num_auvs} actions, got {len(actions)}")
    headings = np.empty(cfg.num_auvs)
    speeds = np.empty(cfg.num_auvs)
    waits = np.zeros(cfg.num_auvs)
    clamped = []
    for j, a in enumerate(actions):
        h, v = float(a.heading), float(a.speed)
        z = float(getattr(a, "wait", 0.0))
        if not all(map(math.isfinite, (h, v, z))):
            raise DomainError(f"agent {j}: non-finite action {a}")
        hc = h % (2 * math.pi)
        vc = min(max(v, 0.0), cfg.max_speed)
        zc = min(max(z, 0.0), cfg.z_max) if allow_wait else 0.0
        if vc != v or zc != z or not 0 <= h < 2 * math.pi:
            clamped.append(j)
        headings[j], speeds[j], waits[j] = hc, vc, zc
    if clamped:
        log.debug("clamped out-of-bounds actions for agents %s", clamped)
    return headings, speeds, waits, clamped


class StandardMDPEnv:
    """Delay-free reference view: fresh observation every step, no waiting."""

    def __init__(self, cfg: WorldConfig):
        self.cfg = cfg
        self.world = DataCollectionWorld(cfg)
        self.steps = 0
        self.done = True

    def reset(self, seed, auv_positions=None, node_positions=None) -> list[np.ndarray]:
        world_ss = np.random.SeedSequence(seed).spawn(1)[0]
        self.world.place(np.random.default_rng(world_ss), auv_positions, node_positions)
        self.steps = 0
        self.done = False
        return [self.world.observe(j) for j in range(self.cfg.num_auvs)]

    def step(self, actions):
        if self.done:
            raise StateError("step called on a finished episode; call reset")
        h, v, z, clamped = _clamp_actions(actions, self.cfg, allow_wait=False)
        out = self.world.advance(h, v, z)
        self.steps += 1
        self.done = self.steps >= self.cfg.horizon or self.world.exhausted()
        obs = [self.world.observe(j) for j in range(self.cfg.num_auvs)]
        return obs, out.task_rewards, self.done, {"clamped": clamped, "outcome": out}


@dataclass
class _AgentClock:
    clock: float
    tracker: AgeTracker
    updates: list
    pending: tuple | None  # (gen_time, recv_time, observation, delay)
    state: AugmentedState


class AoIMDPEnv:
    """Delay- and wait-augmented view of :class:`DataCollectionWorld`."""

    def __init__(self, cfg: WorldConfig, delay_model: DelayModel):
        if delay_model.needs_distance and delay_model.params["max_range"] < cfg.diagonal:
            raise ConfigError(
                f"delay.max_range={delay_model.params['max_range']} is shorter than the "
                f"arena diagonal {cfg.diagonal:.3f}"
            )
        self.cfg = cfg
        self.delay_model = delay_model
        self.world = DataCollectionWorld(cfg)
        self.layout = self.world.layout
        self.steps = 0
        self.done = True
        self._agents: list[_AgentClock] = []
        self._delay_rngs: list[np.random.Generator] = []

    # ------------------------------------------------------------------

    def _draw_delay(self, j: int) -> float:
        dist = self.world.nearest_node_distance(j) if self.delay_model.needs_distance else None
        y = self.delay_model.sample(self._delay_rngs[j], dist)
        if not y >= 0:
            raise StateError(f"delay model produced {y}")
        return y

    def _emit(self, j: int, t: float):
        """Generate an observation at ``t``; deliver it at once if its delay is zero."""
        ag = self._agents[j]
        y = self._draw_delay(j)
        ag.pending = (t, t + y, self.world.observe(j), y)
        self._deliver_due(j)

    def _deliver_due(self, j: int):
        ag = self._agents[j]
        if ag.pending is None or ag.pending[1] > ag.clock:
            return
        gen, recv, obs, y = ag.pending
        ag.pending = None
        ag.tracker.receive(gen, recv)
        if ag.updates and ag.updates[-1][1] == recv:
            ag.updates[-1] = (gen, recv)
        else:
            ag.updates.append((gen, recv))
        ag.state = AugmentedState(obs, y)

    # ------------------------------------------------------------------

    def reset(self, seed, auv_positions=None, node_positions=None) -> list[AugmentedState]:
        """Place the world and emit each agent's first observation at time 0.

        The first observation is handed to the agent at reset even if its
        delivery lies in the future, so there is always a state to act on.
        """
        cfg = self.cfg
        world_ss, *delay_ss = np.random.SeedSequence(seed).spawn(1 + cfg.num_auvs)
        self.world.place(np.random.default_rng(world_ss), auv_positions, node_positions)
        self._delay_rngs = [np.random.default_rng(s) for s in delay_ss]
        self._agents = []
        for j in range(cfg.num_auvs):
            ag = _AgentClock(0.0, AgeTracker(0.0), [], None, None)
            self._agents.append(ag)
            self._emit(j, 0.0)
            if ag.state is None:
                _, _, obs, y = ag.pending
                ag.state = AugmentedState(obs, y)
        self.steps = 0
        self.done = False
        return [ag.state for ag in self._agents]

    def step(self, actions: Sequence[AugmentedAction]):
        """Advance every agent by one decision epoch.

        Returns ``(states, rewards, done, info)`` with one ``AugmentedState`` and
        one ``RewardVector`` per agent.
        """
        if self.done:
            raise StateError("step called on a finished episode; call reset")
        cfg = self.cfg
        h, v, z, clamped = _clamp_actions(actions, cfg, allow_wait=True)
        out = self.world.advance(h, v, z)
        rewards = []
        for j, ag in enumerate(self._agents):
            t0 = ag.clock
            area0 = ag.tracker.area(t0)
            avg0 = ag.tracker.average(t0)
            ag.clock += z[j] + cfg.step_s
            self._deliver_due(j)
            if ag.pending is None:
                self._emit(j, ag.clock)
            if cfg.aoi_reward == "episode":
                aoi = -self.running_time_avg_aoi(j)
            else:
                # age area of this step in excess of the running average
                aoi = -(ag.tracker.area(ag.clock) - area0 - avg0 * (ag.clock - t0))
            rewards.append(RewardVector(out.task_rewards[j] + (aoi,)))
        self.steps += 1
        self.done = self.steps >= cfg.horizon or self.world.exhausted()
        info = {"clamped": clamped, "outcome": out}
        return [ag.state for ag in self._agents], rewards, self.done, info

    # ------------------------------------------------------------------

    def running_time_avg_aoi(self, j: int) -> float:
        ag = self._agents[j]
        return ag.tracker.average(ag.clock)

    def instantaneous_aoi(self, j: int) -> float:
        ag = self._agents[j]
        return ag.tracker.age(ag.clock)

    def clock(self, j: int) -> float:
        return self._agents[j].clock

    def aoi_process(self, j: int) -> AoIProcess:
        return AoIProcess(0.0, tuple(self._agents[j].updates))

    @property
    def weights(self) -> tuple[float, ...]:
        return self.cfg.weights
