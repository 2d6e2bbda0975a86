"""Slotted collision channel shared by blind and learning devices.

One packet at most is delivered per slot: a transmission is decoded only when
its sender was alone on the air, and even then only with that device's success
probability.  The access point answers every slot with nothing, an ACK naming
the decoded device, or a NACK, from which each device reconstructs its own
channel observation for the next slot.

Within a slot the order is fixed: devices act on their current queue and the
previous observation, the channel resolves, then every queue closes out the
slot (delivery, expiry, shift, new arrivals).  A packet arriving in slot t is
therefore transmittable from slot t on and is dropped at the end of slot
t+D-1.

Randomness discipline: the scenario seed feeds one SeedSequence that is split
into named substreams in a fixed, documented order -- one arrival stream per
device, one channel stream, then one policy stream per device.  Every stream
is private to its purpose, so runs are reproducible bit for bit and adding
consumers of one stream never perturbs the others.  The channel stream
consumes exactly one uniform per slot whether or not anyone transmitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dcra.agents import (
    LearnerConfig,
    RewardSpec,
    StateKind,
    TabularLearner,
)
from dcra.core import (
    Action,
    ApFeedback,
    ArrivalKind,
    ChannelObservation,
    DeviceParams,
    LeadTimeQueue,
)

__all__ = [
    "AgentSpec",
    "DeviceSetup",
    "Metrics",
    "RunResult",
    "ScenarioConfig",
    "SlotRecord",
    "UniformStream",
    "resolve_slot",
    "run",
    "write_trace_csv",
]

LEARNER_KINDS = {
    "q-full": ("q", StateKind.FULL),
    "q-hol": ("q", StateKind.HOL),
    "q-tiny": ("q", StateKind.TINY),
    "r-full": ("r", StateKind.FULL),
    "r-hol": ("r", StateKind.HOL),
    "r-tiny": ("r", StateKind.TINY),
}


class UniformStream:
    """Block-buffered scalar uniforms over one PCG64 generator.

    Consuming through .random() yields the same sequence as the underlying
    generator would produce; buffering only amortises the per-call overhead
    in the slot loop.
    """

    __slots__ = ("_gen", "_buf", "_pos", "_block")

    def __init__(self, seed, block: int = 8192) -> None:
        self._gen = np.random.default_rng(seed)
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        pos = self._pos
        if pos >= len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            pos = 0
        self._pos = pos + 1
        return self._buf[pos]


@dataclass(frozen=True)
class AgentSpec:
    """Declarative description of one device's transmission policy.

    kind "blind" retransmits the head-of-line packet with a fixed probability
    (taken from transmit_prob, else from the device params).  The learner
    kinds combine an algorithm with a queue abstraction: q-full, r-full,
    r-hol, r-tiny and the remaining crossings.
    """

    kind: str = "blind"
    transmit_prob: float | None = None
    reward: RewardSpec = RewardSpec()
    reward_timing: str = "outcome"

    def __post_init__(self) -> None:
        if self.kind != "blind" and self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if self.transmit_prob is not None:
            if self.kind != "blind":
                raise ValueError("transmit_prob only applies to blind agents")
            if not 0.0 <= self.transmit_prob <= 1.0:
                raise ValueError(f"transmit_prob {self.transmit_prob} outside [0, 1]")

    @property
    def is_learner(self) -> bool:
        return self.kind != "blind"

    @classmethod
    def blind(cls, transmit_prob: float | None = None) -> "AgentSpec":
        return cls("blind", transmit_prob)

    @classmethod
    def learner(cls, kind: str, reward: RewardSpec | None = None,
                reward_timing: str = "outcome") -> "AgentSpec":
        return cls(kind, None, reward if reward is not None else RewardSpec(), reward_timing)

    def learner_config(self) -> LearnerConfig:
        algorithm, state_kind = LEARNER_KINDS[self.kind]
        return LearnerConfig(
            algorithm=algorithm,
            state_kind=state_kind,
            reward=self.reward,
            reward_timing=self.reward_timing,
        )


@dataclass(frozen=True)
class DeviceSetup:
    params: DeviceParams
    agent: AgentSpec = AgentSpec()

    def blind_transmit_prob(self) -> float:
        if self.agent.transmit_prob is not None:
            return self.agent.transmit_prob
        if self.params.transmit_prob is not None:
            return self.params.transmit_prob
        raise ValueError("blind device needs a transmit probability")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that determines a run: devices, deadline, horizon, seed."""

    lifetime: int
    horizon: int
    seed: int | tuple[int, ...]
    devices: tuple[DeviceSetup, ...]

    def __post_init__(self) -> None:
        if self.lifetime < 1:
            raise ValueError(f"packet lifetime must be >= 1, got {self.lifetime}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not self.devices:
            raise ValueError("scenario needs at least one device")
        for dev in self.devices:
            if not dev.agent.is_learner:
                dev.blind_transmit_prob()  # raises if unset


@dataclass(frozen=True)
class SlotRecord:
    """One traced slot; observations are the ones issued for the next slot."""

    slot: int
    sent: tuple[bool, ...]
    feedback: ApFeedback
    winner: int | None
    observations: tuple[int, ...]
    arrivals: tuple[int, ...]
    expired: tuple[int, ...]
    backlog: tuple[int, ...]
    deliveries_cum: int
    transmissions_cum: int


@dataclass
class Metrics:
    """Per-slot delivery and transmission tallies for a finished run."""

    delivered: np.ndarray
    senders: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.delivered)

    def _window(self, window: int | None) -> int:
        if window is None:
            return self.horizon
        if not 1 <= window <= self.horizon:
            raise ValueError(f"window {window} outside [1, {self.horizon}]")
        return window

    def timely_throughput(self, window: int | None = None) -> float:
        """Delivered packets per slot over the last `window` slots."""
        w = self._window(window)
        return float(self.delivered[self.horizon - w:].sum()) / w

    def power(self, window: int | None = None) -> float:
        """Average number of transmitting devices per slot over the window."""
        w = self._window(window)
        return float(self.senders[self.horizon - w:].sum()) / w

    def throughput_series(self, window: int = 2000) -> np.ndarray:
        """Throughput per consecutive window, one value per complete window."""
        w = self._window(window)
        n = self.horizon // w
        return self.delivered[: n * w].reshape(n, w).mean(axis=1)


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: Metrics
    learners: tuple[TabularLearner | None, ...]
    trace: list[SlotRecord] | None = None


def resolve_slot(sent: list[bool], success_probs: list[float],
                 channel_u: float) -> tuple[ApFeedback, int | None, list[ChannelObservation]]:
    """Reference resolution of one slot.

    A lone sender is decoded when channel_u falls under its success
    probability; two or more senders always collide.  Observations follow the
    feedback: silence reads IDLE everywhere, an ACK reads SUCCESSFUL at the
    decoded device and BUSY elsewhere, a NACK reads FAILED everywhere.
    channel_u is examined only in the lone-sender case.
    """
    senders = [i for i, s in enumerate(sent) if s]
    n = len(sent)
    if not senders:
        return ApFeedback.NOTHING, None, [ChannelObservation.IDLE] * n
    if len(senders) == 1 and channel_u < success_probs[senders[0]]:
        winner = senders[0]
        obs = [ChannelObservation.BUSY] * n
        obs[winner] = ChannelObservation.SUCCESSFUL
        return ApFeedback.ACK, winner, obs
    return ApFeedback.NACK, None, [ChannelObservation.FAILED] * n


def _encoder(kind: StateKind):
    """Loop-friendly twin of agents.encode_state working on raw count lists."""
    if kind is StateKind.FULL:
        def enc(counts: list[int], obs: int) -> int:
            mask = 0
            for k, c in enumerate(counts):
                if c:
                    mask |= 1 << k
            return (mask << 2) | obs
    elif kind is StateKind.HOL:
        def enc(counts: list[int], obs: int) -> int:
            for k, c in enumerate(counts):
                if c:
                    return ((k + 1) << 2) | obs
            return obs
    else:
        def enc(counts: list[int], obs: int) -> int:
            return ((1 if counts[0] else 0) << 2) | obs
    return enc


def run(config: ScenarioConfig, trace: bool = False) -> RunResult:
    """Simulate the scenario across its full horizon.

    Slot 1 starts with empty queues and an IDLE observation everywhere.
    Learners update once per slot on (s_t, a_t, r, s_{t+1}); the reward sees
    the physical action, so a TRANSMIT chosen on an empty queue scores as the
    WAIT it actually was.
    """
    devices = config.devices
    n = len(devices)
    horizon = config.horizon

    seed_seq = np.random.SeedSequence(config.seed)
    children = seed_seq.spawn(2 * n + 1)
    channel = UniformStream(children[n])

    arrival_streams: list = []
    bernoulli_rate: list[float | None] = []
    for i, dev in enumerate(devices):
        if dev.params.arrival_kind is ArrivalKind.BERNOULLI:
            arrival_streams.append(UniformStream(children[i]))
            bernoulli_rate.append(dev.params.arrival_rate)
        else:
            arrival_streams.append(np.random.default_rng(children[i]))
            bernoulli_rate.append(None)

    success_probs = [dev.params.success_prob for dev in devices]
    queues = [LeadTimeQueue.empty(config.lifetime) for _ in range(n)]
    counts = [q.counts for q in queues]
    totals = [0] * n
    obs = [0] * n  # ChannelObservation codes, IDLE at slot 1

    learners: list[TabularLearner | None] = []
    blind_prob: list[float] = []
    reward_fns: list = []
    outcome_timing: list[bool] = []
    encoders: list = []
    states: list[int] = []
    policy: list[UniformStream] = []
    for i, dev in enumerate(devices):
        stream = UniformStream(children[n + 1 + i])
        policy.append(stream)
        if dev.agent.is_learner:
            learner = TabularLearner(dev.agent.learner_config(), config.lifetime, stream)
            learners.append(learner)
            blind_prob.append(0.0)
            reward_fns.append(dev.agent.reward.as_function())
            outcome_timing.append(dev.agent.reward_timing == "outcome")
            enc = _encoder(dev.agent.learner_config().state_kind)
            encoders.append(enc)
            states.append(enc(counts[i], 0))
        else:
            learners.append(None)
            blind_prob.append(dev.blind_transmit_prob())
            reward_fns.append(None)
            outcome_timing.append(True)
            encoders.append(None)
            states.append(0)

    delivered_arr = np.zeros(horizon, dtype=np.uint8)
    senders_arr = np.zeros(horizon, dtype=np.int16)
    records: list[SlotRecord] | None = [] if trace else None
    deliveries_cum = 0
    transmissions_cum = 0

    sent = [False] * n
    actions = [0] * n
    idx = list(range(n))

    for t in range(horizon):
        n_send = 0
        lone = -1
        for i in idx:
            learner = learners[i]
            if learner is None:
                if totals[i] and policy[i].random() < blind_prob[i]:
                    sent[i] = True
                    n_send += 1
                    lone = i
                else:
                    sent[i] = False
            else:
                a = learner.select(states[i])
                actions[i] = a
                if a and totals[i]:
                    sent[i] = True
                    n_send += 1
                    lone = i
                else:
                    sent[i] = False

        u = channel.random()
        if n_send == 0:
            mode = 0  # idle everywhere
            winner = -1
        elif n_send == 1 and u < success_probs[lone]:
            mode = 1  # decoded
            winner = lone
        else:
            mode = 2  # collision or channel loss
            winner = -1

        slot_arrivals = None
        slot_expired = None
        if records is not None:
            slot_arrivals = [0] * n
            slot_expired = [0] * n

        for i in idx:
            rate = bernoulli_rate[i]
            if rate is None:
                arrivals = int(arrival_streams[i].poisson(devices[i].params.arrival_rate))
            else:
                arrivals = 1 if arrival_streams[i].random() < rate else 0
            if mode == 0:
                o2 = 0
            elif mode == 2:
                o2 = 3
            else:
                o2 = 2 if i == winner else 1
            learner = learners[i]
            if learner is None:
                expired = queues[i].advance(i == winner, arrivals)
            else:
                urgent = counts[i][0] > 0
                expired = queues[i].advance(i == winner, arrivals)
                next_state = encoders[i](counts[i], o2)
                reward = reward_fns[i](
                    o2 if outcome_timing[i] else obs[i],
                    1 if sent[i] else 0,
                    urgent,
                )
                learner.update(states[i], actions[i], reward, next_state)
                states[i] = next_state
            totals[i] += arrivals - (1 if i == winner else 0) - expired
            obs[i] = o2
            if records is not None:
                slot_arrivals[i] = arrivals
                slot_expired[i] = expired

        if mode == 1:
            delivered_arr[t] = 1
            deliveries_cum += 1
        senders_arr[t] = n_send
        transmissions_cum += n_send

        if records is not None:
            records.append(SlotRecord(
                slot=t + 1,
                sent=tuple(sent),
                feedback=(ApFeedback.NOTHING, ApFeedback.ACK, ApFeedback.NACK)[mode],
                winner=winner if winner >= 0 else None,
                observations=tuple(obs),
                arrivals=tuple(slot_arrivals),
                expired=tuple(slot_expired),
                backlog=tuple(totals),
                deliveries_cum=deliveries_cum,
                transmissions_cum=transmissions_cum,
            ))

    return RunResult(
        config=config,
        metrics=Metrics(delivered=delivered_arr, senders=senders_arr),
        learners=tuple(learners),
        trace=records,
    )


def write_trace_csv(result: RunResult, path: str) -> None:
    """Dump a traced run, one row per slot, stable formatting for diffing."""
    if result.trace is None:
        raise ValueError("run was not traced; pass trace=True to run()")
    n = len(result.config.devices)
    header = ["slot"]
    header += [f"act_{i}" for i in range(n)]
    header += ["feedback", "winner"]
    header += [f"obs_{i}" for i in range(n)]
    header += ["deliveries_cum", "transmissions_cum"]
    header += [f"arrivals_{i}" for i in range(n)]
    header += [f"expired_{i}" for i in range(n)]
    header += [f"backlog_{i}" for i in range(n)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for rec in result.trace:
            row = [str(rec.slot)]
            row += [Action(int(s)).name for s in rec.sent]
            row += [rec.feedback.name, "" if rec.winner is None else str(rec.winner)]
            row += [ChannelObservation(o).name for o in rec.observations]
            row += [str(rec.deliveries_cum), str(rec.transmissions_cum)]
            row += [str(a) for a in rec.arrivals]
            row += [str(e) for e in rec.expired]
            row += [str(b) for b in rec.backlog]
            fh.write(",".join(row) + "\n")
