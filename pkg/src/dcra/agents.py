"""Transmission policies: blind retransmission and tabular learners.

A learner sees its own queue (through one of three abstractions) plus the last
channel observation, and picks WAIT or TRANSMIT each slot.  Rewards are
derived from access-point feedback only, so the same agent code runs with any
number of competing devices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from dcra.core import Action, ChannelObservation, LeadTimeQueue

__all__ = [
    "LearnerConfig",
    "RewardKind",
    "RewardSpec",
    "StateKind",
    "TabularLearner",
    "blind_transmit",
    "encode_state",
    "epsilon_at",
    "policy_rows",
    "reward_value",
    "state_payload",
    "state_space_size",
    "write_policy_csv",
]

N_OBS = 4  # ChannelObservation cardinality


class StateKind(enum.Enum):
    """How much of its own queue a learner gets to see.

    FULL  entire occupancy bitmask, 2^D * 4 states
    HOL   head-of-line lead time only, (D+1) * 4 states
    TINY  a single urgency bit, 2 * 4 states
    """

    FULL = "full"
    HOL = "hol"
    TINY = "tiny"


def state_space_size(kind: StateKind, lifetime: int) -> int:
    if lifetime < 1:
        raise ValueError(f"packet lifetime must be >= 1, got {lifetime}")
    if kind is StateKind.FULL:
        return (1 << lifetime) * N_OBS
    if kind is StateKind.HOL:
        return (lifetime + 1) * N_OBS
    return 2 * N_OBS


def encode_state(kind: StateKind, queue: LeadTimeQueue, obs: int) -> int:
    """Flat state index; the observation is the minor axis throughout."""
    if kind is StateKind.FULL:
        return queue.occupancy_mask() * N_OBS + obs
    if kind is StateKind.HOL:
        return queue.hol_lead_time() * N_OBS + obs
    return (1 if queue.counts[0] else 0) * N_OBS + obs


class RewardKind(enum.Enum):
    TWO_LEVEL = "two-level"
    TWO_LEVEL_SHIFTED = "two-level-shifted"
    MULTI_LEVEL = "multi-level"


@dataclass(frozen=True)
class RewardSpec:
    """Reward computed from (observation, last physical action, last urgency).

    TWO_LEVEL pays 1 whenever the slot carried a delivery for anyone (own
    SUCCESSFUL or overheard BUSY) and 0 otherwise.  TWO_LEVEL_SHIFTED
    subtracts a constant from every payout, which breaks the optimistic tie
    between acting and idling for discounted learners.  MULTI_LEVEL grades the
    (observation, action) pairs separately and punishes sitting on a packet
    that is about to expire.
    """

    kind: RewardKind = RewardKind.TWO_LEVEL
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is RewardKind.TWO_LEVEL_SHIFTED:
            if not 0.0 <= self.shift <= 1.0:
                raise ValueError(f"shift {self.shift} outside [0, 1]")
        elif self.shift:
            raise ValueError(f"shift only applies to {RewardKind.TWO_LEVEL_SHIFTED}")

    @classmethod
    def two_level(cls) -> "RewardSpec":
        return cls(RewardKind.TWO_LEVEL)

    @classmethod
    def two_level_shifted(cls, shift: float) -> "RewardSpec":
        return cls(RewardKind.TWO_LEVEL_SHIFTED, shift)

    @classmethod
    def multi_level(cls) -> "RewardSpec":
        return cls(RewardKind.MULTI_LEVEL)

    @classmethod
    def parse(cls, text: str) -> "RewardSpec":
        """Parse "two-level", "two-level-shifted:<c>" or "multi-level"."""
        if text == "two-level":
            return cls.two_level()
        if text == "multi-level":
            return cls.multi_level()
        if text.startswith("two-level-shifted:"):
            return cls.two_level_shifted(float(text.split(":", 1)[1]))
        raise ValueError(f"unknown reward spec {text!r}")

    def as_function(self):
        """Plain-int fast path of reward_value for the per-slot loop."""
        if self.kind is RewardKind.TWO_LEVEL:
            return lambda obs, action, urgent: 1.0 if obs == 1 or obs == 2 else 0.0
        if self.kind is RewardKind.TWO_LEVEL_SHIFTED:
            shift = self.shift
            return lambda obs, action, urgent: (1.0 if obs == 1 or obs == 2 else 0.0) - shift

        def multi_level(obs: int, action: int, urgent: bool) -> float:
            if obs == 3:
                return -5.0 if action else 2.0
            if obs == 0:
                if action:
                    raise ValueError("a sender cannot observe IDLE")
                return -3.0 if urgent else 2.0
            if obs == 1 and action:
                raise ValueError("a sender cannot observe BUSY")
            if obs == 2 and not action:
                raise ValueError("only a sender can observe SUCCESSFUL")
            return 10.0

        return multi_level


def reward_value(spec: RewardSpec, obs: int, action: int, urgent: bool) -> float:
    """Reward for the slot whose outcome was `obs`.

    `action` is the physical action in that slot (a TRANSMIT chosen on an
    empty queue puts nothing on the air and counts as WAIT here), `urgent`
    whether the queue held a packet due that very slot.  The engine only ever
    produces pairs that are physically possible: a sender never sees IDLE or
    BUSY, and SUCCESSFUL never reaches a non-sender.
    """
    if spec.kind is RewardKind.TWO_LEVEL:
        return 1.0 if obs in (ChannelObservation.BUSY, ChannelObservation.SUCCESSFUL) else 0.0
    if spec.kind is RewardKind.TWO_LEVEL_SHIFTED:
        base = 1.0 if obs in (ChannelObservation.BUSY, ChannelObservation.SUCCESSFUL) else 0.0
        return base - spec.shift
    if obs == ChannelObservation.IDLE:
        if action == Action.TRANSMIT:
            raise ValueError("a sender cannot observe IDLE")
        return -3.0 if urgent else 2.0
    if obs == ChannelObservation.BUSY:
        if action == Action.TRANSMIT:
            raise ValueError("a sender cannot observe BUSY")
        return 10.0
    if obs == ChannelObservation.SUCCESSFUL:
        if action == Action.WAIT:
            raise ValueError("only a sender can observe SUCCESSFUL")
        return 10.0
    return -5.0 if action == Action.TRANSMIT else 2.0


@dataclass(frozen=True)
class LearnerConfig:
    """Hyper-parameters shared by the tabular learners.

    algorithm "q" is one-step Q-learning on the discounted return; "r" is the
    average-reward variant that tracks a running gain estimate rho instead of
    discounting.  Exploration is epsilon-greedy with epsilon decaying
    geometrically from 1 to a floor.

    reward_timing "outcome" (default) scores an action with the feedback it
    produced: the update for (s_t, a_t) uses the observation that arrives at
    the start of slot t+1.  "observation" instead reads the reward off the
    observation already contained in s_t, which makes the reward independent
    of a_t; it is kept as a compatibility switch for the two-level rewards and
    rejected for the multi-level table, whose rows are keyed by the action
    that caused the feedback.
    """

    algorithm: str = "r"
    state_kind: StateKind = StateKind.TINY
    reward: RewardSpec = RewardSpec()
    step_size: float = 0.01
    gain_step_size: float = 0.01
    discount: float = 0.9
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.01
    reward_timing: str = "outcome"

    def __post_init__(self) -> None:
        if self.algorithm not in ("q", "r"):
            raise ValueError(f"algorithm must be 'q' or 'r', got {self.algorithm!r}")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step_size {self.step_size} outside (0, 1]")
        if not 0.0 < self.gain_step_size <= 1.0:
            raise ValueError(f"gain_step_size {self.gain_step_size} outside (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount {self.discount} outside [0, 1)")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError(f"epsilon_decay {self.epsilon_decay} outside (0, 1]")
        if not 0.0 <= self.epsilon_floor <= 1.0:
            raise ValueError(f"epsilon_floor {self.epsilon_floor} outside [0, 1]")
        if self.reward_timing not in ("outcome", "observation"):
            raise ValueError(f"reward_timing must be 'outcome' or 'observation'")
        if self.reward_timing == "observation" and self.reward.kind is RewardKind.MULTI_LEVEL:
            raise ValueError("observation timing is undefined for the multi-level reward")


def epsilon_at(config: LearnerConfig, step: int) -> float:
    """Exploration rate at 1-based step t: max(decay^(t-1), floor)."""
    if step < 1:
        raise ValueError(f"step is 1-based, got {step}")
    return max(config.epsilon_decay ** (step - 1), config.epsilon_floor)


class TabularLearner:
    """Flat-table epsilon-greedy learner over a fixed finite state space.

    The action-value table starts at zero and lives in a flat list indexed by
    2*state + action with WAIT at offset 0, which also fixes the tie-break:
    equal values resolve to WAIT.  One instance owns one exploration stream;
    step counting never resets, so epsilon keeps decaying across the whole
    life of the learner.
    """

    def __init__(self, config: LearnerConfig, lifetime: int, rng) -> None:
        self.config = config
        self.lifetime = lifetime
        self.n_states = state_space_size(config.state_kind, lifetime)
        self.q = [0.0] * (2 * self.n_states)
        self.rho = 0.0
        self.steps = 0
        self.rng = rng
        self._epsilon = 1.0  # decay^steps, floored lazily

    def epsilon(self) -> float:
        """Exploration rate that the next select() call will use."""
        return max(self._epsilon, self.config.epsilon_floor)

    def select(self, state: int) -> int:
        """Epsilon-greedy action; exploration draws uniformly over both."""
        self.steps += 1
        eps = self._epsilon
        floor = self.config.epsilon_floor
        if eps < floor:
            eps = floor
        else:
            self._epsilon *= self.config.epsilon_decay
        rng = self.rng
        if rng.random() < eps:
            return Action.TRANSMIT if rng.random() < 0.5 else Action.WAIT
        return self.greedy(state)

    def greedy(self, state: int) -> int:
        base = 2 * state
        return Action.TRANSMIT if self.q[base + 1] > self.q[base] else Action.WAIT

    def update(self, state: int, action: int, reward: float, next_state: int) -> None:
        """One-step bootstrap update for the transition (s, a, r, s')."""
        q = self.q
        nb = 2 * next_state
        best_next = q[nb + 1] if q[nb + 1] > q[nb] else q[nb]
        i = 2 * state + action
        cfg = self.config
        if cfg.algorithm == "q":
            q[i] += cfg.step_size * (reward + cfg.discount * best_next - q[i])
        else:
            # one error term from pre-update values drives both increments
            delta = reward + best_next - q[i] - self.rho
            q[i] += cfg.step_size * delta
            self.rho += cfg.gain_step_size * delta

    def greedy_policy(self) -> list[int]:
        """Greedy action per state, ties resolved to WAIT."""
        return [self.greedy(s) for s in range(self.n_states)]

    def q_table(self) -> np.ndarray:
        """Copy of the action values as an (n_states, 2) array."""
        return np.asarray(self.q, dtype=float).reshape(self.n_states, 2)


def blind_transmit(queue_empty: bool, transmit_prob: float, u: float) -> int:
    """Blind retransmission rule: send the head-of-line packet with fixed
    probability whenever the queue is non-empty.  `u` is a uniform draw."""
    if queue_empty:
        return Action.WAIT
    return Action.TRANSMIT if u < transmit_prob else Action.WAIT


def state_payload(kind: StateKind, lifetime: int, state: int) -> tuple[str, str]:
    """Human-readable (queue payload, observation name) for a state index.

    FULL payloads list bucket occupancy most-urgent-first ("10" is a packet
    due this slot and nothing behind it); HOL payloads are the head-of-line
    lead time; TINY payloads are the urgency bit.
    """
    payload_idx, obs = state >> 2, state & 3
    if kind is StateKind.FULL:
        payload = "".join("1" if (payload_idx >> k) & 1 else "0" for k in range(lifetime))
    else:
        payload = str(payload_idx)
    return payload, ChannelObservation(obs).name


def policy_rows(learner: TabularLearner) -> list[tuple[str, str, str, str, float, float]]:
    """One row per state in index order: abstraction, payload, observation,
    greedy action, and both action values."""
    kind = learner.config.state_kind
    rows = []
    for s in range(learner.n_states):
        payload, obs_name = state_payload(kind, learner.lifetime, s)
        rows.append((
            kind.value,
            payload,
            obs_name,
            Action(learner.greedy(s)).name,
            learner.q[2 * s],
            learner.q[2 * s + 1],
        ))
    return rows


def write_policy_csv(learner: TabularLearner, path: str) -> None:
    """Dump the greedy policy and action values.

    The first line is a comment carrying the average-reward estimate
    ("# rho=<value>", empty for discounted learners); then one CSV row per
    state in index order.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        rho = repr(learner.rho) if learner.config.algorithm == "r" else ""
        fh.write(f"# rho={rho}\n")
        fh.write("abstraction,payload,observation,action,q_wait,q_transmit\n")
        for abstraction, payload, obs, action, qw, qt in policy_rows(learner):
            fh.write(f"{abstraction},{payload},{obs},{action},{qw!r},{qt!r}\n")
