"""Exact two-device model and its linear-programming throughput bound.

The tracked device (the one whose policy we optimise) shares a collision
channel with a blind peer that retransmits whenever it holds a packet, with
a fixed probability per slot.  Enumerating both lead-time queues and the
tracked device's channel observation gives a finite MDP whose maximal
average reward upper-bounds every decentralised policy: the genie here sees
the peer queue, which no real agent can.

State index layout: s = (l1 * 2^D + l2) * 4 + o with observation order
IDLE, BUSY, SUCCESSFUL, FAILED.  l1 and l2 are lead-time bitmasks, bit k
set meaning a packet expiring in k+1 slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChannelObservation
from .simplex import LpProgram, LpStatus, solve_lp

__all__ = [
    "ALWAYS_IDLE",
    "ALWAYS_TRANSMIT",
    "BoundResult",
    "TwoDeviceModel",
    "TwoDeviceParams",
    "bound_program",
    "build_mdp",
    "constant_policy_throughput",
    "informed_optimum_lifetime1",
    "majority_policy",
    "optimal_constant_policy",
    "upper_bound",
]

ALWAYS_TRANSMIT = "always-transmit"
ALWAYS_IDLE = "always-idle"


@dataclass(frozen=True)
class TwoDeviceParams:
    """Probabilities of the canonical two-device scenario.

    Field order follows the conventional tuple
    (peer arrival, agent arrival, peer success, agent success, peer transmit).
    """

    peer_arrival: float
    agent_arrival: float
    peer_success: float
    agent_success: float
    peer_transmit: float

    def __post_init__(self) -> None:
        for name in (
            "peer_arrival",
            "agent_arrival",
            "peer_success",
            "agent_success",
            "peer_transmit",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            self.peer_arrival,
            self.agent_arrival,
            self.peer_success,
            self.agent_success,
            self.peer_transmit,
        )


def _advance_mask(mask: int, delivered: bool, arrival: int, lifetime: int) -> int:
    if delivered:
        mask &= mask - 1  # clears the most urgent (lowest) set bit
    mask >>= 1
    if arrival:
        mask |= 1 << (lifetime - 1)
    return mask


class TwoDeviceModel:
    """Transition tensor and reward vector of the joint chain."""

    def __init__(self, params: TwoDeviceParams, lifetime: int):
        if lifetime < 1:
            raise ValueError(f"lifetime must be >= 1, got {lifetime}")
        self.params = params
        self.lifetime = lifetime
        self.masks = 1 << lifetime
        self.n_states = self.masks * self.masks * 4
        self.transitions = self._build()
        obs = np.arange(self.n_states) % 4
        self.rewards = (
            (obs == ChannelObservation.BUSY) | (obs == ChannelObservation.SUCCESSFUL)
        ).astype(float)

    def index(self, l1: int, l2: int, o: int) -> int:
        m = self.masks
        if not (0 <= l1 < m and 0 <= l2 < m):
            raise ValueError(f"queue mask outside [0, {m})")
        return (l1 * m + l2) * 4 + int(o)

    def decode(self, s: int) -> tuple[int, int, int]:
        o = s % 4
        pair = s // 4
        return pair // self.masks, pair % self.masks, o

    def _build(self) -> np.ndarray:
        p = self.params
        m = self.masks
        n = self.n_states
        # transitions depend on (l1, l2, a) only; observation of the source
        # state is carried along for the reward and marginalised here
        pair_kernel = np.zeros((2, m * m, n))
        arrivals = [
            (a1, a2, (p.peer_arrival if a1 else 1 - p.peer_arrival)
             * (p.agent_arrival if a2 else 1 - p.agent_arrival))
            for a1 in (0, 1)
            for a2 in (0, 1)
        ]
        for l1 in range(m):
            for l2 in range(m):
                row = l1 * m + l2
                for a in (0, 1):
                    agent_sends = bool(a) and l2 != 0
                    branches = []  # (prob, delivered1, delivered2, obs)
                    if l1 != 0:
                        pt = p.peer_transmit
                        if agent_sends:
                            branches.append((pt, False, False, 3))
                            branches.append(
                                ((1 - pt) * p.agent_success, False, True, 2)
                            )
                            branches.append(
                                ((1 - pt) * (1 - p.agent_success), False, False, 3)
                            )
                        else:
                            branches.append((pt * p.peer_success, True, False, 1))
                            branches.append(
                                (pt * (1 - p.peer_success), False, False, 3)
                            )
                            branches.append((1 - pt, False, False, 0))
                    elif agent_sends:
                        branches.append((p.agent_success, False, True, 2))
                        branches.append((1 - p.agent_success, False, False, 3))
                    else:
                        branches.append((1.0, False, False, 0))
                    for prob, d1, d2, o2 in branches:
                        if prob == 0.0:
                            continue
                        for a1, a2, pa in arrivals:
                            if pa == 0.0:
                                continue
                            n1 = _advance_mask(l1, d1, a1, self.lifetime)
                            n2 = _advance_mask(l2, d2, a2, self.lifetime)
                            sp = (n1 * m + n2) * 4 + o2
                            pair_kernel[a, row, sp] += prob * pa
        full = np.empty((2, n, n))
        for a in (0, 1):
            full[a] = np.repeat(pair_kernel[a], 4, axis=0)
        return full


def build_mdp(params: TwoDeviceParams, lifetime: int) -> TwoDeviceModel:
    return TwoDeviceModel(params, lifetime)


@dataclass(frozen=True)
class BoundResult:
    """Upper-bound value with the randomized policy extracted from the LP."""

    value: float
    policy: np.ndarray  # (n_states, 2), rows sum to 1
    occupancy: np.ndarray  # x block, (n_states, 2)
    transient: np.ndarray  # y block, (n_states, 2)
    iterations: int
    model: TwoDeviceModel


def bound_program(model: TwoDeviceModel) -> LpProgram:
    """Average-reward dual LP whose optimum is the best timely throughput.

    Variables are the state-action occupancies x plus the auxiliary block y
    that pins down transient states; both are nonnegative.  For every state
    s' two equalities hold:

        sum_a x(s',a) = sum_{s,a} P(s'|s,a) x(s,a)
        sum_a x(s',a) + sum_a y(s',a) - sum_{s,a} P(s'|s,a) y(s,a) = 1/|S|

    The objective maximises sum r(s) x(s,a).
    """
    n = model.n_states
    P = model.transitions
    # column 2s+a of the flow matrix carries P(s'|s,a) in row s'
    flow = np.transpose(P, (2, 1, 0)).reshape(n, 2 * n)
    sums = np.zeros((n, 2 * n))
    rows = np.repeat(np.arange(n), 2)
    sums[rows, np.arange(2 * n)] = 1.0
    zero = np.zeros((n, 2 * n))
    A = np.block([[sums - flow, zero], [sums, sums - flow]])
    b = np.concatenate([np.zeros(n), np.full(n, 1.0 / n)])
    c = np.concatenate([np.repeat(model.rewards, 2), np.zeros(2 * n)])
    return LpProgram(c, A, b)


def upper_bound(model: TwoDeviceModel) -> BoundResult:
    """Solve the dual LP and extract the randomized policy.

    The policy is x-proportional on recurrent states and falls back to the
    y block elsewhere.
    """
    n = model.n_states
    solution = solve_lp(bound_program(model))
    if solution.status is not LpStatus.OPTIMAL:
        raise RuntimeError(
            f"bound LP unexpectedly {solution.status.value}; "
            "the constraint build is broken"
        )
    x = solution.x[: 2 * n].reshape(n, 2)
    y = solution.x[2 * n :].reshape(n, 2)
    policy = np.empty((n, 2))
    x_mass = x.sum(axis=1)
    y_mass = y.sum(axis=1)
    for s in range(n):
        if x_mass[s] > 1e-12:
            policy[s] = x[s] / x_mass[s]
        elif y_mass[s] > 1e-12:
            policy[s] = y[s] / y_mass[s]
        else:
            raise RuntimeError(
                f"state {s} carries no mass in either block; LP output invalid"
            )
    return BoundResult(
        value=float(solution.objective),
        policy=policy,
        occupancy=x,
        transient=y,
        iterations=solution.iterations,
        model=model,
    )


def majority_policy(bound: BoundResult) -> dict[tuple[int, int], int]:
    """Vote the bound's policy down to the tracked device's view.

    For each (l2, o) the higher-probability action is taken per joint state
    (strictly above one half, ties to WAIT) and the majority across the
    2^D peer masks wins, again with ties to WAIT.  Returns 0 for WAIT and
    1 for TRANSMIT per (l2, o) key.
    """
    model = bound.model
    m = model.masks
    out: dict[tuple[int, int], int] = {}
    for l2 in range(m):
        for o in range(4):
            votes = 0
            for l1 in range(m):
                votes += bound.policy[model.index(l1, l2, o), 1] > 0.5
            out[(l2, o)] = 1 if votes > m // 2 else 0
    return out


def constant_policy_throughput(params: TwoDeviceParams, transmit_prob: float) -> float:
    """Single-lifetime throughput when the agent transmits with a fixed probability.

    Affine in transmit_prob: each slot both queues hold at most one fresh
    packet, the peer sends with its own fixed probability, and a delivery
    needs a lone sender that the channel then decodes.
    """
    if not 0.0 <= transmit_prob <= 1.0:
        raise ValueError(f"transmit_prob {transmit_prob} outside [0, 1]")
    p = params
    peer_sends = p.peer_transmit * p.peer_arrival
    agent_sends = transmit_prob * p.agent_arrival
    return p.peer_success * peer_sends * (1 - agent_sends) + p.agent_success * agent_sends * (
        1 - peer_sends
    )


def optimal_constant_policy(
    params: TwoDeviceParams, lifetime: int = 1
) -> tuple[str, float]:
    """Best constant agent policy at lifetime 1, in closed form.

    The throughput is affine in the agent's transmit probability, so the
    optimum sits at an endpoint: always transmit when the peer is quiet
    enough, never otherwise.
    """
    if lifetime != 1:
        raise ValueError("the constant-policy closed form only covers lifetime 1")
    p = params
    threshold = p.agent_success / (p.peer_success + p.agent_success)
    if p.peer_arrival * p.peer_transmit < threshold:
        return ALWAYS_TRANSMIT, constant_policy_throughput(params, 1.0)
    return ALWAYS_IDLE, constant_policy_throughput(params, 0.0)


def informed_optimum_lifetime1(params: TwoDeviceParams) -> float:
    """Exact genie value at lifetime 1, in closed form.

    With single-slot packets the state is just the two occupancy bits and
    the play decomposes per slot.  When only the agent holds a packet it
    transmits; when both hold one it picks the better of colliding-or-not:
    transmit earns (1-peer_transmit)*agent_success, waiting cedes the slot
    for peer_transmit*peer_success.  This is what the LP bound must equal
    at lifetime 1, including where the best constant policy is strictly
    worse.
    """
    p = params
    solo_agent = p.agent_success
    solo_peer = p.peer_transmit * p.peer_success
    contested = max(p.peer_transmit * p.peer_success, (1 - p.peer_transmit) * p.agent_success)
    return (
        p.peer_arrival * (p.agent_arrival * contested + (1 - p.agent_arrival) * solo_peer)
        + (1 - p.peer_arrival) * p.agent_arrival * solo_agent
    )
