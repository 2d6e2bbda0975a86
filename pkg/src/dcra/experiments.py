"""Experiment orchestration: parameter sweeps, convergence series, exports.

Each experiment samples its scenarios from a master seed, runs strictly
sequentially (group-level fan-out would be safe, nothing here shares state,
but reproducibility of the written CSV matters more than wall clock), and
writes CSV rows whose parameter columns always appear in the fixed order

    peer_arrival, agent_arrival, peer_success, agent_success,
    peer_transmit, lifetime, peer_count, agent_count

so downstream tooling can concatenate outputs from different experiments.
Floats are serialized with repr, which round-trips exactly; re-running any
spec with the same seed yields byte-identical files.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .agents import RewardSpec
from .core import DeviceParams
from .env import AgentSpec, DeviceSetup, Metrics, ScenarioConfig, run
from .mdp import TwoDeviceParams, build_mdp, upper_bound

__all__ = [
    "ParamRanges",
    "SweepResult",
    "default_output_dir",
    "run_congestion",
    "run_convergence",
    "run_sweep",
    "sample_params",
    "simulate_two_device",
]

PARAM_COLUMNS = [
    "peer_arrival",
    "agent_arrival",
    "peer_success",
    "agent_success",
    "peer_transmit",
    "lifetime",
    "peer_count",
    "agent_count",
]

OUTPUT_DIR_ENV = "DCRA_OUTPUT_DIR"


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, ".")


@dataclass(frozen=True)
class ParamRanges:
    """Uniform sampling ranges for scenario probabilities."""

    arrival: tuple[float, float] = (0.1, 1.0)
    success: tuple[float, float] = (0.1, 1.0)
    transmit: tuple[float, float] = (0.05, 0.95)

    def __post_init__(self) -> None:
        for name in ("arrival", "success", "transmit"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} range ({lo}, {hi}) invalid")

    def _draw(self, rng: np.random.Generator, which: str) -> float:
        lo, hi = getattr(self, which)
        return float(lo + (hi - lo) * rng.random())


def sample_params(ranges: ParamRanges, rng: np.random.Generator) -> TwoDeviceParams:
    """Draw one two-device tuple; draw order is the canonical column order."""
    return TwoDeviceParams(
        peer_arrival=ranges._draw(rng, "arrival"),
        agent_arrival=ranges._draw(rng, "arrival"),
        peer_success=ranges._draw(rng, "success"),
        agent_success=ranges._draw(rng, "success"),
        peer_transmit=ranges._draw(rng, "transmit"),
    )


@dataclass
class SweepResult:
    header: list[str]
    rows: list[list]
    aggregate: list | None = None
    path: str | None = None

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [row[i] for row in self.rows]


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [repr(float(v)) if isinstance(v, float) else v for v in row]
                )
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def _mean_row(label: str, rows: list[list]) -> list:
    out = [label]
    for j in range(1, len(rows[0])):
        vals = [row[j] for row in rows]
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            out.append(float(np.mean(vals)))
        else:
            out.append("")
    return out


def _two_device_config(
    params: TwoDeviceParams,
    lifetime: int,
    agent: str,
    slots: int,
    seed,
    agent_transmit: float | None = None,
    reward: RewardSpec | None = None,
) -> ScenarioConfig:
    peer = DeviceSetup(
        DeviceParams(
            params.peer_arrival,
            params.peer_success,
            transmit_prob=params.peer_transmit,
        ),
        AgentSpec("blind"),
    )
    if agent == "blind":
        spec = AgentSpec("blind", transmit_prob=agent_transmit)
    else:
        spec = AgentSpec(agent, reward=reward or RewardSpec())
    tracked = DeviceSetup(
        DeviceParams(params.agent_arrival, params.agent_success), spec
    )
    return ScenarioConfig(
        lifetime=lifetime, horizon=slots, seed=seed, devices=(peer, tracked)
    )


def simulate_two_device(
    params: TwoDeviceParams,
    lifetime: int,
    agent: str,
    slots: int,
    seed,
    window: int | None = None,
    agent_transmit: float | None = None,
    reward: RewardSpec | None = None,
) -> tuple[float, float]:
    """Run one two-device scenario; report (throughput, power) over the last
    `window` slots (whole run when None)."""
    cfg = _two_device_config(
        params, lifetime, agent, slots, seed, agent_transmit, reward
    )
    metrics = run(cfg).metrics
    return metrics.timely_throughput(window), metrics.power(window)


def run_sweep(
    groups: int,
    lifetimes: tuple[int, ...],
    agents: tuple[str, ...],
    seed: int,
    slots: int = 200_000,
    window: int = 50_000,
    ranges: ParamRanges = ParamRanges(),
    with_bound: bool = False,
    out_path: str | None = None,
) -> SweepResult:
    """Random-group comparison of agents (and optionally the LP bound).

    One parameter tuple per (lifetime, group); every agent sees the same
    scenario seed within a group so their arrival and channel randomness
    coincide.  Metrics are taken over the final `window` slots, leaving the
    earlier slots as learning burn-in.  Blind agents draw their fixed
    transmit probability as an extra sample after the canonical five-draw
    tuple.
    """
    if groups < 1:
        raise ValueError("need at least one group")
    if not 1 <= window <= slots:
        raise ValueError(f"window {window} outside [1, {slots}]")
    header = ["group"] + PARAM_COLUMNS
    for agent in agents:
        header += [f"throughput_{agent}", f"power_{agent}"]
    if with_bound:
        header.append("bound")
    rows = []
    for lifetime in lifetimes:
        for g in range(groups):
            rng = np.random.default_rng(
                np.random.SeedSequence((seed, lifetime, g))
            )
            params = sample_params(ranges, rng)
            aloha_prob = ranges._draw(rng, "transmit")
            row: list = [g] + list(params.as_tuple()) + [lifetime, 1, 1]
            try:
                for agent in agents:
                    thr, power = simulate_two_device(
                        params,
                        lifetime,
                        agent,
                        slots,
                        seed=(seed, lifetime, g),
                        window=window,
                        agent_transmit=aloha_prob if agent == "blind" else None,
                    )
                    row += [thr, power]
                if with_bound:
                    row.append(upper_bound(build_mdp(params, lifetime)).value)
            except Exception as exc:
                raise RuntimeError(
                    f"group {g} at lifetime {lifetime} "
                    f"(seed ({seed}, {lifetime}, {g})) failed: {exc}"
                ) from exc
            rows.append(row)
    aggregate = _mean_row("mean", rows)
    result = SweepResult(header, rows, aggregate)
    if out_path:
        _write_csv(out_path, header, rows + [aggregate])
        result.path = out_path
    return result


def run_convergence(
    params: TwoDeviceParams,
    lifetimes: tuple[int, ...],
    agent: str,
    seed: int,
    slots: int = 200_000,
    window: int = 2_000,
    out_path: str | None = None,
) -> SweepResult:
    """Windowed-throughput time series per lifetime for one agent kind."""
    if window < 1 or slots < window:
        raise ValueError("slots must cover at least one window")
    header = PARAM_COLUMNS + ["agent", "slot", "throughput"]
    rows = []
    for lifetime in lifetimes:
        cfg = _two_device_config(
            params, lifetime, agent, slots, seed=(seed, lifetime)
        )
        metrics = run(cfg).metrics
        series = metrics.throughput_series(window).tolist()
        base = list(params.as_tuple()) + [lifetime, 1, 1]
        for k, value in enumerate(series):
            rows.append(base + [agent, (k + 1) * window, value])
    result = SweepResult(header, rows)
    if out_path:
        _write_csv(out_path, header, rows)
        result.path = out_path
    return result


def _multi_device_config(
    peer_count: int,
    agent_count: int,
    lifetime: int,
    agent: str,
    slots: int,
    seed,
    rng: np.random.Generator,
    ranges: ParamRanges,
    peer_transmit: float,
    peer_arrival: float = 1.0,
    peer_success: float = 0.5,
    aloha_agents: bool = False,
    aloha_prob: float | None = None,
    reward: RewardSpec | None = None,
) -> tuple[ScenarioConfig, list[tuple[float, float]]]:
    devices = []
    for _ in range(peer_count):
        devices.append(
            DeviceSetup(
                DeviceParams(peer_arrival, peer_success, transmit_prob=peer_transmit),
                AgentSpec("blind"),
            )
        )
    agent_params = []
    for _ in range(agent_count):
        arrival = ranges._draw(rng, "arrival")
        success = ranges._draw(rng, "success")
        agent_params.append((arrival, success))
        if aloha_agents:
            devices.append(
                DeviceSetup(
                    DeviceParams(arrival, success, transmit_prob=aloha_prob),
                    AgentSpec("blind"),
                )
            )
        else:
            devices.append(
                DeviceSetup(
                    DeviceParams(arrival, success),
                    AgentSpec(agent, reward=reward or RewardSpec.multi_level()),
                )
            )
    cfg = ScenarioConfig(
        lifetime=lifetime, horizon=slots, seed=seed, devices=tuple(devices)
    )
    return cfg, agent_params


def run_congestion(
    peer_count: int,
    agent_counts: tuple[int, ...],
    seed: int,
    lifetime: int = 10,
    agent: str = "r-tiny",
    slots: int = 200_000,
    window: int = 50_000,
    ranges: ParamRanges = ParamRanges(),
    out_path: str | None = None,
) -> SweepResult:
    """Saturated-peer study: does adding learners help a congested channel?

    The peers model legacy traffic: every slot brings a fresh packet
    (arrival probability one), transmission probability 1/(4*peer_count),
    success probability one half.  Each agent count is run twice on the same
    scenario seed, once with learning devices and once with blind devices at
    probability 1/count; agent count zero is the no-newcomer baseline, where
    both arms degenerate to the same peers-only run.
    """
    if peer_count < 1:
        raise ValueError("need at least one congesting peer")
    peer_transmit = 1.0 / (4.0 * peer_count)
    header = PARAM_COLUMNS + [
        "agent_arrivals",
        "agent_successes",
        f"throughput_{agent}",
        f"power_{agent}",
        "throughput_blind",
        "power_blind",
    ]
    rows = []
    for count in (0,) + tuple(agent_counts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, count)))
        base = [
            1.0,
            "",
            0.5,
            "",
            peer_transmit,
            lifetime,
            peer_count,
            count,
        ]
        if count == 0:
            cfg, _ = _multi_device_config(
                peer_count, 0, lifetime, agent, slots, (seed, count),
                rng, ranges, peer_transmit,
            )
            m = run(cfg).metrics
            thr, power = m.timely_throughput(window), m.power(window)
            rows.append(base + ["", "", thr, power, thr, power])
            continue
        cfg, agent_params = _multi_device_config(
            peer_count, count, lifetime, agent, slots, (seed, count),
            rng, ranges, peer_transmit,
        )
        m = run(cfg).metrics
        # same per-device parameter draws and scenario seed for the control
        rng2 = np.random.default_rng(np.random.SeedSequence((seed, count)))
        cfg2, _ = _multi_device_config(
            peer_count, count, lifetime, agent, slots, (seed, count),
            rng2, ranges, peer_transmit,
            aloha_agents=True, aloha_prob=1.0 / count,
        )
        m2 = run(cfg2).metrics
        row = base + [
            ";".join(repr(a) for a, _ in agent_params),
            ";".join(repr(s) for _, s in agent_params),
            m.timely_throughput(window),
            m.power(window),
            m2.timely_throughput(window),
            m2.power(window),
        ]
        rows.append(row)
    result = SweepResult(header, rows)
    if out_path:
        _write_csv(out_path, header, rows)
        result.path = out_path
    return result
