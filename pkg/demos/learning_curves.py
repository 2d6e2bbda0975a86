"""How quickly does the small-state learner settle?

Runs the urgency-bit learner against a blind legacy device for three packet
lifetimes and prints the windowed throughput over time.  The state space has
eight entries regardless of lifetime, so convergence speed barely depends on
the deadline; each curve flattens within a few thousand slots.
"""

from dcra.experiments import run_convergence
from dcra.mdp import TwoDeviceParams

PARAMS = TwoDeviceParams(
    peer_arrival=0.5,
    agent_arrival=0.4,
    peer_success=0.7,
    agent_success=0.6,
    peer_transmit=0.4,
)


def main() -> None:
    result = run_convergence(
        PARAMS,
        lifetimes=(10, 20, 30),
        agent="r-tiny",
        seed=2,
        slots=30_000,
        window=2_000,
    )
    lifetimes = sorted({row[5] for row in result.rows})
    series = {
        d: [row[-1] for row in result.rows if row[5] == d] for d in lifetimes
    }
    header = "".join(f"  D={d:<4}" for d in lifetimes)
    print("slot    " + header)
    n = len(next(iter(series.values())))
    for k in range(n):
        slot = (k + 1) * 2_000
        vals = "".join(f"  {series[d][k]:.3f}" for d in lifetimes)
        print(f"{slot:<8}{vals}")
    print("\nEach column stabilises well before slot 10,000; the deadline")
    print("changes the achievable level only marginally because the learner")
    print("keys off a single urgency bit.")


if __name__ == "__main__":
    main()
