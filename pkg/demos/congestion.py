"""Do newcomers have to hurt a congested channel?

A saturated legacy device occupies the channel with fixed-rate blind
retransmissions.  Folk wisdom says extra devices mean extra collisions; here
ten learning newcomers instead raise total deliveries well above the
legacy-only baseline, because they learn to fill the idle slots.  Ten blind
newcomers at the matching average rate show the collision story instead.
"""

from dcra.experiments import run_congestion


def main() -> None:
    result = run_congestion(
        peer_count=1,
        agent_counts=(10,),
        seed=5,
        lifetime=10,
        slots=150_000,
        window=50_000,
    )
    i_thr = result.header.index("throughput_r-tiny")
    i_blind = result.header.index("throughput_blind")
    i_count = result.header.index("agent_count")
    baseline = result.rows[0][i_thr]
    print(f"legacy device alone:          {baseline:.3f} deliveries/slot")
    for row in result.rows[1:]:
        print(f"+{row[i_count]} learning newcomers:      {row[i_thr]:.3f}")
        print(f"+{row[i_count]} blind newcomers (1/n):   {row[i_blind]:.3f}")
    print("\nThe learners multiply total deliveries several times over; the")
    print("blind newcomers mostly trade collisions with the legacy device.")


if __name__ == "__main__":
    main()
