"""Energy-constrained distances between qubit channels with G = diag(0, 1).

For each pair the diamond-norm distance comes with its certified bracket,
and the Bures distance with the four-term chain that links the two.
"""

from ecdkit import (
    AscentConfig,
    EnergyObservable,
    amplitude_damping,
    bures_e_distance,
    dephasing_channel,
    ecd_distance,
    identity_channel,
    ksw_chain,
    reset_channel,
)

g = EnergyObservable([0.0, 1.0])
cfg = AscentConfig(restarts=8)
pairs = {
    "identity vs dephasing": (identity_channel(2), dephasing_channel(2)),
    "identity vs reset": (identity_channel(2), reset_channel(2)),
    "identity vs damping(0.6)": (identity_channel(2), amplitude_damping(0.6)),
}

for name, (phi, psi) in pairs.items():
    for e in (0.25, 0.5, 1.0):
        dist = ecd_distance(phi, psi, g, e, cfg)
        beta = bures_e_distance(phi, psi, g, e, cfg)
        chain = ksw_chain(phi, psi, g, e, cfg)
        terms = " <= ".join(f"{t.value:.6f}" for t in chain.terms)
        print(f"{name:26s} E={e:<5} D={dist.estimate:.6f} in [{dist.lower:.6f}, {dist.upper:.6f}] "
              f"({dist.upper_provenance})  beta={beta.estimate:.6f}")
        print(f"{'':26s} chain {terms}  holds={chain.holds}")
