"""E-norms of the truncated annihilation operator and of a rank-one jump.

Prints the norm, the dual multiplier and the duality gap along an energy grid,
next to the closed forms sqrt(min(E, d - 1)) and min(1, sqrt(E / k)).
"""

import numpy as np

from ecdkit import annihilation, e_norm, number_observable

d, k = 64, 7
g = number_observable(d)
a = annihilation(d)
jump = np.zeros((d, d))
jump[0, k] = 1.0

print(f"{'E':>8} {'||a||_E':>12} {'closed':>12} {'mu':>10} {'gap':>10} {'||J||_E':>10}")
for e in np.geomspace(0.25, 256, 11):
    cert = e_norm(a, g, e)
    print(f"{e:8.3f} {cert.value:12.8f} {np.sqrt(min(e, d - 1)):12.8f} {cert.mu:10.4f} {cert.gap:10.2e} "
          f"{e_norm(jump, g, e).value:10.6f}")
