"""Truncation study for the annihilation dilation at d = 64, E = 4.

Writes the study rows and the scaling profile as CSV to stdout. The distance
bound stays at 2E = 8 on every row below the top level; the estimated
distance drops to zero once the cutoff reaches it.
"""

import sys

from ecdkit import Dilation, annihilation, number_observable
from ecdkit.truncate import STUDY_CONFIG, TruncationStudy, scaling_profile

d, budget = 64, 4.0
g = number_observable(d)
v = Dilation(annihilation(d), 1)

study = TruncationStudy(v, g, budget, [8, 16, 32, 63])
study.run(STUDY_CONFIG)
sys.stdout.write(study.to_csv())
print()
profile = scaling_profile(v.v, g, [1, 2, 4, 8, 16, 32, 63, 100, 200])
sys.stdout.write(profile.to_csv())
print(f"knee at E = {profile.knee:g}")
