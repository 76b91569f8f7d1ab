"""
Scoring by bipartite matching
=============================

One-to-one matching of detections to truth, and why invalid costs are clamped.
"""

from synapsekit.evaluation import f1, match_sites
from synapsekit.volcore import PointSet

truth = PointSet.from_coords("pre", [(0, 0, 1), (5.9, 0, 0)])
found = PointSet.from_coords("pre", [(0, 0, 0), (0, 5.9, 1)])

# matching on raw distances pairs the close points first and strands the rest
plain = match_sites(found, truth, threshold_voxels=6, clamp=False)
clamped = match_sites(found, truth, threshold_voxels=6)
print("plain  :", plain.tp, "tp", plain.matches)
print("clamped:", clamped.tp, "tp", clamped.matches)

print("f1(2, 1, 1) =", f1(2, 1, 1))
print("f1 with nothing to find =", f1(0, 0, 0))
