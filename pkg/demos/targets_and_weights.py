"""
Training targets from point annotations
=======================================

Render sphere targets and the class-balancing weight map that goes with them.
"""

import numpy as np

from synapsekit.targets import TargetConfig, compute_weight_map, render_targets
from synapsekit.volcore import PointSet

pre = PointSet.from_coords("pre", [(16, 16, 16)])
post = PointSet.from_coords("post", [(16, 16, 26), (16, 26, 16), (8, 12, 16)])

# radius 4 voxels, i.e. 32 nm on an 8 nm grid
pre_t, post_t = render_targets(pre, post, (32, 32, 32), TargetConfig(radius_voxels=4))
print("voxels per pre sphere:", int(pre_t.data.sum()))
print("post foreground voxels:", int(post_t.data.sum()))

# foreground is rare, so each foreground voxel weighs far more
wm = compute_weight_map(post_t)
print(f"w_fg = {wm.w_fg:.2f}, w_bg = {wm.w_bg:.4f}")
fg = wm.weights[post_t.data == 1].sum()
bg = wm.weights[post_t.data == 0].sum()
print("class totals balance:", np.isclose(fg, bg))
