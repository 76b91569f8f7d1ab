"""
Patch similarity between groups of sites
========================================

Cut patches around sites and compare them within and across groups.
"""

from synapsekit.similarity import extract_patches, similarity_matrix
from synapsekit.synthgen import SynthConfig, generate

data = generate(SynthConfig(shape=(96, 96, 96), n_synapses=12, seed=2))

pre = extract_patches(data.pre_prob, data.pre, size=24, source_id="pre")
post = extract_patches(data.post_prob, data.post, size=24, source_id="post")
print(f"patches: pre {len(pre)} (skipped {pre.skipped}), post {len(post)} (skipped {post.skipped})")

for metric in ("ssim", "cosine"):
    m = similarity_matrix([pre, post], metric=metric, budget=200, seed=0)
    print(metric)
    print(m.round(3))
