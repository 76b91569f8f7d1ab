"""
Annotation noise and measured F1
================================

The same detections score lower once the truth itself is noisy.
"""

from synapsekit.detect import detect
from synapsekit.evaluation import evaluate
from synapsekit.synthgen import SynthConfig, corrupt_labels, generate

data = generate(SynthConfig(seed=0))
pre, post, _, _ = detect(data.pre_prob, data.post_prob)

clean = evaluate(pre, post, data.pre, data.post)
for drop, jitter in ((0.1, 0.0), (0.2, 2.0), (0.4, 4.0)):
    noisy_pre = corrupt_labels(data.pre, drop, jitter, seed=1)
    noisy_post = corrupt_labels(data.post, drop, jitter, seed=2)
    rep = evaluate(pre, post, noisy_pre, noisy_post)
    print(f"drop {drop:.1f} jitter {jitter:.1f}: F1 pre {rep.f1_pre:.3f} "
          f"(clean {clean.f1_pre:.3f}), post {rep.f1_post:.3f} (clean {clean.f1_post:.3f})")
