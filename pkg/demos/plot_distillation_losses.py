"""
Distillation losses on random tensors
=====================================

Knowledge distillation blends label cross-entropy with a softened match to
the teacher.  Attention transfer compares normalized spatial maps instead.
"""

import numpy as np

from cheapconv import DistillConfig, at_loss, attention_map, kd_loss

rng = np.random.default_rng(0)
cfg = DistillConfig()
student, teacher = rng.normal(size=(2, 8, 10))
labels = rng.integers(0, 10, 8)

# alpha trades the hard labels against the teacher
for alpha in (0.0, 0.5, cfg.alpha, 1.0):
    loss, grad = kd_loss(student, teacher, labels, alpha, cfg.temperature)
    print(f"alpha={alpha:.1f}  loss={loss:.4f}  |grad|={np.linalg.norm(grad):.4f}")

# Attention maps: average squared activation over channels, one per pixel.
s_acts = [rng.normal(size=(8, 16, 8, 8)), rng.normal(size=(8, 32, 4, 4))]
t_acts = [rng.normal(size=(8, 64, 8, 8)), rng.normal(size=(8, 128, 4, 4))]
print("map shapes:", [attention_map(a).shape for a in s_acts])

# Channel counts may differ between the two networks; only the spatial
# size has to agree.  beta is rescaled for two attention layers.
beta = DistillConfig.for_layers(2).beta
loss, _, grads = at_loss(student, labels, s_acts, t_acts, beta=beta)
print(f"AT loss with beta={beta:g}: {loss:.3f}")

# Rescaling a teacher layer leaves the attention term untouched.
scaled = [3.0 * t_acts[0], t_acts[1]]
print("scale-invariant:", np.isclose(loss, at_loss(student, labels, s_acts, scaled, beta=beta)[0]))
