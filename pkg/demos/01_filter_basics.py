"""Correlation filter basics: train on one patch, find a shifted copy.

Run with ``python demos/01_filter_basics.py``.
"""

import numpy as np

from ptav.filters import locate, make_label, respond, train_initial, update

rng = np.random.default_rng(0)

# A 16x16 map with 3 feature channels stands in for a featurised patch.
features = rng.normal(size=(16, 16, 3))
label = make_label((16, 16), sigma_factor=1 / 16)
model = train_initial(features, label, lam=0.01)
print("label peak at", locate(label.g)[0])

# Scoring the training patch peaks at the label center ...
peak, value = locate(respond(model, features))
print(f"training patch: peak {peak}, value {value:.3f}")

# ... and a circular shift moves the peak by the same amount.
for shift in [(2, -3), (-4, 4)]:
    peak, _ = locate(respond(model, np.roll(features, shift, axis=(0, 1))))
    print(f"shift {shift}: peak {peak}")

# Online updates blend old and new statistics with rate eta.
noisy = features + 0.3 * rng.normal(size=features.shape)
for t in range(5):
    model = update(model, noisy)
    print(f"after update {t + 1}: peak value on clean patch {locate(respond(model, features))[1]:.3f}")
