"""
Where TabNet looks
==================

Train the attentive network on Group I features and read its sparse
feature masks: one row per student and decision step, each summing to 1.
"""

import numpy as np

from ontime.features import FeatureGroup, encode, fit_encoding, select_features
from ontime.synth import GenConfig, generate_cohort
from ontime.tabnet import TabNetHyper, train_tabnet
from ontime.tabular import SplitSpec, split

ds, _ = generate_cohort(GenConfig(n_students=6000, n_schools=100, signal_strength=3.0, seed=5))
ds = select_features(ds, FeatureGroup.GROUP_I)
train, val, test = split(ds, SplitSpec((0.8, 0.1, 0.1), seed=5))
spec = fit_encoding(train)
Xtr, Xva, Xte = (encode(spec, part) for part in (train, val, test))

model, history = train_tabnet(Xtr, Xva, TabNetHyper(n_steps=3, batch_size=256, max_epochs=30, patience=8, seed=5))
best = min(history, key=lambda h: h["val_loss"])
print(f"{len(history)} epochs, best validation loss {best['val_loss']:.4f} at epoch {best['epoch']}")
print(f"test accuracy {np.mean(model.predict(Xte) == Xte.labels):.4f}")

# Masks come from sparsemax, so most entries are exactly zero.
masks = model.masks(Xte)
print("row sums:", [float(np.abs(m.sum(axis=1) - 1).max()) for m in masks])
print("share of zero mask entries per step:", [round(float((m == 0).mean()), 3) for m in masks])

# Aggregate attention by source column (one-hot levels folded together).
weight = {}
for (src, _), w in zip(Xte.provenance, sum(masks).sum(axis=0)):
    weight[src] = weight.get(src, 0.0) + w
total = sum(weight.values())
for src, w in sorted(weight.items(), key=lambda kv: -kv[1])[:6]:
    print(f"{src:<20} {w / total:.3f}")
