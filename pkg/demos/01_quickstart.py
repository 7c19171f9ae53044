"""
Quickstart: one cohort, two classifiers
=======================================

Draw a synthetic cohort, build the relative GPA features from the
training split, and compare a single tree with boosting on recall and
on the share of students wrongly predicted to graduate on time.
"""

import numpy as np

from ontime.features import (
    FeatureGroup,
    add_relative_features,
    compute_school_stats,
    encode,
    fit_encoding,
    select_features,
)
from ontime.metrics import confusion, f1, p_incorrect_graduated, recall
from ontime.models import BoostParams, fit_decision_tree, fit_gradient_boosting
from ontime.synth import GenConfig, generate_cohort
from ontime.tabular import SplitSpec, drop_missing, split

# A cohort of 8000 students; about 89% do not finish on time (label 1).
ds, truth = generate_cohort(GenConfig(n_students=8000, n_schools=120, signal_strength=2.0, seed=1))
print(f"{ds.n_rows} students, prevalence {ds.labels().mean():.3f}, intercept {truth.intercept:.3f}")

# Split first, then compute school means on the training rows only.
train, test = split(drop_missing(ds), SplitSpec((0.8, 0.2), seed=1))
stats = compute_school_stats(train)
train, test = add_relative_features(train, stats), add_relative_features(test, stats)

# Group I keeps the first-year columns; encode with training statistics.
train = select_features(train, FeatureGroup.GROUP_I)
test = select_features(test, FeatureGroup.GROUP_I)
spec = fit_encoding(train)
Xtr, Xte = encode(spec, train), encode(spec, test)
print(f"{Xtr.values.shape[1]} encoded columns from {len(Xtr.source_columns())} predictors")

for name, model in [
    ("tree", fit_decision_tree(Xtr)),
    ("boosting", fit_gradient_boosting(Xtr, params=BoostParams(n_trees=100), seed=1)),
]:
    cm = confusion(Xte.labels, model.predict(Xte))
    print(f"{name:<9} recall {recall(cm):.4f}  F1 {f1(cm):.4f}  "
          f"P(incorrectly predicted as graduated) {p_incorrect_graduated(cm):.4f}")

# The last figure is fn / total, which is (1 - recall) * prevalence.
print("check:", np.isclose(p_incorrect_graduated(cm), (1 - recall(cm)) * cm.prevalence))
