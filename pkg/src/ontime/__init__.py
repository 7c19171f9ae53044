"""Predicting on-time graduation from tabular student records.

Schema-checked CSV handling, relative GPA features, training-set
resampling, five from-scratch classifiers plus a numpy TabNet, metrics,
a synthetic cohort generator and a declarative experiment runner.
"""

__version__ = "0.1.0"
