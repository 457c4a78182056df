"""Levy fractional Brownian field in polar coordinates.

The polar transform Y(s) = e^{-H s1} X(e^{s1} cos s2, e^{s1} sin s2) turns the
Levy field into a stationary field on the plane with covariance R.  This
script checks that on samples, then shows that a wrong H is rejected.
"""
import numpy as np

from lampfield.fields import FieldSample, LevyFBM, PolarStationary, sample_gaussian_field
from lampfield.lamperti import PathOnGrid, polar_forward_levy
from lampfield.statcheck import compare_gaussian_fdd, reports_to_csv

H = 0.5
s = np.array([[-1.0, 0.0], [-0.5, 1.0], [0.0, 2.5], [0.3, -2.0], [0.8, -0.7], [1.2, 1.7]])
t = np.exp(s[:, :1]) * np.stack([np.cos(s[:, 1]), np.sin(s[:, 1])], axis=1)

X = sample_gaussian_field(LevyFBM(H), t, 4000, seed=3)
Y = polar_forward_levy(PathOnGrid.from_sample(X), H)
sample = FieldSample(s, Y.values, {"seed": 3})

reports = [compare_gaussian_fdd(sample, PolarStationary(h)) for h in (0.5, 0.7)]
print(reports_to_csv(reports), end="")
