"""
Ranking representations by domain discrepancy
=============================================

Three candidate feature layers are simulated for a source and a target
domain.  The layer whose source and target means sit closest together
(smallest linear MMD) is the one to adapt from.
"""

import numpy as np

from mmdadapt import mmd
from mmdadapt.data import LabeledDataset
from mmdadapt.harness import layer_study, selection_csv

rng = np.random.default_rng(0)
y = np.repeat(np.arange(4), 30)

# each "layer" carries the same class signal plus a domain offset of its own
layers = {}
for name, offset in (("conv5", 2.5), ("fc6", 1.2), ("fc7", 0.4)):
    means = 3 * np.eye(4, 12)
    src = means[y] + rng.standard_normal((y.size, 12))
    tgt = means[y] + rng.standard_normal((y.size, 12)) + offset / np.sqrt(12)
    layers[name] = (LabeledDataset(src, y, "source"), LabeledDataset(tgt, y, "target"))

# linear MMD is the distance between the two feature means
for name, (s, t) in layers.items():
    print(f"{name}: linear MMD {mmd.mmd_linear(s.features, t.features):.3f}")

# the biased and unbiased kernel estimators agree on the ordering
gamma = mmd.median_heuristic_gamma(*(d.features for d in layers["fc7"]))
for name, (s, t) in layers.items():
    rbf = mmd.mmd2_kernel(s.features, t.features, mmd.KernelSpec("rbf", gamma), unbiased=True)
    print(f"{name}: unbiased RBF MMD^2 {rbf:.4f}")

# a full selection study, with source-only SVM accuracy on the target for reference
rows = layer_study([(n, s, t) for n, (s, t) in layers.items()], with_accuracy=True)
print(selection_csv(rows))
