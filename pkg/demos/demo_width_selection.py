"""
Choosing the adaptation layer width
===================================

A network is trained with the domain confusion loss at several adaptation
widths.  The width whose learned representation leaves the smallest
source/target MMD is selected, before looking at any target labels.
"""

import math

from mmdadapt import adaptnet
from mmdadapt.data import Shift, offset_vector, synth_domains
from mmdadapt.mmd import mmd_linear, select_width

# five classes in 16 dimensions; the target is rotated by 30 degrees and offset
src, tgt = synth_domains(5, 16, 40, 40, Shift(offset_vector(16, 2.0), math.radians(30)), seed=1)

results = []
for width in (4, 8, 16, 32):
    net = adaptnet.init_net(16, width, 5, seed=1)
    rep = adaptnet.train(net, src, None, tgt.features, adaptnet.JointLossConfig(lam=0.25), seed=1)
    As = adaptnet.activations(rep.net, src.features)
    At = adaptnet.activations(rep.net, tgt.features)
    results.append((width, As, At))
    # target accuracy is printed only for comparison; selection never sees it
    print(f"width {width:2d}: MMD {mmd_linear(As, At):.4f}  "
          f"target accuracy {adaptnet.evaluate(rep.net, tgt):.3f}")

print("selected width:", select_width(results))
