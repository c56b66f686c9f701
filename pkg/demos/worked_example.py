"""
Two binary SPSA steps by hand
=============================

Six features, two scripted perturbations and a stub loss. The weights
after each step and the final mask can be checked by hand.
"""

import numpy as np

from spsafs import MonotoneGainConfig, monotone_gain, rank_features, run_bspsa

# the loss ignores the mask and replays four scripted values in call order
values = iter([0.32, 0.53, 0.53, 0.38])


def stub_loss(mask, noise_seed):
    return next(values)


deltas = [[-1, -1, 1, 1, -1, 1], [-1, 1, 1, -1, 1, 1]]
cfg = MonotoneGainConfig(a=0.75, A=100, alpha=0.6, c=0.05)
print("gains a_0, a_1:", [round(monotone_gain(k, cfg), 4) for k in range(2)])

trace = run_bspsa(stub_loss, 6, cfg, iterations=2, perturbations=deltas)

# each record holds both probe masks and the weights after the update
for rec in trace.records:
    print(f"k={rec.k}  y+={rec.y_plus}  y-={rec.y_minus}  mask+={rec.mask_plus.bits}  w={np.round(rec.weights, 4)}")

# rounding the bounded final weights gives the selected features (1-based here)
print("selected:", [i + 1 for i in trace.final_mask.indices])
print("ranking by weight:", [i + 1 for i in rank_features(trace, 6)])
