"""
Feature rankings and wrapper baselines
======================================

Rank features with SPSA-FS weights, absolute correlation and RELIEF, then
score the top m of each ranking. The same shared noise seed is used for
every subset so the numbers are comparable. Sequential searches and the
exhaustive oracle run on a small slice of the data.
"""

import numpy as np

from spsafs import (CvConfig, CvEvaluator, FeatureMask, ModelSpec, SpsaFsConfig, SyntheticSpec, cv_loss,
                    exhaustive_best, make_synthetic, rank_correlation, rank_features, rank_relief, run_spsafs,
                    sffs, sfs)

data = make_synthetic(SyntheticSpec(n=150, p=16, informative=(2, 7, 11), noise_sd=0.4, seed=5))
model, cv, shared_seed = ModelSpec("gnb"), CvConfig(folds=5), 99
evaluator = CvEvaluator(data, model, cv)

orders = {
    "spsa-fs": rank_features(run_spsafs(evaluator, 16, SpsaFsConfig(iterations=100), seed=1), 16),
    "correlation": rank_correlation(data).order,
    "relief": rank_relief(data).order,
}
full = cv_loss(data, FeatureMask.full(16), model, cv, shared_seed)

print("m   " + "  ".join(f"{name:>11}" for name in orders) + "         full")
for m in (2, 3, 4, 8):
    row = [cv_loss(data, FeatureMask.from_indices(order[:m], 16), model, cv, shared_seed) for order in orders.values()]
    print(f"{m:<3} " + "  ".join(f"{v:11.3f}" for v in row) + f"  {full:11.3f}")

# on eight features the exhaustive oracle is cheap (255 subsets)
small = CvEvaluator(type(data)(data.x[:, :8], data.y, data.feature_names[:8], data.task_kind), model, cv)
for name, search in (("sfs", sfs), ("sffs", sffs), ("exhaustive", exhaustive_best)):
    res = search(small, 8, noise_seed=shared_seed)
    print(f"{name:>10}: loss {res.loss:.3f} with {res.mask.indices} after {res.evaluations} evaluations")
