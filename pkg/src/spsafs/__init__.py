"""Binary SPSA feature selection with Barzilai-Borwein gains, plus baselines."""

from .baselines import (
    Ranking,
    SearchBudget,
    SearchResult,
    exhaustive_best,
    rank_correlation,
    rank_relief,
    sbs,
    sfbs,
    sffs,
    sfs,
)
from .data_io import CsvSchema, DataError, SyntheticSpec, derive_seed, load_csv, make_synthetic, sample_perturbation, write_csv
from .engine import (
    GainState,
    GradientWindow,
    MonotoneGainConfig,
    SpsaFsConfig,
    average_gradient,
    bb_gain,
    bb_step,
    clip_gain,
    estimate_gradient,
    monotone_gain,
    rank_features,
    run_bspsa,
    run_spsafs,
    smooth_gain,
    spsa_gradient,
)
from .evaluators import CvConfig, CvEvaluator, ModelSpec, cv_loss
from .types import Dataset, FeatureMask, IterationRecord, RunTrace, bound, round_mask

__version__ = "0.1.0"
