"""Comparison methods: sequential wrapper searches, filter rankers, exhaustive oracle.

All wrapper searches measure every candidate with one fixed ``noise_seed``,
so losses they compare (and the loss they report) are values of a single
deterministic function of the mask. Each evaluator call costs one unit of
:class:`SearchBudget`. Feature indices are 0-based throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .data_io import make_rng
from .types import Dataset, FeatureMask

EMPTY_LOSS = 1.0
MAX_EXHAUSTIVE_P = 20


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class SearchBudget:
    max_evaluations: int = 10**9
    target_subset_size: int | None = None

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.target_subset_size is not None and self.target_subset_size < 1:
            raise ValueError("target_subset_size must be >= 1")


@dataclass(frozen=True)
class Step:
    action: str  # "add" or "remove"
    feature: int
    mask: FeatureMask
    loss: float


@dataclass
class SearchResult:
    """Outcome of a wrapper search.

    ``steps`` lists accepted moves in order; ``history`` every (mask, loss)
    measured; ``order`` the features in the order they entered (forward
    searches) or the reverse removal order followed by survivors (backward).
    """

    mask: FeatureMask
    loss: float
    steps: list[Step] = field(default_factory=list)
    history: list[tuple[FeatureMask, float]] = field(default_factory=list)
    evaluations: int = 0
    truncated: bool = False
    order: list[int] = field(default_factory=list)


class _Scorer:
    def __init__(self, evaluator, noise_seed: int, budget: SearchBudget):
        self._fn = evaluator.evaluate if hasattr(evaluator, "evaluate") else evaluator
        self.noise_seed = noise_seed
        self.budget = budget
        self.history: list[tuple[FeatureMask, float]] = []

    @property
    def used(self) -> int:
        return len(self.history)

    def __call__(self, mask: FeatureMask) -> float:
        if mask.is_empty:
            return EMPTY_LOSS
        if self.used >= self.budget.max_evaluations:
            raise BudgetExhausted
        loss = float(self._fn(mask, self.noise_seed))
        self.history.append((mask, loss))
        return loss

    def best_seen(self) -> tuple[FeatureMask, float]:
        return min(self.history, key=lambda ml: (ml[1], ml[0].count))


def _best_candidate(score, base: FeatureMask, candidates, value: int):
    """Lowest-loss single-bit flip of ``base``; ties go to the lower index."""
    best = None
    for j in candidates:
        loss = score(base.with_bit(j, value))
        if best is None or loss < best[1]:
            best = (j, loss)
    return best


def _result(score: _Scorer, mask: FeatureMask, loss: float, steps, truncated: bool, order) -> SearchResult:
    if mask.is_empty:
        mask, loss = score.best_seen()
    return SearchResult(mask, loss, steps, score.history, score.used, truncated, order)


def _check_p(p: int) -> None:
    if p < 1:
        raise ValueError("p must be >= 1")


def sfs(evaluator, p: int, budget: SearchBudget = SearchBudget(), noise_seed: int = 0) -> SearchResult:
    """Sequential forward selection.

    Adds the best single feature while that strictly lowers the loss (the
    empty set scores 1.0); with ``target_subset_size`` it keeps adding until
    the target is reached regardless of improvement.
    """
    _check_p(p)
    score = _Scorer(evaluator, noise_seed, budget)
    target = budget.target_subset_size
    current, current_loss = FeatureMask((0,) * p), EMPTY_LOSS
    steps: list[Step] = []
    try:
        while current.count < (p if target is None else min(target, p)):
            pick = _best_candidate(score, current, [j for j in range(p) if not current.bits[j]], 1)
            if target is None and not pick[1] < current_loss:
                break
            current, current_loss = current.with_bit(pick[0], 1), pick[1]
            steps.append(Step("add", pick[0], current, current_loss))
    except BudgetExhausted:
        return _result(score, current, current_loss, steps, True, [s.feature for s in steps])
    return _result(score, current, current_loss, steps, False, [s.feature for s in steps])


def sbs(evaluator, p: int, budget: SearchBudget = SearchBudget(), noise_seed: int = 0) -> SearchResult:
    """Sequential backward selection; never removes the last feature."""
    _check_p(p)
    score = _Scorer(evaluator, noise_seed, budget)
    target = budget.target_subset_size
    current = FeatureMask.full(p)
    steps: list[Step] = []
    removed: list[int] = []
    try:
        current_loss = score(current)
        while current.count > (1 if target is None else max(target, 1)):
            pick = _best_candidate(score, current, current.indices, 0)
            if target is None and not pick[1] < current_loss:
                break
            current, current_loss = current.with_bit(pick[0], 0), pick[1]
            steps.append(Step("remove", pick[0], current, current_loss))
            removed.append(pick[0])
    except BudgetExhausted:
        return _result(score, current, current_loss, steps, True, list(current.indices) + removed[::-1])
    return _result(score, current, current_loss, steps, False, list(current.indices) + removed[::-1])


def _floating(evaluator, p: int, budget: SearchBudget, noise_seed: int, forward: bool) -> SearchResult:
    """Pudil-style floating search run to the target size (default: p or 1).

    After each main step, conditional steps in the opposite direction are
    taken while they strictly beat the best loss recorded at the resulting
    subset size. Returns the best subset seen at any size (ties: smaller).
    """
    _check_p(p)
    score = _Scorer(evaluator, noise_seed, budget)
    target = budget.target_subset_size
    main, back = (1, 0) if forward else (0, 1)
    best_at: dict[int, tuple[float, FeatureMask]] = {}
    steps: list[Step] = []

    def record(mask, loss):
        if mask.count not in best_at or loss < best_at[mask.count][0]:
            best_at[mask.count] = (loss, mask)

    def finished(mask):
        if forward:
            return mask.count >= (p if target is None else min(target, p))
        return mask.count <= (1 if target is None else max(target, 1))

    truncated = False
    try:
        if forward:
            current, current_loss = FeatureMask((0,) * p), EMPTY_LOSS
        else:
            current = FeatureMask.full(p)
            current_loss = score(current)
            record(current, current_loss)
        while not finished(current):
            pool = [j for j in range(p) if current.bits[j] != main]
            j, loss = _best_candidate(score, current, pool, main)
            current, current_loss = current.with_bit(j, main), loss
            steps.append(Step("add" if forward else "remove", j, current, loss))
            record(current, loss)
            last = j
            # conditional steps never undo the move just made and never leave 2 features
            while (current.count > 2) if forward else (current.count < p - 1):
                pool = [i for i in range(p) if current.bits[i] == main and i != last]
                if not pool:
                    break
                i, loss = _best_candidate(score, current, pool, back)
                size = current.count + (-1 if forward else 1)
                if not loss < best_at.get(size, (np.inf,))[0]:
                    break
                current, current_loss = current.with_bit(i, back), loss
                steps.append(Step("remove" if forward else "add", i, current, loss))
                record(current, loss)
    except BudgetExhausted:
        truncated = True
    if best_at:
        loss, mask = min(best_at.values(), key=lambda lm: (lm[0], lm[1].count))
    else:
        mask, loss = current, current_loss
    return _result(score, mask, loss, steps, truncated, _floating_order(steps, p, forward))


def _floating_order(steps, p: int, forward: bool) -> list[int]:
    """Rank features by their last main-direction move; a backtracked move is undone."""
    main = "add" if forward else "remove"
    moved: list[int] = []
    for s in steps:
        if s.feature in moved:
            moved.remove(s.feature)
        if s.action == main:
            moved.append(s.feature)
    rest = [j for j in range(p) if j not in moved]
    return moved + rest if forward else rest + moved[::-1]


def sffs(evaluator, p: int, budget: SearchBudget = SearchBudget(), noise_seed: int = 0) -> SearchResult:
    """Sequential forward floating selection."""
    return _floating(evaluator, p, budget, noise_seed, forward=True)


def sfbs(evaluator, p: int, budget: SearchBudget = SearchBudget(), noise_seed: int = 0) -> SearchResult:
    """Sequential backward floating selection."""
    return _floating(evaluator, p, budget, noise_seed, forward=False)


def exhaustive_best(evaluator, p: int, noise_seed: int = 0) -> SearchResult:
    """Evaluate all ``2^p - 1`` non-empty subsets once and return the best.

    Subsets are visited by size, then lexicographically by index tuple, and
    only a strictly lower loss replaces the incumbent, so ties resolve to
    fewer features and then the lexicographically smaller index tuple.
    """
    _check_p(p)
    if p > MAX_EXHAUSTIVE_P:
        raise ValueError(f"exhaustive search is limited to p <= {MAX_EXHAUSTIVE_P}, got {p}")
    score = _Scorer(evaluator, noise_seed, SearchBudget())
    best = None
    for size in range(1, p + 1):
        for idx in itertools.combinations(range(p), size):
            mask = FeatureMask.from_indices(idx, p)
            loss = score(mask)
            if best is None or loss < best[1]:
                best = (mask, loss)
    return SearchResult(best[0], best[1], [], score.history, score.used, False, list(best[0].indices))


@dataclass(frozen=True)
class Ranking:
    order: tuple[int, ...]
    scores: tuple[float, ...]  # indexed by feature, not by rank
    flags: tuple[str, ...] = ()

    def top(self, m: int) -> list[int]:
        if not 1 <= m <= len(self.order):
            raise ValueError(f"m must be in [1, {len(self.order)}], got {m}")
        return list(self.order[:m])


def _sorted_ranking(scores, flags=()) -> Ranking:
    scores = [float(s) for s in scores]
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return Ranking(tuple(order), tuple(scores), tuple(flags))


def rank_correlation(dataset: Dataset) -> Ranking:
    """Rank features by absolute Pearson correlation with the response.

    Class labels are used as their integer codes. Constant features score 0.
    """
    x = dataset.x
    y = dataset.y.astype(np.float64)
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sxx = (xc**2).sum(axis=0)
    syy = float((yc**2).sum())
    cov = xc.T @ yc
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where((sxx > 0) & (syy > 0), cov / np.sqrt(sxx * syy), 0.0)
    return _sorted_ranking(np.abs(r))


def rank_relief(dataset: Dataset, num_samples: int | None = None, seed: int = 0) -> Ranking:
    """Kira-Rendell RELIEF weights.

    Feature differences are scaled by the feature's range; nearest hit and
    miss use Euclidean distance on range-scaled features (ties to the lower
    row index). Weights are divided by the number of sampled instances.
    All rows are used, in order, when ``num_samples`` is None or >= n.
    Instances whose class has no other member contribute only the miss
    term; the ranking then carries the ``"singleton-class"`` flag.
    """
    if not dataset.is_classification:
        raise ValueError("RELIEF needs a classification dataset")
    x, y, n = dataset.x, dataset.y, dataset.n
    span = x.max(axis=0) - x.min(axis=0)
    scale = np.where(span > 0, span, 1.0)
    z = x / scale
    if num_samples is None or num_samples >= n:
        rows = np.arange(n)
    else:
        if num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        rows = np.sort(make_rng(seed).permutation(n)[:num_samples])
    w = np.zeros(dataset.p)
    flags = set()
    for i in rows:
        d = ((z - z[i]) ** 2).sum(axis=1)
        d[i] = np.inf
        same = y == y[i]
        hit_d = np.where(same, d, np.inf)
        miss_d = np.where(~same, d, np.inf)
        miss = int(np.argmin(miss_d))
        w += np.abs(z[i] - z[miss])
        if np.isfinite(hit_d).any():
            w -= np.abs(z[i] - z[int(np.argmin(hit_d))])
        else:
            flags.add("singleton-class")
    w /= len(rows)
    return _sorted_ranking(w, sorted(flags))
