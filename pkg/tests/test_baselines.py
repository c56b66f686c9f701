import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spsafs.baselines import (
    MAX_EXHAUSTIVE_P,
    SearchBudget,
    exhaustive_best,
    rank_correlation,
    rank_relief,
    sbs,
    sfbs,
    sffs,
    sfs,
)
from spsafs.data_io import SyntheticSpec, make_rng, make_synthetic
from spsafs.evaluators import CvConfig, CvEvaluator, ModelSpec
from spsafs.types import CLASSIFICATION, REGRESSION, Dataset, FeatureMask


def xor_weak_loss(mask, noise_seed=0):
    """Features 0 and 1 only help together (XOR); 2 is a weak stand-alone signal; 3 is noise."""
    s = set(mask.indices)
    loss = 0.5
    if {0, 1} <= s:
        loss = 0.0
    elif 2 in s:
        loss = 0.4
    return loss + 0.01 * len(s - {0, 1, 2}) + (0.01 if {0, 1} <= s and 2 in s else 0.0)


RELIEF_X = np.array([[0.0, 0.0], [0.1, 1.0], [0.2, 0.5], [0.9, 0.1], [1.0, 0.9], [0.8, 0.6]])
RELIEF_Y = np.array([0, 0, 0, 1, 1, 1])


def relief_oracle(x, y):
    """Plain-loop RELIEF over every row, range-scaled, lowest index on distance ties."""
    n, p = x.shape
    span = [max(x[:, j]) - min(x[:, j]) or 1.0 for j in range(p)]
    z = [[x[i][j] / span[j] for j in range(p)] for i in range(n)]
    w = [0.0] * p
    for i in range(n):
        best = {}
        for r in range(n):
            if r == i:
                continue
            d = sum((z[i][j] - z[r][j]) ** 2 for j in range(p))
            key = "hit" if y[r] == y[i] else "miss"
            if key not in best or d < best[key][0]:
                best[key] = (d, r)
        for j in range(p):
            w[j] += abs(z[i][j] - z[best["miss"][1]][j]) - abs(z[i][j] - z[best["hit"][1]][j])
    return [v / n for v in w]


class TestSequential:
    def test_sfs_stops_without_improvement(self):
        res = sfs(xor_weak_loss, 4)
        assert res.mask.indices == (2,) and res.loss == 0.4
        assert [s.feature for s in res.steps] == [2]

    def test_sffs_beats_sfs_on_xor(self):
        forward, floating = sfs(xor_weak_loss, 4), sffs(xor_weak_loss, 4)
        assert floating.loss < forward.loss
        assert floating.mask.indices == (0, 1)
        assert any(s.action == "remove" for s in floating.steps)

    def test_sbs_and_sfbs(self):
        back = sbs(xor_weak_loss, 4)
        assert back.mask.indices == (0, 1) and back.loss == 0.0
        assert sfbs(xor_weak_loss, 4).loss == 0.0

    def test_target_size(self):
        res = sfs(xor_weak_loss, 4, SearchBudget(target_subset_size=3))
        assert res.mask.count == 3 and len(res.order) == 3

    def test_budget_truncates(self):
        res = sfs(xor_weak_loss, 4, SearchBudget(max_evaluations=5))
        assert res.truncated and res.evaluations == 5
        assert not res.mask.is_empty

    def test_sbs_keeps_one_feature(self):
        res = sbs(lambda m, s: 0.1 * m.count, 3)
        # equal losses at each size: the lowest index goes first, leaving the last feature
        assert res.mask.indices == (2,)

    def test_orders_are_permutations(self):
        for search in (sbs, sfbs):
            assert sorted(search(xor_weak_loss, 4).order) == [0, 1, 2, 3]
        order = sffs(xor_weak_loss, 4).order
        assert sorted(order) == [0, 1, 2, 3]
        assert order[:2] == [0, 1]  # feature 2 was dropped by a conditional step and re-entered later

    def test_shared_noise_seed(self):
        seeds = set()
        sffs(lambda m, s: seeds.add(s) or 0.3, 3, noise_seed=17)
        assert seeds == {17}

    def test_history_counts_evaluations(self):
        ds = make_synthetic(SyntheticSpec(60, 5, (0, 1), 0.3, seed=2))
        ev = CvEvaluator(ds, ModelSpec("gnb"), CvConfig(3))
        res = sffs(ev, 5)
        assert res.evaluations == len(res.history) == ev.calls


class TestExhaustive:
    def test_finds_table_optimum(self):
        res = exhaustive_best(xor_weak_loss, 4)
        assert res.mask.indices == (0, 1) and res.evaluations == 15

    def test_tie_prefers_smaller_then_lexicographic(self):
        res = exhaustive_best(lambda m, s: 0.2, 3)
        assert res.mask.indices == (0,)
        res = exhaustive_best(lambda m, s: 0.2 if m.count == 2 else 0.3, 3)
        assert res.mask.indices == (0, 1)

    def test_limit(self):
        with pytest.raises(ValueError):
            exhaustive_best(xor_weak_loss, MAX_EXHAUSTIVE_P + 1)

    @pytest.mark.parametrize("seed", range(20))
    def test_never_beaten_on_shared_seed(self, seed):
        rng = make_rng(seed)
        table = {bits: float(rng.random()) for bits in itertools.product((0, 1), repeat=6)}

        def loss(mask, noise_seed):
            return table[mask.bits]

        best = exhaustive_best(loss, 6).loss
        for search in (sfs, sbs, sffs, sfbs):
            assert best <= search(loss, 6).loss


class TestRankers:
    def test_relief_hand_instance(self):
        ds = Dataset(RELIEF_X, RELIEF_Y, (), CLASSIFICATION)
        ranking = rank_relief(ds)
        assert ranking.order[0] == 0
        np.testing.assert_allclose(ranking.scores, relief_oracle(RELIEF_X, RELIEF_Y), atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**40))
    def test_relief_matches_oracle(self, seed):
        rng = make_rng(seed)
        x = rng.random((9, 3))
        y = np.array([0, 1, 2] * 3)
        np.testing.assert_allclose(rank_relief(Dataset(x, y, (), CLASSIFICATION)).scores, relief_oracle(x, y), atol=1e-12)

    def test_relief_singleton_flag_and_subsample(self):
        x = np.array([[0.0], [0.1], [1.0]])
        assert "singleton-class" in rank_relief(Dataset(x, [0, 0, 1], (), CLASSIFICATION)).flags
        ds = make_synthetic(SyntheticSpec(50, 4, (1,), 0.0, seed=1))
        a, b = rank_relief(ds, num_samples=10, seed=3), rank_relief(ds, num_samples=10, seed=3)
        assert a == b and a.order[0] == 1

    def test_relief_rejects_regression(self):
        ds = make_synthetic(SyntheticSpec(20, 3, (0,), 0.1, REGRESSION))
        with pytest.raises(ValueError):
            rank_relief(ds)

    @pytest.mark.parametrize("kind", [CLASSIFICATION, REGRESSION])
    def test_correlation_oracle(self, kind):
        ds = make_synthetic(SyntheticSpec(80, 6, (2, 4), 0.5, kind, seed=4))
        y = ds.y.astype(float)
        expected = [abs(np.cov(ds.x[:, j], y)[0, 1] / np.sqrt(np.var(ds.x[:, j], ddof=1) * np.var(y, ddof=1))) for j in range(6)]
        np.testing.assert_allclose(rank_correlation(ds).scores, expected, atol=1e-12)

    def test_correlation_single_feature_signal(self):
        rng = make_rng(0)
        x = rng.standard_normal((50, 4))
        ds = Dataset(x, x[:, 0].copy(), (), REGRESSION)
        ranking = rank_correlation(ds)
        assert ranking.top(1) == [0] and ranking.scores[0] == pytest.approx(1.0)

    def test_constant_feature_scores_zero(self):
        x = np.column_stack([np.ones(10), np.arange(10.0)])
        assert rank_correlation(Dataset(x, np.arange(10.0), (), REGRESSION)).scores[0] == 0.0

    def test_top_range(self):
        ranking = rank_correlation(make_synthetic(SyntheticSpec(20, 3, (0,), 0.1, REGRESSION)))
        with pytest.raises(ValueError):
            ranking.top(4)
