import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epifuse import baselines
from epifuse.evaluation import (
    build_eval_report,
    coefficient_traces,
    matrix_similarity,
    pearson,
    relative_improvement,
    rmse,
)
from epifuse.errors import EpifuseError

from _oracles import cosine_direct, pearson_two_pass, rmse_two_pass
from test_forecaster import lag_panel


class TestRmse:
    def test_identity_is_zero(self):
        assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_constant_offset(self):
        obs = np.array([4.0, 9.0, 2.0])
        assert rmse(obs + 3.5, obs) == pytest.approx(3.5, abs=1e-12)
        assert rmse(obs - 3.5, obs) == pytest.approx(3.5, abs=1e-12)

    def test_against_two_pass_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.normal(size=11)
            b = rng.normal(size=11)
            assert rmse(a, b) == pytest.approx(rmse_two_pass(a, b), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=7), rng.normal(size=7)
        assert rmse(a, b) == rmse(b, a)

    def test_length_mismatch(self):
        with pytest.raises(EpifuseError, match="length mismatch"):
            rmse([1.0], [1.0, 2.0])


class TestPearson:
    def test_positive_affine_of_obs(self):
        obs = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        assert pearson(2 * obs + 1, obs) == pytest.approx(1.0, abs=1e-12)

    def test_negation(self):
        obs = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        assert pearson(-obs, obs) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_variance_invalid(self):
        assert pearson([2.0, 2.0, 2.0], [1.0, 2.0, 3.0]) is None

    def test_needs_three_points(self):
        with pytest.raises(EpifuseError, match="at least 3"):
            pearson([1.0, 2.0], [1.0, 2.0])

    @given(
        a=st.floats(min_value=0.01, max_value=100),
        b=st.floats(min_value=-50, max_value=50),
    )
    @settings(max_examples=25)
    def test_affine_invariance(self, a, b):
        x = np.array([1.0, 5.0, 2.0, 8.0, 3.0])
        y = np.array([2.0, 1.0, 6.0, 4.0, 9.0])
        base = pearson(x, y)
        assert pearson(a * x + b, y) == pytest.approx(base, abs=1e-12)


class TestRelativeImprovement:
    def test_anchors(self):
        assert relative_improvement(2.0, 2.0) == 1.0
        assert relative_improvement(1.0, 2.0) == 2.0
        assert relative_improvement(2.0, 1.0) == 0.5

    def test_zero_cases(self):
        assert relative_improvement(0.0, 1.0) == math.inf
        assert relative_improvement(0.0, 0.0) == 1.0
        assert relative_improvement(1.0, 0.0) == 0.0

    @given(
        m=st.floats(min_value=1e-6, max_value=1e6),
        b=st.floats(min_value=1e-6, max_value=1e6),
    )
    @settings(max_examples=30)
    def test_reciprocal_identity(self, m, b):
        assert relative_improvement(m, b) * relative_improvement(b, m) == pytest.approx(
            1.0, rel=1e-12
        )


class TestCoefficientTraces:
    def test_identical_runs_give_common_coefficients(self):
        d = dt.date(2020, 2, 1)
        run = {"north": {"cases_lag0": 0.8, "media_count": -0.1}}
        rows = coefficient_traces({d: [run, run, run]}, ("cases_lag0", "media_count"))
        assert {(r.feature, r.mean_coef) for r in rows} == {
            ("cases_lag0", 0.8),
            ("media_count", -0.1),
        }

    def test_all_zero_models_give_zero_traces(self):
        d = dt.date(2020, 2, 1)
        run = {"north": {"cases_lag0": 0.0}}
        rows = coefficient_traces({d: [run, run]}, ("cases_lag0",))
        assert all(r.mean_coef == 0.0 for r in rows)

    def test_two_run_arithmetic_mean(self):
        d1, d2 = dt.date(2020, 2, 1), dt.date(2020, 2, 3)
        store = {
            d1: [
                {"north": {"a": 1.0, "b": 2.0}},
                {"north": {"a": 3.0, "b": 10.0}},
            ],
            d2: [{"north": {"a": 5.0, "b": 0.0}}],
        }
        rows = coefficient_traces(store, ("a", "b"))
        got = {(r.as_of, r.feature): r.mean_coef for r in rows}
        # spreadsheet oracle: plain column means
        assert got[(d1, "a")] == (1.0 + 3.0) / 2
        assert got[(d1, "b")] == (2.0 + 10.0) / 2
        assert got[(d2, "a")] == 5.0
        assert got[(d2, "b")] == 0.0

    def test_regions_share_feature_rows_in_order(self):
        d = dt.date(2020, 2, 5)
        store = {d: [{"a_region": {"f1": 1.0}, "b_region": {"f1": 2.0}}]}
        rows = coefficient_traces(store, ("f1", "f2"))
        per_region = {}
        for r in rows:
            per_region.setdefault(r.region, []).append(r.feature)
        assert all(v == ["f1", "f2"] for v in per_region.values())


class TestMatrixSimilarity:
    def test_identical_matrices(self):
        # off-diagonal entries must vary for the correlation to be defined
        a = np.array([[1.0, 0.3, -0.2], [0.3, 1.0, 0.6], [-0.2, 0.6, 1.0]])
        p, c = matrix_similarity(a, a.copy())
        assert p == pytest.approx(1.0, abs=1e-12)
        assert c == pytest.approx(1.0, abs=1e-12)

    def test_negated(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 3))
        p, c = matrix_similarity(a, -a)
        assert p == pytest.approx(-1.0, abs=1e-12)
        assert c == pytest.approx(-1.0, abs=1e-12)

    def test_against_direct_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.normal(size=(4, 4))
            b = rng.normal(size=(4, 4))
            p, c = matrix_similarity(a, b)
            mask = ~np.eye(4, dtype=bool)
            va, vb = a[mask], b[mask]
            assert p == pytest.approx(pearson_two_pass(va, vb), abs=1e-12)
            assert c == pytest.approx(cosine_direct(va, vb), abs=1e-12)

    def test_diagonal_flag(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(3, 3))
        b = rng.normal(size=(3, 3))
        p_full, c_full = matrix_similarity(a, b, include_diagonal=True)
        assert p_full == pytest.approx(pearson_two_pass(a.ravel(), b.ravel()), abs=1e-12)
        assert c_full == pytest.approx(cosine_direct(a.ravel(), b.ravel()), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(EpifuseError, match="dimensions differ"):
            matrix_similarity(np.eye(2), np.eye(3))


class TestEvalReport:
    def test_persistence_rmse_matches_hand_rolled_oracle(self):
        rng = np.random.default_rng(9)
        bins = rng.integers(0, 200, size=(3, 10)).astype(float)
        agg = lag_panel(bins.tolist())
        records = []
        for t in range(4, 9):
            records.extend(baselines.persistence(agg, agg.bins[t]))
        rows = build_eval_report(records, agg)
        for row in rows:
            r = agg.region_index(row.region)
            preds = [bins[r, t] for t in range(4, 9)]
            obs = [bins[r, t + 1] for t in range(4, 9)]
            assert row.rmse == rmse_two_pass(preds, obs)  # exact, same floats
            assert row.relative_improvement == 1.0
            assert row.n_points == 5

    def test_unobserved_targets_are_skipped(self):
        agg = lag_panel([[1, 2, 3, 4, 5]])
        records = baselines.persistence(agg, agg.bins[-1])  # target beyond panel
        rows = build_eval_report(records, agg)
        assert rows == []
