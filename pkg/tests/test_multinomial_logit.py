"""Baseline-category MNL: closed forms, oracles, equivariances, comparison."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pmclogit import multinomial_logit as mnl
from pmclogit import ordered_logit as ol
from pmclogit.errors import DataError


def binary_logit_newton(X, target):
    """Independent binary-logit MLE oracle (intercept first)."""
    Z = np.column_stack([np.ones(len(target)), X])
    theta = np.zeros(Z.shape[1])
    for _ in range(60):
        p = 1.0 / (1.0 + np.exp(-(Z @ theta)))
        g = Z.T @ (target - p)
        H = Z.T @ (Z * (p * (1 - p))[:, None])
        theta += np.linalg.solve(H, g)
        if np.max(np.abs(g)) < 1e-12:
            break
    return theta


class TestMnlProbs:
    def test_all_zero_parameters_uniform(self):
        params = mnl.MnlParams(2, {1: (0.0, np.zeros(2)), 3: (0.0, np.zeros(2))})
        probs = mnl.mnl_probs([0.3, -0.4], params)
        np.testing.assert_allclose(probs, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_log_two_intercept_odds(self):
        # two effective categories: ln 2 intercept gives odds 2:1
        params = mnl.MnlParams(2, {1: (math.log(2.0), np.zeros(0))})
        probs = mnl.mnl_probs([], params)
        assert probs[0] == pytest.approx(2 / 3, abs=1e-14)

    def test_matches_softmax_oracle(self, rng):
        for _ in range(30):
            k = int(rng.integers(0, 4))
            C = int(rng.integers(2, 6))
            baseline = int(rng.integers(1, C + 1))
            per = {
                c: (float(rng.standard_normal()), rng.standard_normal(k))
                for c in range(1, C + 1)
                if c != baseline
            }
            params = mnl.MnlParams(baseline, per)
            x = rng.standard_normal(k)
            eta = np.zeros(C)
            for c, (b0, b) in per.items():
                eta[c - 1] = b0 + x @ b
            expected = np.exp(eta) / np.exp(eta).sum()
            np.testing.assert_allclose(mnl.mnl_probs(x, params), expected, atol=1e-12)

    def test_shift_invariance(self, rng):
        # adding a constant to every linear predictor leaves probabilities fixed
        k = 3
        x = rng.standard_normal(k)
        per = {1: (0.4, rng.standard_normal(k)), 3: (-0.2, rng.standard_normal(k))}
        base = mnl.mnl_probs(x, mnl.MnlParams(2, per))
        eta = {c: b0 + x @ b for c, (b0, b) in per.items()}
        eta[2] = 0.0
        shift = 1.7
        shifted = np.exp(np.array([eta[1], eta[2], eta[3]]) + shift)
        shifted /= shifted.sum()
        np.testing.assert_allclose(base, shifted, atol=1e-14)

    def test_dimension_mismatch(self):
        params = mnl.MnlParams(2, {1: (0.0, np.zeros(2))})
        with pytest.raises(ValueError, match="length"):
            mnl.mnl_probs([1.0], params)


class TestMnlFit:
    def test_binary_equivalence(self, rng):
        n = 2500
        X = rng.standard_normal((n, 2))
        truth = np.array([0.4, 0.7, -1.1])
        p = 1.0 / (1.0 + np.exp(-(truth[0] + X @ truth[1:])))
        y = np.where(rng.random(n) < p, 1, 2).astype(np.int64)
        data = {"y": y, "x1": X[:, 0], "x2": X[:, 1]}
        fit = mnl.mnl_fit(data, ol.OlmSpec("y", ("x1", "x2"), 2), baseline=2)
        oracle = binary_logit_newton(X, (y == 1).astype(float))
        b0, b = fit.params.per_category[1]
        assert abs(b0 - oracle[0]) < 1e-6
        np.testing.assert_allclose(b, oracle[1:], atol=1e-6)

    def test_intercept_only_closed_form(self):
        counts = {1: 17, 2: 40, 3: 23}
        y = sum(([c] * n for c, n in counts.items()), [])
        fit = mnl.mnl_fit({"y": y}, ol.OlmSpec("y", (), 3), baseline=2)
        for c in (1, 3):
            assert fit.params.per_category[c][0] == pytest.approx(
                math.log(counts[c] / counts[2]), abs=1e-8
            )

    def test_parameter_recovery(self):
        from pmclogit.synthetic import philox_generator

        gen = philox_generator(4, "mnl-recovery")
        n = 20000
        X = gen.standard_normal((n, 2))
        truth = {1: (0.5, np.array([0.8, -0.3])), 3: (-0.4, np.array([0.2, 0.6]))}
        eta = np.zeros((n, 3))
        for c, (b0, b) in truth.items():
            eta[:, c - 1] = b0 + X @ b
        p = np.exp(eta)
        p /= p.sum(axis=1, keepdims=True)
        u = gen.random(n)
        y = 1 + (u > p[:, 0]).astype(int) + (u > p[:, :2].sum(axis=1)).astype(int)
        data = {"y": y, "x1": X[:, 0], "x2": X[:, 1]}
        fit = mnl.mnl_fit(data, ol.OlmSpec("y", ("x1", "x2"), 3), baseline=2)
        se = np.sqrt(np.diag(fit.vcov))
        est = fit.params.coef_matrix().ravel()
        flat_truth = np.concatenate([[truth[1][0]], truth[1][1], [truth[3][0]], truth[3][1]])
        assert np.all(np.abs(est - flat_truth) <= 3 * se)

    def test_baseline_change_equivariance(self, toy_ologit_data, rng):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        f2 = mnl.mnl_fit(toy_ologit_data, spec, baseline=2)
        f1 = mnl.mnl_fit(toy_ologit_data, spec, baseline=1)
        for _ in range(10):
            x = rng.standard_normal(3)
            np.testing.assert_allclose(
                mnl.mnl_probs(x, f2.params), mnl.mnl_probs(x, f1.params), atol=1e-8
            )
        # coefficients re-expressed against the new baseline are log-odds differences
        b0_3on2, b_3on2 = f2.params.per_category[3]
        b0_1on2, b_1on2 = f2.params.per_category[1]
        b0_3on1, b_3on1 = f1.params.per_category[3]
        assert b0_3on1 == pytest.approx(b0_3on2 - b0_1on2, abs=1e-6)
        np.testing.assert_allclose(b_3on1, b_3on2 - b_1on2, atol=1e-6)

    def test_gradient_matches_finite_differences(self, toy_ologit_data):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        gen = np.random.default_rng(11)
        for _ in range(15):
            coef = gen.standard_normal((2, 4)) * 0.5
            params = mnl.MnlParams.from_coef_matrix(coef, 2, 3)
            g = mnl.gradient(toy_ologit_data, spec, params)
            theta = coef.ravel().copy()
            fd = np.empty_like(theta)
            for i in range(len(theta)):
                h = 1e-5 * (1 + abs(theta[i]))
                tp, tm = theta.copy(), theta.copy()
                tp[i] += h
                tm[i] -= h
                fd[i] = (
                    mnl.log_likelihood(toy_ologit_data, spec,
                                       mnl.MnlParams.from_coef_matrix(tp.reshape(2, 4), 2, 3))
                    - mnl.log_likelihood(toy_ologit_data, spec,
                                         mnl.MnlParams.from_coef_matrix(tm.reshape(2, 4), 2, 3))
                ) / (2 * h)
            rel = np.abs(g - fd) / np.maximum(1.0, np.abs(g))
            assert rel.max() <= 1e-6

    def test_duplication_doubles_gradient(self, toy_ologit_data):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        params = mnl.MnlParams.from_coef_matrix(np.full((2, 4), 0.2), 2, 3)
        g = mnl.gradient(toy_ologit_data, spec, params)
        doubled = {k: np.concatenate([v, v]) for k, v in toy_ologit_data.items()}
        assert np.array_equal(mnl.gradient(doubled, spec, params), 2.0 * g)

    def test_row_permutation_bit_identical(self, toy_ologit_data, rng):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        fit = mnl.mnl_fit(toy_ologit_data, spec)
        perm = rng.permutation(len(toy_ologit_data["y"]))
        fit2 = mnl.mnl_fit({k: np.asarray(v)[perm] for k, v in toy_ologit_data.items()}, spec)
        assert fit.loglik == fit2.loglik
        np.testing.assert_array_equal(fit.params.coef_matrix(), fit2.params.coef_matrix())

    def test_loglik_never_below_null(self, toy_ologit_data):
        fit = mnl.mnl_fit(toy_ologit_data, ol.OlmSpec("y", ("x1", "x2", "x3"), 3))
        assert fit.loglik >= fit.loglik_null

    def test_serialization_round_trip(self, toy_ologit_data, tmp_path):
        fit = mnl.mnl_fit(toy_ologit_data, ol.OlmSpec("y", ("x1", "x2", "x3"), 3))
        path = tmp_path / "mnl.json"
        fit.save(path)
        loaded = mnl.MnlFit.load(path)
        assert loaded.loglik == fit.loglik
        np.testing.assert_array_equal(loaded.params.coef_matrix(), fit.params.coef_matrix())
        np.testing.assert_array_equal(loaded.vcov, fit.vcov)


class TestCompare:
    def test_reports_pseudo_r2_pair(self, toy_ologit_data):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        olm = ol.fit(toy_ologit_data, spec)
        m = mnl.mnl_fit(toy_ologit_data, spec)
        cmp_ = mnl.compare(olm, m)
        assert cmp_.pseudo_r2_olm == pytest.approx(ol.pseudo_r2(olm), rel=1e-12)
        assert cmp_.pseudo_r2_mnl == pytest.approx(1 - m.loglik / m.loglik_null, rel=1e-12)
        assert cmp_.baseline == 2
        assert [r.name for r in cmp_.rows] == ["x1", "x2", "x3"]

    def test_significance_decrease_flagged(self, toy_ologit_data):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        olm = ol.fit(toy_ologit_data, spec)
        m = mnl.mnl_fit(toy_ologit_data, spec)
        cmp_ = mnl.compare(olm, m)
        row = cmp_.rows[0]
        for c, (coef, t, stars) in row.blocks.items():
            tier = {"": 0, "*": 1, "**": 2, "***": 3}
            expected = tier[stars] - tier[row.olm_stars]
            got = row.significance_change[c]
            if expected < 0:
                assert got == "decreased"
            elif expected > 0:
                assert got == "increased"
            else:
                assert got == "unchanged"

    def test_null_dgp_produces_no_sign_flags(self):
        from pmclogit.synthetic import philox_generator

        gen = philox_generator(21, "null-dgp")
        n = 4000
        data = {
            "y": gen.integers(1, 4, n),
            "x1": gen.standard_normal(n),
            "x2": gen.standard_normal(n),
        }
        spec = ol.OlmSpec("y", ("x1", "x2"), 3)
        cmp_ = mnl.compare(ol.fit(data, spec), mnl.mnl_fit(data, spec))
        for row in cmp_.rows:
            assert not any(row.sign_flip.values())

    def test_row_mismatch_rejected(self, toy_ologit_data):
        spec = ol.OlmSpec("y", ("x1", "x2", "x3"), 3)
        olm = ol.fit(toy_ologit_data, spec)
        smaller = {k: np.asarray(v)[:300] for k, v in toy_ologit_data.items()}
        m = mnl.mnl_fit(smaller, spec)
        with pytest.raises(DataError, match="row mismatch"):
            mnl.compare(olm, m)
