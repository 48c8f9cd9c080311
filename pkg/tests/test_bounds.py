"""Inequality checkers: edge cases with known values, equality detection,
refusals, and small randomized sweeps (the full-volume sweeps live in the
acceptance suite)."""

import math

import numpy as np
import pytest

from jwass import bounds
from jwass import nn_core as nc
from jwass.errors import ContractError
from jwass.ot import EmpiricalJoint, exact_w1


def hard_joint(points, labels, k, weights=None):
    return EmpiricalJoint.from_hard(points, labels, k, weights)


class TestBoundReport:
    def test_pass_within_relative_slack(self):
        r = bounds.BoundReport("prop1", 0, lhs=1.0 + 5e-8, rhs=1.0)
        assert r.passed
        r = bounds.BoundReport("prop1", 0, lhs=1.0 + 5e-7, rhs=1.0)
        assert not r.passed

    def test_infinite_rhs_passes(self):
        r = bounds.BoundReport("lemma2", 0, lhs=123.0, rhs=math.inf)
        assert r.passed and r.slack == math.inf

    def test_json_encodes_infinity_as_string(self):
        r = bounds.BoundReport("lemma2", 0, lhs=1.0, rhs=math.inf)
        d = r.to_json_dict()
        assert d["rhs"] == "inf" and d["slack"] == "inf"
        assert d["pass"] is True


class TestProp1:
    def test_all_equal_zero_chain(self):
        j = bounds.make_lemma2_instance(0)[0]
        r = bounds.check_prop1(j, j, j, j)
        assert r.passed
        np.testing.assert_allclose(r.lhs, 0.0, atol=1e-9)
        np.testing.assert_allclose(r.rhs, 0.0, atol=1e-9)

    def test_collapsed_chain_is_equality(self):
        rng = np.random.default_rng(1)
        pt = hard_joint(rng.normal(size=(4, 2)), rng.integers(0, 2, 4), 2)
        qt = hard_joint(rng.normal(size=(5, 2)), rng.integers(0, 2, 5), 2)
        r = bounds.check_prop1(pt, pt, qt, qt)
        assert r.passed
        np.testing.assert_allclose(r.lhs, r.rhs, atol=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_random_instances_pass(self, seed):
        pt, p, q, qt, scale = bounds.make_prop1_instance(seed)
        r = bounds.check_prop1(pt, p, q, qt, scale, seed=seed)
        assert r.passed, (r.lhs, r.rhs, r.slack)


class TestLemma1:
    def test_equal_components_slack_zero(self):
        rng = np.random.default_rng(2)
        pt = hard_joint(rng.normal(size=(4, 2)), rng.integers(0, 2, 4), 2)
        kd = hard_joint(rng.normal(size=(6, 2)), rng.integers(0, 2, 6), 2)
        r = bounds.check_lemma1(pt, pt, kd, alpha=0.5)
        assert r.passed
        assert abs(r.slack) <= 1e-9

    def test_specializes_to_mixture_self_distance(self):
        # K = Pt: W(mix, Pt) <= (1 - alpha) W(Pt, Pf)
        rng = np.random.default_rng(3)
        pt = hard_joint(rng.normal(size=(4, 2)), rng.integers(0, 2, 4), 2)
        pf = hard_joint(rng.normal(size=(5, 2)), rng.integers(0, 2, 5), 2)
        alpha = 0.3
        r = bounds.check_lemma1(pt, pf, pt, alpha)
        assert r.passed
        w_tp = exact_w1(pt.expand(), pf.expand())[0]
        assert r.lhs <= (1 - alpha) * w_tp + 1e-9

    @pytest.mark.parametrize("seed", range(15))
    def test_random_instances_pass(self, seed):
        pt, pf, kd, alpha, scale = bounds.make_lemma1_instance(seed)
        r = bounds.check_lemma1(pt, pf, kd, alpha, scale, seed=seed)
        assert r.passed, (r.lhs, r.rhs, r.slack)

    def test_alpha_validated(self):
        j = bounds.make_lemma2_instance(4)[0]
        with pytest.raises(ContractError):
            bounds.check_lemma1(j, j, j, alpha=1.5)


class TestLemma2:
    def test_identical_conditionals_zero_both_sides(self):
        pt, _, _ = bounds.make_lemma2_instance(5)
        r = bounds.check_lemma2(pt, pt)
        assert r.passed
        np.testing.assert_allclose(r.lhs, 0.0, atol=1e-9)
        np.testing.assert_allclose(r.rhs, 0.0, atol=1e-9)

    def test_disjoint_support_vacuous_infinity(self):
        pts = np.array([[0.0, 0.0]])
        pt = EmpiricalJoint.from_soft(pts, [[1.0, 0.0]])
        pf = EmpiricalJoint.from_soft(pts, [[0.0, 1.0]])
        r = bounds.check_lemma2(pt, pf, label_scale=1.0)
        assert r.passed
        np.testing.assert_allclose(r.lhs, math.sqrt(2.0), atol=1e-9)
        assert r.rhs == math.inf

    def test_refuses_unshared_marginals(self):
        rng = np.random.default_rng(6)
        pt = hard_joint(rng.normal(size=(3, 2)), [0, 1, 0], 2)
        pf = hard_joint(rng.normal(size=(3, 2)), [0, 1, 0], 2)
        with pytest.raises(ContractError):
            bounds.check_lemma2(pt, pf)

    @pytest.mark.parametrize("seed", range(15))
    def test_random_instances_pass(self, seed):
        pt, pf, scale = bounds.make_lemma2_instance(seed)
        r = bounds.check_lemma2(pt, pf, scale, seed=seed)
        assert r.passed, (r.lhs, r.rhs, r.slack)
        assert math.isfinite(r.rhs)


class TestLemma3:
    def test_equal_measures_zero(self):
        p, _, _ = bounds.make_lemma3_instance(7)
        r = bounds.check_lemma3(p, p)
        assert r.passed
        np.testing.assert_allclose(r.lhs, 0.0, atol=1e-9)

    def test_single_class_equality(self):
        rng = np.random.default_rng(8)
        p = hard_joint(rng.normal(size=(4, 2)), np.zeros(4, dtype=int), 2)
        q = hard_joint(rng.normal(size=(6, 2)), np.zeros(6, dtype=int), 2)
        r = bounds.check_lemma3(p, q)
        assert r.passed
        assert abs(r.slack) <= 1e-9

    def test_mismatched_masses_refused(self):
        p = hard_joint([[0.0, 0.0], [1.0, 0.0]], [0, 1], 2)
        q = hard_joint([[0.0, 0.0], [1.0, 0.0]], [0, 0], 2)
        with pytest.raises(ContractError):
            bounds.check_lemma3(p, q)

    @pytest.mark.parametrize("seed", range(15))
    def test_random_matched_instances_pass(self, seed):
        p, q, scale = bounds.make_lemma3_instance(seed)
        r = bounds.check_lemma3(p, q, scale, seed=seed)
        assert r.passed, (r.lhs, r.rhs, r.slack)


class TestIpf:
    def test_hits_target_masses(self):
        rng = np.random.default_rng(9)
        w = rng.uniform(0.2, 1.0, size=6)
        w /= w.sum()
        t = np.array([0.5, 0.3, 0.2])
        cond = bounds.ipf_conditionals(rng, w, t)
        np.testing.assert_allclose(cond.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(w @ cond, t, atol=1e-11)
        assert (cond > 0).all()

    def test_rejects_zero_target(self):
        rng = np.random.default_rng(10)
        with pytest.raises(ContractError):
            bounds.ipf_conditionals(rng, np.array([0.5, 0.5]),
                                    np.array([1.0, 0.0]))


class TestTheorem1:
    def test_identical_domains_lhs_zero(self):
        pt, pf, _, _, alpha, beta = bounds.make_theorem1_instance(11)
        r = bounds.check_theorem1(pt, pf, pt, pf, alpha, beta)
        assert r.passed
        np.testing.assert_allclose(r.lhs, 0.0, atol=1e-9)

    def test_alpha_near_one_reduces_to_class_terms(self):
        pt, pf, qt, qg, _, _ = bounds.make_theorem1_instance(12)
        r = bounds.check_theorem1(pt, pf, qt, qg, 0.999, 0.999)
        assert r.passed
        np.testing.assert_allclose(r.rhs, sum(r.metadata["class_terms"]),
                                   rtol=1e-2)

    @pytest.mark.parametrize("seed", range(12))
    def test_random_bundles_pass(self, seed):
        pt, pf, qt, qg, alpha, beta = bounds.make_theorem1_instance(seed)
        r = bounds.check_theorem1(pt, pf, qt, qg, alpha, beta, seed=seed)
        assert r.passed, (r.lhs, r.rhs, r.slack)
        assert math.isfinite(r.rhs)


def constant_classifier(k=2, logits=None):
    """Zero weights: every input maps to the same softmax row."""
    layer = nc.DenseLayer(2, k, activation="softmax",
                          rng=np.random.default_rng(0))
    layer.weight.value[...] = 0.0
    layer.bias.value = np.array(logits if logits is not None
                                else [3.0] + [0.0] * (k - 1))
    return nc.MLP([layer])


class TestTheorem2Core:
    def test_constant_classifier_worst_case_is_equality(self):
        # same feature point, opposite labels: the lhs hits the L1
        # diameter 2 and the rhs is exactly kappa * W1 = sqrt(2)*sqrt(2)
        net = constant_classifier(logits=[100.0, 0.0])
        pt = hard_joint([[0.0, 0.0]], [0], 2)
        qt = hard_joint([[0.0, 0.0]], [1], 2)
        r = bounds.check_theorem2_core(net, pt, qt)
        assert r.passed
        np.testing.assert_allclose(r.lhs, 2.0, atol=1e-12)
        np.testing.assert_allclose(r.rhs, 2.0, atol=1e-9)

    def test_identical_joints_lhs_zero(self):
        net, pt, _ = bounds.make_theorem2_instance(13)
        r = bounds.check_theorem2_core(net, pt, pt)
        assert r.passed
        np.testing.assert_allclose(r.lhs, 0.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(15))
    def test_random_draws_pass(self, seed):
        net, pt, qt = bounds.make_theorem2_instance(seed)
        r = bounds.check_theorem2_core(net, pt, qt, seed=seed)
        assert r.passed, (r.lhs, r.rhs, r.slack)

    def test_rhs_monotone_under_weight_scaling(self):
        net, pt, qt = bounds.make_theorem2_instance(14)
        r1 = bounds.check_theorem2_core(net, pt, qt)
        for layer in net.layers:
            layer.weight.value *= 1.7
        r2 = bounds.check_theorem2_core(net, pt, qt)
        assert r2.metadata["lambda"] >= r1.metadata["lambda"]
        assert r2.rhs >= r1.rhs - 1e-12
        assert r2.passed

    def test_works_with_model_wrapper(self):
        class Wrapper:
            def __init__(self, net):
                self.classifier_net = net

        net, pt, qt = bounds.make_theorem2_instance(15)
        direct = bounds.check_theorem2_core(net, pt, qt)
        wrapped = bounds.check_theorem2_core(Wrapper(net), pt, qt)
        assert direct.lhs == wrapped.lhs and direct.rhs == wrapped.rhs


class TestLipschitzUpperBound:
    def test_single_layer_is_spectral_norm(self):
        layer = nc.DenseLayer(3, 3, rng=np.random.default_rng(16))
        layer.weight.value = np.diag([2.0, 5.0, 1.0])
        np.testing.assert_allclose(
            bounds.lipschitz_upper_bound(nc.MLP([layer])), 5.0, rtol=1e-12)

    def test_leaky_slope_above_one_counts(self):
        layer = nc.DenseLayer(2, 2, activation="leaky_relu", slope=3.0,
                              rng=np.random.default_rng(17))
        layer.weight.value = np.eye(2)
        np.testing.assert_allclose(
            bounds.lipschitz_upper_bound(nc.MLP([layer])), 3.0, rtol=1e-12)

    def test_product_over_layers(self):
        rng = np.random.default_rng(18)
        l1 = nc.DenseLayer(2, 4, activation="leaky_relu", rng=rng)
        l2 = nc.DenseLayer(4, 2, rng=rng)
        prod = (np.linalg.svd(l1.weight.value, compute_uv=False)[0]
                * np.linalg.svd(l2.weight.value, compute_uv=False)[0])
        np.testing.assert_allclose(
            bounds.lipschitz_upper_bound(nc.MLP([l1, l2])), prod, rtol=1e-12)


class TestTheorem2FullRhs:
    def test_infinite_samples_drop_confidence_term(self):
        params = bounds.Theorem2Params(kappa=2.0, lam=1.0, psi_prime=1.0,
                                       delta=0.05, n_p=math.inf,
                                       n_q=math.inf)
        np.testing.assert_allclose(
            bounds.theorem2_full_rhs(5.0, params),
            2.0 * math.sqrt(2.0) * 5.0, rtol=1e-12)

    def test_delta_one_zeroes_log_term(self):
        params = bounds.Theorem2Params(kappa=1.0, lam=0.0, psi_prime=1.0,
                                       delta=1.0, n_p=10, n_q=10)
        np.testing.assert_allclose(bounds.theorem2_full_rhs(3.0, params),
                                   3.0, rtol=1e-12)

    def test_reference_evaluation(self):
        params = bounds.Theorem2Params(kappa=1.0, lam=1.0, psi_prime=1.0,
                                       delta=0.05, n_p=3000, n_q=3000)
        expected = math.sqrt(2.0) * (
            5.50 + math.sqrt(2.0 * math.log(20.0)) * 2.0 / math.sqrt(3000.0))
        np.testing.assert_allclose(bounds.theorem2_full_rhs(5.50, params),
                                   expected, rtol=1e-12)

    def test_param_validation(self):
        with pytest.raises(ContractError):
            bounds.Theorem2Params(kappa=0.0, lam=1.0, psi_prime=1.0,
                                  delta=0.5, n_p=10, n_q=10)
        with pytest.raises(ContractError):
            bounds.Theorem2Params(kappa=1.0, lam=1.0, psi_prime=1.5,
                                  delta=0.5, n_p=10, n_q=10)
        with pytest.raises(ContractError):
            bounds.Theorem2Params(kappa=1.0, lam=1.0, psi_prime=1.0,
                                  delta=0.0, n_p=10, n_q=10)
        with pytest.raises(ContractError):
            bounds.theorem2_full_rhs(-1.0, bounds.Theorem2Params(
                kappa=1.0, lam=1.0, psi_prime=1.0, delta=0.5, n_p=10,
                n_q=10))


class TestSuite:
    def test_zero_count_empty(self):
        reports, summary = bounds.run_bound_suite(
            bounds.BoundSuiteConfig(count=0))
        assert reports == []
        assert summary["all_pass"] and summary["total_instances"] == 0

    def test_small_run_covers_all_bounds_and_passes(self):
        reports, summary = bounds.run_bound_suite(
            bounds.BoundSuiteConfig(count=2, seed=100))
        assert summary["all_pass"]
        assert sorted(summary["bounds"]) == sorted(bounds.BOUND_IDS)
        assert len(reports) == 2 * len(bounds.BOUND_IDS)
        for r in reports:
            assert r.passed

    def test_rerun_identical(self):
        cfg = bounds.BoundSuiteConfig(count=2, seed=5)
        a = [r.to_json_dict() for r in bounds.run_bound_suite(cfg)[0]]
        b = [r.to_json_dict() for r in bounds.run_bound_suite(cfg)[0]]
        assert a == b

    def test_theorem_families_capped(self):
        cfg = bounds.BoundSuiteConfig(count=500)
        assert cfg.count_for("theorem1") == bounds.THEOREM_INSTANCE_CAP
        assert cfg.count_for("theorem2core") == bounds.THEOREM_INSTANCE_CAP
        assert cfg.count_for("prop1") == 500
        cfg_small = bounds.BoundSuiteConfig(count=50)
        assert cfg_small.count_for("theorem1") == 50

    def test_negative_count_rejected(self):
        with pytest.raises(ContractError):
            bounds.BoundSuiteConfig(count=-1)
