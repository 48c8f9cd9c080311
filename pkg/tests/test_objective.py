"""Objective construction: critic factory, losses, and the descent-step
assembly with its live-vs-frozen conditional semantics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jwass import nn_core as nc
from jwass import objective as obj
from jwass.errors import ContractError


def tiny_critic(kind, weight_rows, label_scale=1.0):
    """One-layer critic with chosen weights, no spectral scaling, so loss
    values are hand-computable."""
    w = np.asarray(weight_rows, dtype=np.float64)
    layer = nc.DenseLayer(w.shape[1], w.shape[0], activation="identity",
                          rng=np.random.default_rng(0))
    layer.weight.value = w.copy()
    layer.bias.value[...] = 0.0
    return obj.CriticNet(kind, nc.MLP([layer]), label_scale)


class TestMakeCritic:
    def test_shapes_per_kind(self):
        d_z, k = 5, 3
        cd = obj.make_critic("class_dependent", d_z, k, width=8, depth=3)
        assert cd.net.in_dim == d_z and cd.net.out_dim == k
        jt = obj.make_critic("joint", d_z, k, width=8, depth=3)
        assert jt.net.in_dim == d_z + k and jt.net.out_dim == 1
        mg = obj.make_critic("marginal", d_z, k, width=8, depth=3)
        assert mg.net.in_dim == d_z and mg.net.out_dim == 1

    def test_every_layer_spectral(self):
        c = obj.make_critic("class_dependent", 4, 2, width=8, depth=4)
        assert len(c.net.layers) == 4
        assert all(layer.spectral for layer in c.net.layers)

    def test_none_kind(self):
        assert obj.make_critic("none", 4, 2) is None

    def test_bad_kind(self):
        with pytest.raises(ContractError):
            obj.make_critic("adversarial", 4, 2)

    def test_seed_determinism(self):
        a = obj.make_critic("joint", 4, 2, seed=5)
        b = obj.make_critic("joint", 4, 2, seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.value, pb.value)

    def test_refine_sigma_converges_effective_weight(self):
        c = obj.make_critic("marginal", 6, 2, width=16, depth=3, seed=1)
        for layer in c.net.layers:
            layer.weight.value *= 7.0
        c.refine_sigma(iters=100)
        for layer in c.net.layers:
            top = np.linalg.svd(layer.effective_weight(),
                                compute_uv=False)[0]
            assert abs(top - 1.0) <= 0.01


class TestCrossEntropy:
    def test_hand_value(self):
        tape = nc.Tape()
        pred = tape.constant([[0.25, 0.75], [0.5, 0.5]])
        oh = obj.onehot([1, 0], 2)
        loss = obj.cross_entropy_loss(pred, oh)
        np.testing.assert_allclose(
            loss.value, -(np.log(0.75) + np.log(0.5)) / 2, rtol=1e-12)

    def test_zero_probability_clamped_finite(self):
        tape = nc.Tape()
        pred = tape.constant([[0.0, 1.0]])
        loss = obj.cross_entropy_loss(pred, obj.onehot([0], 2))
        assert np.isfinite(loss.value)
        np.testing.assert_allclose(loss.value, -np.log(1e-12))

    def test_clamp_count(self):
        pred = np.array([[0.0, 1.0], [0.4, 0.6], [1e-13, 1.0 - 1e-13]])
        assert obj.clamp_count(pred, obj.onehot([0, 0, 0], 2)) == 2
        assert obj.clamp_count(pred, obj.onehot([1, 1, 1], 2)) == 0

    def test_gradient_direction(self):
        # increasing the true-class logit must lower the loss
        rng = np.random.default_rng(0)
        w = nc.Parameter(rng.normal(size=(2, 3)))
        x = rng.normal(size=(4, 3))
        oh = obj.onehot([0, 1, 0, 1], 2)
        w.zero_grad()
        tape = nc.Tape()
        logits = nc.linear(tape.constant(x), tape.leaf(w),
                           tape.constant(np.zeros(2)))
        loss = obj.cross_entropy_loss(nc.softmax(logits), oh)
        nc.backward(tape, loss)
        step = w.value - 0.1 * w.grad
        tape2 = nc.Tape()
        logits2 = nc.linear(tape2.constant(x), tape2.constant(step),
                            tape2.constant(np.zeros(2)))
        loss2 = obj.cross_entropy_loss(nc.softmax(logits2), oh)
        assert loss2.value < loss.value


class TestEntmin:
    def test_uniform_rows_hit_log_k(self):
        tape = nc.Tape()
        pred = tape.constant(np.full((3, 4), 0.25))
        np.testing.assert_allclose(obj.entmin_loss(pred).value, np.log(4.0),
                                   rtol=1e-12)

    def test_vertex_rows_are_zero(self):
        tape = nc.Tape()
        pred = tape.constant(obj.onehot([0, 1, 1], 2))
        np.testing.assert_allclose(obj.entmin_loss(pred).value, 0.0,
                                   atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6),
           st.integers(min_value=1, max_value=5),
           st.integers(min_value=2, max_value=5))
    def test_bounded_by_log_k(self, seed, n, k):
        rng = np.random.default_rng(seed)
        tape = nc.Tape()
        pred = tape.constant(rng.dirichlet(np.ones(k), size=n))
        val = obj.entmin_loss(pred).value
        assert -1e-9 <= val <= np.log(k) + 1e-9


class TestDomainLossFrozen:
    def test_class_dependent_hand_value(self):
        critic = tiny_critic("class_dependent", [[1.0], [-1.0]])
        tape = nc.Tape()
        loss = obj.domain_loss_frozen(
            tape, critic,
            z_p=np.array([[2.0]]), cond_p=np.array([[1.0, 0.0]]),
            z_q=np.array([[1.0]]), cond_q=np.array([[0.0, 1.0]]))
        # term_P = 1*2 = 2 ; term_Q = -1*1 = -1 ; loss = 3
        np.testing.assert_allclose(loss.value, 3.0, rtol=1e-12)

    def test_marginal_hand_value(self):
        critic = tiny_critic("marginal", [[2.0, 0.0]])
        tape = nc.Tape()
        loss = obj.domain_loss_frozen(
            tape, critic,
            z_p=np.array([[1.0, 5.0], [2.0, 5.0]]), cond_p=None,
            z_q=np.array([[0.5, -3.0]]), cond_q=None)
        np.testing.assert_allclose(loss.value, 2 * 1.5 - 2 * 0.5, rtol=1e-12)

    def test_joint_uses_scaled_conditionals(self):
        # weight picks out the conditional block; label_scale multiplies it
        critic = tiny_critic("joint", [[0.0, 1.0, 0.0]], label_scale=2.0)
        tape = nc.Tape()
        loss = obj.domain_loss_frozen(
            tape, critic,
            z_p=np.array([[7.0]]), cond_p=np.array([[1.0, 0.0]]),
            z_q=np.array([[7.0]]), cond_q=np.array([[0.0, 1.0]]))
        np.testing.assert_allclose(loss.value, 2.0 * 1.0 - 0.0, rtol=1e-12)

    def test_identical_domains_zero_loss(self):
        critic = obj.make_critic("class_dependent", 3, 2, width=8, seed=2)
        rng = np.random.default_rng(4)
        z = rng.normal(size=(6, 3))
        cond = rng.dirichlet(np.ones(2), size=6)
        tape = nc.Tape()
        loss = obj.domain_loss_frozen(tape, critic, z, cond, z, cond,
                                      update_u=False)
        np.testing.assert_allclose(loss.value, 0.0, atol=1e-12)

    def test_ascent_increases_separated_domains(self):
        rng = np.random.default_rng(6)
        critic = obj.make_critic("class_dependent", 2, 2, width=16, seed=3)
        z_p = rng.normal(size=(32, 2)) + np.array([2.0, 0.0])
        z_q = rng.normal(size=(32, 2)) - np.array([2.0, 0.0])
        cond_p = obj.onehot(rng.integers(0, 2, 32), 2)
        cond_q = obj.onehot(rng.integers(0, 2, 32), 2)
        opt = nc.Adam(critic.parameters(), lr=1e-2)

        def loss_value(update):
            tape = nc.Tape()
            loss = obj.domain_loss_frozen(tape, critic, z_p, cond_p, z_q,
                                          cond_q, update_u=update)
            return tape, loss

        _, first = loss_value(False)
        start = float(first.value)
        for _ in range(40):
            opt.zero_grad()
            tape, loss = loss_value(True)
            nc.backward(tape, nc.scale(loss, -1.0))
            opt.step()
        _, last = loss_value(False)
        assert float(last.value) > start + 0.1

    def test_empty_batch_rejected(self):
        critic = tiny_critic("marginal", [[1.0]])
        tape = nc.Tape()
        with pytest.raises(ContractError):
            obj.domain_loss_frozen(tape, critic, np.zeros((0, 1)), None,
                                   np.ones((2, 1)), None)


def small_nets(d_in=3, d_z=4, k=2, seed=0):
    rng = np.random.default_rng(seed)
    feature = nc.MLP([
        nc.DenseLayer(d_in, 8, activation="leaky_relu", rng=rng),
        nc.DenseLayer(8, d_z, activation="leaky_relu", rng=rng),
    ])
    classifier = nc.MLP([
        nc.DenseLayer(d_z, 8, activation="leaky_relu", rng=rng),
        nc.DenseLayer(8, k, activation="softmax", rng=rng),
    ])
    return feature, classifier


class TestTotalObjective:
    def _batch(self, seed=0, n=10, labeled="some"):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, 3))
        if labeled == "all":
            y = rng.integers(0, 2, n)
        elif labeled == "none":
            y = np.full(n, -1)
        else:
            y = rng.integers(0, 2, n)
            y[rng.random(n) < 0.5] = -1
        return x, y

    def test_total_is_weighted_sum_of_parts(self):
        feature, classifier = small_nets()
        critic = obj.make_critic("class_dependent", 4, 2, width=8, seed=1)
        xp, yp = self._batch(1)
        xq, yq = self._batch(2)
        w = obj.ObjectiveWeights(w_classifier=1.0, w_critic=0.3,
                                 w_entmin=0.05)
        tape = nc.Tape()
        parts = obj.total_objective(tape, feature, classifier, critic,
                                    xp, yp, xq, yq, w, n_classes=2)
        expect = (w.w_classifier * (parts.loss_c_p.value
                                    + parts.loss_c_q.value)
                  + w.w_critic * parts.loss_d.value
                  + w.w_entmin * parts.entmin.value)
        np.testing.assert_allclose(parts.total.value, expect, rtol=1e-12)

    def test_unlabeled_domain_skips_classification(self):
        feature, classifier = small_nets()
        xp, yp = self._batch(3, labeled="none")
        xq, yq = self._batch(4, labeled="all")
        tape = nc.Tape()
        parts = obj.total_objective(tape, feature, classifier, None,
                                    xp, yp, xq, yq, obj.ObjectiveWeights(),
                                    n_classes=2)
        assert parts.loss_c_p is None
        assert parts.flags["lc_p_skipped"] and not parts.flags["lc_q_skipped"]
        assert parts.loss_c_q is not None

    def test_live_conditionals_reach_classifier(self):
        # with zero labeled rows the ONLY path to the classifier is the
        # critic's live softmax conditionals; its grads must be nonzero
        feature, classifier = small_nets(seed=5)
        critic = obj.make_critic("class_dependent", 4, 2, width=8, seed=2)
        xp, yp = self._batch(5, labeled="none")
        xq, yq = self._batch(6, labeled="none")
        for p in classifier.parameters():
            p.zero_grad()
        tape = nc.Tape()
        parts = obj.total_objective(tape, feature, classifier, critic,
                                    xp, yp, xq, yq,
                                    obj.ObjectiveWeights(w_critic=1.0),
                                    n_classes=2)
        nc.backward(tape, parts.total)
        grads = [np.abs(p.grad).max() for p in classifier.parameters()]
        assert max(grads) > 0.0

    def test_live_equals_frozen_when_fully_labeled(self):
        feature, classifier = small_nets(seed=7)
        critic = obj.make_critic("joint", 4, 2, width=8, seed=3)
        xp, yp = self._batch(7, labeled="all")
        xq, yq = self._batch(8, labeled="all")
        tape = nc.Tape()
        parts = obj.total_objective(tape, feature, classifier, critic,
                                    xp, yp, xq, yq,
                                    obj.ObjectiveWeights(w_critic=1.0),
                                    n_classes=2)
        z_p = feature.predict(xp)
        z_q = feature.predict(xq)
        tape2 = nc.Tape()
        frozen = obj.domain_loss_frozen(tape2, critic, z_p,
                                        obj.onehot(yp, 2), z_q,
                                        obj.onehot(yq, 2), update_u=False)
        np.testing.assert_allclose(parts.loss_d.value, frozen.value,
                                   rtol=1e-10)

    def test_no_terms_yields_flagged_zero(self):
        feature, classifier = small_nets()
        xp, yp = self._batch(9, labeled="none")
        xq, yq = self._batch(10, labeled="none")
        tape = nc.Tape()
        parts = obj.total_objective(tape, feature, classifier, None,
                                    xp, yp, xq, yq,
                                    obj.ObjectiveWeights(w_entmin=0.0),
                                    n_classes=2)
        assert parts.flags.get("empty_objective")
        assert parts.total.value == 0.0

    def test_critic_none_has_no_domain_term(self):
        feature, classifier = small_nets()
        xp, yp = self._batch(11)
        xq, yq = self._batch(12)
        tape = nc.Tape()
        parts = obj.total_objective(tape, feature, classifier, None,
                                    xp, yp, xq, yq, obj.ObjectiveWeights(),
                                    n_classes=2)
        assert parts.loss_d is None
