"""Empirical certification of the inequalities the training objective
rests on. Every checker computes both sides of one inequality exactly
(LP oracle, closed-form divergences) on a finite instance and reports the
slack; the suite runs randomized instance families and fails loudly on any
violation beyond a relative tolerance.

The six checks, by what they assert about W1 on the labeled product space:

- ``prop1``: two applications of the triangle inequality,
  W(Pt,Qt) <= W(Pt,P) + W(P,Q) + W(Q,Qt).
- ``lemma1``: convexity of W(.,K) under mixtures,
  W(mix(a,Pt,Pf), K) <= a W(Pt,K) + (1-a) W(Pf,K).
- ``lemma2``: a transport/divergence bound for joints sharing a feature
  marginal, W(Pt,Pf) <= diam * sqrt(0.5 * E_z[KL(Pt(.|z) || Pf(.|z))]),
  with diam the support diameter in the product metric (a coupling can
  never move mass farther than that) and KL in nats. Infinite KL makes
  the bound vacuous; it still gets reported.
- ``lemma3``: the classwise decomposition W(P,Q) <= sum_y W_y(P,Q),
  valid when per-class masses match.
- ``theorem2core``: the risk-transfer step |R_Q(f) - R_P(f)| <=
  kappa sqrt(lambda^2 + 1) W1(Pt,Qt) for an L1 loss on softmax outputs,
  with kappa = sqrt(K) (the L1/L2 norm-equivalence constant on K classes;
  1 would be unsound) and lambda a spectral-norm-product upper bound on
  the classifier's Lipschitz constant.
- ``theorem1``: the full chain combining all of the above.

Soft-labeled instances are EXPANDED to one-hot atoms before any W1
evaluation: the inequalities concern measures on feature space x label
vertices, and a soft conditional means a mixture over vertices, not an
atom at their barycenter (the two readings genuinely differ; the suite's
own counterexample test in tests/test_ot.py shows it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nc
from .distributions import (MixtureSpec, empirical_diameter,
                            expected_conditional_kl, mix)
from .errors import ContractError
from .ot import EmpiricalJoint, classwise_w1_oracle, exact_w1

REL_SLACK_TOL = 1e-7
BOUND_IDS = ("prop1", "lemma1", "lemma2", "lemma3", "theorem1",
             "theorem2core")
THEOREM_BOUNDS = ("theorem1", "theorem2core")
THEOREM_INSTANCE_CAP = 200


@dataclass
class BoundReport:
    """One certified instance: both sides, the slack, and a verdict."""

    bound_id: str
    seed: int
    lhs: float
    rhs: float
    metadata: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        if math.isinf(self.rhs) and self.rhs > 0:
            return True
        return self.slack >= -REL_SLACK_TOL * max(1.0, abs(self.rhs))

    def to_json_dict(self) -> dict:
        def enc(x):
            # JSON has no Infinity literal; keep the file strictly parseable
            if math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return x

        return {"bound_id": self.bound_id, "seed": self.seed,
                "lhs": enc(self.lhs), "rhs": enc(self.rhs),
                "slack": enc(self.slack), "pass": self.passed,
                "metadata": self.metadata}


# ---------------------------------------------------------------------------
# checkers


def check_prop1(p_true: EmpiricalJoint, p: EmpiricalJoint, q: EmpiricalJoint,
                q_true: EmpiricalJoint, label_scale: float = 1.0,
                seed: int = -1) -> BoundReport:
    """W(Pt,Qt) <= W(Pt,P) + W(P,Q) + W(Q,Qt)."""
    joints = [j.expand() for j in (p_true, p, q, q_true)]
    pt, pm, qm, qt = joints
    lhs, _ = exact_w1(pt, qt, label_scale)
    legs = [exact_w1(a, b, label_scale)[0]
            for a, b in ((pt, pm), (pm, qm), (qm, qt))]
    return BoundReport("prop1", seed, lhs, float(sum(legs)),
                       {"atoms": [j.n for j in joints],
                        "label_scale": label_scale})


def check_lemma1(p_true: EmpiricalJoint, p_false: EmpiricalJoint,
                 k_dist: EmpiricalJoint, alpha: float,
                 label_scale: float = 1.0, seed: int = -1) -> BoundReport:
    """W(mix(a,Pt,Pf), K) <= a W(Pt,K) + (1-a) W(Pf,K)."""
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must be in [0, 1], got {alpha}")
    mixture = mix(MixtureSpec(alpha, p_true, p_false)).expand()
    pt, pf, kd = (j.expand() for j in (p_true, p_false, k_dist))
    lhs, _ = exact_w1(mixture, kd, label_scale)
    rhs = (alpha * exact_w1(pt, kd, label_scale)[0]
           + (1.0 - alpha) * exact_w1(pf, kd, label_scale)[0])
    return BoundReport("lemma1", seed, lhs, rhs,
                       {"alpha": alpha, "atoms": [pt.n, pf.n, kd.n],
                        "label_scale": label_scale})


def check_lemma2(p_true: EmpiricalJoint, p_false: EmpiricalJoint,
                 label_scale: float = 1.0, seed: int = -1) -> BoundReport:
    """W(Pt,Pf) <= diam * sqrt(0.5 * E_z[KL]) for shared feature marginals.

    Refuses joints that do not share atoms and weights (the conditional
    decomposition needs a common Z-marginal). Infinite KL reports an
    infinite rhs: vacuously true, recorded as such.
    """
    e_kl = expected_conditional_kl(p_true, p_false)  # refuses bad marginals
    pt = p_true.expand()
    pf = p_false.expand()
    lhs, _ = exact_w1(pt, pf, label_scale)
    diam = empirical_diameter(pt, pf, label_scale)
    rhs = diam * math.sqrt(0.5 * e_kl) if math.isfinite(e_kl) else math.inf
    return BoundReport("lemma2", seed, lhs, rhs,
                       {"expected_kl": e_kl if math.isfinite(e_kl) else "inf",
                        "diameter": diam, "atoms": p_true.n,
                        "label_scale": label_scale})


def check_lemma3(p: EmpiricalJoint, q: EmpiricalJoint,
                 label_scale: float = 1.0, seed: int = -1) -> BoundReport:
    """W(P,Q) <= sum_y W_y(P,Q) under matched per-class masses."""
    lhs, _ = exact_w1(p.expand(), q.expand(), label_scale)
    terms = [classwise_w1_oracle(p, q, y) for y in range(p.n_classes)]
    return BoundReport("lemma3", seed, lhs, float(sum(terms)),
                       {"class_terms": terms, "atoms": [p.n, q.n],
                        "label_scale": label_scale})


def check_theorem1(p_true: EmpiricalJoint, p_false: EmpiricalJoint,
                   q_true: EmpiricalJoint, q_guess: EmpiricalJoint,
                   alpha: float, beta: float, label_scale: float = 1.0,
                   seed: int = -1) -> BoundReport:
    """The full decomposition:

    W(Pt,Qt) <= (1-a) diam_P sqrt(0.5 E_P[KL]) + sum_y W_y(P,Q)
                + (1-b) diam_Q sqrt(0.5 E_Q[KL])

    with P = mix(a, Pt, Pf), Q = mix(b, Qt, Qg). Requires the
    shared-marginal structure inside each domain and matched class masses
    across the two mixtures (the classwise oracle enforces the latter).
    """
    for bad, name in ((alpha, "alpha"), (beta, "beta")):
        if not 0.0 <= bad <= 1.0:
            raise ContractError(f"{name} must be in [0, 1], got {bad}")
    kl_p = expected_conditional_kl(p_true, p_false)
    kl_q = expected_conditional_kl(q_true, q_guess)
    lhs, _ = exact_w1(p_true.expand(), q_true.expand(), label_scale)
    p_mixed = mix(MixtureSpec(alpha, p_true, p_false))
    q_mixed = mix(MixtureSpec(beta, q_true, q_guess))
    class_terms = [classwise_w1_oracle(p_mixed, q_mixed, y)
                   for y in range(p_true.n_classes)]
    diam_p = empirical_diameter(p_true.expand(), p_false.expand(),
                                label_scale)
    diam_q = empirical_diameter(q_true.expand(), q_guess.expand(),
                                label_scale)
    if math.isfinite(kl_p) and math.isfinite(kl_q):
        rhs = ((1.0 - alpha) * diam_p * math.sqrt(0.5 * kl_p)
               + sum(class_terms)
               + (1.0 - beta) * diam_q * math.sqrt(0.5 * kl_q))
    else:
        rhs = math.inf
    return BoundReport("theorem1", seed, lhs, rhs,
                       {"alpha": alpha, "beta": beta,
                        "class_terms": class_terms,
                        "kl_p": kl_p if math.isfinite(kl_p) else "inf",
                        "kl_q": kl_q if math.isfinite(kl_q) else "inf",
                        "label_scale": label_scale})


def lipschitz_upper_bound(net: nc.MLP) -> float:
    """Product of layer spectral norms times activation constants.

    An upper bound on the network's Lipschitz constant w.r.t. l2 norms:
    spectral norms come from exact SVD on the effective weights; leaky-relu
    contributes max(1, slope), softmax and relu/identity contribute 1
    (softmax's true constant is below 1, so 1 keeps this an upper bound).
    """
    total = 1.0
    for layer in net.layers:
        w = layer.effective_weight(update_u=False)
        sigma = float(np.linalg.svd(w, compute_uv=False)[0])
        act = max(1.0, layer.slope) if layer.activation == "leaky_relu" \
            else 1.0
        total *= sigma * act
    return total


def _classifier_net(model) -> nc.MLP:
    if isinstance(model, nc.MLP):
        return model
    net = getattr(model, "classifier_net", None)
    if net is None:
        raise ContractError(
            "model must be an MLP or expose .classifier_net")
    return net


def check_theorem2_core(model, p_true: EmpiricalJoint,
                        q_true: EmpiricalJoint,
                        seed: int = -1) -> BoundReport:
    """|R_Q(f) - R_P(f)| <= kappa sqrt(lambda^2 + 1) W1(Pt,Qt).

    Risks are exact finite-support expectations of the L1 loss between
    the classifier's softmax output and the one-hot label; kappa =
    sqrt(K) is the constant that makes that loss Lipschitz w.r.t. the
    Euclidean product metric the W1 uses. label_scale is pinned to 1:
    that IS the metric the inequality is stated in.
    """
    net = _classifier_net(model)
    pt = p_true.expand()
    qt = q_true.expand()
    if pt.dim != net.in_dim:
        raise ContractError(
            f"classifier expects dim {net.in_dim}, joints have {pt.dim}")

    def risk(joint):
        preds = net.predict(joint.points)
        losses = np.abs(preds - joint.conditionals).sum(axis=1)
        return float(joint.weights @ losses)

    lhs = abs(risk(qt) - risk(pt))
    lam = lipschitz_upper_bound(net)
    kappa = math.sqrt(pt.n_classes)
    w1, _ = exact_w1(pt, qt, label_scale=1.0)
    rhs = kappa * math.sqrt(lam * lam + 1.0) * w1
    return BoundReport("theorem2core", seed, lhs, rhs,
                       {"kappa": kappa, "lambda": lam, "w1": w1,
                        "atoms": [pt.n, qt.n]})


@dataclass
class Theorem2Params:
    """Constants for the full generalization rhs (reporting only)."""

    kappa: float
    lam: float
    psi_prime: float
    delta: float
    n_p: float
    n_q: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ContractError("kappa must be positive")
        if self.lam < 0:
            raise ContractError("lambda must be nonnegative")
        # delta = 1 is admitted: the confidence term degenerates to 0
        if not 0.0 < self.delta <= 1.0:
            raise ContractError("delta must be in (0, 1]")
        if not 0.0 < self.psi_prime < math.sqrt(2.0):
            raise ContractError("psi_prime must be in (0, sqrt(2))")
        if self.n_p < 1 or self.n_q < 1:
            raise ContractError("sample counts must be >= 1")


def theorem2_full_rhs(w_hat: float, params: Theorem2Params) -> float:
    """kappa sqrt(lam^2+1) [w_hat + sqrt((2/psi') log(1/delta))
    (sqrt(1/N_P) + sqrt(1/N_Q))].

    The concentration constants are not certified by the suite (they
    depend on unstated constants of the concentration theorem this leans
    on); this evaluates the displayed formula for reporting. Infinite
    sample counts drop the sample term.
    """
    if w_hat < 0:
        raise ContractError("w_hat must be nonnegative")
    conf = math.sqrt((2.0 / params.psi_prime) * math.log(1.0 / params.delta))
    sample = math.sqrt(1.0 / params.n_p) + math.sqrt(1.0 / params.n_q)
    return (params.kappa * math.sqrt(params.lam ** 2 + 1.0)
            * (w_hat + conf * sample))


# ---------------------------------------------------------------------------
# randomized instance families


def _random_soft_joint(rng, n_atoms, dim, n_classes, floor=0.0):
    points = rng.normal(size=(n_atoms, dim))
    weights = rng.uniform(0.2, 1.0, size=n_atoms)
    weights = weights / weights.sum()
    cond = rng.dirichlet(np.ones(n_classes), size=n_atoms)
    if floor > 0.0:
        cond = np.maximum(cond, floor)
        cond = cond / cond.sum(axis=1, keepdims=True)
    return EmpiricalJoint.from_soft(points, cond, weights)


def _random_hard_joint(rng, n_atoms, dim, n_classes):
    points = rng.normal(size=(n_atoms, dim))
    weights = rng.uniform(0.2, 1.0, size=n_atoms)
    weights = weights / weights.sum()
    labels = rng.integers(0, n_classes, size=n_atoms)
    return EmpiricalJoint.from_hard(points, labels, n_classes, weights)


def _random_joint(rng, n_atoms, dim, n_classes, floor=0.0):
    if rng.integers(0, 2):
        return _random_soft_joint(rng, n_atoms, dim, n_classes, floor)
    return _random_hard_joint(rng, n_atoms, dim, n_classes)


def ipf_conditionals(rng, weights: np.ndarray, target: np.ndarray,
                     floor: float = 0.01, iters: int = 500) -> np.ndarray:
    """Conditional rows whose weighted class masses hit `target` exactly.

    Iterative proportional fitting on the joint mass matrix: start from a
    floored random row-stochastic matrix scaled by the weights, then
    alternate row- and column-sum corrections. Positivity of the start
    guarantees convergence; we stop at residual < 1e-13 and renormalize
    rows, leaving class masses within ~1e-12 of target (the classwise
    oracle's matching tolerance is 1e-9).
    """
    weights = np.asarray(weights, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if abs(weights.sum() - 1.0) > 1e-9 or abs(target.sum() - 1.0) > 1e-9:
        raise ContractError("weights and target must each sum to 1")
    if (target <= 0).any():
        raise ContractError("target class masses must be positive")
    cond = rng.dirichlet(np.ones(target.size), size=weights.size)
    cond = np.maximum(cond, floor)
    cond = cond / cond.sum(axis=1, keepdims=True)
    mat = cond * weights[:, None]
    for _ in range(iters):
        mat = mat * (weights / mat.sum(axis=1))[:, None]
        mat = mat * (target / mat.sum(axis=0))[None, :]
        if np.abs(mat.sum(axis=1) - weights).max() < 1e-13:
            break
    resid = np.abs(mat.sum(axis=1) - weights).max()
    if resid > 1e-10:
        raise ContractError(f"IPF failed to converge (residual {resid!r})")
    return mat / mat.sum(axis=1, keepdims=True)


def _smoothed_simplex(rng, k, floor=0.1):
    t = rng.dirichlet(np.ones(k))
    t = np.maximum(t, floor)
    return t / t.sum()


def make_prop1_instance(seed: int):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    scale = float(rng.choice([0.5, 1.0, 2.0]))
    joints = []
    for _ in range(4):
        soft = bool(rng.integers(0, 2))
        n = int(rng.integers(2, 11 if soft else 21))
        if soft:
            joints.append(_random_soft_joint(rng, n, 2, k))
        else:
            joints.append(_random_hard_joint(rng, n, 2, k))
    return (*joints, scale)


def make_lemma1_instance(seed: int):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    scale = float(rng.choice([0.5, 1.0, 2.0]))
    sizes = rng.integers(2, 9, size=3)
    pt = _random_joint(rng, int(sizes[0]), 2, k)
    pf = _random_joint(rng, int(sizes[1]), 2, k)
    kd = _random_joint(rng, int(sizes[2]), 2, k)
    alpha = float(rng.uniform(0.05, 0.95))
    return pt, pf, kd, alpha, scale


def make_lemma2_instance(seed: int):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    scale = float(rng.choice([0.5, 1.0, 2.0]))
    n = int(rng.integers(2, 9))
    points = rng.normal(size=(n, 2))
    weights = rng.uniform(0.2, 1.0, size=n)
    weights = weights / weights.sum()
    conds = []
    for _ in range(2):
        c = rng.dirichlet(np.ones(k), size=n)
        c = np.maximum(c, 0.01)
        c = c / c.sum(axis=1, keepdims=True)
        conds.append(c)
    pt = EmpiricalJoint.from_soft(points, conds[0], weights)
    pf = EmpiricalJoint.from_soft(points, conds[1], weights)
    return pt, pf, scale


def make_lemma3_instance(seed: int):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    scale = float(rng.choice([0.5, 1.0, 2.0]))
    n_p = int(rng.integers(2, 9))
    n_q = int(rng.integers(2, 9))
    p = _random_soft_joint(rng, n_p, 2, k, floor=0.01)
    q_points = rng.normal(size=(n_q, 2))
    q_weights = rng.uniform(0.2, 1.0, size=n_q)
    q_weights = q_weights / q_weights.sum()
    q_cond = ipf_conditionals(rng, q_weights, p.class_masses())
    q = EmpiricalJoint.from_soft(q_points, q_cond, q_weights)
    return p, q, scale


def make_theorem1_instance(seed: int):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    target = _smoothed_simplex(rng, k)

    def domain():
        n = int(rng.integers(2, 7))
        points = rng.normal(size=(n, 2))
        weights = rng.uniform(0.2, 1.0, size=n)
        weights = weights / weights.sum()
        true = EmpiricalJoint.from_soft(
            points, ipf_conditionals(rng, weights, target), weights)
        false = EmpiricalJoint.from_soft(
            points, ipf_conditionals(rng, weights, target), weights)
        return true, false

    p_true, p_false = domain()
    q_true, q_guess = domain()
    alpha = float(rng.uniform(0.2, 0.8))
    beta = float(rng.uniform(0.2, 0.8))
    return p_true, p_false, q_true, q_guess, alpha, beta


def make_theorem2_instance(seed: int):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 4))
    d = 2
    hidden = int(rng.integers(4, 9))
    net = nc.MLP([
        nc.DenseLayer(d, hidden, activation="leaky_relu", rng=rng),
        nc.DenseLayer(hidden, k, activation="softmax", rng=rng),
    ])
    for layer in net.layers:
        layer.weight.value *= float(rng.uniform(0.3, 2.0))
        layer.bias.value = rng.normal(size=layer.out_dim) * 0.3
    pt = _random_hard_joint(rng, int(rng.integers(2, 9)), d, k)
    qt = _random_hard_joint(rng, int(rng.integers(2, 9)), d, k)
    return net, pt, qt


# ---------------------------------------------------------------------------
# the suite


@dataclass
class BoundSuiteConfig:
    """How many instances per bound, and the base seed.

    The two theorem families cost an order of magnitude more per instance
    (several LP solves each), so they are capped at THEOREM_INSTANCE_CAP
    regardless of count.
    """

    count: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ContractError("count must be >= 0")

    def count_for(self, bound_id: str) -> int:
        if bound_id in THEOREM_BOUNDS:
            return min(self.count, THEOREM_INSTANCE_CAP)
        return self.count


def _run_one(bound_id: str, seed: int) -> BoundReport:
    if bound_id == "prop1":
        pt, p, q, qt, scale = make_prop1_instance(seed)
        return check_prop1(pt, p, q, qt, scale, seed=seed)
    if bound_id == "lemma1":
        pt, pf, kd, alpha, scale = make_lemma1_instance(seed)
        return check_lemma1(pt, pf, kd, alpha, scale, seed=seed)
    if bound_id == "lemma2":
        pt, pf, scale = make_lemma2_instance(seed)
        return check_lemma2(pt, pf, scale, seed=seed)
    if bound_id == "lemma3":
        p, q, scale = make_lemma3_instance(seed)
        return check_lemma3(p, q, scale, seed=seed)
    if bound_id == "theorem1":
        pt, pf, qt, qg, alpha, beta = make_theorem1_instance(seed)
        return check_theorem1(pt, pf, qt, qg, alpha, beta, seed=seed)
    if bound_id == "theorem2core":
        net, pt, qt = make_theorem2_instance(seed)
        return check_theorem2_core(net, pt, qt, seed=seed)
    raise ContractError(f"unknown bound id {bound_id!r}")


# disjoint seed blocks per bound so families never share instances
_SEED_STRIDE = 10 ** 6


def run_bound_suite(config: BoundSuiteConfig) -> tuple[list, dict]:
    """Run every checker on its instance family.

    Returns (reports, summary); summary carries per-bound counts, pass
    rates, and minimum slacks, plus an overall all_pass flag. Reports are
    ordered by (bound, seed) so reruns are byte-identical.
    """
    reports: list[BoundReport] = []
    summary: dict = {"bounds": {}, "all_pass": True,
                     "total_instances": 0}
    for b_idx, bound_id in enumerate(BOUND_IDS):
        n = config.count_for(bound_id)
        block = []
        base = config.seed + b_idx * _SEED_STRIDE
        for i in range(n):
            block.append(_run_one(bound_id, base + i))
        reports.extend(block)
        finite_slacks = [r.slack for r in block if math.isfinite(r.slack)]
        summary["bounds"][bound_id] = {
            "instances": n,
            "passed": sum(r.passed for r in block),
            "pass_rate": (sum(r.passed for r in block) / n) if n else None,
            "min_slack": min(finite_slacks) if finite_slacks else None,
        }
        summary["total_instances"] += n
        if any(not r.passed for r in block):
            summary["all_pass"] = False
    return reports, summary
