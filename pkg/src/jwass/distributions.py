"""Datasets, synthetic generators, mixtures, and the divergence helpers the
inequality suite leans on.

A DatasetSplit is raw supervised data (features + integer labels, -1 meaning
unlabeled) tagged with a domain name. EmpiricalJoints over the LEARNED
representation are built from splits via pseudo_label / from_hard at the
call sites that own a model.

CSV layout, one file per dataset, both domains allowed in one file:

    domain,label,f0,f1,...,f{d-1}

with label -1 for unlabeled rows. Floats are written with repr so a
write/read round trip is bit-exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, DimensionError
from .ot import EmpiricalJoint, cost_matrix

UNLABELED = -1


@dataclass
class DatasetSplit:
    """Features plus (possibly partially masked) integer labels."""

    features: np.ndarray
    labels: np.ndarray
    domain: str
    n_classes: int

    def __post_init__(self):
        self.features = np.atleast_2d(
            np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.features.shape[0]
        if n == 0:
            raise ContractError("empty dataset split")
        if self.labels.shape != (n,):
            raise DimensionError(
                f"labels shape {self.labels.shape}, expected ({n},)")
        bad = (self.labels != UNLABELED) & (
            (self.labels < 0) | (self.labels >= self.n_classes))
        if bad.any():
            raise ContractError(
                f"labels must be {UNLABELED} or in [0, {self.n_classes})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != UNLABELED

    def labeled_view(self) -> "DatasetSplit":
        m = self.labeled_mask
        if not m.any():
            raise ContractError(f"split {self.domain!r} has no labeled rows")
        return DatasetSplit(self.features[m], self.labels[m], self.domain,
                            self.n_classes)


def mask_labels(split: DatasetSplit, fraction: float,
                seed: int) -> DatasetSplit:
    """Hide labels down to a fraction, stratified by class.

    Exactly ceil(fraction * n) rows stay labeled (n counting the rows
    that have labels to hide), apportioned across classes by largest
    remainder so each class keeps within +-1 of fraction * n_class.
    Rows already unlabeled stay unlabeled and are not candidates. The
    fraction lives strictly inside (0, 1): this op always produces a
    partially labeled split.
    """
    if not 0.0 < fraction < 1.0:
        raise ContractError(f"fraction must be in (0, 1), got {fraction}")
    class_rows = [np.flatnonzero(split.labels == cls)
                  for cls in range(split.n_classes)]
    sizes = np.array([r.size for r in class_rows])
    target = int(np.ceil(fraction * sizes.sum()))
    quotas = fraction * sizes
    counts = np.floor(quotas).astype(int)
    fracs = quotas - counts
    # stable tie-break: larger remainder first, lower class id on ties
    order = np.lexsort((np.arange(sizes.size), -fracs))
    for cls in order[:target - counts.sum()]:
        counts[cls] += 1

    rng = np.random.default_rng(seed)
    labels = np.full(split.n, UNLABELED, dtype=np.int64)
    for cls, rows in enumerate(class_rows):
        if counts[cls]:
            keep = rng.choice(rows, size=counts[cls], replace=False)
            labels[keep] = cls
    return replace(split, labels=labels)


# ---------------------------------------------------------------------------
# CSV


def write_dataset_csv(path, splits: list[DatasetSplit]):
    dims = {s.dim for s in splits}
    if len(dims) != 1:
        raise DimensionError(f"splits disagree on feature dim: {dims}")
    d = dims.pop()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["domain", "label"] + [f"f{i}" for i in range(d)])
        for s in splits:
            for i in range(s.n):
                writer.writerow([s.domain, int(s.labels[i])]
                                + [repr(float(x)) for x in s.features[i]])


def load_csv(path, n_classes: int, domain: str | None = None) -> DatasetSplit:
    """Read one domain's rows from a dataset CSV.

    With domain=None the file must contain exactly one domain value;
    otherwise pass the domain to select. Unknown columns are a contract
    error, as is an empty selection.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ContractError(f"{path}: empty file")
        expected = ["domain", "label"] + [
            f"f{i}" for i in range(len(header) - 2)]
        if header != expected:
            raise ContractError(
                f"{path}: header {header!r} does not match "
                f"'domain,label,f0,...'")
        rows = list(reader)
    if not rows:
        raise ContractError(f"{path}: no data rows")
    domains_present = sorted({r[0] for r in rows})
    if domain is None:
        if len(domains_present) != 1:
            raise ContractError(
                f"{path}: contains domains {domains_present}; pass domain=")
        domain = domains_present[0]
    elif domain not in domains_present:
        raise ContractError(
            f"{path}: domain {domain!r} not present (found "
            f"{domains_present})")
    features, labels = [], []
    for lineno, row in enumerate(rows, start=2):  # header is line 1
        if row[0] != domain:
            continue
        if len(row) != len(header):
            raise ContractError(
                f"{path}: line {lineno}: {len(row)} fields, expected "
                f"{len(header)}")
        try:
            labels.append(int(row[1]))
            features.append([float(x) for x in row[2:]])
        except ValueError as exc:
            raise ContractError(
                f"{path}: line {lineno}: {exc}") from None
    return DatasetSplit(np.array(features), np.array(labels, dtype=np.int64),
                        domain, n_classes)


# ---------------------------------------------------------------------------
# synthetic generators


MOONS_CENTER = np.array([0.5, 0.25])  # midpoint of the two arc centers

# Masking seeds are offset from the data seed so the label pattern and the
# point cloud come from independent streams.
_MASK_SEED_P = 10_000
_MASK_SEED_Q = 20_000


def gen_two_moons_raw(n_per_domain: int, rotation_deg: float,
                      noise_sd: float, seed: int,
                      ) -> tuple[DatasetSplit, DatasetSplit]:
    """Two interleaved half-circles; the second domain is the same
    distribution rigidly rotated by rotation_deg about the moons'
    midpoint.

    Both domains come back fully labeled (this is the ground-truth
    variant; gen_two_moons_domains adds the semi-supervised masking).
    One seed fixes both domains.
    """
    if n_per_domain < 2:
        raise ContractError("need at least 2 points per domain")
    rng = np.random.default_rng(seed)

    def moons(n):
        n_upper = n // 2
        n_lower = n - n_upper
        t_up = rng.uniform(0.0, np.pi, size=n_upper)
        t_lo = rng.uniform(0.0, np.pi, size=n_lower)
        upper = np.stack([np.cos(t_up), np.sin(t_up)], axis=1)
        lower = np.stack([1.0 - np.cos(t_lo), 0.5 - np.sin(t_lo)], axis=1)
        pts = np.vstack([upper, lower])
        pts += rng.normal(0.0, noise_sd, size=pts.shape)
        labels = np.concatenate([np.zeros(n_upper, dtype=np.int64),
                                 np.ones(n_lower, dtype=np.int64)])
        return pts, labels

    pts_p, lab_p = moons(n_per_domain)
    pts_q, lab_q = moons(n_per_domain)
    theta = np.deg2rad(rotation_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    pts_q = (pts_q - MOONS_CENTER) @ rot.T + MOONS_CENTER
    return (DatasetSplit(pts_p, lab_p, "P", 2),
            DatasetSplit(pts_q, lab_q, "Q", 2))


def gen_two_moons_domains(n_per_domain: int, rotation_deg: float,
                          noise_sd: float, alpha: float, beta: float,
                          seed: int) -> tuple[DatasetSplit, DatasetSplit]:
    """Semi-supervised rotated two-moons pair.

    P keeps an alpha fraction of its labels and Q a beta fraction,
    stratified per class (each class independently keeps the rounded
    fraction of its rows, chosen uniformly without replacement). The
    fractions live in the open interval (0, 1): this op always returns
    partially labeled data.
    """
    if n_per_domain < 20:
        raise ContractError(
            f"need at least 20 points per domain, got {n_per_domain}")
    for name, frac in (("alpha", alpha), ("beta", beta)):
        if not 0.0 < frac < 1.0:
            raise ContractError(f"{name} must be in (0, 1), got {frac}")
    full_p, full_q = gen_two_moons_raw(n_per_domain, rotation_deg,
                                       noise_sd, seed)
    masked_p = mask_labels(full_p, alpha, seed + _MASK_SEED_P)
    masked_q = mask_labels(full_q, beta, seed + _MASK_SEED_Q)
    return masked_p, masked_q


def gen_finite_joint(seed: int, n_atoms: int, dim: int = 2,
                     n_classes: int = 2, soft: bool = True,
                     spread: float = 1.0, uniform: bool = False,
                     ) -> EmpiricalJoint:
    """A random small empirical joint for the inequality suite."""
    rng = np.random.default_rng(seed)
    points = rng.normal(0.0, spread, size=(n_atoms, dim))
    if uniform:
        weights = np.full(n_atoms, 1.0 / n_atoms)
    else:
        weights = rng.uniform(0.2, 1.0, size=n_atoms)
        weights = weights / weights.sum()
    if soft:
        cond = rng.dirichlet(np.ones(n_classes), size=n_atoms)
        return EmpiricalJoint.from_soft(points, cond, weights)
    labels = rng.integers(0, n_classes, size=n_atoms)
    return EmpiricalJoint.from_hard(points, labels, n_classes, weights)


def gen_shared_marginal_pair(seed: int, n_atoms: int, dim: int = 2,
                             n_classes: int = 2, smoothing: float = 0.0,
                             ) -> tuple[EmpiricalJoint, EmpiricalJoint]:
    """Two joints over the SAME feature atoms and weights, with independent
    random conditionals: exactly the setting where a conditional-divergence
    bound on their distance applies.

    smoothing > 0 floors every conditional entry (then renormalizes), which
    keeps all pairwise conditional KLs finite.
    """
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n_atoms, dim))
    weights = rng.uniform(0.2, 1.0, size=n_atoms)
    weights = weights / weights.sum()
    conds = []
    for _ in range(2):
        c = rng.dirichlet(np.ones(n_classes), size=n_atoms)
        if smoothing > 0.0:
            c = np.maximum(c, smoothing)
            c = c / c.sum(axis=1, keepdims=True)
        conds.append(c)
    return (EmpiricalJoint.from_soft(points, conds[0], weights),
            EmpiricalJoint.from_soft(points, conds[1], weights))


# ---------------------------------------------------------------------------
# mixtures and pseudo-labels


@dataclass
class MixtureSpec:
    """alpha parts labeled joint, (1 - alpha) parts pseudo-labeled joint."""

    alpha: float
    labeled: EmpiricalJoint
    pseudo: EmpiricalJoint

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.labeled.dim != self.pseudo.dim:
            raise DimensionError("mixture components disagree on feature dim")
        if self.labeled.n_classes != self.pseudo.n_classes:
            raise DimensionError("mixture components disagree on classes")


def mix(spec: MixtureSpec) -> EmpiricalJoint:
    """Concatenate the two components with weights alpha, 1 - alpha."""
    if spec.alpha == 1.0:
        return spec.labeled
    if spec.alpha == 0.0:
        return spec.pseudo
    points = np.vstack([spec.labeled.points, spec.pseudo.points])
    cond = np.vstack([spec.labeled.conditionals, spec.pseudo.conditionals])
    weights = np.concatenate([spec.alpha * spec.labeled.weights,
                              (1.0 - spec.alpha) * spec.pseudo.weights])
    return EmpiricalJoint(points, cond, weights, spec.labeled.n_classes)


def pseudo_label(features: np.ndarray, model) -> EmpiricalJoint:
    """Joint over the model's representation with its own soft predictions.

    `model` needs .features(x) -> z and .class_probs(z) -> softmax rows
    (duck-typed so this module stays independent of the trainer).
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    z = model.features(features)
    cond = model.class_probs(z)
    return EmpiricalJoint.from_soft(z, cond)


# ---------------------------------------------------------------------------
# divergences and diameters


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats between two finite distributions.

    0 log 0 = 0; mass where q is zero makes the divergence infinite.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"kl: shapes {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if (v < 0).any() or abs(v.sum() - 1.0) > 1e-9:
            raise ContractError(f"{name} is not a distribution")
    support = p > 0.0
    if (q[support] == 0.0).any():
        return float("inf")
    return float((p[support] * np.log(p[support] / q[support])).sum())


def expected_conditional_kl(p: EmpiricalJoint, q: EmpiricalJoint) -> float:
    """E_{z ~ shared marginal} KL(p(.|z) || q(.|z)), in nats.

    Requires the two joints to share atoms and weights exactly (that is
    what makes the conditional decomposition of their joint KL valid).
    """
    if p.n != q.n or not np.array_equal(p.points, q.points):
        raise ContractError("joints must share feature atoms")
    if np.abs(p.weights - q.weights).max() > 1e-12:
        raise ContractError("joints must share atom weights")
    total = 0.0
    for i in range(p.n):
        if p.weights[i] == 0.0:
            continue
        kl = kl_divergence(p.conditionals[i], q.conditionals[i])
        if kl == float("inf"):
            return float("inf")
        total += p.weights[i] * kl
    return total


def empirical_diameter(p: EmpiricalJoint, q: EmpiricalJoint,
                       label_scale: float = 1.0) -> float:
    """Max product-metric distance over the union of the two supports."""
    union = EmpiricalJoint(
        np.vstack([p.points, q.points]),
        np.vstack([p.conditionals, q.conditionals]),
        np.concatenate([p.weights, q.weights]) / 2.0,
        p.n_classes)
    return float(cost_matrix(union, union, label_scale).max())
