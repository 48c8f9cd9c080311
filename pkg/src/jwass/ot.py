"""Exact 1-Wasserstein distances between empirical joint distributions.

An EmpiricalJoint is a finite measure on feature space x label simplex:
atoms (z_i, y_i) with probability weights w_i, where y_i is either a one-hot
class vertex or a soft conditional over the K classes. Ground cost between
atoms is the product metric

    c((z1, y1), (z2, y2)) = sqrt(||z1 - z2||^2 + s^2 ||y1 - y2||^2)

with s the label_scale knob. exact_w1 solves the transportation LP on that
cost and returns the optimal value and plan; brute_force_w1 re-derives the
same number on tiny uniform instances by enumerating permutations (the LP
optimum over a doubly-uniform polytope is attained at a permutation matrix),
which is the independent route the oracle is checked against.

A soft-labeled atom sits at an interior point of the simplex. When the
measure is meant to live on the label VERTICES (a mixture over classes,
which is what the inequality suite assumes), call expand() first: it splits
each atom into one-hot atoms with mass w_i * y_i[k]. For hard labels
expand() is the identity up to dropping nothing.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ContractError, DimensionError, SolverError

WEIGHT_TOL = 1e-12      # weights must sum to 1 this tightly
ROW_TOL = 1e-9          # conditional rows must sum to 1 this tightly
MARGINAL_TOL = 1e-9     # transport plans must reproduce marginals this tightly
MASS_MATCH_TOL = 1e-9   # classwise oracle refuses beyond this mass mismatch
BRUTE_FORCE_MAX = 8


def _as_conditionals(labels, n, n_classes) -> np.ndarray:
    """Normalize hard index labels or soft rows to an (n, K) float matrix."""
    labels = np.asarray(labels)
    if labels.ndim == 1:
        if labels.shape != (n,):
            raise DimensionError(f"labels shape {labels.shape}, expected ({n},)")
        idx = labels.astype(np.int64)
        if (idx != labels).any():
            raise ContractError("hard labels must be integers")
        if idx.min() < 0 or idx.max() >= n_classes:
            raise ContractError(
                f"hard labels must lie in [0, {n_classes}), got "
                f"[{idx.min()}, {idx.max()}]")
        cond = np.zeros((n, n_classes))
        cond[np.arange(n), idx] = 1.0
        return cond
    if labels.shape != (n, n_classes):
        raise DimensionError(
            f"soft labels shape {labels.shape}, expected ({n}, {n_classes})")
    return labels.astype(np.float64)


@dataclass
class EmpiricalJoint:
    """Weighted atoms on feature space x label simplex.

    points: (n, d) features; conditionals: (n, K) rows on the simplex
    (one-hot rows for hard labels); weights: (n,) nonnegative, sum 1.
    """

    points: np.ndarray
    conditionals: np.ndarray
    weights: np.ndarray
    n_classes: int = field(default=0)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.conditionals = np.asarray(self.conditionals, dtype=np.float64)
        n = self.points.shape[0]
        if self.n_classes == 0:
            self.n_classes = self.conditionals.shape[1]
        self.conditionals = _as_conditionals(self.conditionals, n,
                                             self.n_classes)
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if n == 0:
            raise ContractError("empirical joint needs at least one atom")
        # NaN slips through the tolerance comparisons below (NaN > tol is
        # False), so finiteness is checked outright.
        if not np.isfinite(self.points).all():
            raise ContractError("atom coordinates must be finite")
        if not np.isfinite(self.conditionals).all():
            raise ContractError("conditionals must be finite")
        if not np.isfinite(self.weights).all():
            raise ContractError("weights must be finite")
        if self.weights.shape != (n,):
            raise DimensionError(
                f"weights shape {self.weights.shape}, expected ({n},)")
        if (self.weights < 0).any():
            raise ContractError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > WEIGHT_TOL:
            raise ContractError(
                f"weights sum to {self.weights.sum()!r}, not 1")
        if (self.conditionals < -1e-12).any():
            raise ContractError("conditional entries must be nonnegative")
        self.conditionals = np.maximum(self.conditionals, 0.0)
        row_sums = self.conditionals.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > ROW_TOL:
            raise ContractError("conditional rows must sum to 1")

    @classmethod
    def from_hard(cls, points, labels, n_classes, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        cond = _as_conditionals(np.asarray(labels), points.shape[0], n_classes)
        return cls(points, cond, weights, n_classes)

    @classmethod
    def from_soft(cls, points, conditionals, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        conditionals = np.asarray(conditionals, dtype=np.float64)
        return cls(points, conditionals, weights, conditionals.shape[1])

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_hard(self) -> bool:
        return bool(((self.conditionals == 0.0)
                     | (self.conditionals == 1.0)).all())

    def class_masses(self) -> np.ndarray:
        """Total probability mass per class: sum_i w_i * cond_i."""
        return self.weights @ self.conditionals

    def hard_labels(self) -> np.ndarray:
        if not self.is_hard:
            raise ContractError("joint has soft conditionals")
        return self.conditionals.argmax(axis=1)

    def expand(self) -> "EmpiricalJoint":
        """Split soft atoms into one-hot atoms (z_i, e_k) of mass w_i*p_i(k).

        Atoms are emitted in atom-major, class-minor order; zero-mass
        combinations are dropped. Hard joints come back equivalent (same
        measure, possibly reordered atoms).
        """
        i_idx, k_idx = np.nonzero(self.conditionals > 0.0)
        masses = self.weights[i_idx] * self.conditionals[i_idx, k_idx]
        keep = masses > 0.0
        i_idx, k_idx, masses = i_idx[keep], k_idx[keep], masses[keep]
        if masses.size == 0:
            raise ContractError("expansion produced an empty measure")
        cond = np.zeros((masses.size, self.n_classes))
        cond[np.arange(masses.size), k_idx] = 1.0
        total = masses.sum()
        return EmpiricalJoint(self.points[i_idx], cond, masses / total,
                              self.n_classes)


def product_metric_cost(z1, y1, z2, y2, label_scale: float = 1.0) -> float:
    """Ground cost between two labeled points."""
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if z1.shape != z2.shape or y1.shape != y2.shape:
        raise DimensionError("point pairs must share shapes")
    if label_scale < 0:
        raise ContractError("label_scale must be nonnegative")
    dz2 = float(((z1 - z2) ** 2).sum())
    dy2 = float(((y1 - y2) ** 2).sum())
    return float(np.sqrt(dz2 + label_scale ** 2 * dy2))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances via direct differences.

    The dot-product expansion would be faster but loses ~sqrt(eps) of
    absolute accuracy to cancellation near zero, which is visible after
    the square root; the inequality suite runs at 1e-7 relative slack, so
    accuracy wins (sizes here stay small enough that memory is a non-issue).
    """
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cost_matrix(p: EmpiricalJoint, q: EmpiricalJoint,
                label_scale: float = 1.0) -> np.ndarray:
    if p.dim != q.dim:
        raise DimensionError(f"feature dims differ: {p.dim} vs {q.dim}")
    if p.n_classes != q.n_classes:
        raise DimensionError(
            f"class counts differ: {p.n_classes} vs {q.n_classes}")
    if label_scale < 0:
        raise ContractError("label_scale must be nonnegative")
    c = np.sqrt(_sq_dists(p.points, q.points)
                + label_scale ** 2 * _sq_dists(p.conditionals,
                                               q.conditionals))
    # finite atoms can still overflow when squared (~1e155 and beyond)
    if not np.isfinite(c).all():
        raise ContractError("cost matrix has non-finite entries; atom "
                            "coordinates are too large to square")
    return c


@dataclass
class TransportPlan:
    """An optimal coupling: matrix[i, j] is mass moved from atom i to atom j."""

    matrix: np.ndarray
    cost: float

    @property
    def row_marginals(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def col_marginals(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def to_csv(self, path):
        """Sparse listing `i,j,mass` of the plan's support, row-major."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "mass"])
            rows, cols = np.nonzero(self.matrix > 0.0)
            for i, j in zip(rows, cols):
                writer.writerow([int(i), int(j),
                                 repr(float(self.matrix[i, j]))])


def _solve_transport(cost: np.ndarray, w: np.ndarray,
                     v: np.ndarray) -> np.ndarray:
    """Transportation LP via HiGHS; one redundant marginal row dropped."""
    n, m = cost.shape
    a_eq = sparse.vstack([
        sparse.kron(sparse.eye(n, format="csr"),
                    np.ones((1, m)), format="csr"),
        sparse.kron(np.ones((1, n)),
                    sparse.eye(m, format="csr"), format="csr"),
    ], format="csr")[:-1]
    b_eq = np.concatenate([w, v])[:-1]
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if res.status != 0 or res.x is None:
        raise SolverError(
            f"transport LP failed (status {res.status}: {res.message}); "
            f"instance n={n} m={m}, weight sums {w.sum()!r}/{v.sum()!r}, "
            f"cost range [{cost.min()!r}, {cost.max()!r}]")
    plan = res.x.reshape(n, m)
    resid = max(np.abs(plan.sum(axis=1) - w).max(),
                np.abs(plan.sum(axis=0) - v).max())
    if resid > MARGINAL_TOL:
        raise SolverError(
            f"transport plan violates marginals (residual {resid!r}); "
            f"instance n={n} m={m}")
    return plan


def exact_w1(p: EmpiricalJoint, q: EmpiricalJoint,
             label_scale: float = 1.0) -> tuple[float, TransportPlan]:
    """Exact 1-Wasserstein distance between two empirical joints.

    Solves the primal transportation LP on the product-metric cost.
    Returns (distance, optimal plan); the reported distance is the plan's
    own cost, so `(plan.matrix * cost).sum() == distance` exactly.
    """
    c = cost_matrix(p, q, label_scale)
    plan = _solve_transport(c, p.weights, q.weights)
    value = float((plan * c).sum())
    return value, TransportPlan(matrix=plan, cost=value)


def brute_force_w1(p: EmpiricalJoint, q: EmpiricalJoint,
                   label_scale: float = 1.0) -> float:
    """Permutation-enumeration W1 for small uniform instances.

    Requires n == m <= 8 and uniform weights on both sides (the uniform
    transportation polytope's vertices are permutation matrices, so the
    optimum is min over permutations of the mean matched cost). Never
    touches the LP; this is the oracle's independent check.
    """
    n = p.n
    if q.n != n:
        raise ContractError(f"brute force needs equal sizes, got {n} vs {q.n}")
    if n > BRUTE_FORCE_MAX:
        raise ContractError(f"brute force refuses n > {BRUTE_FORCE_MAX}")
    uniform = np.full(n, 1.0 / n)
    if (np.abs(p.weights - uniform).max() > WEIGHT_TOL
            or np.abs(q.weights - uniform).max() > WEIGHT_TOL):
        raise ContractError("brute force needs uniform weights")
    c = cost_matrix(p, q, label_scale)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        total = c[np.arange(n), perm].sum()
        if total < best:
            best = total
    return float(best / n)


def classwise_w1_oracle(p: EmpiricalJoint, q: EmpiricalJoint,
                        y: int) -> float:
    """Class-restricted unbalanced W1 term, evaluated exactly.

    For measures whose class-y masses agree (M = sum_i w_i p_i(y) on both
    sides), the class-y term equals M times the feature-only W1 between
    the normalized class-conditioned measures. With mismatched masses the
    term is unbounded over the admissible witnesses, so the oracle refuses
    (tolerance 1e-9). Zero shared mass contributes zero.
    """
    if not 0 <= y < p.n_classes:
        raise ContractError(f"class {y} out of range [0, {p.n_classes})")
    if p.n_classes != q.n_classes:
        raise DimensionError(
            f"class counts differ: {p.n_classes} vs {q.n_classes}")
    if p.dim != q.dim:
        raise DimensionError(f"feature dims differ: {p.dim} vs {q.dim}")
    mass_p = float(p.weights @ p.conditionals[:, y])
    mass_q = float(q.weights @ q.conditionals[:, y])
    if abs(mass_p - mass_q) > MASS_MATCH_TOL:
        raise ContractError(
            f"class {y} masses differ ({mass_p!r} vs {mass_q!r}); the "
            "unbalanced term is unbounded for mismatched masses")
    mass = 0.5 * (mass_p + mass_q)
    if mass <= 1e-15:
        return 0.0
    wp = p.weights * p.conditionals[:, y]
    wq = q.weights * q.conditionals[:, y]
    keep_p = wp > 0.0
    keep_q = wq > 0.0
    c = np.sqrt(_sq_dists(p.points[keep_p], q.points[keep_q]))
    plan = _solve_transport(c, wp[keep_p] / wp[keep_p].sum(),
                            wq[keep_q] / wq[keep_q].sum())
    return mass * float((plan * c).sum())
