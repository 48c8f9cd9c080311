"""The training objective: classification loss, entropy regularizer, and the
three flavors of Wasserstein domain critic.

The critic families differ in what they compare across domains:

- ``marginal``: a single witness on the representation alone; pushing it
  down aligns feature marginals and happily destroys class structure.
- ``joint``: one witness on [z ; label_scale * y]; the conditional enters
  as part of the critic's input point.
- ``class_dependent``: K witnesses, one per class, each weighted by the
  conditional mass an atom puts on that class. The per-batch estimate

      L_d = (1/n) sum_i sum_y p(y|z_i^P) D_y(z_i^P)
          - (1/m) sum_j sum_y p(y|z_j^Q) D_y(z_j^Q)

  is the quantity whose supremum over 1-Lipschitz witness tuples is the
  classwise distance sum the theory controls, hence the spectral
  normalization on every critic layer.

Two call paths matter for gradients. During critic ascent the embeddings
and conditionals are frozen snapshots (plain arrays). During the model's
descent step the conditionals of unlabeled rows are the classifier's own
live softmax, so the alignment pressure reaches the classifier too; that
path lives in total_objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nc
from .errors import ContractError, DimensionError

CRITIC_KINDS = ("none", "marginal", "joint", "class_dependent")


@dataclass
class ObjectiveWeights:
    w_classifier: float = 1.0
    w_critic: float = 0.1
    w_entmin: float = 0.0


class CriticNet:
    """A spectrally normalized MLP witness. kind decides input and width of
    the output: K columns for class_dependent, one for joint/marginal."""

    def __init__(self, kind: str, net: nc.MLP, label_scale: float):
        if kind not in CRITIC_KINDS or kind == "none":
            raise ContractError(f"bad critic kind {kind!r}")
        self.kind = kind
        self.net = net
        self.label_scale = float(label_scale)

    def parameters(self):
        return self.net.parameters()

    def forward_z(self, tape: nc.Tape, z: nc.Tensor,
                  update_u: bool = True) -> nc.Tensor:
        if self.kind == "joint":
            raise ContractError("joint critic needs conditionals as input")
        return self.net.forward(tape, z, update_u=update_u)

    def forward_joint(self, tape: nc.Tape, z: nc.Tensor, cond: nc.Tensor,
                      update_u: bool = True) -> nc.Tensor:
        if self.kind != "joint":
            raise ContractError(f"{self.kind} critic takes z only")
        x = nc.concat_cols(z, nc.scale(cond, self.label_scale))
        return self.net.forward(tape, x, update_u=update_u)

    def refine_sigma(self, iters: int = 50):
        """Converge every layer's power iteration in place."""
        for layer in self.net.layers:
            nc.spectral_normalize(layer, iters=iters)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "label_scale": self.label_scale,
                "net": self.net.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "CriticNet":
        return cls(d["kind"], nc.MLP.from_dict(d["net"]),
                   float(d["label_scale"]))


def make_critic(kind: str, d_z: int, n_classes: int, width: int = 64,
                depth: int = 3, slope: float = 0.1, label_scale: float = 1.0,
                seed: int = 0) -> CriticNet | None:
    """Build a critic for the given kind; 'none' returns None."""
    if kind not in CRITIC_KINDS:
        raise ContractError(
            f"critic kind must be one of {CRITIC_KINDS}, got {kind!r}")
    if kind == "none":
        return None
    if depth < 2:
        raise ContractError("critic depth must be >= 2")
    in_dim = d_z + n_classes if kind == "joint" else d_z
    out_dim = n_classes if kind == "class_dependent" else 1
    rng = np.random.default_rng(seed)
    dims = [in_dim] + [width] * (depth - 1) + [out_dim]
    layers = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        act = "identity" if i == depth - 1 else "leaky_relu"
        layers.append(nc.DenseLayer(a, b, activation=act, slope=slope,
                                    spectral=True, rng=rng,
                                    name=f"critic{i}"))
    return CriticNet(kind, nc.MLP(layers), label_scale)


# ---------------------------------------------------------------------------
# losses


def cross_entropy_loss(pred: nc.Tensor, onehot: np.ndarray) -> nc.Tensor:
    """Mean negative log predicted probability of the true class.

    Predictions at exactly zero are clamped at 1e-12 inside the log, so
    the loss and its gradient stay finite; callers can count clamp events
    via clamp_count.
    """
    onehot = np.asarray(onehot, dtype=np.float64)
    if pred.value.shape != onehot.shape:
        raise DimensionError(
            f"pred {pred.value.shape} vs targets {onehot.shape}")
    n = onehot.shape[0]
    if n == 0:
        raise ContractError("cross entropy over an empty batch")
    picked = nc.mul(nc.safe_log(pred), pred.tape.constant(onehot))
    return nc.scale(nc.sum_all(picked), -1.0 / n)


def clamp_count(pred_values: np.ndarray, onehot: np.ndarray) -> int:
    """How many true-class predictions fell at or below the log clamp."""
    p_true = (np.asarray(pred_values) * onehot).sum(axis=1)
    return int((p_true <= nc.LOG_EPS).sum())


def entmin_loss(pred: nc.Tensor) -> nc.Tensor:
    """Mean Shannon entropy (nats) of prediction rows; minimizing it pushes
    unlabeled predictions toward a vertex."""
    n = pred.value.shape[0]
    if n == 0:
        raise ContractError("entropy over an empty batch")
    plogp = nc.mul(pred, nc.safe_log(pred))
    return nc.scale(nc.sum_all(plogp), -1.0 / n)


def onehot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def domain_loss_frozen(tape: nc.Tape, critic: CriticNet, z_p: np.ndarray,
                       cond_p: np.ndarray, z_q: np.ndarray,
                       cond_q: np.ndarray,
                       update_u: bool = True) -> nc.Tensor:
    """L_d with embeddings and conditionals as constants (critic ascent).

    Gradients reach only the critic's parameters; maximize by stepping on
    the negation.
    """
    zp = tape.constant(z_p)
    zq = tape.constant(z_q)
    n, m = z_p.shape[0], z_q.shape[0]
    if n == 0 or m == 0:
        raise ContractError("domain loss needs nonempty batches")
    if critic.kind == "marginal":
        dp = critic.forward_z(tape, zp, update_u)
        dq = critic.forward_z(tape, zq, update_u)
        return nc.sub(nc.mean_all(dp), nc.mean_all(dq))
    if critic.kind == "joint":
        dp = critic.forward_joint(tape, zp, tape.constant(cond_p), update_u)
        dq = critic.forward_joint(tape, zq, tape.constant(cond_q), update_u)
        return nc.sub(nc.mean_all(dp), nc.mean_all(dq))
    dp = critic.forward_z(tape, zp, update_u)
    dq = critic.forward_z(tape, zq, update_u)
    term_p = nc.scale(nc.sum_all(nc.mul(dp, tape.constant(cond_p))), 1.0 / n)
    term_q = nc.scale(nc.sum_all(nc.mul(dq, tape.constant(cond_q))), 1.0 / m)
    return nc.sub(term_p, term_q)


@dataclass
class ObjectiveParts:
    """The descent-step objective, with its summands kept visible."""

    total: nc.Tensor
    loss_c_p: nc.Tensor | None
    loss_c_q: nc.Tensor | None
    loss_d: nc.Tensor | None
    entmin: nc.Tensor | None
    flags: dict = field(default_factory=dict)


def _domain_term_live(tape, critic, z, pred, lab_idx, unl_idx, lab_onehot,
                      n_rows):
    """(1/n) sum_i cond_i . D(row_i) with labeled rows one-hot (constant)
    and unlabeled rows using the live classifier softmax."""
    if critic.kind == "marginal":
        return nc.mean_all(critic.forward_z(tape, z, update_u=False))
    if critic.kind == "joint":
        pieces = []
        if lab_idx.size:
            d = critic.forward_joint(tape, nc.take_rows(z, lab_idx),
                                     tape.constant(lab_onehot),
                                     update_u=False)
            pieces.append(nc.sum_all(d))
        if unl_idx.size:
            d = critic.forward_joint(tape, nc.take_rows(z, unl_idx),
                                     nc.take_rows(pred, unl_idx),
                                     update_u=False)
            pieces.append(nc.sum_all(d))
        total = pieces[0] if len(pieces) == 1 else nc.add(*pieces)
        return nc.scale(total, 1.0 / n_rows)
    d_all = critic.forward_z(tape, z, update_u=False)
    pieces = []
    if lab_idx.size:
        picked = nc.mul(nc.take_rows(d_all, lab_idx),
                        tape.constant(lab_onehot))
        pieces.append(nc.sum_all(picked))
    if unl_idx.size:
        picked = nc.mul(nc.take_rows(d_all, unl_idx),
                        nc.take_rows(pred, unl_idx))
        pieces.append(nc.sum_all(picked))
    total = pieces[0] if len(pieces) == 1 else nc.add(*pieces)
    return nc.scale(total, 1.0 / n_rows)


def total_objective(tape: nc.Tape, feature_net: nc.MLP,
                    classifier_net: nc.MLP, critic: CriticNet | None,
                    x_p: np.ndarray, labels_p: np.ndarray, x_q: np.ndarray,
                    labels_q: np.ndarray, weights: ObjectiveWeights,
                    n_classes: int) -> ObjectiveParts:
    """Build the full descent objective on one tape.

    labels use -1 for unlabeled rows. Classification terms cover labeled
    rows only and are skipped (with a flag) when a domain's batch has
    none; the entropy term covers unlabeled rows. The critic, if any, is
    applied with frozen parameters conceptually (its params do get
    gradients on the tape, but the caller only steps the model's).
    """
    flags = {"clamped": 0, "lc_p_skipped": False, "lc_q_skipped": False}
    parts = []

    def domain_pass(x, labels):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        labels = np.asarray(labels, dtype=np.int64)
        z = feature_net.forward(tape, tape.constant(x))
        pred = classifier_net.forward(tape, z)
        lab_idx = np.flatnonzero(labels >= 0)
        unl_idx = np.flatnonzero(labels < 0)
        lab_onehot = onehot(labels[lab_idx], n_classes)
        return z, pred, lab_idx, unl_idx, lab_onehot, x.shape[0]

    zp, pred_p, lab_p, unl_p, oh_p, n_p = domain_pass(x_p, labels_p)
    zq, pred_q, lab_q, unl_q, oh_q, n_q = domain_pass(x_q, labels_q)

    def classification(pred, lab_idx, oh, skip_key):
        if lab_idx.size == 0:
            flags[skip_key] = True
            return None
        rows = nc.take_rows(pred, lab_idx)
        flags["clamped"] += clamp_count(rows.value, oh)
        return cross_entropy_loss(rows, oh)

    loss_c_p = classification(pred_p, lab_p, oh_p, "lc_p_skipped")
    loss_c_q = classification(pred_q, lab_q, oh_q, "lc_q_skipped")
    for lc in (loss_c_p, loss_c_q):
        if lc is not None and weights.w_classifier != 0.0:
            parts.append(nc.scale(lc, weights.w_classifier))

    loss_d = None
    if critic is not None and weights.w_critic != 0.0:
        term_p = _domain_term_live(tape, critic, zp, pred_p, lab_p, unl_p,
                                   oh_p, n_p)
        term_q = _domain_term_live(tape, critic, zq, pred_q, lab_q, unl_q,
                                   oh_q, n_q)
        loss_d = nc.sub(term_p, term_q)
        parts.append(nc.scale(loss_d, weights.w_critic))

    ent = None
    if weights.w_entmin != 0.0:
        ents = []
        for pred, unl in ((pred_p, unl_p), (pred_q, unl_q)):
            if unl.size:
                ents.append(entmin_loss(nc.take_rows(pred, unl)))
        if ents:
            ent = ents[0] if len(ents) == 1 else nc.add(*ents)
            parts.append(nc.scale(ent, weights.w_entmin))

    if not parts:
        flags["empty_objective"] = True
        total = tape.constant(0.0)
    else:
        total = parts[0]
        for p in parts[1:]:
            total = nc.add(total, p)
    return ObjectiveParts(total=total, loss_c_p=loss_c_p, loss_c_q=loss_c_q,
                          loss_d=loss_d, entmin=ent, flags=flags)
