"""Alternating minimax training of a classifier against a domain critic.

The model is a feature extractor F and classifier C trained to minimize
classification loss plus a weighted domain term; the critic D is trained
in an inner loop to maximize the same domain term, with its Lipschitz
constant held near 1 by spectral normalization. Each outer batch runs
``n_critic`` ascent steps on frozen embeddings, then one descent step on
the live objective where unlabeled conditionals flow through the
classifier's softmax.

Also here: evaluation (accuracies plus an exact transport distance on a
fixed subsample), a classification-only fine-tune pass that reweights
domains, embedding export, and versioned checkpoints.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nc
from . import objective as obj
from .distributions import DatasetSplit
from .errors import ContractError, DimensionError, TrainingDiverged
from .objective import CRITIC_KINDS, CriticNet, ObjectiveWeights
from .ot import EmpiricalJoint, exact_w1

CHECKPOINT_VERSION = "jw-ckpt-1"

# Per-epoch transport distance is measured on a fixed subsample this big;
# the full evaluate() uses EVAL_MAX_POINTS. Both keep the LP tractable.
EPOCH_W_POINTS = 128
EVAL_MAX_POINTS = 500
EVAL_SUBSAMPLE_SEED = 0

# Seed offsets carve one run seed into independent streams.
_CRITIC_SEED_OFFSET = 1
_BATCH_SEED_OFFSET = 2
_EPOCH_W_SEED_OFFSET = 3
_FINE_TUNE_SEED_OFFSET = 4

# Power-iteration steps run on each critic layer right after each ascent
# update. One step per forward is not enough to track Adam's kicks (the
# estimate trails the true norm by 20%+ over an epoch); this many keeps
# every layer's effective spectral norm within a few percent of 1.
ASCENT_REFINE_ITERS = 5


# ---------------------------------------------------------------------------
# configuration


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``w_critic`` outside [0.1, 1.0] is rejected unless
    ``override_critic_range`` is set; runs outside that band are allowed
    but have to be asked for explicitly.
    """

    n_classes: int = 2
    d_z: int = 16
    feature_hidden: int = 64
    classifier_hidden: int = 32
    critic_kind: str = "class_dependent"
    critic_width: int = 64
    critic_depth: int = 3
    label_scale: float = 1.0
    w_classifier: float = 1.0
    w_critic: float = 0.1
    w_entmin: float = 0.0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 50
    batch_size: int = 64
    n_critic: int = 5
    refine_iters: int = 50
    leaky_slope: float = 0.1
    seed: int = 0
    override_critic_range: bool = False
    # Debug probe: after every critic step, measure each critic layer's
    # true spectral norm (SVD) and track the worst excursion from 1 in
    # flags["sigma_lo"] / flags["sigma_hi"]. Off by default; SVDs per
    # step are pure measurement cost.
    sigma_probe: bool = False

    def __post_init__(self):
        if self.critic_kind not in CRITIC_KINDS:
            raise ContractError(
                f"critic_kind must be one of {CRITIC_KINDS}, "
                f"got {self.critic_kind!r}")
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ContractError("batch_size must be >= 2")
        if self.n_classes < 2:
            raise ContractError("n_classes must be >= 2")
        if self.n_critic < 1:
            raise ContractError("n_critic must be >= 1")
        if self.label_scale <= 0:
            raise ContractError("label_scale must be positive")
        if self.lr < 0:
            raise ContractError("lr must be nonnegative")
        in_band = 0.1 <= self.w_critic <= 1.0
        if (self.critic_kind != "none" and not in_band
                and not self.override_critic_range):
            raise ContractError(
                f"w_critic={self.w_critic} is outside [0.1, 1.0]; set "
                "override_critic_range=True to run anyway")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Load a config from .json or .toml, rejecting unknown keys."""
        text_path = str(path)
        if text_path.endswith(".json"):
            with open(path) as fh:
                raw = json.load(fh)
        elif text_path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            raise ContractError(
                f"config file must be .json or .toml, got {text_path!r}")
        if not isinstance(raw, dict):
            raise ContractError("config file must hold a single table")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ContractError(f"unknown config keys: {unknown}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# model


class ModelPair:
    """Feature extractor plus classifier, sharing one descent step."""

    def __init__(self, feature_net: nc.MLP, classifier_net: nc.MLP):
        if feature_net.out_dim != classifier_net.in_dim:
            raise DimensionError(
                f"feature output {feature_net.out_dim} does not feed "
                f"classifier input {classifier_net.in_dim}")
        self.feature_net = feature_net
        self.classifier_net = classifier_net

    @property
    def d_in(self) -> int:
        return self.feature_net.in_dim

    @property
    def d_z(self) -> int:
        return self.feature_net.out_dim

    @property
    def n_classes(self) -> int:
        return self.classifier_net.out_dim

    def parameters(self) -> list[nc.Parameter]:
        return self.feature_net.parameters() + self.classifier_net.parameters()

    def features(self, x: np.ndarray) -> np.ndarray:
        return self.feature_net.predict(np.atleast_2d(x))

    def class_probs(self, z: np.ndarray) -> np.ndarray:
        return self.classifier_net.predict(np.atleast_2d(z))

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return self.class_probs(self.features(x))

    def predict_labels(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1).astype(np.int64)

    def to_dict(self) -> dict:
        return {"feature_net": self.feature_net.to_dict(),
                "classifier_net": self.classifier_net.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelPair":
        return cls(nc.MLP.from_dict(d["feature_net"]),
                   nc.MLP.from_dict(d["classifier_net"]))

    def clone(self) -> "ModelPair":
        """Deep copy; the copy's parameters are bit-identical."""
        return ModelPair.from_dict(copy.deepcopy(self.to_dict()))


def make_model_pair(d_in: int, config: TrainConfig) -> ModelPair:
    rng = np.random.default_rng(config.seed)
    h, dz, s = config.feature_hidden, config.d_z, config.leaky_slope
    feature = nc.MLP([
        nc.DenseLayer(d_in, h, "leaky_relu", slope=s, rng=rng, name="f0"),
        nc.DenseLayer(h, h, "leaky_relu", slope=s, rng=rng, name="f1"),
        nc.DenseLayer(h, dz, "leaky_relu", slope=s, rng=rng, name="f2"),
    ])
    classifier = nc.MLP([
        nc.DenseLayer(dz, config.classifier_hidden, "leaky_relu", slope=s,
                      rng=rng, name="c0"),
        nc.DenseLayer(config.classifier_hidden, config.n_classes, "softmax",
                      rng=rng, name="c1"),
    ])
    return ModelPair(feature, classifier)


def make_run(d_in: int, config: TrainConfig) -> tuple[ModelPair,
                                                      CriticNet | None]:
    model = make_model_pair(d_in, config)
    critic = obj.make_critic(config.critic_kind, config.d_z,
                             config.n_classes, width=config.critic_width,
                             depth=config.critic_depth,
                             slope=config.leaky_slope,
                             label_scale=config.label_scale,
                             seed=config.seed + _CRITIC_SEED_OFFSET)
    if critic is not None:
        # A fresh layer's power-iteration anchor is random; one forward's
        # single step can misjudge sigma by 20%+. Converge it up front so
        # the in-band guarantee holds from the first ascent step.
        critic.refine_sigma(config.refine_iters)
    return model, critic


# ---------------------------------------------------------------------------
# metrics


@dataclass
class EpochRecord:
    """One training epoch's summary.

    Loss fields are None when every batch skipped that term; accuracy
    fields are None for a domain with no labeled rows at all.
    """

    epoch: int
    loss_c_P: float | None
    loss_c_Q: float | None
    loss_d: float | None
    acc_P: float | None
    acc_Q: float | None
    w_dist: float

    def to_record(self) -> dict:
        return {"epoch": self.epoch, "loss_c_P": self.loss_c_P,
                "loss_c_Q": self.loss_c_Q, "loss_d": self.loss_d,
                "acc_P": self.acc_P, "acc_Q": self.acc_Q,
                "w_dist": self.w_dist}


@dataclass
class MetricsLog:
    records: list[EpochRecord] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def add(self, record: EpochRecord):
        self.records.append(record)

    @property
    def last(self) -> EpochRecord:
        if not self.records:
            raise ContractError("metrics log is empty")
        return self.records[-1]

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_record()) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "MetricsLog":
        log = cls()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                log.add(EpochRecord(**d))
        return log


@dataclass
class Metrics:
    """Final evaluation: per-domain accuracy and the transport distance
    between the two (embedding, label) joints."""

    acc_P: float
    acc_Q: float
    acc_avg: float
    acc_min: float
    w_dist: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# evaluation helpers


def _labeled_accuracy(model: ModelPair, split: DatasetSplit) -> float:
    view = split.labeled_view()
    pred = model.predict_labels(view.features)
    return float(np.mean(pred == view.labels))


def _labeled_accuracy_or_none(model: ModelPair,
                              split: DatasetSplit) -> float | None:
    if not split.labeled_mask.any():
        return None
    return _labeled_accuracy(model, split)


def _eval_joint(model: ModelPair, split: DatasetSplit,
                idx: np.ndarray) -> EmpiricalJoint:
    """Joint over embeddings with true one-hot labels where available and
    the classifier's soft predictions elsewhere."""
    x = split.features[idx]
    labels = split.labels[idx]
    z = model.features(x)
    cond = np.empty((idx.size, split.n_classes))
    lab = labels >= 0
    if lab.any():
        cond[lab] = obj.onehot(labels[lab], split.n_classes)
    if (~lab).any():
        cond[~lab] = model.class_probs(z[~lab])
    return EmpiricalJoint.from_soft(z, cond)


def _subsample_idx(n: int, max_points: int, seed: int) -> np.ndarray:
    if n <= max_points:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=max_points, replace=False))


def wasserstein_eval(model: ModelPair, data_p: DatasetSplit,
                     data_q: DatasetSplit, label_scale: float = 1.0,
                     max_points: int = EVAL_MAX_POINTS,
                     subsample_seed: int = EVAL_SUBSAMPLE_SEED) -> float:
    """Exact W1 between the two evaluation joints, subsampled for the LP.

    The subsample seed is fixed by default so repeated evaluations of the
    same data compare like with like.
    """
    idx_p = _subsample_idx(data_p.n, max_points, subsample_seed)
    idx_q = _subsample_idx(data_q.n, max_points, subsample_seed)
    jp = _eval_joint(model, data_p, idx_p)
    jq = _eval_joint(model, data_q, idx_q)
    value, _ = exact_w1(jp, jq, label_scale=label_scale)
    return value


def evaluate(model: ModelPair, critic: CriticNet | None,
             data_p: DatasetSplit, data_q: DatasetSplit,
             label_scale: float = 1.0,
             max_points: int = EVAL_MAX_POINTS) -> Metrics:
    """Accuracies on each domain's labeled rows plus the transport
    distance. The critic is accepted for interface symmetry with train()
    but plays no role in these metrics."""
    del critic
    acc_p = _labeled_accuracy(model, data_p)
    acc_q = _labeled_accuracy(model, data_q)
    w = wasserstein_eval(model, data_p, data_q, label_scale=label_scale,
                         max_points=max_points)
    return Metrics(acc_P=acc_p, acc_Q=acc_q,
                   acc_avg=(acc_p + acc_q) / 2.0,
                   acc_min=min(acc_p, acc_q), w_dist=w)


# ---------------------------------------------------------------------------
# training loop


def _batch_index_pairs(n_p: int, n_q: int, batch_size: int,
                       rng: np.random.Generator) -> list[tuple[np.ndarray,
                                                               np.ndarray]]:
    """Paired batches over a fresh shuffle of each domain.

    The number of batches is floor(min(n_p, n_q) / batch_size) full ones,
    plus one ragged batch if at least 2 points per side remain; a
    1-point remainder is dropped (the domain terms average over the
    batch, and a singleton makes the critic gap degenerate).
    """
    perm_p = rng.permutation(n_p)
    perm_q = rng.permutation(n_q)
    n = min(n_p, n_q)
    full = n // batch_size
    pairs = []
    for b in range(full):
        s = b * batch_size
        pairs.append((perm_p[s:s + batch_size], perm_q[s:s + batch_size]))
    rem = n - full * batch_size
    if rem >= 2:
        s = full * batch_size
        pairs.append((perm_p[s:s + rem], perm_q[s:s + rem]))
    if not pairs:
        raise ContractError(
            f"no usable batches: min domain size {n} with batch_size "
            f"{batch_size}")
    return pairs


def _frozen_domain_value(critic: CriticNet, z_p, cond_p, z_q, cond_q) -> float:
    """Tape-free L_d at the critic's current parameters (u untouched)."""
    if critic.kind == "joint":
        dp = critic.net.predict(
            np.hstack([z_p, critic.label_scale * cond_p]))
        dq = critic.net.predict(
            np.hstack([z_q, critic.label_scale * cond_q]))
        return float(dp.mean() - dq.mean())
    dp = critic.net.predict(z_p)
    dq = critic.net.predict(z_q)
    if critic.kind == "marginal":
        return float(dp.mean() - dq.mean())
    return float((dp * cond_p).sum() / z_p.shape[0]
                 - (dq * cond_q).sum() / z_q.shape[0])


def _snapshot_conditionals(model: ModelPair, z: np.ndarray,
                           labels: np.ndarray, n_classes: int) -> np.ndarray:
    cond = np.empty((z.shape[0], n_classes))
    lab = labels >= 0
    if lab.any():
        cond[lab] = obj.onehot(labels[lab], n_classes)
    if (~lab).any():
        cond[~lab] = model.class_probs(z[~lab])
    return cond


def _diverged(name: str, value: float, epoch: int, batch: int,
              parts=None) -> TrainingDiverged:
    snapshot = {"term": name, "value": value, "epoch": epoch, "batch": batch}
    if parts is not None:
        for key in ("loss_c_p", "loss_c_q", "loss_d", "entmin"):
            t = getattr(parts, key)
            snapshot[key] = None if t is None else float(t.value)
    err = TrainingDiverged(
        f"non-finite {name} ({value}) at epoch {epoch}, batch {batch}; "
        f"snapshot: {snapshot}")
    err.snapshot = snapshot
    return err


def train(config: TrainConfig, data_p: DatasetSplit,
          data_q: DatasetSplit) -> tuple[ModelPair, CriticNet | None,
                                         MetricsLog]:
    """Run the alternating loop and return (model, critic, metrics log).

    Per batch: ``n_critic`` ascent steps on the frozen domain term (the
    critic's spectral estimate refreshes one power step per forward),
    then one descent step on the full objective. Per epoch: a 50-step
    spectral refinement of the critic, accuracies on labeled rows, and
    an exact transport distance on a fixed subsample. Any non-finite
    loss aborts with a diagnostic snapshot.
    """
    if data_p.dim != data_q.dim:
        raise DimensionError(
            f"domains disagree on feature dim: {data_p.dim} vs {data_q.dim}")
    if (data_p.n_classes != config.n_classes
            or data_q.n_classes != config.n_classes):
        raise ContractError(
            "dataset n_classes disagrees with config.n_classes")

    model, critic = make_run(data_p.dim, config)
    opt_model = nc.Adam(model.parameters(), lr=config.lr,
                        beta1=config.beta1, beta2=config.beta2)
    opt_critic = None
    use_critic = critic is not None and config.w_critic != 0.0
    if use_critic:
        opt_critic = nc.Adam(critic.parameters(), lr=config.lr,
                             beta1=config.beta1, beta2=config.beta2)

    weights = ObjectiveWeights(w_classifier=config.w_classifier,
                               w_critic=config.w_critic,
                               w_entmin=config.w_entmin)
    batch_rng = np.random.default_rng(config.seed + _BATCH_SEED_OFFSET)
    w_seed = config.seed + _EPOCH_W_SEED_OFFSET
    idx_wp = _subsample_idx(data_p.n, EPOCH_W_POINTS, w_seed)
    idx_wq = _subsample_idx(data_q.n, EPOCH_W_POINTS, w_seed)

    log = MetricsLog()
    log.flags = {"clamped": 0, "lc_p_skipped": 0, "lc_q_skipped": 0,
                 "ascent_improved": 0, "ascent_total": 0}
    if config.sigma_probe and use_critic:
        log.flags["sigma_lo"] = 1.0
        log.flags["sigma_hi"] = 1.0

    def probe_sigma():
        for layer in critic.net.layers:
            s = float(np.linalg.svd(layer.effective_weight(),
                                    compute_uv=False)[0])
            log.flags["sigma_lo"] = min(log.flags["sigma_lo"], s)
            log.flags["sigma_hi"] = max(log.flags["sigma_hi"], s)

    for epoch in range(config.epochs):
        ep_lcp, ep_lcq, ep_ld = [], [], []
        pairs = _batch_index_pairs(data_p.n, data_q.n, config.batch_size,
                                   batch_rng)
        for b, (idx_p, idx_q) in enumerate(pairs):
            xb_p, yb_p = data_p.features[idx_p], data_p.labels[idx_p]
            xb_q, yb_q = data_q.features[idx_q], data_q.labels[idx_q]

            if use_critic:
                z_p = model.features(xb_p)
                z_q = model.features(xb_q)
                cond_p = _snapshot_conditionals(model, z_p, yb_p,
                                                config.n_classes)
                cond_q = _snapshot_conditionals(model, z_q, yb_q,
                                                config.n_classes)
                before = _frozen_domain_value(critic, z_p, cond_p,
                                              z_q, cond_q)
                for _ in range(config.n_critic):
                    tape = nc.Tape()
                    ld = obj.domain_loss_frozen(tape, critic, z_p, cond_p,
                                                z_q, cond_q, update_u=True)
                    if not np.isfinite(ld.value):
                        raise _diverged("critic ascent loss",
                                        float(ld.value), epoch, b)
                    opt_critic.zero_grad()
                    nc.backward(tape, nc.scale(ld, -1.0))
                    opt_critic.step()
                    critic.refine_sigma(ASCENT_REFINE_ITERS)
                    if config.sigma_probe:
                        probe_sigma()
                after = _frozen_domain_value(critic, z_p, cond_p,
                                             z_q, cond_q)
                log.flags["ascent_total"] += 1
                if after >= before - 1e-12:
                    log.flags["ascent_improved"] += 1

            tape = nc.Tape()
            parts = obj.total_objective(
                tape, model.feature_net, model.classifier_net,
                critic if use_critic else None, xb_p, yb_p, xb_q, yb_q,
                weights, config.n_classes)
            total = float(parts.total.value)
            if not np.isfinite(total):
                raise _diverged("objective", total, epoch, b, parts)
            opt_model.zero_grad()
            nc.backward(tape, parts.total)
            opt_model.step()
            for p in model.parameters():
                if not np.isfinite(p.value).all():
                    raise _diverged(f"parameter {p.name}", float("nan"),
                                    epoch, b, parts)

            log.flags["clamped"] += parts.flags.get("clamped", 0)
            log.flags["lc_p_skipped"] += int(parts.flags["lc_p_skipped"])
            log.flags["lc_q_skipped"] += int(parts.flags["lc_q_skipped"])
            if parts.loss_c_p is not None:
                ep_lcp.append(float(parts.loss_c_p.value))
            if parts.loss_c_q is not None:
                ep_lcq.append(float(parts.loss_c_q.value))
            if parts.loss_d is not None:
                ep_ld.append(float(parts.loss_d.value))

        if use_critic:
            critic.refine_sigma(config.refine_iters)

        # Finite parameters do not guarantee finite embeddings (inputs can
        # overflow a finite stack); catch that here rather than letting
        # the LP see an infinite cost.
        try:
            jp = _eval_joint(model, data_p, idx_wp)
            jq = _eval_joint(model, data_q, idx_wq)
            w_dist, _ = exact_w1(jp, jq, label_scale=config.label_scale)
        except ContractError as exc:
            err = _diverged("epoch embeddings", float("nan"), epoch, -1)
            raise err from exc
        record = EpochRecord(
            epoch=epoch,
            loss_c_P=float(np.mean(ep_lcp)) if ep_lcp else None,
            loss_c_Q=float(np.mean(ep_lcq)) if ep_lcq else None,
            loss_d=float(np.mean(ep_ld)) if ep_ld else None,
            acc_P=_labeled_accuracy_or_none(model, data_p),
            acc_Q=_labeled_accuracy_or_none(model, data_q),
            w_dist=w_dist)
        log.add(record)

    return model, critic, log


# ---------------------------------------------------------------------------
# fine-tuning


def fine_tune(model: ModelPair, config: TrainConfig, data_p: DatasetSplit,
              data_q: DatasetSplit,
              domain_weights: tuple[float, float] | None = None
              ) -> ModelPair:
    """One classification-only epoch on a copy of the model.

    The domain term is dropped entirely; each domain's cross-entropy is
    weighted by ``domain_weights`` (P, Q). By default the currently worse
    domain (lower labeled accuracy, ties going to P) gets 0.75 and the
    other 0.25. The input model is never mutated; the tuned copy is
    returned.
    """
    if domain_weights is None:
        acc_p = _labeled_accuracy(model, data_p)
        acc_q = _labeled_accuracy(model, data_q)
        domain_weights = (0.75, 0.25) if acc_p <= acc_q else (0.25, 0.75)
    w_p, w_q = float(domain_weights[0]), float(domain_weights[1])
    if w_p < 0 or w_q < 0:
        raise ContractError("domain weights must be nonnegative")

    tuned = model.clone()
    opt = nc.Adam(tuned.parameters(), lr=config.lr, beta1=config.beta1,
                  beta2=config.beta2)
    lab_p = data_p.labeled_view()
    lab_q = data_q.labeled_view()
    rng = np.random.default_rng(config.seed + _FINE_TUNE_SEED_OFFSET)
    pairs = _batch_index_pairs(lab_p.n, lab_q.n, config.batch_size, rng)
    for b, (idx_p, idx_q) in enumerate(pairs):
        tape = nc.Tape()
        pieces = []
        for split, idx, w in ((lab_p, idx_p, w_p), (lab_q, idx_q, w_q)):
            z = tuned.feature_net.forward(tape,
                                          tape.constant(split.features[idx]))
            pred = tuned.classifier_net.forward(tape, z)
            oh = obj.onehot(split.labels[idx], split.n_classes)
            pieces.append(nc.scale(obj.cross_entropy_loss(pred, oh), w))
        total = nc.add(pieces[0], pieces[1])
        if not np.isfinite(total.value):
            raise _diverged("fine-tune loss", float(total.value), 0, b)
        opt.zero_grad()
        nc.backward(tape, total)
        opt.step()
    return tuned


# ---------------------------------------------------------------------------
# export and checkpoints


def export_embeddings(model: ModelPair, splits: list[DatasetSplit], path):
    """Write domain,label,z0.. rows for every point in the given splits."""
    if not splits:
        raise ContractError("export needs at least one split")
    d_z = model.d_z
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["domain", "label"] + [f"z{i}" for i in range(d_z)])
        for s in splits:
            z = model.features(s.features)
            for i in range(s.n):
                writer.writerow([s.domain, int(s.labels[i])]
                                + [repr(float(v)) for v in z[i]])


def save_checkpoint(model: ModelPair, critic: CriticNet | None, path):
    payload = {"version": CHECKPOINT_VERSION,
               "feature_net": model.feature_net.to_dict(),
               "classifier_net": model.classifier_net.to_dict(),
               "critic": None if critic is None else critic.to_dict()}
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> tuple[ModelPair, CriticNet | None]:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise ContractError(
            f"unsupported checkpoint version {version!r}; "
            f"this build reads {CHECKPOINT_VERSION!r}")
    model = ModelPair(nc.MLP.from_dict(payload["feature_net"]),
                      nc.MLP.from_dict(payload["classifier_net"]))
    critic = None
    if payload.get("critic") is not None:
        critic = CriticNet.from_dict(payload["critic"])
    return model, critic
