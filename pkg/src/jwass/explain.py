"""Per-feature relevance attribution for dense leaky-ReLU classifiers.

Implements a layer-wise relevance propagation gamma rule extended to
handle negative inputs AND negative outputs: each neuron routes its
relevance through one of two weightings picked by the sign of its
pre-activation. For an affine layer z = W a + b followed by a leaky
ReLU, the relevance flowing from output neuron k back to input j is

    z_k > 0:  a_j+ (w_jk + g w_jk+) + a_j- (w_jk + g w_jk-)
    z_k < 0:  a_j+ (w_jk + g w_jk-) + a_j- (w_jk + g w_jk+)

normalized by the same sum taken over all inputs plus the bias unit
(a_0 = 1, w_0k = b_k), times the incoming R_k. Gamma upweights the
contributions whose sign agrees with the neuron's output; gamma = 0
collapses both branches to a_j w_jk / z_k and the whole procedure
becomes Gradient x Input, which doubles as the oracle in the tests.

Conventions chosen here and relied on elsewhere:
  - relevance is seeded at the chosen class's pre-softmax logit (the
    final softmax is read-out only and never propagated through);
  - the bias unit's relevance share is absorbed, not redistributed, so
    per-layer sums are conserved exactly only when all biases are zero;
  - a denominator that is exactly zero is replaced by 1e-9 carrying the
    sign of the branch (+ for the z_k > 0 branch, - for z_k < 0);
  - a pre-activation exactly at zero propagates nothing (both branch
    gates are strict inequalities, matching the rule as stated).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn_core as nc
from .errors import ContractError, DimensionError

EPS_DENOM = 1e-9
DEFAULT_EARLY_GAMMA = 0.25


@dataclass
class RelevanceMap:
    """Relevance at every layer interface, input end first.

    layer_relevances[0] sits on the raw input features, the last entry
    is the seed vector at the logits (all mass on target_class). All
    entries are finite 1-d arrays.
    """

    target_class: int
    layer_relevances: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layer_relevances:
            raise ContractError("relevance map needs at least one layer")
        cleaned = []
        for r in self.layer_relevances:
            r = np.asarray(r, dtype=np.float64)
            if r.ndim != 1:
                raise DimensionError(
                    f"layer relevance must be 1-d, got shape {r.shape}")
            if not np.isfinite(r).all():
                raise ContractError("non-finite relevance")
            cleaned.append(r)
        self.layer_relevances = cleaned

    @property
    def input_relevance(self) -> np.ndarray:
        return self.layer_relevances[0]

    def totals(self) -> np.ndarray:
        """Sum of relevance at each interface (conservation probe)."""
        return np.array([r.sum() for r in self.layer_relevances])


def default_gamma_schedule(n_layers: int,
                           early: float = DEFAULT_EARLY_GAMMA) -> tuple:
    """`early` for the first half of the stack (rounded down), 0 after.

    Robustness from gamma matters most near the input; the layers next
    to the logit keep the plain gradient-like propagation.
    """
    if n_layers < 1:
        raise ContractError("schedule needs at least one layer")
    n_early = n_layers // 2
    return tuple([early] * n_early + [0.0] * (n_layers - n_early))


def _layer_stack(model) -> list:
    if hasattr(model, "feature_net") and hasattr(model, "classifier_net"):
        return list(model.feature_net.layers) \
            + list(model.classifier_net.layers)
    if hasattr(model, "layers"):
        return list(model.layers)
    if isinstance(model, (list, tuple)) and model:
        return list(model)
    raise ContractError(f"cannot extract dense layers from {type(model)!r}")


def _validate_stack(stack: list, leaky_slope) -> None:
    if not stack:
        raise ContractError("empty layer stack")
    for i, layer in enumerate(stack):
        if getattr(layer, "spectral", False):
            raise ContractError(
                "unsupported layer kind: spectrally normalized layers "
                "cannot be attributed")
        last = i == len(stack) - 1
        allowed = ("leaky_relu", "softmax", "identity") if last \
            else ("leaky_relu",)
        if layer.activation not in allowed:
            raise ContractError(
                f"unsupported layer kind: activation "
                f"{layer.activation!r} at layer {i}")
        if leaky_slope is not None and layer.activation == "leaky_relu" \
                and layer.slope != leaky_slope:
            raise ContractError(
                f"leaky_slope {leaky_slope} does not match layer {i} "
                f"slope {layer.slope}")


def _gamma_vector(gamma, n_layers: int) -> np.ndarray:
    if gamma is None:
        gammas = np.asarray(default_gamma_schedule(n_layers))
    else:
        gammas = np.asarray(gamma, dtype=np.float64)
        if gammas.ndim == 0:
            gammas = np.full(n_layers, float(gammas))
        elif gammas.shape != (n_layers,):
            raise DimensionError(
                f"gamma schedule length {gammas.shape} for {n_layers} "
                f"layers")
    if (gammas < 0.0).any():
        raise ContractError("gamma must be >= 0")
    return gammas


def _forward_collect(stack: list, x: np.ndarray):
    """Inputs-per-layer and pre-activations; the last layer stays affine
    (its softmax, if any, is detached)."""
    acts = [x]
    zs = []
    a = x
    for i, layer in enumerate(stack):
        z = layer.weight.value @ a + layer.bias.value
        zs.append(z)
        if i < len(stack) - 1:
            a = np.where(z > 0.0, z, layer.slope * z)
        else:
            a = z
        acts.append(a)
    return acts, zs


def _propagate(layer, a: np.ndarray, z: np.ndarray, r_out: np.ndarray,
               gamma: float) -> np.ndarray:
    w = layer.weight.value
    b = layer.bias.value
    ap = np.maximum(a, 0.0)
    an = np.minimum(a, 0.0)
    wp = np.maximum(w, 0.0)
    wn = np.minimum(w, 0.0)

    # rows: output neuron k; columns: input j
    contrib_pos = ap * (w + gamma * wp) + an * (w + gamma * wn)
    contrib_neg = ap * (w + gamma * wn) + an * (w + gamma * wp)
    denom_pos = contrib_pos.sum(axis=1) + b + gamma * np.maximum(b, 0.0)
    denom_neg = contrib_neg.sum(axis=1) + b + gamma * np.minimum(b, 0.0)
    denom_pos = np.where(denom_pos == 0.0, EPS_DENOM, denom_pos)
    denom_neg = np.where(denom_neg == 0.0, -EPS_DENOM, denom_neg)

    coeff_pos = np.where(z > 0.0, r_out / denom_pos, 0.0)
    coeff_neg = np.where(z < 0.0, r_out / denom_neg, 0.0)
    return coeff_pos @ contrib_pos + coeff_neg @ contrib_neg


def lrp_gamma(model, x, target_class: int, gamma=None,
              leaky_slope: float | None = None) -> RelevanceMap:
    """Relevance of each input feature for one sample's target logit.

    `model` is a feature/classifier pair, a plain layer stack, or a list
    of dense layers; every hidden activation must be a leaky ReLU.
    `gamma` is a scalar applied to all layers, a per-layer sequence, or
    None for the default schedule (0.25 on the first half, then 0).
    `leaky_slope`, when given, is checked against the layers' own slopes
    rather than overriding them: attribution must describe the network
    that actually ran.
    """
    stack = _layer_stack(model)
    _validate_stack(stack, leaky_slope)
    gammas = _gamma_vector(gamma, len(stack))

    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != stack[0].in_dim:
        raise DimensionError(
            f"input dim {x.shape[0]} does not match model {stack[0].in_dim}")
    n_out = stack[-1].out_dim
    if not 0 <= target_class < n_out:
        raise ContractError(
            f"target class {target_class} outside [0, {n_out})")

    acts, zs = _forward_collect(stack, x)
    seed = np.zeros(n_out)
    seed[target_class] = zs[-1][target_class]

    rel = [seed]
    r = seed
    for i in reversed(range(len(stack))):
        r = _propagate(stack[i], acts[i], zs[i], r, float(gammas[i]))
        rel.append(r)
    rel.reverse()
    return RelevanceMap(target_class, rel)


def gradient_times_input(model, x, target_class: int) -> RelevanceMap:
    """a . (d logit_target / d a) at every interface, the gamma = 0 oracle.

    Runs the reverse pass on the autodiff tape (weights entered as
    constants so no .grad is touched) and reads the input adjoints off
    the returned list.
    """
    stack = _layer_stack(model)
    _validate_stack(stack, None)

    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != stack[0].in_dim:
        raise DimensionError(
            f"input dim {x.shape[0]} does not match model {stack[0].in_dim}")
    n_out = stack[-1].out_dim
    if not 0 <= target_class < n_out:
        raise ContractError(
            f"target class {target_class} outside [0, {n_out})")

    tape = nc.Tape()
    t = tape.constant(x.reshape(1, -1))
    nodes = [t]
    for i, layer in enumerate(stack):
        w = tape.constant(layer.weight.value)
        b = tape.constant(layer.bias.value)
        t = nc.linear(t, w, b)
        if i < len(stack) - 1:
            t = nc.leaky_relu(t, layer.slope)
        nodes.append(t)
    onehot = np.zeros((1, n_out))
    onehot[0, target_class] = 1.0
    out = nc.sum_all(nc.mul(t, tape.constant(onehot)))

    adjoints = nc.backward(tape, out)
    rel = []
    for node in nodes:
        g = adjoints[node.idx]
        if g is None:
            g = np.zeros_like(node.value)
        rel.append((node.value * g).reshape(-1))
    return RelevanceMap(target_class, rel)
