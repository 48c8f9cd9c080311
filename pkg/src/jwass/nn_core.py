"""Reverse-mode autodiff on dense float64 arrays, plus the small layer set
the domain-invariance nets are built from.

The tape is a flat record of nodes in creation order. Each node stores its
value, the indices of its parents, and a vector-Jacobian closure. backward()
walks the record once in reverse and accumulates into Parameter.grad, so a
parameter used in several places receives the sum of all its contributions.

Everything here is single-threaded and deterministic: identical inputs and
seeds reproduce identical floats, bit for bit.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError

LEAKY_SLOPE_DEFAULT = 0.1
LOG_EPS = 1e-12

ACTIVATIONS = ("identity", "relu", "leaky_relu", "softmax")


class Parameter:
    """A trainable array paired with its accumulated gradient."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name: str = ""):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter(shape={self.value.shape}, name={self.name!r})"


class Tensor:
    """Handle to one node of a Tape."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]

    @property
    def shape(self):
        return self.tape.values[self.idx].shape

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Ordered record of differentiable operations.

    A tape is built for one forward pass and discarded after backward();
    nodes are append-only and parents always precede children.
    """

    def __init__(self):
        self.values: list[np.ndarray] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list = []  # callable(grad) -> tuple of parent grads, or None
        self.param_nodes: dict[int, Parameter] = {}

    def _append(self, value, parents=(), vjp=None) -> Tensor:
        self.values.append(np.asarray(value, dtype=np.float64))
        self.parents.append(tuple(parents))
        self.vjps.append(vjp)
        return Tensor(self, len(self.values) - 1)

    def constant(self, value) -> Tensor:
        """A leaf that never receives gradient."""
        return self._append(value)

    def leaf(self, param: Parameter) -> Tensor:
        """A leaf whose adjoint is added to param.grad by backward()."""
        t = self._append(param.value)
        self.param_nodes[t.idx] = param
        return t


def backward(tape: Tape, out: Tensor) -> list:
    """Reverse pass from a scalar node; accumulates into Parameter.grad.

    Returns the full adjoint list (None for nodes the output does not
    depend on), which the tests use to probe intermediate gradients.
    """
    if out.tape is not tape:
        raise ContractError("output tensor belongs to a different tape")
    if out.value.shape != ():
        raise ContractError(
            f"backward target must be scalar, got shape {out.value.shape}")
    adjoints: list = [None] * len(tape.values)
    adjoints[out.idx] = np.array(1.0)
    for i in range(out.idx, -1, -1):
        g = adjoints[i]
        if g is None or tape.vjps[i] is None:
            continue
        parent_grads = tape.vjps[i](g)
        for p, gp in zip(tape.parents[i], parent_grads):
            if gp is None:
                continue
            if adjoints[p] is None:
                adjoints[p] = gp
            else:
                adjoints[p] = adjoints[p] + gp
    for idx, param in tape.param_nodes.items():
        if adjoints[idx] is not None:
            param.grad += adjoints[idx]
    return adjoints


# ---------------------------------------------------------------------------
# ops


def _same_tape(*tensors: Tensor) -> Tape:
    tape = tensors[0].tape
    for t in tensors[1:]:
        if t.tape is not tape:
            raise ContractError("operands live on different tapes")
    return tape


def add(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"add: {a.shape} vs {b.shape}")
    return tape._append(a.value + b.value, (a.idx, b.idx),
                        lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"sub: {a.shape} vs {b.shape}")
    return tape._append(a.value - b.value, (a.idx, b.idx),
                        lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shaped tensors."""
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"mul: {a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    return tape._append(av * bv, (a.idx, b.idx),
                        lambda g: (g * bv, g * av))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return a.tape._append(a.value * c, (a.idx,), lambda g: (g * c,))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return a.tape._append(a.value.sum(), (a.idx,),
                          lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    n = a.value.size
    if n == 0:
        raise ContractError("mean of an empty tensor")
    return scale(sum_all(a), 1.0 / n)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map x @ w.T + b with x (n,in), w (out,in), b (out,)."""
    tape = _same_tape(x, w, b)
    xv, wv = x.value, w.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[1]:
        raise DimensionError(f"linear: x {xv.shape} w {wv.shape}")
    if b.value.shape != (wv.shape[0],):
        raise DimensionError(f"linear: bias {b.value.shape} for w {wv.shape}")

    def vjp(g):
        return g @ wv, g.T @ xv, g.sum(axis=0)

    return tape._append(xv @ wv.T + b.value, (x.idx, w.idx, b.idx), vjp)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE_DEFAULT) -> Tensor:
    xv = x.value
    mask = np.where(xv > 0, 1.0, slope)
    return x.tape._append(xv * mask, (x.idx,), lambda g: (g * mask,))


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax, shift-stabilized; rows sum to one exactly enough
    that downstream log never sees a zero-sum row."""
    xv = x.value
    if xv.ndim != 2:
        raise DimensionError(f"softmax expects (n, K), got {xv.shape}")
    shifted = xv - xv.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return x.tape._append(s, (x.idx,), vjp)


def safe_log(x: Tensor, eps: float = LOG_EPS) -> Tensor:
    """log(max(x, eps)): finite value and finite gradient at x = 0."""
    xv = np.maximum(x.value, eps)
    return x.tape._append(np.log(xv), (x.idx,), lambda g: (g / xv,))


def divide_by_scalar(a: Tensor, s: Tensor) -> Tensor:
    """a / s with s a scalar node; differentiates through both."""
    tape = _same_tape(a, s)
    if s.value.shape != ():
        raise DimensionError("divisor must be a scalar node")
    av, sv = a.value, float(s.value)
    if sv == 0.0:
        raise ContractError("division by zero scalar node")

    def vjp(g):
        return g / sv, np.array(-(g * av).sum() / sv ** 2)

    return tape._append(av / sv, (a.idx, s.idx), vjp)


def bilinear(u: np.ndarray, w: Tensor, v: np.ndarray) -> Tensor:
    """u.T @ w @ v for constant vectors u, v; gradient w.r.t. w only."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    wv = w.value
    if wv.shape != (u.size, v.size):
        raise DimensionError(f"bilinear: w {wv.shape} vs u {u.size} v {v.size}")
    return w.tape._append(u @ wv @ v, (w.idx,),
                          lambda g: (float(g) * np.outer(u, v),))


def take_rows(a: Tensor, indices) -> Tensor:
    """Select rows of a 2-d tensor; the vjp scatter-adds back."""
    idx = np.asarray(indices, dtype=np.int64)
    av = a.value
    if av.ndim != 2:
        raise DimensionError(f"take_rows expects a matrix, got {av.shape}")
    if idx.ndim != 1:
        raise DimensionError("indices must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= av.shape[0]):
        raise ContractError("row index out of range")
    shape = av.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return a.tape._append(av[idx], (a.idx,), vjp)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise [a | b] of two (n, *) matrices."""
    tape = _same_tape(a, b)
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[0] != bv.shape[0]:
        raise DimensionError(f"concat_cols: {av.shape} vs {bv.shape}")
    split = av.shape[1]
    return tape._append(np.hstack([av, bv]), (a.idx, b.idx),
                        lambda g: (g[:, :split], g[:, split:]))


# ---------------------------------------------------------------------------
# spectral norm via power iteration


def _unit(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x)
    if n == 0.0:
        # degenerate direction; any unit vector keeps the iteration alive
        out = np.zeros_like(x)
        out[0] = 1.0
        return out
    return x / n


def power_iteration_sigma(weight: np.ndarray, u: np.ndarray,
                          iters: int = 1) -> tuple[float, np.ndarray]:
    """Estimate the top singular value of `weight` by power iteration.

    u is the running left-singular-vector estimate (length = rows of
    weight); returns (sigma_estimate, updated u). The estimate is
    non-decreasing in iters up to float noise and converges to the true
    top singular value for generic u.
    """
    weight = np.asarray(weight, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if weight.ndim != 2 or u.shape != (weight.shape[0],):
        raise DimensionError(
            f"power iteration: weight {weight.shape}, u {u.shape}")
    if iters < 1:
        raise ContractError("iters must be >= 1")
    if not weight.any():
        return 0.0, u.copy()
    u = _unit(u)
    v = None
    for _ in range(iters):
        v = _unit(weight.T @ u)
        u = _unit(weight @ v)
    return float(u @ weight @ v), u


def spectral_normalize(layer: "DenseLayer", iters: int = 50) -> np.ndarray:
    """Refine the layer's u estimate and return the effective weight W/sigma.

    Runs simultaneous iteration on a 2-column block: the tracked anchor
    plus a restart column read off the weight itself. A single anchor can
    stall when the top of the spectrum is nearly degenerate (sigma2 close
    to sigma1, anchor trapped near the second direction); the block still
    converges onto the top 2-subspace, whose better Rayleigh value
    recovers sigma1 either way. Weights with a single row or column fall
    back to plain power iteration, which is exact for them.

    Mutates layer.u in place (that vector is solver state, not a parameter).
    """
    w = layer.weight.value
    if not w.any():
        return w.copy()
    if min(w.shape) < 2:
        sigma, layer.u = power_iteration_sigma(w, layer.u, iters)
        return w / sigma
    restart = _unit(w[:, np.argmax(np.linalg.norm(w, axis=0))])
    block = np.stack([_unit(layer.u), restart], axis=1)
    block = np.linalg.qr(block)[0]
    for _ in range(iters):
        v_block = np.linalg.qr(w.T @ block)[0]
        block = np.linalg.qr(w @ v_block)[0]
    scores = np.linalg.norm(w.T @ block, axis=0)
    best = int(np.argmax(scores))
    sigma = float(scores[best])
    layer.u = block[:, best].copy()
    return w / sigma


# ---------------------------------------------------------------------------
# layers


class DenseLayer:
    """Affine layer with an activation, optionally spectrally normalized.

    When spectral=True the forward pass divides the weight by a one-step
    power-iteration estimate of its top singular value. The estimate's
    anchor vector u persists across calls; training forwards advance it,
    evaluation forwards (update_u=False) leave it untouched so inference
    is state-free. u is excluded from differentiation: sigma enters the
    tape as u^T W v with u, v held constant.
    """

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity",
                 slope: float = LEAKY_SLOPE_DEFAULT, spectral: bool = False,
                 rng: np.random.Generator | None = None, name: str = ""):
        if activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {activation!r}")
        if in_dim < 1 or out_dim < 1:
            raise DimensionError("layer dims must be positive")
        rng = rng if rng is not None else np.random.default_rng(0)
        std = np.sqrt(2.0 / in_dim)  # He-style, suits the leaky-relu stacks
        self.weight = Parameter(rng.normal(0.0, std, size=(out_dim, in_dim)),
                                name=f"{name}.weight" if name else "weight")
        self.bias = Parameter(np.zeros(out_dim),
                              name=f"{name}.bias" if name else "bias")
        self.activation = activation
        self.slope = float(slope)
        self.spectral = bool(spectral)
        self.u = _unit(rng.normal(size=out_dim))
        self.name = name

    @property
    def in_dim(self) -> int:
        return self.weight.value.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.value.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def effective_weight(self, update_u: bool = False) -> np.ndarray:
        """Current W/sigma (one power step), or W itself if not spectral."""
        if not self.spectral:
            return self.weight.value
        sigma, u_next = power_iteration_sigma(self.weight.value, self.u, 1)
        if update_u:
            self.u = u_next
        if sigma == 0.0:
            return self.weight.value
        return self.weight.value / sigma

    def forward(self, tape: Tape, x: Tensor, update_u: bool = True) -> Tensor:
        w = tape.leaf(self.weight)
        b = tape.leaf(self.bias)
        if self.spectral:
            wv = self.weight.value
            if wv.any():
                u_prev = _unit(self.u)
                v = _unit(wv.T @ u_prev)
                u_next = _unit(wv @ v)
                if update_u:
                    self.u = u_next
                sigma = bilinear(u_next, w, v)
                w = divide_by_scalar(w, sigma)
        y = linear(x, w, b)
        return self._activate(y)

    def _activate(self, y: Tensor) -> Tensor:
        if self.activation == "identity":
            return y
        if self.activation == "relu":
            return relu(y)
        if self.activation == "leaky_relu":
            return leaky_relu(y, self.slope)
        return softmax(y)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Tape-free forward; never advances u."""
        w = self.effective_weight(update_u=False)
        y = np.asarray(x, dtype=np.float64) @ w.T + self.bias.value
        if self.activation == "relu":
            return np.maximum(y, 0.0)
        if self.activation == "leaky_relu":
            return np.where(y > 0, y, self.slope * y)
        if self.activation == "softmax":
            shifted = y - y.max(axis=1, keepdims=True)
            e = np.exp(shifted)
            return e / e.sum(axis=1, keepdims=True)
        return y

    def to_dict(self) -> dict:
        return {
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "weight": self.weight.value.tolist(),
            "bias": self.bias.value.tolist(),
            "activation": self.activation,
            "slope": self.slope,
            "spectral": self.spectral,
            "u": self.u.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseLayer":
        layer = cls(int(d["in_dim"]), int(d["out_dim"]),
                    activation=d["activation"], slope=float(d["slope"]),
                    spectral=bool(d["spectral"]))
        weight = np.asarray(d["weight"], dtype=np.float64)
        bias = np.asarray(d["bias"], dtype=np.float64)
        u = np.asarray(d["u"], dtype=np.float64)
        if weight.shape != (layer.out_dim, layer.in_dim):
            raise DimensionError("layer dict weight shape mismatch")
        if bias.shape != (layer.out_dim,) or u.shape != (layer.out_dim,):
            raise DimensionError("layer dict bias/u shape mismatch")
        layer.weight.value = weight
        layer.weight.grad = np.zeros_like(weight)
        layer.bias.value = bias
        layer.bias.grad = np.zeros_like(bias)
        layer.u = u
        return layer


class MLP:
    """A plain stack of DenseLayers."""

    def __init__(self, layers: list[DenseLayer]):
        if not layers:
            raise ContractError("MLP needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise DimensionError(
                    f"layer widths disagree: {a.out_dim} -> {b.in_dim}")
        self.layers = list(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def forward(self, tape: Tape, x: Tensor, update_u: bool = True) -> Tensor:
        return forward(tape, self.layers, x, update_u=update_u)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.predict(out)
        return out

    def to_dict(self) -> list[dict]:
        return [layer.to_dict() for layer in self.layers]

    @classmethod
    def from_dict(cls, dicts: list[dict]) -> "MLP":
        return cls([DenseLayer.from_dict(d) for d in dicts])


def forward(tape: Tape, layers: list[DenseLayer], x: Tensor,
            update_u: bool = True) -> Tensor:
    """Run x through a layer stack on the given tape."""
    out = x
    for layer in layers:
        out = layer.forward(tape, out, update_u=update_u)
    return out


class Adam:
    """Standard Adam with bias correction; one instance per parameter group."""

    def __init__(self, params: list[Parameter], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p.value = p.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
