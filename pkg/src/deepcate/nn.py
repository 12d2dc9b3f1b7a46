"""Minimal dense feed-forward network engine.

Everything is float64 and deterministic given explicit seeds: weight
initialization, dropout masks, and minibatch shuffling are all driven by
caller-supplied integers. A non-finite value anywhere is an error state,
never silently propagated.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "identity")
LOSSES = ("mse", "bce")

# Predictions are pulled this far inside (0, 1) before BCE takes logs.
BCE_CLAMP = 1e-12


class TrainingDivergedError(RuntimeError):
    """Training loss stopped being finite."""


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: an affine map, an activation, and a dropout rate.

    Dropout (inverted, so evaluation needs no rescaling) is applied to the
    layer's own activation output; output layers should use rate 0.
    """

    in_dim: int
    out_dim: int
    activation: str = "relu"
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass(frozen=True)
class MlpNetwork:
    """A stack of LayerSpecs with their weight matrices and bias vectors.

    Treat instances as immutable; updates return new networks.
    """

    layers: tuple[LayerSpec, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    rng_seed: int

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass(frozen=True)
class LayerCache:
    x: np.ndarray  # layer input
    z: np.ndarray  # pre-activation
    h: np.ndarray  # activation, before dropout
    mask: np.ndarray | None  # inverted-dropout mask, None when inactive


@dataclass(frozen=True)
class ForwardCache:
    layers: tuple[LayerCache, ...]
    output: np.ndarray
    training: bool


@dataclass(frozen=True)
class Gradients:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class AdamState:
    """First/second-moment accumulators plus the step counter."""

    m_weights: tuple[np.ndarray, ...]
    v_weights: tuple[np.ndarray, ...]
    m_biases: tuple[np.ndarray, ...]
    v_biases: tuple[np.ndarray, ...]
    t: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 250
    batch_size: int = 64
    loss: str = "mse"
    lr: float = 0.001
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")


def init_network(specs, seed: int) -> MlpNetwork:
    """Build a network with seeded random weights and zero biases.

    ReLU layers get He-scaled normals (std sqrt(2/in)), sigmoid/identity
    layers get Glorot-scaled normals (std sqrt(2/(in+out))). The same seed
    always yields bit-identical weights.
    """
    specs = tuple(specs)
    if not specs:
        raise ValueError("need at least one layer")
    for prev, nxt in zip(specs, specs[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ValueError(
                f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
            )
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for spec in specs:
        if spec.activation == "relu":
            scale = np.sqrt(2.0 / spec.in_dim)
        else:
            scale = np.sqrt(2.0 / (spec.in_dim + spec.out_dim))
        weights.append(rng.normal(0.0, scale, size=(spec.in_dim, spec.out_dim)))
        biases.append(np.zeros(spec.out_dim))
    return MlpNetwork(specs, tuple(weights), tuple(biases), int(seed))


def count_params(net: MlpNetwork) -> int:
    """Total number of weights and biases: sum over layers of in*out + out."""
    return int(sum(w.size + b.size for w, b in zip(net.weights, net.biases)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return _sigmoid(z)
    return z


def forward(
    net: MlpNetwork,
    X: np.ndarray,
    training: bool = False,
    dropout_seed: int | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a row-major batch.

    In training mode, inverted dropout is applied per layer at that layer's
    rate, with masks drawn deterministically from dropout_seed. In eval
    mode dropout is a no-op and dropout_seed is ignored.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if X.shape[1] != net.in_dim:
        raise ValueError(f"X has {X.shape[1]} columns, network expects {net.in_dim}")
    rng = np.random.default_rng(dropout_seed) if training else None
    caches = []
    a = X
    with np.errstate(over="ignore", invalid="ignore"):
        for spec, w, b in zip(net.layers, net.weights, net.biases):
            z = a @ w + b
            h = _activate(z, spec.activation)
            mask = None
            out = h
            if training and spec.dropout_rate > 0.0:
                keep = 1.0 - spec.dropout_rate
                mask = (rng.random(h.shape) >= spec.dropout_rate) / keep
                out = h * mask
            caches.append(LayerCache(a, z, h, mask))
            a = out
    if not np.isfinite(a).all():
        raise FloatingPointError("non-finite network output")
    return a, ForwardCache(tuple(caches), a, training)


def compute_loss(pred: np.ndarray, target: np.ndarray, kind: str) -> float:
    """Mean squared error or mean binary cross-entropy over all entries."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if kind == "mse":
        return float(np.mean((pred - target) ** 2))
    if kind == "bce":
        if pred.min() < -1e-9 or pred.max() > 1.0 + 1e-9:
            raise ValueError("bce predictions must lie in (0, 1)")
        if not np.all((target == 0.0) | (target == 1.0)):
            raise ValueError("bce targets must be 0/1")
        p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
        return float(np.mean(-(target * np.log(p) + (1.0 - target) * np.log1p(-p))))
    raise ValueError(f"unknown loss {kind!r}")


def loss_gradient(pred: np.ndarray, target: np.ndarray, kind: str) -> np.ndarray:
    """d(loss)/d(pred), matching compute_loss entry for entry."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if kind == "mse":
        return 2.0 * (pred - target) / pred.size
    if kind == "bce":
        p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
        return (p - target) / (p * (1.0 - p)) / pred.size
    raise ValueError(f"unknown loss {kind!r}")


def _activation_grad(cache: LayerCache, kind: str) -> np.ndarray | None:
    if kind == "relu":
        return (cache.z > 0.0).astype(np.float64)
    if kind == "sigmoid":
        return cache.h * (1.0 - cache.h)
    return None  # identity


def backward_from_output(
    net: MlpNetwork, cache: ForwardCache, dout: np.ndarray
) -> Gradients:
    """Backpropagate an arbitrary output gradient through the cached pass.

    dout is d(loss)/d(network output), shaped like the forward output.
    Dropout masks recorded in the cache are respected.
    """
    if len(cache.layers) != len(net.layers):
        raise ValueError("cache does not match network depth")
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != cache.output.shape:
        raise ValueError("dout shape does not match cached output")
    n_layers = len(net.layers)
    g_weights: list[np.ndarray | None] = [None] * n_layers
    g_biases: list[np.ndarray | None] = [None] * n_layers
    g = dout
    for i in range(n_layers - 1, -1, -1):
        spec = net.layers[i]
        lc = cache.layers[i]
        if lc.x.shape[1] != spec.in_dim or lc.z.shape[1] != spec.out_dim:
            raise ValueError("cache does not match network shapes")
        if lc.mask is not None:
            g = g * lc.mask
        act_grad = _activation_grad(lc, spec.activation)
        if act_grad is not None:
            g = g * act_grad
        g_weights[i] = lc.x.T @ g
        g_biases[i] = g.sum(axis=0)
        if i > 0:
            g = g @ net.weights[i].T
    return Gradients(tuple(g_weights), tuple(g_biases))


def backward(
    net: MlpNetwork, cache: ForwardCache, target: np.ndarray, kind: str
) -> Gradients:
    """Gradients of the scalar loss with respect to every weight and bias."""
    target = np.asarray(target, dtype=np.float64)
    dout = loss_gradient(cache.output, target, kind)
    return backward_from_output(net, cache, dout)


def init_adam(net: MlpNetwork, lr: float) -> AdamState:
    def zeros(params):
        return tuple(np.zeros_like(p) for p in params)

    return AdamState(
        m_weights=zeros(net.weights),
        v_weights=zeros(net.weights),
        m_biases=zeros(net.biases),
        v_biases=zeros(net.biases),
        t=0,
        lr=lr,
    )


def adam_update(
    net: MlpNetwork, grads: Gradients, state: AdamState
) -> tuple[MlpNetwork, AdamState]:
    """One bias-corrected Adam step; returns the updated network and state."""
    for g in (*grads.weights, *grads.biases):
        if not np.isfinite(g).all():
            raise ValueError("non-finite gradient")
    t = state.t + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t

    def step(param, g, m, v):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        p_new = param - state.lr * (m_new / c1) / (np.sqrt(v_new / c2) + state.eps)
        return p_new, m_new, v_new

    new_w, new_mw, new_vw = [], [], []
    for p, g, m, v in zip(net.weights, grads.weights, state.m_weights, state.v_weights):
        p2, m2, v2 = step(p, g, m, v)
        new_w.append(p2)
        new_mw.append(m2)
        new_vw.append(v2)
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(net.biases, grads.biases, state.m_biases, state.v_biases):
        p2, m2, v2 = step(p, g, m, v)
        new_b.append(p2)
        new_mb.append(m2)
        new_vb.append(v2)
    net2 = dataclasses.replace(net, weights=tuple(new_w), biases=tuple(new_b))
    state2 = dataclasses.replace(
        state,
        m_weights=tuple(new_mw),
        v_weights=tuple(new_vw),
        m_biases=tuple(new_mb),
        v_biases=tuple(new_vb),
        t=t,
    )
    return net2, state2


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Index batches covering one fresh shuffle of range(n); the last batch
    may be short (incomplete batches are processed, not dropped)."""
    perm = rng.permutation(n)
    return [perm[start : start + batch_size] for start in range(0, n, batch_size)]


def train(
    net: MlpNetwork, X: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> tuple[MlpNetwork, list[float]]:
    """Minibatch Adam training of net(X) against y under cfg.loss.

    Shuffling and per-batch dropout masks all derive from cfg.shuffle_seed,
    so two calls with identical inputs produce bit-identical results.
    Returns the trained network and the per-epoch mean sample loss.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 2:
        raise ValueError("X and y must be 2-D")
    n = X.shape[0]
    if n < 1:
        raise ValueError("empty training data")
    if y.shape[0] != n:
        raise ValueError(f"row mismatch: X has {n}, y has {y.shape[0]}")
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds n={n}")
    rng = np.random.default_rng(cfg.shuffle_seed)
    state = init_adam(net, cfg.lr)
    history = []
    for epoch in range(cfg.epochs):
        epoch_loss = 0.0
        for idx in minibatches(n, cfg.batch_size, rng):
            dropout_seed = int(rng.integers(0, 2**63 - 1))
            try:
                out, cache = forward(net, X[idx], training=True, dropout_seed=dropout_seed)
            except FloatingPointError as exc:
                raise TrainingDivergedError(f"epoch {epoch}: {exc}") from exc
            loss = compute_loss(out, y[idx], cfg.loss)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch} (loss={loss})"
                )
            grads = backward(net, cache, y[idx], cfg.loss)
            net, state = adam_update(net, grads, state)
            epoch_loss += loss * len(idx)
        history.append(epoch_loss / n)
    return net, history
