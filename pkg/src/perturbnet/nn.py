"""Dense feed-forward building blocks on float64 numpy arrays.

Layers store weights as (out, in) matrices; a forward pass computes
activation(X @ W.T + b) row-wise over a batch. Backprop is hand-written
for the fixed layer graph: MSE for reconstruction, BCE for binary heads,
fused softmax+CE for multiclass heads. Pruning masks live on the layer
but are only applied at explicit perturbation events -- gradients and
Adam updates always flow to masked positions, which is what lets pruned
weights regrow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

ACTIVATIONS = ("linear", "relu", "sigmoid", "softmax")
LOSSES = ("mse", "bce", "ce")

PROB_CLAMP = 1e-7  # keeps log() finite at saturated outputs


@dataclass
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must be in [0, 1): {self.beta1}, {self.beta2}")


@dataclass
class LayerState:
    """One dense layer: weights, bias, activation, prune mask, Adam buffers."""

    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str
    mask: np.ndarray  # (out, in), entries in {0.0, 1.0}
    adam_m: np.ndarray = field(default=None)
    adam_v: np.ndarray = field(default=None)
    adam_mb: np.ndarray = field(default=None)
    adam_vb: np.ndarray = field(default=None)
    step_count: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.adam_m is None:
            self.adam_m = np.zeros_like(self.W)
        if self.adam_v is None:
            self.adam_v = np.zeros_like(self.W)
        if self.adam_mb is None:
            self.adam_mb = np.zeros_like(self.b)
        if self.adam_vb is None:
            self.adam_vb = np.zeros_like(self.b)

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "LayerState":
        """Parameter snapshot: weights, bias and mask; optimizer state reset."""
        return LayerState(
            W=self.W.copy(),
            b=self.b.copy(),
            activation=self.activation,
            mask=self.mask.copy(),
        )


def init_layer(out_dim: int, in_dim: int, activation: str, rng: np.random.Generator) -> LayerState:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero bias, all-ones mask."""
    if out_dim < 1 or in_dim < 1:
        raise ValueError(f"invalid layer dims {out_dim}x{in_dim}")
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    W = rng.uniform(-limit, limit, size=(out_dim, in_dim))
    return LayerState(W=W, b=np.zeros(out_dim), activation=activation, mask=np.ones((out_dim, in_dim)))


def _sigmoid(Z: np.ndarray) -> np.ndarray:
    # two-branch form avoids overflow warnings for large |Z|
    out = np.empty_like(Z)
    pos = Z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-Z[pos]))
    ez = np.exp(Z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def activate(kind: str, Z: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return Z
    if kind == "relu":
        return np.maximum(Z, 0.0)
    if kind == "sigmoid":
        return _sigmoid(Z)
    if kind == "softmax":
        return _softmax(Z)
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, activated: np.ndarray) -> np.ndarray:
    """Derivative expressed through the activated value itself.

    softmax is rejected: its derivative is only used fused with the
    cross-entropy loss in backward().
    """
    if kind == "linear":
        return np.ones_like(activated)
    if kind == "relu":
        return (activated > 0).astype(np.float64)
    if kind == "sigmoid":
        return activated * (1.0 - activated)
    if kind == "softmax":
        raise ValueError("softmax gradient is fused with cross-entropy; not available standalone")
    raise ValueError(f"unknown activation {kind!r}")


def dense_forward(layer: LayerState, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != layer.in_dim:
        raise ValueError(
            f"input shape {X.shape} incompatible with weight shape {layer.W.shape}"
        )
    return activate(layer.activation, X @ layer.W.T + layer.b)


def mse_loss(X: np.ndarray, Xhat: np.ndarray):
    """Mean over batch of per-sample squared L2 distance; gradient wrt Xhat."""
    if X.shape != Xhat.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {Xhat.shape}")
    n = X.shape[0]
    diff = Xhat - X
    loss = float((diff * diff).sum() / n)
    return loss, 2.0 * diff / n


def bce_loss(y: np.ndarray, p: np.ndarray):
    """Mean negative log-likelihood for binary targets; gradient wrt p."""
    y = np.asarray(y, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {p.shape}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("binary targets must be in {0, 1}")
    n = y.size
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).mean())
    grad = -(y / pc - (1.0 - y) / (1.0 - pc)) / n
    return loss, grad


def ce_loss(Y: np.ndarray, P: np.ndarray):
    """Mean cross-entropy of one-hot rows against softmax rows.

    The returned gradient is wrt the pre-softmax logits (fused form (P-Y)/n).
    """
    if Y.shape != P.shape:
        raise ValueError(f"shape mismatch {Y.shape} vs {P.shape}")
    if not np.isin(Y, (0.0, 1.0)).all() or not np.all(Y.sum(axis=1) == 1.0):
        raise ValueError("targets must be one-hot rows")
    n = Y.shape[0]
    Pc = np.clip(P, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(-(Y * np.log(Pc)).sum() / n)
    return loss, (P - Y) / n


def forward_pass(layers, X: np.ndarray, dropout_masks=None):
    """Activations for every layer.

    Returns (pre, post): pre[i] is layer i's activation output, post[i] the
    same after its dropout mask (if any). post[i] feeds layer i+1. Dropout
    masks already carry the 1/(1-rate) survivor scaling.
    """
    pre, post = [], []
    a = X
    for i, layer in enumerate(layers):
        z = dense_forward(layer, a)
        pre.append(z)
        if dropout_masks is not None and dropout_masks[i] is not None:
            z = z * dropout_masks[i]
        post.append(z)
        a = z
    return pre, post


def forward(layers, X: np.ndarray) -> np.ndarray:
    """Evaluation-mode forward pass (no dropout)."""
    a = X
    for layer in layers:
        a = dense_forward(layer, a)
    return a


def _check_loss_compat(layers, loss_kind: str):
    out_act = layers[-1].activation
    if loss_kind == "ce" and out_act != "softmax":
        raise ValueError(f"cross-entropy requires a softmax output layer, got {out_act!r}")
    if out_act == "softmax" and loss_kind != "ce":
        raise ValueError(f"softmax output layer requires cross-entropy loss, got {loss_kind!r}")
    if loss_kind == "bce" and out_act != "sigmoid":
        raise ValueError(f"BCE requires a sigmoid output layer, got {out_act!r}")


def backward(layers, X: np.ndarray, target: np.ndarray, loss_kind: str, dropout_masks=None):
    """Loss and analytic gradients for every layer.

    Masked (pruned) weight positions receive gradients like any other:
    masks are applied to weights at perturbation events, never here.
    Returns (loss, grads) with grads a list of (dW, db) matching layers.
    """
    if loss_kind not in LOSSES:
        raise ValueError(f"unknown loss {loss_kind!r}")
    _check_loss_compat(layers, loss_kind)
    pre, post = forward_pass(layers, X, dropout_masks)
    out = post[-1]

    if loss_kind == "mse":
        loss, dA = mse_loss(target, out)
        dZ = None
    elif loss_kind == "bce":
        loss, g = bce_loss(target, out)
        dA = g.reshape(out.shape)
        dZ = None
    else:  # ce, fused with softmax
        loss, dZ = ce_loss(target, out)
        dA = None

    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        if dZ is None:
            if dropout_masks is not None and dropout_masks[i] is not None:
                dA = dA * dropout_masks[i]
            dZ = dA * activation_grad(layer.activation, pre[i])
        inp = post[i - 1] if i > 0 else X
        grads[i] = (dZ.T @ inp, dZ.sum(axis=0))
        if i > 0:
            dA = dZ @ layer.W
            dZ = None
    return loss, grads


def adam_step(layer: LayerState, dW: np.ndarray, db: np.ndarray, cfg: AdamConfig, layer_index=None):
    """One Adam update with bias correction; mutates the layer in place.

    weight_decay, when nonzero, is added to the gradient (coupled form);
    at the default 0 the weight value is never read into the update.
    """
    if not (np.isfinite(dW).all() and np.isfinite(db).all()):
        where = "" if layer_index is None else f" in layer {layer_index}"
        raise NumericError(f"non-finite gradient{where}")
    if cfg.weight_decay != 0.0:
        dW = dW + cfg.weight_decay * layer.W
    t = layer.step_count + 1
    b1, b2 = cfg.beta1, cfg.beta2
    layer.adam_m = b1 * layer.adam_m + (1 - b1) * dW
    layer.adam_v = b2 * layer.adam_v + (1 - b2) * dW * dW
    layer.adam_mb = b1 * layer.adam_mb + (1 - b1) * db
    layer.adam_vb = b2 * layer.adam_vb + (1 - b2) * db * db
    mc = 1 - b1**t
    vc = 1 - b2**t
    layer.W -= cfg.learning_rate * (layer.adam_m / mc) / (np.sqrt(layer.adam_v / vc) + cfg.epsilon)
    layer.b -= cfg.learning_rate * (layer.adam_mb / mc) / (np.sqrt(layer.adam_vb / vc) + cfg.epsilon)
    layer.step_count = t
    return layer


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 (dropped) or 1/(1-rate)."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def reg_penalty(layers, kind: str, lam: float):
    """L1/L2 penalty over weight matrices (biases excluded) plus per-layer
    gradient additions: lam*sign(W) for L1, 2*lam*W for L2."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if kind not in ("L1", "L2"):
        raise ValueError(f"unknown regularizer {kind!r}")
    penalty = 0.0
    grads = []
    for layer in layers:
        if kind == "L1":
            penalty += lam * np.abs(layer.W).sum()
            grads.append(lam * np.sign(layer.W))
        else:
            penalty += lam * (layer.W * layer.W).sum()
            grads.append(2.0 * lam * layer.W)
    return float(penalty), grads
