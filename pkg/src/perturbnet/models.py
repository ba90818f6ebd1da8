"""Model builders, training loops, and checkpoint selection.

Three architectures share a 256/128/64 hidden trunk: a plain classifier
trained from scratch (basic_dnn), a deep autoencoder with a mirrored
decoder (basic_dae), and a stack of three single-hidden-layer autoencoders
trained greedily (stacked_dae). Autoencoders are pretrained on
reconstruction without labels; a selected encoder checkpoint is then
finetuned with a fresh classification head.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import NumericError
from .nn import AdamConfig, LayerState
from .perturb import PerturbConfig, perturb_event, schedule_should_perturb

MODEL_KINDS = ("basic_dnn", "basic_dae", "stacked_dae")
CASES = ("baseline", "lowest_loss", "at_perturbation", "after_perturbation", "dropout_only")

HIDDEN = (256, 128, 64)
EVAL_CHUNK = 1024


@dataclass
class ModelSpec:
    kind: str
    input_dim: int
    num_classes: int
    hidden: tuple = HIDDEN

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def output(self) -> str:
        return "sigmoid_binary" if self.num_classes == 2 else "softmax_multiclass"


@dataclass
class TrainConfig:
    epochs_pretrain: int = 100
    epochs_finetune: int = 100
    batch_size: int = 64
    adam: AdamConfig = field(default_factory=AdamConfig)
    dropout_rate: float = 0.0
    reg_kind: str = "none"  # none | L1 | L2
    reg_lambda: float = 0.0
    perturb: PerturbConfig = field(default_factory=lambda: PerturbConfig(enabled=False))
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.reg_kind not in ("none", "L1", "L2"):
            raise ValueError(f"unknown regularizer {self.reg_kind!r}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class Network:
    """A layer stack plus the structural facts training needs: how many
    leading layers form the encoder and which activations get dropout."""

    kind: str
    layers: list
    encoder_len: int
    dropout_layers: tuple

    def copy(self) -> "Network":
        return Network(
            kind=self.kind,
            layers=[l.copy() for l in self.layers],
            encoder_len=self.encoder_len,
            dropout_layers=self.dropout_layers,
        )


@dataclass
class TrainingRecord:
    losses: list = field(default_factory=list)  # full-train loss at each epoch end
    events: list = field(default_factory=list)  # PerturbEvent per fired event
    checkpoints: dict = field(default_factory=dict)  # name -> Network snapshot


def build_model(spec: ModelSpec, rng: np.random.Generator):
    """basic_dnn/basic_dae -> Network; stacked_dae -> list of three sub-AE
    Networks (input<->256, 256<->128, 128<->64) for layer-wise training."""
    d = spec.input_dim
    h1, h2, h3 = spec.hidden
    if spec.kind == "basic_dnn":
        layers = [
            nn.init_layer(h1, d, "relu", rng),
            nn.init_layer(h2, h1, "relu", rng),
            nn.init_layer(h3, h2, "relu", rng),
            _head_layer(spec.num_classes, h3, rng),
        ]
        return Network("basic_dnn", layers, encoder_len=3, dropout_layers=(0, 1, 2))
    if spec.kind == "basic_dae":
        layers = [
            nn.init_layer(h1, d, "relu", rng),
            nn.init_layer(h2, h1, "relu", rng),
            nn.init_layer(h3, h2, "relu", rng),
            nn.init_layer(h2, h3, "relu", rng),
            nn.init_layer(h1, h2, "relu", rng),
            nn.init_layer(d, h1, "linear", rng),  # linear output: inputs are standardized
        ]
        return Network("basic_dae", layers, encoder_len=3, dropout_layers=(0, 1, 2))
    # stacked_dae
    dims = [d, h1, h2, h3]
    blocks = []
    for i in range(3):
        layers = [
            nn.init_layer(dims[i + 1], dims[i], "relu", rng),
            nn.init_layer(dims[i], dims[i + 1], "linear", rng),
        ]
        blocks.append(Network("ae_block", layers, encoder_len=1, dropout_layers=(0,)))
    return blocks


def _head_layer(num_classes: int, in_dim: int, rng) -> LayerState:
    if num_classes == 2:
        return nn.init_layer(1, in_dim, "sigmoid", rng)
    return nn.init_layer(num_classes, in_dim, "softmax", rng)


def _full_set_loss(layers, X, target, loss_kind) -> float:
    """Mean loss over the whole set, evaluated without dropout, in chunks."""
    n = X.shape[0]
    total = 0.0
    for start in range(0, n, EVAL_CHUNK):
        xb = X[start : start + EVAL_CHUNK]
        tb = target[start : start + EVAL_CHUNK]
        out = nn.forward(layers, xb)
        if loss_kind == "mse":
            loss, _ = nn.mse_loss(tb, out)
        elif loss_kind == "bce":
            loss, _ = nn.bce_loss(tb, out)
        else:
            loss, _ = nn.ce_loss(tb, out)
        total += loss * xb.shape[0]
    return total / n


def train_network(
    net: Network,
    X: np.ndarray,
    target: np.ndarray,
    loss_kind: str,
    cfg: TrainConfig,
    *,
    epochs: int,
    shuffle_rng: np.random.Generator,
    dropout_rng: np.random.Generator | None = None,
) -> TrainingRecord:
    """Minibatch Adam over `epochs` epochs with the perturbation schedule.

    Per epoch: reshuffle, train all batches (final partial batch kept),
    record the full-set loss, snapshot on a strict loss improvement, then
    fire a perturbation event if scheduled. The lowest-loss snapshot is
    therefore always the pre-perturbation state of its epoch, and the
    'at_perturbation' snapshot is taken right after the second event.
    """
    record = TrainingRecord()
    n = X.shape[0]
    best_loss = np.inf
    drop = cfg.dropout_rate
    for epoch in range(1, epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = X[idx]
            tb = target[idx]
            masks = None
            if drop > 0:
                masks = [None] * len(net.layers)
                for li in net.dropout_layers:
                    masks[li] = nn.dropout_mask((xb.shape[0], net.layers[li].out_dim), drop, dropout_rng)
            loss, grads = nn.backward(net.layers, xb, tb, loss_kind, masks)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}")
            if cfg.reg_kind != "none":
                _, reg_grads = nn.reg_penalty(net.layers, cfg.reg_kind, cfg.reg_lambda)
                grads = [(dW + rg, db) for (dW, db), rg in zip(grads, reg_grads)]
            for li, (layer, (dW, db)) in enumerate(zip(net.layers, grads)):
                nn.adam_step(layer, dW, db, cfg.adam, layer_index=li)
        epoch_loss = _full_set_loss(net.layers, X, target, loss_kind)
        if not np.isfinite(epoch_loss):
            raise NumericError(f"non-finite full-set loss at epoch {epoch}")
        record.losses.append(epoch_loss)
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            record.checkpoints["lowest_loss"] = net.copy()
        if cfg.perturb.enabled and schedule_should_perturb(epoch, cfg.perturb, epochs):
            event = perturb_event(net.layers, cfg.perturb, epoch)
            record.events.append(event)
            if len(record.events) == 2:
                record.checkpoints["at_perturbation"] = net.copy()
    record.checkpoints["final"] = net.copy()
    return record


def pretrain(net: Network, X_train: np.ndarray, cfg: TrainConfig, *, shuffle_rng, dropout_rng=None) -> TrainingRecord:
    """Self-supervised reconstruction pretraining; labels never enter."""
    return train_network(
        net, X_train, X_train, "mse", cfg,
        epochs=cfg.epochs_pretrain, shuffle_rng=shuffle_rng, dropout_rng=dropout_rng,
    )


def pretrain_stacked(blocks, X_train: np.ndarray, cfg: TrainConfig, *, rng_factory):
    """Greedy layer-wise pretraining of the three sub-autoencoders.

    Sub-AE k trains on the finished sub-AE k-1's encoder response; each
    sub-AE runs its own perturbation schedule. rng_factory(block_index,
    purpose) supplies the per-block shuffle/dropout streams.
    """
    records = []
    data = X_train
    for bi, block in enumerate(blocks):
        rec = train_network(
            block, data, data, "mse", cfg,
            epochs=cfg.epochs_pretrain,
            shuffle_rng=rng_factory(bi, "shuffle"),
            dropout_rng=rng_factory(bi, "dropout"),
        )
        records.append(rec)
        data = _encode_chunked(block.layers[: block.encoder_len], data)
    return records


def _encode_chunked(encoder_layers, X):
    out = [nn.forward(encoder_layers, X[s : s + EVAL_CHUNK]) for s in range(0, X.shape[0], EVAL_CHUNK)]
    return np.concatenate(out, axis=0)


def select_checkpoint(record: TrainingRecord, case: str) -> Network:
    """Deep-copied network snapshot for one experimental case.

    baseline and dropout_only read the final state of their own runs;
    after_perturbation is the final state of a perturbed run. lowest_loss
    is the earliest-epoch argmin of the recorded losses (the snapshot was
    stored on strict improvement, which implements the tie-break).
    """
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    if case in ("baseline", "dropout_only"):
        key = "final"
    elif case == "lowest_loss":
        key = "lowest_loss"
    elif case == "at_perturbation":
        if len(record.events) < 2:
            raise ValueError("at_perturbation checkpoint requires at least two perturbation events")
        key = "at_perturbation"
    else:  # after_perturbation
        if not record.events:
            raise ValueError("after_perturbation checkpoint requires a perturbed run")
        key = "final"
    if key not in record.checkpoints:
        raise ValueError(f"checkpoint {key!r} missing from record")
    return record.checkpoints[key].copy()


def encoder_of(snapshot: Network) -> Network:
    """Encoder layers only (decoder/head discarded), as a deep copy."""
    return Network(
        kind="encoder",
        layers=[l.copy() for l in snapshot.layers[: snapshot.encoder_len]],
        encoder_len=snapshot.encoder_len,
        dropout_layers=tuple(i for i in snapshot.dropout_layers if i < snapshot.encoder_len),
    )


def stack_encoders(block_snapshots) -> Network:
    """Stack the encoder layers of the three sub-AE snapshots in order."""
    layers = []
    for snap in block_snapshots:
        layers.extend(l.copy() for l in snap.layers[: snap.encoder_len])
    return Network(kind="encoder", layers=layers, encoder_len=len(layers), dropout_layers=tuple(range(len(layers))))


def finetune(
    encoder: Network,
    X_train: np.ndarray,
    y_train: np.ndarray,
    num_classes: int,
    cfg: TrainConfig,
    *,
    head_rng,
    shuffle_rng,
):
    """Supervised training of encoder + fresh head; all layers update.

    Prune masks are carried along but never re-applied, and dropout /
    regularization stay off: those are pretraining-phase mechanisms.
    Returns (classifier Network, finetune TrainingRecord).
    """
    y_train = np.asarray(y_train)
    if y_train.min() < 0 or y_train.max() >= num_classes:
        raise ValueError(f"labels outside 0..{num_classes - 1}")
    head = _head_layer(num_classes, encoder.layers[-1].out_dim, head_rng)
    clf = Network(
        kind="classifier",
        layers=[l.copy() for l in encoder.layers] + [head],
        encoder_len=len(encoder.layers),
        dropout_layers=tuple(range(len(encoder.layers))),
    )
    if num_classes == 2:
        target = y_train.astype(np.float64).reshape(-1, 1)
        loss_kind = "bce"
    else:
        target = np.zeros((y_train.size, num_classes))
        target[np.arange(y_train.size), y_train] = 1.0
        loss_kind = "ce"
    ft_cfg = TrainConfig(
        epochs_pretrain=cfg.epochs_pretrain,
        epochs_finetune=cfg.epochs_finetune,
        batch_size=cfg.batch_size,
        adam=cfg.adam,
        dropout_rate=0.0,
        reg_kind="none",
        perturb=PerturbConfig(enabled=False),
        seed=cfg.seed,
    )
    record = train_network(
        clf, X_train, target, loss_kind, ft_cfg,
        epochs=cfg.epochs_finetune, shuffle_rng=shuffle_rng,
    )
    final = record.checkpoints["final"]
    return final, record


def predict(model: Network, X: np.ndarray):
    """Labels and raw scores. Binary: label 1 iff score >= 0.5. Multiclass:
    argmax with lowest-index tie-break."""
    scores = _encode_chunked(model.layers, X)
    if model.layers[-1].activation == "sigmoid" and scores.shape[1] == 1:
        s = scores.ravel()
        return (s >= 0.5).astype(np.int64), s
    return np.argmax(scores, axis=1).astype(np.int64), scores
