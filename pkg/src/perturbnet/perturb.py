"""Periodic prune-and-regrow weight perturbation.

Every `interval_epochs` epochs, each layer's weights whose values fall in
the open interval (min(W)*tau/100, max(W)*tau/100) are masked out and set
to exactly zero. Masks accumulate across events by elementwise product, so
a position pruned once stays in the mask for the rest of pretraining (the
cumulative rule; a non-cumulative switch exists for experimentation).
Between events nothing is masked -- gradients keep flowing to zeroed
positions, so pruned weights regrow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import LayerState


@dataclass
class PerturbConfig:
    tau: float = 5.0  # percent of the per-layer min/max defining the prune interval
    interval_epochs: int = 30
    enabled: bool = True
    cumulative: bool = True
    scope: str = "encoder_and_decoder"

    def __post_init__(self):
        if not 0 <= self.tau < 50:
            raise ValueError(f"tau must be in [0, 50), got {self.tau}")
        if self.interval_epochs <= 10:
            raise ValueError(f"interval_epochs must be > 10, got {self.interval_epochs}")
        if self.scope != "encoder_and_decoder":
            raise ValueError(f"unknown perturbation scope {self.scope!r}")


@dataclass
class PerturbEvent:
    epoch: int
    pruned_per_layer: list  # entries newly zeroed by this event, per layer
    cumulative_zero_fraction: float  # zeros across all masks / total weight entries


def threshold_mask(W: np.ndarray, tau: float) -> np.ndarray:
    """Binary keep-mask: 0 iff min(W)*tau/100 < w < max(W)*tau/100 (strict).

    tau=0 gives an empty interval, so nothing is pruned. min/max are taken
    over this matrix only; a one-signed weight distribution still yields a
    valid (possibly empty) interval and simply prunes whatever falls in it.
    """
    if W.size == 0:
        raise ValueError("empty weight matrix")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    lo = W.min() * tau / 100.0
    hi = W.max() * tau / 100.0
    inside = (W > lo) & (W < hi)
    return (~inside).astype(np.float64)


def accumulate_mask(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Elementwise product; the result's zero set is the union of both."""
    if prev.shape != new.shape:
        raise ValueError(f"shape mismatch {prev.shape} vs {new.shape}")
    return prev * new


def apply_mask(layer: LayerState, mask: np.ndarray) -> LayerState:
    """Zero the weights at masked positions (exact 0.0, not -0.0).

    Optimizer moments are left untouched so regrowth restarts with warm
    momentum instead of from scratch.
    """
    if mask.shape != layer.W.shape:
        raise ValueError(f"shape mismatch {mask.shape} vs {layer.W.shape}")
    layer.W = np.where(mask == 0.0, 0.0, layer.W)
    layer.mask = mask
    return layer


def perturb_event(layers, cfg: PerturbConfig, epoch: int) -> PerturbEvent:
    """Prune step applied to every layer: new threshold mask, accumulated
    into the layer's existing mask (when cumulative), weights zeroed."""
    pruned = []
    for layer in layers:
        new = threshold_mask(layer.W, cfg.tau)
        combined = accumulate_mask(layer.mask, new) if cfg.cumulative else new
        pruned.append(int(((layer.mask == 1.0) & (combined == 0.0)).sum()))
        apply_mask(layer, combined)
    return PerturbEvent(
        epoch=epoch,
        pruned_per_layer=pruned,
        cumulative_zero_fraction=mask_zero_fraction(layers),
    )


def schedule_should_perturb(epoch: int, cfg: PerturbConfig, total_epochs: int) -> bool:
    """True at positive multiples of the interval (the final epoch included
    when divisible)."""
    if not 1 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside 1..{total_epochs}")
    return cfg.enabled and epoch % cfg.interval_epochs == 0


def mask_zero_fraction(layers) -> float:
    """Fraction of mask entries equal to zero, over all weight matrices."""
    zeros = sum(int((layer.mask == 0.0).sum()) for layer in layers)
    total = sum(layer.W.size for layer in layers)
    return zeros / total


def sparsity(layers) -> float:
    """Percent of weight entries equal to zero; biases excluded."""
    zeros = sum(int((layer.W == 0.0).sum()) for layer in layers)
    total = sum(layer.W.size for layer in layers)
    return 100.0 * zeros / total
