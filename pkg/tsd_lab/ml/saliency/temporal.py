"""
Temporal saliency.

S(t, z) measures how much the model output moves when the subsequence
[t, t + z) is replaced by a background from another class:

    WHOLE          KL(P_tau(.|x) || P_tau(.|x~)) over all C classes
    BINARY         KL over the two-entry distributions [p_y, 1 - p_y]
    TARGET_SCALAR  |p_y(x) - p_y(x~)| at tau = 1

All perturbations of a batch go through the model in a single forward of
B * (G + 1) rows, so the student profile stays differentiable end to end.
"""

from dataclasses import dataclass

import numpy as np

from tsd_lab.domain.enums import SaliencyVariant
from tsd_lab.domain.errors import ShapeError
from tsd_lab.ml.autograd import Tensor, kl_divergence, softmax_temperature
from tsd_lab.ml.data.dataset import Instance
from tsd_lab.ml.models import ModelParams, forward_chunked
from tsd_lab.ml.saliency.grid import SubsequenceGrid
from tsd_lab.ml.saliency.perturbation import perturb_grid


@dataclass
class SaliencyProfile:
    """Scores aligned with a grid: [G] for one instance, [B, G] for a batch."""

    scores: Tensor
    grid: SubsequenceGrid
    variant: SaliencyVariant
    tau: float

    @property
    def mean(self) -> Tensor:
        """Per-instance mean saliency."""
        return self.scores.mean(axis=-1)

    @property
    def values(self) -> np.ndarray:
        return self.scores.data

    def __len__(self) -> int:
        return self.scores.shape[-1]


def _binary(probs: Tensor, onehot: np.ndarray) -> Tensor:
    """[p_y, 1 - p_y] along the last axis."""
    p_y = (probs * onehot).sum(axis=-1, keepdims=True)
    return p_y * np.array([1.0, -1.0]) + np.array([0.0, 1.0])


def batch_temporal_saliency(
    model: ModelParams,
    originals: np.ndarray,
    backgrounds: np.ndarray,
    grid: SubsequenceGrid,
    tau: float,
    variant: SaliencyVariant = SaliencyVariant.WHOLE,
    targets: np.ndarray | None = None,
    chunk_size: int = 2048,
) -> SaliencyProfile:
    """
    Temporal saliency of B series at once.

    Args:
        model: Classifier; recorded on the active tape if it is trainable
        originals: [B, T] series
        backgrounds: [B, T] opposing-class series, one per row
        grid: Subsequences to perturb
        tau: Softening temperature (ignored by TARGET_SCALAR, which uses 1)
        variant: How the output shift is measured
        targets: Class per row for BINARY/TARGET_SCALAR (required for those)
        chunk_size: Row chunking for non-differentiated passes

    Returns:
        Profile with scores [B, G]

    Raises:
        ValueError: tau <= 0 or missing targets
        ShapeError: Grid or background length mismatch
    """
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    variant = SaliencyVariant(variant)
    originals = np.asarray(originals, dtype=np.float64)
    backgrounds = np.asarray(backgrounds, dtype=np.float64)
    if originals.ndim != 2:
        raise ShapeError("originals must be [batch, length]", axis="ndim", expected=2, actual=originals.ndim)
    size, length = originals.shape
    num_pairs = len(grid)

    perturbed = perturb_grid(originals, backgrounds, grid)
    rows = np.concatenate([originals[:, np.newaxis, :], perturbed], axis=1).reshape(size * (num_pairs + 1), 1, length)
    logits = forward_chunked(model, rows, chunk_size=chunk_size)
    num_classes = logits.shape[-1]
    logits = logits.reshape(size, num_pairs + 1, num_classes)

    if variant is SaliencyVariant.WHOLE:
        probs = softmax_temperature(logits, tau)
        scores = kl_divergence(probs[:, 0:1, :], probs[:, 1:, :])
        return SaliencyProfile(scores=scores, grid=grid, variant=variant, tau=tau)

    if targets is None:
        raise ValueError(f"{variant.value} saliency needs a target class per row")
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.shape[0] != size:
        raise ShapeError("one target per row required", axis="batch", expected=size, actual=targets.shape[0])
    onehot = np.eye(num_classes)[targets][:, np.newaxis, :]

    if variant is SaliencyVariant.BINARY:
        binary = _binary(softmax_temperature(logits, tau), onehot)
        scores = kl_divergence(binary[:, 0:1, :], binary[:, 1:, :])
        return SaliencyProfile(scores=scores, grid=grid, variant=variant, tau=tau)

    p_y = (softmax_temperature(logits, 1.0) * onehot).sum(axis=-1)
    scores = (p_y[:, 0:1] - p_y[:, 1:]).abs()
    return SaliencyProfile(scores=scores, grid=grid, variant=variant, tau=1.0)


def temporal_saliency(
    model: ModelParams,
    x: Instance | np.ndarray,
    background: Instance | np.ndarray,
    grid: SubsequenceGrid,
    tau: float,
    variant: SaliencyVariant = SaliencyVariant.WHOLE,
    target: int | None = None,
) -> SaliencyProfile:
    """
    Temporal saliency of a single series; scores have shape [G].

    The target defaults to the instance label when x is an Instance.
    """
    series = x.values if isinstance(x, Instance) else np.asarray(x, dtype=np.float64)
    other = background.values if isinstance(background, Instance) else np.asarray(background, dtype=np.float64)
    if target is None and isinstance(x, Instance):
        target = x.label
    targets = None if target is None else np.array([target])
    profile = batch_temporal_saliency(model, series[np.newaxis], other[np.newaxis], grid, tau, variant, targets)
    return SaliencyProfile(
        scores=profile.scores.reshape(len(grid)),
        grid=grid,
        variant=profile.variant,
        tau=profile.tau,
    )
