"""Contrastive losses for bidirectional late-interaction training.

The core objective is a softplus margin loss over similarity gaps: each hard
negative contributes log(1 + exp((s_neg - s_pos) / tau)) independently, so the
gradient on a negative is a sigmoid of its gap scaled by 1/tau. The full
training objective combines a query->document term and a document->query term,
each evaluated on both the original and the augmented document view:

    total = (forward_orig + beta * forward_aug)
            + alpha * (backward_orig + beta * backward_aug)

An in-batch InfoNCE loss is also provided; it is used only for warm-up before
hard-negative training begins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError
from .scoring import TokenMatrix, maxsim


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters of the combined objective.

    tau: softplus temperature; alpha: weight of the document->query direction;
    beta: weight of the augmented-view terms; k: hard negatives per anchor.
    """

    tau: float = 0.02
    alpha: float = 1.0
    beta: float = 1.0
    k: int = 2

    def __post_init__(self):
        if not self.tau > 0:
            raise UsageError(f"tau must be > 0, got {self.tau}")
        if self.alpha < 0 or self.beta < 0:
            raise UsageError("alpha and beta must be >= 0")
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")


def softplus(x: float) -> float:
    """Overflow-safe log(1 + exp(x)); exact to float precision for any x."""
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def margin_loss(s_pos: float, s_negs: list[float], tau: float) -> float:
    """Sum over negatives of softplus((s_neg - s_pos) / tau)."""
    if not tau > 0:
        raise UsageError(f"tau must be > 0, got {tau}")
    if len(s_negs) == 0:
        raise UsageError("margin_loss requires at least one negative score")
    return sum(softplus((s_neg - s_pos) / tau) for s_neg in s_negs)


def margin_loss_grad(
    s_pos: float, s_negs: list[float], tau: float
) -> tuple[float, list[float]]:
    """Analytic gradient of :func:`margin_loss`.

    d/ds_neg[k] = sigmoid((s_neg[k] - s_pos) / tau) / tau, and the positive
    gradient is exactly minus the sum of the negative gradients.
    """
    if not tau > 0:
        raise UsageError(f"tau must be > 0, got {tau}")
    if len(s_negs) == 0:
        raise UsageError("margin_loss_grad requires at least one negative score")
    d_negs = [sigmoid((s_neg - s_pos) / tau) / tau for s_neg in s_negs]
    return -sum(d_negs), d_negs


def forward_loss(
    q: TokenMatrix,
    d_ori: TokenMatrix,
    d_aug: TokenMatrix,
    negs_ori: list[TokenMatrix],
    negs_aug: list[TokenMatrix],
    cfg: LossConfig,
) -> float:
    """Query->document margin loss over the original and augmented doc views.

    Both views are contrasted against the same query; the augmented term is
    weighted by cfg.beta. negs_aug[k] must be the augmented counterpart of
    negs_ori[k].
    """
    if len(negs_ori) != len(negs_aug):
        raise UsageError(
            f"negative view lists differ in length: {len(negs_ori)} vs {len(negs_aug)}"
        )
    ori = margin_loss(maxsim(q, d_ori), [maxsim(q, n) for n in negs_ori], cfg.tau)
    aug = margin_loss(maxsim(q, d_aug), [maxsim(q, n) for n in negs_aug], cfg.tau)
    return ori + cfg.beta * aug


def backward_loss(
    d_ori: TokenMatrix,
    d_aug: TokenMatrix,
    q_pos: TokenMatrix,
    q_negs: list[TokenMatrix],
    cfg: LossConfig,
) -> float:
    """Document->query margin loss; the image is the anchor.

    The anchor sits in the outer sum of the late-interaction score, so every
    score here is maxsim(document, query). The same hard negative queries are
    contrasted against both document views.
    """
    if len(q_negs) == 0:
        raise UsageError("backward_loss requires at least one negative query")
    ori = margin_loss(maxsim(d_ori, q_pos), [maxsim(d_ori, n) for n in q_negs], cfg.tau)
    aug = margin_loss(maxsim(d_aug, q_pos), [maxsim(d_aug, n) for n in q_negs], cfg.tau)
    return ori + cfg.beta * aug


@dataclass(frozen=True)
class LossBreakdown:
    """The four margin-loss components of one step plus their weighted total."""

    forward_orig: float
    forward_aug: float
    backward_orig: float
    backward_aug: float
    total: float


def total_loss(
    forward_orig: float,
    forward_aug: float,
    backward_orig: float,
    backward_aug: float,
    cfg: LossConfig,
) -> LossBreakdown:
    """Combine the four loss components into the training objective."""
    parts = (forward_orig, forward_aug, backward_orig, backward_aug)
    if not all(math.isfinite(p) for p in parts):
        raise NumericError(f"non-finite loss component: {parts}")
    forward = forward_orig + cfg.beta * forward_aug
    backward = backward_orig + cfg.beta * backward_aug
    return LossBreakdown(
        forward_orig=forward_orig,
        forward_aug=forward_aug,
        backward_orig=backward_orig,
        backward_aug=backward_aug,
        total=forward + cfg.alpha * backward,
    )


def infonce_inbatch(sim_matrix: np.ndarray, tau: float) -> float:
    """In-batch InfoNCE over a B x B similarity matrix.

    Entry (i, i) is row i's positive score; every other column is an in-batch
    negative. Computed with log-sum-exp stabilization, averaged over rows.
    """
    if not tau > 0:
        raise UsageError(f"tau must be > 0, got {tau}")
    s = np.asarray(sim_matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise UsageError(f"similarity matrix must be square, got shape {s.shape}")
    logits = s / tau
    row_max = logits.max(axis=1, keepdims=True)
    lse = row_max[:, 0] + np.log(np.exp(logits - row_max).sum(axis=1))
    return float(np.mean(lse - np.diag(logits)))


def infonce_inbatch_grad(sim_matrix: np.ndarray, tau: float) -> np.ndarray:
    """Gradient of :func:`infonce_inbatch` with respect to the similarity matrix."""
    s = np.asarray(sim_matrix, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise UsageError(f"similarity matrix must be square, got shape {s.shape}")
    b = s.shape[0]
    logits = s / tau
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    grad = (p - np.eye(b)) / (b * tau)
    return grad
