"""Trainable toy encoder: a single projection followed by row normalization.

Stands in for the multi-billion-parameter backbone so the full training loop
can run on a laptop: raw tokens live in d_in, embeddings in d_out, and the
only trainable state is the projection matrix. Gradients are exact, which is
what makes finite-difference checks of the whole objective meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .scoring import TokenMatrix, as_token_matrix

D_IN_DEFAULT = 12
D_OUT_DEFAULT = 8


@dataclass(frozen=True)
class ToyEncoderParams:
    projection: np.ndarray  # (d_in, d_out) float64

    def __post_init__(self):
        p = self.projection
        if not (isinstance(p, np.ndarray) and p.ndim == 2):
            raise UsageError("projection must be a 2-D array")
        if not np.all(np.isfinite(p)):
            raise UsageError("projection holds non-finite entries")

    @property
    def d_in(self) -> int:
        return self.projection.shape[0]

    @property
    def d_out(self) -> int:
        return self.projection.shape[1]


def init_params(d_in: int = D_IN_DEFAULT, d_out: int = D_OUT_DEFAULT, seed: int = 0) -> ToyEncoderParams:
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(d_in)
    return ToyEncoderParams(projection=rng.normal(0.0, scale, size=(d_in, d_out)))


def toy_encode(params: ToyEncoderParams, raw: TokenMatrix) -> TokenMatrix:
    """Project raw tokens and l2-normalize each row."""
    return encode_with_cache(params, raw)[0]


def encode_with_cache(params: ToyEncoderParams, raw) -> tuple[TokenMatrix, "EncodeCache"]:
    x = as_token_matrix(raw)
    if x.shape[1] != params.d_in:
        raise UsageError(f"raw token dim {x.shape[1]} != encoder d_in {params.d_in}")
    y = x @ params.projection
    norms = np.linalg.norm(y, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    e = y / safe[:, None]
    return e, EncodeCache(x=x, e=e, norms=norms)


@dataclass
class EncodeCache:
    """Forward intermediates for one encoded matrix, plus its grad slot."""

    x: np.ndarray  # (L, d_in) raw input
    e: np.ndarray  # (L, d_out) normalized output
    norms: np.ndarray  # (L,) pre-normalization row norms
    g_e: np.ndarray | None = None  # accumulated upstream grad on e

    def add_grad(self, g: np.ndarray) -> None:
        if self.g_e is None:
            self.g_e = np.array(g, dtype=np.float64, copy=True)
        else:
            self.g_e += g

    def projection_grad(self) -> np.ndarray:
        """Backprop the accumulated output grad to the projection matrix.

        Row normalization projects the upstream grad onto the tangent of the
        unit sphere and divides by the pre-norm length. Rows that projected to
        zero get zero gradient: the normalized output is scale-free there and
        central differences vanish by symmetry, so zero is the one consistent
        subgradient choice.
        """
        if self.g_e is None:
            return np.zeros((self.x.shape[1], self.e.shape[1]))
        inner = np.sum(self.g_e * self.e, axis=1, keepdims=True)
        g_y = (self.g_e - inner * self.e)
        nz = self.norms > 0
        g_y[nz] /= self.norms[nz, None]
        g_y[~nz] = 0.0
        return self.x.T @ g_y


class EncoderTape:
    """Collects every encoding of a step so one call yields the full grad."""

    def __init__(self, params: ToyEncoderParams):
        self.params = params
        self._caches: list[EncodeCache] = []

    def encode(self, raw) -> tuple[TokenMatrix, EncodeCache]:
        e, cache = encode_with_cache(self.params, raw)
        self._caches.append(cache)
        return e, cache

    def projection_grad(self) -> np.ndarray:
        total = np.zeros_like(self.params.projection)
        for cache in self._caches:
            total += cache.projection_grad()
        return total


def sgd_update(params: ToyEncoderParams, grad: np.ndarray, lr: float) -> ToyEncoderParams:
    if grad.shape != params.projection.shape:
        raise UsageError(f"grad shape {grad.shape} != projection shape {params.projection.shape}")
    return ToyEncoderParams(projection=params.projection - lr * grad)
