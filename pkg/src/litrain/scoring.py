"""Multi-vector token embeddings, MaxSim late-interaction scoring, and nDCG.

A token matrix is a float64 numpy array of shape (L, d): one row per token.
Queries and documents are encoded independently into token matrices and
combined only at scoring time, ColBERT-style: the score of a (query, doc)
pair is the sum over query tokens of the best dot product against any
document token. With L2-normalized rows the dot product is cosine
similarity and the score lies in [-L_q, L_q].

All functions here are pure and safe to call from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

TokenMatrix = np.ndarray  # shape (L, d), float64


def as_token_matrix(rows) -> TokenMatrix:
    """Validate and coerce an array-like into a (L, d) float64 matrix.

    Raises UsageError on ragged rows, empty input, or wrong rank.
    """
    try:
        m = np.asarray(rows, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"token rows are not a rectangular numeric array: {exc}") from None
    if m.ndim != 2:
        raise UsageError(f"token matrix must be 2-D (L, d), got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise UsageError(f"token matrix must be non-empty, got shape {m.shape}")
    return m


def l2_normalize(m: TokenMatrix) -> TokenMatrix:
    """Scale every row to unit Euclidean norm; all-zero rows pass through.

    Zero rows model padding tokens: they contribute nothing to dot products
    and normalizing them would divide by zero, so they are left untouched.
    """
    m = as_token_matrix(m)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return m / safe


def maxsim(query: TokenMatrix, doc: TokenMatrix) -> float:
    """Late-interaction score: sum over query tokens of the max dot product.

    Both matrices must share the embedding dimension d. Inputs are expected
    to be row-normalized already; this function does not re-normalize.
    """
    query = as_token_matrix(query)
    doc = as_token_matrix(doc)
    if query.shape[1] != doc.shape[1]:
        raise UsageError(
            f"embedding dimension mismatch: query d={query.shape[1]}, doc d={doc.shape[1]}"
        )
    sim = query @ doc.T  # (L_q, L_d)
    return float(sim.max(axis=1).sum())


def maxsim_backward(
    query: TokenMatrix, doc: TokenMatrix, upstream: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Subgradient of :func:`maxsim` with respect to both token matrices.

    Gradient routes only through each query token's argmax document token:
    d(score)/d(q_l) = doc[j*(l)] and d(score)/d(doc_j) = sum of q_l over the
    query tokens whose argmax is j, each scaled by ``upstream``. Argmax ties
    break to the lowest document-token index so replays are deterministic.
    """
    query = as_token_matrix(query)
    doc = as_token_matrix(doc)
    if query.shape[1] != doc.shape[1]:
        raise UsageError(
            f"embedding dimension mismatch: query d={query.shape[1]}, doc d={doc.shape[1]}"
        )
    sim = query @ doc.T
    winners = np.argmax(sim, axis=1)  # np.argmax already picks the lowest index on ties
    grad_query = upstream * doc[winners]
    grad_doc = np.zeros_like(doc)
    np.add.at(grad_doc, winners, upstream * query)
    return grad_query, grad_doc


@dataclass(frozen=True)
class RankedList:
    """An ordered retrieval result: (item id, score) with scores non-increasing."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        ids = [e[0] for e in self.entries]
        if len(set(ids)) != len(ids):
            raise UsageError("ranked list contains duplicate ids")
        scores = [e[1] for e in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise UsageError("ranked list scores must be non-increasing")

    def ids(self) -> list[str]:
        return [e[0] for e in self.entries]


def rank_by_score(scored: dict[str, float]) -> RankedList:
    """Build a RankedList from id -> score, ties broken by ascending id."""
    ordered = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(entries=tuple(ordered))


def ndcg_at_k(ranking: RankedList, relevant: set[str], k: int) -> float:
    """Binary-gain nDCG truncated at rank k; 0.0 when ``relevant`` is empty."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if not relevant:
        return 0.0
    gains = [1.0 if item_id in relevant else 0.0 for item_id, _ in ranking.entries[:k]]
    dcg = sum(g / np.log2(i + 2.0) for i, g in enumerate(gains))
    ideal_hits = min(len(relevant), k)
    idcg = sum(1.0 / np.log2(i + 2.0) for i in range(ideal_hits))
    return float(dcg / idcg)


def matrix_to_record(item_id: str, m: TokenMatrix) -> dict:
    """Encode a token matrix as its JSON Lines record: {"id", "tokens"}."""
    return {"id": item_id, "tokens": [[float(v) for v in row] for row in np.asarray(m)]}


def matrix_from_record(record: dict) -> tuple[str, TokenMatrix]:
    """Decode the {"id", "tokens"} record produced by :func:`matrix_to_record`."""
    return str(record["id"]), as_token_matrix(record["tokens"])
