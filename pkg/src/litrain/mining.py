"""Offline hard-negative candidate pools and per-step negative selection.

Mining is a one-time, brute-force pass: every query is scored against the full
corpus, the positive is dropped, and the top-N survivors are stored together
with a positive-aware difficulty ratio (negative score divided by the
positive's score). Training then samples from a pool by difficulty interval.

build_candidate_pool is a deterministic per-query map, so callers may shard it
across workers; merge order does not affect the result.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence, TypeVar

from .errors import DataError, UsageError
from .scoring import TokenMatrix, maxsim

T = TypeVar("T")


@dataclass(frozen=True)
class PoolEntry:
    doc_id: str
    sim: float
    ratio: float  # sim / sim_pos, recorded at mining time


@dataclass(frozen=True)
class CandidatePool:
    """Top-N hard-negative documents for one query, sorted by score descending."""

    query_id: str
    sim_pos: float
    entries: tuple[PoolEntry, ...]


def difficulty_ratio(s_neg: float, s_pos: float) -> float:
    """A negative's similarity relative to its paired positive's.

    Raises DataError for s_pos <= 0: a non-positive anchor score means the
    representation space is degenerate and must be surfaced, not clamped.
    """
    if s_pos <= 0:
        raise DataError(f"degenerate positive score {s_pos}; cannot measure difficulty")
    return s_neg / s_pos


def build_candidate_pool(
    queries: Sequence[tuple[str, TokenMatrix, str]],
    corpus: Sequence[tuple[str, TokenMatrix]],
    n: int,
) -> list[CandidatePool]:
    """Brute-force mine the top-n hard negatives for each query.

    queries are (query_id, token matrix, positive doc id) triples and corpus
    is (doc_id, token matrix) pairs, all row-normalized. Score ties break by
    ascending doc_id so mining is reproducible bit-for-bit.
    """
    if n < 1:
        raise UsageError(f"pool size n must be >= 1, got {n}")
    corpus_ids = {doc_id for doc_id, _ in corpus}
    pools = []
    for query_id, q, pos_doc_id in queries:
        if pos_doc_id not in corpus_ids:
            raise DataError(f"query {query_id}: positive document {pos_doc_id} not in corpus")
        sim_pos = None
        scored = []
        for doc_id, d in corpus:
            s = maxsim(q, d)
            if doc_id == pos_doc_id:
                sim_pos = s
            else:
                scored.append((doc_id, s))
        scored.sort(key=lambda t: (-t[1], t[0]))
        entries = tuple(
            PoolEntry(doc_id=doc_id, sim=s, ratio=difficulty_ratio(s, sim_pos))
            for doc_id, s in scored[:n]
        )
        pools.append(CandidatePool(query_id=query_id, sim_pos=sim_pos, entries=entries))
    return pools


@dataclass(frozen=True)
class NegativeSelection:
    """Selected negative doc ids; fallback is True when the interval ran dry."""

    doc_ids: tuple[str, ...]
    fallback: bool


def select_negatives(pool: CandidatePool, low: float, high: float, count: int) -> NegativeSelection:
    """Pick the `count` highest-scoring pool entries inside [low, high].

    The interval is closed on both ends. When fewer than `count` entries
    qualify, the shortfall is filled from outside the interval, nearest ratio
    first (below `low` preferred), and the selection is flagged as a fallback
    so the trainer can log the event. Every step is guaranteed its negatives
    as long as the pool holds `count` entries at all.
    """
    if count < 1:
        raise UsageError(f"count must be >= 1, got {count}")
    if len(pool.entries) == 0:
        raise DataError(f"candidate pool for query {pool.query_id} is empty")
    inside = [e for e in pool.entries if low <= e.ratio <= high]
    chosen = sorted(inside, key=lambda e: (-e.sim, e.doc_id))[:count]
    fallback = len(chosen) < count
    if fallback:
        below = [e for e in pool.entries if e.ratio < low]
        below.sort(key=lambda e: (low - e.ratio, e.doc_id))
        chosen.extend(below[: count - len(chosen)])
    if len(chosen) < count:
        # interval and everything below it exhausted; take the nearest above
        above = [e for e in pool.entries if e.ratio > high]
        above.sort(key=lambda e: (e.ratio - high, e.doc_id))
        chosen.extend(above[: count - len(chosen)])
    return NegativeSelection(doc_ids=tuple(e.doc_id for e in chosen), fallback=fallback)


def select_negative_queries(candidates: Sequence[T], count: int, seed: int) -> list[T]:
    """Seeded uniform sample of `count` distinct candidates from a pool.

    No query-side difficulty measure is applied; the pool is treated as
    exchangeable. If the pool is smaller than `count`, the whole pool is
    returned (sampler order).
    """
    if count < 1:
        raise UsageError(f"count must be >= 1, got {count}")
    if len(candidates) == 0:
        raise DataError("negative-query pool is empty")
    rng = random.Random(seed)
    k = min(count, len(candidates))
    picks = rng.sample(range(len(candidates)), k)
    return [candidates[i] for i in picks]


def pool_to_record(pool: CandidatePool) -> dict:
    """Encode one pool as its JSON Lines record."""
    return {
        "query_id": pool.query_id,
        "sim_pos": pool.sim_pos,
        "entries": [
            {"doc_id": e.doc_id, "sim": e.sim, "ratio": e.ratio} for e in pool.entries
        ],
    }


def pool_from_record(record: dict) -> CandidatePool:
    try:
        return CandidatePool(
            query_id=str(record["query_id"]),
            sim_pos=float(record["sim_pos"]),
            entries=tuple(
                PoolEntry(doc_id=str(e["doc_id"]), sim=float(e["sim"]), ratio=float(e["ratio"]))
                for e in record["entries"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed candidate-pool record: {exc}") from None
