"""Synthetic retrieval corpus: latent-topic documents, derived queries,
near-duplicate distractors, and query-side negative variants.

The generator is tuned so the mined difficulty-ratio landscape is populated
end to end: same-topic documents land in the broad middle, injected
near-duplicates of positives sit just under ratio 1.0, and off-topic
documents fill the easy tail. Everything is reproducible from the seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DataError, UsageError
from .hnqs import VARIANT_COUNT

# Fixed geometry of the raw token space. Topic vectors dominate so same-topic
# docs are hard for each other; signatures keep distinct docs distinguishable.
_DOC_SIG_SCALE = 0.35
_TOKEN_JITTER_SCALE = 0.25
_VARIANT_MIX = 0.7  # how far a negative variant drifts off its source query


def derive_seed(master: int, *tags) -> int:
    """Stable 64-bit stream seed from a master seed and a tag path."""
    key = ":".join([str(master)] + [str(t) for t in tags])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class SynthConfig:
    num_docs: int = 200
    num_queries: int = 80
    num_topics: int = 6
    d_in: int = 12
    doc_tokens: tuple[int, int] = (4, 8)
    query_tokens: tuple[int, int] = (2, 4)
    noise_scale: float = 0.3
    near_dup_rate: float = 0.5
    near_dup_eps: float = 0.05
    holdout_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.num_docs < 2:
            raise UsageError(f"num_docs must be >= 2, got {self.num_docs}")
        if not 1 <= self.num_queries <= self.num_docs:
            raise UsageError("num_queries must lie in [1, num_docs]")
        if self.num_topics < 1:
            raise UsageError("num_topics must be >= 1")
        if self.doc_tokens[0] < 1 or self.doc_tokens[0] > self.doc_tokens[1]:
            raise UsageError(f"bad doc token range {self.doc_tokens}")
        if self.query_tokens[0] < 1 or self.query_tokens[0] > self.query_tokens[1]:
            raise UsageError(f"bad query token range {self.query_tokens}")
        if self.noise_scale < 0:
            raise UsageError("noise_scale must be >= 0")
        if not 0 <= self.near_dup_rate <= 1:
            raise UsageError("near_dup_rate must lie in [0, 1]")
        if not 0 <= self.holdout_fraction < 1:
            raise UsageError("holdout_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: np.ndarray  # (L, d_in) raw, un-normalized


@dataclass(frozen=True)
class Query:
    query_id: str
    tokens: np.ndarray
    pos_doc_id: str
    variants: tuple[np.ndarray, ...]  # raw token matrices of the 20 negative queries


@dataclass(frozen=True)
class SyntheticDataset:
    docs: tuple[Document, ...]
    queries: tuple[Query, ...]
    config: SynthConfig
    holdout_ids: frozenset[str] = field(default_factory=frozenset)

    def doc_by_id(self, doc_id: str) -> Document:
        for d in self.docs:
            if d.doc_id == doc_id:
                return d
        raise DataError(f"no document {doc_id}")

    def train_queries(self) -> list[Query]:
        return [q for q in self.queries if q.query_id not in self.holdout_ids]

    def holdout_queries(self) -> list[Query]:
        return [q for q in self.queries if q.query_id in self.holdout_ids]


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d)
    n = np.linalg.norm(v)
    return v / n if n > 0 else _unit(rng, d)


def gen_synthetic_dataset(config: SynthConfig) -> SyntheticDataset:
    rng = np.random.default_rng(derive_seed(config.seed, "synth"))
    d = config.d_in
    topics = [_unit(rng, d) for _ in range(config.num_topics)]

    docs: list[Document] = []
    base_tokens: list[np.ndarray] = []
    for i in range(config.num_docs):
        topic = topics[i % config.num_topics]
        sig = _unit(rng, d)
        n_tok = int(rng.integers(config.doc_tokens[0], config.doc_tokens[1] + 1))
        tokens = np.stack([
            topic + _DOC_SIG_SCALE * sig + _TOKEN_JITTER_SCALE * _unit(rng, d)
            for _ in range(n_tok)
        ])
        docs.append(Document(doc_id=f"d{i:04d}", tokens=tokens))
        base_tokens.append(tokens)

    # Near-duplicate distractors: tiny perturbations of query positives. They
    # are what populates the top of the difficulty-ratio range.
    for i in range(config.num_queries):
        if rng.random() < config.near_dup_rate:
            tokens = base_tokens[i] + config.near_dup_eps * np.stack(
                [_unit(rng, d) for _ in range(base_tokens[i].shape[0])]
            )
            docs.append(Document(doc_id=f"d{i:04d}x", tokens=tokens))

    queries: list[Query] = []
    for i in range(config.num_queries):
        pos = base_tokens[i]
        own_topic = i % config.num_topics
        n_tok = int(rng.integers(config.query_tokens[0], config.query_tokens[1] + 1))
        n_tok = min(n_tok, pos.shape[0])
        picks = rng.choice(pos.shape[0], size=n_tok, replace=False)
        q_tokens = pos[np.sort(picks)] + config.noise_scale * rng.normal(size=(n_tok, d))
        variants = []
        for _ in range(VARIANT_COUNT):
            # drift toward a *different* topic: a variant that mixes the
            # anchor's own topic back in can outscore the true query
            choices = [t for t in range(config.num_topics) if t != own_topic] or [own_topic]
            off_topic = topics[choices[int(rng.integers(len(choices)))]]
            v = (1 - _VARIANT_MIX) * q_tokens + _VARIANT_MIX * (
                off_topic + _TOKEN_JITTER_SCALE * np.stack([_unit(rng, d) for _ in range(n_tok)])
            )
            variants.append(v)
        queries.append(
            Query(
                query_id=f"q{i:04d}",
                tokens=q_tokens,
                pos_doc_id=f"d{i:04d}",
                variants=tuple(variants),
            )
        )

    n_hold = int(round(config.holdout_fraction * len(queries)))
    order = rng.permutation(len(queries))
    holdout = frozenset(queries[j].query_id for j in order[:n_hold])
    return SyntheticDataset(
        docs=tuple(docs), queries=tuple(queries), config=config, holdout_ids=holdout
    )


# -- serialization ------------------------------------------------------------


def _tokens_to_list(m: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in m]


def dataset_to_records(ds: SyntheticDataset) -> Iterable[dict]:
    yield {
        "kind": "meta",
        "config": {
            "num_docs": ds.config.num_docs,
            "num_queries": ds.config.num_queries,
            "num_topics": ds.config.num_topics,
            "d_in": ds.config.d_in,
            "doc_tokens": list(ds.config.doc_tokens),
            "query_tokens": list(ds.config.query_tokens),
            "noise_scale": ds.config.noise_scale,
            "near_dup_rate": ds.config.near_dup_rate,
            "near_dup_eps": ds.config.near_dup_eps,
            "holdout_fraction": ds.config.holdout_fraction,
            "seed": ds.config.seed,
        },
        "holdout_ids": sorted(ds.holdout_ids),
    }
    for doc in ds.docs:
        yield {"kind": "doc", "id": doc.doc_id, "tokens": _tokens_to_list(doc.tokens)}
    for q in ds.queries:
        yield {
            "kind": "query",
            "id": q.query_id,
            "tokens": _tokens_to_list(q.tokens),
            "pos_doc_id": q.pos_doc_id,
            "variants": [_tokens_to_list(v) for v in q.variants],
        }


def dataset_from_records(records: Iterable[dict]) -> SyntheticDataset:
    config = None
    holdout: frozenset[str] = frozenset()
    docs: list[Document] = []
    queries: list[Query] = []
    try:
        for rec in records:
            kind = rec["kind"]
            if kind == "meta":
                c = dict(rec["config"])
                c["doc_tokens"] = tuple(c["doc_tokens"])
                c["query_tokens"] = tuple(c["query_tokens"])
                config = SynthConfig(**c)
                holdout = frozenset(str(x) for x in rec["holdout_ids"])
            elif kind == "doc":
                docs.append(Document(doc_id=str(rec["id"]), tokens=np.asarray(rec["tokens"], dtype=np.float64)))
            elif kind == "query":
                queries.append(
                    Query(
                        query_id=str(rec["id"]),
                        tokens=np.asarray(rec["tokens"], dtype=np.float64),
                        pos_doc_id=str(rec["pos_doc_id"]),
                        variants=tuple(np.asarray(v, dtype=np.float64) for v in rec["variants"]),
                    )
                )
            else:
                raise DataError(f"unknown dataset record kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed dataset record: {exc}") from None
    if config is None:
        raise DataError("dataset file missing its meta record")
    doc_ids = {d.doc_id for d in docs}
    for q in queries:
        if q.pos_doc_id not in doc_ids:
            raise DataError(f"query {q.query_id}: positive {q.pos_doc_id} missing from corpus")
    return SyntheticDataset(docs=tuple(docs), queries=tuple(queries), config=config, holdout_ids=holdout)
