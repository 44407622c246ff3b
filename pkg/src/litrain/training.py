"""End-to-end training loop: warm-up, pool mining, curriculum training.

The pipeline mirrors the two-stage recipe: an in-batch InfoNCE warm-up gives
the encoder a usable embedding space, hard-negative pools are mined once with
the warmed encoder, and the margin objective then trains against negatives
sampled from the controller's difficulty interval.

Everything is deterministic from the master seed. Per-step randomness (view
augmentation, negative-query draws) comes from seeds derived from
(master, step, id), so a logged step can be recomputed bit-for-bit from a
parameter snapshot plus the logged negative ids.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .controller import LlmEndpointConfig, ScriptedClient, decide_with_fallback, summarize_state
from .curriculum import (
    ActionSpace,
    ControllerState,
    HistoryEntry,
    Phase,
    PhaseConfig,
    StateReport,
    action_from_letter,
    action_letter,
    apply_decision,
    default_action_space,
    oracle_decide,
    record_window,
    review_cadence,
)
from .encoder import EncoderTape, ToyEncoderParams, init_params, sgd_update, toy_encode
from .errors import DataError, UsageError
from .losses import LossBreakdown, LossConfig, margin_loss, margin_loss_grad, total_loss
from .losses import infonce_inbatch, infonce_inbatch_grad
from .mining import CandidatePool, build_candidate_pool, select_negative_queries, select_negatives
from .scoring import maxsim, maxsim_backward, ndcg_at_k, rank_by_score
from .synth import Document, Query, SyntheticDataset, derive_seed

MODES = ("oracle", "llm", "mock", "fixed-window", "linear")


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    phases: PhaseConfig = field(default_factory=PhaseConfig)
    space: ActionSpace = field(default_factory=default_action_space)
    mode: str = "oracle"
    steps: int = 460
    lr: float = 0.05
    batch_size: int = 8
    warmup_epochs: int = 1
    warmup_lr: float = 0.05
    warmup_tau: float = 0.1
    warmup_batch_size: int = 16
    pool_n: int = 0  # 0 → min(200, corpus size − 1)
    eval_every: int = 50
    eval_k: int = 5
    aug_noise: float = 0.05
    d_out: int = 8
    fixed_low: float = 0.80
    fixed_high: float = 0.98
    seed: int = 0
    endpoint: LlmEndpointConfig | None = None
    mock_script: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps < 1:
            raise UsageError("steps must be >= 1")
        if self.batch_size < 1 or self.warmup_batch_size < 1:
            raise UsageError("batch sizes must be >= 1")
        if self.lr < 0 or self.warmup_lr < 0:
            raise UsageError("learning rates must be >= 0")
        if not 0 < self.fixed_low < self.fixed_high <= 1.0:
            raise UsageError("fixed window must satisfy 0 < low < high <= 1")


# -- per-pair computation ------------------------------------------------------


@dataclass(frozen=True)
class PairExample:
    """All raw token matrices one anchor pair contributes to the objective."""

    q: np.ndarray
    pos_ori: np.ndarray
    pos_aug: np.ndarray
    negs_ori: tuple[np.ndarray, ...]
    negs_aug: tuple[np.ndarray, ...]
    qnegs: tuple[np.ndarray, ...]


def augment_tokens(tokens: np.ndarray, seed: int, noise: float) -> np.ndarray:
    """Simulated second view: drop one token, jitter the rest."""
    rng = np.random.default_rng(seed)
    if tokens.shape[0] > 1:
        drop = int(rng.integers(tokens.shape[0]))
        kept = np.delete(tokens, drop, axis=0)
    else:
        kept = np.array(tokens, copy=True)
    return kept + noise * rng.normal(size=kept.shape)


def pair_loss(
    params: ToyEncoderParams,
    ex: PairExample,
    cfg: LossConfig,
    tape: EncoderTape | None = None,
    weight: float = 1.0,
    winners_out: list | None = None,
) -> LossBreakdown:
    """Loss components of one pair; optionally accumulate grads on a tape.

    The four margin terms carry upstream weights (1, beta, alpha, alpha*beta)
    times `weight`, matching the combined objective, so summing tape grads
    over pairs yields the gradient of the batch total.
    """

    if tape is not None:
        encode = tape.encode
    else:
        encode = lambda raw: (toy_encode(params, raw), None)

    q_e, q_c = encode(ex.q)
    pos_o_e, pos_o_c = encode(ex.pos_ori)
    pos_a_e, pos_a_c = encode(ex.pos_aug)
    negs_o = [encode(n) for n in ex.negs_ori]
    negs_a = [encode(n) for n in ex.negs_aug]
    qnegs = [encode(n) for n in ex.qnegs]

    def term(anchor_e, anchor_c, pos_e, pos_c, neg_pairs, w) -> float:
        s_pos = maxsim(anchor_e, pos_e)
        s_negs = [maxsim(anchor_e, ne) for ne, _ in neg_pairs]
        if winners_out is not None:
            winners_out.append(tuple(np.argmax(anchor_e @ pos_e.T, axis=1)))
            for ne, _ in neg_pairs:
                winners_out.append(tuple(np.argmax(anchor_e @ ne.T, axis=1)))
        if tape is not None and w != 0.0:
            d_pos, d_negs = margin_loss_grad(s_pos, s_negs, cfg.tau)
            ga, gp = maxsim_backward(anchor_e, pos_e, upstream=w * d_pos)
            anchor_c.add_grad(ga)
            pos_c.add_grad(gp)
            for (ne, nc), dk in zip(neg_pairs, d_negs):
                ga, gn = maxsim_backward(anchor_e, ne, upstream=w * dk)
                anchor_c.add_grad(ga)
                nc.add_grad(gn)
        return margin_loss(s_pos, s_negs, cfg.tau)

    f_ori = term(q_e, q_c, pos_o_e, pos_o_c, negs_o, weight)
    f_aug = term(q_e, q_c, pos_a_e, pos_a_c, negs_a, weight * cfg.beta)
    # document->query direction: the image anchors the outer sum
    b_ori = term(pos_o_e, pos_o_c, q_e, q_c, qnegs, weight * cfg.alpha)
    b_aug = term(pos_a_e, pos_a_c, q_e, q_c, qnegs, weight * cfg.alpha * cfg.beta)
    return total_loss(f_ori, f_aug, b_ori, b_aug, cfg)


def build_pair_example(
    query: Query,
    pos_doc: Document,
    neg_docs: Sequence[Document],
    qneg_indices: Sequence[int],
    step: int,
    master_seed: int,
    aug_noise: float,
) -> PairExample:
    pos_aug = augment_tokens(
        pos_doc.tokens, derive_seed(master_seed, "aug", step, pos_doc.doc_id), aug_noise
    )
    negs_aug = tuple(
        augment_tokens(d.tokens, derive_seed(master_seed, "aug", step, d.doc_id), aug_noise)
        for d in neg_docs
    )
    return PairExample(
        q=query.tokens,
        pos_ori=pos_doc.tokens,
        pos_aug=pos_aug,
        negs_ori=tuple(d.tokens for d in neg_docs),
        negs_aug=negs_aug,
        qnegs=tuple(query.variants[i] for i in qneg_indices),
    )


@dataclass(frozen=True)
class PairLog:
    query_id: str
    doc_negs: tuple[str, ...]
    query_negs: tuple[int, ...]


def _mean_breakdown(parts: Sequence[LossBreakdown], cfg: LossConfig) -> LossBreakdown:
    n = len(parts)
    return total_loss(
        sum(p.forward_orig for p in parts) / n,
        sum(p.forward_aug for p in parts) / n,
        sum(p.backward_orig for p in parts) / n,
        sum(p.backward_aug for p in parts) / n,
        cfg,
    )


def train_step(
    params: ToyEncoderParams,
    batch: Sequence[Query],
    pools: dict[str, CandidatePool],
    docs_by_id: dict[str, Document],
    interval: tuple[float, float],
    cfg: LossConfig,
    lr: float,
    master_seed: int,
    step: int,
    aug_noise: float = 0.05,
    forced_pairs: Sequence[PairLog] | None = None,
) -> tuple[ToyEncoderParams, LossBreakdown, list[PairLog], bool]:
    """One gradient-descent step over a batch of anchor pairs.

    Negative documents come from each query's mined pool restricted to the
    controller interval; negative queries are a seeded draw from the query's
    variants. Passing `forced_pairs` (from a step log) skips selection and
    recomputes exactly the logged step.
    """
    if len(batch) == 0:
        raise UsageError("empty batch")
    tape = EncoderTape(params)
    weight = 1.0 / len(batch)
    parts: list[LossBreakdown] = []
    logs: list[PairLog] = []
    any_fallback = False
    for i, query in enumerate(batch):
        if forced_pairs is not None:
            plog = forced_pairs[i]
            if plog.query_id != query.query_id:
                raise UsageError(f"forced pair {plog.query_id} does not match batch {query.query_id}")
            neg_ids = plog.doc_negs
            qneg_idx = plog.query_negs
        else:
            pool = pools.get(query.query_id)
            if pool is None:
                raise DataError(f"no candidate pool for query {query.query_id}")
            sel = select_negatives(pool, interval[0], interval[1], cfg.k)
            any_fallback = any_fallback or sel.fallback
            neg_ids = sel.doc_ids
            qneg_idx = tuple(
                select_negative_queries(
                    list(range(len(query.variants))),
                    cfg.k,
                    derive_seed(master_seed, "qneg", step, query.query_id),
                )
            )
        neg_docs = [docs_by_id[nid] for nid in neg_ids]
        ex = build_pair_example(query, docs_by_id[query.pos_doc_id], neg_docs,
                                qneg_idx, step, master_seed, aug_noise)
        parts.append(pair_loss(params, ex, cfg, tape=tape, weight=weight))
        logs.append(PairLog(query.query_id, tuple(neg_ids), tuple(qneg_idx)))
    breakdown = _mean_breakdown(parts, cfg)
    new_params = sgd_update(params, tape.projection_grad(), lr) if lr > 0 else params
    return new_params, breakdown, logs, any_fallback


# -- warm-up -------------------------------------------------------------------


def run_warmup(
    params: ToyEncoderParams,
    dataset: SyntheticDataset,
    epochs: int,
    lr: float,
    tau: float,
    batch_size: int,
    seed: int,
) -> tuple[ToyEncoderParams, list[float]]:
    """In-batch InfoNCE epochs over (query, positive) pairs."""
    docs_by_id = {d.doc_id: d for d in dataset.docs}
    train = dataset.train_queries()
    if len(train) < 2:
        raise UsageError("warm-up needs at least 2 training queries")
    losses: list[float] = []
    for epoch in range(epochs):
        order = list(range(len(train)))
        random.Random(derive_seed(seed, "warmup", epoch)).shuffle(order)
        for lo in range(0, len(order), batch_size):
            idx = order[lo : lo + batch_size]
            if len(idx) < 2:
                continue
            qs = [train[i] for i in idx]
            tape = EncoderTape(params)
            q_enc = [tape.encode(q.tokens) for q in qs]
            p_enc = [tape.encode(docs_by_id[q.pos_doc_id].tokens) for q in qs]
            b = len(qs)
            sims = np.zeros((b, b))
            for i in range(b):
                for j in range(b):
                    sims[i, j] = maxsim(q_enc[i][0], p_enc[j][0])
            losses.append(infonce_inbatch(sims, tau))
            grad = infonce_inbatch_grad(sims, tau)
            for i in range(b):
                for j in range(b):
                    gq, gp = maxsim_backward(q_enc[i][0], p_enc[j][0], upstream=grad[i, j])
                    q_enc[i][1].add_grad(gq)
                    p_enc[j][1].add_grad(gp)
            params = sgd_update(params, tape.projection_grad(), lr)
    return params, losses


# -- mining and evaluation -----------------------------------------------------


def mine_pools(
    params: ToyEncoderParams, dataset: SyntheticDataset, n: int
) -> dict[str, CandidatePool]:
    corpus = [(d.doc_id, toy_encode(params, d.tokens)) for d in dataset.docs]
    triples = [
        (q.query_id, toy_encode(params, q.tokens), q.pos_doc_id)
        for q in dataset.train_queries()
    ]
    pools = build_candidate_pool(triples, corpus, n)
    return {p.query_id: p for p in pools}


def evaluate_ndcg(
    params: ToyEncoderParams, dataset: SyntheticDataset, k: int, queries: Sequence[Query] | None = None
) -> tuple[float, int]:
    """Mean nDCG@k; defaults to the held-out split (falls back to all queries)."""
    if queries is None:
        queries = dataset.holdout_queries() or list(dataset.queries)
    doc_enc = [(d.doc_id, toy_encode(params, d.tokens)) for d in dataset.docs]
    total = 0.0
    for q in queries:
        q_e = toy_encode(params, q.tokens)
        ranking = rank_by_score({doc_id: maxsim(q_e, d_e) for doc_id, d_e in doc_enc})
        total += ndcg_at_k(ranking, {q.pos_doc_id}, k)
    return total / len(queries), len(queries)


# -- trajectory log ------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    step: int
    phase: str
    action_id: int
    loss: LossBreakdown
    fallback: bool
    pairs: tuple[PairLog, ...]


@dataclass(frozen=True)
class ReviewRecord:
    """One curriculum review: the full report plus the decision taken.

    Reports are stored inline (including history) so each record replays
    standalone: the rule engine can be re-run on any single line of the log.
    """

    step: int
    phase: Phase
    current: int
    action: int  # decided next action
    avg_loss: float
    l_start: float
    l_end: float
    recent_actions: tuple[int, ...]
    recent_steps: tuple[int, ...]
    consecutive_low_loss_reviews: int
    history: tuple[HistoryEntry, ...]
    source: str
    calibration_failure: bool
    rationale: str


@dataclass(frozen=True)
class EvalRecord:
    step: int
    ndcg: float
    k: int
    n_queries: int


@dataclass
class TrajectoryLog:
    steps: list[StepRecord] = field(default_factory=list)
    reviews: list[ReviewRecord] = field(default_factory=list)
    evals: list[EvalRecord] = field(default_factory=list)
    warmup_losses: list[float] = field(default_factory=list)

    def any_calibration_failure(self) -> bool:
        return any(r.calibration_failure for r in self.reviews)


@dataclass
class TrainResult:
    params: ToyEncoderParams
    log: TrajectoryLog


# -- record codecs -------------------------------------------------------------


def step_to_record(s: StepRecord) -> dict:
    return {
        "kind": "step",
        "step": s.step,
        "phase": s.phase,
        "action": action_letter(s.action_id),
        "action_id": s.action_id,
        "loss": {
            "forward_orig": s.loss.forward_orig,
            "forward_aug": s.loss.forward_aug,
            "backward_orig": s.loss.backward_orig,
            "backward_aug": s.loss.backward_aug,
            "total": s.loss.total,
        },
        "fallback": s.fallback,
        "pairs": [
            {"query_id": p.query_id, "doc_negs": list(p.doc_negs), "query_negs": list(p.query_negs)}
            for p in s.pairs
        ],
    }


def step_from_record(rec: dict) -> StepRecord:
    loss = rec["loss"]
    return StepRecord(
        step=int(rec["step"]),
        phase=str(rec["phase"]),
        action_id=int(rec["action_id"]),
        loss=LossBreakdown(
            forward_orig=float(loss["forward_orig"]),
            forward_aug=float(loss["forward_aug"]),
            backward_orig=float(loss["backward_orig"]),
            backward_aug=float(loss["backward_aug"]),
            total=float(loss["total"]),
        ),
        fallback=bool(rec["fallback"]),
        pairs=tuple(
            PairLog(str(p["query_id"]), tuple(str(x) for x in p["doc_negs"]),
                    tuple(int(x) for x in p["query_negs"]))
            for p in rec["pairs"]
        ),
    )


def review_to_record(r: ReviewRecord) -> dict:
    return {
        "kind": "review",
        "step": r.step,
        "phase": r.phase.value,
        "current": action_letter(r.current),
        "action": action_letter(r.action),
        "avg_loss": r.avg_loss,
        "l_start": r.l_start,
        "l_end": r.l_end,
        "recent_actions": [action_letter(a) for a in r.recent_actions],
        "recent_steps": list(r.recent_steps),
        "consecutive_low_loss_reviews": r.consecutive_low_loss_reviews,
        "history": [[h.step, action_letter(h.action), h.avg_loss] for h in r.history],
        "source": r.source,
        "calibration_failure": r.calibration_failure,
        "rationale": r.rationale,
    }


def review_from_record(rec: dict) -> ReviewRecord:
    try:
        return ReviewRecord(
            step=int(rec["step"]),
            phase=Phase(rec["phase"]),
            current=action_from_letter(rec["current"]),
            action=action_from_letter(rec["action"]),
            avg_loss=float(rec["avg_loss"]),
            l_start=float(rec["l_start"]),
            l_end=float(rec["l_end"]),
            recent_actions=tuple(action_from_letter(a) for a in rec["recent_actions"]),
            recent_steps=tuple(int(s) for s in rec["recent_steps"]),
            consecutive_low_loss_reviews=int(rec["consecutive_low_loss_reviews"]),
            history=tuple(
                HistoryEntry(step=int(h[0]), action=action_from_letter(h[1]), avg_loss=float(h[2]))
                for h in rec["history"]
            ),
            source=str(rec["source"]),
            calibration_failure=bool(rec["calibration_failure"]),
            rationale=str(rec["rationale"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed review record: {exc}") from None


def eval_to_record(e: EvalRecord) -> dict:
    return {"kind": "eval", "step": e.step, "ndcg": e.ndcg, "k": e.k, "n_queries": e.n_queries}


def log_to_records(log: TrajectoryLog) -> Iterable[dict]:
    for wl in log.warmup_losses:
        yield {"kind": "warmup", "loss": wl}
    events: list[tuple[int, int, dict]] = []
    for s in log.steps:
        events.append((s.step, 0, step_to_record(s)))
    for r in log.reviews:
        events.append((r.step, 1, review_to_record(r)))
    for e in log.evals:
        events.append((e.step, 2, eval_to_record(e)))
    for _, _, rec in sorted(events, key=lambda t: (t[0], t[1])):
        yield rec


def log_from_records(records: Iterable[dict]) -> TrajectoryLog:
    log = TrajectoryLog()
    for rec in records:
        kind = rec.get("kind")
        if kind == "step":
            log.steps.append(step_from_record(rec))
        elif kind == "review":
            log.reviews.append(review_from_record(rec))
        elif kind == "eval":
            log.evals.append(EvalRecord(step=int(rec["step"]), ndcg=float(rec["ndcg"]),
                                        k=int(rec["k"]), n_queries=int(rec["n_queries"])))
        elif kind == "warmup":
            log.warmup_losses.append(float(rec["loss"]))
        else:
            raise DataError(f"unknown trajectory record kind {kind!r}")
    return log


# -- the full run --------------------------------------------------------------


class _BatchSampler:
    """Seeded epoch-shuffled cyclic batches over the training queries."""

    def __init__(self, queries: Sequence[Query], batch_size: int, seed: int):
        if len(queries) == 0:
            raise UsageError("no training queries")
        self._queries = list(queries)
        self._batch = batch_size
        self._rng = random.Random(seed)
        self._order: list[int] = []

    def next_batch(self) -> list[Query]:
        out = []
        while len(out) < self._batch:
            if not self._order:
                self._order = list(range(len(self._queries)))
                self._rng.shuffle(self._order)
            out.append(self._queries[self._order.pop()])
        return out


def run_training(dataset: SyntheticDataset, cfg: TrainConfig) -> TrainResult:
    """Warm-up → mine pools → curriculum training, emitting the trajectory."""
    space = cfg.space
    m = len(space)
    params = init_params(dataset.config.d_in, cfg.d_out, derive_seed(cfg.seed, "init"))
    docs_by_id = {d.doc_id: d for d in dataset.docs}
    log = TrajectoryLog()

    params, log.warmup_losses = run_warmup(
        params, dataset, cfg.warmup_epochs, cfg.warmup_lr, cfg.warmup_tau,
        cfg.warmup_batch_size, cfg.seed,
    )
    ndcg, n_eval = evaluate_ndcg(params, dataset, cfg.eval_k)
    log.evals.append(EvalRecord(step=0, ndcg=ndcg, k=cfg.eval_k, n_queries=n_eval))

    pool_n = cfg.pool_n if cfg.pool_n > 0 else min(200, len(dataset.docs) - 1)
    pools = mine_pools(params, dataset, pool_n)

    state = ControllerState(phase_config=cfg.phases)
    client = None
    if cfg.mode == "mock":
        if cfg.mock_script is None:
            raise UsageError("mock mode requires a controller script")
        client = ScriptedClient.from_file(cfg.mock_script)
    endpoint = cfg.endpoint if cfg.mode == "llm" else None
    curriculum_driven = cfg.mode in ("oracle", "llm", "mock")

    sampler = _BatchSampler(dataset.train_queries(), cfg.batch_size, derive_seed(cfg.seed, "batches"))
    window: list[float] = []
    action_id = 0
    interval = space.bounds(0)
    if cfg.mode == "fixed-window":
        interval = (cfg.fixed_low, cfg.fixed_high)

    for step in range(1, cfg.steps + 1):
        if cfg.mode == "linear":
            action_id = min(m - 1, (step - 1) * m // cfg.steps)
            interval = space.bounds(action_id)
        elif curriculum_driven:
            action_id = state.current_action

        batch = sampler.next_batch()
        params, breakdown, pair_logs, fallback = train_step(
            params, batch, pools, docs_by_id, interval, cfg.loss, cfg.lr,
            cfg.seed, step, cfg.aug_noise,
        )
        phase_label = state.phase.value if curriculum_driven else cfg.mode
        log.steps.append(StepRecord(step=step, phase=phase_label, action_id=action_id,
                                    loss=breakdown, fallback=fallback, pairs=tuple(pair_logs)))
        window.append(breakdown.total)

        if curriculum_driven and step == state.step + review_cadence(state.phase, cfg.phases):
            state = record_window(state, window)
            report = summarize_state(state, window, space)
            decision = decide_with_fallback(state, report, space, endpoint=endpoint, client=client)
            log.reviews.append(
                ReviewRecord(
                    step=state.step,
                    phase=state.phase,
                    current=state.current_action,
                    action=decision.next_action,
                    avg_loss=report.hard_negative_loss_mean,
                    l_start=report.l_start,
                    l_end=report.l_end,
                    recent_actions=report.recent_actions,
                    recent_steps=report.recent_steps,
                    consecutive_low_loss_reviews=report.consecutive_low_loss_reviews,
                    history=report.history,
                    source=decision.source,
                    calibration_failure=decision.calibration_failure,
                    rationale=decision.rationale,
                )
            )
            state = apply_decision(state, decision)
            interval = space.bounds(state.current_action)
            window = []

        if cfg.eval_every > 0 and step % cfg.eval_every == 0:
            ndcg, n_eval = evaluate_ndcg(params, dataset, cfg.eval_k)
            log.evals.append(EvalRecord(step=step, ndcg=ndcg, k=cfg.eval_k, n_queries=n_eval))

    if cfg.eval_every <= 0 or cfg.steps % cfg.eval_every != 0:
        ndcg, n_eval = evaluate_ndcg(params, dataset, cfg.eval_k)
        log.evals.append(EvalRecord(step=cfg.steps, ndcg=ndcg, k=cfg.eval_k, n_queries=n_eval))

    return TrainResult(params=params, log=log)


def recompute_step(
    params_snapshot: ToyEncoderParams,
    dataset: SyntheticDataset,
    record: StepRecord,
    cfg: TrainConfig,
    interval: tuple[float, float],
) -> LossBreakdown:
    """Recompute a logged step's loss from its snapshot and logged negatives."""
    docs_by_id = {d.doc_id: d for d in dataset.docs}
    by_id = {q.query_id: q for q in dataset.queries}
    batch = [by_id[p.query_id] for p in record.pairs]
    _, breakdown, _, _ = train_step(
        params_snapshot, batch, {}, docs_by_id, interval, cfg.loss, 0.0,
        cfg.seed, record.step, cfg.aug_noise, forced_pairs=record.pairs,
    )
    return breakdown


# -- decision replay -----------------------------------------------------------


@dataclass(frozen=True)
class ReplayFinding:
    step: int
    source: str
    logged_action: int
    oracle_action: int
    severity: str  # "divergence" for oracle rows, "llm_inconsistency" for llm rows


def replay_decisions(
    reviews: Sequence[ReviewRecord], phases: PhaseConfig, space: ActionSpace
) -> list[ReplayFinding]:
    """Re-run the rule engine on each logged review and compare actions.

    Oracle-sourced rows must reproduce exactly; LLM-sourced rows are checked
    for protocol consistency and flagged, not failed.
    """
    findings = []
    for rec in reviews:
        state = ControllerState(
            phase=rec.phase,
            current_action=rec.current,
            history=rec.history,
            step=rec.step,
            consecutive_low_loss_reviews=rec.consecutive_low_loss_reviews,
            phase_config=phases,
        )
        report = StateReport(
            phase=rec.phase,
            current_action=rec.current,
            current_interval=space.bounds(rec.current),
            hard_negative_loss_mean=rec.avg_loss,
            l_start=rec.l_start,
            l_end=rec.l_end,
            recent_actions=rec.recent_actions,
            recent_steps=rec.recent_steps,
            consecutive_low_loss_reviews=rec.consecutive_low_loss_reviews,
            history=rec.history,
        )
        ref = oracle_decide(state, report, space)
        if ref.next_action != rec.action:
            findings.append(
                ReplayFinding(
                    step=rec.step,
                    source=rec.source,
                    logged_action=rec.action,
                    oracle_action=ref.next_action,
                    severity="divergence" if rec.source == "oracle" else "llm_inconsistency",
                )
            )
    return findings


# -- finite-difference oracle ---------------------------------------------------


def fd_gradient_check(
    params: ToyEncoderParams,
    ex: PairExample,
    cfg: LossConfig,
    epsilon: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Entries whose perturbation flips any maxsim argmax are skipped: the loss
    is only piecewise differentiable and finite differences straddling a kink
    measure the wrong branch.
    """
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")

    def loss_and_winners(p: ToyEncoderParams) -> tuple[float, list]:
        winners: list = []
        bd = pair_loss(p, ex, cfg, winners_out=winners)
        return bd.total, winners

    tape = EncoderTape(params)
    pair_loss(params, ex, cfg, tape=tape, weight=1.0)
    analytic = tape.projection_grad()
    _, base_winners = loss_and_winners(params)

    worst = 0.0
    proj = params.projection
    for i in range(proj.shape[0]):
        for j in range(proj.shape[1]):
            bump = np.zeros_like(proj)
            bump[i, j] = epsilon
            lo, w_lo = loss_and_winners(ToyEncoderParams(projection=proj - bump))
            hi, w_hi = loss_and_winners(ToyEncoderParams(projection=proj + bump))
            if w_lo != base_winners or w_hi != base_winners:
                continue
            fd = (hi - lo) / (2 * epsilon)
            denom = max(abs(analytic[i, j]), abs(fd), 1e-8)
            worst = max(worst, abs(analytic[i, j] - fd) / denom)
    return worst
