"""Training loop: negative-sampling loss, hand-derived gradients, Adagrad.

Each positive training quadruple is paired with ``neg_ratio`` corruptions of
its subject or object. The loss per positive is

    L = -log sigmoid(margin - f(pos)) - (1/eta) * sum_i log sigmoid(f(neg_i) - margin)

and gradients flow through the rotation into entity components, relation
components, and time phases. Updates are sparse Adagrad: only rows touched
by a batch change.
"""

from __future__ import annotations

import ctypes
import sys
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import Quadruple, TimeBinning, TrainQuad, Vocab, expand_for_training
from .model import ModelParams, init_params, score_quads

ADAGRAD_EPS = 1e-10


class NumericalError(Exception):
    """Training produced a non-finite loss or gradient."""


_malloc_tuned = False


def _retain_malloc_arenas() -> None:
    """Keep glibc from unmapping the step loop's large temporaries.

    Every step churns on the order of 100 MB of short-lived arrays; with
    default trim/mmap thresholds glibc hands the pages back to the kernel
    on free and the next step page-faults them in again, tripling step
    time on kernels without transparent hugepages. No-op off glibc.
    """
    global _malloc_tuned
    if _malloc_tuned or not sys.platform.startswith("linux"):
        return
    _malloc_tuned = True
    try:
        libc = ctypes.CDLL("libc.so.6")
        m_trim_threshold, m_top_pad, m_mmap_threshold = -1, -2, -3
        libc.mallopt(m_trim_threshold, 2**31 - 1)
        libc.mallopt(m_top_pad, 64 * 2**20)
        libc.mallopt(m_mmap_threshold, 2**27)
    except OSError:
        pass


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    Defaults follow the standard configuration for this model family:
    dimension 500, batch size 512, ten negatives per positive, L1 scores.
    The time-granularity parameter (``time_unit`` days for point data,
    ``time_threshold`` mentions for interval data) rides along so a run is
    fully described by one config.
    """

    k: int = 500
    batch_size: int = 512
    neg_ratio: int = 10
    margin: float = 110.0
    lr: float = 0.1
    max_epochs: int = 5000
    valid_every: int = 100
    patience: int = 5
    norm_p: int = 1
    seed: int = 0
    dual: bool = False
    time_unit: int | None = 1
    time_threshold: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.norm_p not in (1, 2):
            raise ValueError("norm_p must be 1 or 2")


@dataclass
class ValidationRecord:
    epoch: int
    train_loss: float
    mrr: float
    hits1: float
    hits3: float
    hits10: float
    seconds: float

    def tsv(self) -> str:
        return (f"{self.epoch}\t{self.train_loss:.6f}\t{self.mrr:.6f}\t{self.hits1:.6f}"
                f"\t{self.hits3:.6f}\t{self.hits10:.6f}\t{self.seconds:.3f}")

    TSV_HEADER = "epoch\ttrain_loss\tmrr\thits1\thits3\thits10\tseconds"


def sample_negatives(quad: TrainQuad, neg_ratio: int, n_entities: int,
                     rng: np.random.Generator) -> list[TrainQuad]:
    """Corrupt the subject or object of one quadruple ``neg_ratio`` times.

    A fair coin picks the side; the replacement is uniform over all other
    entities. Accidental true facts are not filtered.
    """
    if n_entities < 2:
        raise ValueError("need at least 2 entities to corrupt")
    out = []
    for _ in range(neg_ratio):
        corrupt_subject = rng.random() < 0.5
        original = quad.subject if corrupt_subject else quad.object
        repl = int(rng.integers(0, n_entities - 1))
        if repl >= original:
            repl += 1
        if corrupt_subject:
            out.append(TrainQuad(repl, quad.slot, quad.object, quad.tau))
        else:
            out.append(TrainQuad(quad.subject, quad.slot, repl, quad.tau))
    return out


def _corrupt_batch(pos: np.ndarray, neg_ratio: int, n_entities: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Vectorized corruption: (B, 4) positives -> (B * neg_ratio, 4) negatives."""
    neg = np.repeat(pos, neg_ratio, axis=0)
    n = len(neg)
    subject_side = rng.random(n) < 0.5
    original = np.where(subject_side, neg[:, 0], neg[:, 2])
    repl = rng.integers(0, n_entities - 1, n)
    repl = repl + (repl >= original)
    neg[subject_side, 0] = repl[subject_side]
    neg[~subject_side, 2] = repl[~subject_side]
    return neg


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def loss(pos_score: float, neg_scores: Sequence[float], margin: float, neg_ratio: int) -> float:
    """Negative-sampling loss for one positive and its corruptions."""
    neg = np.asarray(neg_scores, float)
    if neg.shape != (neg_ratio,):
        raise ValueError(f"expected {neg_ratio} negative scores, got {neg.shape}")
    return float(_softplus(pos_score - margin) + _softplus(margin - neg).sum() / neg_ratio)


def batch_loss(params: ModelParams, pos: np.ndarray, neg: np.ndarray,
               margin: float, neg_ratio: int) -> float:
    """Mean loss over a batch of (B, 4) positives and (B*neg_ratio, 4) negatives."""
    f_pos = score_quads(params, pos[:, 0], pos[:, 1], pos[:, 2], pos[:, 3])
    f_neg = score_quads(params, neg[:, 0], neg[:, 1], neg[:, 2], neg[:, 3])
    per_pos = _softplus(f_pos - margin)
    per_neg = _softplus(margin - f_neg).reshape(len(pos), neg_ratio).sum(axis=1) / neg_ratio
    return float((per_pos + per_neg).mean())


def _scatter_rows(idx: np.ndarray, vals: np.ndarray, n_rows: int, k: int,
                  cols: np.ndarray) -> np.ndarray:
    """Sum (len(idx), k) value rows into a dense (n_rows, k) float64 table."""
    flat = (idx[:, None] * k + cols).ravel()
    return np.bincount(flat, weights=vals.ravel(), minlength=n_rows * k).reshape(n_rows, k)


def loss_and_grads(params: ModelParams, pos: np.ndarray, neg: np.ndarray,
                   margin: float, neg_ratio: int) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and dense analytic gradients for every parameter table.

    Gradients are exact subgradients of the loss: the L1 kink contributes 0,
    and d||.||_2 at the origin is taken as 0. Arithmetic follows the storage
    dtype; returned gradient tables are float64. Per-quadruple loss weights
    below 1e-30 (sigmoid fully saturated, no representable update) are
    flushed to exact zero, which also keeps float32 math out of the denormal
    range.
    """
    B = len(pos)
    quads = np.concatenate([pos, neg])
    # contiguous index columns gather measurably faster than strided views
    s, slot, o, tau = (np.ascontiguousarray(quads[:, j]) for j in range(4))
    k = params.k
    # trig over the phase table once, then gather: far fewer evaluations
    c, sn = np.cos(params.phase)[tau], np.sin(params.phase)[tau]
    s_re, s_im = params.ent_re[s], params.ent_im[s]
    o_re, o_im = params.ent_re[o], params.ent_im[o]
    a1 = s_re - o_re
    a2 = s_im - o_im
    b1 = s_re + o_re
    b2 = s_im + o_im
    d_re = a1 * c
    d_re -= a2 * sn
    d_re += params.rel_re[slot]
    d_im = b1 * sn
    d_im += b2 * c
    d_im += params.rel_im[slot]

    if params.norm_p == 1:
        scores = np.abs(d_re).sum(axis=1) + np.abs(d_im).sum(axis=1)
        u_re, u_im = np.sign(d_re), np.sign(d_im)
    else:
        scores = np.sqrt((d_re * d_re).sum(axis=1) + (d_im * d_im).sum(axis=1))
        safe = np.where(scores > 0.0, scores, 1.0)[:, None]
        u_re = np.where(scores[:, None] > 0.0, d_re / safe, 0.0)
        u_im = np.where(scores[:, None] > 0.0, d_im / safe, 0.0)

    f_pos, f_neg = scores[:B], scores[B:]
    total = float((_softplus(f_pos - margin)
                   + _softplus(margin - f_neg).reshape(B, neg_ratio).sum(axis=1) / neg_ratio).mean())
    # d(mean loss)/d(score) per quadruple
    w = np.concatenate([_sigmoid(f_pos - margin), -_sigmoid(margin - f_neg) / neg_ratio]) / B
    if not np.isfinite(total) or not np.isfinite(w).all():
        raise NumericalError("non-finite loss in batch")
    w[np.abs(w) < 1e-30] = 0.0
    u_re *= w[:, None]
    u_im *= w[:, None]

    urc = u_re * c
    urs = u_re * sn
    uic = u_im * c
    uis = u_im * sn
    g_s_re = urc + uis
    g_s_im = uic - urs
    g_o_re = uis - urc
    g_o_im = urs + uic
    g_phase = uic * b1
    g_phase -= uis * b2
    g_phase -= urc * a2
    g_phase -= urs * a1

    cols = np.arange(k)
    ent_idx = np.concatenate([s, o])
    grads = {
        "ent_re": _scatter_rows(ent_idx, np.concatenate([g_s_re, g_o_re]),
                                params.n_entities, k, cols),
        "ent_im": _scatter_rows(ent_idx, np.concatenate([g_s_im, g_o_im]),
                                params.n_entities, k, cols),
        "rel_re": _scatter_rows(slot, u_re, params.n_slots, k, cols),
        "rel_im": _scatter_rows(slot, u_im, params.n_slots, k, cols),
        "phase": _scatter_rows(tau, g_phase, params.n_tau, k, cols),
    }
    return total, grads


def apply_adagrad(params: ModelParams, grads: dict[str, np.ndarray], lr: float) -> None:
    """In-place Adagrad update: G += g^2, x -= lr * g / (sqrt(G) + eps).

    Zero-gradient coordinates are left untouched. The float64 step rounds
    into the storage dtype on assignment.
    """
    arrays = params.arrays()
    for name, g in grads.items():
        acc = params.acc[name]
        acc += g * g
        arrays[name] -= lr * g / (np.sqrt(acc) + ADAGRAD_EPS)


def grad_step(params: ModelParams, pos: np.ndarray, neg: np.ndarray,
              config: TrainConfig) -> float:
    """One optimization step over a batch; mutates params, returns mean loss."""
    total, grads = loss_and_grads(params, pos, neg, config.margin, config.neg_ratio)
    apply_adagrad(params, grads, config.lr)
    return total


def quads_to_array(quads: Iterable[TrainQuad]) -> np.ndarray:
    return np.array([tuple(q) for q in quads], dtype=np.int64).reshape(-1, 4)


def train(train_facts: Sequence[Quadruple], valid_facts: Sequence[Quadruple],
          config: TrainConfig, binning: TimeBinning, vocab: Vocab,
          log_path=None, progress: bool = False,
          ) -> tuple[ModelParams, list[ValidationRecord]]:
    """Full training run with early stopping on validation MRR.

    Expands facts into endpoint quadruples, shuffles each epoch (seeded),
    validates every ``valid_every`` epochs against the train+valid filter,
    and keeps the best-MRR snapshot. Stops at ``max_epochs`` or after
    ``patience`` consecutive validations without improvement. Returns the
    best snapshot (the final params if validation never ran) and the
    per-validation history.
    """
    from .evaluation import FilterSet, evaluate

    if not train_facts:
        raise ValueError("empty training set")
    _retain_malloc_arenas()
    quads = quads_to_array(expand_for_training(train_facts, binning, config.dual,
                                               vocab.n_relations))
    params = init_params(vocab.n_entities, vocab.n_relations, binning.n_tau,
                         config.k, config.dual, config.seed, config.norm_p)
    rng = np.random.default_rng([config.seed, 1])
    filter_set = None
    if valid_facts:
        filter_set = FilterSet.build(list(train_facts) + list(valid_facts), binning)

    history: list[ValidationRecord] = []
    best = params.copy()
    best_mrr = -1.0
    bad_validations = 0
    start = time.perf_counter()
    log_fh = open(log_path, "w", encoding="utf-8") if log_path is not None else None
    if log_fh:
        log_fh.write(ValidationRecord.TSV_HEADER + "\n")
    try:
        for epoch in range(1, config.max_epochs + 1):
            order = rng.permutation(len(quads))
            epoch_loss = 0.0
            for lo in range(0, len(quads), config.batch_size):
                pos = quads[order[lo: lo + config.batch_size]]
                neg = _corrupt_batch(pos, config.neg_ratio, vocab.n_entities, rng)
                epoch_loss += grad_step(params, pos, neg, config) * len(pos)
            epoch_loss /= len(quads)

            if filter_set is not None and epoch % config.valid_every == 0:
                report = evaluate(params, valid_facts, filter_set, binning)
                rec = ValidationRecord(epoch, epoch_loss, report.mrr, report.hits1,
                                       report.hits3, report.hits10,
                                       time.perf_counter() - start)
                history.append(rec)
                if log_fh:
                    log_fh.write(rec.tsv() + "\n")
                    log_fh.flush()
                if progress:
                    print(f"epoch {epoch}: loss {epoch_loss:.4f} mrr {report.mrr:.4f}")
                if report.mrr > best_mrr:
                    best_mrr = report.mrr
                    best = params.copy()
                    bad_validations = 0
                else:
                    bad_validations += 1
                    if bad_validations >= config.patience:
                        break
        if best_mrr < 0:  # validation never ran
            best = params
        return best, history
    finally:
        if log_fh:
            log_fh.close()
