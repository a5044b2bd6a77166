"""TeRo model core: complex embeddings rotated per time step.

Entities live in C^k as (real, imaginary) array pairs. Each time step tau
carries a phase vector theta; multiplying an entity embedding by
e^{i theta_j} rotates every coordinate without changing its modulus. A fact
(s, r, o, tau) is scored by how well the relation translates the rotated
subject onto the conjugate of the rotated object:

    score = || rot(s, theta_tau) + r - conj(rot(o, theta_tau)) ||_p

Lower is more plausible. Relations on interval datasets come in dual
begin/end variants stored as two row blocks of one table: slot r is the
beginning of relation r, slot r + n_relations its end.

Parameter arrays are float32, matching the checkpoint wire format, so
save/load round-trips are lossless; scoring upcasts to float64 so ranking
comparisons are precision-robust. Models built with ``dtype=np.float64``
(for finite-difference work) behave identically but save with rounding.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Quadruple, TimeBinning, endpoint_terms

CHECKPOINT_MAGIC = b"TERO"
CHECKPOINT_VERSION = 1


@dataclass
class ModelParams:
    """All trainable arrays plus their Adagrad accumulators.

    ``rel_re``/``rel_im`` have ``2 * n_relations`` rows when ``dual`` (begin
    block then end block), else ``n_relations``. Accumulators are float64
    regardless of the parameter dtype.
    """

    ent_re: np.ndarray  # (n_entities, k)
    ent_im: np.ndarray
    rel_re: np.ndarray  # (n_slots, k)
    rel_im: np.ndarray
    phase: np.ndarray  # (n_tau, k), radians
    n_relations: int
    dual: bool
    norm_p: int = 1
    acc: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.acc:
            # float64 accumulators: squared-gradient sums underflow float32
            self.acc = {name: np.zeros(arr.shape, dtype=np.float64)
                        for name, arr in self.arrays().items()}

    def arrays(self) -> dict[str, np.ndarray]:
        return {"ent_re": self.ent_re, "ent_im": self.ent_im,
                "rel_re": self.rel_re, "rel_im": self.rel_im, "phase": self.phase}

    @property
    def n_entities(self) -> int:
        return self.ent_re.shape[0]

    @property
    def n_tau(self) -> int:
        return self.phase.shape[0]

    @property
    def k(self) -> int:
        return self.ent_re.shape[1]

    @property
    def n_slots(self) -> int:
        return self.rel_re.shape[0]

    @property
    def relation_begin(self) -> tuple[np.ndarray, np.ndarray]:
        return self.rel_re[: self.n_relations], self.rel_im[: self.n_relations]

    @property
    def relation_end(self) -> tuple[np.ndarray, np.ndarray]:
        # Aliases the begin block on single-slot models.
        if not self.dual:
            return self.rel_re, self.rel_im
        return self.rel_re[self.n_relations:], self.rel_im[self.n_relations:]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.ent_re.copy(), self.ent_im.copy(), self.rel_re.copy(), self.rel_im.copy(),
            self.phase.copy(), self.n_relations, self.dual, self.norm_p,
            acc={k: v.copy() for k, v in self.acc.items()},
        )

    def assert_finite(self) -> None:
        for name, arr in self.arrays().items():
            if not np.isfinite(arr).all():
                raise FloatingPointError(f"non-finite values in {name}")


def init_params(n_entities: int, n_relations: int, n_tau: int, k: int, dual: bool,
                seed: int, norm_p: int = 1, dtype=np.float32) -> ModelParams:
    """Seeded uniform initialization.

    Entity/relation components are uniform in +-6/sqrt(2k) per real and
    imaginary part; phases are uniform in [0, 2*pi). Accumulators start at
    zero. Identical seeds give bit-identical parameters.
    """
    if min(n_entities, n_relations, n_tau, k) < 1:
        raise ValueError("all dimensions must be at least 1")
    if norm_p not in (1, 2):
        raise ValueError(f"norm_p must be 1 or 2, got {norm_p}")
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(2 * k)
    n_slots = 2 * n_relations if dual else n_relations
    ent_re = rng.uniform(-bound, bound, (n_entities, k))
    ent_im = rng.uniform(-bound, bound, (n_entities, k))
    rel_re = rng.uniform(-bound, bound, (n_slots, k))
    rel_im = rng.uniform(-bound, bound, (n_slots, k))
    phase = rng.uniform(0.0, 2.0 * np.pi, (n_tau, k))
    return ModelParams(*(a.astype(dtype) for a in (ent_re, ent_im, rel_re, rel_im, phase)),
                       n_relations=n_relations, dual=dual, norm_p=norm_p)


def param_count(params: ModelParams) -> int:
    """Trainable scalar count (accumulators excluded).

    2*n_e*k entity components + 2*n_slots*k relation components + n_tau*k
    phases, where n_slots is 2*n_relations on dual models.
    """
    n_e, k = params.ent_re.shape
    return 2 * n_e * k + 2 * params.n_slots * k + params.n_tau * k


def rotate(re: np.ndarray, im: np.ndarray,
           phase: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise complex rotation (re + i*im) * e^{i*phase}.

    Preserves the modulus of every coordinate exactly up to float rounding.
    """
    re, im, phase = np.asarray(re, float), np.asarray(im, float), np.asarray(phase, float)
    if re.shape != im.shape or re.shape[-1] != phase.shape[-1]:
        raise ValueError(f"shape mismatch: re {re.shape}, im {im.shape}, phase {phase.shape}")
    c, s = np.cos(phase), np.sin(phase)
    return re * c - im * s, re * s + im * c


def _norm(d_re: np.ndarray, d_im: np.ndarray, p: int) -> np.ndarray:
    """p-norm of a complex difference vector over its 2k real coordinates."""
    if p == 1:
        return np.abs(d_re).sum(axis=-1) + np.abs(d_im).sum(axis=-1)
    return np.sqrt((d_re * d_re).sum(axis=-1) + (d_im * d_im).sum(axis=-1))


def score_quads(params: ModelParams, s: np.ndarray, slot: np.ndarray,
                o: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Vectorized endpoint scores for index arrays of equal length.

    Computed in float64 whatever the storage dtype, so scores are safe to
    compare for ranking.
    """
    c, sn = np.cos(params.phase[tau].astype(np.float64)), \
        np.sin(params.phase[tau].astype(np.float64))
    s_re, s_im = params.ent_re[s].astype(np.float64), params.ent_im[s].astype(np.float64)
    o_re, o_im = params.ent_re[o].astype(np.float64), params.ent_im[o].astype(np.float64)
    # conj(rot(o)) flips the sign of the rotated imaginary part, hence the +.
    d_re = (s_re - o_re) * c - (s_im - o_im) * sn + params.rel_re[slot]
    d_im = (s_re + o_re) * sn + (s_im + o_im) * c + params.rel_im[slot]
    return _norm(d_re, d_im, params.norm_p)


def _check_ids(params: ModelParams, s: int, slot: int, o: int, tau: int) -> None:
    if not (0 <= s < params.n_entities and 0 <= o < params.n_entities):
        raise IndexError(f"entity id out of range: s={s}, o={o}, n={params.n_entities}")
    if not 0 <= slot < params.n_slots:
        raise IndexError(f"relation slot {slot} out of range (n_slots={params.n_slots})")
    if not 0 <= tau < params.n_tau:
        raise IndexError(f"time step {tau} out of range (n_tau={params.n_tau})")


def score_point(params: ModelParams, s: int, slot: int, o: int, tau: int) -> float:
    """Score of a single endpoint quadruple. Non-negative; lower is better."""
    _check_ids(params, s, slot, o, tau)
    return float(score_quads(params, np.array([s]), np.array([slot]),
                             np.array([o]), np.array([tau]))[0])


def score_fact(params: ModelParams, quad: Quadruple, binning: TimeBinning) -> float:
    """Score a fact as the mean of its endpoint-term scores.

    Intervals average the begin and end quadruples; half-open annotations
    score only the known endpoint; point facts on dual models average both
    slots at the same step.
    """
    terms = endpoint_terms(quad, binning, params.dual, params.n_relations)
    return float(np.mean([score_point(params, quad.subject, slot, quad.object, tau)
                          for slot, tau in terms]))


def score_all_objects(params: ModelParams, s: int, slot: int, tau: int) -> np.ndarray:
    """Endpoint scores with every entity substituted as the object."""
    _check_ids(params, s, slot, 0, tau)
    s_re, s_im = rotate(params.ent_re[s], params.ent_im[s], params.phase[tau])
    o_re, o_im = rotate(params.ent_re, params.ent_im, params.phase[tau])
    d_re = s_re + params.rel_re[slot] - o_re
    d_im = s_im + params.rel_im[slot] + o_im
    return _norm(d_re, d_im, params.norm_p)


def score_all_subjects(params: ModelParams, slot: int, o: int, tau: int) -> np.ndarray:
    """Endpoint scores with every entity substituted as the subject."""
    _check_ids(params, 0, slot, o, tau)
    o_re, o_im = rotate(params.ent_re[o], params.ent_im[o], params.phase[tau])
    s_re, s_im = rotate(params.ent_re, params.ent_im, params.phase[tau])
    d_re = s_re + params.rel_re[slot] - o_re
    d_im = s_im + params.rel_im[slot] + o_im
    return _norm(d_re, d_im, params.norm_p)


def save_checkpoint(params: ModelParams, path, vocab_ref: str = "") -> None:
    """Write the binary checkpoint.

    Layout: magic ``TERO``, then little-endian u32 header (version, n_e, n_r,
    n_tau, k, dual, p), then float32 little-endian arrays in fixed order
    (entity re, entity im, begin-relation re/im, end-relation re/im, phases),
    then a u32-length-prefixed UTF-8 vocab sidecar reference.
    """
    head = struct.pack("<7I", CHECKPOINT_VERSION, params.n_entities, params.n_relations,
                       params.n_tau, params.k, int(params.dual), params.norm_p)
    rb_re, rb_im = params.relation_begin
    re_re, re_im = params.relation_end
    ref = vocab_ref.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(head)
        for arr in (params.ent_re, params.ent_im, rb_re, rb_im, re_re, re_im, params.phase):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(ref)))
        fh.write(ref)


def load_checkpoint(path) -> tuple[ModelParams, str]:
    """Read a checkpoint; returns fresh params (zero accumulators) + vocab ref."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a TeRo checkpoint")
    version, n_e, n_r, n_tau, k, dual_flag, p = struct.unpack_from("<7I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    dual = bool(dual_flag)
    off = 4 + 7 * 4

    def take(rows: int) -> np.ndarray:
        nonlocal off
        n = rows * k
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float32)
        off += n * 4
        return arr.reshape(rows, k)

    ent_re, ent_im = take(n_e), take(n_e)
    rb_re, rb_im = take(n_r), take(n_r)
    re_re, re_im = take(n_r), take(n_r)
    phase = take(n_tau)
    if dual:
        rel_re = np.concatenate([rb_re, re_re])
        rel_im = np.concatenate([rb_im, re_im])
    else:
        rel_re, rel_im = rb_re, rb_im
    (ref_len,) = struct.unpack_from("<I", blob, off)
    ref = blob[off + 4: off + 4 + ref_len].decode("utf-8")
    params = ModelParams(ent_re, ent_im, rel_re, rel_im, phase,
                         n_relations=n_r, dual=dual, norm_p=p)
    return params, ref
