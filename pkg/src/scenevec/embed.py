"""Embedding tables, the ten pairwise objectives, and minibatch training.

A static table is |O| x |e|; a temporal table is |O| x |T| x |e|.  Both are
trained by plain minibatch gradient descent on per-pair squared errors of the
form (a * dist - b)^2, where dist is a cosine distance between plain,
per-timestamp, or temporally diffused vectors, and (a, b) fold in the
discrepancy target and the frequency weighting of the chosen objective.
Gradients are exact closed forms, not autodiff.
"""

from __future__ import annotations

import base64
import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .corpus import Corpus
from .scoring import (DEFAULT_EPSILON, DEFAULT_SIGMA_T, DiffusionKernel,
                      FrequencyNormalizer)
from .context import TrainingPair

STATIC_OBJECTIVES = ("t1s",)
TEMPORAL_OBJECTIVES = ("t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9")
OBJECTIVES = STATIC_OBJECTIVES + TEMPORAL_OBJECTIVES

# Objectives whose distance runs over diffused vectors instead of one slice.
_DIFFUSED = frozenset(TEMPORAL_OBJECTIVES) - {"t1"}
# Objectives that need normalized frequencies.
_NEEDS_FREQ = frozenset(("t3", "t4", "t5", "t6", "t7", "t8", "t9"))

_NORM_FLOOR = 1e-12  # keeps training finite if a vector passes near zero


class TrainingError(RuntimeError):
    """Raised when the loss turns non-finite during training."""


def cosine_distance(x: np.ndarray, y: np.ndarray) -> float:
    """1 - cosine similarity; 0 for aligned vectors, 1 for orthogonal ones."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 1:
        raise ValueError("cosine distance needs two equal-length vectors")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("cosine distance undefined for a zero vector")
    return float(1.0 - float(x @ y) / (nx * ny))


@dataclass
class StaticEmbedding:
    """One vector per label."""

    labels: list[str]
    table: np.ndarray
    loss_trace: list[float] = field(default_factory=list, repr=False)
    objective: str | None = None

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.ndim != 2 or self.table.shape[0] != len(self.labels):
            raise ValueError("static table must be (labels, dim)")

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    @property
    def n_labels(self) -> int:
        return self.table.shape[0]

    def vector(self, label: int) -> np.ndarray:
        return self.table[label]


@dataclass
class TemporalEmbedding:
    """One vector per label per timestamp."""

    labels: list[str]
    table: np.ndarray
    loss_trace: list[float] = field(default_factory=list, repr=False)
    objective: str | None = None

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.float64)
        if self.table.ndim != 3 or self.table.shape[0] != len(self.labels):
            raise ValueError("temporal table must be (labels, timestamps, dim)")

    @property
    def dim(self) -> int:
        return self.table.shape[2]

    @property
    def n_labels(self) -> int:
        return self.table.shape[0]

    @property
    def n_timestamps(self) -> int:
        return self.table.shape[1]

    def vector(self, label: int, t: int) -> np.ndarray:
        return self.table[label, t]

    def slice_at(self, t: int) -> np.ndarray:
        """(labels, dim) view of one timestamp."""
        return self.table[:, t, :]


def diffused_vector(emb: TemporalEmbedding, label: int, t_r: int,
                    kernel: DiffusionKernel) -> np.ndarray:
    """Kernel-weighted sum of one object's vectors across all timestamps.

    No normalization: downstream cosine distances are scale invariant, so a
    normalizer would cancel anyway.
    """
    if not 0 <= label < emb.n_labels:
        raise IndexError(f"label id {label} out of range")
    if not 0 <= t_r < emb.n_timestamps:
        raise IndexError(f"timestamp {t_r} out of range")
    w = kernel.matrix(emb.n_timestamps)[t_r]
    return w @ emb.table[label]


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "t1"
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 256
    seed: int = 0
    dim: int = 32
    sigma_t: float = DEFAULT_SIGMA_T
    sigma_f: float | None = None
    epsilon: float = DEFAULT_EPSILON
    optimizer: str = "sgd"

    def __post_init__(self):
        obj = self.objective.lower()
        if obj != self.objective:
            object.__setattr__(self, "objective", obj)
        if obj not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs cannot be negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class ScoringContext:
    """Per-corpus terms the objectives need: diffusion weights and
    normalized frequencies."""

    weights: np.ndarray          # (T, T) diffusion matrix
    nfreq: np.ndarray | None     # (O, T) normalized frequency, None for t1s/t1/t2

    @classmethod
    def from_corpus(cls, corpus: Corpus, objective: str,
                    sigma_t: float = DEFAULT_SIGMA_T,
                    sigma_f: float | None = None,
                    epsilon: float = DEFAULT_EPSILON) -> "ScoringContext":
        weights = DiffusionKernel(sigma_t).matrix(corpus.n_timestamps)
        nfreq = None
        if objective.lower() in _NEEDS_FREQ:
            nfreq = FrequencyNormalizer(corpus.freq, sigma_f, epsilon).table
        return cls(weights=weights, nfreq=nfreq)


def _coefficients(objective: str, deltas: np.ndarray, n_r: np.ndarray | None,
                  n_c: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Scale a and target b such that the per-pair loss is (a*dist - b)^2."""
    ones = np.ones_like(deltas)
    if objective in ("t1s", "t1", "t2"):
        return ones, deltas.copy()
    s = n_r + n_c
    if objective == "t3":
        return s, deltas.copy()
    if objective == "t4":
        return ones, (2.0 - s) * deltas
    p_avg = 0.5 * s
    p_min = np.minimum(n_r, n_c)
    if objective == "t5":
        return ones, (1.0 - p_avg) * deltas
    if objective == "t6":
        return ones, (1.0 - p_min) * deltas
    if objective == "t7":
        return ones, (1.0 - 0.5 * p_min) * deltas
    if objective == "t8":
        return ones, 2.0 * np.log(1.5 / p_min) * deltas
    if objective == "t9":
        w = np.log(1.5 / p_avg)
        return ones, np.where(p_avg > 0.5, w, 2.0 * w) * deltas
    raise ValueError(f"unknown objective {objective!r}")


def _check_family(objective: str, pairs) -> None:
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    temporal = objective in TEMPORAL_OBJECTIVES
    for p in pairs:
        if temporal and p.t_ref is None:
            raise ValueError(
                f"objective {objective} needs temporal pairs but got a static pair")
        if not temporal and p.t_ref is not None:
            raise ValueError(
                f"objective {objective} is static but pair carries t_ref={p.t_ref}")


def _pair_arrays(objective: str, pairs) -> tuple[np.ndarray, ...]:
    refs = np.fromiter((p.ref for p in pairs), dtype=np.int64, count=len(pairs))
    ctxs = np.fromiter((p.ctx for p in pairs), dtype=np.int64, count=len(pairs))
    deltas = np.fromiter((p.delta for p in pairs), dtype=np.float64, count=len(pairs))
    if objective in STATIC_OBJECTIVES:
        ts = np.zeros(len(pairs), dtype=np.int64)
    else:
        ts = np.fromiter((p.t_ref for p in pairs), dtype=np.int64, count=len(pairs))
    return refs, ctxs, ts, deltas


def _targets(objective: str, ctx: ScoringContext | None, refs, ctxs, ts, deltas):
    if objective in _NEEDS_FREQ:
        if ctx is None or ctx.nfreq is None:
            raise ValueError(f"objective {objective} needs normalized frequencies")
        n_r = ctx.nfreq[refs, ts]
        n_c = ctx.nfreq[ctxs, ts]
    else:
        n_r = n_c = None
    return _coefficients(objective, deltas, n_r, n_c)


def _forward(objective: str, table: np.ndarray, ctx: ScoringContext | None,
             refs, ctxs, ts) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Vectors entering the cosine distance for each pair, plus the diffusion
    rows when the objective diffuses."""
    if objective in STATIC_OBJECTIVES:
        return table[refs], table[ctxs], None
    if objective == "t1":
        return table[refs, ts], table[ctxs, ts], None
    if ctx is None:
        raise ValueError("diffused objectives need a scoring context")
    rows = ctx.weights[ts]                                   # (B, T)
    u = np.einsum("bt,bte->be", rows, table[refs])
    v = np.einsum("bt,bte->be", rows, table[ctxs])
    return u, v, rows


def _distance_and_grads(u, v, a, b):
    """Per-pair losses and gradients with respect to u and v."""
    nu = np.maximum(np.linalg.norm(u, axis=1), _NORM_FLOOR)
    nv = np.maximum(np.linalg.norm(v, axis=1), _NORM_FLOOR)
    dot = np.einsum("be,be->b", u, v)
    cos = dot / (nu * nv)
    dist = 1.0 - cos
    resid = a * dist - b
    losses = resid * resid
    coef = 2.0 * a * resid
    inv_uv = 1.0 / (nu * nv)
    gu = coef[:, None] * (cos[:, None] * u / (nu * nu)[:, None] - v * inv_uv[:, None])
    gv = coef[:, None] * (cos[:, None] * v / (nv * nv)[:, None] - u * inv_uv[:, None])
    return losses, gu, gv


def _scatter(objective: str, grad: np.ndarray, refs, ctxs, ts, rows, gu, gv,
             n_labels: int) -> None:
    """Accumulate per-pair vector gradients into the table gradient.

    One-hot matmuls instead of add.at: the label set is small, so this stays
    in BLAS and is an order of magnitude faster.
    """
    bsz = len(refs)
    if objective in STATIC_OBJECTIVES:
        onehot = np.zeros((bsz, n_labels))
        onehot[np.arange(bsz), refs] = 1.0
        grad += onehot.T @ gu
        onehot[:] = 0.0
        onehot[np.arange(bsz), ctxs] = 1.0
        grad += onehot.T @ gv
        return
    n_t = grad.shape[1]
    if objective == "t1":
        flat = grad.reshape(n_labels * n_t, -1)
        onehot = np.zeros((bsz, n_labels * n_t))
        onehot[np.arange(bsz), refs * n_t + ts] = 1.0
        flat += onehot.T @ gu
        onehot[:] = 0.0
        onehot[np.arange(bsz), ctxs * n_t + ts] = 1.0
        flat += onehot.T @ gv
        return
    # Diffused: each pair touches all timestamps of both objects, weighted
    # by its diffusion row.
    dim = grad.shape[2]
    flat = grad.reshape(n_labels, n_t * dim)
    contrib = (rows[:, :, None] * gu[:, None, :]).reshape(bsz, n_t * dim)
    onehot = np.zeros((bsz, n_labels))
    onehot[np.arange(bsz), refs] = 1.0
    flat += onehot.T @ contrib
    contrib = (rows[:, :, None] * gv[:, None, :]).reshape(bsz, n_t * dim)
    onehot[:] = 0.0
    onehot[np.arange(bsz), ctxs] = 1.0
    flat += onehot.T @ contrib


def loss(objective: str, pair: TrainingPair, emb, ctx: ScoringContext | None = None) -> float:
    """Squared error of a single pair under one objective."""
    objective = objective.lower()
    _check_family(objective, [pair])
    refs, ctxs, ts, deltas = _pair_arrays(objective, [pair])
    a, b = _targets(objective, ctx, refs, ctxs, ts, deltas)
    u, v, _ = _forward(objective, emb.table, ctx, refs, ctxs, ts)
    if np.linalg.norm(u[0]) == 0.0 or np.linalg.norm(v[0]) == 0.0:
        raise ValueError("cosine distance undefined for a zero vector")
    losses, _, _ = _distance_and_grads(u, v, a, b)
    return float(losses[0])


def gradient(objective: str, pair: TrainingPair, emb,
             ctx: ScoringContext | None = None) -> np.ndarray:
    """Exact partial derivatives of the pair loss; zero outside the entries
    the pair touches."""
    objective = objective.lower()
    _check_family(objective, [pair])
    refs, ctxs, ts, deltas = _pair_arrays(objective, [pair])
    a, b = _targets(objective, ctx, refs, ctxs, ts, deltas)
    u, v, rows = _forward(objective, emb.table, ctx, refs, ctxs, ts)
    _, gu, gv = _distance_and_grads(u, v, a, b)
    grad = np.zeros_like(emb.table)
    _scatter(objective, grad, refs, ctxs, ts, rows, gu, gv, emb.n_labels)
    return grad


def mean_loss(objective: str, table: np.ndarray, ctx: ScoringContext | None,
              refs, ctxs, ts, a, b, chunk: int = 65536) -> float:
    """Mean per-pair loss over the full pair list, evaluated in chunks."""
    total = 0.0
    n = len(refs)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        u, v, _ = _forward(objective, table, ctx, refs[lo:hi], ctxs[lo:hi], ts[lo:hi])
        losses, _, _ = _distance_and_grads(u, v, a[lo:hi], b[lo:hi])
        total += float(losses.sum())
    return total / n


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, table: np.ndarray, grad: np.ndarray) -> None:
        table -= self.lr * grad


class _Adam:
    def __init__(self, lr: float, shape, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, table: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        table -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def train(pairs: list[TrainingPair], config: TrainConfig,
          corpus: Corpus) -> StaticEmbedding | TemporalEmbedding:
    """Fit an embedding table to the pair list by minibatch descent.

    The table starts uniform in [0, 1) from the config seed; each epoch
    shuffles the pairs and applies per-batch mean gradients.  The returned
    embedding carries a loss_trace with the full-data mean loss at
    initialization and after each epoch.
    """
    if not pairs:
        raise ValueError("cannot train on an empty pair list")
    objective = config.objective
    _check_family(objective, pairs)
    n_labels = corpus.n_labels
    for p in pairs:
        if not (0 <= p.ref < n_labels and 0 <= p.ctx < n_labels):
            raise ValueError(f"pair references unknown label id ({p.ref}, {p.ctx})")
        if p.t_ref is not None and not 0 <= p.t_ref < corpus.n_timestamps:
            raise ValueError(f"pair timestamp {p.t_ref} out of range")

    static = objective in STATIC_OBJECTIVES
    ctx = None if static else ScoringContext.from_corpus(
        corpus, objective, config.sigma_t, config.sigma_f, config.epsilon)
    rng = np.random.default_rng(config.seed)
    if static:
        table = rng.random((n_labels, config.dim))
    else:
        table = rng.random((n_labels, corpus.n_timestamps, config.dim))

    refs, ctxs, ts, deltas = _pair_arrays(objective, pairs)
    a, b = _targets(objective, ctx, refs, ctxs, ts, deltas)

    trace = [mean_loss(objective, table, ctx, refs, ctxs, ts, a, b)]
    opt = _Sgd(config.learning_rate) if config.optimizer == "sgd" \
        else _Adam(config.learning_rate, table.shape)
    n = len(pairs)
    grad = np.zeros_like(table)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            sel = order[lo:lo + config.batch_size]
            u, v, rows = _forward(objective, table, ctx, refs[sel], ctxs[sel], ts[sel])
            _, gu, gv = _distance_and_grads(u, v, a[sel], b[sel])
            grad[:] = 0.0
            _scatter(objective, grad, refs[sel], ctxs[sel], ts[sel], rows,
                     gu, gv, n_labels)
            grad /= len(sel)
            opt.step(table, grad)
        trace.append(mean_loss(objective, table, ctx, refs, ctxs, ts, a, b))
        if not math.isfinite(trace[-1]):
            raise TrainingError(f"loss became non-finite at epoch {epoch}")

    emb = StaticEmbedding(list(corpus.labels), table) if static \
        else TemporalEmbedding(list(corpus.labels), table)
    emb.loss_trace = trace
    emb.objective = objective
    return emb


def save_embedding(emb: StaticEmbedding | TemporalEmbedding,
                   path: str | os.PathLike,
                   objective: str | None = None,
                   config: TrainConfig | None = None) -> None:
    """JSON header plus base64 row-major little-endian float64 payload."""
    temporal = isinstance(emb, TemporalEmbedding)
    data = np.ascontiguousarray(emb.table, dtype="<f8")
    doc = {
        "kind": "temporal" if temporal else "static",
        "dim": emb.dim,
        "n_labels": emb.n_labels,
        "n_timestamps": emb.n_timestamps if temporal else None,
        "labels": emb.labels,
        "objective": objective if objective is not None else emb.objective,
        "loss_trace": list(emb.loss_trace),
        "config": asdict(config) if config is not None else None,
        "dtype": "<f8",
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_embedding(path: str | os.PathLike) -> StaticEmbedding | TemporalEmbedding:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        kind = doc["kind"]
        dim = int(doc["dim"])
        n_labels = int(doc["n_labels"])
        labels = list(doc["labels"])
        raw = base64.b64decode(doc["data"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed embedding file ({exc})") from exc
    if len(labels) != n_labels:
        raise ValueError(f"{path}: label table length disagrees with n_labels")
    flat = np.frombuffer(raw, dtype=doc.get("dtype", "<f8")).astype(np.float64)
    trace = [float(x) for x in doc.get("loss_trace") or []]
    objective = doc.get("objective")
    if kind == "static":
        if flat.size != n_labels * dim:
            raise ValueError(f"{path}: payload size disagrees with header dims")
        emb = StaticEmbedding(labels, flat.reshape(n_labels, dim))
    elif kind == "temporal":
        n_t = int(doc["n_timestamps"])
        if flat.size != n_labels * n_t * dim:
            raise ValueError(f"{path}: payload size disagrees with header dims")
        emb = TemporalEmbedding(labels, flat.reshape(n_labels, n_t, dim))
    else:
        raise ValueError(f"{path}: unknown embedding kind {kind!r}")
    emb.loss_trace = trace
    emb.objective = objective
    return emb
