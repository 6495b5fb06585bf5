"""Evaluation metrics over embeddings: neighbor rankings, clustering scores,
similarity series, PCA projection, and the context classifier.

Everything here is a pure read over immutable embeddings and corpora.
Neighbor and pair rankings break ties by label id so results are stable
across runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .corpus import Corpus
from .embed import StaticEmbedding, TemporalEmbedding


@dataclass(frozen=True)
class NeighborList:
    """Ranked neighbors of one query label.

    For embedding neighbors, score is cosine similarity (nonincreasing); for
    base neighbors, score is mean spatial distance (nondecreasing).
    """

    query: int
    t: int | None
    neighbors: tuple[tuple[int, float], ...]

    def labels(self) -> list[int]:
        return [n for n, _ in self.neighbors]


def _as_matrix(emb, t: int | None) -> np.ndarray:
    if isinstance(emb, TemporalEmbedding):
        if t is None:
            raise ValueError("temporal embedding needs a timestamp")
        return emb.slice_at(t)
    if isinstance(emb, StaticEmbedding):
        return emb.table
    m = np.asarray(emb, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected an embedding or a (labels, dim) matrix")
    return m


def _cosine_sims(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    nq = np.linalg.norm(q)
    if nq == 0.0:
        raise ValueError("query vector is all zero")
    norms = np.linalg.norm(matrix, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (matrix @ q) / (norms * nq)
    # degenerate zero rows can never be similar to anything
    return np.where(np.isfinite(sims), sims, -1.0)


def nearest_neighbors(emb, query: int, t: int | None = None, k: int = 10) -> NeighborList:
    """Top-k labels by cosine similarity to the query (query excluded)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    m = _as_matrix(emb, t)
    if not 0 <= query < m.shape[0]:
        raise KeyError(f"unknown label id {query}")
    sims = _cosine_sims(m, m[query])
    order = np.lexsort((np.arange(len(sims)), -sims))
    ranked = [(int(i), float(sims[i])) for i in order if i != query]
    return NeighborList(query, t, tuple(ranked[:k]))


def base_neighbors(corpus: Corpus, query: int, t: int, k: int = 10) -> NeighborList:
    """Labels ranked by ascending mean same-frame distance to the query
    within one timestamp.  Labels never sharing a frame with the query in
    that timestamp get no rank."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= query < corpus.n_labels:
        raise KeyError(f"unknown label id {query}")
    sums = np.zeros(corpus.n_labels)
    counts = np.zeros(corpus.n_labels, dtype=np.int64)
    seen = False
    for f in corpus.frames_of(t):
        insts = corpus.frames[f]
        queries = [o for o in insts if o.label == query]
        if not queries:
            continue
        seen = True
        for q in queries:
            for o in insts:
                if o.label == query:
                    continue
                d = float(np.hypot(q.cx - o.cx, q.cy - o.cy))
                sums[o.label] += d
                counts[o.label] += 1
    if not seen:
        raise ValueError(f"label {query} does not occur in timestamp {t}")
    present = np.flatnonzero(counts)
    means = sums[present] / counts[present]
    order = np.lexsort((present, means))
    ranked = [(int(present[i]), float(means[i])) for i in order]
    return NeighborList(query, t, tuple(ranked[:k]))


def hit_at_k(emb: TemporalEmbedding, corpus: Corpus, k: int,
             sample: list[tuple[int, int]] | None = None) -> float:
    """Mean overlap fraction between base and embedding top-k neighbor sets.

    The default sample is every (label, timestamp) pair where the label
    occurs; the divisor is k even when fewer than k base neighbors exist.
    """
    if sample is None:
        sample = [(int(o), int(t))
                  for o in range(corpus.n_labels)
                  for t in range(corpus.n_timestamps)
                  if corpus.freq[o, t] > 0]
    if not sample:
        raise ValueError("empty evaluation sample")
    total = 0.0
    for label, t in sample:
        base = set(base_neighbors(corpus, label, t, k).labels())
        found = set(nearest_neighbors(emb, label, t, k).labels())
        total += len(base & found) / k
    return total / len(sample)


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero vector cannot be clustered under cosine distance")
    return x / norms[:, None]


def _kmeans_once(unit: np.ndarray, k: int, rng: np.random.Generator,
                 max_iter: int = 100) -> tuple[np.ndarray, float] | None:
    """One spherical k-means run; None when a cluster empties."""
    n = unit.shape[0]
    # k-means++-style seeding on cosine distance
    centers = np.empty((k, unit.shape[1]))
    first = int(rng.integers(n))
    centers[0] = unit[first]
    d2 = np.maximum(1.0 - unit @ centers[0], 0.0) ** 2
    for j in range(1, k):
        s = d2.sum()
        if s <= 0.0:
            return None  # fewer distinct points than clusters
        centers[j] = unit[int(rng.choice(n, p=d2 / s))]
        d2 = np.minimum(d2, np.maximum(1.0 - unit @ centers[j], 0.0) ** 2)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        sims = unit @ centers.T
        new_assign = np.argmax(sims, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = unit[assign == j]
            if len(members) == 0:
                return None
            c = members.mean(axis=0)
            norm = np.linalg.norm(c)
            if norm == 0.0:
                return None
            centers[j] = c / norm
    inertia = float(np.sum(1.0 - np.einsum("ij,ij->i", unit, centers[assign])))
    return assign, inertia


def kmeans_silhouette(emb, k: int, seed: int,
                      restarts: int = 10) -> tuple[np.ndarray, float]:
    """Cosine-metric k-means plus the average silhouette of the result.

    Runs `restarts` seedings and keeps the lowest-inertia assignment; a run
    that strands an empty cluster is discarded.  Singleton clusters score 0
    in the silhouette by convention.
    """
    x = _as_matrix(emb, None) if not isinstance(emb, TemporalEmbedding) else None
    if x is None:
        raise ValueError("cluster a static embedding or an explicit matrix")
    n = x.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} points into {k} clusters")
    unit = _normalize_rows(np.asarray(x, dtype=np.float64))
    if np.allclose(unit, unit[0], atol=1e-12):
        raise ValueError("all points identical; clustering is degenerate")
    best: tuple[np.ndarray, float] | None = None
    for r in range(restarts):
        got = _kmeans_once(unit, k, np.random.default_rng((seed, r)))
        if got is not None and (best is None or got[1] < best[1]):
            best = got
    if best is None:
        raise RuntimeError(f"k-means left empty clusters in all {restarts} restarts")
    assign = best[0]
    dist = np.maximum(1.0 - unit @ unit.T, 0.0)
    scores = np.zeros(n)
    sizes = np.bincount(assign, minlength=k)
    for i in range(n):
        own = assign[i]
        if sizes[own] <= 1:
            continue  # singleton convention: 0
        a = dist[i, assign == own].sum() / (sizes[own] - 1)
        b = min(dist[i, assign == j].mean() for j in range(k)
                if j != own and sizes[j] > 0)
        top = max(a, b)
        scores[i] = 0.0 if top == 0.0 else (b - a) / top
    return assign, float(scores.mean())


def rand_index(assignment, ground_truth) -> float:
    """Fraction of point pairs on which two partitions agree."""
    a = np.asarray(assignment)
    b = np.asarray(ground_truth)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("partitions must be equal-length 1-D sequences")
    n = len(a)
    if n < 2:
        raise ValueError("rand index needs at least 2 points")

    def pair_sum(counts: np.ndarray) -> float:
        return float((counts * (counts - 1) // 2).sum())

    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(joint, (ai, bi), 1)
    same_both = pair_sum(joint.ravel())
    same_a = pair_sum(joint.sum(axis=1))
    same_b = pair_sum(joint.sum(axis=0))
    all_pairs = n * (n - 1) / 2
    return (all_pairs + 2 * same_both - same_a - same_b) / all_pairs


def clustering_consistency(emb, categories, k: int) -> float:
    """Mean fraction of each label's top-k neighbors sharing its category.

    Temporal embeddings are compared on their concatenated per-timestamp
    vectors, the same per-label features the context classifier uses.
    """
    if isinstance(emb, TemporalEmbedding):
        m = emb.table.reshape(emb.n_labels, -1)
    else:
        m = _as_matrix(emb, None)
    n = m.shape[0]
    if hasattr(categories, "__getitem__") and not isinstance(categories, dict):
        cats = {i: categories[i] for i in range(n)}
    else:
        cats = dict(categories)
    missing = [i for i in range(n) if i not in cats]
    if missing:
        raise KeyError(f"labels without a category: {missing[:5]}")
    total = 0.0
    for i in range(n):
        nn = nearest_neighbors(m, i, None, k)
        got = nn.labels()
        if not got:
            raise ValueError("consistency undefined with a single label")
        total += sum(1 for j in got if cats[j] == cats[i]) / len(got)
    return total / n


def spearman(rank_a, rank_b) -> float:
    """Spearman rho with average ranks for ties."""
    a = np.asarray(rank_a, dtype=np.float64)
    b = np.asarray(rank_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("rankings must be equal-length 1-D sequences")
    if len(a) < 2:
        raise ValueError("spearman needs at least 2 items")
    rho = stats.spearmanr(a, b).statistic
    return float(rho)


def similarity_series(emb: TemporalEmbedding, a: int, b: int) -> list[float]:
    """Cosine similarity of two labels' vectors at each timestamp."""
    if not (0 <= a < emb.n_labels and 0 <= b < emb.n_labels):
        raise KeyError(f"unknown label id in pair ({a}, {b})")
    va = emb.table[a]
    vb = emb.table[b]
    na = np.linalg.norm(va, axis=1)
    nb = np.linalg.norm(vb, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise ValueError("similarity undefined for a zero vector")
    return [float(s) for s in np.einsum("te,te->t", va, vb) / (na * nb)]


def top_pairs(emb: TemporalEmbedding, t: int, m: int) -> list[tuple[int, int, float]]:
    """m highest-similarity unordered label pairs at one timestamp."""
    if m < 1:
        raise ValueError("m must be >= 1")
    mtx = emb.slice_at(t)
    n = mtx.shape[0]
    norms = np.linalg.norm(mtx, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (mtx @ mtx.T) / np.outer(norms, norms)
    sims = np.where(np.isfinite(sims), sims, -1.0)
    iu, ju = np.triu_indices(n, k=1)
    vals = sims[iu, ju]
    order = np.lexsort((ju, iu, -vals))
    return [(int(iu[o]), int(ju[o]), float(vals[o])) for o in order[:m]]


NARRATIVE_HEADER = ("A security camera captured the following object pairs "
                    "at different time, can you summarize the video:")


def narrative_prompt(emb: TemporalEmbedding, m_per_t: int) -> str:
    """Plain-text prompt listing the top pairs of every timestamp."""
    if m_per_t < 0:
        raise ValueError("m_per_t cannot be negative")
    lines = [NARRATIVE_HEADER]
    if m_per_t == 0:
        warnings.warn("narrative prompt with no pairs per timestamp", stacklevel=2)
    else:
        for t in range(emb.n_timestamps):
            pairs = top_pairs(emb, t, m_per_t)
            body = ", ".join(f"({emb.labels[i]}, {emb.labels[j]})" for i, j, _ in pairs)
            lines.append(f"Time {t + 1}: {body}")
    return "\n".join(lines) + "\n"


def pca_2d(emb, t: int | None = None) -> np.ndarray:
    """Rows projected onto the top-2 principal axes.

    Static tables and temporal slices project per label; a temporal table
    with t=None projects every (label, timestamp) vector in one shared fit,
    label-major.  Component signs follow the convention that each component's
    largest-magnitude coordinate is positive.
    """
    if isinstance(emb, TemporalEmbedding) and t is None:
        x = emb.table.reshape(-1, emb.dim)
    else:
        x = _as_matrix(emb, t)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] < 2:
        raise ValueError("need at least 2 embedding dimensions")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(len(x) - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    top = vecs[:, ::-1][:, :2].T.copy()
    if len(x) < 3 or vals[::-1][1] <= 1e-12 * max(float(vals[-1]), 1.0):
        warnings.warn("input has rank < 2; second axis is degenerate", stacklevel=2)
    for row in top:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return centered @ top.T


def classify_contexts(emb: TemporalEmbedding, classes, split_seed: int,
                      train_fraction: float = 0.7, retries: int = 20) -> float:
    """Test accuracy of a nearest-centroid scene classifier on per-object
    features built by concatenating the object's vectors over all timestamps."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be inside (0, 1)")
    n = emb.n_labels
    if hasattr(classes, "__getitem__") and not isinstance(classes, dict):
        cats = {i: classes[i] for i in range(n)}
    else:
        cats = dict(classes)
    missing = [i for i in range(n) if i not in cats]
    if missing:
        raise KeyError(f"labels without a class: {missing[:5]}")
    names = sorted(set(cats.values()))
    if len(names) < 2:
        raise ValueError("classification needs at least 2 classes")
    feats = _normalize_rows(emb.table.reshape(n, -1).copy())
    rng = np.random.default_rng(split_seed)
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    for _ in range(retries):
        perm = rng.permutation(n)
        train_ids, test_ids = perm[:n_train], perm[n_train:]
        if {cats[int(i)] for i in train_ids} != set(names):
            continue
        centroids = np.stack([
            feats[[i for i in train_ids if cats[int(i)] == c]].mean(axis=0)
            for c in names])
        sims = feats[test_ids] @ _normalize_rows(centroids).T
        predicted = [names[j] for j in np.argmax(sims, axis=1)]
        actual = [cats[int(i)] for i in test_ids]
        return sum(p == a for p, a in zip(predicted, actual)) / len(test_ids)
    raise RuntimeError(f"no split covered every class in {retries} tries")
