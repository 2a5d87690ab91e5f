"""Sample-level pathway activity and its evaluation suite.

Activity is the matrix product of latent activations with a dimensions x
pathways weight matrix holding the normalized enrichment score of every
(pathway, dimension) pair — untested pairs contribute zero.  Downstream:
seeded K-means, Adjusted Rand Index against reference labels, and per-
pathway Wilcoxon rank-sum differential tables with Benjamini-Hochberg
adjustment.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightMatrix:
    """Dimensions x pathways NES weights; zero-filled where untested."""

    values: np.ndarray  # (D, M)
    set_ids: tuple
    n_filled: int = 0  # count of (dimension, set) pairs lacking a record

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "set_ids", tuple(self.set_ids))
        if values.ndim != 2 or values.shape[1] != len(self.set_ids):
            raise ValueError(f"values shape {values.shape} inconsistent with set ids")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite weights")

    @property
    def n_dims(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class ActivityMatrix:
    sample_ids: tuple
    set_ids: tuple
    values: np.ndarray  # (N, M)
    standardized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "set_ids", tuple(self.set_ids))
        if values.shape != (len(self.sample_ids), len(self.set_ids)):
            raise ValueError(f"values shape {values.shape} inconsistent with ids")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite activity values")


@dataclass(frozen=True)
class ClusterEvaluation:
    k: int
    labels: tuple
    reference_labels: tuple
    ari: float
    inertia: float
    seed: int
    n_restarts: int
    n_excluded: int = 0
    ari_bootstrap_sd: float = 0.0


def nes_weight_matrix(enrichment):
    """Collect per-dimension NES values into a D x M weight matrix.

    ``enrichment`` is a ModelEnrichment or any sequence of EnrichmentTable.
    Sets skipped in a dimension (no overlap, undefined NES) get weight 0
    there; the number of such filled cells is reported on the result.
    """
    tables = getattr(enrichment, "tables", enrichment)
    if not tables:
        raise ValueError("no enrichment tables given")
    set_ids = sorted({r.set_id for t in tables for r in t.records})
    if not set_ids:
        raise ValueError("no scored sets in any dimension")
    col = {s: j for j, s in enumerate(set_ids)}
    w = np.zeros((len(tables), len(set_ids)))
    filled = len(tables) * len(set_ids)
    for k, t in enumerate(tables):
        for r in t.records:
            w[k, col[r.set_id]] = r.nes
            filled -= 1
    return WeightMatrix(w, tuple(set_ids), n_filled=filled)


def activity_scores(z, w, standardize=False):
    """Pathway activity per sample: plain matrix product of latents and weights.

    With ``standardize`` each pathway column is z-scored across samples
    (population sd; constant columns become zero).
    """
    if z.values.shape[1] != w.n_dims:
        raise ValueError(
            f"latent width {z.values.shape[1]} != weight matrix dimensions {w.n_dims}"
        )
    a = z.values @ w.values
    if standardize:
        mu = a.mean(axis=0)
        sd = a.std(axis=0)
        sd_safe = np.where(sd > 0.0, sd, 1.0)
        a = (a - mu) / sd_safe
    return ActivityMatrix(tuple(z.sample_ids), w.set_ids, a, standardized=standardize)


def _farthest_point_seeds(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        centers[j] = x[int(np.argmax(d2))]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def kmeans(a, k, seed=0, n_restarts=20, max_iter=300):
    """Seeded Lloyd iterations with greedy farthest-point seeding.

    Best-inertia solution over ``n_restarts`` runs; ties and all other
    choices are index-deterministic, so a fixed seed reproduces labels
    exactly.  Empty clusters are re-seeded from the farthest point.
    Returns ``(labels, inertia)``.
    """
    x = a.values if isinstance(a, ActivityMatrix) else np.asarray(a, dtype=np.float64)
    n = x.shape[0]
    n_distinct = np.unique(x, axis=0).shape[0]
    if not 2 <= k <= n:
        raise ValueError(f"k must be in [2, {n}], got {k}")
    if k > n_distinct:
        raise ValueError(f"k {k} exceeds number of distinct rows {n_distinct}")

    best_labels, best_inertia = None, np.inf
    for restart in range(n_restarts):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), restart)))
        centers = _farthest_point_seeds(x, k, rng)
        labels = np.full(n, -1)
        for _ in range(max_iter):
            d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = np.argmin(d2, axis=1)
            for j in range(k):
                mask = new_labels == j
                if not np.any(mask):
                    far = int(np.argmax(d2[np.arange(n), new_labels]))
                    centers[j] = x[far]
                    new_labels[far] = j
                    mask = new_labels == j
                centers[j] = x[mask].mean(axis=0)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        inertia = float(d2[np.arange(n), labels].sum())
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels
    return best_labels, best_inertia


def adjusted_rand_index(labels_a, labels_b):
    """Chance-corrected partition agreement from the pair-count contingency table."""
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise ValueError(f"label lengths differ: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 samples")
    table = {}
    for x, y in zip(a, b):
        table[(x, y)] = table.get((x, y), 0) + 1
    row = {}
    col = {}
    for (x, y), c in table.items():
        row[x] = row.get(x, 0) + c
        col[y] = col.get(y, 0) + c
    comb2 = lambda v: v * (v - 1) / 2
    index = sum(comb2(c) for c in table.values())
    sum_a = sum(comb2(c) for c in row.values())
    sum_b = sum(comb2(c) for c in col.values())
    expected = sum_a * sum_b / comb2(n)
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        return 1.0 if index == expected else 0.0
    return float((index - expected) / (maximum - expected))


def _midranks(values):
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _wilcoxon_exact(scaled, n1, w_obs_scaled):
    """Exact two-sided p over all group assignments, by integer subset-sum DP."""
    n = len(scaled)
    mu2 = n1 * (n + 1)  # scaled ranks sum to n(n+1); group-1 null mean is n1(n+1)
    dev = abs(w_obs_scaled - mu2)
    dp = [dict() for _ in range(n1 + 1)]
    dp[0][0] = 1
    for v in scaled:
        for j in range(n1 - 1, -1, -1):
            if not dp[j]:
                continue
            tgt = dp[j + 1]
            for s, c in dp[j].items():
                tgt[s + v] = tgt.get(s + v, 0) + c
    total = math.comb(n, n1)
    hits = sum(c for s, c in dp[n1].items() if abs(s - mu2) >= dev)
    return hits / total


def wilcoxon_rank_sum(x, y):
    """Two-sided rank-sum test of two samples with midrank tie handling.

    The statistic is the rank sum of the first sample.  The exact
    permutation distribution (two-sided p = probability of a rank-sum at
    least as far from its null mean) is used when either sample has at most
    20 values; larger instances use the normal approximation with
    tie-corrected variance and a 0.5 continuity correction.  Identical
    pooled values give p = 1 by convention.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = len(x), len(y)
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    w = float(ranks[:n1].sum())
    n = n1 + n2
    if min(n1, n2) <= 20:
        scaled = [int(round(2 * r)) for r in ranks]
        p = _wilcoxon_exact(scaled, n1, int(round(2 * w)))
        return w, p
    mu = n1 * (n + 1) / 2
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts)) / (n * (n - 1))
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return w, 1.0
    z = max(0.0, abs(w - mu) - 0.5) / math.sqrt(var)
    return w, min(1.0, math.erfc(z / math.sqrt(2.0)))


def benjamini_hochberg(pvals):
    """Step-up FDR adjustment; output order matches input order."""
    p = np.asarray(pvals, dtype=np.float64)
    m = len(p)
    order = np.argsort(p, kind="stable")
    q = np.empty(m)
    running = 1.0
    for pos in range(m - 1, -1, -1):
        i = order[pos]
        running = min(running, p[i] * m / (pos + 1))
        q[i] = running
    return q


def differential_pathway_table(a, groups, group1, group2):
    """Per-pathway Wilcoxon test between two sample groups.

    ``groups`` maps/lists one label per sample in matrix order.  Effect is
    the difference of group medians (group1 minus group2).  Rows are sorted
    by ascending BH-adjusted q.  Returns a list of dicts with keys
    ``set_id, effect, p, q``.
    """
    if isinstance(groups, dict):
        missing = [s for s in a.sample_ids if s not in groups]
        if missing:
            raise ValueError(f"samples missing group labels: {missing[:3]}")
        lab = np.array([groups[s] for s in a.sample_ids])
    else:
        lab = np.asarray(groups)
        if lab.shape[0] != len(a.sample_ids):
            raise ValueError("one group label per sample required")
    i1 = lab == group1
    i2 = lab == group2
    if not np.any(i1):
        raise ValueError(f"group label {group1!r} absent")
    if not np.any(i2):
        raise ValueError(f"group label {group2!r} absent")

    rows = []
    for j, sid in enumerate(a.set_ids):
        x = a.values[i1, j]
        y = a.values[i2, j]
        _, p = wilcoxon_rank_sum(x, y)
        rows.append({"set_id": sid, "effect": float(np.median(x) - np.median(y)), "p": p})
    q = benjamini_hochberg([r["p"] for r in rows])
    for r, qv in zip(rows, q):
        r["q"] = float(qv)
    rows.sort(key=lambda r: (r["q"], r["p"], r["set_id"]))
    return rows


def evaluate_clustering(a, reference_labels, k=None, seed=0, n_restarts=20,
                        bootstrap_repeats=20):
    """K-means the activity matrix and score agreement with reference labels.

    Samples without a reference label are excluded pairwise and counted.
    ``k`` defaults to the number of reference categories.  A small bootstrap
    over samples estimates the ARI's spread.
    """
    if not a.standardized:
        raise ValueError("clustering expects a standardized activity matrix")
    ref = [reference_labels.get(s) for s in a.sample_ids]
    keep = [i for i, r in enumerate(ref) if r is not None]
    n_excluded = len(ref) - len(keep)
    if len(keep) < 2:
        raise ValueError("fewer than 2 samples have reference labels")
    x = a.values[keep]
    ref_kept = [ref[i] for i in keep]
    if k is None:
        k = len(set(ref_kept))
    labels, inertia = kmeans(x, k, seed=seed, n_restarts=n_restarts)
    ari = adjusted_rand_index(labels.tolist(), ref_kept)
    sd = 0.0
    if bootstrap_repeats > 0:
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 997)))
        vals = []
        for _ in range(bootstrap_repeats):
            idx = rng.integers(0, len(keep), size=len(keep))
            boot_labels = [labels[i] for i in idx]
            boot_ref = [ref_kept[i] for i in idx]
            if len(set(boot_ref)) < 2 or len(set(boot_labels)) < 2:
                continue
            vals.append(adjusted_rand_index(boot_labels, boot_ref))
        if len(vals) > 1:
            sd = float(np.std(vals))
    return ClusterEvaluation(
        k=k,
        labels=tuple(int(v) for v in labels),
        reference_labels=tuple(ref_kept),
        ari=float(ari),
        inertia=float(inertia),
        seed=int(seed),
        n_restarts=n_restarts,
        n_excluded=n_excluded,
        ari_bootstrap_sd=sd,
    )


def write_activity_matrix(a, path):
    """TSV, samples as rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["sample_id", *a.set_ids]) + "\n")
        for i, s in enumerate(a.sample_ids):
            fh.write("\t".join([s, *(repr(float(v)) for v in a.values[i])]) + "\n")


def load_activity_matrix(path, standardized=False):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        set_ids = header[1:]
        sample_ids, rows = [], []
        for line in fh:
            f = line.rstrip("\n").split("\t")
            sample_ids.append(f[0])
            rows.append([float(v) for v in f[1:]])
    return ActivityMatrix(
        tuple(sample_ids), tuple(set_ids), np.array(rows), standardized=standardized
    )


def write_weight_matrix(w, path):
    """TSV, dimensions as rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["dimension", *w.set_ids]) + "\n")
        for k in range(w.n_dims):
            fh.write("\t".join([f"dim_{k}", *(repr(float(v)) for v in w.values[k])]) + "\n")


def write_differential_table(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("set_id\teffect\tp\tq\n")
        for r in rows:
            fh.write(f"{r['set_id']}\t{repr(r['effect'])}\t{repr(r['p'])}\t{repr(r['q'])}\n")
