"""Pre-ranked gene set enrichment: running-sum ES, permutation null, NES,
nominal p, FDR q, leading edge.

The null model is gene-set permutation (uniformly random gene subsets of
matching size scored against the same ranked list) — the only label-free
option here.  Null samples depend only on set size, so they are computed
once per (dimension, size) and shared by every set of that size; each such
null draws from an independent random substream keyed by
``(seed, dimension, set_size)``, making results independent of scheduling.

Normalization follows the usual convention: ES divided by the mean of the
same-sign null ES, with positive and negative classes handled separately.
Nominal p uses add-one smoothing so finite permutation counts never produce
p = 0.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ._kernels import enrichment_scan, enrichment_scan_batch


@dataclass(frozen=True)
class GseaParams:
    weight_exponent: float = 1.0
    n_permutations: int = 1000
    seed: int = 0
    min_size: int = 15
    max_size: int = 500

    def __post_init__(self):
        if self.weight_exponent < 0:
            raise ValueError(f"weight_exponent must be >= 0, got {self.weight_exponent}")
        if self.n_permutations < 100:
            raise ValueError(f"need at least 100 permutations, got {self.n_permutations}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in uint64, got {self.seed}")

    def to_dict(self):
        return {
            "weight_exponent": self.weight_exponent,
            "n_permutations": self.n_permutations,
            "seed": int(self.seed),
            "min_size": self.min_size,
            "max_size": self.max_size,
        }


@dataclass(frozen=True)
class EnrichmentRecord:
    set_id: str
    es: float
    nes: float
    p_nominal: float
    fdr_q: float
    rank_in_dimension: int
    leading_edge: tuple
    set_size_used: int


@dataclass(frozen=True)
class EnrichmentTable:
    dimension: int
    params: GseaParams
    records: tuple  # sorted by rank_in_dimension
    skipped: tuple = field(default_factory=tuple)  # (set_id, reason)

    def record(self, set_id):
        for r in self.records:
            if r.set_id == set_id:
                return r
        return None


def _weight_vector(scores, exponent):
    if exponent == 0:
        return np.ones(len(scores))
    return np.abs(np.asarray(scores, dtype=np.float64)) ** exponent


def enrichment_score(ranked, members, weight_exponent=1.0):
    """Weighted running-sum enrichment score of one gene set.

    Returns ``(es, hit_indices, extremum_index, leading_edge)``.  Hits add
    ``|score|**exponent`` normalized by the hit-weight sum; misses subtract
    ``1/(G - hits)``; the score is the running-sum value of maximal absolute
    deviation.  The leading edge contains the hit genes at or before the
    extremum for a positive score, at or after it for a negative one.
    """
    pos = {g: i for i, g in enumerate(ranked.gene_ids)}
    hit_idx = np.array(sorted(pos[g] for g in members if g in pos), dtype=np.int64)
    if hit_idx.size == 0:
        raise ValueError("gene set has no members in the ranked list")
    if hit_idx.size == len(ranked):
        raise ValueError("degenerate set: covers the entire ranked list")
    weights = _weight_vector(ranked.scores, weight_exponent)
    es, ext = enrichment_scan(weights, hit_idx)
    if es >= 0:
        lead = tuple(ranked.gene_ids[i] for i in hit_idx if i <= ext)
    else:
        lead = tuple(ranked.gene_ids[i] for i in hit_idx if i >= ext)
    return es, hit_idx, ext, lead


def permutation_null(ranked, set_size, params):
    """Null ES sample: random same-size gene subsets against the same list.

    Seeded by ``(params.seed, ranked.dimension, set_size)`` so every
    (dimension, size) pair owns an independent, reproducible substream.
    """
    n = len(ranked)
    if not 1 <= set_size < n:
        raise ValueError(f"need 1 <= set_size < list length, got {set_size} of {n}")
    ss = np.random.SeedSequence((int(params.seed), int(ranked.dimension), int(set_size)))
    rng = np.random.default_rng(ss)
    draws = np.empty((params.n_permutations, set_size), dtype=np.int64)
    for i in range(params.n_permutations):
        draws[i] = np.sort(rng.choice(n, size=set_size, replace=False))
    weights = _weight_vector(ranked.scores, params.weight_exponent)
    return enrichment_scan_batch(weights, draws)


def nes_and_p(es, null):
    """Normalized enrichment score and nominal p against a null ES sample.

    The null is split into positive and negative values; the subsample
    matching ``sign(es)`` (zero counts as positive) normalizes and tests.
    Returns ``(None, None)`` when that subsample is empty — the caller flags
    the record instead of ranking it.
    """
    null = np.asarray(null, dtype=np.float64)
    sub = null[null > 0] if es >= 0 else null[null < 0]
    if sub.size == 0:
        return None, None
    mean_abs = float(np.mean(np.abs(sub)))
    if mean_abs == 0.0:
        return None, None
    nes = es / mean_abs
    p = (1.0 + int(np.count_nonzero(np.abs(sub) >= abs(es)))) / (1.0 + sub.size)
    return nes, p


def normalized_null(null):
    """Null ES sample rescaled by its same-sign means (the null NES sample)."""
    null = np.asarray(null, dtype=np.float64)
    pos = null[null > 0]
    neg = null[null < 0]
    out = np.zeros_like(null)
    if pos.size:
        out[null > 0] = null[null > 0] / float(np.mean(pos))
    if neg.size:
        out[null < 0] = null[null < 0] / float(np.mean(np.abs(neg)))
    return out


def fdr_qvalues(nes_values, pooled_null_nes):
    """Permutation FDR q per observed NES.

    q = (same-sign pooled-null tail fraction at |NES|) divided by the
    same-sign observed tail fraction, clamped to [0, 1] and made monotone
    non-increasing in |NES| within each sign class.
    """
    nes = np.asarray(nes_values, dtype=np.float64)
    pool = np.asarray(pooled_null_nes, dtype=np.float64)
    pool_pos = pool[pool >= 0]
    pool_neg = pool[pool < 0]
    obs_pos = nes[nes >= 0]
    obs_neg = nes[nes < 0]
    q = np.empty(len(nes))
    for i, v in enumerate(nes):
        if v >= 0:
            num = np.count_nonzero(pool_pos >= v) / pool_pos.size if pool_pos.size else 1.0
            den = np.count_nonzero(obs_pos >= v) / obs_pos.size
        else:
            num = np.count_nonzero(pool_neg <= v) / pool_neg.size if pool_neg.size else 1.0
            den = np.count_nonzero(obs_neg <= v) / obs_neg.size
        q[i] = min(1.0, max(0.0, num / den))
    # step-up monotonization: walk from weakest to strongest |NES| taking the
    # running minimum, so a larger |NES| never carries a larger q
    for mask in (nes >= 0, nes < 0):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        order = idx[np.argsort(np.abs(nes[idx]), kind="stable")]
        running = np.inf
        for j in order:
            running = min(running, q[j])
            q[j] = running
    return q


def run_preranked_gsea(ranked, collection, params):
    """Score every set of a pre-filtered collection against one ranked list."""
    pos = {g: i for i, g in enumerate(ranked.gene_ids)}
    weights = _weight_vector(ranked.scores, params.weight_exponent)
    n = len(ranked)

    tested = []
    skipped = []
    for sid, _, members in collection.sets:
        hit_idx = np.array(sorted(pos[g] for g in members if g in pos), dtype=np.int64)
        if hit_idx.size == 0:
            skipped.append((sid, "no members in ranked list"))
            continue
        if hit_idx.size == n:
            raise ValueError(f"degenerate set {sid!r}: covers the entire ranked list")
        tested.append((sid, hit_idx))

    null_cache = {}
    norm_null_cache = {}
    scored = []
    for sid, hit_idx in tested:
        size = int(hit_idx.size)
        if size not in null_cache:
            null_cache[size] = permutation_null(ranked, size, params)
            norm_null_cache[size] = normalized_null(null_cache[size])
        es, ext = enrichment_scan(weights, hit_idx)
        nes, p = nes_and_p(es, null_cache[size])
        if nes is None:
            skipped.append((sid, "no same-sign null scores; NES undefined"))
            continue
        if es >= 0:
            lead = tuple(ranked.gene_ids[i] for i in hit_idx if i <= ext)
        else:
            lead = tuple(ranked.gene_ids[i] for i in hit_idx if i >= ext)
        scored.append({"set_id": sid, "es": es, "nes": nes, "p": p,
                       "lead": lead, "size": size})

    if not scored:
        return EnrichmentTable(ranked.dimension, params, (), tuple(skipped))

    pooled = np.concatenate([norm_null_cache[s["size"]] for s in scored])
    qvals = fdr_qvalues([s["nes"] for s in scored], pooled)
    order = sorted(
        range(len(scored)),
        key=lambda i: (qvals[i], -abs(scored[i]["nes"]), scored[i]["set_id"]),
    )
    records = []
    for rank, i in enumerate(order, start=1):
        s = scored[i]
        records.append(
            EnrichmentRecord(
                set_id=s["set_id"],
                es=s["es"],
                nes=s["nes"],
                p_nominal=s["p"],
                fdr_q=float(qvals[i]),
                rank_in_dimension=rank,
                leading_edge=s["lead"],
                set_size_used=s["size"],
            )
        )
    return EnrichmentTable(ranked.dimension, params, tuple(records), tuple(skipped))


def write_enrichment_table(table, path):
    cols = ("set_id", "size", "es", "nes", "p_nominal", "fdr_q", "rank", "leading_edge")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in table.records:
            fh.write(
                "\t".join(
                    [
                        r.set_id,
                        str(r.set_size_used),
                        repr(float(r.es)),
                        repr(float(r.nes)),
                        repr(float(r.p_nominal)),
                        repr(float(r.fdr_q)),
                        str(r.rank_in_dimension),
                        ",".join(r.leading_edge),
                    ]
                )
                + "\n"
            )


def load_enrichment_table(path, dimension, params=None):
    records = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:4] != ["set_id", "size", "es", "nes"]:
            raise ValueError(f"{path}: not an enrichment table")
        for line in fh:
            f = line.rstrip("\n").split("\t")
            records.append(
                EnrichmentRecord(
                    set_id=f[0],
                    es=float(f[2]),
                    nes=float(f[3]),
                    p_nominal=float(f[4]),
                    fdr_q=float(f[5]),
                    rank_in_dimension=int(f[6]),
                    leading_edge=tuple(x for x in f[7].split(",") if x),
                    set_size_used=int(f[1]),
                )
            )
    records.sort(key=lambda r: r.rank_in_dimension)
    return EnrichmentTable(dimension, params or GseaParams(), tuple(records))


def write_params(params, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
