"""Model-level pathway ranking, target benchmarks, and saturation curves.

A pathway's model-level rank is the minimum within-dimension rank over the
latent dimensions where it clears the FDR threshold; undetected pathways
receive a penalty rank (default 100) in benchmark summaries.  Saturation
sweeps train one fresh model per latent dimensionality and count unique
significant pathways under a Bonferroni 0.05/D gate.
"""

import json
from dataclasses import dataclass, field

import numpy as np


def derive_seed(base, *parts):
    """Deterministic child seed for (base, parts), e.g. one per sweep point."""
    ss = np.random.SeedSequence((int(base), *[int(p) for p in parts]))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ModelEnrichment:
    """Per-dimension enrichment tables of one trained model."""

    tables: tuple  # EnrichmentTable, index = latent dimension
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        for k, t in enumerate(self.tables):
            if t.dimension != k:
                raise ValueError(f"table at index {k} is for dimension {t.dimension}")

    @property
    def n_dims(self):
        return len(self.tables)

    def tested_set_ids(self):
        out = set()
        for t in self.tables:
            out.update(r.set_id for r in t.records)
            out.update(s for s, _ in t.skipped)
        return out


@dataclass(frozen=True)
class BenchmarkResult:
    method: str
    per_target: tuple  # (set_id, rank or None)
    mean_rank: float
    coverage_at_n: float
    penalty: int
    alpha: float
    coverage_n: int


def model_level_rank(me, set_id, alpha=0.05):
    """Best within-dimension rank over dimensions where the set is significant.

    Returns ``None`` when the set never clears ``fdr_q < alpha``.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if set_id not in me.tested_set_ids():
        raise ValueError(f"set {set_id!r} was not tested in any dimension")
    best = None
    for t in me.tables:
        r = t.record(set_id)
        if r is not None and r.fdr_q < alpha:
            if best is None or r.rank_in_dimension < best:
                best = r.rank_in_dimension
    return best


def benchmark_targets(me, targets, penalty=100, alpha=0.05, coverage_n=10, method=""):
    """Mean achieved rank and coverage over a list of target pathways.

    Undetected targets contribute the penalty rank to the mean and never to
    coverage.  Defaults: penalty 100, alpha 0.05.
    """
    if not targets:
        raise ValueError("empty target list")
    if penalty < 1:
        raise ValueError(f"penalty must be >= 1, got {penalty}")
    per_target = []
    effective = []
    covered = 0
    for sid in targets:
        rank = model_level_rank(me, sid, alpha=alpha)
        per_target.append((sid, rank))
        effective.append(penalty if rank is None else rank)
        if rank is not None and rank <= coverage_n:
            covered += 1
    return BenchmarkResult(
        method=method,
        per_target=tuple(per_target),
        mean_rank=float(np.mean(effective)),
        coverage_at_n=covered / len(targets),
        penalty=penalty,
        alpha=alpha,
        coverage_n=coverage_n,
    )


def count_significant_sets(tables, n_dims, threshold=0.05, gate="nominal"):
    """Unique sets whose best statistic over dimensions beats threshold/n_dims.

    ``gate`` selects the statistic: nominal p (default) or FDR q.  A set
    found in several dimensions counts once.
    """
    if gate not in ("nominal", "q"):
        raise ValueError(f"gate must be 'nominal' or 'q', got {gate!r}")
    cut = threshold / n_dims
    hits = set()
    for t in tables:
        for r in t.records:
            stat = r.p_nominal if gate == "nominal" else r.fdr_q
            if stat < cut:
                hits.add(r.set_id)
    return len(hits)


@dataclass(frozen=True)
class SaturationRow:
    n_dims: int
    n_significant: int
    collection: str
    threshold_rule: str
    seed: int = 0


def saturation_table(results, collection_name, gate="nominal", threshold=0.05):
    """Build (D, count) rows from {D: ModelEnrichment} sweep results."""
    rows = []
    for d in sorted(results):
        me = results[d]
        rows.append(
            SaturationRow(
                n_dims=d,
                n_significant=count_significant_sets(me.tables, d, threshold, gate),
                collection=collection_name,
                threshold_rule=f"{gate} p < {threshold}/D",
            )
        )
    return rows


def write_saturation(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n_dims\tn_significant\tcollection\tthreshold_rule\n")
        for r in rows:
            fh.write(f"{r.n_dims}\t{r.n_significant}\t{r.collection}\t{r.threshold_rule}\n")


def write_benchmark(result, tsv_path, json_path):
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("target\trank_or_penalty\tdetected\n")
        for sid, rank in result.per_target:
            eff = result.penalty if rank is None else rank
            fh.write(f"{sid}\t{eff}\t{str(rank is not None).lower()}\n")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "method": result.method,
                "mean_rank": result.mean_rank,
                "coverage_at_n": result.coverage_at_n,
                "penalty": result.penalty,
                "alpha": result.alpha,
                "coverage_n": result.coverage_n,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def load_targets(path):
    """Target pathway ids, one per line; '#' starts a comment."""
    targets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                targets.append(line)
    return targets
