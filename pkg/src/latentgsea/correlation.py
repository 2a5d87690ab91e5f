"""Gene-latent Pearson correlation map and signed pre-ranked gene lists.

Each latent dimension's activation vector is correlated with every gene's
expression vector across the cohort, giving a genes x dimensions matrix of
signed coefficients.  Sorting a column descending (sign retained, ties broken
by gene id) yields the pre-ranked list fed to the enrichment engine.

The map is computed as one centered/scaled matrix product (population
moments), which is the performance-critical path for large cohorts; accuracy
is guarded by a two-pass oracle in the test suite.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CorrelationMap:
    gene_ids: tuple
    values: np.ndarray  # shape (G, D), entries in [-1, 1]
    excluded_genes: tuple = ()  # (gene_id, reason)
    dead_dimensions: tuple = ()  # dimension indices with zero variance

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        if values.ndim != 2 or values.shape[0] != len(self.gene_ids):
            raise ValueError(f"values shape {values.shape} inconsistent with gene ids")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite correlation values")

    @property
    def n_dims(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class RankedGeneList:
    """Genes of one latent dimension ordered by descending signed score."""

    dimension: int
    gene_ids: tuple
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        if scores.shape != (len(self.gene_ids),):
            raise ValueError("scores length != gene count")
        if np.any(np.diff(scores) > 0):
            raise ValueError("scores not in descending order")

    def __len__(self):
        return len(self.gene_ids)


def gene_dimension_correlation(m, z, tol=1e-12):
    """Pearson correlation of every gene with every latent dimension.

    Sample order of the matrix and the latent activations must agree.  Genes
    with zero variance are excluded (reported); latent dimensions with zero
    variance yield an all-zero column and are reported as dead, not errors.
    """
    if tuple(m.sample_ids) != tuple(z.sample_ids):
        for i, (a, b) in enumerate(zip(m.sample_ids, z.sample_ids)):
            if a != b:
                raise ValueError(
                    f"sample order mismatch at position {i}: {a!r} vs {b!r}"
                )
        raise ValueError(
            f"sample count mismatch: {m.n_samples} vs {len(z.sample_ids)}"
        )
    n = m.n_samples
    if n < 3:
        raise ValueError(f"need at least 3 samples for correlation, got {n}")

    x = m.values  # (G, N)
    gene_mean = x.mean(axis=1, keepdims=True)
    gene_sd = x.std(axis=1)  # population
    keep = gene_sd > 0.0
    excluded = tuple((m.gene_ids[i], "zero variance") for i in np.flatnonzero(~keep))
    xs = (x[keep] - gene_mean[keep]) / gene_sd[keep, None]

    zv = z.values  # (N, D)
    dim_mean = zv.mean(axis=0, keepdims=True)
    dim_sd = zv.std(axis=0)
    dead = tuple(int(i) for i in np.flatnonzero(dim_sd == 0.0))
    dim_scale = np.where(dim_sd > 0.0, dim_sd, 1.0)
    zs = (zv - dim_mean) / dim_scale

    rho = (xs @ zs) / n
    if dead:
        rho[:, list(dead)] = 0.0
    over = np.abs(rho) - 1.0
    if np.any(over > tol):
        raise ValueError(f"correlation magnitude exceeds 1 by {float(over.max()):.3g}")
    np.clip(rho, -1.0, 1.0, out=rho)
    kept_ids = tuple(g for g, kp in zip(m.gene_ids, keep) if kp)
    return CorrelationMap(kept_ids, rho, excluded, dead)


def ranked_gene_list(p, dimension):
    """Descending signed ranking of one correlation column; ties by gene id."""
    if not 0 <= dimension < p.n_dims:
        raise ValueError(f"dimension {dimension} out of range [0, {p.n_dims})")
    col = p.values[:, dimension]
    order = sorted(range(len(col)), key=lambda i: (-col[i], p.gene_ids[i]))
    genes = tuple(p.gene_ids[i] for i in order)
    return RankedGeneList(dimension, genes, col[order])


def write_correlation_map(p, path):
    """TSV, genes as rows, 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(["gene_id", *(f"dim_{k}" for k in range(p.n_dims))]) + "\n")
        for i, g in enumerate(p.gene_ids):
            fh.write("\t".join([g, *(format(v, ".17g") for v in p.values[i])]) + "\n")


def write_ranked_list(l, path):
    """Two-column TSV (gene_id, score) in list order — standard pre-ranked shape."""
    with open(path, "w", encoding="utf-8") as fh:
        for g, s in zip(l.gene_ids, l.scores):
            fh.write(f"{g}\t{repr(float(s))}\n")


def load_ranked_list(path, dimension=0):
    genes, scores = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns")
            genes.append(fields[0])
            scores.append(float(fields[1]))
    return RankedGeneList(dimension, tuple(genes), np.array(scores))
