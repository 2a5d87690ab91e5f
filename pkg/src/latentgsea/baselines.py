"""Linear and supervised baselines feeding the same enrichment engine.

PCA components come from orthogonal iteration on the centered covariance
operator (the G x G matrix is never materialized), with a deterministic sign
convention so rankings reproduce across runs.  The differential-expression
baseline is a per-gene Welch t-test.
"""

from dataclasses import dataclass

import numpy as np

from .autoencoder import LatentMatrix
from .correlation import RankedGeneList, gene_dimension_correlation, ranked_gene_list


class ConvergenceError(RuntimeError):
    def __init__(self, component, residual):
        self.component = component
        self.residual = residual
        super().__init__(
            f"eigensolver failed to converge for component {component} "
            f"(residual {residual:.3e})"
        )


@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray  # (D, G), orthonormal rows
    explained_variance: np.ndarray  # (D,), non-increasing (population convention)
    gene_means: np.ndarray  # (G,)
    gene_ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))

    @property
    def n_components(self):
        return self.components.shape[0]


def pca_fit(m, n_components, seed=0, tol=1e-10, max_iter=1000):
    """Top principal axes of sample-centered data via orthogonal iteration.

    Covariance uses the population (1/N) convention, matching the rest of
    the package.  Component signs are fixed so the largest-magnitude loading
    is positive.
    """
    g, n = m.n_genes, m.n_samples
    if not 1 <= n_components <= min(g, n):
        raise ValueError(
            f"n_components must be in [1, min(G, N)] = [1, {min(g, n)}], got {n_components}"
        )
    means = m.values.mean(axis=1)
    xc = m.values - means[:, None]  # (G, N)
    total_var = float(np.sum(xc * xc)) / n

    def cov_apply(q):
        return xc @ (xc.T @ q) / n  # (G, d)

    rng = np.random.default_rng(int(seed))
    q, _ = np.linalg.qr(rng.normal(size=(g, n_components)))
    prev = np.full(n_components, np.inf)
    converged = False
    for _ in range(max_iter):
        y = cov_apply(q)
        q, r = np.linalg.qr(y)
        sign = np.sign(np.diag(r))
        sign[sign == 0] = 1.0
        q = q * sign  # stabilize QR sign ambiguity
        eig = np.einsum("gd,gd->d", q, cov_apply(q))
        if np.all(np.abs(eig - prev) <= tol * np.maximum(1.0, np.abs(eig))):
            converged = True
            break
        prev = eig
    y = cov_apply(q)
    # Rayleigh-Ritz rotation inside the converged subspace
    small = q.T @ y
    small = (small + small.T) / 2
    evals, rot = np.linalg.eigh(small)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    comps = (q @ rot[:, order]).T  # (D, G)
    if not converged:
        resid = np.linalg.norm(cov_apply(comps.T) - comps.T * evals, axis=0)
        worst = int(np.argmax(resid))
        if np.max(resid) > np.sqrt(tol) * max(1.0, float(evals[0])):
            raise ConvergenceError(worst, float(resid[worst]))
    for d in range(n_components):
        j = int(np.argmax(np.abs(comps[d])))
        if comps[d, j] < 0:
            comps[d] = -comps[d]
    evals = np.maximum(evals, 0.0)
    if total_var > 0 and evals.sum() > total_var * (1 + 1e-9):
        raise RuntimeError("explained variance exceeds total variance")
    return PcaModel(comps, evals, means, tuple(m.gene_ids))


def pca_project(model, m):
    """Sample scores on every component: (N, D) projection of centered data."""
    if tuple(m.gene_ids) != model.gene_ids:
        raise ValueError("gene ids do not match the fitted model")
    xc = m.values - model.gene_means[:, None]
    return xc.T @ model.components.T


def pca_weights_ranking(model, component, signed=False):
    """Rank genes by loading magnitude on one component.

    Scores are absolute loadings by default (a signed mode is available);
    ties break by gene id.
    """
    if not 0 <= component < model.n_components:
        raise ValueError(f"component {component} out of range [0, {model.n_components})")
    load = model.components[component]
    scores = load if signed else np.abs(load)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], model.gene_ids[i]))
    return RankedGeneList(component, tuple(model.gene_ids[i] for i in order), scores[order])


def pca_corr_ranking(m, model, component):
    """Correlation ranking against one component's sample scores (signed)."""
    if not 0 <= component < model.n_components:
        raise ValueError(f"component {component} out of range [0, {model.n_components})")
    proj = pca_project(model, m)[:, component : component + 1]
    z = LatentMatrix(tuple(m.sample_ids), proj)
    cmap = gene_dimension_correlation(m, z)
    lst = ranked_gene_list(cmap, 0)
    return RankedGeneList(component, lst.gene_ids, lst.scores)


def standard_de_ttest(m, labels, group1=None, group2=None):
    """Per-gene Welch t between two sample groups, ranked by signed t.

    ``labels`` maps/lists one label per sample in matrix order.  Genes with
    zero variance in both groups are excluded and reported.  Returns
    ``(RankedGeneList, excluded)``.
    """
    if isinstance(labels, dict):
        missing = [s for s in m.sample_ids if s not in labels]
        if missing:
            raise ValueError(f"samples missing labels: {missing[:3]}")
        lab = np.array([labels[s] for s in m.sample_ids])
    else:
        lab = np.asarray(labels)
        if lab.shape[0] != m.n_samples:
            raise ValueError("one label per sample required")
    uniq = sorted(set(lab.tolist()))
    if group1 is None and group2 is None:
        if len(uniq) != 2:
            raise ValueError(f"need exactly two groups, found {uniq}")
        group1, group2 = uniq
    for gname in (group1, group2):
        if gname not in uniq:
            raise ValueError(f"group label {gname!r} absent from labels")
    i1 = lab == group1
    i2 = lab == group2
    if i1.sum() < 2 or i2.sum() < 2:
        raise ValueError("both groups need at least 2 samples")

    x1 = m.values[:, i1]
    x2 = m.values[:, i2]
    m1, m2 = x1.mean(axis=1), x2.mean(axis=1)
    v1 = x1.var(axis=1, ddof=1)
    v2 = x2.var(axis=1, ddof=1)
    denom = np.sqrt(v1 / i1.sum() + v2 / i2.sum())
    keep = denom > 0.0
    excluded = tuple(
        (m.gene_ids[i], "zero variance in both groups") for i in np.flatnonzero(~keep)
    )
    t = (m1[keep] - m2[keep]) / denom[keep]
    ids = [g for g, kp in zip(m.gene_ids, keep) if kp]
    order = sorted(range(len(ids)), key=lambda i: (-t[i], ids[i]))
    ranked = RankedGeneList(0, tuple(ids[i] for i in order), t[order])
    return ranked, excluded
