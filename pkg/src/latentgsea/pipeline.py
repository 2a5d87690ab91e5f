"""End-to-end orchestration shared by the CLI, saturation sweeps, and tests.

One full run is: (optional log transform) -> per-gene standardization ->
autoencoder training -> encode -> gene-dimension correlation on the
log-space (pre-standardization) values -> per-dimension ranked lists ->
per-dimension pre-ranked GSEA.  Correlations are affine-invariant, so using
pre-standardization values changes nothing mathematically; it is simply the
documented convention.

Dimensions are scored in a worker pool; every (dimension, set-size) null
draws from its own seed-derived substream, so results do not depend on the
worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .autoencoder import AutoencoderConfig, encode, train_autoencoder
from .correlation import gene_dimension_correlation, ranked_gene_list
from .data import filter_gene_sets, log_transform, standardize_genes
from .gsea import run_preranked_gsea
from .ranking import ModelEnrichment, derive_seed, saturation_table
from .synthetic import gaussian_noise_matrix


@dataclass
class RunResult:
    model: object
    scaler: object
    latent: object
    correlation_map: object
    ranked_lists: list
    enrichment: ModelEnrichment
    filtered_collection: object
    filter_report: list


def gsea_over_dimensions(ranked_lists, collection, params, threads=1):
    """Run pre-ranked GSEA for every dimension's list, optionally in parallel."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(
                pool.map(lambda l: run_preranked_gsea(l, collection, params), ranked_lists)
            )
    else:
        tables = [run_preranked_gsea(l, collection, params) for l in ranked_lists]
    return tables


def rank_all_dimensions(corr_map):
    return [ranked_gene_list(corr_map, k) for k in range(corr_map.n_dims)]


def run_latent_enrichment(m_log, ae_cfg, gsea_params, collection, threads=1,
                          standardize=True, provenance=""):
    """Train, correlate, and score one model end to end.

    ``m_log`` must already be in log/variance-stable space (``transformed``).
    The collection is filtered against the correlation map's gene universe.
    """
    if not m_log.transformed:
        m_log = log_transform(m_log)
    if standardize:
        m_std, scaler = standardize_genes(m_log)
    else:
        m_std, scaler = m_log, None
    model = train_autoencoder(m_std, ae_cfg)
    latent = encode(model, m_std)
    corr = gene_dimension_correlation(m_log, latent) if standardize else \
        gene_dimension_correlation(m_std, latent)
    filtered, report = filter_gene_sets(
        collection, set(corr.gene_ids), gsea_params.min_size, gsea_params.max_size
    )
    ranked = rank_all_dimensions(corr)
    tables = gsea_over_dimensions(ranked, filtered, gsea_params, threads=threads)
    enrichment = ModelEnrichment(tuple(tables), provenance=provenance)
    return RunResult(model, scaler, latent, corr, ranked, enrichment, filtered, report)


def saturation_curve(m_log, dims, collection, ae_cfg_base, gsea_params_base,
                     gate="nominal", threads=1):
    """Unique-significant-pathway counts across latent dimensionalities.

    Each D trains a fresh model with a seed derived from the base seed and D,
    then counts unique sets whose best nominal p (or q, per ``gate``) over
    dimensions beats the Bonferroni threshold 0.05/D.
    """
    dims = list(dims)
    if not dims:
        raise ValueError("empty dimension list")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError(f"dimension list must be strictly increasing, got {dims}")
    results = {}
    for d in dims:
        cfg = AutoencoderConfig(
            latent_dim=d,
            hidden_dims=ae_cfg_base.hidden_dims,
            activation=ae_cfg_base.activation,
            l1=ae_cfg_base.l1,
            l2=ae_cfg_base.l2,
            learning_rate=ae_cfg_base.learning_rate,
            batch_size=ae_cfg_base.batch_size,
            epochs=ae_cfg_base.epochs,
            seed=derive_seed(ae_cfg_base.seed, d),
            penalize_biases=ae_cfg_base.penalize_biases,
            holdout_fraction=ae_cfg_base.holdout_fraction,
        )
        try:
            res = run_latent_enrichment(
                m_log, cfg, gsea_params_base, collection, threads=threads
            )
        except Exception as exc:
            raise RuntimeError(f"saturation sweep failed at D={d}: {exc}") from exc
        results[d] = res.enrichment
    return saturation_table(results, collection.name, gate=gate), results


def negative_control(n_genes, n_samples, collection, dims, seed, ae_cfg_base,
                     gsea_params_base, gate="nominal", threads=1):
    """Saturation protocol on i.i.d. Gaussian noise; expected count is zero."""
    noise = gaussian_noise_matrix(n_genes, n_samples, seed=seed)
    rows, results = saturation_curve(
        noise, dims, collection, ae_cfg_base, gsea_params_base, gate=gate,
        threads=threads,
    )
    return rows, results
