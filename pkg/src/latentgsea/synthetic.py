"""Synthetic dataset generators for validation and negative controls.

All generators emit matrices in transformed space (values are already
variance-stable, possibly negative), so runs on them skip the log step.
"""

import math

import numpy as np

from .data import ExpressionMatrix, GeneSetCollection


def _ids(prefix, n):
    width = max(4, len(str(n - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def gaussian_noise_matrix(n_genes, n_samples, seed=0):
    """I.i.d. standard-normal matrix: the negative-control input."""
    rng = np.random.default_rng(int(seed))
    values = rng.normal(size=(n_genes, n_samples))
    return ExpressionMatrix(_ids("g", n_genes), _ids("s", n_samples), values, transformed=True)


def random_gene_sets(gene_ids, n_sets, set_size, seed=0, name="random-sets"):
    """Uniformly random same-size gene subsets (decoys / null collections)."""
    rng = np.random.default_rng(int(seed))
    gene_ids = list(gene_ids)
    sets = []
    for i in range(n_sets):
        members = rng.choice(len(gene_ids), size=set_size, replace=False)
        sets.append((f"RS{i:04d}", "random set", frozenset(gene_ids[j] for j in members)))
    return GeneSetCollection(name, tuple(sets))


def planted_modules_dataset(n_genes=2000, n_samples=400, module_size=50,
                            n_modules=2, noise_sd=0.5, seed=0):
    """Disjoint gene modules driven by independent latent factors plus noise.

    Module ``i`` occupies genes ``[i*module_size, (i+1)*module_size)`` and
    tracks its own standard-normal factor with additive noise of the given
    sd; background genes are pure unit noise.  Returns
    ``(matrix, module_gene_lists, factors)``.
    """
    if n_modules * module_size > n_genes:
        raise ValueError("modules do not fit in the gene universe")
    rng = np.random.default_rng(int(seed))
    gene_ids = _ids("g", n_genes)
    factors = rng.normal(size=(n_modules, n_samples))
    values = rng.normal(size=(n_genes, n_samples))  # unit background noise
    modules = []
    for i in range(n_modules):
        rows = slice(i * module_size, (i + 1) * module_size)
        values[rows] = factors[i][None, :] + noise_sd * rng.normal(
            size=(module_size, n_samples)
        )
        modules.append(tuple(gene_ids[rows]))
    m = ExpressionMatrix(gene_ids, _ids("s", n_samples), values, transformed=True)
    return m, modules, factors


def planted_collection(modules, gene_ids, n_decoys=100, decoy_size=None, seed=1,
                       name="planted"):
    """The planted module sets plus random same-size decoys."""
    decoy_size = decoy_size or len(modules[0])
    sets = [
        (f"PLANTED{i}", "planted module", frozenset(genes))
        for i, genes in enumerate(modules)
    ]
    decoys = random_gene_sets(gene_ids, n_decoys, decoy_size, seed=seed)
    return GeneSetCollection(name, tuple(sets) + decoys.sets)


def _hermite(t, degree):
    """Probabilist's Hermite polynomial, normalized to unit variance under N(0,1)."""
    h_prev, h = np.ones_like(t), t
    if degree == 0:
        return h_prev
    for d in range(1, degree):
        h_prev, h = h, t * h - d * h_prev
    return h / np.sqrt(float(math.factorial(degree)))


def overlap_contrast_dataset(n_genes=2000, n_samples=500, module_size=50,
                             overlap=20, n_distractor_links=6,
                             distractor_module_size=80, distractor_scale=2.0,
                             target_scale=1.0, seed=0):
    """Two overlapping target programs hidden below a one-factor distractor manifold.

    A single distractor factor drives ``n_distractor_links`` disjoint gene
    modules through mutually uncorrelated nonlinear links (normalized Hermite
    polynomials), so the distractor occupies that many *linear* variance
    directions — all stronger than the targets — while remaining a
    one-dimensional manifold a nonlinear encoder can compress.  The two
    target programs share ``overlap`` genes (shared genes respond to the sum
    of both factors).  At a matched latent dimensionality equal to the link
    count, a linear method spends every component on the distractor
    directions and misses the targets, whereas a nonlinear model has
    capacity left for them.

    Returns ``(matrix, (target_genes_a, target_genes_b))``.
    """
    needed = n_distractor_links * distractor_module_size + 2 * module_size - overlap
    if needed > n_genes:
        raise ValueError(f"gene universe too small: need {needed}, have {n_genes}")
    rng = np.random.default_rng(int(seed))
    gene_ids = _ids("g", n_genes)
    values = rng.normal(size=(n_genes, n_samples))

    t = rng.normal(size=n_samples)
    row = 0
    for link in range(1, n_distractor_links + 1):
        resp = _hermite(t, link)
        block = slice(row, row + distractor_module_size)
        values[block] += distractor_scale * resp[None, :]
        row += distractor_module_size

    f1 = rng.normal(size=n_samples)
    f2 = rng.normal(size=n_samples)
    n_excl = module_size - overlap
    a_excl = slice(row, row + n_excl)
    b_excl = slice(row + n_excl, row + 2 * n_excl)
    shared = slice(row + 2 * n_excl, row + 2 * n_excl + overlap)
    values[a_excl] += target_scale * f1[None, :]
    values[b_excl] += target_scale * f2[None, :]
    values[shared] += target_scale * ((f1 + f2) / np.sqrt(2.0))[None, :]

    genes_a = tuple(gene_ids[a_excl]) + tuple(gene_ids[shared])
    genes_b = tuple(gene_ids[b_excl]) + tuple(gene_ids[shared])
    m = ExpressionMatrix(gene_ids, _ids("s", n_samples), values, transformed=True)
    return m, (genes_a, genes_b)


def cli_fixture(out_dir, seed=0):
    """Write a small end-to-end fixture (expression TSV, GMT, labels, targets)."""
    from pathlib import Path

    from .data import write_expression_matrix, write_gmt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m, modules, factors = planted_modules_dataset(
        n_genes=300, n_samples=80, module_size=25, n_modules=2, noise_sd=0.5, seed=seed
    )
    # shift into counts-like space so the log-transform path is exercised
    shifted = ExpressionMatrix(
        m.gene_ids, m.sample_ids, np.exp2(m.values + 5.0) - 1.0, transformed=False
    )
    expr_path = out / "expression.tsv"
    write_expression_matrix(shifted, expr_path)
    coll = planted_collection(modules, m.gene_ids, n_decoys=20, seed=seed + 1)
    gmt_path = out / "sets.gmt"
    write_gmt(coll, gmt_path)
    labels_path = out / "labels.tsv"
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write("sample_id\tlabel\n")
        for i, s in enumerate(m.sample_ids):
            fh.write(f"{s}\t{'hi' if factors[0][i] > 0 else 'lo'}\n")
    targets_path = out / "targets.txt"
    with open(targets_path, "w", encoding="utf-8") as fh:
        fh.write("# planted modules\nPLANTED0\nPLANTED1\n")
    return {
        "expression": expr_path,
        "gene_sets": gmt_path,
        "labels": labels_path,
        "targets": targets_path,
    }
