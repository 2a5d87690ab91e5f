"""Unsupervised pathway enrichment from autoencoder latent spaces.

Pipeline: learn a low-dimensional non-linear representation of a bulk
expression matrix, correlate every gene with every latent dimension, turn
each dimension into a signed pre-ranked gene list, run pre-ranked GSEA per
dimension, and aggregate into model-level pathway ranks, saturation curves,
and sample-level pathway activity matrices — plus PCA and t-test baselines
that feed the same enrichment engine.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend
