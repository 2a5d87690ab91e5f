"""Backend equivalence and exactness of the enrichment-score kernels."""

import numpy as np
import pytest

from latentgsea._kernels import available_backends, get_backend

from oracles import naive_enrichment_scan


def random_instance(rng, n=None, k=None):
    n = n or int(rng.integers(20, 200))
    k = k or int(rng.integers(1, max(2, n // 4)))
    scores = np.sort(rng.normal(size=n))[::-1].copy()
    hits = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
    return scores, hits


@pytest.mark.parametrize("backend", available_backends())
def test_scan_matches_naive_oracle_exactly(backend):
    kern = get_backend(backend)
    rng = np.random.default_rng(7)
    for _ in range(300):
        scores, hits = random_instance(rng)
        exponent = float(rng.choice([0.0, 1.0, 2.0]))
        weights = np.abs(scores) ** exponent if exponent else np.ones(len(scores))
        es, ext = kern.enrichment_scan(weights, hits)
        es_ref, ext_ref = naive_enrichment_scan(scores, hits, exponent)
        assert es == es_ref
        assert ext == ext_ref


@pytest.mark.parametrize("backend", available_backends())
def test_batch_matches_single(backend):
    kern = get_backend(backend)
    rng = np.random.default_rng(8)
    scores, _ = random_instance(rng, n=120)
    weights = np.abs(scores)
    draws = np.stack(
        [np.sort(rng.choice(120, size=9, replace=False)) for _ in range(64)]
    ).astype(np.int64)
    batch = kern.enrichment_scan_batch(weights, draws)
    singles = np.array([kern.enrichment_scan(weights, row)[0] for row in draws])
    assert np.array_equal(batch, singles)


@pytest.mark.skipif(len(available_backends()) < 2, reason="compiled kernel not built")
def test_backends_bit_identical():
    ka = get_backend("numpy")
    kb = get_backend("cython")
    rng = np.random.default_rng(9)
    for _ in range(100):
        scores, hits = random_instance(rng)
        weights = np.abs(scores)
        assert ka.enrichment_scan(weights, hits) == kb.enrichment_scan(weights, hits)
    scores, _ = random_instance(rng, n=400)
    weights = np.abs(scores) ** 2.0
    draws = np.stack(
        [np.sort(rng.choice(400, size=25, replace=False)) for _ in range(500)]
    ).astype(np.int64)
    assert np.array_equal(
        ka.enrichment_scan_batch(weights, draws), kb.enrichment_scan_batch(weights, draws)
    )


def test_numpy_chunking_invariance():
    kern = get_backend("numpy")
    rng = np.random.default_rng(10)
    scores, _ = random_instance(rng, n=150)
    weights = np.abs(scores)
    draws = np.stack(
        [np.sort(rng.choice(150, size=12, replace=False)) for _ in range(100)]
    ).astype(np.int64)
    a = kern.enrichment_scan_batch(weights, draws, chunk=7)
    b = kern.enrichment_scan_batch(weights, draws, chunk=1000)
    assert np.array_equal(a, b)


def test_zero_weight_fallback_is_uniform():
    rng = np.random.default_rng(11)
    for backend in available_backends():
        kern = get_backend(backend)
        weights = np.zeros(30)
        hits = np.array([0, 1, 2], dtype=np.int64)
        es, ext = kern.enrichment_scan(weights, hits)
        assert es == 1.0  # three uniform 1/3 steps before any miss
        assert ext == 2
    assert rng is not None


@pytest.mark.parametrize("backend", available_backends())
def test_rejects_degenerate_sizes(backend):
    kern = get_backend(backend)
    weights = np.ones(5)
    with pytest.raises(ValueError):
        kern.enrichment_scan(weights, np.arange(5, dtype=np.int64))
    with pytest.raises(ValueError):
        kern.enrichment_scan(weights, np.array([], dtype=np.int64))
