"""Pure-numpy enrichment-score kernels.

Reference semantics for the running-sum scan; the compiled kernel in
``_es_cython`` must reproduce these results bit-for-bit.  Both backends
therefore accumulate the running sum strictly sequentially in list order
(``cumsum`` here, a plain loop in C), never through any algebraic shortcut
that would reorder floating-point operations.

Contract shared by both backends:

* ``weights`` is the full nonnegative weight vector (``|score|**exponent``,
  precomputed by the caller so both backends consume identical floats).
* ``hit_idx`` rows are strictly increasing positions of set members in the
  ranked list, with ``1 <= k < len(weights)``.
* hits add ``weights[i] / wsum`` where ``wsum`` is the sequential sum of the
  hit weights; misses subtract ``1 / (n - k)``.
* if every hit weight is exactly zero, hits fall back to uniform ``1 / k``
  steps (the exponent-0 behaviour) instead of dividing by zero.
* the enrichment score is the running-sum value of maximal absolute
  deviation from zero; on an exact ``|max| == |min|`` tie the negative
  extremum wins.  The reported extremum index is the first list position
  attaining the chosen extremum.
"""

import numpy as np

BACKEND = "numpy"


def enrichment_scan(weights, hit_idx):
    """Running-sum enrichment score for one gene set.

    Returns ``(es, extremum_index)``.
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    hit_idx = np.ascontiguousarray(hit_idx, dtype=np.int64)
    n = weights.shape[0]
    k = hit_idx.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= hits < list length, got {k} of {n}")

    hw = weights[hit_idx]
    wsum = float(np.cumsum(hw)[-1])
    steps = np.full(n, -1.0 / (n - k))
    if wsum > 0.0:
        steps[hit_idx] = hw / wsum
    else:
        steps[hit_idx] = 1.0 / k
    run = np.cumsum(steps)

    mx = float(np.max(run))
    mn = float(np.min(run))
    if abs(mx) > abs(mn):
        return mx, int(np.argmax(run))
    return mn, int(np.argmin(run))


def enrichment_scan_batch(weights, hit_idx, chunk=256):
    """Enrichment scores for many same-size gene sets against one list.

    ``hit_idx`` is ``(n_draws, k)``; rows are strictly increasing.  Work is
    chunked to bound the ``chunk x n`` scratch matrix; chunk size does not
    affect results.
    """
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    hit_idx = np.ascontiguousarray(hit_idx, dtype=np.int64)
    if hit_idx.ndim != 2:
        raise ValueError("hit_idx must be 2-D (n_draws, k)")
    n = weights.shape[0]
    n_draws, k = hit_idx.shape
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= set size < list length, got {k} of {n}")

    miss = -1.0 / (n - k)
    out = np.empty(n_draws)
    for lo in range(0, n_draws, chunk):
        rows = hit_idx[lo : lo + chunk]
        c = rows.shape[0]
        hw = weights[rows]
        wsum = np.cumsum(hw, axis=1)[:, -1:]
        wsafe = np.where(wsum > 0.0, wsum, 1.0)
        hsteps = np.where(wsum > 0.0, hw / wsafe, 1.0 / k)
        steps = np.full((c, n), miss)
        steps[np.arange(c)[:, None], rows] = hsteps
        run = np.cumsum(steps, axis=1)
        mx = run.max(axis=1)
        mn = run.min(axis=1)
        out[lo : lo + c] = np.where(np.abs(mx) > np.abs(mn), mx, mn)
    return out
