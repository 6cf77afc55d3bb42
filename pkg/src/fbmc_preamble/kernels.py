"""Hot loops of the filter banks.

Each kernel has a numba version and a vectorized numpy version with identical
semantics.  ``overlap_add`` and ``fold_windows`` dispatch to numba when it is
available and enabled, otherwise to numpy.  The explicit ``*_numpy`` and
``*_numba`` names are kept public for benchmarking and cross-checks.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit


# --------------------------------------------------------------------------
# synthesis: windowed periodic columns, overlap-added with hop M/2
# --------------------------------------------------------------------------

def overlap_add_numpy(cols, g, hop):
    """Overlap-add ``g[l] * cols[(n*hop + l) % M, n]`` into one signal.

    Parameters
    ----------
    cols : ndarray, shape (M, N), complex
        Per-column periodic sequences (already IFFT'ed and phase rotated).
    g : ndarray, shape (L,)
        Prototype filter, ``L`` a multiple of ``hop``.
    hop : int
        Column spacing in samples (M/2).

    Returns
    -------
    ndarray, shape ((N-1)*hop + L,)
    """
    M, N = cols.shape
    L = g.shape[0]
    nseg = L // hop
    idx = (np.arange(N)[:, None] * hop + np.arange(L)[None, :]) % M
    contrib = cols.T[np.arange(N)[:, None], idx] * g[None, :]  # (N, L)
    contrib = contrib.reshape(N, nseg, hop)
    out = np.zeros((N - 1 + nseg, hop), dtype=np.complex128)
    for j in range(nseg):
        out[j:j + N] += contrib[:, j, :]
    return out.reshape(-1)


@njit(cache=True)
def overlap_add_numba(cols, g, hop):
    M, N = cols.shape
    L = g.shape[0]
    out = np.zeros((N - 1) * hop + L, dtype=np.complex128)
    for n in range(N):
        start = n * hop
        for l in range(L):
            out[start + l] += g[l] * cols[(start + l) % M, n]
    return out


# --------------------------------------------------------------------------
# analysis: window each column segment with g and fold modulo M
# --------------------------------------------------------------------------

def fold_windows_numpy(s, g, M, hop, N):
    """Fold windowed segments onto the absolute index grid modulo ``M``.

    Column ``n`` uses samples ``s[n*hop : n*hop + L]`` weighted by ``g``;
    sample ``k`` lands in bin ``k % M``.

    Returns
    -------
    ndarray, shape (M, N), complex
    """
    L = g.shape[0]
    K = L // M
    idx = np.arange(N)[:, None] * hop + np.arange(L)[None, :]
    seg = s[idx] * g[None, :]  # (N, L)
    folded = seg.reshape(N, K, M).sum(axis=1)  # bins relative to n*hop
    shift = (np.arange(N) * hop) % M
    rows = (np.arange(M)[None, :] - shift[:, None]) % M
    out = folded[np.arange(N)[:, None], rows]  # out[n, b] = folded[n, (b - shift) % M]
    return out.T.copy()


@njit(cache=True)
def fold_windows_numba(s, g, M, hop, N):
    L = g.shape[0]
    out = np.zeros((M, N), dtype=np.complex128)
    for n in range(N):
        start = n * hop
        for l in range(L):
            k = start + l
            out[k % M, n] += s[k] * g[l]
    return out


if HAVE_NUMBA:
    overlap_add = overlap_add_numba
    fold_windows = fold_windows_numba
else:
    overlap_add = overlap_add_numpy
    fold_windows = fold_windows_numpy
