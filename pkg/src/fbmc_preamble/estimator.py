"""Channel estimation, interpolation, LMMSE equalization and bit detection."""
from dataclasses import dataclass

import numpy as np

from .filterbank import oqam_demap
from .interference import interference_response


@dataclass(frozen=True)
class ChannelEstimate:
    """``H_hat[m, r, t]`` plus the mask of directly estimated entries ``active[t, m]``."""

    H_hat: np.ndarray
    active: np.ndarray

    @property
    def M(self):
        return self.H_hat.shape[0]


@dataclass(frozen=True)
class DetectionResult:
    equalized: np.ndarray  # (nt, M, Nd) real symbol estimates
    bits: np.ndarray
    ber: float
    mse: float


# --------------------------------------------------------------------------
# QAM helpers (Gray mapping per axis)
# --------------------------------------------------------------------------

def _pam_levels(k):
    L = 2 ** k
    lev = 2.0 * np.arange(L) - (L - 1)
    gray = np.arange(L) ^ (np.arange(L) >> 1)
    # level index i carries Gray code gray[i]
    return lev, gray


def qam_scale(order):
    k = int(np.log2(order)) // 2
    lev, _ = _pam_levels(k)
    return np.sqrt(2.0 * np.mean(lev ** 2))


def qam_modulate(bits, order=4):
    """Unit-average-energy square QAM; ``bits[..., j]`` with ``log2(order)`` bits per symbol."""
    bits = np.asarray(bits, dtype=np.int64)
    nb = int(np.log2(order))
    if 2 ** nb != order or nb % 2:
        raise ValueError("order must be a square power of two (4, 16, ...)")
    k = nb // 2
    lev, gray = _pam_levels(k)
    inv = np.argsort(gray)  # code -> level index
    w = 1 << np.arange(k - 1, -1, -1)
    ci = bits[..., :k] @ w
    cq = bits[..., k:] @ w
    return (lev[inv[ci]] + 1j * lev[inv[cq]]) / qam_scale(order)


def qam_demodulate(symbols, order=4):
    """Hard-decision inverse of :func:`qam_modulate`."""
    nb = int(np.log2(order))
    k = nb // 2
    lev, gray = _pam_levels(k)
    x = np.asarray(symbols) * qam_scale(order)

    def axis(v):
        i = np.clip(np.rint((v + (len(lev) - 1)) / 2.0), 0, len(lev) - 1).astype(np.int64)
        code = gray[i]
        return (code[..., None] >> np.arange(k - 1, -1, -1)) & 1

    return np.concatenate([axis(x.real), axis(x.imag)], axis=-1)


# --------------------------------------------------------------------------
# estimation
# --------------------------------------------------------------------------

def ls_estimate_iam(Y, C):
    """Least-squares MIMO estimate from full-band pseudo-pilots.

    Parameters
    ----------
    Y : ndarray, shape (M, nr, K)
        AFB outputs at the ``K >= nt`` estimation columns.
    C : ndarray, shape (M, nt, K)
        Pseudo-pilot of antenna ``t`` at estimation column ``k``.

    Returns
    -------
    ChannelEstimate with ``H_hat[m] = Y[m] @ pinv(C[m])``.
    """
    Y = np.asarray(Y)
    C = np.asarray(C)
    if Y.shape[0] != C.shape[0] or Y.shape[2] != C.shape[2]:
        raise ValueError("Y and C disagree in subcarriers or columns")
    s = np.linalg.svd(C, compute_uv=False)
    if np.any(s[:, -1] <= 1e-12 * np.maximum(s[:, 0], 1e-300)):
        raise np.linalg.LinAlgError("singular pseudo-pilot matrix")
    if C.shape[1] == C.shape[2]:
        # H C = Y  <=>  C^T H^T = Y^T
        H = np.swapaxes(np.linalg.solve(np.swapaxes(C, 1, 2), np.swapaxes(Y, 1, 2)), 1, 2)
    else:
        H = Y @ np.linalg.pinv(C)
    return ChannelEstimate(H, np.ones((C.shape[1], C.shape[0]), bool))


def ls_estimate_fdm(y_mid, pset, pilots=None):
    """Per-antenna division at each antenna's active subcarriers.

    Parameters
    ----------
    y_mid : ndarray, shape (M, nr)
        AFB outputs of the middle preamble column.
    pset : PreambleSet
    pilots : ndarray, shape (nt, M), optional
        Pseudo-pilots at the middle column; defaults to the set's expected
        values.
    """
    y_mid = np.asarray(y_mid)
    M, nr = y_mid.shape
    col = pset.pilot_cols[0]
    c = pset.expected_pilots[:, :, col] if pilots is None else np.asarray(pilots)
    act = pset.active
    if np.any(np.abs(c[act]) < 1e-12):
        raise ValueError("pseudo-pilot magnitude below 1e-12 at an active subcarrier")
    H = np.zeros((M, nr, pset.nt), dtype=np.complex128)
    for t in range(pset.nt):
        idx = np.flatnonzero(act[t])
        H[idx, :, t] = y_mid[idx, :] / c[t, idx][:, None]
    return ChannelEstimate(H, act.copy())


def interpolate_missing(est):
    """Cyclic linear interpolation over subcarriers of every non-active entry."""
    H = est.H_hat.copy()
    M, nr, nt = H.shape
    m = np.arange(M)
    for t in range(nt):
        idx = np.flatnonzero(est.active[t])
        if idx.size < 2:
            raise ValueError(f"antenna {t}: fewer than two active subcarriers")
        if idx.size == M:
            continue
        miss = np.flatnonzero(~est.active[t])
        for r in range(nr):
            H[miss, r, t] = np.interp(miss, idx, H[idx, r, t], period=M)
    return ChannelEstimate(H, est.active.copy())


def empirical_mse(est, truth, active_only=False):
    """Mean of ``|H_hat - H|^2`` over subcarriers and antenna pairs.

    ``truth`` is a ChannelRealization or an (M, nr, nt) array.
    """
    H = truth.cfr if hasattr(truth, "cfr") else np.asarray(truth)
    err = np.abs(est.H_hat - H) ** 2
    if active_only:
        mask = np.transpose(est.active)[:, None, :] * np.ones_like(err, dtype=bool)
        return float(err[mask].mean())
    return float(err.mean())


# --------------------------------------------------------------------------
# pilot-to-data leakage
# --------------------------------------------------------------------------

def pilot_leakage(pset, table, num_cols):
    """Interference of each antenna's preamble on a ``num_cols`` frame, shape (nt, M, num_cols)."""
    C = pset.num_cols
    out = np.zeros((pset.nt, pset.M, num_cols), dtype=np.complex128)
    for t in range(pset.nt):
        grid = np.zeros((pset.M, num_cols), dtype=np.complex128)
        grid[:, :C] = pset.grids[t]
        out[t] = interference_response(grid, table)
    out[:, :, :C] = 0
    return out


def compensate_pilot_interference(Y_data, pset, est, table=None, start=None, leak=None):
    """Remove known preamble leakage from data-region AFB outputs.

    Parameters
    ----------
    Y_data : ndarray, shape (M, nr, Nd)
        AFB outputs of the data columns, the first one at frame column
        ``start`` (defaults to right after the preamble and guards).
    est : ChannelEstimate or ndarray (M, nr, nt)
    table : InterferenceTable
        Its time half-width ``Q`` bounds the corrected columns.
    leak : ndarray, shape (nt, M, >= start + Nd), optional
        Precomputed :func:`pilot_leakage`; ``table`` is then unused.
    """
    Y = np.asarray(Y_data)
    start = pset.num_cols if start is None else start
    Nd = Y.shape[2]
    if leak is None:
        leak = pilot_leakage(pset, table, start + Nd)
    leak = leak[:, :, start:start + Nd]  # (nt, M, Nd)
    H = est.H_hat if isinstance(est, ChannelEstimate) else np.asarray(est)
    return Y - np.einsum("mrt,tmn->mrn", H, leak)


# --------------------------------------------------------------------------
# equalization and detection
# --------------------------------------------------------------------------

def lmmse_equalize(Y, est, noise_var, tx_bits=None, tx_symbols=None, qam_order=4, signal_power=1.0):
    """Per-subcarrier LMMSE, real-part extraction, OQAM demap and hard decisions.

    Parameters
    ----------
    Y : ndarray, shape (M, nr, Nd)
        Data-region AFB outputs, ``Nd`` even.
    est : ChannelEstimate or ndarray (M, nr, nt)
    noise_var : float
        Noise variance; regularization is ``noise_var / signal_power``.
    tx_bits : ndarray, optional
        Transmitted bits, shape matching the detected bits, for the BER.
    tx_symbols : ndarray, optional
        Transmitted real symbols ``(nt, M, Nd)`` for the MSE.
    """
    Y = np.asarray(Y)
    H = est.H_hat if isinstance(est, ChannelEstimate) else np.asarray(est)
    M, nr, nt = H.shape
    Hh = np.conj(np.swapaxes(H, 1, 2))  # (M, nt, nr)
    G = Hh @ H + (noise_var / signal_power) * np.eye(nt)[None]
    W = np.linalg.solve(G, Hh)  # (M, nt, nr)
    chat = W @ Y  # (M, nt, Nd)
    a_hat = np.transpose(chat.real, (1, 0, 2))  # (nt, M, Nd)
    qam = np.array([oqam_demap(a_hat[t]) for t in range(nt)])
    bits = qam_demodulate(qam, qam_order)
    ber = float(np.mean(bits != tx_bits)) if tx_bits is not None else float("nan")
    mse = float(np.mean((a_hat - tx_symbols) ** 2)) if tx_symbols is not None else float("nan")
    return DetectionResult(a_hat, bits, ber, mse)
