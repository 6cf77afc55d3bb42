"""OQAM/FBMC prototype filter, synthesis/analysis filter banks and PAPR.

Conventions
-----------
* ``g[k]`` has length ``L = K*M``, indices ``k = 0..L-1``, and is symmetric in
  the sense ``g[k] = g[L - k]`` (centre at ``L/2``; ``g[0]`` is ~0).
* Column ``n`` is delayed by ``n*M/2`` samples.
* Phase term ``exp(j*phi_{m,n}) = j**((m + n) % 4)``, i.e. ``phi0 = 0``.
"""
from dataclasses import dataclass
import io

import numpy as np

from . import kernels

PHYDYAS_K4 = (1.0, 0.971960, np.sqrt(2.0) / 2.0, 0.235147)


@dataclass(frozen=True)
class PrototypeFilter:
    """Real prototype pulse plus its filter-bank dimensions."""

    coefficients: np.ndarray
    num_subcarriers: int
    overlap_factor: int

    @property
    def length(self):
        return self.num_subcarriers * self.overlap_factor

    @property
    def M(self):
        return self.num_subcarriers

    @property
    def K(self):
        return self.overlap_factor

    @property
    def g(self):
        return self.coefficients


def design_phydyas(M, K=4):
    """Frequency-sampling PHYDYAS pulse of length ``K*M``, unit energy.

    Parameters
    ----------
    M : int
        Number of subcarriers, even and at least 8.
    K : int
        Overlap factor; only 4 is supported.
    """
    if int(M) != M or M % 2 or M < 8:
        raise ValueError(f"M must be an even integer >= 8, got {M}")
    if K != 4:
        raise ValueError(f"only K=4 is supported, got {K}")
    M = int(M)
    L = K * M
    k = np.arange(L)
    H = PHYDYAS_K4
    g = H[0] + 2.0 * sum((-1) ** i * H[i] * np.cos(2.0 * np.pi * i * k / L) for i in range(1, K))
    g = g / np.linalg.norm(g)
    g.setflags(write=False)
    return PrototypeFilter(g, M, K)


def phase_factor(m, n):
    """``exp(j*phi_{m,n})`` computed with integer arithmetic."""
    return 1j ** ((np.asarray(m) + np.asarray(n)) % 4)


def signal_length(N, filt):
    return (N - 1) * filt.M // 2 + filt.length


# --------------------------------------------------------------------------
# OQAM staggering
# --------------------------------------------------------------------------

def oqam_map(qam):
    """Stagger complex symbols onto real slots.

    ``a[m, 2l] = Re(x[m, l])/sqrt(2)`` and ``a[m, 2l+1] = Im(x[m, l])/sqrt(2)``.
    """
    x = np.asarray(qam)
    if x.ndim != 2:
        raise ValueError("expected a 2-D (M, N/2) grid of QAM symbols")
    a = np.empty((x.shape[0], 2 * x.shape[1]))
    a[:, 0::2] = x.real / np.sqrt(2.0)
    a[:, 1::2] = x.imag / np.sqrt(2.0)
    return a


def oqam_demap(grid):
    a = np.asarray(grid)
    if a.ndim != 2 or a.shape[1] % 2:
        raise ValueError("expected a 2-D (M, N) grid with N even")
    a = a.real
    return np.sqrt(2.0) * (a[:, 0::2] + 1j * a[:, 1::2])


# --------------------------------------------------------------------------
# filter banks
# --------------------------------------------------------------------------

def _check_grid(grid, filt):
    a = np.asarray(grid)
    if a.ndim != 2 or a.shape[0] != filt.M:
        raise ValueError(f"grid must have shape (M={filt.M}, N), got {a.shape}")
    return a


def synthesize(grid, filt):
    """Synthesis filter bank, fast path (IFFT per column + overlap-add).

    Parameters
    ----------
    grid : array_like, shape (M, N)
        Complex SFB input symbols ``a_{m,n}``.
    filt : PrototypeFilter

    Returns
    -------
    ndarray, shape ((N-1)*M/2 + K*M,), complex
    """
    a = _check_grid(grid, filt)
    M, N = a.shape
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    cols = M * np.fft.ifft(a * phase_factor(m, n), axis=0)
    return kernels.overlap_add(np.ascontiguousarray(cols), np.asarray(filt.g, float), M // 2)


def analyze(signal, filt, num_cols):
    """Analysis filter bank, fast path (fold modulo M + FFT per column).

    ``y[m, n] = sum_k s[k] * conj(g_{m,n}[k])``.  Samples beyond the end of
    ``signal`` needed by no column are ignored.
    """
    s = np.asarray(signal, dtype=np.complex128)
    M = filt.M
    need = signal_length(num_cols, filt)
    if s.shape[0] < need:
        raise ValueError(f"signal has {s.shape[0]} samples, {need} needed for {num_cols} columns")
    folded = kernels.fold_windows(s, np.asarray(filt.g, float), M, M // 2, int(num_cols))
    y = np.fft.fft(folded, axis=0)
    m = np.arange(M)[:, None]
    n = np.arange(num_cols)[None, :]
    return y * np.conj(phase_factor(m, n))


def atoms(filt, N):
    """Matrix of all modulated pulses ``g_{m,n}[k]``, rows indexed ``n*M + m``."""
    M, L = filt.M, filt.length
    T = signal_length(N, filt)
    k = np.arange(T)
    out = np.zeros((N * M, T), dtype=np.complex128)
    for n in range(N):
        win = np.zeros(T)
        win[n * M // 2:n * M // 2 + L] = filt.g
        for m in range(M):
            out[n * M + m] = win * np.exp(2j * np.pi * m * k / M) * phase_factor(m, n)
    return out


def synthesize_direct(grid, filt):
    """Reference synthesis by explicit summation over modulated pulses."""
    a = _check_grid(grid, filt)
    A = atoms(filt, a.shape[1])
    return a.T.reshape(-1) @ A


def analyze_direct(signal, filt, num_cols):
    """Reference analysis by explicit inner products with modulated pulses."""
    A = atoms(filt, num_cols)
    s = np.asarray(signal, dtype=np.complex128)
    if s.shape[0] < A.shape[1]:
        raise ValueError("signal too short")
    y = np.conj(A) @ s[:A.shape[1]]
    return y.reshape(num_cols, filt.M).T


# --------------------------------------------------------------------------
# PAPR
# --------------------------------------------------------------------------

def papr_db(signal, duration=None):
    """Peak-to-average power ratio in dB.

    Parameters
    ----------
    signal : array_like
    duration : int, optional
        Number of samples the energy is averaged over.  Defaults to the
        signal length; pass the nominal occupied duration of a burst whose
        pulse tails extend beyond it.
    """
    s = np.asarray(signal)
    if s.size == 0:
        raise ValueError("empty signal")
    p = np.abs(s) ** 2
    total = p.sum()
    if total == 0:
        raise ValueError("all-zero signal")
    d = s.size if duration is None else duration
    return float(10.0 * np.log10(p.max() / (total / d)))


# --------------------------------------------------------------------------
# grid CSV I/O
# --------------------------------------------------------------------------

def _fmt(z):
    return f"{z.real:.17g}{z.imag:+.17g}j"


def grid_to_csv(grid, path=None):
    """Rows are subcarriers, columns are time slots, entries ``re+imj``."""
    a = np.asarray(grid, dtype=np.complex128)
    text = "\n".join(",".join(_fmt(z) for z in row) for row in a) + "\n"
    if path is None:
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return None


def grid_from_csv(src):
    """Inverse of :func:`grid_to_csv`; ``src`` is a path or CSV text."""
    if "\n" in src or "," in src:
        text = src
    else:
        with open(src) as fh:
            text = fh.read()
    rows = [r for r in io.StringIO(text).read().splitlines() if r.strip()]
    return np.array([[complex(v.replace(" ", "")) for v in r.split(",")] for r in rows])
