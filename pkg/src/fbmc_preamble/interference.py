"""Intrinsic interference coefficients and the quadratic forms built on them.

``zeta(filt, m, n, p, q)`` is the inner product ``sum_k g_{m,n}[k] conj(g_{p,q}[k])``;
the entry of an :class:`InterferenceTable` at offset ``(p0, q0)`` is the weight
with which the symbol at ``(m + p0, n + q0)`` shows up in the AFB output at
``(m, n)``.  Values depend on the parity of the reference time index ``n``
but not on ``m``.
"""
from dataclasses import dataclass, field

import numpy as np

from .filterbank import phase_factor


def zeta(filt, m, n, p, q):
    """Direct evaluation of ``sum_k g_{m,n}[k] * conj(g_{p,q}[k])``."""
    M, L = filt.M, filt.length
    hop = M // 2
    lo = max(n, q) * hop
    hi = min(n, q) * hop + L
    if hi <= lo:
        return 0j
    k = np.arange(lo, hi)
    g = np.asarray(filt.g)
    u = g[k - n * hop] * np.exp(2j * np.pi * m * k / M) * phase_factor(m, n)
    v = g[k - q * hop] * np.exp(2j * np.pi * p * k / M) * phase_factor(p, q)
    return complex(np.sum(u * np.conj(v)))


def _zeta_offsets(filt, q0, n):
    """``zeta`` at reference (0, n) for every frequency offset, via one FFT.

    Returns an array ``z`` with ``z[p0 % M]`` the coefficient for offset
    ``(p0, q0)`` with ``p0`` in ``[-M/2, M/2)``.
    """
    M, L = filt.M, filt.length
    hop = M // 2
    g = np.asarray(filt.g)
    lo = max(n, n + q0) * hop
    hi = min(n, n + q0) * hop + L
    z = np.zeros(M, dtype=np.complex128)
    if hi <= lo:
        return z
    k = np.arange(lo, hi)
    prod = g[k - (n + q0) * hop] * g[k - n * hop]
    folded = np.bincount(k % M, weights=prod, minlength=M)
    z = M * np.fft.ifft(folded)  # sum_b folded[b] exp(+j 2 pi p0 b / M)
    p0 = np.arange(M)
    p0 = np.where(p0 >= M // 2, p0 - M, p0)
    return z * phase_factor(p0 + n + q0, 0) * np.conj(phase_factor(0, n))


@dataclass(frozen=True)
class InterferenceTable:
    """Parity-resolved interference coefficients over ``|p0| <= P, |q0| <= Q``.

    ``odd[p0 + P, q0 + Q]`` holds the coefficient for an odd reference time
    index, ``even`` for an even one.
    """

    P: int
    Q: int
    M: int
    odd: np.ndarray
    even: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def kernel(self, n):
        """Coefficient array for reference time index ``n`` (only its parity matters)."""
        return self.odd if n % 2 else self.even

    def value(self, p0, q0, n=1):
        if abs(p0) > self.P or abs(q0) > self.Q:
            return 0j
        return complex(self.kernel(n)[p0 + self.P, q0 + self.Q])

    def first_order(self, n=1):
        """The 3x3 block over ``p0, q0 in {-1, 0, 1}``."""
        return self.kernel(n)[self.P - 1:self.P + 2, self.Q - 1:self.Q + 2]

    @property
    def delta(self):
        return float(self.value(1, 1).imag)

    @property
    def beta(self):
        return float(self.value(-1, 0).imag)

    @property
    def gamma(self):
        return float(self.value(0, 1).imag)

    def rows(self, parity="odd"):
        """Flat ``(p0, q0, re, im)`` records for the requested parity."""
        k = self.odd if parity == "odd" else self.even
        out = []
        for p0 in range(-self.P, self.P + 1):
            for q0 in range(-self.Q, self.Q + 1):
                z = k[p0 + self.P, q0 + self.Q]
                out.append((p0, q0, float(z.real), float(z.imag)))
        return out

    def to_csv(self, parity="odd"):
        lines = ["p0,q0,re,im"]
        lines += [f"{p},{q},{re:.12g},{im:.12g}" for p, q, re, im in self.rows(parity)]
        return "\n".join(lines) + "\n"


def build_table(filt, P=1, Q=3):
    """Compute the interference table of a prototype filter.

    Parameters
    ----------
    filt : PrototypeFilter
    P, Q : int
        Half-widths in subcarriers and time slots.  ``P`` may go up to
        ``M/2`` (whole band) and ``Q`` up to ``2K - 1`` (pulse support).
    """
    M, K = filt.M, filt.K
    if P < 1 or Q < 1:
        raise ValueError("window half-widths must be >= 1")
    if P > M // 2:
        raise ValueError(f"P={P} exceeds the band half-width M/2={M // 2}")
    if Q > 2 * K - 1:
        raise ValueError(f"Q={Q} exceeds the pulse support (max {2 * K - 1})")
    p0 = np.arange(-P, P + 1)
    tabs = {}
    for n in (1, 2):
        t = np.zeros((2 * P + 1, 2 * Q + 1), dtype=np.complex128)
        for j, q0 in enumerate(range(-Q, Q + 1)):
            z = _zeta_offsets(filt, q0, n)
            t[:, j] = z[p0 % M]
        if 2 * P >= M:
            # p0 = +M/2 aliases -M/2; keep only the lower representative
            t[-1, :] = 0
        t.setflags(write=False)
        tabs[n % 2] = t
    return InterferenceTable(P, Q, M, tabs[1], tabs[0])


def full_table(filt):
    """Table wide enough to hold every nonzero coefficient."""
    return build_table(filt, P=filt.M // 2, Q=2 * filt.K - 1)


# --------------------------------------------------------------------------
# grid-level interference response
# --------------------------------------------------------------------------

def interference_response(grid, table, P=None, Q=None, n0=0):
    """``c[m, n] = sum_{p0, q0} zeta(p0, q0; n) * a[m + p0, n + q0]``.

    The self term is included, so for a noiseless identity channel this is
    the AFB output restricted to the table window.  Frequency is treated
    cyclically; time is zero outside the grid.

    Parameters
    ----------
    grid : ndarray, shape (M, N)
    table : InterferenceTable
    P, Q : int, optional
        Restrict the window (e.g. ``P=Q=1`` for the first-order model).
    n0 : int
        Absolute time index of the grid's first column (sets the parity).
    """
    a = np.asarray(grid, dtype=np.complex128)
    M, N = a.shape
    P = table.P if P is None else min(P, table.P)
    Q = table.Q if Q is None else min(Q, table.Q)
    out = np.zeros_like(a)
    par = (np.arange(N) + n0) % 2
    for p0 in range(-P, P + 1):
        if 2 * abs(p0) > M:
            continue
        rows = np.arange(M) + p0
        # crossing the band edge changes the absolute offset by -/+M
        wrap = np.ones(M, dtype=np.complex128)
        if M % 4:
            wrap[rows >= M] = 1j ** ((-M) % 4)
            wrap[rows < 0] = 1j ** (M % 4)
        shifted = a[rows % M] * wrap[:, None]
        for q0 in range(-Q, Q + 1):
            zo = table.odd[p0 + table.P, q0 + table.Q]
            ze = table.even[p0 + table.P, q0 + table.Q]
            if zo == 0 and ze == 0:
                continue
            coef = np.where(par == 1, zo, ze)
            lo, hi = max(0, -q0), min(N, N - q0)
            if hi <= lo:
                continue
            out[:, lo:hi] += coef[None, lo:hi] * shifted[:, lo + q0:hi + q0]
    return out


def grid_energy(grid, table, n0=0):
    """SFB output energy of ``grid`` from the table (exact for a full table)."""
    a = np.asarray(grid, dtype=np.complex128)
    return float(np.real(np.vdot(a, interference_response(a, table, n0=n0))))


# --------------------------------------------------------------------------
# transmultiplexer matrix and energy matrices
# --------------------------------------------------------------------------

def transmux_matrix(table, M=None, ncols=3, n0=0):
    """Gram matrix ``V`` of the modulated pulses of an ``ncols``-column block.

    Rows/columns are indexed ``c*M + m``; ``V[i, j] = zeta_j^i`` so that the
    SFB output energy of the stacked column vector ``d`` is ``d^H V d``.
    Offsets outside the table window contribute zero.
    """
    M = table.M if M is None else M
    if M != table.M:
        raise ValueError("table was built for a different M")
    idx = np.arange(ncols * M)
    c, m = np.divmod(idx, M)
    q0 = c[None, :] - c[:, None]
    p0 = m[None, :] - m[:, None]
    pw = (p0 + M // 2) % M - M // 2
    V = np.zeros((ncols * M, ncols * M), dtype=np.complex128)
    ok = (np.abs(pw) <= table.P) & (np.abs(q0) <= table.Q)
    par = ((c[:, None] + n0) % 2) * np.ones_like(q0)
    vals = np.where(par == 1,
                    table.odd[np.clip(pw + table.P, 0, 2 * table.P), np.clip(q0 + table.Q, 0, 2 * table.Q)],
                    table.even[np.clip(pw + table.P, 0, 2 * table.P), np.clip(q0 + table.Q, 0, 2 * table.Q)])
    V[ok] = (vals * 1j ** ((p0 - pw) % 4))[ok]
    return V


def sfb_energy(d, V):
    """``d^H V d`` as a real number."""
    d = np.asarray(d).reshape(-1)
    V = np.asarray(V)
    if V.shape != (d.size, d.size):
        raise ValueError(f"dimension mismatch: d has {d.size} entries, V is {V.shape}")
    return float(np.real(np.vdot(d, V @ d)))


@dataclass(frozen=True)
class EnergyMatrix:
    """Reduced energy matrix of a period-``nt`` three-column preamble.

    The SFB output energy of the periodic extension of ``a`` is
    ``scale * a^H B a`` with ``scale = M / nt``.
    """

    B: np.ndarray
    nt: int
    scale: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.B, dtype=dtype)

    def energy(self, a):
        a = np.asarray(a)
        return float(np.real(np.vdot(a, self.B @ a)))


@dataclass(frozen=True)
class WeightVector:
    """Interference weighting vector; the pseudo-pilot at the centre is ``w^H a``."""

    w: np.ndarray
    nt: int

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.w, dtype=dtype)


def build_B(table, nt, n0=0):
    """Energy matrix for a three-column preamble repeating every ``nt`` subcarriers.

    Entry ``[ri*3 + ci, rj*3 + cj]`` sums the coefficients linking row ``ri``
    to every subcarrier of residue ``rj`` modulo ``nt``.
    """
    if nt < 2:
        raise ValueError("nt must be >= 2")
    M = table.M
    if M % nt:
        raise ValueError(f"M={M} is not divisible by nt={nt}")
    B = np.zeros((3 * nt, 3 * nt), dtype=np.complex128)
    plo = -min(table.P, M // 2)
    phi = min(table.P, M // 2 - 1) if 2 * table.P >= M else table.P
    for ri in range(nt):
        for ci in range(3):
            kern = table.kernel(ci + n0)
            for rj in range(nt):
                for cj in range(3):
                    q0 = cj - ci
                    tot = 0j
                    for p0 in range(plo, phi + 1):
                        if (p0 - (rj - ri)) % nt == 0:
                            tot += kern[p0 + table.P, q0 + table.Q]
                    B[ri * 3 + ci, rj * 3 + cj] = tot
    return EnergyMatrix(B, nt, M / nt)


def first_order_B2(delta, beta, gamma):
    """First-order 6x6 energy matrix for ``nt = 2`` in terms of delta, beta, gamma."""
    jg, j2d = 1j * gamma, 2j * delta
    return np.array([
        [1, jg, 0, 0, -j2d, 0],
        [-jg, 1, jg, j2d, 0, j2d],
        [0, -jg, 1, 0, -j2d, 0],
        [0, -j2d, 0, 1, jg, 0],
        [j2d, 0, j2d, -jg, 1, jg],
        [0, -j2d, 0, 0, -jg, 1],
    ], dtype=np.complex128)


def build_w(table, nt):
    """Weighting vector of the centre pseudo-pilot.

    For ``nt >= 3`` the 9 entries follow the rows above/at/below the pilot
    and the three columns; for ``nt = 2`` the rows above and below coincide
    and are folded, giving 6 entries.
    """
    if nt < 2:
        raise ValueError("nt must be >= 2")
    w9 = np.conj(table.first_order(1)).reshape(-1).copy()
    if nt == 2:
        return WeightVector(np.concatenate([w9[3:6], w9[0:3] + w9[6:9]]), 2)
    return WeightVector(w9, nt)
