"""Preamble designs: IAM family, conventional FDM and optimized FDM.

Every builder returns a :class:`PreambleSet` whose per-antenna grids start at
absolute time index 0, so the FDM middle column sits at an odd index.
"""
from dataclasses import dataclass, field, replace
import enum

import numpy as np
from scipy.linalg import hadamard

from . import sdr as _sdr
from .interference import build_B, build_w, grid_energy, interference_response


class Method(enum.Enum):
    IAM_R = "iam-r"
    IAM_C = "iam-c"
    E_IAM_C = "e-iam-c"
    FDM_CONV = "fdm-conv"
    FDM_OPT = "fdm-opt"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key or m.name.lower().replace("_", "-") == key:
                return m
        raise ValueError(f"unknown preamble method {s!r}")

    @property
    def is_fdm(self):
        return self in (Method.FDM_CONV, Method.FDM_OPT)


def base_columns(method, nt):
    """Preamble column count before guards: 2nt+1, 3nt or 3."""
    method = Method.parse(method)
    if method in (Method.IAM_R, Method.IAM_C):
        return 2 * nt + 1
    if method is Method.E_IAM_C:
        return 3 * nt
    return 3


@dataclass(frozen=True)
class PreambleSet:
    """Per-antenna pilot grids plus what the receiver needs to use them.

    Attributes
    ----------
    grids : ndarray, shape (nt, M, C)
        SFB input of each antenna, guard columns included.
    pilot_cols : tuple of int
        Columns at which the channel is estimated.
    active : ndarray, shape (nt, M), bool
        Subcarriers each antenna sounds directly.
    expected_pilots : ndarray, shape (nt, M, C)
        Pseudo-pilots of each antenna's grid (table window of the builder).
    vector : ndarray or None
        Reduced FDM vector ``a`` (length ``3*nt``), unit ``a^H B a``.
    """

    method: Method
    nt: int
    M: int
    grids: np.ndarray
    pilot_cols: tuple
    active: np.ndarray
    expected_pilots: np.ndarray
    guards: int = 0
    energy_budget: float = 0.0
    vector: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def num_cols(self):
        return self.grids.shape[2]


@dataclass(frozen=True)
class PseudoPilotGrid:
    values: np.ndarray  # (nt, M, C)


def _hadamard(nt):
    if nt < 1 or nt & (nt - 1):
        raise ValueError(f"no Hadamard matrix of order {nt}")
    return hadamard(nt).astype(float)


def _reinforcing_sides(table, n):
    """Unit side values that add in phase with the centre through (0, -1) and (0, +1)."""
    zl, zr = table.value(0, -1, n), table.value(0, 1, n)
    return np.conj(zl) / abs(zl), np.conj(zr) / abs(zr)


def _finish(method, nt, M, grids, pilot_cols, active, table, eps, guards=0, vector=None, meta=None):
    grids = np.asarray(grids, dtype=np.complex128)
    if guards:
        grids = np.concatenate([grids, np.zeros((nt, M, guards), complex)], axis=2)
    exp = np.array([interference_response(g, table) for g in grids])
    ps = PreambleSet(Method.parse(method), nt, M, grids, tuple(pilot_cols), np.asarray(active, bool),
                     exp, guards, 0.0, vector, dict(meta or {}))
    return normalize_energy(ps, eps, table=table)


# --------------------------------------------------------------------------
# IAM family
# --------------------------------------------------------------------------

def iam_pilot_column(variant, M, n=1):
    """SISO pilot column placed at time index ``n``.

    IAM-R uses the (+,+,-,-) pattern.  IAM-C multiplies odd subcarriers by
    ``j`` at odd ``n`` (giving 1, j, -1, -j) and by ``-j`` at even ``n``, since
    the frequency-neighbour coefficients flip sign with the parity of ``n``;
    either way the neighbours add in phase with the pilot.
    """
    variant = Method.parse(variant)
    m = np.arange(M)
    p = np.where((m % 4) < 2, 1.0, -1.0).astype(np.complex128)
    if variant in (Method.IAM_C, Method.E_IAM_C):
        p = p * np.where(m % 2 == 1, 1j if n % 2 else -1j, 1.0)
    return p


def build_iam(variant, nt, M, table, eps=None):
    """IAM-R / IAM-C / E-IAM-C preamble with Hadamard signs across repetitions.

    IAM-R and IAM-C use ``2nt+1`` columns with pilots on the odd columns;
    E-IAM-C uses ``nt`` blocks of three columns whose side columns reinforce
    the centre pseudo-pilot.
    """
    variant = Method.parse(variant)
    if variant.is_fdm:
        raise ValueError("build_iam handles IAM variants only")
    Hd = _hadamard(nt)
    C = base_columns(variant, nt)
    grids = np.zeros((nt, M, C), dtype=np.complex128)
    if variant is Method.E_IAM_C:
        cols = [3 * k + 1 for k in range(nt)]
    else:
        cols = [2 * k + 1 for k in range(nt)]
    for t in range(nt):
        for k, c in enumerate(cols):
            p = iam_pilot_column(variant, M, c)
            grids[t, :, c] = Hd[t, k] * p
            if variant is Method.E_IAM_C:
                sl, sr = _reinforcing_sides(table, c)
                grids[t, :, c - 1] = Hd[t, k] * p * sl
                grids[t, :, c + 1] = Hd[t, k] * p * sr
    active = np.ones((nt, M), bool)
    return _finish(variant, nt, M, grids, cols, active, table, M / nt if eps is None else eps)


# --------------------------------------------------------------------------
# FDM designs
# --------------------------------------------------------------------------

def expand_fdm(A, M):
    """Per-antenna grids from the ``(nt, 3)`` block ``A``; antenna ``t`` is shifted by ``t``."""
    A = np.asarray(A, dtype=np.complex128)
    nt = A.shape[0]
    m = np.arange(M)
    return np.array([A[(m - t) % nt, :] for t in range(nt)])


def _fdm_active(nt, M):
    m = np.arange(M)
    return np.array([(m % nt) == t for t in range(nt)])


def first_order_pseudo_pilots(A, table):
    """First-order pseudo-pilots of the middle column of a periodic ``(nt, 3)`` block."""
    A = np.asarray(A, dtype=np.complex128)
    nt = A.shape[0]
    c = np.zeros(nt, dtype=np.complex128)
    for r in range(nt):
        for p0 in (-1, 0, 1):
            for q0 in (-1, 0, 1):
                c[r] += table.value(p0, q0, 1) * A[(r + p0) % nt, 1 + q0]
    return c


def conventional_block(nt, table):
    """Reduced ``(nt, 3)`` block of the conventional FDM preamble.

    The active row carries a unit pilot with unit side pilots adding in
    phase with it; missing rows carry only middle-column symbols, chosen so
    that their first-order pseudo-pilots vanish.
    """
    A = np.zeros((nt, 3), dtype=np.complex128)
    sl, sr = _reinforcing_sides(table, 1)
    A[0] = [sl, 1.0, sr]
    if nt > 1:
        # c = F g + f over the missing rows; solve F g = -f
        f = first_order_pseudo_pilots(A, table)[1:]
        F = np.zeros((nt - 1, nt - 1), dtype=np.complex128)
        for j in range(1, nt):
            E = np.zeros((nt, 3), dtype=np.complex128)
            E[j, 1] = 1.0
            F[:, j - 1] = first_order_pseudo_pilots(E, table)[1:]
        A[1:, 1] = np.linalg.solve(F, -f)
    return A


def build_fdm_conventional(nt, M, table, eps=None):
    """Conventional FDM preamble (three columns, disjoint subcarrier sets)."""
    if M % nt:
        raise ValueError(f"M={M} is not divisible by nt={nt}")
    A = conventional_block(nt, table)
    Bm = build_B(table, nt)
    a = A.reshape(-1)
    a = a / np.sqrt(Bm.energy(a))
    return _finish(Method.FDM_CONV, nt, M, expand_fdm(a.reshape(nt, 3), M), (1,), _fdm_active(nt, M),
                   table, M / nt if eps is None else eps, vector=a)


def optimal_vector(nt, table, field="real", tol=1e-8):
    """Optimized FDM vector with ``a^H B a = 1``.

    ``nt = 2`` uses the closed form ``B^{-1} w``; larger ``nt`` solves the
    semidefinite relaxation and repairs the extracted vector.

    Returns
    -------
    a : ndarray
    info : dict
        Objective and, for the relaxation, solver diagnostics.
    """
    Bm = build_B(table, nt)
    w = build_w(table, nt)
    if nt == 2:
        a = _sdr.solve_closed_form(w.w, Bm.B)
        return a, {"objective": float(abs(np.vdot(w.w, a)) ** 2), "solver": "closed-form"}
    prob = _sdr.assemble_qcqp(w.w, nt, Bm.B, field)
    sol = _sdr.solve_sdr(prob, tol=tol)
    a = _sdr.repair_feasibility(sol.extracted, prob)
    a = _sdr._normalize_phase(a)
    return a, {"objective": prob.objective(a), "bound": sol.objective, "solver": "sdr",
               "diagnostics": sol.diagnostics()}


def build_fdm_optimized(nt, M, table, guards=0, field="real", eps=None, tol=1e-8):
    """Optimized FDM preamble, optionally followed by ``guards`` zero columns."""
    if M % nt:
        raise ValueError(f"M={M} is not divisible by nt={nt}")
    if guards < 0:
        raise ValueError("guards must be >= 0")
    a, info = optimal_vector(nt, table, field=field, tol=tol)
    return _finish(Method.FDM_OPT, nt, M, expand_fdm(np.reshape(a, (nt, 3)), M), (1,), _fdm_active(nt, M),
                   table, M / nt if eps is None else eps, guards=guards, vector=a, meta=info)


def build_preamble(method, nt, M, table, guards=0, **kw):
    """Dispatch on :class:`Method`; guards only apply to FDM_OPT."""
    method = Method.parse(method)
    if method is Method.FDM_OPT:
        return build_fdm_optimized(nt, M, table, guards=guards, **kw)
    if method is Method.FDM_CONV:
        return build_fdm_conventional(nt, M, table, **kw)
    return build_iam(method, nt, M, table, **kw)


# --------------------------------------------------------------------------
# pseudo-pilots and normalization
# --------------------------------------------------------------------------

def pseudo_pilots(pset, table, first_order=True):
    """Pseudo-pilots of every antenna grid (3x3 window when ``first_order``)."""
    P = Q = 1 if first_order else None
    return PseudoPilotGrid(np.array([interference_response(g, table, P=P, Q=Q) for g in pset.grids]))


def normalize_energy(pset, eps, V=None, table=None):
    """Scale each antenna so its SFB output energy equals ``eps``.

    The energy is measured with ``V`` (``d^H V d`` over stacked columns) when
    given, otherwise with the interference table.
    """
    if eps <= 0:
        raise ValueError("energy budget must be positive")
    grids = pset.grids.copy()
    exp = pset.expected_pilots.copy()
    for t in range(pset.nt):
        if V is not None:
            d = grids[t].T.reshape(-1)
            e = float(np.real(np.vdot(d, V @ d)))
        else:
            e = grid_energy(grids[t], table)
        if e <= 0:
            raise ValueError(f"antenna {t} has a zero-energy grid")
        k = np.sqrt(eps / e)
        grids[t] *= k
        exp[t] *= k
    return replace(pset, grids=grids, expected_pilots=exp, energy_budget=float(eps))
