"""QCQP assembly, semidefinite relaxation and rank-one extraction.

The relaxed problem is::

    maximize   Tr(C0 X)
    subject to Tr(Ci X) = 0,  i = 1..nt-1
               Tr(B X) <= 1
               X >= 0 (PSD)

It is solved with a small dense primal-dual interior-point method (HKM
direction, Mehrotra predictor-corrector).  Because every ``Ci`` is PSD, the
equality constraints force ``Ci X = 0``; by default their common range is
eliminated up front, which restores strict feasibility and shrinks the
problem.  Complex data are handled through the real embedding
``[[Re, -Im], [Im, Re]]``.
"""
from dataclasses import dataclass, field
import json

import numpy as np
import scipy.linalg as sla


class SolverError(RuntimeError):
    """Raised when the interior-point method does not reach tolerance."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


# --------------------------------------------------------------------------
# problem assembly
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QcqpProblem:
    """Matrices of the preamble QCQP.

    ``G`` stacks the constraint functionals: row ``i`` is ``w^H T_i`` so the
    constrained pseudo-pilots are ``G @ a``.  ``g0 = w^H T_0`` gives the
    objective pseudo-pilot.
    """

    C0: np.ndarray
    Ci: list
    B: np.ndarray
    dim: int
    g0: np.ndarray
    G: np.ndarray
    field: str = "real"
    nt: int = 0

    def objective(self, a):
        return float(abs(self.g0 @ a) ** 2)

    def energy(self, a):
        return float(np.real(np.vdot(a, self.B @ a)))

    def pseudo_pilots(self, a):
        return self.G @ a


def transformation_matrices(nt, wlen):
    """Row-selection matrices ``T_i`` that gather the neighbourhood of pilot row ``i``.

    With ``wlen = 9`` each ``T_i`` picks rows ``(i-1) % nt, i, (i+1) % nt``;
    with ``wlen = 6`` (``nt = 2``, folded) it picks rows ``i, (i+1) % 2``.
    """
    if wlen == 9:
        order = lambda i: [(i - 1) % nt, i, (i + 1) % nt]
    elif wlen == 6 and nt == 2:
        order = lambda i: [i, (i + 1) % 2]
    else:
        raise ValueError(f"weight vector of length {wlen} does not fit nt={nt}")
    Ts = []
    for i in range(nt):
        T = np.zeros((wlen, 3 * nt))
        for blk, r in enumerate(order(i)):
            T[3 * blk:3 * blk + 3, 3 * r:3 * r + 3] = np.eye(3)
        Ts.append(T)
    return Ts


def assemble_qcqp(w, nt, Bbar, field="real"):
    """Build ``C_i = T_i^T w w^H T_i`` and pack the problem.

    Parameters
    ----------
    w : array_like
        Weighting vector (length 9, or 6 for the folded ``nt = 2`` case).
    Bbar : array_like
        Energy matrix, ``3*nt`` square.
    field : {"real", "complex"}
        Domain of the pilot vector.  For real pilots the matrices are
        replaced by their real parts (``a^T C a = a^T Re(C) a``).
    """
    w = np.asarray(w, dtype=np.complex128).reshape(-1)
    B = np.asarray(Bbar, dtype=np.complex128)
    if B.shape != (3 * nt, 3 * nt):
        raise ValueError(f"B must be {3 * nt}x{3 * nt}, got {B.shape}")
    if field not in ("real", "complex"):
        raise ValueError("field must be 'real' or 'complex'")
    Ts = transformation_matrices(nt, w.size)
    rows = np.array([np.conj(w) @ T for T in Ts])  # w^H T_i
    mats = [np.outer(np.conj(r), r) for r in rows]  # T^T w w^H T
    if field == "real":
        mats = [m.real.copy() for m in mats]
        B = B.real.copy()
    return QcqpProblem(mats[0], mats[1:], B, 3 * nt, rows[0], rows[1:], field, nt)


# --------------------------------------------------------------------------
# real/complex embedding
# --------------------------------------------------------------------------

def embed(H):
    H = np.asarray(H)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def unembed(S):
    S = np.asarray(S)
    n = S.shape[0] // 2
    return 0.5 * ((S[:n, :n] + S[n:, n:]) + 1j * (S[n:, :n] - S[:n, n:]))


# --------------------------------------------------------------------------
# interior-point core
# --------------------------------------------------------------------------

def _sym(A):
    return 0.5 * (A + A.T)


def _max_step(X, dX):
    """Largest alpha with X + alpha*dX PSD (inf if unbounded)."""
    L = np.linalg.cholesky(X)
    Li = sla.solve_triangular(L, np.eye(X.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def ipm_solve(C, A, a, b, cs=0.0, tol=1e-8, max_iter=200):
    """Minimize ``<C, X> + cs*s`` s.t. ``<A_k, X> + a_k s = b_k``, ``X >= 0``, ``s >= 0``.

    The scalar ``s`` is a slack (pass ``a = 0`` to leave it unused; it is then
    driven to its own central path harmlessly).

    Returns
    -------
    dict with keys X, s, y, Z, z, iterations, pinf, dinf, gap, converged
    """
    C = _sym(np.asarray(C, float))
    A = [_sym(np.asarray(Ak, float)) for Ak in A]
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = C.shape[0]
    m = len(A)
    normA = max([np.linalg.norm(Ak) for Ak in A] + [1.0])
    xi = max(10.0, np.sqrt(n), n * max((1 + abs(bk)) / (1 + np.linalg.norm(Ak)) for Ak, bk in zip(A, b)))
    eta = max(10.0, np.sqrt(n), normA, np.linalg.norm(C))
    X, Z = xi * np.eye(n), eta * np.eye(n)
    s, z = xi, eta
    y = np.zeros(m)
    I = np.eye(n)
    nb, nc = 1 + np.linalg.norm(b), 1 + np.linalg.norm(C)
    info = {}
    for it in range(1, max_iter + 1):
        AX = np.array([np.sum(Ak * X) for Ak in A]) + a * s
        Rp = b - AX
        Rd = C - sum(yk * Ak for yk, Ak in zip(y, A)) - Z
        rd = cs - a @ y - z
        mu = (np.sum(X * Z) + s * z) / (n + 1)
        pobj = np.sum(C * X) + cs * s
        dobj = b @ y
        pinf = np.linalg.norm(Rp) / nb
        dinf = np.sqrt(np.linalg.norm(Rd) ** 2 + rd ** 2) / nc
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        info = dict(iterations=it - 1, pinf=pinf, dinf=dinf, gap=gap, pobj=pobj, dobj=dobj)
        if pinf <= tol and dinf <= tol and gap <= tol:
            return dict(X=X, s=s, y=y, Z=Z, z=z, converged=True, **info)

        Zi = np.linalg.inv(Z)
        Zi = _sym(Zi)
        # Schur complement, shared by predictor and corrector
        XA = [X @ Ak @ Zi for Ak in A]
        Msch = np.array([[np.sum(Ak * XAl) for XAl in XA] for Ak in A]) + np.outer(a, a) * (s / z)

        def direction(Rc, rc):
            T = (Rc - X @ Rd) @ Zi
            t = (rc - s * rd) / z
            rhs = Rp - (np.array([np.sum(Ak * T) for Ak in A]) + a * t)
            dy = np.linalg.solve(Msch, rhs)
            dZ = Rd - sum(dyk * Ak for dyk, Ak in zip(dy, A))
            dz = rd - a @ dy
            dX = _sym(T + X @ sum(dyk * Ak for dyk, Ak in zip(dy, A)) @ Zi)
            ds = t + (s / z) * (a @ dy)
            return dX, ds, dy, _sym(dZ), dz

        def steps(dX, ds, dZ, dz):
            ap = _max_step(X, dX)
            if ds < 0:
                ap = min(ap, -s / ds)
            ad = _max_step(Z, dZ)
            if dz < 0:
                ad = min(ad, -z / dz)
            return ap, ad

        # predictor
        dXa, dsa, dya, dZa, dza = direction(-X @ Z, -s * z)
        ap, ad = steps(dXa, dsa, dZa, dza)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (np.sum((X + ap * dXa) * (Z + ad * dZa)) + (s + ap * dsa) * (z + ad * dza)) / (n + 1)
        sigma = min(1.0, (mu_aff / mu) ** 3)
        # corrector
        Rc = sigma * mu * I - X @ Z - dXa @ dZa
        rc = sigma * mu - s * z - dsa * dza
        dX, ds, dy, dZ, dz = direction(Rc, rc)
        ap, ad = steps(dX, ds, dZ, dz)
        tau = 0.98
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        X = _sym(X + ap * dX)
        s = s + ap * ds
        y = y + ad * dy
        Z = _sym(Z + ad * dZ)
        z = z + ad * dz
    info["iterations"] = max_iter
    return dict(X=X, s=s, y=y, Z=Z, z=z, converged=False, **info)


# --------------------------------------------------------------------------
# relaxation
# --------------------------------------------------------------------------

@dataclass
class SdpSolution:
    X: np.ndarray
    objective: float
    eq_residuals: np.ndarray
    energy: float
    rank_gap: float
    extracted: np.ndarray
    eigenvalues: np.ndarray
    iterations: int = 0
    gap: float = 0.0
    pinf: float = 0.0
    dinf: float = 0.0
    converged: bool = True
    reduced_dim: int = 0
    extra: dict = field(default_factory=dict)

    def diagnostics(self):
        return {
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "duality_gap": float(self.gap),
            "primal_infeasibility": float(self.pinf),
            "dual_infeasibility": float(self.dinf),
            "objective": float(self.objective),
            "energy": float(self.energy),
            "eq_residuals": [float(r) for r in self.eq_residuals],
            "rank_gap": float(self.rank_gap),
            "reduced_dim": int(self.reduced_dim),
            "eigenvalues": [float(v) for v in self.eigenvalues],
        }

    def to_json(self, path=None):
        text = json.dumps(self.diagnostics(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _range_basis(mats, rtol=1e-10):
    cols = []
    for Cm in mats:
        lam, U = np.linalg.eigh(_sym(Cm))
        keep = lam > rtol * max(lam.max(), 1e-300)
        cols.append(U[:, keep])
    if not cols:
        return np.zeros((mats[0].shape[0] if mats else 0, 0))
    return np.hstack(cols)


def _solve_real(C0, Ci, B, tol, max_iter, eliminate):
    n = C0.shape[0]
    if eliminate and Ci:
        R = _range_basis(Ci)
        N = sla.null_space(R.T, rcond=1e-10) if R.size else np.eye(n)
        if N.shape[1] == 0:
            raise SolverError("equality constraints leave no feasible direction")
        C0r, Br, Cir = N.T @ C0 @ N, N.T @ B @ N, []
    else:
        N = np.eye(n)
        C0r, Br, Cir = C0, B, list(Ci)
    A = [Br] + Cir
    avec = np.array([1.0] + [0.0] * len(Cir))
    b = np.array([1.0] + [0.0] * len(Cir))
    res = ipm_solve(-C0r, A, avec, b, tol=tol, max_iter=max_iter)
    X = _sym(N @ res["X"] @ N.T)
    res["X"] = X
    res["reduced_dim"] = N.shape[1]
    return res


def solve_sdr(problem, tol=1e-8, eliminate=True, max_iter=200, strict=True):
    """Solve the relaxation and extract a rank-one candidate.

    Parameters
    ----------
    problem : QcqpProblem
    tol : float
        Target for primal/dual infeasibility and relative gap, in [1e-10, 1e-4].
    eliminate : bool
        Remove the equality-constraint range before solving.
    strict : bool
        Raise :class:`SolverError` on non-convergence (otherwise return the
        best iterate with ``converged=False``).
    """
    if not (1e-10 <= tol <= 1e-4):
        raise ValueError("tol must lie in [1e-10, 1e-4]")
    if problem.field == "complex":
        C0, Ci, B = embed(problem.C0) / 2, [embed(c) / 2 for c in problem.Ci], embed(problem.B) / 2
    else:
        C0, Ci, B = problem.C0, problem.Ci, problem.B
    res = _solve_real(C0, Ci, B, tol, max_iter, eliminate)
    X = res["X"]
    if problem.field == "complex":
        X = unembed(X)
    X = 0.5 * (X + X.conj().T)
    objective = float(np.real(np.trace(problem.C0 @ X)))
    eqr = np.array([abs(np.trace(c @ X)) for c in problem.Ci])
    energy = float(np.real(np.trace(problem.B @ X)))
    a, gap_ratio, lam = extract_rank_one(X)
    sol = SdpSolution(X, objective, eqr, energy, gap_ratio, a, lam, res["iterations"], res["gap"],
                      res["pinf"], res["dinf"], res["converged"], res["reduced_dim"])
    if strict and not res["converged"]:
        raise SolverError(f"SDR did not converge in {max_iter} iterations", sol.diagnostics())
    return sol


def _normalize_phase(v):
    k = int(np.argmax(np.abs(v)))
    if np.iscomplexobj(v):
        return v * np.exp(-1j * np.angle(v[k]))
    return v * np.sign(v[k])


def extract_rank_one(X, tie_tol=1e-9):
    """Principal eigenvector scaled by the square root of its eigenvalue.

    Returns
    -------
    a : ndarray
        ``sqrt(lam_max) * u_max`` with the largest-magnitude entry made real
        positive.
    rank_gap : float
        ``lam_2 / lam_1``.
    eigenvalues : ndarray
        Spectrum in descending order.
    """
    if isinstance(X, SdpSolution):
        X = X.X
    X = np.asarray(X)
    lam, U = np.linalg.eigh(X)
    lam, U = lam[::-1], U[:, ::-1]
    if lam[0] <= 0:
        raise ValueError("largest eigenvalue is not positive")
    cands = [_normalize_phase(U[:, k]) for k in range(len(lam)) if lam[0] - lam[k] <= tie_tol * lam[0]]
    if len(cands) > 1:
        key = lambda v: tuple(np.round(np.concatenate([v.real, np.imag(v)]), 12))
        cands.sort(key=key, reverse=True)
    a = np.sqrt(lam[0]) * cands[0]
    if not np.iscomplexobj(X):
        a = a.real
    gap = float(lam[1] / lam[0]) if len(lam) > 1 else 0.0
    return a, gap, lam


def repair_feasibility(a, problem):
    """Project onto the constraint nullspace and rescale to unit energy."""
    a = np.asarray(a)
    if problem.field == "real":
        a = np.real(a).astype(float)
        G = np.vstack([problem.G.real, problem.G.imag])
    else:
        a = a.astype(np.complex128)
        G = problem.G
    if G.size:
        a = a - np.linalg.pinv(G) @ (G @ a)
    e = problem.energy(a)
    if not np.isfinite(e) or e <= 1e-300 or np.linalg.norm(a) < 1e-14:
        raise ValueError("projection annihilated the vector")
    return a / np.sqrt(e)


def solve_closed_form(w, B):
    """``a = B^{-1} w`` scaled to ``a^H B a = 1``."""
    w = np.asarray(w, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    a = np.linalg.solve(B, w)
    a = a / np.sqrt(np.real(np.vdot(a, B @ a)))
    return _normalize_phase(a)
