import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbmc_preamble.interference import build_B, build_w
from fbmc_preamble.sdr import (QcqpProblem, SolverError, assemble_qcqp, embed, extract_rank_one,
                               ipm_solve, repair_feasibility, solve_closed_form, solve_sdr,
                               transformation_matrices, unembed)

REFERENCE_NT4 = np.array([0, 0.9207, 0, 0.1952, 0, -0.1952, 0, 0, 0, -0.1952, 0, 0.1952])


@pytest.fixture(scope="module")
def problem4(table256):
    return assemble_qcqp(build_w(table256, 4).w, 4, build_B(table256, 4).B)


def _oracle_value(prob):
    """Optimum of the relaxation via nullspace elimination plus a generalized eigenproblem."""
    import scipy.linalg as sla
    G = prob.G if prob.field == "complex" else np.vstack([prob.G.real, prob.G.imag])
    N = sla.null_space(G) if G.size else np.eye(prob.dim)
    C0 = N.conj().T @ prob.C0 @ N
    B = N.conj().T @ prob.B @ N
    return sla.eigh(C0, B, eigvals_only=True)[-1]


class TestAssembly:
    def test_transformation_matrices(self):
        Ts = transformation_matrices(4, 9)
        assert len(Ts) == 4
        for T in Ts:
            assert T.shape == (9, 12)
            assert set(np.unique(T)) <= {0.0, 1.0}
            np.testing.assert_array_equal(T.sum(axis=1), 1)
        # pilot row 0 sees rows 3 (above), 0, 1 (below)
        np.testing.assert_array_equal(Ts[0][0:3, 9:12], np.eye(3))
        np.testing.assert_array_equal(Ts[0][3:6, 0:3], np.eye(3))

    def test_quadratic_identity(self, table256, rng):
        w = build_w(table256, 4).w
        p = assemble_qcqp(w, 4, build_B(table256, 4).B, field="complex")
        T0 = transformation_matrices(4, 9)[0]
        for _ in range(5):
            a = rng.standard_normal(12) + 1j * rng.standard_normal(12)
            assert np.real(np.vdot(a, p.C0 @ a)) == pytest.approx(abs(np.vdot(w, T0 @ a)) ** 2, rel=1e-12)

    def test_rank_one_and_hermitian(self, problem4):
        for C in [problem4.C0] + problem4.Ci:
            np.testing.assert_allclose(C, C.conj().T, atol=1e-12)
        p = problem4
        lam = np.linalg.eigvalsh(p.C0)
        # real part of a rank-one Hermitian matrix has rank <= 2
        assert np.sum(lam > 1e-10) <= 2
        assert np.linalg.eigvalsh(p.B).min() > 0

    def test_complex_rank_one(self, table256):
        p = assemble_qcqp(build_w(table256, 4).w, 4, build_B(table256, 4).B, field="complex")
        assert np.linalg.matrix_rank(p.C0, tol=1e-10) == 1

    def test_dimension_errors(self, table256):
        with pytest.raises(ValueError):
            assemble_qcqp(np.ones(7), 4, np.eye(12))
        with pytest.raises(ValueError):
            assemble_qcqp(np.ones(9), 4, np.eye(6))


class TestEmbedding:
    @given(st.integers(0, 10_000))
    def test_round_trip(self, seed):
        r = np.random.default_rng(seed)
        A = r.standard_normal((5, 5)) + 1j * r.standard_normal((5, 5))
        H = A + A.conj().T
        np.testing.assert_allclose(unembed(embed(H)), H, atol=1e-14)

    def test_trace_doubles(self, rng):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        H1, H2 = A + A.conj().T, B @ B.conj().T
        assert np.trace(embed(H1) @ embed(H2)) == pytest.approx(2 * np.real(np.trace(H1 @ H2)))


class TestSolver:
    def test_rayleigh_quotient(self, rng):
        A = rng.standard_normal((6, 6))
        C0 = A @ A.T
        p = QcqpProblem(C0, [], np.eye(6), 6, np.zeros(6), np.zeros((0, 6)), "real", 1)
        sol = solve_sdr(p)
        lam, U = np.linalg.eigh(C0)
        assert sol.objective == pytest.approx(lam[-1], rel=1e-7)
        np.testing.assert_allclose(sol.X, np.outer(U[:, -1], U[:, -1]), atol=1e-6)

    def test_nt4_reproduces_reference(self, problem4):
        sol = solve_sdr(problem4)
        a = repair_feasibility(sol.extracted, problem4)
        a = a * np.sign(a[1])
        np.testing.assert_allclose(a, REFERENCE_NT4, atol=5e-3)
        assert sol.pinf <= 1e-8 and sol.dinf <= 1e-8 and sol.gap <= 1e-8
        assert sol.eq_residuals.max() <= 1e-8
        assert sol.energy <= 1 + 1e-8

    def test_matches_oracle(self, problem4, table256):
        assert solve_sdr(problem4).objective == pytest.approx(_oracle_value(problem4), rel=1e-7)
        pc = assemble_qcqp(build_w(table256, 4).w, 4, build_B(table256, 4).B, "complex")
        assert solve_sdr(pc).objective == pytest.approx(_oracle_value(pc), rel=1e-7)

    def test_complex_exceeds_real(self, problem4, table256):
        pc = assemble_qcqp(build_w(table256, 4).w, 4, build_B(table256, 4).B, "complex")
        assert solve_sdr(pc).objective > solve_sdr(problem4).objective
        # frozen oracle values
        assert solve_sdr(problem4).objective == pytest.approx(0.84768, abs=1e-5)
        assert solve_sdr(pc).objective == pytest.approx(0.87069, abs=1e-5)

    def test_without_elimination(self, table256):
        w, B = build_w(table256, 2).w, build_B(table256, 2).B
        p = assemble_qcqp(w, 2, B, "complex")
        a = solve_sdr(p, eliminate=False)
        b = solve_sdr(p)
        assert a.objective == pytest.approx(b.objective, rel=1e-6)

    def test_nt2_tight_and_closed_form(self, table256):
        w, B = build_w(table256, 2).w, build_B(table256, 2).B
        p = assemble_qcqp(w, 2, B, "complex")
        sol = solve_sdr(p)
        closed = np.real(np.vdot(w, np.linalg.solve(B, w)))
        assert sol.objective == pytest.approx(closed, rel=1e-6)
        assert sol.rank_gap <= 1e-6

    def test_scale_invariance(self, problem4):
        from dataclasses import replace
        base = solve_sdr(problem4)
        scaled = solve_sdr(replace(problem4, C0=7.0 * problem4.C0))
        assert scaled.objective == pytest.approx(7 * base.objective, rel=1e-7)
        np.testing.assert_allclose(scaled.X, base.X, atol=1e-6)

    def test_relaxation_bound(self, problem4, rng):
        bound = solve_sdr(problem4).objective
        for _ in range(50):
            a = repair_feasibility(rng.standard_normal(12), problem4)
            assert problem4.objective(a) <= bound + 1e-9

    def test_tolerance_range(self, problem4):
        with pytest.raises(ValueError):
            solve_sdr(problem4, tol=1e-2)

    def test_nonconvergence(self, problem4):
        with pytest.raises(SolverError) as ei:
            solve_sdr(problem4, max_iter=2)
        assert "iterations" in ei.value.diagnostics
        sol = solve_sdr(problem4, max_iter=2, strict=False)
        assert not sol.converged

    def test_diagnostics_json(self, problem4, tmp_path):
        sol = solve_sdr(problem4)
        d = json.loads(sol.to_json(tmp_path / "d.json"))
        assert d["converged"] and len(d["eigenvalues"]) == 12

    def test_ipm_small_lp_like(self):
        # min x11 + x22 s.t. x11 + x22 = 2  -> objective 2
        res = ipm_solve(np.eye(2), [np.eye(2)], [0.0], [2.0])
        assert res["converged"]
        assert np.trace(res["X"]) == pytest.approx(2.0, rel=1e-7)


class TestExtraction:
    def test_outer_product(self, rng):
        v = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        a, gap, lam = extract_rank_one(np.outer(v, v.conj()))
        k = np.argmax(np.abs(v))
        ref = v * np.exp(-1j * np.angle(v[k]))
        np.testing.assert_allclose(a, ref, atol=1e-10)
        assert gap == pytest.approx(0, abs=1e-12)
        top = a[np.argmax(np.abs(a))]
        assert abs(top.imag) <= 1e-12 and top.real > 0

    def test_rank_gap_definition(self):
        a, gap, lam = extract_rank_one(np.diag([4.0, 1.0, 0.0]))
        assert gap == pytest.approx(0.25)

    def test_tie_break_deterministic(self):
        a1, _, _ = extract_rank_one(np.eye(3))
        a2, _, _ = extract_rank_one(np.eye(3))
        np.testing.assert_array_equal(a1, a2)

    def test_non_positive(self):
        with pytest.raises(ValueError):
            extract_rank_one(-np.eye(2))


class TestRepair:
    def test_fixed_point(self, problem4):
        a = repair_feasibility(solve_sdr(problem4).extracted, problem4)
        np.testing.assert_allclose(repair_feasibility(a, problem4), a, atol=1e-12)

    @pytest.mark.parametrize("field", ["real", "complex"])
    def test_postconditions(self, table256, rng, field):
        p = assemble_qcqp(build_w(table256, 4).w, 4, build_B(table256, 4).B, field)
        a = rng.standard_normal(12) + (1j * rng.standard_normal(12) if field == "complex" else 0)
        r = repair_feasibility(a, p)
        assert np.abs(p.pseudo_pilots(r)).max() <= 1e-10
        assert p.energy(r) == pytest.approx(1.0, abs=1e-10)

    def test_small_loss(self, problem4):
        sol = solve_sdr(problem4)
        a = repair_feasibility(sol.extracted, problem4)
        assert problem4.objective(a) >= 0.99 * sol.objective

    def test_degenerate(self, problem4):
        with pytest.raises(ValueError):
            repair_feasibility(np.zeros(12), problem4)


def test_closed_form_unit_energy(table256):
    w, B = build_w(table256, 2).w, build_B(table256, 2).B
    a = solve_closed_form(w, B)
    assert np.real(np.vdot(a, B @ a)) == pytest.approx(1.0, abs=1e-12)
