import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from fbmc_preamble.filterbank import synthesize
from fbmc_preamble.interference import build_B, build_w, grid_energy, transmux_matrix
from fbmc_preamble.preamble import (Method, base_columns, build_fdm_conventional, build_fdm_optimized,
                                    build_iam, build_preamble, conventional_block, expand_fdm,
                                    first_order_pseudo_pilots, iam_pilot_column, normalize_energy,
                                    optimal_vector, pseudo_pilots)
from fbmc_preamble.sdr import assemble_qcqp, transformation_matrices

METHODS = [m.value for m in Method]


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("nt", [2, 4])
def test_column_counts(method, nt, table64):
    p = build_preamble(method, nt, 64, table64)
    expected = {"iam-r": 2 * nt + 1, "iam-c": 2 * nt + 1, "e-iam-c": 3 * nt, "fdm-conv": 3, "fdm-opt": 3}
    assert p.num_cols == expected[method] == base_columns(method, nt)


def test_guards_appended(table64):
    p = build_fdm_optimized(2, 64, table64, guards=2)
    assert p.num_cols == 5 and p.guards == 2
    np.testing.assert_array_equal(p.grids[:, :, 3:], 0)
    with pytest.raises(ValueError):
        build_fdm_optimized(2, 64, table64, guards=-1)


def test_method_parse():
    assert Method.parse("FDM-OPT") is Method.FDM_OPT
    assert Method.parse(Method.IAM_R) is Method.IAM_R
    with pytest.raises(ValueError):
        Method.parse("lts")


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("nt", [2, 4])
def test_energy_budget_time_domain(method, nt, filt64, table64):
    p = build_preamble(method, nt, 64, table64)
    for t in range(nt):
        s = synthesize(p.grids[t], filt64)
        assert np.sum(np.abs(s) ** 2) == pytest.approx(64 / nt, rel=1e-9)


def test_normalize_with_V(table64):
    p = build_iam("iam-r", 2, 64, table64)
    V = transmux_matrix(table64, ncols=p.num_cols)
    q = normalize_energy(p, 10.0, V=V)
    for t in range(2):
        assert grid_energy(q.grids[t], table64) == pytest.approx(10.0, rel=1e-9)
    # already normalized grids are a fixed point
    r = normalize_energy(q, 10.0, table=table64)
    np.testing.assert_allclose(r.grids, q.grids, rtol=1e-12)
    with pytest.raises(ValueError):
        normalize_energy(p, 0.0, table=table64)


@given(st.floats(0.1, 100))
def test_normalize_scales(eps):
    t = _small_table()
    p = build_iam("iam-c", 2, 16, t)
    q = normalize_energy(p, eps, table=t)
    np.testing.assert_allclose(q.grids, p.grids * np.sqrt(eps / p.energy_budget), rtol=1e-10)


_CACHE = {}


def _small_table():
    if "t" not in _CACHE:
        from fbmc_preamble.filterbank import design_phydyas
        from fbmc_preamble.interference import full_table
        _CACHE["t"] = full_table(design_phydyas(16))
    return _CACHE["t"]


class TestIam:
    def test_iam_r_real_pattern(self, table64):
        p = build_iam("iam-r", 2, 64, table64)
        g = p.grids[0][:, p.pilot_cols[0]]
        np.testing.assert_allclose(g.imag, 0)
        s = np.sign(g.real)
        np.testing.assert_array_equal(s[:8], [1, 1, -1, -1, 1, 1, -1, -1])
        assert np.allclose(np.abs(g), np.abs(g[0]))

    def test_iam_c_reinforces(self, table64):
        # neighbours add in phase: pseudo-pilot / pilot = 1 + 2*beta at every subcarrier
        p = build_iam("iam-c", 2, 64, table64)
        pp = pseudo_pilots(p, table64).values
        for c in p.pilot_cols:
            ratio = pp[0, :, c] / p.grids[0, :, c]
            np.testing.assert_allclose(ratio, 1 + 2 * table64.beta, atol=1e-6)

    def test_iam_c_pattern_parity(self):
        np.testing.assert_allclose(iam_pilot_column("iam-c", 8, 1)[:4], [1, 1j, -1, -1j])
        np.testing.assert_allclose(iam_pilot_column("iam-c", 8, 2)[:4], [1, -1j, -1, 1j])

    @pytest.mark.parametrize("method", ["iam-r", "iam-c", "e-iam-c"])
    def test_constant_magnitude(self, method, table64):
        p = build_iam(method, 2, 64, table64)
        pp = pseudo_pilots(p, table64).values
        for t in range(2):
            for c in p.pilot_cols:
                np.testing.assert_allclose(np.abs(pp[t, :, c]), np.abs(pp[t, 0, c]), rtol=1e-9)

    def test_hadamard_signs(self, table64):
        p = build_iam("iam-r", 2, 64, table64)
        c0, c1 = p.pilot_cols
        # per-antenna normalization differs only through the near-PR residual
        np.testing.assert_allclose(p.grids[0, :, c0], p.grids[1, :, c0], rtol=1e-4)
        np.testing.assert_allclose(p.grids[0, :, c1], -p.grids[1, :, c1], rtol=1e-4)

    def test_pilot_ordering(self, table64):
        mags = [np.abs(pseudo_pilots(build_iam(m, 2, 64, table64), table64).values[0, 0, 1])
                for m in ("iam-r", "iam-c", "e-iam-c")]
        assert mags[0] < mags[1] < mags[2]

    def test_non_power_of_two(self, table64):
        with pytest.raises(ValueError):
            build_iam("iam-r", 3, 64, table64)


class TestFdm:
    @pytest.mark.parametrize("method", ["fdm-conv", "fdm-opt"])
    @pytest.mark.parametrize("nt", [2, 4])
    def test_disjoint_supports(self, method, nt, table64):
        p = build_preamble(method, nt, 64, table64)
        assert np.all(p.active.sum(axis=0) == 1)
        pp = pseudo_pilots(p, table64).values[:, :, 1]
        for t in range(nt):
            assert np.abs(pp[t][~p.active[t]]).max() <= 1e-9
            assert np.abs(pp[t][p.active[t]]).min() > 0.5

    def test_expand_shift(self):
        A = np.arange(6).reshape(2, 3)
        G = expand_fdm(A, 4)
        np.testing.assert_array_equal(G[0, :, 1], [1, 4, 1, 4])
        np.testing.assert_array_equal(G[1, :, 1], [4, 1, 4, 1])

    def test_indivisible(self, table64):
        with pytest.raises(ValueError):
            build_fdm_optimized(3, 64, table64)

    def test_conventional_efficiency(self, table64):
        g = table64.gamma
        a = build_fdm_conventional(2, 64, table64).vector
        c = first_order_pseudo_pilots(a.reshape(2, 3), table64)
        assert abs(c[0]) ** 2 == pytest.approx((1 + 2 * g) ** 2 / (3 + 4 * g), rel=1e-3)
        assert abs(c[1]) <= 1e-9

    def test_conventional_guard_rows(self, table64):
        A = conventional_block(4, table64)
        np.testing.assert_array_equal(A[1:, [0, 2]], 0)
        np.testing.assert_allclose(first_order_pseudo_pilots(A, table64)[1:], 0, atol=1e-12)

    @pytest.mark.parametrize("nt", [2, 4])
    def test_optimized_beats_conventional(self, nt, table64):
        a_opt, _ = optimal_vector(nt, table64)
        a_con = build_fdm_conventional(nt, 64, table64).vector
        c_opt = first_order_pseudo_pilots(a_opt.reshape(nt, 3), table64)[0]
        c_con = first_order_pseudo_pilots(a_con.reshape(nt, 3), table64)[0]
        assert abs(c_opt) > abs(c_con)

    def test_nt2_closed_form_properties(self, table64):
        a, info = optimal_vector(2, table64)
        w = build_w(table64, 2).w
        c = first_order_pseudo_pilots(a.reshape(2, 3), table64)
        assert abs(c[1]) <= 1e-9
        assert c[0] == pytest.approx(np.vdot(w, a), abs=1e-12)
        assert info["objective"] == pytest.approx(1.0, abs=1e-3)

    def test_nt4_vector(self, table256):
        a, info = optimal_vector(4, table256)
        ref = np.array([0, 0.9207, 0, 0.1952, 0, -0.1952, 0, 0, 0, -0.1952, 0, 0.1952])
        a = a * np.sign(a[1].real)
        np.testing.assert_allclose(a, ref, atol=5e-3)

    def test_argmax_scale_invariant(self, table64):
        Bm = build_B(table64, 4).B
        w = build_w(table64, 4).w
        from fbmc_preamble.sdr import repair_feasibility, solve_sdr
        p1 = assemble_qcqp(w, 4, Bm)
        p2 = assemble_qcqp(3.0 * w, 4, Bm)
        a1 = repair_feasibility(solve_sdr(p1).extracted, p1)
        a2 = repair_feasibility(solve_sdr(p2).extracted, p2)
        np.testing.assert_allclose(np.abs(a1), np.abs(a2), atol=1e-6)

    def test_kkt(self, table256):
        nt = 4
        a, info = optimal_vector(nt, table256)
        Bm = build_B(table256, nt).B
        prob = assemble_qcqp(build_w(table256, nt).w, nt, Bm)
        G = np.vstack([prob.G.real, prob.G.imag])
        N = sla.null_space(G)
        a = a.real
        lam = prob.objective(a)
        r = N.T @ (np.real(prob.C0) @ a - lam * np.real(Bm) @ a)
        assert np.abs(r).max() <= 1e-5

    def test_projected_gradient_oracle(self, table256):
        # independent ascent over the feasible real subspace from 100 starts
        nt = 4
        Bm = np.real(build_B(table256, nt).B)
        w = build_w(table256, nt).w
        T0 = transformation_matrices(nt, 9)[0]
        prob = assemble_qcqp(w, nt, build_B(table256, nt).B)
        G = np.vstack([prob.G.real, prob.G.imag])
        N = sla.null_space(G)
        u = T0.T @ np.conj(w)
        rng = np.random.default_rng(0)
        best = 0.0
        for _ in range(100):
            x = rng.standard_normal(N.shape[1])
            for _ in range(200):
                a = N @ x
                a /= np.sqrt(a @ Bm @ a)
                f = abs(u @ a) ** 2
                grad = 2 * np.real(np.conj(u @ a) * u)
                a = a + 0.5 * np.linalg.solve(Bm, grad)
                x = N.T @ a
            a = N @ x
            a /= np.sqrt(a @ Bm @ a)
            best = max(best, abs(u @ a) ** 2)
        got, _ = optimal_vector(nt, table256)
        assert prob.objective(got) >= best - 1e-6
