import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import simo_scenario
from oracles import alm_sdp_max, spectraplex_min
from psasec.convex import (SdpProblem, bisection, dominant_eig, embed_hermitian, extract_hermitian,
                           max_generalized_eig, penalty_objective, rank1_gap, rank1_penalty_loop,
                           rayleigh_quotient, solve_sdp)
from psasec.em import DoaPoa
from psasec.errors import InvalidBracket, SingularB
from psasec.simo import _pointing_sdps, optimize_pointing

seeds = st.integers(0, 2 ** 32 - 1)


def random_hermitian(rng, n, psd=False):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return m @ m.conj().T if psd else 0.5 * (m + m.conj().T)


def test_generalized_eig_diagonal():
    lam, v = max_generalized_eig(np.diag([1.0, 2.0]), np.eye(2))
    assert lam == pytest.approx(2.0)
    np.testing.assert_allclose(v, [0, 1], atol=1e-14)


def test_generalized_eig_rank_one():
    rng = np.random.default_rng(0)
    h = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    b = random_hermitian(rng, 5, psd=True) + np.eye(5)
    lam, v = max_generalized_eig(np.outer(h, h.conj()), b)
    binv_h = np.linalg.solve(b, h)
    assert lam == pytest.approx(np.real(np.vdot(h, binv_h)), rel=1e-10)
    # parallel to b^-1 h
    assert abs(np.vdot(binv_h, v)) == pytest.approx(np.linalg.norm(binv_h), rel=1e-10)


def test_generalized_eig_quotient_and_phase():
    rng = np.random.default_rng(1)
    a = random_hermitian(rng, 6, psd=True)
    b = random_hermitian(rng, 6, psd=True) + 0.5 * np.eye(6)
    lam, v = max_generalized_eig(a, b)
    assert rayleigh_quotient(v, a, b) == pytest.approx(lam, abs=1e-10 * lam)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    k = np.argmax(np.abs(v))
    assert v[k].imag == 0 and v[k].real >= 0


def test_generalized_eig_singular_b():
    with pytest.raises(SingularB):
        max_generalized_eig(np.eye(2), np.diag([1.0, 0.0]))


@given(seeds, st.floats(0.01, 100.0))
def test_generalized_eig_scaling(seed, c):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 4, psd=True)
    b = random_hermitian(rng, 4, psd=True) + np.eye(4)
    lam, v = max_generalized_eig(a, b)
    lam_c, v_c = max_generalized_eig(c * a, b)
    assert lam_c == pytest.approx(c * lam, rel=1e-9)
    assert abs(np.vdot(v, v_c)) == pytest.approx(1.0, abs=1e-6)


def test_sdp_trace_bound():
    sol = solve_sdp(SdpProblem(2, np.eye(2), "max", [], [(np.eye(2), 1.0)]))
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(1.0, abs=1e-6)


def test_sdp_spectraplex_real_and_complex():
    rng = np.random.default_rng(2)
    for c in (np.real(random_hermitian(rng, 5)), random_hermitian(rng, 4)):
        sol = solve_sdp(SdpProblem(c.shape[0], c, "min", [(np.eye(c.shape[0]), 1.0)]))
        lam_min = np.linalg.eigvalsh(c)[0]
        assert sol.objective_value == pytest.approx(lam_min, abs=1e-6)
        # independent first-order route on the real case
        if np.isrealobj(c):
            value, _ = spectraplex_min(c, iters=5000)
            assert sol.objective_value == pytest.approx(value, abs=1e-5)


def test_sdp_solution_contract():
    rng = np.random.default_rng(3)
    c = np.real(random_hermitian(rng, 4))
    sol = solve_sdp(SdpProblem(4, c, "min", [(np.eye(4), 2.0)], [(np.diag([1.0, 0, 0, 0]), 0.3)]), tol=1e-8)
    assert sol.status == "optimal"
    assert np.linalg.eigvalsh(sol.x)[0] >= -1e-7
    assert abs(np.trace(sol.x) - 2.0) <= 1e-7
    assert sol.x[0, 0] <= 0.3 + 1e-7
    assert sol.residuals["gap"] <= 1e-7


@given(seeds)
def test_sdp_weak_duality(seed):
    rng = np.random.default_rng(seed)
    n = 4
    c = np.real(random_hermitian(rng, n))
    f = np.real(random_hermitian(rng, n, psd=True)) + np.eye(n)
    for sense in ("min", "max"):
        sol = solve_sdp(SdpProblem(n, c, sense, [(f, 1.0)]), tol=1e-8)
        p, d = sol.residuals["primal_objective"], sol.residuals["dual_objective"]
        if sense == "min":
            assert p >= d - 1e-6
        else:
            assert p <= d + 1e-6


def test_sdp_infeasible_detected():
    # tr X = -1 has no PSD solution
    sol = solve_sdp(SdpProblem(2, np.eye(2), "min", [(np.eye(2), -1.0)]), max_iter=200)
    assert sol.status == "infeasible"


def test_pointing_relaxation_matches_first_order_oracle():
    rng = np.random.default_rng(4)
    for _ in range(2):
        desired = DoaPoa(rng.uniform(0, np.pi), np.pi / 2, rng.uniform(-1.5, 1.5), rng.uniform(-0.7, 0.7))
        jammer = DoaPoa(rng.uniform(0, np.pi), np.pi / 2, rng.uniform(-1.5, 1.5), rng.uniform(-0.7, 0.7))
        scen = simo_scenario(0, n_d=4, desired=desired, jammer=jammer)
        basis, a_red, f_red = _pointing_sdps(scen.q_d, scen.q_j)
        eqs = [(f, 1.0) for f in f_red]
        sol = solve_sdp(SdpProblem(basis.shape[1], a_red, "max", eqs), tol=1e-9)
        value, _, residual = alm_sdp_max(a_red, eqs, outer=100, inner=200)
        assert residual < 1e-6
        assert sol.objective_value == pytest.approx(value, rel=1e-4)


def test_pointing_relaxation_matches_cvxpy():
    cp = pytest.importorskip("cvxpy")
    scen = simo_scenario(5, n_d=4, jammer=DoaPoa.from_degrees(70, 90, 10, 15))
    basis, a_red, f_red = _pointing_sdps(scen.q_d, scen.q_j)
    k = basis.shape[1]
    x = cp.Variable((k, k), PSD=True)
    prob = cp.Problem(cp.Maximize(cp.trace(a_red @ x)), [cp.trace(f @ x) == 1 for f in f_red])
    prob.solve()
    sol = solve_sdp(SdpProblem(k, a_red, "max", [(f, 1.0) for f in f_red]), tol=1e-9)
    assert sol.objective_value == pytest.approx(prob.value, rel=1e-4)


def test_embedding_round_trip():
    rng = np.random.default_rng(6)
    for n in (1, 3, 7):
        x = random_hermitian(rng, n)
        y = embed_hermitian(x)
        np.testing.assert_allclose(y, y.T, atol=0)
        np.testing.assert_allclose(extract_hermitian(y), x, atol=1e-14)


@given(seeds, st.integers(1, 6))
def test_embedding_preserves_spectrum(seed, n):
    x = random_hermitian(np.random.default_rng(seed), n)
    w = np.linalg.eigvalsh(x)
    np.testing.assert_allclose(np.linalg.eigvalsh(embed_hermitian(x)), np.sort(np.repeat(w, 2)), atol=1e-10)


@given(seeds, st.integers(1, 6))
def test_rank1_gap_nonnegative(seed, n):
    x = random_hermitian(np.random.default_rng(seed), n, psd=True)
    assert rank1_gap(x) >= -1e-9 * np.trace(x).real
    v = x[:, 0]
    assert abs(rank1_gap(np.outer(v, v.conj()))) <= 1e-9 * np.linalg.norm(v) ** 2


def test_penalty_loop_rank_one_start():
    v = np.array([1.0, 2.0, -1.0])
    x0 = np.outer(v, v)

    def template(prev):
        raise AssertionError("no subproblem should be needed")

    res = rank1_penalty_loop(template, x0)
    assert res.iterations == 1
    assert res.gap == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(np.outer(res.vector, res.vector), x0, atol=1e-12)


def test_penalty_loop_monotone_on_pointing_instance():
    # seed 11, N_D = 4: converges well inside the default iteration cap
    scen = simo_scenario(11, n_d=4)
    basis, a_red, f_red = _pointing_sdps(scen.q_d, scen.q_j)
    k = basis.shape[1]
    eqs = [(f, 1.0) for f in f_red]
    x0 = solve_sdp(SdpProblem(k, a_red, "max", eqs), tol=1e-9).x

    def template(prev):
        return SdpProblem(k, penalty_objective(prev), "min", eqs)

    res = rank1_penalty_loop(template, x0, max_iter=50)
    assert res.converged and res.gap <= 1e-6 and res.iterations <= 51
    assert all(b <= a + 1e-9 for a, b in zip(res.gap_trace, res.gap_trace[1:]))
    for f in f_red:
        assert res.vector @ f @ res.vector == pytest.approx(1.0, abs=1e-6)


def test_dominant_eig_phase():
    lam, v = dominant_eig(np.diag([1.0, 3.0, 2.0]))
    assert lam == pytest.approx(3.0)
    np.testing.assert_allclose(v, [0, 1, 0])


def test_bisection_examples():
    assert bisection(0.0, 1.0, lambda g: g <= 0.37, 1e-6) == pytest.approx(0.37, abs=1e-6)
    assert bisection(0.0, 1.0, lambda g: True, 1e-6) == 1.0
    with pytest.raises(InvalidBracket):
        bisection(0.0, 1.0, lambda g: False, 1e-6)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_bisection_threshold(t, width):
    hi = t + width + 1e-3
    tol = 1e-4 * (hi - 0.0)
    got = bisection(0.0, hi, lambda g: g <= t, tol)
    assert t - tol <= got <= t + 1e-12


def test_bisection_gamma_within_relaxed_bound():
    scen = simo_scenario(7, n_d=4, jammer=DoaPoa.from_degrees(100, 90, 20, 0))
    res = optimize_pointing(scen)
    info = res.diagnostics
    tol = 1e-4 * info["gamma_up"]
    assert info["gamma_star"] - tol <= res.gamma <= info["gamma_up"] + 1e-7
