import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ROOT, cn, relay_scenario
from oracles import relay_power_monte_carlo
from psasec.config import load_config
from psasec.em import element_norms, em_signal_vector, z_pointing
from psasec.harness import sample_channels, trial_rng
from psasec.relay import (KE_VARIANTS, alternating_secrecy_max, budget_scaled, destination_snr,
                          eve_rate_nulled, exp_correlation, null_basis, null_residuals, nulled_objective,
                          optimize_p_given_w, optimize_w_given_p, relay_covariances, relay_power, relay_rates,
                          relay_secrecy_rate, vec, w_step_matrices)

seeds = st.integers(0, 2 ** 32 - 1)


def random_unit_pointing(rng, n):
    m = rng.standard_normal((n, 3))
    return (m / np.linalg.norm(m, axis=1, keepdims=True)).T.reshape(-1)


def double_null_pointing(scen):
    """Every element along E_d x E_j, orthogonal to both (linearly polarized) fields."""
    e_d = np.real(em_signal_vector(scen.desired)[:3])
    e_j = np.real(em_signal_vector(scen.jammer)[:3])
    c = np.cross(e_d, e_j)
    c /= np.linalg.norm(c)
    return np.repeat(c, scen.n_r)


# --- correlation and covariances ---------------------------------------------

def test_exp_correlation_examples():
    r, s = exp_correlation(3, 0.0)
    np.testing.assert_array_equal(r, np.eye(3))
    r, _ = exp_correlation(2, 0.5)
    np.testing.assert_allclose(r, [[1, 0.5], [0.5, 1]])
    r, s = exp_correlation(8, 0.99)
    assert np.linalg.eigvalsh(r)[0] > 0
    np.testing.assert_allclose(s @ s.conj().T, r, atol=1e-12)
    with pytest.raises(ValueError):
        exp_correlation(3, 1.0)


@given(st.integers(1, 10), st.floats(0.0, 0.98))
def test_exp_correlation_square_root(n, rho):
    r, s = exp_correlation(n, rho)
    np.testing.assert_allclose(s @ s.conj().T, r, atol=1e-12)
    np.testing.assert_allclose(s, s.T, atol=0)


def test_covariances_zero_design_pins_ke_variant():
    scen = relay_scenario(0, n_r=4, sigma_d2=2.0, sigma_e2=1.5)
    w = np.zeros((4, 4))
    p = z_pointing(4)
    o_e, o_d, _ = relay_covariances(scen, w, p, 0.0, 0.0)
    # printed form: the second-phase noise at E uses the destination noise power
    np.testing.assert_allclose(o_e, np.diag([1.5, 2.0]), atol=0)
    assert o_d == 2.0
    alt = dataclasses.replace(scen, ke_noise_variant="eve_noise")
    o_e, _, _ = relay_covariances(alt, w, p, 0.0, 0.0)
    np.testing.assert_allclose(o_e, np.diag([1.5, 1.5]), atol=0)
    assert KE_VARIANTS == ("printed", "eve_noise")


def test_covariances_psd_and_destination_floor():
    rng = np.random.default_rng(1)
    for k in range(100):
        scen = relay_scenario(k, n_r=4)
        w = cn(rng, 4, 4)
        p = random_unit_pointing(rng, 4)
        o_e, o_d, _ = relay_covariances(scen, w, p, rng.uniform(0, 10), rng.uniform(0, 10))
        np.testing.assert_allclose(o_e, o_e.conj().T, atol=0)
        assert np.linalg.eigvalsh(o_e)[0] >= -1e-12
        assert o_d >= scen.sigma_d2


# --- relay power -------------------------------------------------------------

def test_relay_power_examples():
    scen = relay_scenario(2, n_r=4)
    assert relay_power(scen, np.zeros((4, 4)), z_pointing(4), 10.0) == 0.0
    p = double_null_pointing(scen)
    assert np.linalg.norm(scen.q_d @ p) < 1e-12 and np.linalg.norm(scen.q_j @ p) < 1e-12
    assert relay_power(scen, np.eye(4), p, 10.0) == pytest.approx(scen.sigma_r2 * 4)


def test_relay_power_monte_carlo():
    scen = relay_scenario(3, n_r=4)
    rng = np.random.default_rng(3)
    w = cn(rng, 4, 4)
    p = random_unit_pointing(rng, 4)
    mean, stderr = relay_power_monte_carlo(scen, w, p, scen.p_j_max, 100000, rng)
    assert abs(mean - relay_power(scen, w, p, scen.p_j_max)) <= 3 * stderr


# --- rates ---------------------------------------------------------------------

def test_zero_relay_gives_zero_rate():
    scen = relay_scenario(4, n_r=4)
    assert relay_secrecy_rate(scen, (np.zeros((4, 4)), z_pointing(4))) == 0.0


def test_rate_collapses_without_cross_term():
    # h_JE = 0 removes the off-diagonal of O_E; E then hears the direct link only
    scen = dataclasses.replace(relay_scenario(5), h_je=0j)
    w = optimize_w_given_p(scen, z_pointing(8))
    _, i_e = relay_rates(scen, w, z_pointing(8))
    expected = np.log2(1 + scen.p_s * abs(scen.h_se) ** 2 / scen.sigma_e2)
    assert i_e == pytest.approx(expected, abs=1e-9)
    assert eve_rate_nulled(scen) == pytest.approx(expected, abs=1e-12)
    assert relay_secrecy_rate(scen, (w, z_pointing(8))) == pytest.approx(
        max(0.0, nulled_objective(scen, w, z_pointing(8))), abs=1e-9)


def test_exact_rate_below_simplified_rate():
    for seed in range(20):
        scen = relay_scenario(100 + seed)
        w = optimize_w_given_p(scen, z_pointing(8))
        exact = relay_secrecy_rate(scen, (w, z_pointing(8)))
        assert exact <= max(0.0, nulled_objective(scen, w, z_pointing(8))) + 1e-9


@given(seeds)
def test_determinant_lemma(seed):
    rng = np.random.default_rng(seed)
    scen = relay_scenario(seed % 1000, n_r=3)
    w = cn(rng, 3, 3)
    p = random_unit_pointing(rng, 3)
    o_e, _, h_e = relay_covariances(scen, w, p, scen.p_j_max, rng.uniform(0, 5))
    inv = np.linalg.inv(o_e)
    det = np.real(np.linalg.det(np.eye(2) + scen.p_s * np.outer(h_e, h_e.conj()) @ inv))
    lemma = 1 + scen.p_s * np.real(np.vdot(h_e, inv @ h_e))
    assert det == pytest.approx(lemma, rel=1e-12)


@given(seeds)
def test_vec_identities(seed):
    rng = np.random.default_rng(seed)
    scen = relay_scenario(seed % 1000, n_r=4)
    w = cn(rng, 4, 4)
    p = random_unit_pointing(rng, 4)
    m = w_step_matrices(scen, p)
    om = vec(w)
    q_d, q_j = scen.q_d @ p, scen.q_j @ p
    hd, he = scen.h_rd_eff, scen.h_re_eff
    tol = 1e-12 * max(1.0, np.linalg.norm(om) * np.linalg.norm(m["g_d"]))
    assert abs(np.vdot(m["g_d"], om) - hd @ w @ q_d) <= tol
    assert abs(np.vdot(m["g_j"], om) - hd @ w @ q_j) <= tol
    assert abs(np.vdot(m["g_e"], om) - he @ w @ q_d) <= tol
    assert np.vdot(om, m["G_b"] @ om).real == pytest.approx(np.linalg.norm(hd @ w) ** 2, rel=1e-10)
    assert np.vdot(om, m["R_d"] @ om).real == pytest.approx(np.linalg.norm(w @ q_d) ** 2, rel=1e-10)


# --- W step --------------------------------------------------------------------

def test_w_step_nulls_and_budget():
    for seed in range(10):
        scen = relay_scenario(200 + seed)
        p = random_unit_pointing(np.random.default_rng(seed), 8)
        w = optimize_w_given_p(scen, p)
        res = null_residuals(scen, w, p)
        assert res["jammer_at_d"] <= 1e-8 * np.linalg.norm(w)
        assert res["source_at_e"] <= 1e-8 * np.linalg.norm(w)
        assert relay_power(scen, w, p, scen.p_j_max) == pytest.approx(scen.p_r_max, rel=1e-6)


def test_w_step_beats_random_feasible_candidates():
    scen = relay_scenario(6, n_r=4)
    rng = np.random.default_rng(6)
    p = random_unit_pointing(rng, 4)
    w = optimize_w_given_p(scen, p)
    best = destination_snr(scen, w, p)
    m = w_step_matrices(scen, p)
    basis = null_basis(np.vstack([m["g_j"].conj(), m["g_e"].conj()]))
    for _ in range(1000):
        cand = (basis @ cn(rng, basis.shape[1])).reshape(4, 4, order="F")
        cand = budget_scaled(scen, cand, p)
        assert destination_snr(scen, cand, p) <= best * (1 + 1e-9)


def test_w_scales_with_budget_when_relay_noise_vanishes():
    scen = relay_scenario(7, n_r=4, sigma_r2=1e-18)
    p = z_pointing(4)
    w1 = optimize_w_given_p(scen, p)
    w2 = optimize_w_given_p(dataclasses.replace(scen, p_r_max=2 * scen.p_r_max), p)
    np.testing.assert_allclose(w2, np.sqrt(2) * w1, rtol=1e-6, atol=1e-9 * np.abs(w1).max())


# --- p step --------------------------------------------------------------------

def test_p_step_contract():
    scen = relay_scenario(8, n_r=4)
    p0 = z_pointing(4)
    w = optimize_w_given_p(scen, p0)
    step = optimize_p_given_w(scen, w, p0)
    p = step.pointing
    res = null_residuals(scen, w, p)
    scale = np.linalg.norm(w)
    assert res["jammer_at_d"] <= 1e-6 * scale and res["source_at_e"] <= 1e-6 * scale
    np.testing.assert_allclose(element_norms(p), 1.0, atol=1e-6)
    assert step.rank1_gap <= 1e-6
    assert step.value <= step.upper_bound * (1 + 1e-6)
    # the bisection stops within its tolerance of the relaxed bound
    assert step.value >= step.upper_bound * (1 - 1e-3)
    # rescaled SNR never falls below the starting pointing's
    w_z = budget_scaled(scen, w, p0)
    w_p = budget_scaled(scen, w, p)
    assert destination_snr(scen, w_p, p) >= destination_snr(scen, w_z, p0) * (1 - 1e-9)
    assert step.value == pytest.approx(destination_snr(scen, w_p, p), rel=1e-6)


# --- alternating optimization ---------------------------------------------------

def test_alternating_contract():
    for seed in range(3):
        scen = relay_scenario(300 + seed)
        design = alternating_secrecy_max(scen)
        tr = design.objective_trace
        assert all(b >= a - 1e-9 for a, b in zip(tr, tr[1:]))
        d = design.diagnostics
        assert d["converged"] and d["outer_iterations"] <= 10
        for key in ("jammer_at_d", "source_at_e", "p_step_jammer_at_d", "p_step_source_at_e"):
            assert d[key] <= 1e-6
        assert d["relay_power"] <= scen.p_r_max + 1e-6
        assert d["unit_norm_error"] <= 1e-6
        assert 0.0 <= design.secrecy_rate <= d["nulled_rate"] + 1e-9


def test_alternating_rejects_bad_start():
    with pytest.raises(ValueError):
        alternating_secrecy_max(relay_scenario(9), p0=2 * z_pointing(8))


def test_alternating_insensitive_to_start():
    # convergence scenario file, jammer at 65 deg
    cfg = load_config(ROOT / "configs" / "fig9_theta65.toml")
    _, point = next(iter(cfg.points()))
    scen = sample_channels(point, trial_rng(point.seed, 0))
    starts = [z_pointing(scen.n_r), np.repeat(np.ones(3) / np.sqrt(3), scen.n_r),
              random_unit_pointing(np.random.default_rng(3), scen.n_r)]
    finals = [alternating_secrecy_max(scen, p0=p0).objective_trace[-1] for p0 in starts]
    assert min(finals) > 0
    assert max(finals) <= 1.05 * min(finals)

@settings(max_examples=5)
@given(seeds)
def test_alternating_monotone_property(seed):
    design = alternating_secrecy_max(relay_scenario(seed % 10000, n_r=4), max_outer=4)
    tr = design.objective_trace
    assert all(b >= a - 1e-9 for a, b in zip(tr, tr[1:]))


def test_trace_sink_receives_tsv():
    lines = []
    alternating_secrecy_max(relay_scenario(10, n_r=4), max_outer=2, trace=lines.append)
    assert lines and all(len(line.split("\t")) == 5 for line in lines)
    assert lines[0].startswith("0\t")
