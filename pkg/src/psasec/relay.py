"""Amplify-and-forward relay with a PSA receiver.

Two-phase model. In the first phase the source and the jammer transmit and
a PSA relay R (antenna correlation R_cor) receives while the single-antenna
eavesdropper E overhears the source directly. In the second phase R
forwards W y_R to the destination D, and E overhears that too.

The nominal design follows three nulling rules: D must not receive the
relayed jammer, E must not receive the relayed source signal, and the
jammer only transmits in the first phase at full power. Under these rules
the secrecy rate depends on (W, p) only through the destination SNR, which
is increased by alternating a closed-form W update and a pointing update
solved by SDP relaxation with rank-1 penalty.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import convex
from .convex import SdpProblem, bisection, penalty_objective, rank1_penalty_loop, solve_sdp
from .em import DoaPoa, constraint_matrices, element_norms, manifold_matrix, z_pointing
from .errors import DegenerateNullspace, Infeasible, MaxIterations
from .simo import null_basis, real_null_basis

KE_VARIANTS = ("printed", "eve_noise")
# stalled interior-point iterates this close to optimal are used as solutions
STALL_ACCEPT = 1e-7


def exp_correlation(n: int, corr_p: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exponential correlation R[n, m] = corr_p^|n - m| and its principal square root."""
    if not 0.0 <= corr_p < 1.0:
        raise ValueError("corr_p must lie in [0, 1)")
    idx = np.arange(n)
    r = corr_p ** np.abs(idx[:, None] - idx[None, :]).astype(float)
    w, v = np.linalg.eigh(r)
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return r, 0.5 * (s + s.T)


@dataclass(frozen=True)
class RelayScenario:
    n_r: int
    desired: DoaPoa
    jammer: DoaPoa
    h_sr: complex
    h_jr: complex
    h_se: complex
    h_je: complex
    h_jd: complex
    h_rd: np.ndarray
    h_re: np.ndarray
    p_s: float
    p_r_max: float
    p_j_max: float
    corr_p: float = 0.5
    sigma_r2: float = 1.0
    sigma_d2: float = 1.0
    sigma_e2: float = 1.0
    spacing: float = 0.5
    ke_noise_variant: str = "printed"

    def __post_init__(self):
        if self.n_r < 1:
            raise ValueError("n_r must be positive")
        if not 0.0 <= self.corr_p < 1.0:
            raise ValueError("corr_p must lie in [0, 1)")
        if min(self.sigma_r2, self.sigma_d2, self.sigma_e2) <= 0:
            raise ValueError("noise powers must be positive")
        if min(self.p_s, self.p_r_max, self.p_j_max) < 0:
            raise ValueError("power budgets must be nonnegative")
        if self.ke_noise_variant not in KE_VARIANTS:
            raise ValueError(f"ke_noise_variant must be one of {KE_VARIANTS}")
        for name in ("h_rd", "h_re"):
            v = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if v.size != self.n_r:
                raise ValueError(f"{name} must have n_r entries")
            object.__setattr__(self, name, v)

    @property
    def q_d(self) -> np.ndarray:
        return manifold_matrix(self.desired, self.n_r, self.spacing).entries

    @property
    def q_j(self) -> np.ndarray:
        return manifold_matrix(self.jammer, self.n_r, self.spacing).entries

    @property
    def r_sqrt(self) -> np.ndarray:
        return exp_correlation(self.n_r, self.corr_p)[1]

    @property
    def h_rd_eff(self) -> np.ndarray:
        """h_RD R_cor^{1/2} as a 1-D array."""
        return self.h_rd @ self.r_sqrt

    @property
    def h_re_eff(self) -> np.ndarray:
        return self.h_re @ self.r_sqrt


@dataclass
class RelayDesign:
    w: np.ndarray
    pointing: np.ndarray
    secrecy_rate: float
    objective_trace: List[float] = field(default_factory=list)
    diagnostics: Dict = field(default_factory=dict)


# --- signal model -----------------------------------------------------------

def relay_power(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray, p_j1: float) -> float:
    """Average relay transmit power E||W y_R||^2."""
    wq_d = w @ (scenario.q_d @ pointing)
    wq_j = w @ (scenario.q_j @ pointing)
    return float(scenario.p_s * abs(scenario.h_sr) ** 2 * np.vdot(wq_d, wq_d).real
                 + p_j1 * abs(scenario.h_jr) ** 2 * np.vdot(wq_j, wq_j).real
                 + scenario.sigma_r2 * np.sum(np.abs(w) ** 2))


def _k_e(scenario: RelayScenario, w: np.ndarray, p_j2: float) -> float:
    leak = scenario.h_re_eff @ w
    noise = scenario.sigma_d2 if scenario.ke_noise_variant == "printed" else scenario.sigma_e2
    return float(p_j2 * abs(scenario.h_je) ** 2 + scenario.sigma_r2 * np.vdot(leak, leak).real + noise)


def relay_covariances(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray,
                      p_j1: float, p_j2: float) -> Tuple[np.ndarray, float, np.ndarray]:
    """Eavesdropper noise covariance O_E (2x2), destination noise power O_D and channel H_E."""
    re_w = scenario.h_re_eff @ w
    rd_w = scenario.h_rd_eff @ w
    b_ej = re_w @ (scenario.q_j @ pointing)     # relayed jammer at E
    b_ed = re_w @ (scenario.q_d @ pointing)     # relayed source at E
    b_dj = rd_w @ (scenario.q_j @ pointing)     # relayed jammer at D
    o11 = scenario.sigma_e2 + p_j1 * abs(scenario.h_je) ** 2
    o12 = p_j1 * scenario.h_je * np.conj(scenario.h_jr) * np.conj(b_ej)
    o22 = p_j1 * abs(scenario.h_jr) ** 2 * abs(b_ej) ** 2 + _k_e(scenario, w, p_j2)
    o_e = np.array([[o11, o12], [np.conj(o12), o22]], dtype=complex)
    o_d = float(p_j1 * abs(scenario.h_jr) ** 2 * abs(b_dj) ** 2 + p_j2 * abs(scenario.h_jd) ** 2
                + scenario.sigma_r2 * np.vdot(rd_w, rd_w).real + scenario.sigma_d2)
    h_e = np.array([scenario.h_se, b_ed * scenario.h_sr], dtype=complex)
    return o_e, o_d, h_e


def relay_rates(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray,
                p_j1: Optional[float] = None, p_j2: float = 0.0) -> Tuple[float, float]:
    """Mutual informations (I_D, I_E) in bits."""
    p_j1 = scenario.p_j_max if p_j1 is None else p_j1
    o_e, o_d, h_e = relay_covariances(scenario, w, pointing, p_j1, p_j2)
    sig_d = scenario.h_rd_eff @ w @ (scenario.q_d @ pointing)
    i_d = np.log2(1.0 + scenario.p_s * abs(scenario.h_sr) ** 2 * abs(sig_d) ** 2 / o_d)
    m = np.eye(2) + scenario.p_s * np.outer(h_e, h_e.conj()) @ np.linalg.inv(o_e)
    i_e = np.log2(np.real(np.linalg.det(m)))
    return float(i_d), float(i_e)


def relay_secrecy_rate(scenario: RelayScenario, design, p_j1: Optional[float] = None,
                       p_j2: float = 0.0) -> float:
    """[I_D - I_E]^+ with the full 2x2 eavesdropper model; ``design`` is a RelayDesign or (w, p)."""
    w, p = (design.w, design.pointing) if hasattr(design, "w") else design
    i_d, i_e = relay_rates(scenario, w, p, p_j1, p_j2)
    return max(0.0, i_d - i_e)


def destination_snr(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray) -> float:
    """SNR at D when the relayed jammer is nulled."""
    rd_w = scenario.h_rd_eff @ w
    sig = rd_w @ (scenario.q_d @ pointing)
    noise = scenario.sigma_r2 * np.vdot(rd_w, rd_w).real + scenario.sigma_d2
    return float(scenario.p_s * abs(scenario.h_sr) ** 2 * abs(sig) ** 2 / noise)


def eve_rate_nulled(scenario: RelayScenario) -> float:
    """log2(1 + P_S |h_SE|^2 / (s_e^2 + P_J |h_JE|^2)): E hears only the direct link."""
    return float(np.log2(1.0 + scenario.p_s * abs(scenario.h_se) ** 2
                         / (scenario.sigma_e2 + scenario.p_j_max * abs(scenario.h_je) ** 2)))


def nulled_objective(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray) -> float:
    """Secrecy rate (not clamped) assuming all nulling rules hold."""
    return float(np.log2(1.0 + destination_snr(scenario, w, pointing)) - eve_rate_nulled(scenario))


def budget_scaled(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray) -> np.ndarray:
    """W rescaled so that the relay spends exactly its power budget at this pointing."""
    return w * np.sqrt(scenario.p_r_max / relay_power(scenario, w, pointing, scenario.p_j_max))


def null_residuals(scenario: RelayScenario, w: np.ndarray, pointing: np.ndarray) -> Dict[str, float]:
    rd_w = scenario.h_rd_eff @ w
    re_w = scenario.h_re_eff @ w
    return {
        "jammer_at_d": float(abs(rd_w @ (scenario.q_j @ pointing))),
        "source_at_e": float(abs(re_w @ (scenario.q_d @ pointing))),
    }


# --- W update ---------------------------------------------------------------

def vec(w: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return w.reshape(-1, order="F")


def unvec(omega: np.ndarray, n: int) -> np.ndarray:
    return omega.reshape(n, n, order="F")


def w_step_matrices(scenario: RelayScenario, pointing: np.ndarray) -> Dict[str, np.ndarray]:
    """Vectors g_d, g_j, g_e and matrices G_b, R_d, R_j with g^H vec(W) = h W q."""
    n = scenario.n_r
    q_d = scenario.q_d @ pointing
    q_j = scenario.q_j @ pointing
    h_d = scenario.h_rd_eff
    h_e = scenario.h_re_eff
    eye = np.eye(n)
    return {
        "g_d": np.kron(q_d.conj(), h_d.conj()),
        "g_j": np.kron(q_j.conj(), h_d.conj()),
        "g_e": np.kron(q_d.conj(), h_e.conj()),
        "G_b": np.kron(eye, np.outer(h_d.conj(), h_d)),
        "R_d": np.kron(np.outer(q_d.conj(), q_d), eye),
        "R_j": np.kron(np.outer(q_j.conj(), q_j), eye),
    }


def optimize_w_given_p(scenario: RelayScenario, pointing: np.ndarray) -> np.ndarray:
    """Relay matrix maximizing the destination SNR subject to both nulls and the power budget.

    With vec(W) = B x for an orthonormal basis B of the null space of
    [g_j g_e]^H and the budget active, the SNR is a generalized Rayleigh
    quotient whose maximizer is x ~ (B^H (s_d^2 A + s_r^2 P_R G_b) B)^+ B^H g_d,
    scaled so that the relay spends exactly P_R.
    """
    n = scenario.n_r
    mats = w_step_matrices(scenario, pointing)
    basis = null_basis(np.vstack([mats["g_j"].conj(), mats["g_e"].conj()]))
    g_d = mats["g_d"]
    bg = basis.conj().T @ g_d
    if np.linalg.norm(g_d) == 0 or np.linalg.norm(bg) <= 1e-10 * np.linalg.norm(g_d):
        raise DegenerateNullspace("nulling constraints annihilate the desired signal")
    a = (scenario.p_s * abs(scenario.h_sr) ** 2 * mats["R_d"]
         + scenario.p_j_max * abs(scenario.h_jr) ** 2 * mats["R_j"]
         + scenario.sigma_r2 * np.eye(n * n))
    m = basis.conj().T @ (scenario.sigma_d2 * a + scenario.sigma_r2 * scenario.p_r_max * mats["G_b"]) @ basis
    mu = np.linalg.lstsq(convex.hermitian_part(m), bg, rcond=1e-13)[0]
    omega = basis @ mu
    power = np.vdot(omega, a @ omega).real
    omega = omega * np.sqrt(scenario.p_r_max / power)
    return unvec(omega, n)


# --- pointing update ------------------------------------------------------

@dataclass
class PointingStep:
    pointing: np.ndarray
    value: float
    upper_bound: float
    lower_bound: float
    rank1_gap: float
    improved: bool


def _p_step_data(scenario: RelayScenario, w: np.ndarray):
    """Reduced quotient matrices (A, B) with SNR_D(p, rescaled W) = p^T A p / p^T B p.

    Scaling W by c multiplies the signal, the relayed noise and the relay
    power by c^2; spending the full budget and using sum_n ||p_n||^2 = N
    turns the SNR into a homogeneous ratio in p. Both matrices are
    restricted to the real null space of the two nulling rules.
    """
    n = scenario.n_r
    q_d, q_j = scenario.q_d, scenario.q_j
    rd_w = scenario.h_rd_eff @ w
    re_w = scenario.h_re_eff @ w
    basis = real_null_basis(np.vstack([rd_w @ q_j, re_w @ q_d]))
    if basis.shape[1] == 0:
        raise Infeasible("no pointing satisfies both relay nulls")
    gain = scenario.p_s * abs(scenario.h_sr) ** 2
    r = rd_w @ q_d
    a = scenario.p_r_max * gain * np.real(np.outer(r.conj(), r))
    wq_d, wq_j = w @ q_d, w @ q_j
    g = (gain * np.real(wq_d.conj().T @ wq_d)
         + scenario.p_j_max * abs(scenario.h_jr) ** 2 * np.real(wq_j.conj().T @ wq_j))
    # p-independent parts of noise and power, spread over p^T p = N
    const = (scenario.p_r_max * scenario.sigma_r2 * np.vdot(rd_w, rd_w).real
             + scenario.sigma_d2 * scenario.sigma_r2 * np.sum(np.abs(w) ** 2))
    b = scenario.sigma_d2 * g + (const / n) * np.eye(3 * n)
    a = basis.T @ (0.5 * (a + a.T)) @ basis
    b = basis.T @ (0.5 * (b + b.T)) @ basis
    f_red = [basis.T @ f @ basis for f in constraint_matrices(n)]
    return basis, a, b, f_red


def _solve_accepting_stall(problem: SdpProblem, tol: float):
    """solve_sdp that also accepts an iterate stalled within STALL_ACCEPT of optimality."""
    sol = solve_sdp(problem, tol=tol, raise_on_max_iter=False)
    if sol.status == "max_iterations" and max(sol.residuals["primal"], sol.residuals["gap"]) <= STALL_ACCEPT:
        return sol
    if sol.status != "optimal":
        if sol.status == "max_iterations":
            raise MaxIterations("pointing SDP stalled away from optimality")
        raise Infeasible(f"pointing SDP is {sol.status}")
    return sol


def optimize_p_given_w(scenario: RelayScenario, w: np.ndarray, p_prev: Optional[np.ndarray] = None,
                       rank1_tol: float = convex.RANK1_TOL, max_iter: int = convex.PENALTY_MAX_ITER,
                       rel_tol: float = 1e-4, sdp_tol: float = 1e-9) -> PointingStep:
    """Pointing in the null space of both relay nulls maximizing the destination SNR.

    The SNR is evaluated with W rescaled to the relay budget, which makes it
    the quotient p^T A p / p^T B p. Its generalized eigenvalue bounds the
    search from above. Bisection on the target gamma tests the relaxed SDP
    max tr((A - gamma B) P) over the unit-norm constraints and then the
    rank-1 penalty loop. When ``p_prev`` is feasible for this W it fixes the
    lower end, so the step never decreases the SNR.
    """
    basis, a, b, f_red = _p_step_data(scenario, w)
    k = basis.shape[1]
    a_n = a / max(np.trace(a) / k, 1e-300)
    b_n = b / (np.trace(b) / k)
    to_snr = (np.trace(a) / k) / (np.trace(b) / k) if np.trace(a) > 0 else 0.0
    upper = max(convex.max_generalized_eig(a_n, b_n)[0], 0.0)
    eqs = [(f, 1.0) for f in f_red]

    def ratio(v):
        return float(v @ a_n @ v) / float(v @ b_n @ v)

    lower, state = 0.0, {}
    bound = {"relaxed": upper}
    if p_prev is not None:
        p_hat = basis.T @ p_prev
        if np.linalg.norm(basis @ p_hat - p_prev) <= 1e-6 * max(1.0, np.linalg.norm(p_prev)):
            lower = ratio(p_hat)
            state.update(vector=p_hat, value=lower, gap=0.0)

    def attempt(gamma: float) -> bool:
        if state and gamma <= state["value"]:
            return True
        m = a_n - gamma * b_n
        try:
            relaxed = _solve_accepting_stall(SdpProblem(k, m, "max", eqs), sdp_tol)
        except (Infeasible, MaxIterations):
            return False
        if relaxed.objective_value < 0:
            bound["relaxed"] = min(bound["relaxed"], gamma)
            return False
        ineqs = [(-m, 0.0)]

        def template(prev):
            return SdpProblem(k, penalty_objective(prev), "min", eqs, ineqs)

        try:
            res = rank1_penalty_loop(template, relaxed.x, rank1_tol, max_iter,
                                     solve=lambda prob: _solve_accepting_stall(prob, sdp_tol).x,
                                     raise_on_stall=False)
        except (Infeasible, MaxIterations):
            return False
        if not res.converged:
            return False
        value = ratio(res.vector)
        if not state or value > state["value"]:
            state.update(vector=res.vector, value=value, gap=res.gap)
        return True

    if not state and not attempt(0.0):
        raise Infeasible("penalty loop found no rank-1 pointing")
    if upper - lower > rel_tol * max(upper, 1e-300):
        bisection(lower, upper, attempt, rel_tol * (upper - lower))
    best = state
    p = basis @ best["vector"]
    return PointingStep(p, best["value"] * to_snr, bound["relaxed"] * to_snr, lower * to_snr, best["gap"],
                        best["value"] > lower)


# --- alternating optimization -------------------------------------------

def alternating_secrecy_max(scenario: RelayScenario, p0: Optional[np.ndarray] = None,
                            max_outer: int = 10, rel_tol: float = 1e-3,
                            trace: Optional[Callable[[str], None]] = None) -> RelayDesign:
    """Alternate W and pointing updates until the destination rate settles.

    The trace records the nulled secrecy objective (bits, unclamped) after
    every outer iteration. The stopping test uses the relative change of the
    destination term log2(1 + SNR_D), since the eavesdropper term is fixed.
    """
    p = z_pointing(scenario.n_r) if p0 is None else np.asarray(p0, dtype=float)
    if np.max(np.abs(element_norms(p) - 1.0)) > 1e-6:
        raise ValueError("initial pointing must have unit element norms")
    w = optimize_w_given_p(scenario, p)
    eve = eve_rate_nulled(scenario)
    dest = np.log2(1.0 + destination_snr(scenario, w, p))
    objective = [dest - eve]
    if trace is not None:
        trace(_trace_line(scenario, 0, objective[-1], w, p))
    converged = False
    steps = []
    p_step_res = null_residuals(scenario, w, p)
    for it in range(1, max_outer + 1):
        step = optimize_p_given_w(scenario, w, p)
        steps.append(step)
        p = step.pointing
        p_step_res = null_residuals(scenario, w, p)
        w = optimize_w_given_p(scenario, p)
        new_dest = np.log2(1.0 + destination_snr(scenario, w, p))
        objective.append(new_dest - eve)
        if trace is not None:
            trace(_trace_line(scenario, it, objective[-1], w, p))
        change = abs(new_dest - dest) / max(abs(dest), 1e-12)
        dest = new_dest
        if change < rel_tol:
            converged = True
            break
    # the W-step nulls are checked at the final (W, p); the p-step nulls at
    # the pair the last p-step saw
    diag = dict(null_residuals(scenario, w, p))
    diag.update({f"p_step_{k}": v for k, v in p_step_res.items()})
    diag.update({
        "relay_power": relay_power(scenario, w, p, scenario.p_j_max),
        "unit_norm_error": float(np.max(np.abs(element_norms(p) - 1.0))),
        "outer_iterations": len(objective) - 1,
        "converged": converged,
        "nulled_rate": max(0.0, objective[-1]),
        "rank1_gaps": [s.rank1_gap for s in steps],
    })
    return RelayDesign(w, p, relay_secrecy_rate(scenario, (w, p)), objective, diag)


def _trace_line(scenario, it, obj, w, p) -> str:
    res = null_residuals(scenario, w, p)
    return (f"{it}\t{obj:.12e}\t{res['jammer_at_d']:.3e}\t{res['source_at_e']:.3e}\t"
            f"{relay_power(scenario, w, p, scenario.p_j_max):.12e}")
