"""Point-to-point SIMO secure transmission with a PSA destination.

A source S sends to a PSA destination D while a multi-antenna eavesdropper
E listens. A friendly jammer J transmits noise that D cancels by pointing
its dipoles orthogonally to the jammer's field, so only E is hurt.

Design pipeline: pointing optimization (SDP relaxation, rank-1 penalty,
bisection), matched-filter receive beamformer, then power allocation by
either total-power minimization under a secrecy-rate target or secrecy-rate
maximization under a sum-power budget.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from . import convex
from .convex import SdpProblem, bisection, penalty_objective, rank1_penalty_loop, solve_sdp
from .em import DoaPoa, constraint_matrices, element_norms, manifold_matrix, p_to_pointing_matrix
from .errors import DegenerateManifold, Infeasible, MaxIterations

NULL_RANK_TOL = 1e-10
COLINEAR_TOL = 1e-15


@dataclass(frozen=True)
class SimoScenario:
    n_d: int
    n_e: int
    desired: DoaPoa
    jammer: DoaPoa
    h_sd: complex
    h_jd: complex
    h_se: np.ndarray
    h_je: np.ndarray
    sigma2: float = 1.0
    sigma_e2: float = 1.0
    spacing: float = 0.5

    def __post_init__(self):
        if self.n_d < 1 or self.n_e < 1:
            raise ValueError("antenna counts must be positive")
        if not (self.sigma2 > 0 and self.sigma_e2 > 0):
            raise ValueError("noise powers must be positive")
        for name in ("h_se", "h_je"):
            v = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if v.size != self.n_e:
                raise ValueError(f"{name} must have n_e entries")
            object.__setattr__(self, name, v)

    @property
    def q_d(self) -> np.ndarray:
        return manifold_matrix(self.desired, self.n_d, self.spacing).entries

    @property
    def q_j(self) -> np.ndarray:
        return manifold_matrix(self.jammer, self.n_d, self.spacing).entries


@dataclass(frozen=True)
class PowerAllocation:
    p_s: float
    p_j: float
    case: Optional[int] = None

    def __post_init__(self):
        if self.p_s < 0 or self.p_j < 0:
            raise ValueError("powers must be nonnegative")

    @property
    def total(self) -> float:
        return self.p_s + self.p_j


@dataclass
class SimoDesign:
    pointing: np.ndarray
    dest_beamformer: np.ndarray
    eve_beamformer: np.ndarray
    allocation: PowerAllocation
    secrecy_rate: float
    diagnostics: Dict = field(default_factory=dict)


@dataclass
class PointingResult:
    pointing: np.ndarray
    gamma: float
    diagnostics: Dict = field(default_factory=dict)


def real_null_basis(m: np.ndarray, rtol: float = NULL_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of real vectors x with m x = 0 for a complex matrix m."""
    stacked = np.vstack([np.real(m), np.imag(m)])
    n = stacked.shape[1]
    _, s, vt = np.linalg.svd(stacked)
    if s.size == 0 or s[0] == 0:
        return np.eye(n)
    rank = int(np.sum(s > rtol * s[0]))
    return vt[rank:].T


def null_basis(m: np.ndarray, rtol: float = NULL_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the (complex) null space of m."""
    n = m.shape[1]
    _, s, vh = np.linalg.svd(m)
    if s.size == 0 or s[0] == 0:
        return np.eye(n, dtype=complex)
    rank = int(np.sum(s > rtol * s[0]))
    return vh[rank:].conj().T


# --- beamformers and SINRs ---------------------------------------------------

def eve_beamformer(scenario: SimoScenario, p_j: float) -> np.ndarray:
    """Max-SINR eavesdropper combiner, proportional to (P_J h_JE h_JE^H + s_e^2 I)^-1 h_SE."""
    if p_j < 0:
        raise ValueError("p_j must be nonnegative")
    k = p_j * np.outer(scenario.h_je, scenario.h_je.conj()) + scenario.sigma_e2 * np.eye(scenario.n_e)
    w = np.linalg.solve(k, scenario.h_se)
    return convex.fix_phase(w / np.linalg.norm(w))


def dest_beamformer(pointing: np.ndarray, manifold_d) -> np.ndarray:
    """Matched filter Q_d p / ||Q_d p|| for a jammer-nulling pointing."""
    q = getattr(manifold_d, "entries", manifold_d)
    a = q @ pointing
    norm = np.linalg.norm(a)
    if norm <= 1e-12:
        raise DegenerateManifold("desired-signal response vanishes for this pointing")
    return a / norm


def mvdr_beamformer(scenario: SimoScenario, pointing: np.ndarray, p_j: float) -> np.ndarray:
    """MVDR combiner (s^2 I + P_J |h_JD|^2 a_j a_j^H)^-1 a_d, normalized."""
    a_d = scenario.q_d @ pointing
    a_j = scenario.q_j @ pointing
    k = scenario.sigma2 * np.eye(scenario.n_d) + p_j * abs(scenario.h_jd) ** 2 * np.outer(a_j, a_j.conj())
    w = np.linalg.solve(k, a_d)
    norm = np.linalg.norm(w)
    if norm <= 1e-300:
        raise DegenerateManifold("desired-signal response vanishes for this pointing")
    return w / norm


def sinr_destination_at(scenario: SimoScenario, pointing: np.ndarray, w: np.ndarray,
                        p_s: float, p_j: float) -> float:
    """Destination SINR for combiner w, pointing p and powers (P_S, P_J)."""
    a_d = scenario.q_d @ pointing
    a_j = scenario.q_j @ pointing
    num = p_s * abs(scenario.h_sd) ** 2 * abs(np.vdot(w, a_d)) ** 2
    den = scenario.sigma2 * np.real(np.vdot(w, w)) + p_j * abs(scenario.h_jd) ** 2 * abs(np.vdot(w, a_j)) ** 2
    return float(num / den)


def sinr_destination(scenario: SimoScenario, design: SimoDesign) -> float:
    a = design.allocation
    return sinr_destination_at(scenario, design.pointing, design.dest_beamformer, a.p_s, a.p_j)


def sinr_destination_mvdr(scenario: SimoScenario, pointing: np.ndarray, p_s: float, p_j: float) -> float:
    """Destination SINR with the MVDR combiner, P_S |h_SD|^2 a_d^H K^-1 a_d."""
    a_d = scenario.q_d @ pointing
    a_j = scenario.q_j @ pointing
    k = scenario.sigma2 * np.eye(scenario.n_d) + p_j * abs(scenario.h_jd) ** 2 * np.outer(a_j, a_j.conj())
    return float(p_s * abs(scenario.h_sd) ** 2 * np.real(np.vdot(a_d, np.linalg.solve(k, a_d))))


def sinr_eve(scenario: SimoScenario, p_s: float, p_j: float) -> float:
    """Eavesdropper SINR P_S h_SE^H (P_J h_JE h_JE^H + s_e^2 I)^-1 h_SE."""
    k = p_j * np.outer(scenario.h_je, scenario.h_je.conj()) + scenario.sigma_e2 * np.eye(scenario.n_e)
    return float(p_s * np.real(np.vdot(scenario.h_se, np.linalg.solve(k, scenario.h_se))))


def rate_from_sinr(sinr_d: float, sinr_e: float) -> float:
    """[log2(1 + SINR_D) - log2(1 + SINR_E)]^+."""
    return max(0.0, float(np.log2((1.0 + sinr_d) / (1.0 + sinr_e))))


def secrecy_rate(scenario: SimoScenario, design: SimoDesign) -> float:
    a = design.allocation
    return rate_from_sinr(sinr_destination(scenario, design), sinr_eve(scenario, a.p_s, a.p_j))


# --- pointing optimization ---------------------------------------------------

def _unit_blocks(p: np.ndarray) -> np.ndarray:
    """Rescale element pointings to unit norm; valid when the null space splits per element."""
    m = p_to_pointing_matrix(p).copy()
    norms = np.linalg.norm(m, axis=1)
    if np.all(norms > 1e-8):
        m = m / norms[:, None]
    return m.T.reshape(-1)


def _pointing_sdps(q_d: np.ndarray, q_j: np.ndarray):
    n = q_d.shape[0]
    basis = real_null_basis(q_j)
    if basis.shape[1] == 0:
        raise Infeasible("no pointing can null the jammer")
    a = np.real(q_d.conj().T @ q_d)
    a_red = basis.T @ (0.5 * (a + a.T)) @ basis
    f_red = [basis.T @ f @ basis for f in constraint_matrices(n)]
    if min(np.trace(f) for f in f_red) <= 1e-12:
        raise Infeasible("an element has no pointing orthogonal to the jammer field")
    return basis, a_red, f_red


@lru_cache(maxsize=256)
def _optimize_pointing_cached(desired: DoaPoa, jammer: DoaPoa, n: int, spacing: float,
                              rank1_tol: float, sdp_tol: float, max_iter: int, rel_tol: float):
    q_d = manifold_matrix(desired, n, spacing).entries
    q_j = manifold_matrix(jammer, n, spacing).entries
    basis, a_red, f_red = _pointing_sdps(q_d, q_j)
    k = basis.shape[1]
    eqs = [(f, 1.0) for f in f_red]
    relaxed = solve_sdp(SdpProblem(k, a_red, "max", eqs), tol=sdp_tol)
    if relaxed.status != "optimal":
        raise Infeasible(f"relaxed pointing SDP is {relaxed.status}")
    gamma_up = relaxed.objective_value
    x0 = relaxed.x
    best = {}

    def attempt(gamma: float) -> bool:
        ineqs = [(-a_red, -gamma)] if gamma > 0 else []

        def template(prev):
            return SdpProblem(k, penalty_objective(prev), "min", eqs, ineqs)

        try:
            res = rank1_penalty_loop(template, x0, rank1_tol, max_iter, stall_tol=1e-12,
                                     raise_on_stall=False)
        except (Infeasible, MaxIterations):
            return False
        if not res.converged:
            return False
        value = float(res.vector @ a_red @ res.vector)
        if "value" not in best or value > best["value"]:
            best.update(value=value, result=res, gamma=gamma)
        return True

    if gamma_up <= 1e-12 * n:
        ok = attempt(0.0)
        gamma_star = 0.0
    else:
        ok = attempt(0.0)
        gamma_star = bisection(0.0, gamma_up, attempt, rel_tol * gamma_up) if ok else 0.0
    if not ok:
        raise Infeasible("penalty loop found no rank-1 pointing")
    res = best["result"]
    p = _unit_blocks(basis @ res.vector)
    info = {
        "gamma_up": gamma_up,
        "gamma_star": gamma_star,
        "rank1_gap": res.gap,
        "penalty_iterations": res.iterations,
        "gap_trace": tuple(res.gap_trace),
        "null_dim": k,
    }
    return p, float(np.real(np.linalg.norm(q_d @ p) ** 2)), info


def optimize_pointing(scenario: SimoScenario, rank1_tol: float = convex.RANK1_TOL,
                      sdp_tol: float = 1e-9, max_iter: int = convex.PENALTY_MAX_ITER,
                      rel_tol: float = 1e-4) -> PointingResult:
    """Pointing that nulls the jammer at every element and maximizes ||Q_d p||^2.

    The relaxed SDP over P = p p^T gives an upper bound; the largest target
    gamma for which the rank-1 penalty loop still converges is found by
    bisection. The pointing depends only on the two DOA/POAs, so results
    are cached.
    """
    if scenario.n_d < 2:
        raise Infeasible("jammer nulling needs at least two destination elements")
    p, value, info = _optimize_pointing_cached(scenario.desired, scenario.jammer, scenario.n_d,
                                               float(scenario.spacing), rank1_tol, sdp_tol,
                                               max_iter, rel_tol)
    info = dict(info)
    info["null_residual"] = float(np.linalg.norm(scenario.q_j @ p) ** 2)
    info["unit_norm_error"] = float(np.max(np.abs(element_norms(p) - 1.0)))
    return PointingResult(p.copy(), value, info)


# --- power allocation --------------------------------------------------------

def _gains(scenario: SimoScenario, pointing: np.ndarray) -> Tuple[float, float, float, float]:
    """(g, ||h_SE||^2, ||h_JE||^2, a) with g = |h_SD|^2 ||Q_d p||^2 / s^2."""
    g = abs(scenario.h_sd) ** 2 * np.linalg.norm(scenario.q_d @ pointing) ** 2 / scenario.sigma2
    hs = float(np.real(np.vdot(scenario.h_se, scenario.h_se)))
    hj = float(np.real(np.vdot(scenario.h_je, scenario.h_je)))
    a = hs * hj - abs(np.vdot(scenario.h_se, scenario.h_je)) ** 2
    return float(g), hs, hj, float(max(a, 0.0))


def rate_bounds(scenario: SimoScenario, pointing: np.ndarray) -> Tuple[float, float]:
    """High-power secrecy rates without jammer (r1) and with unlimited jammer (r2)."""
    g, hs, hj, a = _gains(scenario, pointing)
    se2 = scenario.sigma_e2
    with np.errstate(divide="ignore"):
        r1 = float(np.log2(se2 * g / hs))
        r2 = np.inf if a <= COLINEAR_TOL else float(np.log2(se2 * g * hj / a))
    return r1, r2


def power_case(scenario: SimoScenario, pointing: np.ndarray, r_sec_0: float) -> int:
    """1: jammer needed, 2: source alone suffices, 3: target unreachable."""
    r1, r2 = rate_bounds(scenario, pointing)
    if r_sec_0 >= r2:
        return 3
    if r_sec_0 <= r1:
        return 2
    return 1


def min_total_power(scenario: SimoScenario, pointing: np.ndarray, r_sec_0: float,
                    rule: str = "cases") -> PowerAllocation:
    """Smallest P_S + P_J reaching secrecy rate ``r_sec_0`` with the jammer nulled at D.

    rule="cases" follows the three-case split: below r1 the jammer is off
    and P_S has a closed form, between r1 and r2 the posynomial program is
    solved exactly, above r2 the target is unreachable. rule="exact" also
    lets the jammer help below r1, which gives the true minimum over
    P_J >= 0 (identical to "cases" above r1).
    """
    if rule not in ("cases", "exact"):
        raise ValueError("rule must be 'cases' or 'exact'")
    if r_sec_0 <= 0:
        return PowerAllocation(0.0, 0.0, 0)
    g, hs, hj, a = _gains(scenario, pointing)
    se2 = scenario.sigma_e2
    case = power_case(scenario, pointing, r_sec_0)
    if case == 3:
        raise Infeasible(f"secrecy rate {r_sec_0} is not reachable (upper bound exceeded)")
    t = 2.0 ** r_sec_0
    if case == 1:
        g1, g2, g3 = gp_coefficients(scenario, pointing, r_sec_0)
        # minimal P_J for fixed P_S is (g3 P_S + g1) / (P_S - g2); the sum is
        # minimized at P_S - g2 = sqrt(g2 g3 + g1)
        p_s = g2 + np.sqrt(g2 * g3 + g1)
        p_j = (g3 * p_s + g1) / (p_s - g2)
        return PowerAllocation(float(p_s), float(p_j), 1)
    c3 = se2 * g - t * hs           # > 0 below r1
    if rule == "cases":
        return PowerAllocation(se2 * (t - 1.0) / c3, 0.0, 2)
    # below r1 with the jammer allowed: substitute y = c3 + d P_J > 0, then
    # P_S + P_J = y / d + K / y + const with K >= 0, minimized at sqrt(d K)
    d = g * hj - t * a / se2
    k = (t - 1.0) * t * abs(np.vdot(scenario.h_se, scenario.h_je)) ** 2 / d
    y = np.sqrt(d * k)
    if y <= c3:
        return PowerAllocation(se2 * (t - 1.0) / c3, 0.0, 2)
    p_j = (y - c3) / d
    p_s = (t - 1.0) * hj / d + k / y
    return PowerAllocation(float(p_s), float(p_j), 2)


def gp_coefficients(scenario: SimoScenario, pointing: np.ndarray, r_sec_0: float) -> Tuple[float, float, float]:
    """(g1, g2, g3) of the constraint g1/(P_S P_J) + g2/P_S + g3/P_J <= 1 between r1 and r2."""
    g, hs, hj, a = _gains(scenario, pointing)
    se2 = scenario.sigma_e2
    t = 2.0 ** r_sec_0
    d = g * hj - t * a / se2
    return se2 * (t - 1.0) / d, (t - 1.0) * hj / d, (t * hs - se2 * g) / d


def secrecy_ratio(scenario: SimoScenario, pointing: np.ndarray, p_s, p_j):
    """(1 + SINR_D) / (1 + SINR_E) with the jammer nulled at D; vectorized over powers."""
    g, hs, hj, a = _gains(scenario, pointing)
    se2 = scenario.sigma_e2
    p_s = np.asarray(p_s, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    sinr_e = p_s * (se2 * hs + p_j * a) / (se2 * (se2 + p_j * hj))
    return (1.0 + g * p_s) / (1.0 + sinr_e)


def rate_max_coefficients(scenario: SimoScenario, pointing: np.ndarray, p_max: float):
    """(l1, ..., l5) of f(P_S) = (l5 P^2 - l4 P - l1) / (l3 P^2 - l2 P - l1) with P_J = p_max - P_S."""
    g, hs, hj, a = _gains(scenario, pointing)
    se2 = scenario.sigma_e2
    l1 = se2 + p_max * hj
    l3 = a / se2
    l2 = hs - hj + p_max * l3
    l4 = g * (p_max * hj + se2) - hj
    l5 = g * hj
    return l1, l2, l3, l4, l5


def max_secrecy_rate(scenario: SimoScenario, pointing: np.ndarray, p_max: float) -> Tuple[PowerAllocation, float, Dict]:
    """Split a sum-power budget between source and jammer to maximize secrecy rate.

    The stationary point of f from the quadratic discriminant is the primary
    candidate; it is compared with the other root and with the endpoints
    {0, p_max}, and the best one is returned.
    """
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    l1, l2, l3, l4, l5 = rate_max_coefficients(scenario, pointing, p_max)
    lead = l3 * l4 - l5 * l2
    cands = [0.0, p_max]
    primary = None
    scale = max(abs(l3 * l4), abs(l5 * l2), 1e-300)
    if abs(lead) > 1e-12 * scale:
        disc = l1 ** 2 * (l3 - l5) ** 2 - l1 * lead * (l4 - l2)
        if disc >= 0:
            root = np.sqrt(disc)
            primary = min(p_max, max(0.0, (-l1 * (l3 - l5) + root) / lead))
            other = min(p_max, max(0.0, (-l1 * (l3 - l5) - root) / lead))
            cands += [primary, other]
    else:
        # linear stationarity condition 2 l1 (l3 - l5) P + l1 (l4 - l2) = 0
        if abs(l3 - l5) > 1e-300:
            cands.append(min(p_max, max(0.0, -(l4 - l2) / (2.0 * (l3 - l5)))))
    cands = np.array(cands)
    f = secrecy_ratio(scenario, pointing, cands, p_max - cands)
    best = int(np.argmax(f))
    if primary is not None:
        f_primary = float(secrecy_ratio(scenario, pointing, primary, p_max - primary))
        if f_primary >= f[best] * (1.0 - 1e-14):
            best_ps, best_f = primary, f_primary
        else:
            best_ps, best_f = float(cands[best]), float(f[best])
    else:
        best_ps, best_f = float(cands[best]), float(f[best])
    alloc = PowerAllocation(best_ps, p_max - best_ps)
    rate = max(0.0, float(np.log2(best_f)))
    info = {"primary": primary, "safeguard_used": primary is None or best_ps != primary,
            "l": (l1, l2, l3, l4, l5)}
    return alloc, rate, info


# --- end-to-end designs ------------------------------------------------------

def _assemble(scenario: SimoScenario, point: PointingResult, alloc: PowerAllocation, extra: Dict) -> SimoDesign:
    try:
        w_d = dest_beamformer(point.pointing, scenario.q_d)
    except DegenerateManifold:
        w_d = np.zeros(scenario.n_d, dtype=complex)
    w_e = eve_beamformer(scenario, alloc.p_j)
    sd = sinr_destination_at(scenario, point.pointing, w_d, alloc.p_s, alloc.p_j) if np.any(w_d) else 0.0
    rate = rate_from_sinr(sd, sinr_eve(scenario, alloc.p_s, alloc.p_j))
    diag = dict(point.diagnostics)
    diag.update(extra)
    return SimoDesign(point.pointing, w_d, w_e, alloc, rate, diag)


def design_power_min(scenario: SimoScenario, r_sec_0: float, rule: str = "cases") -> SimoDesign:
    """Pointing optimization followed by total-power minimization; raises Infeasible above r2."""
    point = optimize_pointing(scenario)
    alloc = min_total_power(scenario, point.pointing, r_sec_0, rule)
    return _assemble(scenario, point, alloc, {"case": alloc.case})


def design_rate_max(scenario: SimoScenario, p_max: float) -> SimoDesign:
    """Pointing optimization followed by secrecy-rate maximization under P_S + P_J = p_max."""
    point = optimize_pointing(scenario)
    if np.linalg.norm(scenario.q_d @ point.pointing) <= 1e-12:
        alloc = PowerAllocation(0.0, p_max)
        return _assemble(scenario, point, alloc, {"degenerate": True})
    alloc, _, info = max_secrecy_rate(scenario, point.pointing, p_max)
    return _assemble(scenario, point, alloc, {"safeguard_used": info["safeguard_used"]})
