"""Robust relay beamforming under a bounded pointing error.

The implemented pointing is p* + dp with dp in the ellipsoid
{dp : dp^T C dp <= 1}. The relay matrix is restricted to cancel everything
it forwards to E (h_RE R^1/2 W = 0), the jammer transmits in the first
phase only, and two worst-case requirements are imposed over the ellipsoid:
a destination SINR of at least ``a`` and a relay power within budget. With
a single quadratic constraint the S-lemma is lossless, so each requirement
is exactly one LMI in the lifted variable vec(W) vec(W)^H.

Certification of a fixed W does not need an SDP: the worst case of a
quadratic over an ellipsoid is a trust-region problem solved here by the
secular equation.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from . import convex
from .convex import bisection, embed_hermitian, rank1_penalty_loop
from .errors import Infeasible, MaxIterations
from .ipm import MAX_ITERATIONS, OPTIMAL, ConeProgram, solve_cone_program
from .relay import (RelayScenario, eve_rate_nulled, nulled_objective, optimize_w_given_p,
                    relay_rates, unvec)
from .simo import null_basis

GAMMA_TOL = 1e-3
LMI_MAX_ITER = 60


@dataclass(frozen=True)
class ErrorEllipsoid:
    """Pointing error set {dp : dp^T C dp <= 1} with C positive definite."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("C must be square")
        c = 0.5 * (c + c.T)
        if np.linalg.eigvalsh(c)[0] <= 0:
            raise ValueError("C must be positive definite")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def scaled_identity(cls, n_r: int, scale: float) -> "ErrorEllipsoid":
        return cls(scale * np.eye(3 * n_r))

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def contains(self, dp: np.ndarray, tol: float = 1e-12) -> bool:
        return float(dp @ self.c @ dp) <= 1.0 + tol

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n errors: the first half on the boundary, the rest uniform inside."""
        chol = np.linalg.cholesky(self.c)
        x = rng.standard_normal((n, self.dim))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        n_surface = n // 2
        radius = np.ones(n)
        radius[n_surface:] = rng.random(n - n_surface) ** (1.0 / self.dim)
        x *= radius[:, None]
        # dp = C^{-1/2} x in the Cholesky sense: dp^T C dp = |x|^2
        return np.linalg.solve(chol.T, x.T).T


@dataclass
class RobustDesign:
    w_rb: np.ndarray
    worst_case_rate: float
    slack: Tuple[float, float]
    diagnostics: Dict = field(default_factory=dict)


# --- exact worst cases over the ellipsoid ----------------------------------

def ellipsoid_max_quadratic(phi: np.ndarray, p: np.ndarray, c: np.ndarray) -> Tuple[float, float]:
    """max of (p + dp)^T phi (p + dp) over dp^T C dp <= 1, with its S-lemma multiplier.

    The dual is min over u >= 0 with u C - phi > 0 of
    u + p^T phi p + b^T (u C - phi)^{-1} b, b = phi p, which in whitened
    coordinates reduces to a one-dimensional convex secular function.
    """
    phi = 0.5 * (phi + phi.T)
    chol = np.linalg.cholesky(c)
    li = np.linalg.inv(chol)
    lam, v = np.linalg.eigh(li @ phi @ li.T)
    bh = v.T @ (li @ (phi @ p))
    base = float(p @ phi @ p)
    lam_max = lam[-1]
    scale = max(1.0, np.max(np.abs(lam)), float(np.abs(bh).max(initial=0.0)))
    top = np.abs(lam - lam_max) <= 1e-12 * scale
    bh2 = bh ** 2

    def value(u):
        return u + base + float(np.sum(bh2 / (u - lam)))

    def slope(u):
        return 1.0 - float(np.sum(bh2 / (u - lam) ** 2))

    lo = max(lam_max, 0.0)
    if lam_max < 0 and slope(0.0) >= 0:
        return value(0.0), 0.0
    if lam_max >= 0 and np.all(bh2[top] <= 1e-24 * scale ** 2):
        # hard case: the multiplier may sit at the top eigenvalue
        rest = ~top
        if 1.0 - float(np.sum(bh2[rest] / (lam_max - lam[rest]) ** 2)) >= 0:
            return lam_max + base + float(np.sum(bh2[rest] / (lam_max - lam[rest]))), lam_max
        bh2 = np.where(top, 0.0, bh2)
    # the slope increases from -inf just above lo to 1 at infinity
    step = 1e-12 * scale
    while slope(lo + step) >= 0:
        step *= 1e-3
    hi = lo + scale + 1.0
    while slope(hi) < 0:
        hi = lo + 2.0 * (hi - lo)
    u = optimize.brentq(slope, lo + step, hi, xtol=1e-15 * (1 + hi), rtol=1e-15, maxiter=500)
    return value(u), u


def ellipsoid_min_quadratic(phi: np.ndarray, p: np.ndarray, c: np.ndarray) -> Tuple[float, float]:
    """min of (p + dp)^T phi (p + dp) over the ellipsoid, with its multiplier."""
    val, u = ellipsoid_max_quadratic(-phi, p, c)
    return -val, u


def _quadratics(scenario: RelayScenario, w: np.ndarray):
    """Real quadratic forms in p: destination signal, relayed jammer at D, relay power."""
    hd_w = scenario.h_rd_eff @ w
    r_d = hd_w @ scenario.q_d
    r_j = hd_w @ scenario.q_j
    sig = np.real(np.outer(r_d.conj(), r_d))
    jam = np.real(np.outer(r_j.conj(), r_j))
    wq_d, wq_j = w @ scenario.q_d, w @ scenario.q_j
    power = (scenario.p_s * abs(scenario.h_sr) ** 2 * np.real(wq_d.conj().T @ wq_d)
             + scenario.p_j_max * abs(scenario.h_jr) ** 2 * np.real(wq_j.conj().T @ wq_j))
    return sig, jam, 0.5 * (power + power.T), float(np.vdot(hd_w, hd_w).real)


def worst_case_power(scenario: RelayScenario, w: np.ndarray, p_star: np.ndarray,
                     ellipsoid: ErrorEllipsoid) -> Tuple[float, float]:
    """Largest relay power over the error set and the multiplier u2."""
    _, _, power, _ = _quadratics(scenario, w)
    val, u = ellipsoid_max_quadratic(power, p_star, ellipsoid.c)
    return val + scenario.sigma_r2 * float(np.sum(np.abs(w) ** 2)), u


def _sinr_margin(scenario, sig, jam, noise_gain, p_star, c, a):
    phi = scenario.p_s * abs(scenario.h_sr) ** 2 * sig - a * scenario.p_j_max * abs(scenario.h_jr) ** 2 * jam
    val, u = ellipsoid_min_quadratic(phi, p_star, c)
    return val - a * (scenario.sigma_r2 * noise_gain + scenario.sigma_d2), u


def certified_rate(scenario: RelayScenario, w: np.ndarray, p_star: np.ndarray,
                   ellipsoid: ErrorEllipsoid, gamma_max: float = 64.0) -> Tuple[float, float]:
    """Largest secrecy rate guaranteed for every pointing in the error set.

    Returns (gamma, u1). Assumes nothing reaches E through the relay, so the
    eavesdropper term is the direct-link rate. Returns (-inf, nan) when even
    a zero secrecy rate cannot be guaranteed.
    """
    sig, jam, _, noise_gain = _quadratics(scenario, w)
    eve = eve_rate_nulled(scenario)
    x_e = 2.0 ** eve - 1.0

    def margin(gamma):
        return _sinr_margin(scenario, sig, jam, noise_gain, p_star, ellipsoid.c,
                            2.0 ** gamma * (1.0 + x_e) - 1.0)

    if margin(0.0)[0] < 0:
        return -np.inf, np.nan
    hi = 1.0
    while margin(hi)[0] >= 0 and hi < gamma_max:
        hi *= 2.0
    if margin(hi)[0] >= 0:
        return hi, margin(hi)[1]
    g = optimize.brentq(lambda x: margin(x)[0], 0.0, hi, xtol=1e-12)
    # stay on the feasible side of the root
    while margin(g)[0] < 0:
        g -= 1e-12
    return g, margin(g)[1]


def sampled_worst_rate(scenario: RelayScenario, w: np.ndarray, p_star: np.ndarray,
                       errors: np.ndarray) -> float:
    """Smallest secrecy rate I_D - I_E over the given pointing errors (not clamped)."""
    worst = np.inf
    for dp in errors:
        i_d, i_e = relay_rates(scenario, w, p_star + dp)
        worst = min(worst, i_d - i_e)
    return float(worst)


# --- lifted LMI program -----------------------------------------------------

def hermitian_basis(n: int) -> np.ndarray:
    """n^2 real-coefficient basis of n x n Hermitian matrices, stacked."""
    out = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        out.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            out.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = 1j, -1j
            out.append(e)
    return np.array(out)


class _LiftedProgram:
    """Linear maps from the reduced Hermitian variable Z to the LMI data.

    vec(W) ranges over range(B) with B = I (x) N_e and N_e an orthonormal basis of
    the null space of h_RE R^1/2; the lifted variable is W' = s B Z B^H with s
    chosen so that tr Z <= 1 under the power budget.
    """

    def __init__(self, scenario: RelayScenario, p_star: np.ndarray, ellipsoid: ErrorEllipsoid):
        n = scenario.n_r
        self.scenario = scenario
        self.p = np.asarray(p_star, dtype=float)
        self.c = ellipsoid.c
        ne = null_basis(scenario.h_re_eff[None, :])
        self.basis = np.kron(np.eye(n), ne)
        self.nz = self.basis.shape[1]
        self.scale = scenario.p_r_max / scenario.sigma_r2
        herm = hermitian_basis(self.nz)
        self.herm = herm
        lifted = self.scale * np.einsum("ia,kab,jb->kij", self.basis, herm, self.basis.conj())
        h_d = scenario.h_rd_eff
        k_d = np.kron(scenario.q_d, h_d[:, None])
        k_j = np.kron(scenario.q_j, h_d[:, None])
        self.sig = np.real(np.einsum("im,kij,jn->kmn", k_d.conj(), lifted.conj(), k_d))
        self.jam = np.real(np.einsum("im,kij,jn->kmn", k_j.conj(), lifted.conj(), k_j))
        g_b = np.kron(np.eye(n), np.outer(h_d.conj(), h_d))
        self.noise_gain = np.real(np.einsum("ij,kji->k", g_b, lifted))
        w4 = lifted.reshape(-1, n, n, n, n, order="F")
        # lifted[k, r + n c, r2 + n c2] -> w4[k, r, c, r2, c2]
        d_d = np.einsum("cm,dn,krdrc->kmn", scenario.q_d.conj(), scenario.q_d, w4)
        d_j = np.einsum("cm,dn,krdrc->kmn", scenario.q_j.conj(), scenario.q_j, w4)
        self.power = np.real(scenario.p_s * abs(scenario.h_sr) ** 2 * d_d
                             + scenario.p_j_max * abs(scenario.h_jr) ** 2 * d_j)
        self.power = 0.5 * (self.power + self.power.transpose(0, 2, 1))
        self.trace = np.real(np.einsum("kii->k", lifted))
        self.embedded = np.array([embed_hermitian(e) for e in herm])

    def _border(self, mats: np.ndarray, corner: np.ndarray) -> np.ndarray:
        mp = mats @ self.p
        top = np.concatenate([mats, mp[:, :, None]], axis=2)
        bottom = np.concatenate([mp, (mp @ self.p + corner)[:, None]], axis=1)
        return np.concatenate([top, bottom[:, None, :]], axis=1)

    def program(self, a: float, objective: Optional[np.ndarray]) -> Tuple[ConeProgram, int]:
        """Cone program in LMI form; ``objective`` None means maximize the slack t.

        Variables y = [Z coefficients, u1, u2] (+ t in the relaxed form).
        """
        sc = self.scenario
        k = len(self.herm)
        dim = self.p.size + 1
        phi = sc.p_s * abs(sc.h_sr) ** 2 * self.sig - a * sc.p_j_max * abs(sc.h_jr) ** 2 * self.jam
        s1 = 1.0 / max(a * sc.sigma_d2, 1e-12)
        s2 = 1.0 / sc.p_r_max
        lmi1 = s1 * self._border(phi, -a * sc.sigma_r2 * self.noise_gain)
        lmi2 = -s2 * self._border(self.power, sc.sigma_r2 * self.trace)
        u_block = np.zeros((dim, dim))
        u_block[:-1, :-1] = self.c
        u_block[-1, -1] = -1.0
        relaxed = objective is None
        m = k + 2 + (1 if relaxed else 0)
        z_rows = np.zeros((m, 2 * self.nz, 2 * self.nz))
        z_rows[:k] = self.embedded
        l1 = np.zeros((m, dim, dim))
        l1[:k] = lmi1
        l1[k] = s1 * u_block
        l2 = np.zeros((m, dim, dim))
        l2[:k] = lmi2
        l2[k + 1] = s2 * u_block
        c1 = np.zeros((dim, dim))
        c2 = np.zeros((dim, dim))
        c2[-1, -1] = 1.0
        if relaxed:
            l1[k + 2, -1, -1] = -a * sc.sigma_d2 * s1
        else:
            c1[-1, -1] = -a * sc.sigma_d2 * s1
        a_lin = np.zeros((m, 2))
        a_lin[k, 0] = a_lin[k + 1, 1] = -1.0
        b = np.zeros(m)
        if relaxed:
            b[k + 2] = 1.0
        else:
            b[:k] = -np.real(np.einsum("ij,kji->k", objective, self.herm))
        prog = ConeProgram(b, [np.zeros((2 * self.nz, 2 * self.nz)), c1, c2],
                           [-z_rows, -l1, -l2], np.zeros(2), a_lin)
        return prog, k

    def z_from(self, y: np.ndarray) -> np.ndarray:
        return convex.hermitian_part(np.einsum("k,kij->ij", y[:len(self.herm)], self.herm))

    def w_from(self, z_vec: np.ndarray) -> np.ndarray:
        omega = np.sqrt(self.scale) * (self.basis @ z_vec)
        return unvec(omega, self.scenario.n_r)


def robust_beamformer(scenario: RelayScenario, p_star: np.ndarray, ellipsoid: ErrorEllipsoid,
                      w_star: Optional[np.ndarray] = None, gamma_tol: float = GAMMA_TOL,
                      rank1_tol: float = convex.RANK1_TOL, max_iter: int = convex.PENALTY_MAX_ITER,
                      trace: Optional[Callable[[str], None]] = None) -> RobustDesign:
    """Relay matrix maximizing the secrecy rate guaranteed over the pointing error set.

    Bisection on the target rate over [0, gamma_up], gamma_up being the
    nominal design's rate. Each target is tested by a relaxed LMI program and
    then the rank-1 penalty loop; the extracted W is certified exactly.
    """
    if ellipsoid.dim != 3 * scenario.n_r:
        raise ValueError("ellipsoid dimension must be 3 N_R")
    p_star = np.asarray(p_star, dtype=float)
    if w_star is None:
        w_star = optimize_w_given_p(scenario, p_star)
    gamma_up = max(0.0, nulled_objective(scenario, w_star, p_star))
    x_e = 2.0 ** eve_rate_nulled(scenario) - 1.0
    lifted = _LiftedProgram(scenario, p_star, ellipsoid)
    found: Dict = {}
    log: List[Tuple[float, bool]] = []

    # the LMI data carry the scale of C, and so does the attainable dual residual
    dual_ok = 1e-9 * max(1.0, float(np.linalg.norm(ellipsoid.c, 2)))

    def solve(prog):
        # These programs are degenerate at the optimum and the primal side can
        # stall; the dual iterate stays LMI-feasible, which is all that is used.
        sol = solve_cone_program(prog, tol=1e-9, max_iter=LMI_MAX_ITER, raise_on_max_iter=False)
        usable = sol.status == OPTIMAL or (sol.status == MAX_ITERATIONS and sol.dual_residual <= dual_ok)
        if not usable:
            raise Infeasible(f"robust subproblem {sol.status}")
        return sol

    def attempt(gamma: float) -> bool:
        if found and gamma <= found["gamma"]:
            return True
        a = 2.0 ** gamma * (1.0 + x_e) - 1.0
        try:
            relaxed = solve(lifted.program(a, None)[0])
        except (Infeasible, MaxIterations):
            log.append((gamma, False))
            return False
        if relaxed.y[-1] < 1.0:
            log.append((gamma, False))
            return False

        def template(prev):
            return convex.penalty_objective(prev)

        def step(objective):
            return lifted.z_from(solve(lifted.program(a, objective)[0]).y)

        try:
            res = rank1_penalty_loop(template, lifted.z_from(relaxed.y), rank1_tol, max_iter,
                                     solve=step, raise_on_stall=False)
        except (Infeasible, MaxIterations):
            log.append((gamma, False))
            return False
        if not res.converged:
            log.append((gamma, False))
            return False
        w = lifted.w_from(res.vector)
        w, certified, u1, u2 = _certify(scenario, w, p_star, ellipsoid)
        ok = certified >= gamma - gamma_tol
        log.append((gamma, ok))
        if trace is not None:
            trace(f"{gamma:.6f}\t{a:.6e}\t{relaxed.y[-1]:.6e}\t{res.gap:.3e}\t{certified:.6f}\t{int(ok)}")
        if ok and ("gamma" not in found or certified > found["gamma"]):
            found.update(w=w, gamma=certified, u=(u1, u2), gap=res.gap, iterations=res.iterations)
        return ok

    if not attempt(0.0):
        raise Infeasible("no relay matrix guarantees a nonnegative secrecy rate over the error set")
    if gamma_up > found["gamma"]:
        bisection(max(0.0, found["gamma"]), gamma_up, attempt, gamma_tol)
    gamma = min(found["gamma"], gamma_up)
    w = found["w"]
    leak = scenario.h_re_eff @ w @ scenario.q_d
    diag = {
        "gamma_up": gamma_up,
        "certified_unclipped": found["gamma"],
        "rank1_gap": found["gap"],
        "penalty_iterations": found["iterations"],
        "leakage_residual": float(np.linalg.norm(leak)),
        "worst_case_power": worst_case_power(scenario, w, p_star, ellipsoid)[0],
        "bisection_log": log,
    }
    return RobustDesign(w, float(gamma), found["u"], diag)


def _certify(scenario, w, p_star, ellipsoid):
    """Scale W into the worst-case power budget, then certify its worst-case rate."""
    power, _ = worst_case_power(scenario, w, p_star, ellipsoid)
    if power > scenario.p_r_max:
        w = w * np.sqrt(scenario.p_r_max / power) * (1.0 - 1e-12)
    _, u2 = worst_case_power(scenario, w, p_star, ellipsoid)
    gamma, u1 = certified_rate(scenario, w, p_star, ellipsoid)
    return w, gamma, u1, u2
