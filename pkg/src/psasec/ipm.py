"""Dense primal-dual interior-point method for small block cone programs.

Solves the standard pair

    (P)  min  <C, X>   s.t.  <A_i, X> = b_i,  X in K
    (D)  max  b^T y    s.t.  sum_i y_i A_i + Z = C,  Z in K

where K is a product of real symmetric PSD cones and one nonnegative
orthant. The search direction is the HKM (XZ) direction with a Mehrotra
predictor-corrector step, started from an infeasible interior point.
Problems stated as LMIs in y fit the dual side directly.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import linalg as sla

from .errors import MaxIterations

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
DUAL_INFEASIBLE = "dual_infeasible"
MAX_ITERATIONS = "max_iterations"
STALL_ITERATIONS = 5


@dataclass
class ConeProgram:
    """Data of a block cone program in standard primal form.

    ``c_psd[k]`` is the n_k x n_k cost block of PSD block k, ``a_psd[k]`` the
    (m, n_k, n_k) stack of constraint blocks. ``c_lin`` and ``a_lin`` (m, n_l)
    describe the nonnegative orthant block and may have length zero.
    """

    b: np.ndarray
    c_psd: List[np.ndarray]
    a_psd: List[np.ndarray]
    c_lin: np.ndarray = field(default_factory=lambda: np.zeros(0))
    a_lin: Optional[np.ndarray] = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        m = self.b.size
        self.c_psd = [0.5 * (np.asarray(c, float) + np.asarray(c, float).T) for c in self.c_psd]
        self.a_psd = [np.asarray(a, float).reshape(m, c.shape[0], c.shape[0]) for a, c in zip(self.a_psd, self.c_psd)]
        self.a_psd = [0.5 * (a + a.transpose(0, 2, 1)) for a in self.a_psd]
        self.c_lin = np.asarray(self.c_lin, dtype=float).reshape(-1)
        if self.a_lin is None:
            self.a_lin = np.zeros((m, self.c_lin.size))
        self.a_lin = np.asarray(self.a_lin, dtype=float).reshape(m, self.c_lin.size)

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def sizes(self) -> List[int]:
        return [c.shape[0] for c in self.c_psd]


@dataclass
class ConeSolution:
    status: str
    x_psd: List[np.ndarray]
    x_lin: np.ndarray
    y: np.ndarray
    z_psd: List[np.ndarray]
    z_lin: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int


class _Ops:
    """Linear maps A(X) and A^T(y) for a fixed program."""

    def __init__(self, prog: ConeProgram):
        self.prog = prog
        self.flat = [a.reshape(prog.m, -1) for a in prog.a_psd]

    def apply(self, xs, xl):
        out = self.prog.a_lin @ xl if xl.size else np.zeros(self.prog.m)
        for fl, x in zip(self.flat, xs):
            out = out + fl @ x.reshape(-1)
        return out

    def adjoint(self, y):
        zs = [(y @ fl).reshape(c.shape) for fl, c in zip(self.flat, self.prog.c_psd)]
        zl = y @ self.prog.a_lin
        return zs, zl


def _inner(xs, xl, zs, zl):
    return sum(float(np.vdot(x, z)) for x, z in zip(xs, zs)) + float(xl @ zl)


def _sym(a):
    return 0.5 * (a + a.T)


def _max_step(x, dx):
    """Largest alpha with x + alpha dx PSD (inf if unbounded)."""
    try:
        lo = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    t = sla.solve_triangular(lo, dx, lower=True)
    t = sla.solve_triangular(lo, t.T, lower=True)
    lmin = np.linalg.eigvalsh(_sym(t))[0]
    return np.inf if lmin >= 0 else -1.0 / lmin


def _max_step_lin(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve_cone_program(prog: ConeProgram, tol: float = 1e-8, max_iter: int = 100,
                       trace: Optional[Callable[[str], None]] = None,
                       raise_on_max_iter: bool = True) -> ConeSolution:
    """Solve a block cone program with an infeasible primal-dual path-following method.

    Parameters
    ----------
    prog : ConeProgram
    tol : float
        Relative tolerance on primal residual, dual residual and duality gap.
    max_iter : int
        Iteration cap.
    trace : callable, optional
        Receives one tab-separated line per iteration.
    raise_on_max_iter : bool
        Raise MaxIterations when the cap is reached; otherwise return the last
        iterate with status ``max_iterations``.
    """
    ops = _Ops(prog)
    m = prog.m
    sizes = prog.sizes
    nl = prog.c_lin.size
    nu = sum(sizes) + nl

    norm_b = np.linalg.norm(prog.b)
    norm_c = np.sqrt(sum(np.sum(c * c) for c in prog.c_psd) + prog.c_lin @ prog.c_lin)
    a_norms = np.sqrt(sum(np.sum(fl * fl, axis=1) for fl in ops.flat) + np.sum(prog.a_lin ** 2, axis=1))
    a_norms = np.maximum(a_norms, 1e-12)
    n_max = max(sizes + [1])
    xi = max(10.0, np.sqrt(n_max), n_max * float(np.max((1 + np.abs(prog.b)) / (1 + a_norms))) if m else 10.0)
    eta = max(10.0, np.sqrt(n_max), norm_c, float(np.max(a_norms)) if m else 0.0)

    xs = [xi * np.eye(n) for n in sizes]
    zs = [eta * np.eye(n) for n in sizes]
    xl = xi * np.ones(nl)
    zl = eta * np.ones(nl)
    y = np.zeros(m)

    status = MAX_ITERATIONS
    it = 0
    stalled = 0
    prev_obj = None
    pobj = dobj = np.nan
    pres = dres = gap = np.inf
    for it in range(1, max_iter + 1):
        ax = ops.apply(xs, xl)
        aty_s, aty_l = ops.adjoint(y)
        rp = prog.b - ax
        rd_s = [c - z - a for c, z, a in zip(prog.c_psd, zs, aty_s)]
        rd_l = prog.c_lin - zl - aty_l
        pobj = _inner(prog.c_psd, prog.c_lin, xs, xl)
        dobj = float(prog.b @ y)
        mu = _inner(xs, xl, zs, zl) / nu
        pres = np.linalg.norm(rp) / (1 + norm_b)
        dres = np.sqrt(sum(np.sum(r * r) for r in rd_s) + rd_l @ rd_l) / (1 + norm_c)
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        if trace is not None:
            trace(f"{it}\t{pobj:.12e}\t{dobj:.12e}\t{gap:.3e}\t{pres:.3e}\t{dres:.3e}")
        if pres <= tol and dres <= tol and gap <= tol:
            status = OPTIMAL
            break
        # no measurable progress for several iterations: return the iterate
        if prev_obj is not None and abs(pobj - prev_obj[0]) + abs(dobj - prev_obj[1]) <= 1e-12 * (1 + abs(pobj)):
            stalled += 1
            if stalled >= STALL_ITERATIONS:
                break
        else:
            stalled = 0
        prev_obj = (pobj, dobj)
        # infeasibility certificates from diverging iterates
        if dobj > 0:
            cert_s = [a + z for a, z in zip(aty_s, zs)]
            cert = np.sqrt(sum(np.sum(r * r) for r in cert_s) + np.sum((aty_l + zl) ** 2))
            if cert / dobj < tol and dobj > 1e6 * (1 + norm_c):
                status = INFEASIBLE
                break
        if pobj < 0:
            if np.linalg.norm(ax) / -pobj < tol and -pobj > 1e6 * (1 + norm_b):
                status = DUAL_INFEASIBLE
                break

        # Schur complement of the HKM direction
        zinv = []
        for z in zs:
            try:
                lz = np.linalg.cholesky(z)
                li = sla.solve_triangular(lz, np.eye(z.shape[0]), lower=True)
                zinv.append(li.T @ li)
            except np.linalg.LinAlgError:
                zinv.append(np.linalg.pinv(z))
        schur = np.zeros((m, m))
        g_list = []
        for a, x, zi, fl in zip(prog.a_psd, xs, zinv, ops.flat):
            g = np.matmul(np.matmul(x, a), zi)
            g_list.append(g)
            schur += fl @ g.transpose(0, 2, 1).reshape(m, -1).T
        d_lin = xl / zl if nl else np.zeros(0)
        if nl:
            schur += (prog.a_lin * d_lin) @ prog.a_lin.T
        schur = 0.5 * (schur + schur.T)
        try:
            chol = sla.cho_factor(schur + 1e-14 * np.trace(schur) / max(m, 1) * np.eye(m))
            solve_m = lambda r: sla.cho_solve(chol, r)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            pinv = np.linalg.pinv(schur, rcond=1e-14)
            solve_m = lambda r: pinv @ r

        def direction(sigma_mu, corr_s, corr_l):
            # dX = sigma*mu*Zinv - X - X dZ Zinv - corr ; dZ = Rd - A^T dy
            rhs_s = [sigma_mu * zi - x - x @ rd @ zi - cs for zi, x, rd, cs in zip(zinv, xs, rd_s, corr_s)]
            rhs_l = sigma_mu / zl - xl - xl * rd_l / zl - corr_l if nl else np.zeros(0)
            r = rp - ops.apply([_sym(h) for h in rhs_s], rhs_l)
            dy = solve_m(r)
            dz_s_a, dz_l_a = ops.adjoint(dy)
            dz_s = [rd - d for rd, d in zip(rd_s, dz_s_a)]
            dz_l = rd_l - dz_l_a
            dx_s =[_sym(sigma_mu * zi - x - x @ dz @ zi - cs) for zi, x, dz, cs in zip(zinv, xs, dz_s, corr_s)]
            dx_l = sigma_mu / zl - xl - xl * dz_l / zl - corr_l if nl else np.zeros(0)
            return dx_s, dx_l, dy, dz_s, dz_l

        def steps(dx_s, dx_l, dz_s, dz_l):
            ap = min([_max_step(x, d) for x, d in zip(xs, dx_s)] + [_max_step_lin(xl, dx_l) if nl else np.inf])
            ad = min([_max_step(z, d) for z, d in zip(zs, dz_s)] + [_max_step_lin(zl, dz_l) if nl else np.inf])
            return ap, ad

        zero_s = [np.zeros_like(x) for x in xs]
        zero_l = np.zeros(nl)
        dx_s, dx_l, dy, dz_s, dz_l = direction(0.0, zero_s, zero_l)
        ap, ad = steps(dx_s, dx_l, dz_s, dz_l)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = _inner([x + ap * d for x, d in zip(xs, dx_s)], xl + ap * dx_l,
                        [z + ad * d for z, d in zip(zs, dz_s)], zl + ad * dz_l) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        corr_s = [dx @ dz @ zi for dx, dz, zi in zip(dx_s, dz_s, zinv)]
        corr_l = dx_l * dz_l / zl if nl else zero_l
        dx_s, dx_l, dy, dz_s, dz_l = direction(sigma * mu, corr_s, corr_l)
        ap, ad = steps(dx_s, dx_l, dz_s, dz_l)
        tau = 0.98 if it > 1 else 0.9
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        xs = [_sym(x + ap * d) for x, d in zip(xs, dx_s)]
        xl = xl + ap * dx_l
        y = y + ad * dy
        zs = [_sym(z + ad * d) for z, d in zip(zs, dz_s)]
        zl = zl + ad * dz_l
    else:
        it = max_iter
    if status == MAX_ITERATIONS:
        if raise_on_max_iter:
            raise MaxIterations(f"interior point: no convergence after {it} iterations "
                                f"(gap {gap:.2e}, primal {pres:.2e}, dual {dres:.2e})")
    return ConeSolution(status, xs, xl, y, zs, zl, pobj, dobj, pres, dres, gap, it)
