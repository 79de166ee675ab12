"""Convex-optimization kernel shared by the SIMO and relay designs.

Contents: the generalized Rayleigh-quotient maximizer, a trace-constrained
Hermitian SDP container solved through its real embedding, the rank-1
penalty loop (minimize tr(X) minus the linearized largest eigenvalue) and a
bisection driver.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import linalg as sla

from .errors import Infeasible, InvalidBracket, SingularB, Stalled
from .ipm import (DUAL_INFEASIBLE, INFEASIBLE, MAX_ITERATIONS, OPTIMAL, ConeProgram,
                  solve_cone_program)

SDP_TOL = 1e-7
RANK1_TOL = 1e-6
PENALTY_MAX_ITER = 50
HERMITIAN_TOL = 1e-10


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate v so that its largest-magnitude entry is real and nonnegative."""
    v = np.asarray(v)
    k = int(np.argmax(np.abs(v)))
    if np.abs(v[k]) == 0:
        return v
    out = v * (np.abs(v[k]) / v[k])
    if np.iscomplexobj(out):
        out[k] = np.abs(v[k])
    return out


def max_generalized_eig(a: np.ndarray, b: np.ndarray) -> Tuple[float, np.ndarray]:
    """Largest eigenpair of a v = lambda b v for Hermitian a and positive definite b.

    The eigenvector has unit Euclidean norm and the phase convention of
    :func:`fix_phase`.
    """
    a = hermitian_part(np.asarray(a))
    b = hermitian_part(np.asarray(b))
    if np.linalg.eigvalsh(b)[0] <= 1e-12:
        raise SingularB("right-hand matrix is not positive definite")
    w, v = sla.eigh(a, b)
    vec = v[:, -1] / np.linalg.norm(v[:, -1])
    return float(w[-1]), fix_phase(vec)


def rayleigh_quotient(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(v, a @ v)) / np.real(np.vdot(v, b @ v)))


def embed_hermitian(x: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re X, -Im X], [Im X, Re X]] of a Hermitian matrix."""
    re, im = np.real(x), np.imag(x)
    return np.block([[re, -im], [im, re]])


def extract_hermitian(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian`, averaging the redundant blocks."""
    n = y.shape[0] // 2
    re = 0.5 * (y[:n, :n] + y[n:, n:])
    im = 0.5 * (y[n:, :n] - y[:n, n:])
    return re + 1j * im


def rank1_gap(x: np.ndarray) -> float:
    """tr(X) - lambda_max(X), zero exactly for rank-1 PSD matrices."""
    w = np.linalg.eigvalsh(hermitian_part(x))
    return float(np.sum(w) - w[-1])


def dominant_eig(x: np.ndarray) -> Tuple[float, np.ndarray]:
    """Largest eigenvalue and unit eigenvector (phase-fixed) of a Hermitian matrix."""
    w, v = np.linalg.eigh(hermitian_part(x))
    return float(w[-1]), fix_phase(v[:, -1])


@dataclass
class SdpProblem:
    """Optimize tr(C X) over Hermitian X >= 0 with trace equalities and inequalities.

    ``eq_constraints`` holds pairs (A_i, b_i) meaning tr(A_i X) = b_i and
    ``ineq_constraints`` pairs (B_j, c_j) meaning tr(B_j X) <= c_j.
    """

    dim: int
    objective: np.ndarray
    sense: str = "min"
    eq_constraints: List[Tuple[np.ndarray, float]] = field(default_factory=list)
    ineq_constraints: List[Tuple[np.ndarray, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        mats = [self.objective] + [a for a, _ in self.eq_constraints] + [b for b, _ in self.ineq_constraints]
        for a in mats:
            a = np.asarray(a)
            if a.shape != (self.dim, self.dim):
                raise ValueError(f"matrix of shape {a.shape}, expected {(self.dim, self.dim)}")
            if np.max(np.abs(a - a.conj().T), initial=0.0) > HERMITIAN_TOL * max(1.0, np.max(np.abs(a))):
                raise ValueError("constraint and objective matrices must be Hermitian")

    @property
    def is_real(self) -> bool:
        mats = [self.objective] + [a for a, _ in self.eq_constraints] + [b for b, _ in self.ineq_constraints]
        return all(not np.iscomplexobj(a) or np.max(np.abs(np.imag(a)), initial=0.0) == 0.0 for a in mats)

    def value(self, x: np.ndarray) -> float:
        return float(np.real(np.trace(self.objective @ x)))

    def residuals(self, x: np.ndarray) -> dict:
        """Constraint violations of a candidate X."""
        eq = max((abs(np.real(np.trace(a @ x)) - b) for a, b in self.eq_constraints), default=0.0)
        ineq = max((max(0.0, np.real(np.trace(a @ x)) - c) for a, c in self.ineq_constraints), default=0.0)
        psd = max(0.0, -float(np.linalg.eigvalsh(hermitian_part(x))[0]))
        return {"eq": float(eq), "ineq": float(ineq), "psd": psd}


@dataclass
class SdpSolution:
    x: np.ndarray
    objective_value: float
    status: str
    residuals: dict
    iterations: int = 0


def _real_block(a: np.ndarray, real: bool) -> np.ndarray:
    a = hermitian_part(np.asarray(a))
    if real:
        return np.real(a)
    # tr(phi(A) phi(X)) = 2 Re tr(A X)
    return 0.5 * embed_hermitian(a)


def sdp_to_cone(problem: SdpProblem) -> Tuple[ConeProgram, bool]:
    """Compile an SdpProblem to a real cone program in standard form.

    Complex data are embedded as real symmetric blocks of twice the size.
    Feasible points of the embedded problem can be symmetrized under the
    embedding's rotation without changing any constraint value, so the
    embedded block structure needs no extra equalities.
    """
    real = problem.is_real
    sign = 1.0 if problem.sense == "min" else -1.0
    c = sign * _real_block(problem.objective, real)
    rows = [_real_block(a, real) for a, _ in problem.eq_constraints]
    rows += [_real_block(b, real) for b, _ in problem.ineq_constraints]
    rhs = [float(np.real(b)) for _, b in problem.eq_constraints]
    rhs += [float(np.real(cj)) for _, cj in problem.ineq_constraints]
    m, n_eq, n_in = len(rows), len(problem.eq_constraints), len(problem.ineq_constraints)
    a_psd = np.array(rows).reshape(m, c.shape[0], c.shape[0])
    a_lin = np.zeros((m, n_in))
    a_lin[n_eq:, :] = np.eye(n_in)
    return ConeProgram(np.array(rhs), [c], [a_psd], np.zeros(n_in), a_lin), real


def solve_sdp(problem: SdpProblem, tol: float = SDP_TOL, max_iter: int = 100,
              trace: Optional[Callable[[str], None]] = None,
              raise_on_max_iter: bool = True) -> SdpSolution:
    """Solve an SdpProblem with the dense interior-point engine.

    Raises MaxIterations when neither optimality nor an infeasibility
    certificate is reached within ``max_iter`` iterations, unless
    ``raise_on_max_iter`` is False; the last iterate is then returned with
    status "max_iterations".
    """
    prog, real = sdp_to_cone(problem)
    sol = solve_cone_program(prog, tol=tol, max_iter=max_iter, trace=trace,
                             raise_on_max_iter=raise_on_max_iter)
    y = sol.x_psd[0]
    x = y if real else extract_hermitian(y)
    x = hermitian_part(x)
    status = {OPTIMAL: "optimal", INFEASIBLE: "infeasible", DUAL_INFEASIBLE: "unbounded",
              MAX_ITERATIONS: "max_iterations"}[sol.status]
    sign = 1.0 if problem.sense == "min" else -1.0
    res = {
        "primal": sol.primal_residual,
        "dual": sol.dual_residual,
        "gap": sol.gap,
        "primal_objective": sign * sol.primal_objective,
        "dual_objective": sign * sol.dual_objective,
    }
    return SdpSolution(x, problem.value(x), status, res, sol.iterations)


@dataclass
class Rank1Result:
    matrix: np.ndarray
    vector: np.ndarray
    gap: float
    iterations: int
    converged: bool
    gap_trace: List[float] = field(default_factory=list)


def dominant_direction(x: np.ndarray, cluster_tol: float = 1e-6) -> np.ndarray:
    """Unit vector of the top eigenspace used to linearize lambda_max.

    When the largest eigenvalue is repeated (within ``cluster_tol``
    relative), every unit vector of its eigenspace is a valid linearization
    point. A fixed generic direction projected onto the eigenspace is used
    instead of an arbitrary solver basis vector, which from a multiple of the
    identity would otherwise leave the iteration stuck.
    """
    w, v = np.linalg.eigh(hermitian_part(x))
    top = w[-1]
    cluster = w >= top - cluster_tol * max(abs(top), 1e-300)
    if np.count_nonzero(cluster) == 1:
        return fix_phase(v[:, -1])
    basis = v[:, cluster]
    probe = np.random.default_rng(20170611).standard_normal(x.shape[0])
    d = basis @ (basis.conj().T @ probe)
    return fix_phase(d / np.linalg.norm(d))


def penalty_objective(prev: np.ndarray) -> np.ndarray:
    """Cost matrix I - v v^H whose trace against X is tr(X) minus the linearized lambda_max."""
    v = dominant_direction(prev)
    return np.eye(prev.shape[0]) - np.outer(v, v.conj())


def rank1_penalty_loop(template: Callable[[np.ndarray], object], x0: np.ndarray,
                       rank1_tol: float = RANK1_TOL, max_iter: int = PENALTY_MAX_ITER,
                       solve: Optional[Callable[[object], np.ndarray]] = None,
                       stall_tol: float = 1e-12, raise_on_stall: bool = True,
                       trace: Optional[Callable[[str], None]] = None) -> Rank1Result:
    """Drive a feasible PSD matrix to rank one by the trace-minus-eigenvalue penalty.

    Parameters
    ----------
    template : callable
        Maps the previous iterate to the convex subproblem whose objective is
        tr((I - v v^H) X) with v the previous dominant eigenvector (see
        :func:`penalty_objective`) and whose constraints define the feasible
        set. By default the subproblem is an SdpProblem.
    x0 : ndarray
        Feasible starting point.
    solve : callable, optional
        Maps a subproblem to the next iterate. Defaults to :func:`solve_sdp`.
    stall_tol : float
        Minimum decrease of the gap per iteration while above tolerance.
    raise_on_stall : bool
        Raise Stalled on insufficient progress; otherwise return with
        ``converged=False``.
    """
    if solve is None:
        def solve(problem):
            sol = solve_sdp(problem, tol=1e-9)
            if sol.status != "optimal":
                raise Infeasible(f"penalty subproblem {sol.status}")
            return sol.x

    x = hermitian_part(np.asarray(x0))
    gap = rank1_gap(x)
    gaps = [gap]
    it = 1
    if trace is not None:
        trace(f"penalty\t0\t{gap:.6e}")
    while gap > rank1_tol and it <= max_iter:
        x_new = hermitian_part(solve(template(x)))
        new_gap = rank1_gap(x_new)
        if new_gap < -1e-9 * max(1.0, np.trace(x_new).real):
            raise AssertionError("trace minus largest eigenvalue became negative")
        gaps.append(new_gap)
        if trace is not None:
            trace(f"penalty\t{it}\t{new_gap:.6e}")
        decrease = gap - new_gap
        x, gap = x_new, new_gap
        it += 1
        if gap > rank1_tol and decrease < stall_tol:
            if raise_on_stall:
                raise Stalled(f"rank-1 gap stuck at {gap:.3e}")
            break
    lam, v = dominant_eig(x)
    vec = np.sqrt(max(lam, 0.0)) * v
    if np.isrealobj(x):
        vec = np.real(vec)
    return Rank1Result(x, vec, gap, it, gap <= rank1_tol, gaps)


def bisection(lo: float, hi: float, feasible: Callable[[float], bool], tol: float) -> float:
    """Largest value in [lo, hi] accepted by a monotone predicate, to within ``tol``."""
    if not feasible(lo):
        raise InvalidBracket(f"lower end {lo!r} is not feasible")
    if hi <= lo or feasible(hi):
        return hi if hi >= lo else lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
