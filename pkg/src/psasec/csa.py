"""Conventional scalar array (CSA) baselines.

Every element of a CSA has the same orientation, so the array is blind to
polarization and cannot null the jammer through its pointing. Only the
receive combiner and the power split are optimized. At the destination
the combiner is MVDR against the jammer, which makes both SINRs linear in
P_S for a fixed P_J, and the one remaining scalar search is done on a
grid refined by a bounded 1-D minimizer.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .em import PsaGeometry, pointing_to_p
from .errors import Infeasible
from .relay import (RelayDesign, RelayScenario, null_residuals, optimize_w_given_p, relay_power,
                    relay_secrecy_rate)
from .simo import (PowerAllocation, SimoDesign, SimoScenario, eve_beamformer, mvdr_beamformer,
                   rate_from_sinr, sinr_destination_mvdr, sinr_eve)

GRID_POINTS = 400


def csa_pointing(n_antennas: int, direction: Sequence[float] = (0.0, 0.0)) -> np.ndarray:
    """Pointing vector with every element along the (theta_e, phi_e) direction, in radians."""
    theta, phi = direction
    angles = np.tile([theta, phi], (n_antennas, 1))
    return pointing_to_p(PsaGeometry(n_antennas, pointing_angles=angles))


def _sinr_slopes(scenario: SimoScenario, pointing: np.ndarray, p_j: float) -> Tuple[float, float]:
    """SINR_D / P_S and SINR_E / P_S at jammer power p_j."""
    return (sinr_destination_mvdr(scenario, pointing, 1.0, p_j), sinr_eve(scenario, 1.0, p_j))


def csa_source_power(scenario: SimoScenario, pointing: np.ndarray, r_sec_0: float, p_j: float) -> float:
    """Smallest P_S reaching ``r_sec_0`` at jammer power p_j, or inf when no P_S does."""
    t = 2.0 ** r_sec_0
    d, e = _sinr_slopes(scenario, pointing, p_j)
    margin = d - t * e
    if margin <= 0:
        return np.inf
    return (t - 1.0) / margin


def _refine(f, x_grid: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Polish the best grid point with a bounded search between its neighbours."""
    k = int(np.argmin(values))
    best_x, best_v = float(x_grid[k]), float(values[k])
    lo = x_grid[max(k - 1, 0)]
    hi = x_grid[min(k + 1, len(x_grid) - 1)]
    if hi > lo:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10 * max(1.0, hi)})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return best_x, best_v


def csa_min_power(scenario: SimoScenario, pointing: np.ndarray, r_sec_0: float,
                  p_j_max: float = 1e6) -> PowerAllocation:
    """Minimum P_S + P_J for the MVDR receiver; raises Infeasible if no jammer power works."""
    if r_sec_0 <= 0:
        return PowerAllocation(0.0, 0.0)
    grid = np.concatenate([[0.0], np.logspace(-4, np.log10(p_j_max), GRID_POINTS)])

    def total(p_j):
        return csa_source_power(scenario, pointing, r_sec_0, p_j) + p_j

    values = np.array([total(p) for p in grid])
    if not np.any(np.isfinite(values)):
        raise Infeasible(f"CSA cannot reach secrecy rate {r_sec_0} for any jammer power")
    p_j, _ = _refine(total, grid, values)
    return PowerAllocation(csa_source_power(scenario, pointing, r_sec_0, p_j), p_j)


def csa_max_rate(scenario: SimoScenario, pointing: np.ndarray, p_max: float) -> Tuple[PowerAllocation, float]:
    """Best split of p_max between source and jammer for the MVDR receiver."""
    if not p_max > 0:
        raise ValueError("p_max must be positive")

    def neg_ratio(p_s):
        p_j = max(p_max - p_s, 0.0)
        d, e = _sinr_slopes(scenario, pointing, p_j)
        return -(1.0 + p_s * d) / (1.0 + p_s * e)

    grid = np.linspace(0.0, p_max, GRID_POINTS + 1)
    values = np.array([neg_ratio(p) for p in grid])
    p_s, v = _refine(neg_ratio, grid, values)
    return PowerAllocation(p_s, p_max - p_s), max(0.0, float(np.log2(-v)))


def csa_baseline(scenario: SimoScenario, mode: str = "power_min", r_sec_0: Optional[float] = None,
                 p_max: Optional[float] = None, direction: Sequence[float] = (0.0, 0.0)) -> SimoDesign:
    """CSA design for the SIMO link: fixed common pointing, MVDR combiner, optimized powers.

    Parameters
    ----------
    mode : {"power_min", "rate_max"}
        Minimize total power for ``r_sec_0`` or maximize the rate for ``p_max``.
    direction : (theta_e, phi_e)
        Common element orientation in radians; the default is the z axis.
    """
    p = csa_pointing(scenario.n_d, direction)
    if mode == "power_min":
        if r_sec_0 is None:
            raise ValueError("power_min needs r_sec_0")
        alloc = csa_min_power(scenario, p, r_sec_0)
    elif mode == "rate_max":
        if p_max is None:
            raise ValueError("rate_max needs p_max")
        alloc, _ = csa_max_rate(scenario, p, p_max)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    w_d = mvdr_beamformer(scenario, p, alloc.p_j)
    w_e = eve_beamformer(scenario, alloc.p_j)
    rate = rate_from_sinr(sinr_destination_mvdr(scenario, p, alloc.p_s, alloc.p_j),
                          sinr_eve(scenario, alloc.p_s, alloc.p_j))
    return SimoDesign(p, w_d, w_e, alloc, rate, {"array": "csa", "jammer_null": False})


def relay_csa_baseline(scenario: RelayScenario, direction: Sequence[float] = (0.0, 0.0)) -> RelayDesign:
    """CSA relay: the relay matrix is optimized at the fixed common pointing, no pointing update."""
    p = csa_pointing(scenario.n_r, direction)
    w = optimize_w_given_p(scenario, p)
    diag = dict(null_residuals(scenario, w, p))
    diag.update({"relay_power": relay_power(scenario, w, p, scenario.p_j_max), "array": "csa"})
    return RelayDesign(w, p, relay_secrecy_rate(scenario, (w, p)), [], diag)

