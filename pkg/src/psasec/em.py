"""Electromagnetic signal model and spatio-polarized manifold of a PSA.

A polarization sensitive array (PSA) is a uniform linear array of short
dipoles whose orientations may differ from element to element. Each
element responds to the electric field of the incoming wave through the
dot product of its pointing unit vector with the field vector, so the
array response combines space phase, element pointing and signal
polarization.

Conventions
-----------
Angles are in radians. The pointing vector ``p`` of an N-element array
stacks all x components, then all y components, then all z components.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

_ANGLE_SLACK = 1e-9


@dataclass(frozen=True)
class DoaPoa:
    """Direction of arrival (theta, phi) and polarization (alpha, beta) of a signal."""

    theta: float
    phi: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        checks = (
            ("theta", self.theta, 0.0, np.pi),
            ("phi", self.phi, 0.0, np.pi),
            ("alpha", self.alpha, -np.pi / 2, np.pi / 2),
            ("beta", self.beta, -np.pi / 4, np.pi / 4),
        )
        for name, value, lo, hi in checks:
            if not np.isfinite(value) or value < lo - _ANGLE_SLACK or value > hi + _ANGLE_SLACK:
                raise ValueError(f"{name}={value!r} outside [{lo:.6g}, {hi:.6g}]")

    @classmethod
    def from_degrees(cls, theta: float, phi: float, alpha: float = 0.0, beta: float = 0.0) -> "DoaPoa":
        return cls(*np.deg2rad([theta, phi, alpha, beta]))


@dataclass(frozen=True)
class PsaGeometry:
    """Element count, spacing (in wavelengths), gain and per-element pointing angles.

    ``pointing_angles`` holds one ``(theta_e, phi_e)`` pair per element. When
    omitted every element points along z.
    """

    n_antennas: int
    spacing: float = 0.5
    gain: float = 1.0
    pointing_angles: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        angles = self.pointing_angles
        if angles is None:
            angles = np.zeros((self.n_antennas, 2))
        angles = np.array(angles, dtype=float).reshape(-1, 2)
        if angles.shape[0] != self.n_antennas:
            raise ValueError("need one (theta_e, phi_e) pair per antenna")
        angles.setflags(write=False)
        object.__setattr__(self, "pointing_angles", angles)


@dataclass(frozen=True)
class ManifoldMatrix:
    """The N x 3N matrix Q_k mapping a pointing vector to the array response."""

    entries: np.ndarray
    source: DoaPoa

    def __matmul__(self, p):
        return self.entries @ p

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class PointingConstraintSet:
    """Selectors F_n with tr(p^T F_n p) equal to the squared norm of element n."""

    matrices: Tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, n):
        return self.matrices[n]


def steering_matrix(doa: DoaPoa) -> np.ndarray:
    """Return the 6x2 matrix of electric and magnetic field bases for a DOA.

    Rows 0-2 are the electric field, rows 3-5 the magnetic field. Each
    field block has orthonormal columns, so the full matrix satisfies
    Xi^T Xi = 2 I.
    """
    st, ct = np.sin(doa.theta), np.cos(doa.theta)
    sp, cp = np.sin(doa.phi), np.cos(doa.phi)
    return np.array([
        [-st, cp * ct],
        [ct, cp * st],
        [0.0, -sp],
        [cp * ct, st],
        [cp * st, -ct],
        [-sp, 0.0],
    ])


def polarization_vector(alpha: float, beta: float) -> np.ndarray:
    """Return R(alpha) l(beta), the unit polarization 2-vector."""
    rot = np.array([[np.cos(alpha), -np.sin(alpha)],
                    [np.sin(alpha), np.cos(alpha)]])
    ell = np.array([np.cos(beta), 1j * np.sin(beta)])
    return rot @ ell


def em_signal_vector(doa: DoaPoa) -> np.ndarray:
    """Return the 6-vector of the signal's electric and magnetic field; each half has unit norm."""
    return steering_matrix(doa) @ polarization_vector(doa.alpha, doa.beta)


def space_phase(doa: DoaPoa, n_antennas: int, spacing: float = 0.5) -> np.ndarray:
    """Return the diagonal N x N space-phase matrix U_k.

    Entry n is exp(j pi n sin(phi) sin(theta)) for half-wavelength spacing;
    other spacings scale the exponent by spacing / 0.5.
    """
    n = np.arange(n_antennas)
    scale = 2.0 * spacing
    return np.diag(np.exp(1j * np.pi * scale * n * np.sin(doa.phi) * np.sin(doa.theta)))


def manifold_matrix(doa: DoaPoa, n_antennas: int, spacing: float = 0.5) -> ManifoldMatrix:
    """Build Q_k = [U s(1), U s(2), U s(3)] so that a_k = Q_k p.

    Only the electric part of the signal vector enters since the elements
    are short dipoles.
    """
    s = em_signal_vector(doa)
    u = space_phase(doa, n_antennas, spacing)
    q = np.hstack([u * s[0], u * s[1], u * s[2]])
    return ManifoldMatrix(q, doa)


def pointing_matrix(geometry: PsaGeometry) -> np.ndarray:
    """Return the N x 3 matrix of element pointing vectors, one row per element."""
    theta, phi = geometry.pointing_angles[:, 0], geometry.pointing_angles[:, 1]
    return geometry.gain * np.column_stack([
        np.sin(phi) * np.cos(theta),
        np.sin(phi) * np.sin(theta),
        np.cos(phi),
    ])


def pointing_to_p(geometry: PsaGeometry) -> np.ndarray:
    """Stack element pointings into p = [x_0..x_{N-1}, y_0..y_{N-1}, z_0..z_{N-1}]."""
    return pointing_matrix(geometry).T.reshape(-1)


def p_to_pointing_matrix(p: np.ndarray) -> np.ndarray:
    """Inverse of the stacking: return the N x 3 matrix of element pointings."""
    p = np.asarray(p)
    return p.reshape(3, -1).T


def p_to_angles(p: np.ndarray) -> np.ndarray:
    """Recover (theta_e, phi_e) per element from a pointing vector.

    The direction fixes phi_e in [0, pi] and theta_e in (-pi, pi]; the pair
    (theta + pi, -phi) describes the same dipole and is not returned.
    """
    m = p_to_pointing_matrix(p)
    norms = np.linalg.norm(m, axis=1)
    phi = np.arccos(np.clip(m[:, 2] / norms, -1.0, 1.0))
    theta = np.arctan2(m[:, 1], m[:, 0])
    return np.column_stack([theta, phi])


def element_norms(p: np.ndarray) -> np.ndarray:
    """Euclidean norm of each element's pointing block."""
    return np.linalg.norm(p_to_pointing_matrix(p), axis=1)


def z_pointing(n_antennas: int) -> np.ndarray:
    """Pointing vector with every element along the z axis."""
    return pointing_to_p(PsaGeometry(n_antennas))


def constraint_matrices(n_antennas: int) -> PointingConstraintSet:
    """Return the selectors F_n with unit diagonal entries at n, N+n, 2N+n."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be positive")
    mats = []
    for n in range(n_antennas):
        f = np.zeros((3 * n_antennas, 3 * n_antennas))
        idx = [n, n_antennas + n, 2 * n_antennas + n]
        f[idx, idx] = 1.0
        f.setflags(write=False)
        mats.append(f)
    return PointingConstraintSet(tuple(mats))


def polarization_distance(a: DoaPoa, b: DoaPoa) -> float:
    """Angular distance between two polarization states, in [0, pi]."""
    c = (np.cos(2 * a.beta) * np.cos(2 * b.beta) * np.cos(2 * (a.alpha - b.alpha))
         + np.sin(2 * a.beta) * np.sin(2 * b.beta))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def spatial_distance(a: DoaPoa, b: DoaPoa) -> float:
    """Azimuth separation |theta_a - theta_b|; elevation differences are ignored."""
    return float(abs(a.theta - b.theta))


def array_response(doa: DoaPoa, p: np.ndarray, spacing: float = 0.5) -> np.ndarray:
    """a_k = Q_k p for pointing vector p."""
    n = np.asarray(p).size // 3
    return manifold_matrix(doa, n, spacing) @ p

