"""Physical model of the RIS-aided sensing link.

Steering vectors, the rank-one RIS->SU channel, sinc spatial correlation,
exponentially correlated noise and the two-link path-loss model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

HERMITIAN_ATOL = 1e-12
PSD_RTOL = 1e-10
PSD_FLOOR = 1e-12


class SingularCovarianceWarning(UserWarning):
    """A covariance matrix is singular to working precision."""


@dataclass(frozen=True)
class SystemGeometry:
    """Antenna/RIS layout, angles and distances of one sensing scenario.

    Angles are in radians, lengths in meters. ``kappa`` is the ratio
    ``d_o / (d_1 + d_2)`` between the direct and the reflected path length.
    """

    M: int = 8
    N_x: int = 8
    N_y: int = 4
    wavelength: float = 0.1
    spacing: float | None = None
    phi_az: float = math.pi / 4
    phi_el: float = math.pi / 4
    theta: float = math.pi / 6
    d_o: float = 30.0
    kappa: float = 1.0 / 3.0
    xi: float = 3.0

    def __post_init__(self):
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2)
        for name in ("M", "N_x", "N_y"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not self.d_o > 0:
            raise ValueError("d_o must be positive")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if not self.xi > 0:
            raise ValueError("xi must be positive")

    @property
    def N(self) -> int:
        return self.N_x * self.N_y

    def ris_positions(self) -> np.ndarray:
        """(N, 2) element coordinates, row-major over the N_x x N_y grid."""
        ix, iy = np.meshgrid(np.arange(self.N_x), np.arange(self.N_y), indexing="ij")
        return self.spacing * np.column_stack([ix.ravel(), iy.ravel()]).astype(float)

    def su_positions(self) -> np.ndarray:
        """(M, 2) coordinates of the SU uniform linear array."""
        pos = np.zeros((self.M, 2))
        pos[:, 0] = self.spacing * np.arange(self.M)
        return pos

    def with_ris(self, N_x: int, N_y: int) -> "SystemGeometry":
        kwargs = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kwargs.update(N_x=N_x, N_y=N_y)
        return SystemGeometry(**kwargs)


@dataclass(frozen=True)
class PathLoss:
    beta: float
    nu: float

    @property
    def mu(self) -> float:
        return self.nu / self.beta


def check_hermitian(A, psd: bool = False, name: str = "matrix") -> np.ndarray:
    """Validate the Hermitian (and optionally PSD) contract and return ``A``."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.allclose(A, A.conj().T, rtol=0, atol=HERMITIAN_ATOL):
        raise ValueError(f"{name} is not Hermitian")
    if psd:
        w = np.linalg.eigvalsh(A)
        if w[0] < -PSD_RTOL * max(w[-1], 0.0):
            raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return A


def steering_vector(x: float, q: int) -> np.ndarray:
    """Unit-norm array response ``q**-0.5 * exp(1j*k*x)`` for k = 0..q-1."""
    if int(q) != q or q < 1:
        raise ValueError(f"q must be a positive integer, got {q!r}")
    return np.exp(1j * x * np.arange(q)) / math.sqrt(q)


def ris_response(geom: SystemGeometry) -> np.ndarray:
    """Departure response of the RIS, ``a(cos phi, N_x) kron a(sin phi cos phi', N_y)``."""
    ax = steering_vector(math.cos(geom.phi_az), geom.N_x)
    ay = steering_vector(math.sin(geom.phi_az) * math.cos(geom.phi_el), geom.N_y)
    return np.kron(ax, ay)


def los_channel(geom: SystemGeometry) -> np.ndarray:
    """Rank-one M x N RIS->SU channel ``a(theta, M) b^T``."""
    return np.outer(steering_vector(geom.theta, geom.M), ris_response(geom))


def sinc_covariance(positions, wavelength: float) -> np.ndarray:
    """Spatial correlation ``sinc(2 d_ij / wavelength)`` with normalized sinc.

    Coincident positions give correlation one; the resulting singular matrix
    is reported with :class:`SingularCovarianceWarning`.
    """
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    P = np.atleast_2d(np.asarray(positions, dtype=float))
    if P.shape[0] < 1:
        raise ValueError("at least one position is required")
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    R = np.sinc(2.0 * D / wavelength)
    R = 0.5 * (R + R.T)
    w = np.linalg.eigvalsh(R)
    if w[0] <= PSD_FLOOR * w[-1]:
        warnings.warn(
            f"sinc covariance is singular (eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}])",
            SingularCovarianceWarning,
            stacklevel=2,
        )
    return R


def regularize_psd(R, floor: float = PSD_FLOOR) -> np.ndarray:
    """Clamp eigenvalues below ``floor * max eigenvalue`` up to that level."""
    R = check_hermitian(R)
    w, V = np.linalg.eigh(R)
    lo = floor * w[-1]
    if w[0] >= lo:
        return R
    w = np.maximum(w, lo)
    out = (V * w) @ V.conj().T
    return 0.5 * (out + out.conj().T)


def noise_covariance(M: int, rho: float, sigma2: float) -> np.ndarray:
    """Exponential correlation model ``rho**|i-j| * sigma2``."""
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    if not 0 <= rho < 1:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    lag = np.abs(np.subtract.outer(np.arange(M), np.arange(M)))
    return sigma2 * np.power(float(rho), lag)


def path_losses(d_o: float, kappa: float, xi: float) -> PathLoss:
    """Direct gain ``d_o**-xi`` and reflected gain ``(d_o/kappa)**-xi``."""
    if not d_o > 0:
        raise ValueError("d_o must be positive")
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    if not xi > 0:
        raise ValueError("xi must be positive")
    beta = d_o ** (-xi)
    return PathLoss(beta=beta, nu=beta * kappa**xi)


def su_covariance(geom: SystemGeometry) -> np.ndarray:
    return sinc_covariance(geom.su_positions(), geom.wavelength)


def ris_covariance(geom: SystemGeometry) -> np.ndarray:
    return sinc_covariance(geom.ris_positions(), geom.wavelength)


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)
