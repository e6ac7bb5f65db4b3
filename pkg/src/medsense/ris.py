"""RIS phase configuration and the signal covariance it induces."""

from __future__ import annotations

import numpy as np

from .model import PathLoss, check_hermitian

UNIT_MODULUS_ATOL = 1e-12


def check_phases(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size < 1:
        raise ValueError("psi must be a non-empty vector")
    if not np.allclose(np.abs(psi), 1.0, rtol=0, atol=UNIT_MODULUS_ATOL):
        raise ValueError("RIS reflection coefficients must have unit modulus")
    return psi


def optimal_phases(N: int, theta_bar: float = 0.0) -> np.ndarray:
    """Co-phased configuration ``exp(1j*theta_bar) * ones(N)``."""
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    return np.full(int(N), np.exp(1j * theta_bar))


def random_phases(N: int, rng) -> np.ndarray:
    """I.i.d. uniform phases; ``rng`` is a seed or a numpy Generator."""
    rng = np.random.default_rng(rng)
    return np.exp(2j * np.pi * rng.random(int(N)))


def _check_dims(psi, H, R_h):
    M, N = H.shape
    if psi.shape != (N,):
        raise ValueError(f"psi has length {psi.shape[0]}, channel has {N} RIS elements")
    if R_h.shape != (N, N):
        raise ValueError(f"R_h must be {N}x{N}, got {R_h.shape}")


def trace_objective(psi, H, R_h) -> float:
    """``psi^H ((H^H H) o R_h) psi``, the RIS part of ``Tr(R_s)`` per unit gain."""
    psi = check_phases(psi)
    H = np.asarray(H)
    R_h = np.asarray(R_h)
    _check_dims(psi, H, R_h)
    G = (H.conj().T @ H) * R_h
    return float(np.real(psi.conj() @ G @ psi))


def reflected_covariance(psi, H, R_h) -> np.ndarray:
    """``H diag(psi) R_h diag(psi)^H H^H``."""
    psi = check_phases(psi)
    H = np.asarray(H)
    R_h = np.asarray(R_h)
    _check_dims(psi, H, R_h)
    HP = H * psi[None, :]
    C = HP @ R_h @ HP.conj().T
    return 0.5 * (C + C.conj().T)


def signal_covariance(psi, H, R_d, R_h, pl: PathLoss, P_s: float) -> np.ndarray:
    """Covariance of the received PU signal, ``beta P_s R_d + nu P_s H Phi R_h Phi^H H^H``."""
    R_d = check_hermitian(R_d, name="R_d")
    H = np.asarray(H)
    if R_d.shape[0] != H.shape[0]:
        raise ValueError(f"R_d must be {H.shape[0]}x{H.shape[0]}, got {R_d.shape}")
    if P_s < 0:
        raise ValueError("P_s must be nonnegative")
    return pl.beta * P_s * R_d + pl.nu * P_s * reflected_covariance(psi, H, R_h)
