"""Maximum-eigenvalue detector: test statistic, P_FA/P_D, NP thresholds and ROC."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import PSD_RTOL, check_hermitian
from .wishart import NumericalFailure, WishartSpectrum, max_eig_cdf, spectrum_of

INVERSION_TOL = 1e-9
MAX_DOUBLINGS = 200


def sample_covariance(samples) -> np.ndarray:
    """``(1/K) sum_k y_k y_k^H`` for samples of shape (..., K, M)."""
    Y = np.asarray(samples)
    if Y.ndim < 2 or Y.shape[-2] < 1:
        raise ValueError("need at least one sample vector")
    K = Y.shape[-2]
    return np.einsum("...ki,...kj->...ij", Y, Y.conj()) / K


def test_statistic(samples):
    """Largest eigenvalue of the sample covariance of ``K`` observation vectors.

    ``samples`` has shape (K, M) for one decision, or (trials, K, M) for a
    batch, in which case an array of statistics is returned.
    """
    Y = np.asarray(samples)
    if Y.size == 0:
        raise ValueError("empty sample set")
    if Y.ndim == 1:
        Y = Y[:, None]
    ts = np.linalg.eigvalsh(sample_covariance(Y))[..., -1]
    ts = np.maximum(ts, 0.0)
    return float(ts) if np.ndim(ts) == 0 else ts


def decide(samples, eta: float) -> bool:
    """True (signal present) when the statistic exceeds ``eta``."""
    return test_statistic(samples) > eta


@dataclass(frozen=True)
class DetectorConfig:
    """Null/alternative covariances of the received vectors and the sample count."""

    Sigma0: np.ndarray
    Sigma1: np.ndarray
    K: int

    def __post_init__(self):
        S0 = check_hermitian(self.Sigma0, name="Sigma0")
        S1 = check_hermitian(self.Sigma1, name="Sigma1")
        if S0.shape != S1.shape:
            raise ValueError("Sigma0 and Sigma1 must have the same shape")
        if int(self.K) != self.K or self.K < S0.shape[0]:
            raise ValueError(f"K={self.K} must be an integer >= dimension {S0.shape[0]}")
        w = np.linalg.eigvalsh(S1 - S0)
        scale = max(np.abs(np.linalg.eigvalsh(S1)).max(), 1.0)
        if w[0] < -PSD_RTOL * scale:
            raise ValueError("Sigma1 - Sigma0 must be positive semidefinite")
        object.__setattr__(self, "Sigma0", S0)
        object.__setattr__(self, "Sigma1", S1)

    @property
    def M(self) -> int:
        return self.Sigma0.shape[0]

    @cached_property
    def spectrum0(self) -> WishartSpectrum:
        return spectrum_of(self.Sigma0, self.K)

    @cached_property
    def spectrum1(self) -> WishartSpectrum:
        return spectrum_of(self.Sigma1, self.K)


def _sf(x, spec):
    return 1.0 - max_eig_cdf(x, spec)


def _check_eta(eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ValueError("eta must be nonnegative")
    return eta


def p_fa(eta, cfg: DetectorConfig):
    """``Pr(TS > eta | H0)``."""
    out = _sf(cfg.K * _check_eta(eta), cfg.spectrum0)
    return float(out) if np.ndim(out) == 0 else out


def p_d(eta, cfg: DetectorConfig):
    """``Pr(TS > eta | H1)``."""
    out = _sf(cfg.K * _check_eta(eta), cfg.spectrum1)
    return float(out) if np.ndim(out) == 0 else out


def threshold_for_pfa(target: float, cfg: DetectorConfig) -> float:
    """Neyman-Pearson threshold: the ``eta`` whose false-alarm rate is ``target``.

    Bisection runs on the Wishart-scale variable ``K * eta``.
    """
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    spec = cfg.spectrum0
    lo, hi = 0.0, cfg.K * float(np.real(np.trace(cfg.Sigma0)))
    for _ in range(MAX_DOUBLINGS):
        if _sf(hi, spec) <= target:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalFailure(f"could not bracket P_FA={target} within {MAX_DOUBLINGS} doublings")
    best, best_err = hi, abs(_sf(hi, spec) - target)
    while hi - lo > 4 * np.finfo(float).eps * hi:
        mid = 0.5 * (lo + hi)
        f = _sf(mid, spec)
        err = abs(f - target)
        if err < best_err:
            best, best_err = mid, err
        if err <= 0.01 * INVERSION_TOL:
            break
        if f > target:
            lo = mid
        else:
            hi = mid
    if best_err > INVERSION_TOL:
        raise NumericalFailure(f"P_FA inversion stalled {best_err:.3e} away from {target}")
    return best / cfg.K


@dataclass(frozen=True)
class DetectionCurve:
    """(eta, P_FA, P_D) samples ordered by increasing threshold."""

    eta: np.ndarray
    p_fa: np.ndarray
    p_d: np.ndarray

    def __post_init__(self):
        eta, pfa, pd = (np.asarray(v, dtype=float) for v in (self.eta, self.p_fa, self.p_d))
        if not eta.shape == pfa.shape == pd.shape or eta.ndim != 1:
            raise ValueError("eta, p_fa and p_d must be 1-D arrays of equal length")
        if np.any(np.diff(eta) <= 0):
            raise ValueError("eta must be strictly increasing")
        if np.any(np.diff(pfa) > 1e-10) or np.any(np.diff(pd) > 1e-10):
            raise ValueError("p_fa and p_d must be nonincreasing in eta")
        for name, v in (("eta", eta), ("p_fa", pfa), ("p_d", pd)):
            object.__setattr__(self, name, v)

    @property
    def points(self):
        return list(zip(self.eta.tolist(), self.p_fa.tolist(), self.p_d.tolist()))

    def __len__(self):
        return self.eta.size


def roc(cfg: DetectorConfig, grid) -> DetectionCurve:
    """P_D at the NP threshold of each target P_FA in ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(grid <= 0) or np.any(grid >= 1) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid values must be strictly increasing within (0, 1)")
    eta = np.array([threshold_for_pfa(t, cfg) for t in grid])
    order = np.argsort(eta)
    eta = eta[order]
    return DetectionCurve(eta=eta, p_fa=grid[order], p_d=np.atleast_1d(p_d(eta, cfg)))


def default_pfa_grid(n: int = 50, lo: float = 1e-3, hi: float = 0.99) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)
