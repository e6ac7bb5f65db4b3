"""Assembled sensing scenario: geometry, gains, RIS state and the resulting covariances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model, ris
from .detector import DetectorConfig


@dataclass(frozen=True)
class SystemModel:
    """Everything needed to draw received vectors under either hypothesis.

    ``direct_gain`` is ``beta * P_s`` and ``ris_gain`` is ``nu * P_s``.
    ``H`` and ``psi`` are ``None`` when no RIS is deployed.
    """

    R_w: np.ndarray
    R_d: np.ndarray
    direct_gain: float
    R_h: np.ndarray | None = None
    H: np.ndarray | None = None
    psi: np.ndarray | None = None
    ris_gain: float = 0.0
    sigma2: float = 1.0
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def M(self) -> int:
        return self.R_w.shape[0]

    @property
    def has_ris(self) -> bool:
        return self.H is not None and self.ris_gain > 0

    def reflected(self) -> np.ndarray:
        if self.H is None:
            return np.zeros((self.M, self.M), dtype=complex)
        return ris.reflected_covariance(self.psi, self.H, self.R_h)

    def signal_covariance(self) -> np.ndarray:
        return self.direct_gain * self.R_d + self.ris_gain * self.reflected()

    def covariance(self, hypothesis: str) -> np.ndarray:
        hypothesis = hypothesis.upper()
        if hypothesis == "H0":
            return self.R_w
        if hypothesis == "H1":
            return self.signal_covariance() + self.R_w
        raise ValueError(f"unknown hypothesis {hypothesis!r}")

    def detector(self, K: int) -> DetectorConfig:
        key = ("detector", K)
        if key not in self._cache:
            self._cache[key] = DetectorConfig(self.covariance("H0"), self.covariance("H1"), K)
        return self._cache[key]

    def sampling_factors(self):
        """PSD-regularized channel covariances used for drawing fades."""
        if "factors" not in self._cache:
            R_h = model.regularize_psd(self.R_h) if self.R_h is not None else None
            self._cache["factors"] = (model.regularize_psd(self.R_d), R_h)
        return self._cache["factors"]

    @property
    def upsilon(self) -> float:
        """Mean per-antenna direct-link SNR ``beta P_s / sigma_W^2``."""
        return self.direct_gain / self.sigma2

    @property
    def mu(self) -> float:
        return self.ris_gain / self.direct_gain if self.direct_gain > 0 else 0.0

    def mean_snr(self) -> float:
        """``Upsilon * (Tr R_d + mu Tr(H Phi R_h Phi^H H^H))``."""
        return self.upsilon * float(
            np.real(np.trace(self.R_d)) + self.mu * np.real(np.trace(self.reflected()))
        )


def build_model(
    geom: model.SystemGeometry,
    *,
    rho: float,
    sigma2: float = 1.0,
    upsilon_db: float | None = None,
    P_s_dbm: float | None = None,
    ris_mode: str = "optimal",
    ris_seed=None,
    theta_bar: float = 0.0,
) -> SystemModel:
    """Assemble a :class:`SystemModel` from geometry and link budget.

    Exactly one of ``upsilon_db`` and ``P_s_dbm`` sets the SNR scale. With
    ``upsilon_db`` the noise variance is pinned to one and ``beta P_s`` to
    ``10**(upsilon_db/10)``; distances then only shape ``mu``.
    """
    if (upsilon_db is None) == (P_s_dbm is None):
        raise ValueError("give exactly one of upsilon_db and P_s_dbm")
    pl = model.path_losses(geom.d_o, geom.kappa, geom.xi)
    if upsilon_db is not None:
        sigma2 = 1.0
        direct = model.db_to_linear(upsilon_db)
    else:
        direct = pl.beta * model.dbm_to_watt(P_s_dbm)
    reflected_gain = direct * pl.mu
    R_w = model.noise_covariance(geom.M, rho, sigma2)
    R_d = model.su_covariance(geom)
    if ris_mode == "absent":
        return SystemModel(R_w=R_w, R_d=R_d, direct_gain=direct, sigma2=sigma2, label="absent")
    if ris_mode == "optimal":
        psi = ris.optimal_phases(geom.N, theta_bar)
    elif ris_mode == "random":
        psi = ris.random_phases(geom.N, ris_seed)
    else:
        raise ValueError(f"unknown ris_mode {ris_mode!r}")
    return SystemModel(
        R_w=R_w,
        R_d=R_d,
        direct_gain=direct,
        R_h=model.ris_covariance(geom),
        H=model.los_channel(geom),
        psi=psi,
        ris_gain=reflected_gain,
        sigma2=sigma2,
        label=f"N{geom.N}_{ris_mode}",
    )
