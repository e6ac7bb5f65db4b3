"""Monte Carlo oracle for the closed-form detector analytics.

Two sampling routes are available. ``physical`` composes the received
vectors from independently drawn fades, symbols and noise; ``distributional``
draws them straight from the zero-mean Gaussian law with the hypothesis
covariance. Agreement between the two checks the Gaussian reduction the
closed forms rely on.

Trials are processed in fixed-size blocks, each with its own random stream
keyed by ``(seed, hypothesis, mode, block index)``, so results do not depend
on how blocks are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .detector import test_statistic
from .wishart import NumericalFailure

MODES = ("physical", "distributional")
BLOCK = 2048
_HYP_KEY = {"H0": 0, "H1": 1}
_MODE_KEY = {"physical": 0, "distributional": 1}


@dataclass(frozen=True)
class SimulationPlan:
    trials: int
    K: int
    seed: int = 0
    mode: str = "distributional"

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def block_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def _factor(Sigma) -> np.ndarray:
    """``L`` with ``L L^H = Sigma`` via the Hermitian eigendecomposition."""
    Sigma = np.asarray(Sigma)
    w, V = np.linalg.eigh(Sigma)
    if w[0] < -1e-10 * max(w[-1], 0.0):
        raise NumericalFailure(f"covariance is not PSD (min eigenvalue {w[0]:.3e})")
    return V * np.sqrt(np.clip(w, 0.0, None))


def _cn(rng, shape) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def sample_correlated_gaussian(Sigma, count: int, rng, *, factor=None) -> np.ndarray:
    """``count`` draws from ``CN(0, Sigma)``, returned as rows of a (count, dim) array.

    Extra leading dimensions are allowed by passing a tuple for ``count``.
    """
    rng = np.random.default_rng(rng)
    L = _factor(Sigma) if factor is None else factor
    shape = (count,) if np.isscalar(count) else tuple(count)
    z = _cn(rng, shape + (L.shape[1],))
    return z @ L.T


def _draw_block(hypothesis, system, plan, block, size, factors):
    rng = block_rng(plan.seed, _HYP_KEY[hypothesis], _MODE_KEY[plan.mode], block)
    shape = (size, plan.K)
    if plan.mode == "distributional":
        return sample_correlated_gaussian(None, shape, rng, factor=factors["y"])
    y = sample_correlated_gaussian(None, shape, rng, factor=factors["w"])
    if hypothesis == "H0":
        return y
    # constant-modulus symbols with uniform phase
    s = np.exp(2j * np.pi * rng.random(shape))[..., None]
    d = sample_correlated_gaussian(None, shape, rng, factor=factors["d"])
    x = math.sqrt(system.direct_gain) * d
    if system.has_ris:
        h = sample_correlated_gaussian(None, shape, rng, factor=factors["h"])
        HPhi = system.H * system.psi[None, :]
        x = x + math.sqrt(system.ris_gain) * (h @ HPhi.T)
    return y + x * s


def simulate_ts(hypothesis: str, system, plan: SimulationPlan, *, workers: int = 1) -> np.ndarray:
    """Test-statistic samples, one per trial, under ``hypothesis`` ('H0' or 'H1')."""
    hypothesis = hypothesis.upper()
    if hypothesis not in _HYP_KEY:
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    if plan.mode == "distributional":
        factors = {"y": _factor(system.covariance(hypothesis))}
    else:
        R_d, R_h = system.sampling_factors()
        factors = {"w": _factor(system.R_w), "d": _factor(R_d)}
        if system.has_ris:
            factors["h"] = _factor(R_h)
    nblocks = -(-plan.trials // BLOCK)
    sizes = [min(BLOCK, plan.trials - b * BLOCK) for b in range(nblocks)]

    def run(b):
        return test_statistic(_draw_block(hypothesis, system, plan, b, sizes[b], factors))

    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(nblocks)))
    else:
        parts = [run(b) for b in range(nblocks)]
    return np.concatenate([np.atleast_1d(p) for p in parts])


def empirical_rates(ts_samples, eta_grid):
    """Exceedance frequencies ``#(TS > eta)/n`` and their binomial standard errors."""
    ts = np.sort(np.asarray(ts_samples, dtype=float).ravel())
    if ts.size == 0:
        raise ValueError("need at least one sample")
    eta = np.atleast_1d(np.asarray(eta_grid, dtype=float))
    freq = 1.0 - np.searchsorted(ts, eta, side="right") / ts.size
    se = np.sqrt(freq * (1.0 - freq) / ts.size)
    return freq, se


def ks_statistic(samples, cdf) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("need at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_2samp_statistic(a, b) -> float:
    """Sup distance between two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("need at least one sample in each set")
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / a.size
    Fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


def ks_critical(n: int, alpha: float = 0.01, m: int | None = None) -> float:
    """Asymptotic KS critical value (two-sample when ``m`` is given)."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    eff = n if m is None else n * m / (n + m)
    return c / math.sqrt(eff)


def snr_samples(system, count: int, rng) -> np.ndarray:
    """Draws of ``Upsilon * ||sqrt(mu) H Phi h + d||^2``."""
    rng = np.random.default_rng(rng)
    R_d, R_h = system.sampling_factors()
    d = sample_correlated_gaussian(R_d, count, rng)
    if system.has_ris:
        h = sample_correlated_gaussian(R_h, count, rng)
        d = d + math.sqrt(system.mu) * (h @ (system.H * system.psi[None, :]).T)
    return system.upsilon * np.sum(np.abs(d) ** 2, axis=1)
