"""Config-driven experiment runners producing CSV tables and validation reports."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.special import gammainc

from . import montecarlo as mc
from .detector import DetectorConfig, default_pfa_grid, p_d, p_fa, threshold_for_pfa
from .model import SystemGeometry, noise_covariance
from .ris import random_phases, trace_objective
from .system import SystemModel, build_model
from .wishart import NumericalFailure, WishartSpectrum, max_eig_cdf, spectrum_of

EXPERIMENTS = ("curves", "roc", "pd-vs-n", "validate")
RIS_MODES = ("optimal", "random", "absent")
_RIS_SEED_KEY = 7
# execution settings that do not affect results, kept out of the echo header
_NOT_ECHOED = ("out", "workers")


class ConfigError(ValueError):
    pass


def _parse_float(s):
    return float(s)


def _parse_int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(v)


def _parse_bool(s):
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_ris_shape(s):
    """'32' -> near-square grid (8, 4); '8x4' -> (8, 4)."""
    s = s.strip().lower()
    if "x" in s:
        nx, ny = (_parse_int(p) for p in s.split("x"))
    else:
        n = _parse_int(s)
        if n < 1:
            raise ValueError("N must be positive")
        ny = int(math.isqrt(n))
        while n % ny:
            ny -= 1
        nx = n // ny
    if nx < 1 or ny < 1:
        raise ValueError("grid dimensions must be positive")
    return (nx, ny)


def _list(parse):
    def inner(s):
        items = [p.strip() for p in s.split(",") if p.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(parse(p) for p in items)

    return inner


def _mode(s):
    if s not in RIS_MODES:
        raise ValueError(f"ris_mode must be one of {RIS_MODES}, got {s!r}")
    return s


def _experiment(s):
    if s not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {s!r}")
    return s


_PARSERS = {
    "experiment": _experiment,
    "M": _parse_int,
    "N_x": _parse_int,
    "N_y": _parse_int,
    "N": _list(_parse_ris_shape),
    "wavelength": _parse_float,
    "spacing": _parse_float,
    "phi_az": _parse_float,
    "phi_el": _parse_float,
    "theta": _parse_float,
    "d_o": _parse_float,
    "kappa": _parse_float,
    "xi": _parse_float,
    "K": _parse_int,
    "P_s_dBm": _parse_float,
    "sigma2_W": _parse_float,
    "rho": _parse_float,
    "Upsilon_dB": _list(_parse_float),
    "ris_mode": _list(_mode),
    "eta_grid": _list(_parse_float),
    "eta_points": _parse_int,
    "pfa_grid": _list(_parse_float),
    "pfa_points": _parse_int,
    "pfa_target": _parse_float,
    "trials": _parse_int,
    "seed": _parse_int,
    "ris_seed": _parse_int,
    "mc_mode": str,
    "workers": _parse_int,
    "out": str,
    "corrupt_sign": _parse_bool,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "roc"
    M: int = 8
    N_x: int = 8
    N_y: int = 4
    N: tuple = ()
    wavelength: float = 0.1
    spacing: float | None = None
    phi_az: float = math.pi / 4
    phi_el: float = math.pi / 4
    theta: float = math.pi / 6
    d_o: float = 30.0
    kappa: float = 1.0 / 3.0
    xi: float = 3.0
    K: int = 10
    P_s_dBm: float | None = None
    sigma2_W: float = 1.0
    rho: float = 0.2
    Upsilon_dB: tuple | None = None
    ris_mode: tuple = ("optimal",)
    eta_grid: tuple | None = None
    eta_points: int = 40
    pfa_grid: tuple | None = None
    pfa_points: int = 50
    pfa_target: float = 0.1
    trials: int = 0
    seed: int = 0
    ris_seed: int | None = None
    mc_mode: str = "physical"
    workers: int = 1
    out: str | None = None
    corrupt_sign: bool = False
    _explicit: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        if self.P_s_dBm is not None and self.Upsilon_dB is not None:
            raise ConfigError("give either P_s_dBm or Upsilon_dB, not both")
        if self.P_s_dBm is None and self.Upsilon_dB is None:
            raise ConfigError("one of P_s_dBm or Upsilon_dB is required")
        if self.K < self.M:
            raise ConfigError(f"K={self.K} must be at least M={self.M}")
        if self.mc_mode not in mc.MODES:
            raise ConfigError(f"mc_mode must be one of {mc.MODES}")
        if self.trials < 0:
            raise ConfigError("trials must be nonnegative")
        if not 0 < self.pfa_target < 1:
            raise ConfigError("pfa_target must lie in (0, 1)")
        try:
            self.geometry()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_text(cls, text: str, source: str = "<config>", **overrides) -> "ExperimentConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in _PARSERS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = _PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values, _explicit=frozenset(values))
        except TypeError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path), **overrides)

    def geometry(self, shape=None) -> SystemGeometry:
        nx, ny = shape if shape is not None else (self.N_x, self.N_y)
        return SystemGeometry(
            M=self.M, N_x=nx, N_y=ny, wavelength=self.wavelength, spacing=self.spacing,
            phi_az=self.phi_az, phi_el=self.phi_el, theta=self.theta,
            d_o=self.d_o, kappa=self.kappa, xi=self.xi,
        )

    @property
    def ris_shapes(self):
        return self.N if self.N else ((self.N_x, self.N_y),)

    @property
    def snr_points(self):
        return self.Upsilon_dB if self.Upsilon_dB is not None else (None,)

    def resolved(self):
        """(key, text) pairs of every setting, for the output header."""
        items = []
        for f in fields(self):
            if f.name.startswith("_") or f.name in _NOT_ECHOED:
                continue
            v = getattr(self, f.name)
            if f.name == "spacing" and v is None:
                v = self.wavelength / 2
            if f.name == "N":
                v = self.ris_shapes
                text = ", ".join(f"{a}x{b}" for a, b in v)
            elif isinstance(v, tuple):
                text = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = "" if v is None else str(v)
            items.append((f.name, text))
        return items


def _fmt(x) -> str:
    return format(float(x), ".17g")


# -- scenario assembly -------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    label: str
    system: SystemModel
    upsilon_db: float | None
    N: int | None
    mode: str


def scenario(cfg: ExperimentConfig, upsilon_db, shape, mode) -> Scenario:
    geom = cfg.geometry(shape if shape is not None else (cfg.N_x, cfg.N_y))
    ris_seed = cfg.seed if cfg.ris_seed is None else cfg.ris_seed
    rng = mc.block_rng(ris_seed, _RIS_SEED_KEY, geom.N)
    system = build_model(
        geom, rho=cfg.rho, sigma2=cfg.sigma2_W, upsilon_db=upsilon_db,
        P_s_dbm=cfg.P_s_dBm, ris_mode=mode, ris_seed=rng,
    )
    snr = "" if upsilon_db is None else f"U{upsilon_db:g}_"
    if mode == "absent":
        return Scenario(f"{snr}absent", system, upsilon_db, None, mode)
    return Scenario(f"{snr}N{geom.N}_{mode}", system, upsilon_db, geom.N, mode)


def scenarios(cfg: ExperimentConfig, include_absent: bool = False):
    out = []
    for ups in cfg.snr_points:
        modes = list(cfg.ris_mode)
        if include_absent and "absent" not in modes:
            modes.insert(0, "absent")
        for mode in modes:
            shapes = [None] if mode == "absent" else cfg.ris_shapes
            for shape in shapes:
                out.append(scenario(cfg, ups, shape, mode))
    return out


def _noise_only(cfg: ExperimentConfig) -> np.ndarray:
    sigma2 = 1.0 if cfg.Upsilon_dB is not None else cfg.sigma2_W
    return noise_covariance(cfg.M, cfg.rho, sigma2)


def tail_threshold(spec: WishartSpectrum, K: int, target: float, start: float) -> float:
    """Threshold on the sample-covariance scale where the exceedance drops to ``target``."""
    lo, hi = 0.0, max(start, 1e-12) * K
    while 1.0 - max_eig_cdf(hi, spec) > target:
        lo, hi = hi, 2 * hi
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if 1.0 - max_eig_cdf(mid, spec) > target:
            lo = mid
        else:
            hi = mid
    return hi / K


def eta_grid(cfg: ExperimentConfig, systems) -> np.ndarray:
    if cfg.eta_grid is not None:
        grid = np.asarray(cfg.eta_grid, dtype=float)
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ConfigError("eta_grid must be nonnegative and strictly increasing")
        return grid
    hi = 0.0
    for s in systems:
        S1 = s.covariance("H1")
        start = float(np.real(np.trace(S1))) / cfg.K
        hi = max(hi, tail_threshold(spectrum_of(S1, cfg.K), cfg.K, 1e-4, start))
    return np.linspace(0.0, hi, cfg.eta_points)


def pfa_grid(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.pfa_grid is not None:
        grid = np.asarray(cfg.pfa_grid, dtype=float)
        if np.any(grid <= 0) or np.any(grid >= 1) or np.any(np.diff(grid) <= 0):
            raise ConfigError("pfa_grid must be strictly increasing within (0, 1)")
        return grid
    return default_pfa_grid(cfg.pfa_points)


# -- output ------------------------------------------------------------------


def write_table(cfg: ExperimentConfig, header, rows, extra_meta=()) -> str:
    buf = io.StringIO()
    for key, text in cfg.resolved():
        buf.write(f"# {key} = {text}\n")
    for key, text in extra_meta:
        buf.write(f"# {key} = {text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# -- experiments -------------------------------------------------------------


def _plan(cfg, trials=None):
    return mc.SimulationPlan(trials=trials or cfg.trials, K=cfg.K, seed=cfg.seed, mode=cfg.mc_mode)


def run_curves(cfg: ExperimentConfig) -> str:
    """P_FA and P_MD against the threshold, analytical and (if trials > 0) simulated."""
    if len(cfg.snr_points) != 1:
        raise ConfigError("curves takes a single Upsilon_dB value")
    scen = scenarios(cfg, include_absent=True)
    cfg0 = scen[0].system.detector(cfg.K)
    grid = eta_grid(cfg, [s.system for s in scen])
    cols = {"eta": grid, "p_fa": p_fa(grid, cfg0)}
    for s in scen:
        cols[f"p_md_{s.label}"] = 1.0 - p_d(grid, s.system.detector(cfg.K))
    if cfg.trials > 0:
        plan = _plan(cfg)
        ts0 = mc.simulate_ts("H0", scen[0].system, plan, workers=cfg.workers)
        freq, se = mc.empirical_rates(ts0, grid)
        cols["p_fa_mc"], cols["p_fa_mc_se"] = freq, se
        for s in scen:
            ts1 = mc.simulate_ts("H1", s.system, plan, workers=cfg.workers)
            freq, se = mc.empirical_rates(ts1, grid)
            cols[f"p_md_mc_{s.label}"] = 1.0 - freq
            cols[f"p_md_mc_se_{s.label}"] = se
    header = list(cols)
    rows = zip(*(np.asarray(cols[h], dtype=float) for h in header))
    return write_table(cfg, header, rows)


def run_roc(cfg: ExperimentConfig) -> str:
    """P_D at the NP threshold for each target P_FA, one column per scenario."""
    scen = scenarios(cfg)
    grid = pfa_grid(cfg)
    det0 = scen[0].system.detector(cfg.K)
    eta = np.array([threshold_for_pfa(t, det0) for t in grid])
    cols = {"p_fa_target": grid, "eta": eta}
    for s in scen:
        det = s.system.detector(cfg.K)
        if not np.allclose(det.Sigma0, det0.Sigma0):
            eta_s = np.array([threshold_for_pfa(t, det) for t in grid])
        else:
            eta_s = eta
        cols[f"p_d_{s.label}"] = p_d(eta_s, det)
    header = list(cols)
    rows = zip(*(np.asarray(cols[h], dtype=float) for h in header))
    return write_table(cfg, header, rows)


def run_pd_vs_n(cfg: ExperimentConfig) -> str:
    """P_D at ``pfa_target`` across the RIS-size sweep, one column per (SNR, mode)."""
    shapes = cfg.ris_shapes
    det0 = DetectorConfig(_noise_only(cfg), _noise_only(cfg), cfg.K)
    eta = threshold_for_pfa(cfg.pfa_target, det0)
    cols = {"N": [a * b for a, b in shapes]}
    for ups in cfg.snr_points:
        for mode in cfg.ris_mode:
            col = []
            for shape in shapes:
                s = scenario(cfg, ups, shape, mode)
                col.append(p_d(eta, s.system.detector(cfg.K)))
            snr = "" if ups is None else f"U{ups:g}_"
            cols[f"p_d_{snr}{mode}"] = col
    header = list(cols)
    rows = []
    for i in range(len(shapes)):
        rows.append([cols["N"][i]] + [float(cols[h][i]) for h in header[1:]])
    return write_table(cfg, header, rows, extra_meta=[("eta", _fmt(eta))])


# -- validation --------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    stats: dict

    def lines(self):
        yield f"check.{self.name}.status = {'pass' if self.passed else 'fail'}"
        for k, v in self.stats.items():
            text = _fmt(v) if isinstance(v, (float, np.floating)) else str(v)
            yield f"check.{self.name}.{k} = {text}"


def _guard(name, fn):
    try:
        return fn()
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return Check(name, False, {"error": f"{type(exc).__name__}: {exc}"})


def _random_spectra(rng, count, m_max, n_max):
    out = []
    for _ in range(count):
        m = int(rng.integers(1, m_max + 1))
        n = int(rng.integers(m, max(n_max, m) + 1))
        A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        Sigma = A @ A.conj().T / m + 0.1 * np.eye(m)
        out.append((Sigma, n))
    return out


def check_normalization(systems, K, rng, signed=False, count=20) -> Check:
    worst_tail, worst_zero = 0.0, 0.0
    cases = [(s.covariance(h), K) for s in systems for h in ("H0", "H1")]
    cases += _random_spectra(rng, count, 8, 16)
    for Sigma, q in cases:
        spec = spectrum_of(Sigma, q, signed_vandermonde=signed)
        eta_star = 100.0 * spec.n / spec.lambdas[0]
        worst_tail = max(worst_tail, 1.0 - max_eig_cdf(eta_star, spec))
        worst_zero = max(worst_zero, abs(max_eig_cdf(0.0, spec)))
    return Check("normalization", worst_tail <= 1e-6 and worst_zero == 0.0,
                 {"cases": len(cases), "max_tail_deficit": worst_tail, "max_abs_cdf_at_zero": worst_zero})


def check_reduction(rng) -> Check:
    worst = 0.0
    for _ in range(20):
        s2 = float(rng.uniform(0.1, 10))
        n = int(rng.integers(1, 30))
        spec = spectrum_of(np.array([[s2]]), n)
        eta = rng.uniform(0, 3 * n * s2, 16)
        ref = gammainc(n, eta / s2)
        worst = max(worst, float(np.max(np.abs(max_eig_cdf(eta, spec) - ref))))
    return Check("single_antenna_reduction", worst <= 1e-12, {"max_abs_error": worst})


def check_hadamard(system: SystemModel, rng, draws=200) -> Check:
    if system.H is None:
        return Check("hadamard_identity", True, {"skipped": "no RIS"})
    worst = 0.0
    for _ in range(draws):
        psi = random_phases(system.H.shape[1], rng)
        quad = trace_objective(psi, system.H, system.R_h)
        HP = system.H * psi[None, :]
        direct = float(np.real(np.trace(HP @ system.R_h @ HP.conj().T)))
        worst = max(worst, abs(quad - direct) / (1 + abs(direct)))
    return Check("hadamard_identity", worst <= 1e-10, {"draws": draws, "max_rel_error": worst})


def check_inversion(det: DetectorConfig) -> Check:
    worst = 0.0
    for t in (0.01, 0.05, 0.1, 0.5, 0.9):
        worst = max(worst, abs(p_fa(threshold_for_pfa(t, det), det) - t))
    return Check("threshold_inversion", worst <= 1e-9, {"max_abs_error": worst})


def check_ks(name, samples, spec, K) -> Check:
    D = mc.ks_statistic(samples, lambda x: max_eig_cdf(K * x, spec))
    crit = mc.ks_critical(len(samples))
    return Check(name, D <= crit, {"trials": len(samples), "ks": D, "critical_1pct": crit})


def check_two_sample(name, a, b) -> Check:
    D = mc.ks_2samp_statistic(a, b)
    crit = mc.ks_critical(len(a), m=len(b))
    return Check(name, D <= crit, {"ks": D, "critical_1pct": crit})


def check_rate(name, ts, eta, p_analytic) -> Check:
    freq, se = mc.empirical_rates(ts, [eta])
    z = abs(freq[0] - p_analytic) / max(se[0], 1e-300)
    return Check(name, z <= 3.0, {"analytic": p_analytic, "empirical": freq[0], "std_errors": z})


def check_dominance(det: DetectorConfig) -> Check:
    grid = np.linspace(0, tail_threshold(det.spectrum1, det.K, 1e-6, 1.0), 50)
    gap = float(np.min(p_d(grid, det) - p_fa(grid, det)))
    return Check("pd_dominates_pfa", gap >= -1e-10, {"min_gap": gap})


def run_validate(cfg: ExperimentConfig):
    """Run the oracle suite; returns (report text, all passed)."""
    started = time.perf_counter()
    rng = mc.block_rng(cfg.seed, 11)
    ups = cfg.snr_points[0]
    shape = cfg.ris_shapes[0]
    mode = cfg.ris_mode[0]
    s = scenario(cfg, ups, shape, mode)
    det = s.system.detector(cfg.K)
    trials = cfg.trials if cfg.trials > 0 else 10_000
    checks = [
        _guard("normalization", lambda: check_normalization([s.system], cfg.K, rng, signed=cfg.corrupt_sign)),
        _guard("single_antenna_reduction", lambda: check_reduction(rng)),
        _guard("hadamard_identity", lambda: check_hadamard(s.system, rng)),
        _guard("threshold_inversion", lambda: check_inversion(det)),
        _guard("pd_dominates_pfa", lambda: check_dominance(det)),
    ]
    phys = mc.SimulationPlan(trials, cfg.K, cfg.seed, "physical")
    dist = replace(phys, mode="distributional")
    ts0 = mc.simulate_ts("H0", s.system, phys, workers=cfg.workers)
    ts1p = mc.simulate_ts("H1", s.system, phys, workers=cfg.workers)
    ts0d = mc.simulate_ts("H0", s.system, dist, workers=cfg.workers)
    ts1d = mc.simulate_ts("H1", s.system, dist, workers=cfg.workers)
    checks += [
        _guard("ks_null", lambda: check_ks("ks_null", ts0, det.spectrum0, cfg.K)),
        _guard("ks_signal", lambda: check_ks("ks_signal", ts1p, det.spectrum1, cfg.K)),
        _guard("equivalence_null", lambda: check_two_sample("equivalence_null", ts0, ts0d)),
        _guard("equivalence_signal", lambda: check_two_sample("equivalence_signal", ts1p, ts1d)),
    ]
    eta = threshold_for_pfa(cfg.pfa_target, det)
    checks += [
        _guard("pfa_rate", lambda: check_rate("pfa_rate", ts0, eta, p_fa(eta, det))),
        _guard("pd_rate", lambda: check_rate("pd_rate", ts1p, eta, p_d(eta, det))),
    ]
    ok = all(c.passed for c in checks)
    lines = [f"# {k} = {v}" for k, v in cfg.resolved()]
    lines.append(f"scenario = {s.label}")
    for c in checks:
        lines.extend(c.lines())
    lines.append(f"summary.passed = {sum(c.passed for c in checks)}")
    lines.append(f"summary.total = {len(checks)}")
    lines.append(f"summary.status = {'pass' if ok else 'fail'}")
    lines.append(f"summary.elapsed_s = {time.perf_counter() - started:.3f}")
    return "\n".join(lines) + "\n", ok


RUNNERS = {"curves": run_curves, "roc": run_roc, "pd-vs-n": run_pd_vs_n}
