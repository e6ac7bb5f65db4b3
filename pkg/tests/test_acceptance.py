"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
Run directly with ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from medsense import SystemGeometry, build_model
from medsense.cli import main as sense
from medsense.detector import p_d, p_fa, threshold_for_pfa
from medsense.model import los_channel, noise_covariance, ris_covariance
from medsense.montecarlo import (
    SimulationPlan,
    empirical_rates,
    ks_2samp_statistic,
    ks_critical,
    ks_statistic,
    simulate_ts,
)
from medsense.ris import random_phases, trace_objective
from medsense.wishart import max_eig_cdf, spectrum_of
from scipy.special import gammainc

pytestmark = pytest.mark.acceptance

M, K, RHO, TRIALS = 8, 10, 0.2, 100_000
SHAPES = {8: (4, 2), 16: (4, 4), 32: (8, 4), 64: (8, 8), 128: (16, 8)}
RESULTS = {}


def record(n, title, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} -- {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def system(N=32, upsilon_db=-10.0, mode="optimal", ris_seed=None):
    geom = SystemGeometry(M=M, N_x=SHAPES.get(N, (8, 4))[0], N_y=SHAPES.get(N, (8, 4))[1], kappa=1 / 3, xi=3.0)
    return build_model(geom, rho=RHO, upsilon_db=upsilon_db, ris_mode=mode, ris_seed=ris_seed)


def pd_at(sys_, target=0.1):
    det = sys_.detector(K)
    eta = threshold_for_pfa(target, det)
    return eta, p_d(eta, det)


def test_1_cdf_matches_simulation():
    start = time.perf_counter()
    s = system(mode="absent")
    ts = simulate_ts("H0", s, SimulationPlan(TRIALS, K, seed=101))
    spec = s.detector(K).spectrum0
    D = ks_statistic(ts, lambda x: max_eig_cdf(K * x, spec))
    crit = ks_critical(ts.size)
    elapsed = time.perf_counter() - start
    record(1, "Wishart CDF vs Monte Carlo (KS, 1%)", D < crit and elapsed < 60,
           f"D={D:.5f} critical={crit:.5f} runtime={elapsed:.1f}s")


def test_2_normalization_and_reduction():
    rng = np.random.default_rng(202)
    at_zero, worst_tail = [], 0.0
    for _ in range(50):
        m = int(rng.integers(1, 9))
        n = int(rng.integers(m, 17))
        A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        spec = spectrum_of(A @ A.conj().T / m + 0.05 * np.eye(m), n)
        at_zero.append(max_eig_cdf(0.0, spec))
        worst_tail = max(worst_tail, 1.0 - max_eig_cdf(100.0 * spec.n / spec.lambdas[0], spec))
    worst_m1 = 0.0
    for _ in range(50):
        s2, n = rng.uniform(0.05, 20), int(rng.integers(1, 17))
        spec = spectrum_of(np.array([[s2]]), n)
        eta = rng.uniform(0, 4 * n * s2, 20)
        worst_m1 = max(worst_m1, float(np.max(np.abs(max_eig_cdf(eta, spec) - gammainc(n, eta / s2)))))
    ok = all(v == 0.0 for v in at_zero) and worst_tail <= 1e-6 and worst_m1 <= 1e-12
    record(2, "normalization and single-antenna reduction", ok,
           f"cdf(0) exact={all(v == 0.0 for v in at_zero)} max tail deficit={worst_tail:.2e} m=1 error={worst_m1:.2e}")


def test_3_false_alarm_accuracy():
    worst, details = 0.0, []
    for i, (N, mode) in enumerate([(32, "absent"), (16, "optimal"), (32, "optimal")]):
        s = system(N=N, mode=mode)
        det = s.detector(K)
        eta = np.linspace(threshold_for_pfa(0.95, det), threshold_for_pfa(0.01, det), 20)
        ts = simulate_ts("H0", s, SimulationPlan(TRIALS, K, seed=300 + i, mode="physical"))
        freq, _ = empirical_rates(ts, eta)
        analytic = p_fa(eta, det)
        z = np.abs(freq - analytic) / np.sqrt(analytic * (1 - analytic) / TRIALS)
        worst = max(worst, float(z.max()))
        details.append(f"{'absent' if mode == 'absent' else N}:{z.max():.2f}")
    record(3, "false-alarm accuracy at 20 thresholds", worst <= 3.0,
           f"max |error|/SE per scenario {' '.join(details)}")


def _mc_pd(s, eta, seed):
    ts = simulate_ts("H1", s, SimulationPlan(TRIALS, K, seed=seed, mode="physical"))
    freq, se = empirical_rates(ts, [eta])
    return freq[0], se[0]


def test_4_roc_orderings():
    by_snr = [pd_at(system(N=32, upsilon_db=u)) for u in (-10.0, -8.0, -5.0)]
    by_n = [pd_at(system(N=n)) for n in (16, 32, 64)]
    eta0, bare = pd_at(system(mode="absent"))
    a = all(np.diff([v for _, v in by_snr]) > 0)
    b = all(np.diff([v for _, v in by_n]) > 0)
    c = by_snr[0][1] > bare
    z = []
    cases = [(system(N=32, upsilon_db=u), e, v) for u, (e, v) in zip((-10.0, -8.0, -5.0), by_snr)]
    cases += [(system(N=n), e, v) for n, (e, v) in zip((16, 64), (by_n[0], by_n[2]))]
    cases += [(system(mode="absent"), eta0, bare)]
    for j, (s, eta, v) in enumerate(cases):
        freq, se = _mc_pd(s, eta, 400 + j)
        z.append(abs(freq - v) / se)
    mc_ok = max(z) <= 3.0
    record(4, "ROC orderings", a and b and c and mc_ok,
           f"(a) SNR order {a} {[round(v, 6) for _, v in by_snr]}; "
           f"(b) N order {b} {[round(v, 6) for _, v in by_n]}; "
           f"(c) RIS>none {c} ({by_snr[0][1]:.6f} vs {bare:.6f}); MC max z={max(z):.2f}")


def test_5_optimal_ris_dominance():
    losses = 0
    for N in (32, 64):
        _, best = pd_at(system(N=N))
        for seed in range(20):
            _, rand = pd_at(system(N=N, mode="random", ris_seed=seed))
            losses += rand > best
    curve = [pd_at(system(N=n, upsilon_db=-5.0))[1] for n in (8, 16, 32, 64, 128)]
    monotone = all(np.diff(curve) >= 0)
    reaches = curve[-1] >= 0.99
    record(5, "optimal RIS dominance and P_D growth in N", losses == 0 and monotone and reaches,
           f"random beats optimal in {losses}/40 draws; P_D(N) at -5 dB {[round(v, 6) for v in curve]} "
           f"nondecreasing={monotone} reaches 0.99={reaches}")


def test_6_hadamard_identity():
    rng = np.random.default_rng(606)
    worst = 0.0
    for shape in ((2, 2), (8, 4)):
        geom = SystemGeometry(M=M, N_x=shape[0], N_y=shape[1])
        H, R_h = los_channel(geom), ris_covariance(geom)
        for _ in range(1000):
            psi = random_phases(geom.N, rng)
            HP = H * psi[None, :]
            v = float(np.real(np.trace(HP @ R_h @ HP.conj().T)))
            worst = max(worst, abs(trace_objective(psi, H, R_h) - v) / (1 + abs(v)))
    record(6, "Hadamard trace identity", worst <= 1e-10, f"max relative error {worst:.2e} over 2000 draws")


def test_7_threshold_round_trip():
    det = system(mode="absent").detector(K)
    errs = {t: abs(p_fa(threshold_for_pfa(t, det), det) - t) for t in (0.01, 0.05, 0.1, 0.5, 0.9)}
    worst = max(errs.values())
    record(7, "threshold inversion round-trip", worst <= 1e-9, f"max |p_fa(eta(t)) - t| = {worst:.2e}")


def test_8_physical_distributional_equivalence():
    start = time.perf_counter()
    s = system()
    stats = []
    for i, hyp in enumerate(("H0", "H1")):
        a = simulate_ts(hyp, s, SimulationPlan(TRIALS, K, seed=800 + i, mode="physical"))
        b = simulate_ts(hyp, s, SimulationPlan(TRIALS, K, seed=800 + i, mode="distributional"))
        stats.append(ks_2samp_statistic(a, b))
    crit = ks_critical(TRIALS, m=TRIALS)
    elapsed = time.perf_counter() - start
    record(8, "physical vs distributional sampling (two-sample KS, 1%)",
           max(stats) < crit and elapsed < 300,
           f"D(H0)={stats[0]:.5f} D(H1)={stats[1]:.5f} critical={crit:.5f} runtime={elapsed:.1f}s")


def test_9_roc_determinism(tmp_path):
    cfg = tmp_path / "roc.cfg"
    cfg.write_text(
        "M = 8\nK = 10\nrho = 0.2\nkappa = 0.3333333333333333\nxi = 3\n"
        "Upsilon_dB = -10, -8, -5\nN = 32, 64\nris_mode = optimal, random, absent\n"
    )
    outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    codes = [sense(["roc", "--config", str(cfg), "--out", str(o), "--seed", "12345"]) for o in outs]
    same = outs[0].read_bytes() == outs[1].read_bytes()
    record(9, "sense roc is byte-identical across runs", codes == [0, 0] and same,
           f"exit codes {codes}, {outs[0].stat().st_size} bytes, identical={same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
