"""Acceptance criteria 1-13.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary. Defaults: chi = 1, gamma0 = 0.01, L = 1e4 unless noted.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from kitaev_quench.analysis import (
    EXPONENTIAL,
    classify_decay,
    clean_end,
    crossover_time,
    finite_size_limit,
    fit_power_law,
    fit_shifted_power_law,
    fit_sweep,
    last_decade,
    peak_time,
    theory_for,
    transition_time_offcritical,
)
from kitaev_quench.bath import BOSONIC, FERMIONIC, BathSpec, occupation, rates, total_rate, thermal_occupation
from kitaev_quench.chain import ChainParams, build_grid, spectrum
from kitaev_quench.oracle import oracle_triangle
from kitaev_quench.schedules import LINEAR, RAMP_RELAX, SUDDEN, QuenchSchedule
from kitaev_quench.simulate import log_times, relaxation_after_ramp, simulate, tau_sweep

G0 = 0.01
L = 10_000
TAUS = [2.0 ** k for k in range(7, 15)]


def sweep_exponent(mu, chi, zeta, s, T_i, T_f, L=L, taus=TAUS):
    rows = tau_sweep(ChainParams(mu, chi, L), BathSpec(zeta, s, G0), QuenchSchedule(LINEAR, T_i, T_f, tau=1.0), taus)
    return abs(fit_sweep(taus, [r.excess for r in rows]).exponent)


def check_sweeps(verdict, name, cases):
    parts, ok = [], True
    for label, args, expected, tol in cases:
        got = sweep_exponent(*args)
        good = abs(got - expected) <= tol
        ok &= good
        parts.append(f"{label} {got:.3f} (want {expected:.3f}+-{tol})")
    assert verdict(name, ok, "; ".join(parts))


def sudden_trace(mu, T_i, T_f, s=1.0, chi=1.0, L=L, zeta=FERMIONIC, pre=None, times=(1e-1, 1e8), per_decade=60):
    chain = ChainParams(mu, chi, L)
    bath = BathSpec(zeta, s, G0)
    sch = QuenchSchedule(SUDDEN, T_i, T_f, pre_quench=None if pre is None else ChainParams(pre, chi, L))
    series = simulate(chain, bath, sch, log_times(*times, per_decade))
    eps = spectrum(chain, build_grid(chain)).eps
    t_limit = finite_size_limit(float(np.min(total_rate(bath, eps, T_f))))
    return series, t_limit, theory_for(chain, bath, sch)


def relax_slope(mu, T_i, T_f, s=1.0, pre=None):
    series, t_limit, theory = sudden_trace(mu, T_i, T_f, s, pre=pre)
    window = last_decade(series.times, series.excess, L, t_limit)
    fit = fit_power_law(series.times, np.abs(series.excess), window)
    return abs(fit.exponent), theory.value


def test_c01_kz_cooling_to_qcp(verdict):
    check_sweeps(verdict, "C1 KZ cooling 5->0", [
        ("s=1", (1.0, 1.0, FERMIONIC, 1.0, 5.0, 0.0), 0.5, 0.08),
        ("s=3", (1.0, 1.0, FERMIONIC, 3.0, 5.0, 0.0), 0.25, 0.08),
    ])


def test_c02_heating_from_qcp(verdict):
    check_sweeps(verdict, "C2 heating 0->5", [
        ("s=1", (1.0, 1.0, FERMIONIC, 1.0, 0.0, 5.0), 1.0, 0.1),
        ("s=3", (1.0, 1.0, FERMIONIC, 3.0, 0.0, 5.0), 1 / 3, 0.08),
        ("s=0", (1.0, 1.0, FERMIONIC, 0.0, 0.0, 5.0), 1.0, 0.1),
    ])


def test_c03_cooling_finite_t(verdict):
    check_sweeps(verdict, "C3 cooling 10->5", [
        ("s=1", (1.0, 1.0, FERMIONIC, 1.0, 10.0, 5.0), 1.0, 0.1),
        ("s=3", (1.0, 1.0, FERMIONIC, 3.0, 10.0, 5.0), 2 / 3, 0.1),
        ("s=2 boundary", (1.0, 1.0, FERMIONIC, 2.0, 10.0, 5.0), 1.0, 0.15),
    ])


def test_c04_z2_sweeps(verdict):
    check_sweeps(verdict, "C4 z=2 (mu,chi)=(1,0)", [
        ("heat s=1", (1.0, 0.0, FERMIONIC, 1.0, 0.0, 5.0), 0.5, 0.1),
        ("heat s=3", (1.0, 0.0, FERMIONIC, 3.0, 0.0, 5.0), 1 / 6, 0.05),
        ("cool s=3", (1.0, 0.0, FERMIONIC, 3.0, 10.0, 5.0), 0.5, 0.1),
    ])


def test_c05_bosonic_shift(verdict):
    # s=2 heating needs L=1e5: at L=1e4 the slowest grid mode cuts the scaling off for tau >~ 3000
    check_sweeps(verdict, "C5 bosonic", [
        ("heat s=2 (L=1e5)", (1.0, 1.0, BOSONIC, 2.0, 0.0, 5.0, 100_000), 1.0, 0.15),
        ("heat s=3", (1.0, 1.0, BOSONIC, 3.0, 0.0, 5.0), 0.5, 0.1),
        ("cool 10->5 s=3", (1.0, 1.0, BOSONIC, 3.0, 10.0, 5.0), 1.0, 0.15),
    ])


def test_c06_relaxation_to_qcp(verdict):
    a, want = relax_slope(1.0, 5.0, 0.0)
    b, want_b = relax_slope(1.0, 5.0, 0.0, pre=2.0)
    series, _, _ = sudden_trace(1.0, 5.0, 0.0, s=0.0)
    end = clean_end(series.times, series.excess, L)
    label, _ = classify_decay(series.times, np.abs(series.excess), (1.0, end))
    ok = abs(a - 1.0) <= 0.05 and abs(b - 1.0) <= 0.05 and want == want_b == 1.0 and label == EXPONENTIAL
    assert verdict("C6 sudden 5->0", ok,
                   f"s=1 slope {a:.3f}; mu_i=2 slope {b:.3f} (want 1+-0.05); s=0 classified {label}")


def test_c07_finite_t_relaxation(verdict):
    cases = [
        ("10->5", (1.0, 10.0, 5.0), 2.0, 0.1),
        ("10->5 mu_i=2", (1.0, 10.0, 5.0, 1.0, 2.0), 2.0, 0.1),
        ("0->5", (1.0, 0.0, 5.0), 1.0, 0.05),
        # a pre-quench QCP with its gap at k=pi gives no low-energy excess at k=0
        ("0->5 mu_i=-1", (1.0, 0.0, 5.0, 1.0, -1.0), 2.0, 0.1),
    ]
    parts, ok = [], True
    for label, args, expected, tol in cases:
        got, theory = relax_slope(*args)
        good = theory == expected and abs(got - expected) <= tol
        ok &= good
        parts.append(f"{label} {got:.3f} (want {expected:g}+-{tol})")
    assert verdict("C7 finite-T relaxation", ok, "; ".join(parts))


def test_c08_shifted_power_law(verdict):
    # half-octave spacing keeps >= 8 points in the t_w vs tau fit
    taus = [256.0 * 2 ** (k / 2) for k in range(9)]
    chain, bath = ChainParams(1.0, 1.0, L), BathSpec(FERMIONIC, 3.0, G0)
    t_max = 1e6
    t_ws = []
    for tau in taus:
        sch = QuenchSchedule(RAMP_RELAX, 10.0, 5.0, tau=tau, relax_duration=t_max)
        alpha = theory_for(chain, bath, sch).value
        series = relaxation_after_ramp(chain, bath, sch, log_times(1.0, t_max, 30))
        end = clean_end(series.times, series.excess, L)
        t_ws.append(fit_shifted_power_law(series.times, np.abs(series.excess), alpha, (1.0, end)).t_w)
    slope = fit_power_law(taus, t_ws).exponent
    ok = abs(alpha - 2 / 3) < 1e-12 and abs(slope - 1.0) <= 0.15
    assert verdict("C8 shifted power law", ok,
                   f"alpha {alpha:.4f}; t_w from {t_ws[0]:.4g} to {t_ws[-1]:.4g}; slope vs tau {slope:.3f} (want 1+-0.15)")


def test_c09_peak_time(verdict):
    parts, ok = [], True
    for s in (1.0, 3.0):
        peaks = []
        for tau in TAUS:
            sch = QuenchSchedule(LINEAR, 0.0, 5.0, tau=tau)
            series = simulate(ChainParams(1.0, 1.0, L), BathSpec(FERMIONIC, s, G0), sch,
                              log_times(1e-2, sch.ramp_end, 60))
            peaks.append(peak_time(series))
        slope = fit_power_law(TAUS, peaks).exponent
        expected = s / (s + 1)
        ok &= abs(slope - expected) <= 0.1
        parts.append(f"s={s:g} slope {slope:.3f} (want {expected:.3f}+-0.1)")
    assert verdict("C9 peak time", ok, "; ".join(parts))


def test_c10_crossover(verdict):
    Tfs = [0.0025, 0.005, 0.01]
    Lx = 100_000
    parts, ok, times = [], True, []
    for Tf in Tfs:
        series, t_limit, _ = sudden_trace(1.0, 5.0, Tf, L=Lx, times=(10.0, 1e7), per_decade=30)
        c = crossover_time(series.times, series.excess, 1.0, 2.0, window=(10.0, t_limit))
        e, l = abs(c.early.exponent), abs(c.late.exponent)
        ok &= abs(e - 1.0) <= 0.1 and abs(l - 2.0) <= 0.1
        times.append(c.time)
        parts.append(f"T_f={Tf:g}: t_c {c.time:.4g} early {e:.3f} late {l:.3f}")
    slope = np.polyfit(np.log(Tfs), np.log(times), 1)[0]
    ok &= abs(slope + 1.0) <= 0.15
    parts.append(f"slope vs T_f {slope:.3f} (want -1+-0.15)")
    assert verdict("C10 crossover", ok, "; ".join(parts))


def test_c11_off_criticality(verdict):
    Lx = 100_000
    chain, bath = ChainParams(0.5, 1.0, Lx), BathSpec(FERMIONIC, 1.0, G0)
    parts, ok = [], True
    # sudden family
    for T_i, T_f in [(5.0, 0.0), (0.0, 5.0), (10.0, 5.0)]:
        series, _, _ = sudden_trace(0.5, T_i, T_f, L=Lx, times=(0.1, 1e4), per_decade=30)
        end = clean_end(series.times, series.excess, Lx)
        label, _ = classify_decay(series.times, np.abs(series.excess), (0.1, end))
        ok &= label == EXPONENTIAL
        parts.append(f"sudden {T_i:g}->{T_f:g} {label}")
    # ramp-then-relax family
    for T_i, T_f in [(5.0, 0.0), (10.0, 5.0)]:
        sch = QuenchSchedule(RAMP_RELAX, T_i, T_f, tau=256.0, relax_duration=1e4)
        series = relaxation_after_ramp(chain, bath, sch, log_times(0.1, 1e4, 30))
        end = clean_end(series.times, series.excess, Lx)
        label, _ = classify_decay(series.times, np.abs(series.excess), (0.1, end))
        ok &= label == EXPONENTIAL
        parts.append(f"ramp+relax {T_i:g}->{T_f:g} {label}")
    # linear ramp family: final excess vs tau
    rows = tau_sweep(ChainParams(0.5, 1.0, L), bath, QuenchSchedule(LINEAR, 5.0, 0.0, tau=1.0), TAUS)
    label, _ = classify_decay(TAUS, np.abs([r.excess for r in rows]))
    ok &= label == EXPONENTIAL
    parts.append(f"linear 5->0 vs tau {label}")
    for T_i, T_f in [(0.0, 5.0), (10.0, 5.0)]:
        got = sweep_exponent(0.5, 1.0, FERMIONIC, 1.0, T_i, T_f)
        ok &= abs(got - 1.0) <= 0.1
        parts.append(f"linear {T_i:g}->{T_f:g} slope {got:.3f}")
    # transition time, relative threshold 0.1
    times = (0.1, 1e6)
    crit, _, _ = sudden_trace(1.0, 5.0, 0.0, L=Lx, times=times)
    dmu = np.array([1e-3, 2e-3, 4e-3])
    t_tr = []
    for d in dmu:
        series, _, _ = sudden_trace(1.0 + d, 5.0, 0.0, L=Lx, times=times)
        t_tr.append(transition_time_offcritical(series, crit, 0.1, relative=True))
    slope = np.polyfit(np.log(dmu), np.log(t_tr), 1)[0]
    ok &= abs(slope + 1.0) <= 0.15
    parts.append(f"t_tr {np.round(t_tr, 1).tolist()} slope {slope:.3f} (want -1+-0.15)")
    assert verdict("C11 off-criticality", ok, "; ".join(parts))


def test_c12_oracle_triangle_and_invariants(verdict):
    results = oracle_triangle(20, seed=0, L=128)
    worst = max(r.max_deviation for r in results)

    rng = np.random.default_rng(12345)
    n = 10_000
    eps = 10 ** rng.uniform(-6, 1.5, n)
    T = 10 ** rng.uniform(-3, 3, n)
    s = rng.uniform(0, 4, n)
    bad = 0
    for i in range(n):
        f = float(occupation(eps[i], T[i], FERMIONIC))
        nb = float(occupation(eps[i], T[i], BOSONIC))
        bad += not (0.0 <= f <= 1.0 and f <= 0.5 and nb >= 0.0)
        for zeta in (FERMIONIC, BOSONIC):
            r = rates(BathSpec(zeta, s[i], 0.01), eps[i], T[i])
            gp, gm = float(r.gamma_plus), float(r.gamma_minus)
            # detailed balance gamma_+/gamma_- = exp(-eps/T)
            bad += not (gp >= 0 and gm > 0 and np.isclose(gp / gm, np.exp(-eps[i] / T[i]), rtol=1e-9, atol=1e-300))
            # Fermi-Dirac zeroes gain minus loss for both bath statistics
            P = float(thermal_occupation(eps[i], T[i]))
            bad += not abs(gp * (1 - P) - gm * P) <= 1e-12 * (gp + gm)
            tot = float(total_rate(BathSpec(zeta, s[i], 0.01), eps[i], T[i]))
            bad += not np.isclose(tot, gp + gm, rtol=1e-9)
    ok = worst <= 1e-6 and bad == 0
    assert verdict("C12 oracle triangle", ok,
                   f"20 cases at L=128, max pairwise deviation {worst:.2e} (want <= 1e-6); "
                   f"{bad} invariant violations in {n} trials")


def test_c13_determinism(verdict, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(
        '{"chain": {"mu": 1.0, "chi": 1.0, "L": 2000},'
        ' "bath": {"statistics": "fermionic", "s": 1, "gamma0": 0.01},'
        ' "schedule": {"kind": "linear", "T_i": 0, "T_f": 5, "tau": 128},'
        ' "sweep": {"taus": [64, 128, 256, 512, 1024, 2048, 4096, 8192], "mus": [1.01]}}'
    )
    outputs = []
    for workers in ("1", "2"):
        out = tmp_path / f"w{workers}"
        env = dict(os.environ, KQ_WORKERS=workers)
        proc = subprocess.run([sys.executable, "-m", "kitaev_quench.cli", "run", str(cfg), "--out", str(out)],
                              env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append({p: (out / p).read_bytes() for p in sorted(os.listdir(out)) if p.endswith(".csv")})
    same = outputs[0].keys() == outputs[1].keys() and all(outputs[0][k] == outputs[1][k] for k in outputs[0])
    assert verdict("C13 determinism", same and len(outputs[0]) == 4,
                   f"{len(outputs[0])} CSVs byte-identical for KQ_WORKERS=1 and 2: {same}")
