"""Per-mode occupation dynamics under a temperature schedule.

Every quasiparticle mode obeys the rate equation

    dP_k/dt = -2 gamma_k(T(t)) [P_k - P_th(eps_k / T(t))]

with ``gamma_k = gamma_k+ + gamma_k-``. Three routes are provided: the
closed form for constant temperature, kernel-weighted quadrature of the
integral solution for linear ramps, and an exponential integrator with
step-doubling error control.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bath import BathSpec, ModeRates, total_rate, thermal_occupation
from .chain import ChainParams, ModeSpectrum, build_grid, spectrum
from .numerics import QuadratureError, adaptive_gk15, mode_mean
from .schedules import SUDDEN, QuenchSchedule, temperature_at


_EPS = np.finfo(float).eps


class IntegrationError(RuntimeError):
    pass


@dataclass
class ModeEnsemble:
    P: np.ndarray
    t: float


@dataclass
class TimeSeries:
    """Sampled excitation density. ``excess`` is ``D - D_th_final``."""

    times: np.ndarray
    T: np.ndarray
    D: np.ndarray
    D_th_final: float
    D_th_inst: np.ndarray
    t_ramp_end: float = 0.0
    P_final: Optional[np.ndarray] = field(default=None, repr=False)
    P_ramp_end: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def excess(self) -> np.ndarray:
        return self.D - self.D_th_final


def excitation_density(P) -> float:
    """Mean occupation over modes (last axis), summed exactly in grid order."""
    return mode_mean(P)


def thermal_density(chain: ChainParams, T: float, eps: Optional[np.ndarray] = None) -> float:
    if eps is None:
        eps = spectrum(chain, build_grid(chain)).eps
    if T == 0:
        return 0.0
    return mode_mean(thermal_occupation(eps, T))


def lindblad_validity_warning(bath: BathSpec, eps: np.ndarray) -> None:
    # weak-coupling heuristic: the bath rate should stay well below the level spacing scale
    if bath.gamma0 * np.max(eps) ** bath.s > 0.1 * np.max(eps):
        warnings.warn(
            f"gamma0*eps^s reaches {bath.gamma0 * np.max(eps) ** bath.s:.3g} > 0.1*max(eps); "
            "weak-coupling (Lindblad) assumptions may not hold",
            RuntimeWarning,
            stacklevel=3,
        )


def sudden_solution(P0, rates: ModeRates, spectrum_post: ModeSpectrum, T_f: float, t: float) -> ModeEnsemble:
    """Exact relaxation at constant ``T_f``: ``P - P_th = exp(-2 gamma t) (P0 - P_th)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    P_th = thermal_occupation(spectrum_post.eps, T_f)
    decay = np.exp(-2.0 * rates.gamma_total * t)
    return ModeEnsemble(P=P_th + decay * (np.asarray(P0, dtype=float) - P_th), t=float(t))


def relax_exact(P0, gamma_total, P_th, times) -> np.ndarray:
    """Closed-form occupations at each of ``times`` (rows) for fixed rates."""
    times = np.asarray(times, dtype=float)
    decay = np.exp(-2.0 * np.outer(times, gamma_total))
    return P_th[None, :] + decay * (np.asarray(P0) - P_th)[None, :]


def _fermi_rows(eps: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Fermi-Dirac occupations, shape ``T.shape + eps.shape``; rows with T=0 are 0."""
    T = np.asarray(T, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = eps / T[..., None]
    return np.where(T[..., None] > 0, 1.0 / (1.0 + np.exp(np.minimum(x, 700.0))), 0.0)


# ---------------------------------------------------------------------------
# quadrature of the integral solution


def ramp_solution_quadrature(
    P0,
    schedule: QuenchSchedule,
    chain: ChainParams,
    bath: BathSpec,
    t_end: Optional[float] = None,
    quad_tol: float = 1e-12,
    eps: Optional[np.ndarray] = None,
) -> ModeEnsemble:
    """Occupations at ``t_end`` (default: ramp end) from the integral solution.

    Fermionic baths keep ``gamma_k`` fixed along a pure temperature ramp, so

        P(t) = e^{-2 g t} P0 + int_0^t 2 g e^{-2 g (t - t')} P_th(t') dt'.

    The substitution ``v = 1 - exp(-2 g (t - t'))`` absorbs the kernel and its
    boundary layer at ``t' -> t`` into a uniform measure on ``[0, 1 - e^{-2 g t}]``.
    Bosonic rates follow the temperature, so the kernel becomes
    ``exp(-int_{t'}^{t} 2 g)`` and the inner integral is done by nested quadrature.
    """
    if schedule.kind == SUDDEN:
        raise ValueError("quadrature route needs a ramp schedule")
    if eps is None:
        eps = spectrum(chain, build_grid(chain)).eps
    t_end = schedule.ramp_end if t_end is None else float(t_end)
    if not 0 <= t_end <= schedule.ramp_end * (1 + 1e-15):
        raise ValueError(f"t_end={t_end} outside the ramp [0, {schedule.ramp_end}]")
    P0 = np.asarray(P0, dtype=float)
    if t_end == 0:
        return ModeEnsemble(P=P0.copy(), t=0.0)
    if bath.fermionic:
        P = _fermionic_quadrature(P0, schedule, bath, eps, t_end, quad_tol)
    else:
        P = _bosonic_quadrature(P0, schedule, bath, eps, t_end, quad_tol)
    return ModeEnsemble(P=P, t=t_end)


def _fermionic_quadrature(P0, schedule, bath, eps, t_end, tol, n_init=4):
    g = 2.0 * total_rate(bath, eps, 0.0)
    gt = g * t_end
    active = np.flatnonzero(gt > 0)
    # slow modes integrate over v = 1 - e^{-g u} in [0, 1 - e^{-g t}], fast modes
    # over w = e^{-g u} in [e^{-g t}, 1]; either way 1 - v never cancels
    stiff = gt[active] > 1.0
    # the integrand is bounded by 1/2, so cutting w below 1e-3*tol costs < tol/2000
    a = np.where(stiff, np.maximum(np.exp(-gt[active]), 1e-3 * tol), 0.0)
    b = np.where(stiff, 1.0, -np.expm1(-gt[active]))
    edges = np.linspace(0.0, 1.0, n_init + 1)
    lo = (a[:, None] + (b - a)[:, None] * edges[None, :-1]).ravel()
    hi = (a[:, None] + (b - a)[:, None] * edges[None, 1:]).ravel()
    owner = np.repeat(np.arange(active.size), n_init)
    g_a, eps_a, stiff_a = g[active], eps[active], stiff

    def integrand(x, own):
        log_w = np.where(stiff_a[own][:, None], np.log(np.where(stiff_a[own][:, None], x, 1.0)),
                         np.log1p(-np.where(stiff_a[own][:, None], 0.0, x)))
        t = np.clip(t_end + log_w / g_a[own][:, None], 0.0, None)
        return _fermi_grid(eps_a[own][:, None], temperature_at(schedule, t))

    integral, _ = adaptive_gk15(integrand, lo, hi, owner, active.size, tol)
    P = np.exp(-gt) * P0
    P[active] += integral
    return P


def _bosonic_quadrature(P0, schedule, bath, eps, t_end, tol, n_geo=48):
    def rate(eps_rows, t):
        T = temperature_at(schedule, t)
        S = bath.gamma0 * eps_rows ** bath.s
        with np.errstate(divide="ignore"):
            coth = 1.0 / np.tanh(eps_rows / (2.0 * T))
        return 2.0 * np.where(T > 0, S * coth, S)

    def clock(t_lo, own_modes):
        """``int_{t_lo}^{t_end} 2 gamma dt`` for each entry of ``t_lo``."""
        flat = t_lo.ravel()
        own = own_modes.ravel()
        inner, _ = adaptive_gk15(
            lambda s, j: rate(eps[own[j]][:, None], s),
            flat, np.full_like(flat, t_end), np.arange(flat.size), flat.size,
            tol * 1e-2, rtol=1e-15,
        )
        return inner.reshape(t_lo.shape)

    c_end = rate(eps, np.full_like(eps, t_end))
    # geometric panels toward t_end resolve the kernel's boundary layer
    d = np.minimum(np.power(2.0, np.arange(n_geo))[None, :] / c_end[:, None], t_end)
    bps = np.concatenate([np.zeros((eps.size, 1)), t_end - d[:, ::-1], np.full((eps.size, 1), t_end)], axis=1)
    lo, hi = bps[:, :-1], bps[:, 1:]
    owner = np.repeat(np.arange(eps.size), lo.shape[1]).reshape(lo.shape)
    keep = hi > lo
    lo, hi, owner = lo[keep], hi[keep], owner[keep]

    def integrand(t, own):
        own2 = np.broadcast_to(own[:, None], t.shape)
        e = eps[own][:, None]
        return rate(e, t) * np.exp(-clock(t, own2)) * _fermi_grid(e, temperature_at(schedule, t))

    integral, _ = adaptive_gk15(integrand, lo, hi, owner, eps.size, tol)
    theta_total = clock(np.zeros_like(eps), np.arange(eps.size))
    return np.exp(-theta_total) * P0 + integral


def _fermi_grid(e, T):
    """Fermi-Dirac occupation for broadcastable energy and temperature arrays."""
    with np.errstate(divide="ignore"):
        x = e / T
    return np.where(T > 0, 1.0 / (1.0 + np.exp(np.minimum(x, 700.0))), 0.0)


# ---------------------------------------------------------------------------
# exponential integrator


def _jfuncs(theta):
    """``J_j = theta * int_0^1 exp(-theta (1-u)) u^j du`` for j = 0, 1, 2."""
    theta = np.asarray(theta, dtype=float)
    J0 = -np.expm1(-theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        J1 = 1.0 - J0 / theta
        J2 = 1.0 - 2.0 * J1 / theta
    small = theta < 1.0
    if np.any(small):
        ts = theta[small]
        # J_j = theta * j! * sum_n (-theta)^n / (n + j + 1)!
        s1 = np.zeros_like(ts)
        s2 = np.zeros_like(ts)
        fact1 = [1.0 / _factorial(n + 2) for n in range(22)]
        fact2 = [1.0 / _factorial(n + 3) for n in range(22)]
        for n in range(21, -1, -1):
            s1 = fact1[n] - ts * s1
            s2 = fact2[n] - ts * s2
        J1 = np.where(small, 0.0, J1)
        J2 = np.where(small, 0.0, J2)
        J1[small] = ts * s1
        J2[small] = 2.0 * ts * s2
    return J0, J1, J2


def _factorial(n):
    out = 1.0
    for i in range(2, n + 1):
        out *= i
    return out


def _etd_step(P, f0, fm, f1, theta, theta_m):
    """One step of the clock-time exponential integrator.

    In the per-mode clock ``theta = int 2 gamma dt`` the equation is
    ``dP/dtheta = -(P - P_th)``; ``P_th`` is interpolated by the quadratic
    through the step's start, midpoint and end, and the convolution with the
    exponential kernel is done exactly.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        um = np.where(theta > 0, theta_m / theta, 0.5)
    um = np.clip(um, 0.05, 0.95)
    J0, J1, J2 = _jfuncs(theta)
    d1 = f1 - f0
    dm = fm - f0
    a = (dm - um * d1) / (um * um - um)
    b = d1 - a
    out = np.exp(-theta) * P + f0 * J0 + b * J1 + a * J2
    return np.clip(out, 0.0, 1.0)


class RateIntegrator:
    """Adaptive exponential integrator for the rate equation on a fixed spectrum.

    The shared step size is chosen by step doubling so that the largest
    per-mode local error stays below ``tol * h``.
    """

    def __init__(self, eps, bath: BathSpec, schedule: QuenchSchedule, tol: float = 1e-10):
        self.eps = np.asarray(eps, dtype=float)
        self.bath = bath
        self.schedule = schedule
        self.tol = tol
        self.constant_rate = bath.fermionic
        if self.constant_rate:
            self._c = 2.0 * total_rate(bath, self.eps, 0.0)
        self.n_steps = 0
        self.n_rejected = 0

    def thermal(self, ts):
        return _fermi_rows(self.eps, temperature_at(self.schedule, ts))

    def clock_rate(self, ts):
        T = np.atleast_1d(temperature_at(self.schedule, ts))
        S = self.bath.gamma0 * self.eps ** self.bath.s
        with np.errstate(divide="ignore"):
            coth = 1.0 / np.tanh(self.eps[None, :] / (2.0 * T[:, None]))
        return 2.0 * np.where(T[:, None] > 0, S[None, :] * coth, S[None, :])

    def _trial(self, P, t, h):
        ts = t + h * np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        F = self.thermal(ts)
        if self.constant_rate:
            c = self._c
            th_full, th_full_m = c * h, c * (h / 2)
            th_a = th_b = c * (h / 2)
            th_am = th_bm = c * (h / 4)
        else:
            C = self.clock_rate(ts)
            H = h / 2
            th_full = h * (C[0] + 4 * C[2] + C[4]) / 6
            th_full_m = h * (5 * C[0] + 8 * C[2] - C[4]) / 24
            th_a = H * (C[0] + 4 * C[1] + C[2]) / 6
            th_am = H * (5 * C[0] + 8 * C[1] - C[2]) / 24
            th_b = H * (C[2] + 4 * C[3] + C[4]) / 6
            th_bm = H * (5 * C[2] + 8 * C[3] - C[4]) / 24
        full = _etd_step(P, F[0], F[2], F[4], th_full, th_full_m)
        half = _etd_step(P, F[0], F[1], F[2], th_a, th_am)
        half = _etd_step(half, F[2], F[3], F[4], th_b, th_bm)
        diff = np.abs(full - half)
        return half, diff

    def integrate(self, P0, t0: float, targets, h0: Optional[float] = None):
        """Advance ``P0`` from ``t0`` through each of ``targets``; returns rows of P."""
        targets = np.asarray(targets, dtype=float)
        if targets.size and (targets[0] < t0 or np.any(np.diff(targets) < 0)):
            raise ValueError("targets must be sorted and >= t0")
        P = np.array(P0, dtype=float)
        out = np.empty((targets.size, P.size))
        t = float(t0)
        span = (targets[-1] - t0) if targets.size else 0.0
        h = h0 if h0 is not None else max(span, 1.0) * 1e-8
        for i, target in enumerate(targets):
            while t < target:
                h_try = min(h, target - t)
                last = h_try >= target - t
                P_new, diff = self._trial(P, t, h_try)
                err = float(diff.max())
                # full and half steps disagree by a few ulp even when exact
                allowed = max(self.tol * h_try, 8.0 * _EPS)
                if err <= allowed:
                    P = P_new
                    t = float(target) if last else t + h_try
                    self.n_steps += 1
                    fac = 4.0 if err * 64.0 <= allowed else min(4.0, 0.9 * (allowed / err) ** (1 / 3))
                    if not last or fac < 1:
                        h = max(h_try * max(fac, 0.2), h if last else 0.0)
                else:
                    self.n_rejected += 1
                    fac = 0.9 * (allowed / err) ** (1 / 3)
                    h = h_try * max(0.2, min(fac, 0.9))
                    if h < 1e-14 * max(1.0, abs(t)):
                        mode = int(np.argmax(diff))
                        raise IntegrationError(
                            f"step size underflow at t={t:.6g} (mode {mode}, eps={self.eps[mode]:.6g}, "
                            f"local error {err:.3g})"
                        )
            out[i] = P
        return out


def ramp_solution_ode(
    P0,
    schedule: QuenchSchedule,
    chain: ChainParams,
    bath: BathSpec,
    sample_times,
    ode_tol: float = 1e-10,
    eps: Optional[np.ndarray] = None,
) -> TimeSeries:
    """Sampled excitation density along a schedule from the exponential integrator.

    The driving stage is integrated numerically; after the ramp ends the
    temperature is constant and the closed form takes over.
    """
    if eps is None:
        eps = spectrum(chain, build_grid(chain)).eps
    sample_times = np.asarray(sample_times, dtype=float)
    if sample_times.size and (sample_times[0] < 0 or sample_times[-1] > schedule.duration * (1 + 1e-12) + 1e-12):
        raise ValueError("sample times must lie within [0, ramp_end + relax_duration]")
    t_f = schedule.ramp_end
    during = sample_times[sample_times <= t_f]
    after = sample_times[sample_times > t_f]
    integ = RateIntegrator(eps, bath, schedule, ode_tol)
    targets = np.append(during, t_f) if (during.size == 0 or during[-1] < t_f) else during
    rows = integ.integrate(P0, 0.0, targets)
    P_end = rows[-1]
    D = [mode_mean(r) for r in rows[: during.size]]
    P_last = rows[during.size - 1] if during.size else P_end
    if after.size:
        g_f = total_rate(bath, eps, schedule.T_f)
        P_th = thermal_occupation(eps, schedule.T_f)
        for t in after:
            P_last = P_th + np.exp(-2.0 * g_f * (t - t_f)) * (P_end - P_th)
            D.append(mode_mean(P_last))
    series = _assemble(sample_times, np.array(D), schedule, eps, t_f, P_last)
    series.P_ramp_end = P_end
    return series


def _assemble(times, D, schedule, eps, t_ramp_end, P_final=None) -> TimeSeries:
    T = np.atleast_1d(temperature_at(schedule, times)) if times.size else np.empty(0)
    D_th_final = mode_mean(thermal_occupation(eps, schedule.T_f)) if schedule.T_f > 0 else 0.0
    cache = {}
    for x in np.unique(T):
        cache[x] = mode_mean(thermal_occupation(eps, x)) if x > 0 else 0.0
    D_inst = np.array([cache[x] for x in T])
    return TimeSeries(times=times, T=T, D=np.asarray(D, dtype=float), D_th_final=D_th_final,
                      D_th_inst=D_inst, t_ramp_end=t_ramp_end, P_final=P_final)
