"""Scaling analysis: log-log fits, shifted power laws, characteristic times.

Sign convention: fitted exponents keep their sign, so decaying data give a
negative ``exponent``. Theory exponents are magnitudes and are compared with
``abs(fit.exponent)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .chain import gap_info

POWER_LAW = "PowerLaw"
SHIFTED_POWER_LAW = "ShiftedPowerLaw"
EXPONENTIAL = "Exponential"
AMBIGUOUS = "Ambiguous"

MIN_POINTS = 8
#: Spatial dimension entering the standard Kibble-Zurek exponent.
DIMENSION = 1


class FitError(ValueError):
    pass


class NotReachedError(RuntimeError):
    """The compared traces never separate by more than the threshold."""


@dataclass(frozen=True)
class FitResult:
    exponent: float
    amplitude: float
    window: Tuple[float, float]
    residual_rms: float
    r2: float
    model: str
    t_w: Optional[float] = None
    n_points: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "t_w": self.t_w,
            "window": list(self.window),
            "n_points": self.n_points,
            "residual_rms": self.residual_rms,
            "r2": self.r2,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class TheoryExponent:
    value: float
    label: str


@dataclass(frozen=True)
class ScalingReport:
    observable: str
    abscissa: str
    fit: FitResult
    theory: Optional[TheoryExponent] = None

    @property
    def deviation(self) -> Optional[float]:
        if self.theory is None:
            return None
        return abs(self.fit.exponent) - self.theory.value

    def to_dict(self) -> dict:
        return {
            "observable": self.observable,
            "abscissa": self.abscissa,
            "fit": self.fit.to_dict(),
            "theory_exponent": None if self.theory is None else self.theory.value,
            "regime": None if self.theory is None else self.theory.label,
        }


# ---------------------------------------------------------------------------
# fits


def _select(xs, ys, window):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError("xs and ys must be 1-d arrays of equal length")
    if window is not None:
        lo, hi = window
        keep = (xs >= lo) & (xs <= hi)
        xs, ys = xs[keep], ys[keep]
    if xs.size < MIN_POINTS:
        raise FitError(f"fit window holds {xs.size} points; at least {MIN_POINTS} required")
    if np.any(np.diff(xs) <= 0):
        raise FitError("abscissa must be strictly increasing")
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise FitError("ordinate must be positive and finite inside the fit window")
    return xs, ys


def _linear(u, v):
    """Least-squares line ``v = a + b u``; returns (a, b, rms, r2)."""
    A = np.column_stack([np.ones_like(u), u])
    (a, b), *_ = np.linalg.lstsq(A, v, rcond=None)
    resid = v - (a + b * u)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), rms, r2


def fit_power_law(xs, ys, window=None) -> FitResult:
    """Ordinary least squares of ``log y`` on ``log x``."""
    xs, ys = _select(xs, ys, window)
    if np.any(xs <= 0):
        raise FitError("power-law fits need a positive abscissa")
    a, b, rms, r2 = _linear(np.log(xs), np.log(ys))
    return FitResult(b, math.exp(a), (float(xs[0]), float(xs[-1])), rms, r2, POWER_LAW, n_points=xs.size)


def fit_exponential(xs, ys, window=None) -> FitResult:
    """Least squares of ``log y`` on ``x``; ``exponent`` is the rate (negative for decay)."""
    xs, ys = _select(xs, ys, window)
    a, b, rms, r2 = _linear(xs, np.log(ys))
    return FitResult(b, math.exp(a), (float(xs[0]), float(xs[-1])), rms, r2, EXPONENTIAL, n_points=xs.size)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(f, a, b, rtol):
    """Golden-section minimum of ``f`` on ``[a, b]``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rtol * max(abs(c), abs(d), 1e-300):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def fit_shifted_power_law(xs, ys, alpha: Optional[float] = None, window=None,
                          t_w_max: Optional[float] = None, rtol: float = 1e-6) -> FitResult:
    """Fit ``y = A (t + t_w)^(-alpha)`` over ``t_w`` in ``[0, t_w_max]``.

    With ``alpha`` given, only ``A`` and ``t_w`` are free; otherwise the
    exponent is refitted by linear least squares at each trial ``t_w``. The
    search scans ``t_w`` on a log grid, then refines the best bracket by
    golden section. ``degenerate`` is set when the optimum lies on the
    search boundary.
    """
    xs, ys = _select(xs, ys, window)
    if xs[0] < 0:
        raise FitError("shifted fits need t >= 0")
    t_w_max = float(xs[-1]) if t_w_max is None else float(t_w_max)
    if not t_w_max > 0:
        raise FitError("t_w_max must be positive")
    logy = np.log(ys)

    def solve(t_w):
        u = np.log(xs + t_w)
        if alpha is None:
            a, b, rms, r2 = _linear(u, logy)
        else:
            b = -float(alpha)
            a = float(np.mean(logy - b * u))
            resid = logy - a - b * u
            rms = float(np.sqrt(np.mean(resid ** 2)))
            ss_tot = float(np.sum((logy - logy.mean()) ** 2))
            r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
        return a, b, rms, r2

    grid = np.geomspace(t_w_max * 1e-9, t_w_max, 181)
    if xs[0] > 0:
        grid = np.concatenate([[0.0], grid])
    scores = np.array([solve(t)[2] for t in grid])
    i = int(np.argmin(scores))
    degenerate = i in (0, grid.size - 1)
    if degenerate:
        t_best = float(grid[i])
    else:
        t_best, _ = _golden(lambda t: solve(t)[2], float(grid[i - 1]), float(grid[i + 1]), rtol)
    a, b, rms, r2 = solve(t_best)
    return FitResult(b, math.exp(a), (float(xs[0]), float(xs[-1])), rms, r2, SHIFTED_POWER_LAW,
                     t_w=t_best, n_points=xs.size, degenerate=degenerate)


def classify_decay(xs, ys, window=None, margin: float = 2.0):
    """Compare power-law and exponential fits on the same window.

    Returns ``(label, fit)`` where ``label`` is ``PowerLaw``, ``Exponential``
    or ``Ambiguous`` and ``fit`` is the better of the two. A model wins only
    if its log-space residual is at least ``margin`` times smaller.
    """
    xs, ys = _select(xs, ys, window)
    if xs[0] <= 0 or xs[-1] / xs[0] < 100 * (1 - 1e-9):
        raise FitError("decay classification needs at least two decades of positive abscissa")
    pw = fit_power_law(xs, ys)
    ex = fit_exponential(xs, ys)
    best, other = (pw, ex) if pw.residual_rms <= ex.residual_rms else (ex, pw)
    if best.residual_rms * margin <= other.residual_rms and other.residual_rms > 0:
        return best.model, best
    return AMBIGUOUS, best


# ---------------------------------------------------------------------------
# fit windows


def numerical_floor(L: int) -> float:
    """Excess magnitude below which summation noise dominates."""
    return 1e2 * L * np.finfo(float).eps


def clean_end(times, excess, L: int, t_limit: Optional[float] = None) -> float:
    """Last time before ``|excess|`` falls to the numerical floor (and before ``t_limit``)."""
    times = np.asarray(times, dtype=float)
    mag = np.abs(np.asarray(excess, dtype=float))
    below = np.flatnonzero(mag < numerical_floor(L))
    end = float(times[below[0] - 1]) if below.size and below[0] > 0 else float(times[-1])
    if below.size and below[0] == 0:
        raise FitError("trace starts below the numerical floor")
    if t_limit is not None:
        end = min(end, float(t_limit))
    return end


def last_decade(times, excess, L: int, t_limit: Optional[float] = None) -> Tuple[float, float]:
    """Latest full decade of sample times ending before the floor and ``t_limit``."""
    end = clean_end(times, excess, L, t_limit)
    lo = end / 10.0
    if lo < float(np.asarray(times)[0]) * (1 - 1e-12):
        raise FitError("trace does not cover a full clean decade")
    return (lo, end)


def finite_size_limit(min_rate: float, fraction: float = 0.5) -> float:
    """Time after which the slowest mode has started to relax (``fraction / (2 gamma_min)``)."""
    return fraction / (2.0 * min_rate)


def sliding_fits(xs, ys, width_decades: float = 1.0, stride: int = 1):
    """Power-law fits on every window spanning ``width_decades`` of ``xs``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = []
    lx = np.log10(xs)
    j = 0
    for i in range(0, xs.size, stride):
        while j < xs.size and lx[j] - lx[i] < width_decades * (1 - 1e-9):
            j += 1
        if j >= xs.size:
            break
        if j + 1 - i < MIN_POINTS or np.any(ys[i:j + 1] <= 0):
            continue
        out.append(fit_power_law(xs[i:j + 1], ys[i:j + 1]))
    return out


# ---------------------------------------------------------------------------
# characteristic times


def peak_time(series, reference: str = "instantaneous") -> float:
    """Time of the largest deviation from equilibrium during a drive.

    ``reference="instantaneous"`` measures ``|D(t) - D_th(T(t))|``;
    ``"final"`` measures ``|D(t) - D_th(T_f)|``. The sampled maximum is
    refined by a parabola through its neighbours in ``log t``.
    """
    times = np.asarray(series.times, dtype=float)
    if reference == "instantaneous":
        dev = np.abs(np.asarray(series.D) - np.asarray(series.D_th_inst))
    elif reference == "final":
        dev = np.abs(np.asarray(series.D) - series.D_th_final)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    i = int(np.argmax(dev))
    if i == 0 or i == times.size - 1:
        raise FitError("deviation peaks at an endpoint of the series")
    if np.any(times[i - 1:i + 2] <= 0):
        return float(times[i])
    u = np.log(times[i - 1:i + 2])
    y = dev[i - 1:i + 2]
    c2, c1, _ = np.polyfit(u, y, 2)
    if c2 >= 0:
        return float(times[i])
    u_star = float(np.clip(-c1 / (2.0 * c2), u[0], u[2]))
    return math.exp(u_star)


@dataclass(frozen=True)
class Crossover:
    time: float
    early: FitResult
    late: FitResult


def crossover_time(times, excess, early_exponent: float, late_exponent: float,
                   slope_tol: float = 0.15, min_r2: float = 0.99, width_decades: float = 1.0,
                   window=None) -> Crossover:
    """Intersection of the early and late power laws of a two-regime trace.

    One-decade windows are slid along the trace. The late regime is the
    window whose slope is closest to ``-late_exponent``; the early regime is
    the window closest to ``-early_exponent`` that ends before the late one
    starts. Each must match within ``slope_tol`` and reach ``r2 >= min_r2``.
    """
    xs, ys = _select(times, np.abs(np.asarray(excess, dtype=float)), window)
    fits = [f for f in sliding_fits(xs, ys, width_decades)]
    if not fits:
        raise FitError("trace too short for a one-decade window")

    def best(candidates, expected, name):
        if not candidates:
            raise FitError(f"no window available for the {name} regime")
        f = min(candidates, key=lambda c: abs(abs(c.exponent) - expected))
        if abs(abs(f.exponent) - expected) > slope_tol:
            raise FitError(f"{name} regime not found: closest slope {f.exponent:.3f}, expected {-expected:.3f}")
        if f.r2 < min_r2:
            raise FitError(f"{name} regime fit has r2={f.r2:.4f} < {min_r2}")
        return f

    late = best(fits, late_exponent, "late")
    early = best([f for f in fits if f.window[1] <= late.window[0]], early_exponent, "early")
    b1, b2 = early.exponent, late.exponent
    if b1 == b2:
        raise FitError("regimes have equal slopes; no intersection")
    log_t = (math.log(late.amplitude) - math.log(early.amplitude)) / (b1 - b2)
    return Crossover(math.exp(log_t), early, late)


def transition_time_offcritical(series_mu, series_critical, delta: float = 1e-6,
                                relative: bool = False) -> float:
    """First time the off-critical and critical excess magnitudes differ by more than ``delta``.

    With ``relative=True`` the difference is divided by the critical
    magnitude, so ``delta`` is a fractional separation.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    t1 = np.asarray(series_mu.times, dtype=float)
    t2 = np.asarray(series_critical.times, dtype=float)
    if t1.shape != t2.shape or np.any(t1 != t2):
        raise ValueError("traces must share sample times")
    crit = np.abs(np.asarray(series_critical.excess))
    diff = np.abs(np.abs(np.asarray(series_mu.excess)) - crit)
    if relative:
        with np.errstate(divide="ignore", invalid="ignore"):
            diff = np.where(crit > 0, diff / crit, np.inf)
    return threshold_crossing(t1, diff, delta)


def threshold_crossing(times, values, delta: float) -> float:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    above = np.flatnonzero(values > delta)
    if above.size == 0:
        raise NotReachedError(f"difference never exceeds delta={delta:g}")
    j = int(above[0])
    if j == 0:
        raise FitError("difference already exceeds delta at the first sample; start the grid earlier")
    x0, x1 = times[j - 1], times[j]
    y0, y1 = values[j - 1], values[j]
    return float(x0 + (delta - y0) * (x1 - x0) / (y1 - y0))


# ---------------------------------------------------------------------------
# theory


def theory_exponent(zeta: int, z: Optional[int], s: float, protocol: str, *,
                    T_i: float, T_f: float, critical: bool = True,
                    same_gap_point: bool = True) -> Optional[TheoryExponent]:
    """Predicted exponent magnitude for a protocol, or None outside known regimes.

    ``protocol`` is ``"ramp"`` (final excess against tau), ``"sudden"``
    (relaxation against t) or ``"ramp_relax"`` (relaxation after a ramp,
    fitted as a shifted power law with the sudden exponent). ``zeta`` is +1
    for a fermionic bath and -1 for a bosonic one; a bosonic bath shifts
    ``s`` to ``s - 1`` because its total rate is ``~ eps^(s-1)`` at small
    ``eps``. ``same_gap_point`` is False when a sudden quench starts from a
    critical point whose gap closes at a different momentum.
    """
    if protocol not in ("ramp", "sudden", "ramp_relax"):
        raise ValueError(f"unknown protocol {protocol!r}")
    heating_from_qcp = T_i == 0 and T_f > 0
    to_qcp = T_f == 0
    if not critical or z is None:
        if protocol == "ramp" and T_f > 0 and T_i != T_f:
            return TheoryExponent(1.0, "intrinsic finite-temperature term tau^-1")
        return None
    s_eff = s if zeta == 1 else s - 1
    kind = "fermionic" if zeta == 1 else "bosonic"
    if protocol == "ramp":
        if to_qcp:
            if zeta != 1:
                return None
            return TheoryExponent(DIMENSION / (z * (s + 1)), "standard Kibble-Zurek d/(z(s+1))")
        if heating_from_qcp:
            if z * s_eff >= 1:
                return TheoryExponent(1.0 / (z * s_eff), f"{kind} heating from QCP 1/(z s_eff)")
            return TheoryExponent(1.0, f"{kind} heating from QCP, z s_eff < 1 branch")
        if T_i > T_f > 0:
            if z * (s_eff - 1) >= 1:
                return TheoryExponent((z + 1) / (z * s_eff), f"{kind} cooling to finite T (z+1)/(z s_eff)")
            return TheoryExponent(1.0, f"{kind} cooling to finite T, z(s_eff-1) < 1 branch")
        return None
    # relaxation exponents, shared by sudden and ramp-then-relax
    label = "shifted " if protocol == "ramp_relax" else ""
    if to_qcp:
        # at T = 0 both baths relax with gamma0 eps^s
        if s >= 1:
            return TheoryExponent(1.0 / (z * s), f"{label}relaxation to QCP 1/(z s)")
        return None
    if heating_from_qcp and same_gap_point:
        if (zeta == 1 and s >= 1) or (zeta == -1 and s >= 2):
            return TheoryExponent(1.0 / (z * s_eff), f"{label}{kind} heating relaxation 1/(z s_eff)")
        return None
    if T_f > 0 and ((zeta == 1 and s >= 1) or (zeta == -1 and s >= 2)):
        return TheoryExponent((z + 1) / (z * s_eff), f"{label}{kind} finite-T relaxation (z+1)/(z s_eff)")
    return None


def fit_sweep(taus: Sequence[float], excess: Sequence[float], window=None) -> FitResult:
    """Power-law fit of ``|excess|`` against ``tau``."""
    return fit_power_law(np.asarray(taus, dtype=float), np.abs(np.asarray(excess, dtype=float)), window)


def theory_for(chain, bath, schedule, protocol: Optional[str] = None) -> Optional[TheoryExponent]:
    """``theory_exponent`` for run objects; ``protocol`` defaults from the schedule kind."""
    if protocol is None:
        protocol = {"sudden": "sudden", "linear": "ramp", "ramp_relax": "ramp_relax"}[schedule.kind]
    gap = gap_info(chain)
    same = True
    if schedule.pre_quench is not None:
        pre = gap_info(schedule.pre_quench)
        same = pre.is_critical and pre.gap_closing_k == gap.gap_closing_k
    return theory_exponent(bath.zeta, gap.z, bath.s, protocol, T_i=schedule.T_i, T_f=schedule.T_f,
                           critical=gap.is_critical, same_gap_point=same)
