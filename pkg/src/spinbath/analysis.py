"""Derived quantities from echo series: decay rates, plateaus, critical fits.

Window conventions (all in units of 1/J):

* Region I (Gaussian decay): the initial run of samples with 1 - L <= 0.1,
  at least 10 points (widened with a flag if the series decays faster).
* Region II (pre-revival plateau): [T1, T2] with T2 = N/(8J) and T1 = T2/2,
  from the revival estimate t_rev ~ N/(2v) at quasiparticle velocity v = 2J
  and a factor-2 safety margin.

The Gaussian rate is defined through L ~ exp(-alpha t^2); the perturbative
prediction for it is eps^2 (1 - <sz_site>^2), the second-order short-time
cumulant of the dephasing factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .models import BathSpec, CouplingSpec, Family
from .series import EchoSeries

NO_DECAY_TOL = 1e-12
MIN_FIT_POINTS = 10
DECAY_WINDOW = 0.1
POOR_FIT_FRACTION = 0.25


@dataclass(frozen=True)
class GaussianFit:
    alpha: float
    window: tuple[float, float]
    residual: float
    flag: str = "ok"  # ok | widened | no_decay | clamped


def fit_gaussian_rate(series: EchoSeries) -> GaussianFit:
    """Least-squares fit of ln L = -alpha t^2 over the region-I window."""
    t, values = series.times, series.values
    if t[0] != 0.0 or abs(values[0] - 1.0) > 1e-9:
        raise ValueError("series must start at t=0 with L=1")
    decay = 1.0 - values
    if np.max(decay) < NO_DECAY_TOL:
        return GaussianFit(0.0, (0.0, t[-1]), 0.0, "no_decay")

    crossed = decay > DECAY_WINDOW
    end = int(np.argmax(crossed)) if np.any(crossed) else len(t)
    flag = "ok"
    if end - 1 < MIN_FIT_POINTS:  # excluding the t=0 sample
        end = min(len(t), MIN_FIT_POINTS + 1)
        flag = "widened"
    tt = t[1:end]
    ll = np.log(np.maximum(values[1:end], 1e-300))
    alpha = -float(np.sum(tt ** 2 * ll) / np.sum(tt ** 4))
    if alpha < 0.0:
        alpha, flag = 0.0, "clamped"
    residual = float(np.sqrt(np.mean((ll + alpha * tt ** 2) ** 2)))
    return GaussianFit(alpha, (float(tt[0]), float(tt[-1])), residual, flag)


def predicted_alpha(bath: BathSpec, coupling: CouplingSpec) -> float:
    """Second-order short-time prediction eps^2 (1 - <sz_site>^2).

    The magnetization of the coupled site comes from the matching engine:
    free-fermion correlations for the XY class, the exact oracle for XXZ
    chains up to the sparse limit and the MPS ground state beyond.
    """
    if bath.family is Family.XY:
        from . import freefermion as ff
        form = ff.build_quadratic_form(bath)
        r = ff.ground_state_correlations(form, on_zero_mode="fill")
        m = ff.transverse_magnetization(form, coupling.site, r)
    else:
        from . import oracle
        if bath.n_spins <= oracle.SPARSE_LIMIT:
            h = oracle.build_hamiltonian(bath)
            method = "dense" if bath.n_spins <= 12 else "iterative"
            _, psi = oracle.ground_state(h, method=method)
            m = oracle.expectation(psi, oracle.pauli_string(bath.n_spins, (coupling.site,), "z"))
        else:
            from . import tebd
            _, mps = tebd.ground_state_imaginary_time(bath, tebd.TEBDParams())
            m = mps.expect_site(coupling.site - 1, np.array([[1.0, 0.0], [0.0, -1.0]]))
    return float(coupling.epsilon ** 2 * (1.0 - m ** 2))


@dataclass(frozen=True)
class PlateauEstimate:
    l_inf: float
    amplitude: float
    window: tuple[float, float]


def plateau_window(bath: BathSpec) -> tuple[float, float]:
    t2 = bath.n_spins / (8.0 * bath.j)
    return t2 / 2.0, t2


def plateau_value(series: EchoSeries, bath: BathSpec) -> PlateauEstimate:
    """Mean and oscillation amplitude of L over the closed window [T1, T2]."""
    t1, t2 = plateau_window(bath)
    if series.times[-1] < t2 - 1e-12:
        raise ValueError(f"series ends at t={series.times[-1]} before T2={t2}; "
                         "refusing to extrapolate")
    sub = series.window(t1, t2)
    return PlateauEstimate(float(np.mean(sub.values)), float(np.ptp(sub.values)), (t1, t2))


@dataclass(frozen=True)
class CriticalScalingFit:
    l_infinity: float
    beta: float
    residual: float
    r_squared: float
    pairs: tuple[tuple[float, float], ...]


def fit_critical_scaling(pairs) -> CriticalScalingFit:
    """Fit L_inf^c(N) = l_inf / (1 + beta ln N) by linear least squares.

    1/L is linear in ln N: intercept a = 1/l_inf, slope b = beta/l_inf.
    """
    pairs = tuple((float(n), float(l)) for n, l in pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (N, L_inf) pairs")
    x = np.log([p[0] for p in pairs])
    y = 1.0 / np.array([p[1] for p in pairs])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    residual = float(np.sqrt(ss_res / len(pairs)))
    l_inf = 1.0 / intercept
    return CriticalScalingFit(l_inf, float(slope * l_inf), residual, r2, pairs)


@dataclass(frozen=True)
class LogDecayFit:
    c0: float
    c1: float
    window: tuple[float, float]
    residual: float
    flag: str = "ok"  # ok | poor


def _windowed(series: EchoSeries, window: tuple[float, float | None]):
    t_lo, t_hi = window
    if t_hi is None:
        t_hi = float(series.times[-1])
    sub = series.window(t_lo, t_hi)
    return sub.times, sub.values, (t_lo, t_hi)


def fit_log_decay(series: EchoSeries, window=(1.0, None)) -> LogDecayFit:
    """Nonlinear fit of L(t) = c0 / (1 + c1 ln t); window starts at t=1.

    Flagged "poor" when the rms residual exceeds POOR_FIT_FRACTION of the
    peak-to-peak spread in the window (threshold calibrated on synthetic
    log-decay and plateau series).
    """
    t, values, win = _windowed(series, window)

    def resid(p):
        return p[0] / (1.0 + p[1] * np.log(t)) - values

    sol = least_squares(resid, x0=(1.0, 0.01), xtol=1e-9, ftol=1e-15, gtol=1e-15)
    residual = float(np.sqrt(np.mean(sol.fun ** 2)))
    spread = float(np.ptp(values))
    flag = "ok" if residual <= POOR_FIT_FRACTION * max(spread, 1e-300) else "poor"
    return LogDecayFit(float(sol.x[0]), float(sol.x[1]), win, residual, flag)


@dataclass(frozen=True)
class ExponentialFit:
    a: float
    b: float
    window: tuple[float, float]
    residual: float


def fit_exponential_decay(series: EchoSeries, window=(1.0, None)) -> ExponentialFit:
    """Reference model a * exp(-b t) on the same window, for model comparison."""
    t, values, win = _windowed(series, window)

    def resid(p):
        return p[0] * np.exp(-p[1] * t) - values

    sol = least_squares(resid, x0=(1.0, 0.01), xtol=1e-9, ftol=1e-15, gtol=1e-15)
    residual = float(np.sqrt(np.mean(sol.fun ** 2)))
    return ExponentialFit(float(sol.x[0]), float(sol.x[1]), win, residual)


def dominant_frequency(series: EchoSeries, t_lo: float, t_hi: float) -> float:
    """Dominant angular frequency of the echo oscillation over [t_lo, t_hi].

    Hann-windowed FFT of the mean-subtracted signal with parabolic peak
    interpolation; the grid must be uniform.
    """
    sub = series.window(t_lo, t_hi)
    t, y = sub.times, sub.values - np.mean(sub.values)
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9):
        raise ValueError("dominant_frequency needs a uniform time grid")
    amp = np.abs(np.fft.rfft(y * np.hanning(y.size)))
    freqs = np.fft.rfftfreq(y.size, d=dts[0])
    k = int(np.argmax(amp[1:]) + 1)
    if 1 <= k < len(amp) - 1:
        denom = amp[k - 1] - 2 * amp[k] + amp[k + 1]
        shift = 0.5 * (amp[k - 1] - amp[k + 1]) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    return float(2.0 * np.pi * (freqs[k] + shift * (freqs[1] - freqs[0])))


@dataclass(frozen=True)
class AlphaConcurrenceRow:
    parameter: float
    alpha: float
    concurrence: float
    ratio: float | None


CONCURRENCE_FLOOR = 1e-6


def alpha_concurrence_report(baths, coupling: CouplingSpec, times,
                             pair: tuple[int, int] | None = None) -> list[AlphaConcurrenceRow]:
    """Measured Gaussian rate vs nearest-neighbour concurrence per grid point.

    Both columns come from the exact oracle: alpha from a region-I fit of the
    echo, the concurrence from the two-site reduced density matrix of the bare
    bath ground state at ``pair`` (default: the coupled site and its right
    neighbour).  The ratio is omitted when the concurrence is below the 0/0
    guard floor.
    """
    from . import oracle
    rows = []
    for bath in baths:
        sites = pair if pair is not None else (coupling.site, coupling.site + 1)
        series = oracle.loschmidt_echo_exact(bath, coupling, times)
        fit = fit_gaussian_rate(series)
        h = oracle.build_hamiltonian(bath)
        method = "dense" if bath.n_spins <= 12 else "iterative"
        _, psi = oracle.ground_state(h, method=method)
        rho = oracle.reduced_density_matrix(psi, bath.n_spins, sites)
        conc = oracle.concurrence(rho)
        ratio = fit.alpha / conc if conc > CONCURRENCE_FLOOR else None
        parameter = bath.lam if bath.family is Family.XY else bath.delta
        rows.append(AlphaConcurrenceRow(parameter, fit.alpha, conc, ratio))
    return rows
