"""Norm time series, energy-ledger verification and long-time monitors.

The energy ledger discretizes the balance

    d/dt (1/2 ||theta||^2) + kappa ||Lambda^{gamma/2} theta||^2 = <S, theta>

per accepted step.  The dissipation integral uses a geometric-mean
quadrature per mode, which is exact along pure exponential decay, so
pure-diffusion ledgers close to round-off; for nonlinear runs the residual
is third order in dt (halving dt cuts it by about 8x for etdrk2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EstimationError
from .grid import (
    SpectralField,
    gevrey_norm,
    l2_inner,
    linf_norm,
    sobolev_norm,
)
from .stepping import SimulationState, SolverConfig

__all__ = [
    "DiagnosticRecord",
    "record",
    "LedgerEntry",
    "EnergyLedgerRecorder",
    "LedgerSummary",
    "energy_balance_residual",
    "residual_convergence_order",
    "MaxPrincipleReport",
    "max_principle_check",
    "RadiusEstimate",
    "shell_max_spectrum",
    "analyticity_radius_estimate",
    "SmallnessReport",
    "smallness_condition",
    "absorbing_entry_time",
    "short_time_decay_slope",
]


@dataclass(frozen=True)
class DiagnosticRecord:
    """Norms of one snapshot, all computed from the same state."""

    t: float
    l2: float
    hs: dict[float, float]
    linf: float
    gevrey: dict[tuple[float, float, float], float]
    dissipation_rate: float


def record(
    state: SimulationState,
    config: SolverConfig,
    hs: Sequence[float] = (),
    gevrey: Sequence[tuple[float, float, float]] = (),
) -> DiagnosticRecord:
    """Compute the requested norms of the current state.

    ``hs`` lists Sobolev exponents, ``gevrey`` lists (r, tau, s) triples.
    The dissipation rate kappa ||Lambda^{gamma/2} theta||^2 is always
    included.  Gevrey overflow propagates from gevrey_norm.
    """
    theta = state.theta
    diss = config.kappa * sobolev_norm(theta, config.gamma / 2.0) ** 2
    return DiagnosticRecord(
        t=state.t,
        l2=sobolev_norm(theta, 0.0),
        hs={s: sobolev_norm(theta, s) for s in hs},
        linf=linf_norm(theta),
        gevrey={key: gevrey_norm(theta, *key) for key in gevrey},
        dissipation_rate=diss,
    )


# ---------------------------------------------------------------------------
# Energy ledger


@dataclass(frozen=True)
class LedgerEntry:
    t: float
    de: float
    dissipation: float
    injection: float
    residual: float


def _dissipation_integral(
    a_sq: np.ndarray, b_sq: np.ndarray, weight: np.ndarray, h: float
) -> float:
    """integral over the step of kappa ||Lambda^{gamma/2} theta||^2 dt.

    Per-mode geometric-mean rule: exact when |theta_hat|^2 decays as a pure
    exponential (the u = 0, S = 0 flow), second order otherwise.
    """
    a = weight * a_sq
    b = weight * b_sq
    out = np.empty_like(a)
    both = (a > 0) & (b > 0)
    ratio = np.ones_like(a)
    ratio[both] = b[both] / a[both]
    log_ratio = np.log(ratio)
    near = np.abs(log_ratio) < 1e-12
    trapezoid = 0.5 * (a + b)
    out[:] = trapezoid
    active = both & ~near
    out[active] = (b[active] - a[active]) / log_ratio[active]
    return float(h * np.sum(out))


class EnergyLedgerRecorder:
    """Observer that accumulates per-step energy balance entries.

    Attach with observe_every=1; with coarser cadence the entries integrate
    over whole observation intervals instead of single steps.
    """

    def __init__(self, config: SolverConfig, S: SpectralField):
        self.config = config
        self.S = S
        self.entries: list[LedgerEntry] = []
        self._prev: SimulationState | None = None
        grid = S.grid
        self._weight = config.kappa * grid.k_abs**config.gamma

    def __call__(self, state: SimulationState) -> None:
        prev = self._prev
        self._prev = state
        if prev is None or state.t == prev.t:
            return
        h = state.t - prev.t
        a_sq = np.abs(prev.theta.coeffs) ** 2
        b_sq = np.abs(state.theta.coeffs) ** 2
        de = 0.5 * float(np.sum(b_sq) - np.sum(a_sq))
        dissipation = _dissipation_integral(a_sq, b_sq, self._weight, h)
        injection = 0.5 * h * (l2_inner(self.S, prev.theta) + l2_inner(self.S, state.theta))
        self.entries.append(
            LedgerEntry(
                t=state.t,
                de=de,
                dissipation=dissipation,
                injection=injection,
                residual=de + dissipation - injection,
            )
        )


@dataclass(frozen=True)
class LedgerSummary:
    max_abs_residual: float
    rms_residual: float
    n_steps: int


def energy_balance_residual(entries: Sequence[LedgerEntry]) -> LedgerSummary:
    if not entries:
        raise EstimationError("empty energy ledger")
    res = np.array([e.residual for e in entries])
    return LedgerSummary(
        max_abs_residual=float(np.max(np.abs(res))),
        rms_residual=float(np.sqrt(np.mean(res**2))),
        n_steps=len(entries),
    )


def residual_convergence_order(by_dt: dict[float, float]) -> float:
    """Least-squares slope of log(max residual) vs log(dt) over a dt study."""
    if len(by_dt) < 2:
        raise EstimationError("need at least two dt values to fit an order")
    dts = np.array(sorted(by_dt))
    res = np.array([by_dt[dt] for dt in dts])
    if np.any(res <= 0):
        raise EstimationError("residuals must be positive to fit a log-log slope")
    return float(np.polyfit(np.log(dts), np.log(res), 1)[0])


# ---------------------------------------------------------------------------
# Maximum principle and absorbing-set monitors


@dataclass(frozen=True)
class MaxPrincipleReport:
    max_excess: float
    tolerance: float
    violated: bool
    c0_fit: float | None


def max_principle_check(
    times: Sequence[float],
    linf_series: Sequence[float],
    theta0_inf: float,
    s_inf: float,
    kappa: float,
    plateau_fraction: float = 0.25,
) -> MaxPrincipleReport:
    """Check sup_t ||theta||_inf <= ||theta0||_inf + ||S||_inf.

    Also fits the universal decay constant from the late-time plateau level
    ||S||_inf / (c0 kappa); the fit is None when S = 0 or kappa = 0.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    linf_arr = np.asarray(linf_series, dtype=float)
    bound = theta0_inf + s_inf
    excess = float(np.max(linf_arr) - bound)
    tol = 1e-6 * bound
    c0_fit = None
    if s_inf > 0 and kappa > 0 and len(linf_arr) >= 4:
        tail = max(2, int(len(linf_arr) * plateau_fraction))
        plateau = float(np.mean(linf_arr[-tail:]))
        if plateau > 0:
            c0_fit = s_inf / (kappa * plateau)
    return MaxPrincipleReport(
        max_excess=excess, tolerance=tol, violated=excess > tol, c0_fit=c0_fit
    )


def absorbing_entry_time(
    times: Sequence[float],
    linf_series: Sequence[float],
    s_inf: float,
    kappa: float,
    c0_hat: float = 1.0,
    atol: float = 1e-13,
) -> float | None:
    """First recorded time after which the trajectory stays inside the
    calibrated absorbing ball of radius 2 ||S||_inf / (c0_hat kappa).

    Returns None if the series never settles inside the ball.
    """
    if kappa <= 0 or c0_hat <= 0:
        raise ValueError("absorbing-set radius needs kappa > 0 and c0_hat > 0")
    radius = 2.0 * s_inf / (c0_hat * kappa)
    linf_arr = np.asarray(linf_series, dtype=float)
    inside = linf_arr <= radius + atol
    # last index at which the trajectory is outside the ball
    outside_idx = np.nonzero(~inside)[0]
    if len(outside_idx) == 0:
        return float(times[0])
    last_out = int(outside_idx[-1])
    if last_out + 1 >= len(linf_arr):
        return None
    return float(times[last_out + 1])


def short_time_decay_slope(
    times: Sequence[float], linf_series: Sequence[float], window: int = 6
) -> float:
    """Slope of log ||theta||_inf vs log(1/t) over the first recorded steps.

    Shape check for the smoothing estimate: the slope should not exceed
    (d + 1 - gamma) / (2 gamma) up to a margin; the constant is not fitted.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(linf_series, dtype=float)
    keep = (t > 0) & (y > 0)
    t, y = t[keep], y[keep]
    if len(t) < 2:
        raise EstimationError("not enough positive samples for a slope fit")
    t, y = t[:window], y[:window]
    return float(np.polyfit(np.log(1.0 / t), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# Analyticity radius


@dataclass(frozen=True)
class RadiusEstimate:
    tau_hat: float
    reliable: bool
    shells: np.ndarray
    log_shell_max: np.ndarray


def shell_max_spectrum(f: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    """Max |theta_hat| over each integer shell floor(|k|), shells >= 1."""
    grid = f.grid
    shells = grid.shell_index
    top = int(shells[grid.mode_mask].max())
    mags = np.abs(f.coeffs)
    out = np.zeros(top + 1)
    for n in range(1, top + 1):
        sel = (shells == n) & grid.mode_mask
        out[n] = float(np.max(mags[sel], initial=0.0))
    return np.arange(1, top + 1), out[1:]


def analyticity_radius_estimate(
    f: SpectralField, fit_window: tuple[int, int] | None = None
) -> RadiusEstimate:
    """Estimate the analyticity radius as minus the slope of
    log(shell max |theta_hat|) against the shell number.

    The default window spans shells [N/8, N/3] (inside the dealias band).
    Raises EstimationError when the window holds no energy at all; returns
    reliable=False when fewer than three shells are populated.
    """
    grid = f.grid
    n = grid.modes_per_axis
    if fit_window is None:
        fit_window = (max(1, n // 8), n // 3)
    lo, hi = fit_window
    if not 1 <= lo < hi:
        raise ValueError(f"bad fit window {fit_window}")
    shells, values = shell_max_spectrum(f)
    sel = (shells >= lo) & (shells <= hi) & (values > 0)
    if not np.any(sel):
        raise EstimationError(f"no spectral energy in shells [{lo}, {hi}]")
    xs = shells[sel].astype(float)
    ys = np.log(values[sel])
    if len(xs) < 3:
        return RadiusEstimate(tau_hat=0.0, reliable=False, shells=xs, log_shell_max=ys)
    slope = np.polyfit(xs, ys, 1)[0]
    return RadiusEstimate(
        tau_hat=float(max(-slope, 0.0)), reliable=True, shells=xs, log_shell_max=ys
    )


# ---------------------------------------------------------------------------
# Global-existence smallness conditions


@dataclass(frozen=True)
class SmallnessReport:
    lhs1: float
    lhs2: float
    beta: float


def smallness_condition(
    theta0: SpectralField,
    S: SpectralField,
    kappa: float,
    gamma: float,
    alpha: float,
) -> SmallnessReport:
    """Evaluate the two small-data expressions controlling global existence.

    beta = 1 - (1/alpha) [ (d+2)/2 + (1-gamma) ], requiring
    alpha > (d+2)/2 + (1-gamma) and kappa > 0, so beta lies in (0, 1):

        lhs1 = ||theta0||_{L2}^beta ||theta0||_{H^alpha}^{1-beta}
             + ||theta0||_{L2}^beta ||S||_{H^{alpha-gamma/2}}^{1-beta}
        lhs2 = ||Lambda^alpha theta0||_{L2}^2
             + (2/kappa^2) ||S||_{H^{alpha-gamma/2}}^2
    """
    d = theta0.grid.dimension
    threshold = (d + 2) / 2.0 + (1.0 - gamma)
    if alpha <= threshold:
        raise ValueError(f"alpha must exceed (d+2)/2 + (1-gamma) = {threshold}")
    if kappa <= 0:
        raise ValueError("smallness conditions require kappa > 0")
    beta = 1.0 - threshold / alpha
    l2 = sobolev_norm(theta0, 0.0)
    h_alpha = sobolev_norm(theta0, alpha)
    s_norm = sobolev_norm(S, alpha - gamma / 2.0)
    lhs1 = l2**beta * h_alpha ** (1.0 - beta) + l2**beta * s_norm ** (1.0 - beta)
    lhs2 = h_alpha**2 + (2.0 / kappa**2) * s_norm**2
    return SmallnessReport(lhs1=float(lhs1), lhs2=float(lhs2), beta=float(beta))
