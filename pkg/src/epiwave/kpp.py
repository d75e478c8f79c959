"""Fisher-KPP traveling waves and their comparison with the wild-type front.

A KPP wave ``-c u' - u'' = u (a - b u)`` with ``c >= 2 sqrt(a)`` is the
heteroclinic orbit leaving the saddle ``(a/b, 0)`` of the phase plane
``u' = v, v' = -c v - u (a - b u)``.  We shoot along its unstable manifold with
the adaptive integrator, then re-integrate forward with fixed-step RK4 on a
uniform output grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AlignmentImpossible, LevelNotCrossed, OutOfRegime, SpeedTooSmall, WindowExceeded
from .model import Params, min_speed
from .numerics import integrate_ode

DEFAULT_WINDOW = (-60.0, 20.0)
DEFAULT_DX = 0.01
SHOOT_EPS = 1e-8
BETA_K_MAX = 0.125
SANDWICH_TOL = 1e-6


@dataclass
class KppWave:
    c: float
    a: float
    b: float
    x: np.ndarray
    u: np.ndarray
    u0: float
    offset: float = 0.0  # constant added to the KPP profile (nonzero for the super-solution)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def at(self, x) -> np.ndarray:
        return CubicSpline(self.x, self.u)(x)


def window_grid(x_window=DEFAULT_WINDOW, dx: float = DEFAULT_DX) -> np.ndarray:
    """Uniform grid over ``x_window`` with ``x = 0`` as a node."""
    lo, hi = x_window
    n_lo = int(math.floor(-lo / dx + 1e-9))
    n_hi = int(math.floor(hi / dx + 1e-9))
    return dx * np.arange(-n_lo, n_hi + 1)


def kpp_wave(
    c: float,
    a: float = 1.0,
    b: float = 1.0,
    x_window=DEFAULT_WINDOW,
    u0: float = 0.5,
    dx: float = DEFAULT_DX,
    eps: float = SHOOT_EPS,
) -> KppWave:
    """KPP front of speed ``c`` normalized so that ``u(0) = u0``.

    ``x_window`` is an ``(x_min, x_max)`` pair with ``x_min < 0 < x_max``.
    """
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if c < 2.0 * math.sqrt(a) * (1 - 1e-14):
        raise SpeedTooSmall(f"c={c} < 2 sqrt(a)={2 * math.sqrt(a):.6g}: the tail would oscillate")
    top = a / b
    if not 0.0 < u0 < top:
        raise ValueError(f"u0 must lie in (0, a/b) = (0, {top:.6g})")
    lo, hi = x_window
    if not lo < 0.0 < hi:
        raise ValueError("x_window must straddle 0")

    def rhs(_s, y):
        return np.array([y[1], -c * y[1] - y[0] * (a - b * y[0])])

    def rhs_gap(_s, y):
        # same orbit in p = a/b - u, which resolves the departure from the saddle
        return np.array([y[1], -c * y[1] + b * y[0] * (top - y[0])])

    # unstable direction of the saddle: p'' + c p' - a p = 0
    kappa = 0.5 * (-c + math.sqrt(c * c + 4.0 * a))
    p0 = top - u0
    # the orbit needs about ln((a/b)/eps)/kappa to leave the saddle, then O(1/decay) to reach u0
    s_max = 10.0 * (math.log(top / eps) / kappa + 50.0 / max(c, 1.0))
    shoot = integrate_ode(rhs_gap, [eps, eps * kappa], (0.0, s_max), 1e-12, first_step=1e-2,
                          stop=lambda s, y: y[0] > p0)
    if shoot.y[-1, 0] <= p0:
        raise WindowExceeded(f"orbit did not reach u0={u0} within s={s_max:.3g}")
    s_lo, s_hi = shoot.t[-2], shoot.t[-1]
    for _ in range(80):
        s_mid = 0.5 * (s_lo + s_hi)
        if shoot(s_mid)[0, 0] < p0:
            s_lo = s_mid
        else:
            s_hi = s_mid
    s_cross = 0.5 * (s_lo + s_hi)

    # Backward integration toward the saddle is unstable, so re-integrate
    # forward with fixed RK4 from a grid node placed on the linear manifold,
    # correcting the phase until u(0) = u0.
    x = window_grid((lo, hi), dx)
    j = int(np.searchsorted(x, -s_cross + 1e-12))
    if j >= x.size or x[j] > 0.0:
        raise WindowExceeded("window too short to hold the normalization point")
    i0 = int(np.argmin(np.abs(x)))
    gap = eps * math.exp(kappa * (x[j] + s_cross))
    head = None
    for _ in range(8):
        if j == i0:
            break
        head = integrate_ode(rhs_gap, [gap, gap * kappa], (x[j], 0.0), step=dx)
        miss = head.y[-1, 0] - p0
        if abs(miss) < 1e-14:
            break
        # shifting the profile by s changes p(0) by p'(0) s and the start gap by exp(kappa s)
        gap *= math.exp(-kappa * miss / head.y[-1, 1])
        head = None
    if head is None:
        head = integrate_ode(rhs_gap, [gap, gap * kappa], (x[j], 0.0), step=dx) if j < i0 else None
    u = np.empty_like(x)
    u[:j] = top - gap * np.exp(kappa * (x[:j] - x[j]))  # linear regime
    if head is not None:
        u[j:i0 + 1] = top - head.y[:, 0]
        tail_start = [top - head.y[-1, 0], -head.y[-1, 1]]
    else:
        u[j] = top - gap
        tail_start = [top - gap, -gap * kappa]
    tail = integrate_ode(rhs, tail_start, (0.0, x[-1]), step=dx)
    u[i0:] = tail.y[:, 0]
    return KppWave(c=c, a=a, b=b, x=x, u=u, u0=u0)


def kpp_exact(x, u0: float):
    """Closed-form KPP front at ``c = 5/sqrt(6)``, ``a = b = 1``, with ``u(0) = u0``."""
    C = 1.0 / math.sqrt(u0) - 1.0
    return (1.0 + C * np.exp(np.asarray(x) / math.sqrt(6.0))) ** -2


def ode_residual(wave: KppWave, source: float = 0.0) -> np.ndarray:
    """Central-difference residual of ``-c u' - u'' - (u (a - b u) + source)`` at interior nodes."""
    u, dx = wave.u, wave.dx
    lhs = -wave.c * (u[2:] - u[:-2]) / (2 * dx) - (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
    return lhs - (u[1:-1] * (wave.a - wave.b * u[1:-1]) + source)


# modified waves bracketing w --------------------------------------------------

def over_shift(K: float) -> float:
    return 0.5 * (math.sqrt(1.0 + 4.0 * K) - 1.0)


def modified_waves(
    params: Params,
    c: float,
    x_window=DEFAULT_WINDOW,
    levels: tuple[float, float] = (0.5, 0.5),
    dx: float = DEFAULT_DX,
) -> tuple[KppWave, KppWave]:
    """Super- and sub-solutions ``(w_over, w_under)`` for the wild type.

    ``w_over`` solves ``-c w'' ... = w (1 - w) + K`` and runs from
    ``(1 + sqrt(1+4K))/2`` down to ``-(sqrt(1+4K) - 1)/2``; ``w_under`` solves
    ``-c w' - w'' = w (1 - 2K - w)``.  ``levels`` fixes ``w_over(0)`` and
    ``w_under(0)``.
    """
    K = params.K
    if c < 2.0 + K:
        raise OutOfRegime(f"comparison requires c >= 2 + K = {2 + K:.6g}, got {c}")
    delta = over_shift(K)
    over = kpp_wave(c, math.sqrt(1.0 + 4.0 * K), 1.0, x_window, levels[0] + delta, dx)
    over.u = over.u - delta
    over.u0 = levels[0]
    over.offset = -delta
    under = kpp_wave(c, 1.0 - 2.0 * K, 1.0, x_window, levels[1], dx)
    return over, under


def over_residual(over: KppWave, K: float) -> np.ndarray:
    u, dx, c = over.u, over.dx, over.c
    lhs = -c * (u[2:] - u[:-2]) / (2 * dx) - (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
    return lhs - (u[1:-1] * (1.0 - u[1:-1]) + K)


# decay exponent and comparison with the scalar wave ----------------------

def beta_formula(c: float, K: float) -> float:
    alpha = 0.5 * (c - math.sqrt(c * c - 4.0))
    lam_minus = 0.5 * (c - math.sqrt(c * c - 4.0 * (0.25 - K)))
    return 1.0 / (1.0 + alpha / lam_minus)


def beta_exponent(params_or_K: Union[Params, float], c: float) -> float:
    """Exponent ``beta = 1/(1 + alpha/lambda_-)`` of the ``K^beta`` error bound.

    ``alpha = (c - sqrt(c^2 - 4))/2`` and
    ``lambda_- = (c - sqrt(c^2 - 4(1/4 - K)))/2``.  Valid for ``c > 2`` and
    ``0 < K < 1/8``; the result lies in ``(0, 1/2)``.
    """
    K = params_or_K.K if isinstance(params_or_K, Params) else float(params_or_K)
    if not c > 2.0:
        raise OutOfRegime(f"beta needs c > 2, got {c}")
    if not 0.0 < K < BETA_K_MAX:
        raise OutOfRegime(f"beta needs 0 < K < 1/8, got K={K}")
    beta = beta_formula(c, K)
    if not 0.0 < beta < 0.5:
        raise OutOfRegime(f"beta={beta} outside (0, 1/2)")
    return beta


@dataclass
class ComparisonReport:
    beta: float
    beta_clamped: bool
    K_used: float
    mu_used: float
    c0: float
    level: float
    shift_w: float
    shift_u: float
    sup_err_left: float
    sup_err_right: float
    sup_err_total: float
    x: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None


def level_crossing(x: np.ndarray, v: np.ndarray, level: float) -> float:
    """Position where a profile decreasing through ``level`` crosses it (cubic refinement)."""
    above = np.nonzero(v >= level)[0]
    if above.size == 0 or above[-1] == v.size - 1 or v[0] < level:
        raise LevelNotCrossed(f"profile does not cross level {level:.6g}")
    i = int(above[-1])
    if np.any(np.diff(v[max(0, i - 2): i + 4]) >= 0):
        raise LevelNotCrossed(f"profile is not strictly decreasing through level {level:.6g}")
    j0, j1 = max(0, i - 3), min(v.size, i + 5)
    spline = CubicSpline(x[j0:j1], v[j0:j1])
    lo, hi = x[i], x[i + 1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if spline(mid) > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compare_to_kpp(
    x: np.ndarray,
    w: np.ndarray,
    params: Params,
    c: Optional[float] = None,
    x_window=DEFAULT_WINDOW,
    dx: float = DEFAULT_DX,
) -> ComparisonReport:
    """Distance between a wild-type front and the KPP wave of speed ``2 sqrt(r)``.

    ``w`` is translated so that ``w(0) = K^beta`` and compared with the KPP
    wave ``u`` normalized by ``u(0) = K^beta`` on ``x <= 0`` and ``x >= 0``.
    ``beta`` is evaluated at the front speed ``c`` (default ``c*``); for
    ``K >= 1/8`` it is frozen at its ``K = 1/8`` value.
    """
    c = min_speed(params.r, params.mu) if c is None else c
    K = params.K
    K_beta = min(K, BETA_K_MAX * (1 - 1e-9))
    beta = beta_exponent(K_beta, c)
    level = K**beta
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    xs = level_crossing(x, w, level)
    c0 = 2.0 * math.sqrt(params.r)
    u = kpp_wave(c0, 1.0, 1.0, x_window, level, dx)
    xw = x - xs
    inside = (u.x >= xw[0]) & (u.x <= xw[-1])
    xc = u.x[inside]
    wc = CubicSpline(xw, w)(xc)
    diff = np.abs(wc - u.u[inside])
    left = float(diff[xc <= 0].max())
    right = float(diff[xc >= 0].max())
    return ComparisonReport(
        beta=beta, beta_clamped=K_beta != K, K_used=K, mu_used=params.mu, c0=c0, level=level,
        shift_w=xs, shift_u=0.0, sup_err_left=left, sup_err_right=right,
        sup_err_total=max(left, right), x=xc, w=wc, u=u.u[inside],
    )


@dataclass
class SandwichReport:
    holds: bool
    worst_violation: float
    x_worst: float
    lower_clamped: bool
    w0: float
    width: float  # sup of (w_over - w_under) on the checked window


def sandwich_check(
    x: np.ndarray,
    w: np.ndarray,
    params: Params,
    c: float,
    tol: float = SANDWICH_TOL,
    x_window=DEFAULT_WINDOW,
    dx: float = DEFAULT_DX,
    level: Optional[float] = None,
) -> SandwichReport:
    """Check ``w_under <= w <= w_over`` on ``x <= 0`` with both bounds matched to ``w(0)``.

    With ``level`` given, ``w`` is first translated so that ``w(0) = level``.
    When ``w(0) >= 1 - 2K`` the sub-solution cannot reach it; it is then
    placed at the admissible translate closest to ``w(0)`` and flagged.
    """
    K = params.K
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if level is not None:
        try:
            x = x - level_crossing(x, w, level)
        except LevelNotCrossed as exc:
            raise AlignmentImpossible(str(exc)) from exc
    if not (x[0] < 0.0 <= x[-1]):
        raise AlignmentImpossible("profile must cover x = 0")
    w0 = float(CubicSpline(x, w)(0.0))
    if not 0.0 < w0 < 1.0:
        raise AlignmentImpossible(f"w(0)={w0} outside (0, 1)")
    cap = (1.0 - 2.0 * K) * (1.0 - 1e-6)
    lower_level = min(w0, cap)
    over, under = modified_waves(params, c, x_window, (w0, lower_level), dx)
    sel = (over.x <= 0.0) & (over.x >= x[0])
    xc = over.x[sel]
    wc = CubicSpline(x, w)(xc)
    lo_viol = under.u[sel] - wc
    hi_viol = wc - over.u[sel]
    viol = np.maximum(lo_viol, hi_viol)
    k = int(np.argmax(viol))
    worst = float(viol[k])
    return SandwichReport(
        holds=worst <= tol, worst_violation=worst, x_worst=float(xc[k]),
        lower_clamped=lower_level != w0, w0=w0,
        width=float(np.max(over.u[sel] - under.u[sel])),
    )


def sandwich_width(params: Params, c: float, level: float = 0.5, x_range=(-20.0, 0.0), dx: float = DEFAULT_DX) -> float:
    """``sup (w_over - w_under)`` over ``x_range`` with both bounds equal to ``level`` at 0."""
    over, under = modified_waves(params, c, (x_range[0] - 1.0, 1.0), (level, level), dx)
    sel = (over.x >= x_range[0]) & (over.x <= x_range[1])
    return float(np.max(over.u[sel] - under.u[sel]))
