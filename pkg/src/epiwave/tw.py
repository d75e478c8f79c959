"""Traveling waves as a nonlinear boundary-value problem with unknown speed.

On ``[-a, a]`` we solve the central-difference discretization of::

    -c w' - w'' = f_w(w, m),   -c m' - m'' = f_m(w, m)

with ``(w, m)(-a) = (w*, m*)``, ``(w, m)(a) = (0, 0)`` and the pinning
condition ``(w + m)(0) = nu0`` closing the system for ``c``.  Unknowns are
stored interleaved per node, ``z = [w0, m0, w1, m1, ..., c]``, so the Jacobian
is a pentadiagonal core bordered by the ``c`` column and the pinning row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BoundsViolated, GuessRejected, NewtonFailed, TailTooShort
from .model import Params, min_speed, reaction, reaction_jacobian, spectral_data
from .numerics import (
    BorderedBandedSystem,
    MaxIterationsExceeded,
    NewtonOptions,
    SingularJacobian,
    newton_solve,
    solve_bordered_banded,
)

BOUNDS_TOL = 1e-8
NEWTON_TOL = 1e-10


@dataclass
class WaveSolution:
    c: float
    x: np.ndarray
    w: np.ndarray
    m: np.ndarray
    a: float
    params: Params
    residual_norm: float = math.nan
    iterations: int = 0
    trace: list = field(default_factory=list)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def pin_index(self) -> int:
        return int(np.argmin(np.abs(self.x)))

    def pack(self) -> np.ndarray:
        return pack(self.w, self.m, self.c)


@dataclass(frozen=True)
class ShapeClass:
    tag: str  # "A", "B", "C" or "Unclassified"
    x_bar: Optional[float] = None


@dataclass(frozen=True)
class TailReport:
    lambda_meas: float
    ratio_meas: float
    window: tuple[float, float]


def make_grid(a: float, n_nodes: int) -> np.ndarray:
    if n_nodes % 2 == 0:
        raise ValueError("n_nodes must be odd so that x = 0 is a grid node")
    return np.linspace(-a, a, n_nodes)


def pack(w: np.ndarray, m: np.ndarray, c: float) -> np.ndarray:
    z = np.empty(2 * w.size + 1)
    z[0:-1:2] = w
    z[1:-1:2] = m
    z[-1] = c
    return z


def unpack(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    return z[0:-1:2], z[1:-1:2], float(z[-1])


class WaveProblem:
    """Discrete residual and analytic Jacobian for a fixed grid and parameters."""

    def __init__(self, params: Params, x: np.ndarray):
        self.params = params
        self.x = np.asarray(x, dtype=float)
        self.n = self.x.size
        self.dx = float(self.x[1] - self.x[0])
        self.pin = int(np.argmin(np.abs(self.x)))
        if abs(self.x[self.pin]) > 1e-9 * self.dx:
            raise ValueError("grid must contain x = 0 as a node")

    def operator(self, w, m, c):
        """Interior rows ``-c u' - u'' - f(u)``, shape (n - 2,) each."""
        dx = self.dx
        fw, fm = reaction(w[1:-1], m[1:-1], self.params)
        rw = -c * (w[2:] - w[:-2]) / (2 * dx) - (w[2:] - 2 * w[1:-1] + w[:-2]) / dx**2 - fw
        rm = -c * (m[2:] - m[:-2]) / (2 * dx) - (m[2:] - 2 * m[1:-1] + m[:-2]) / dx**2 - fm
        return rw, rm

    def residual(self, z: np.ndarray) -> np.ndarray:
        w, m, c = unpack(z)
        p = self.params
        F = np.empty_like(z)
        rw, rm = self.operator(w, m, c)
        F[0], F[1] = w[0] - p.w_star, m[0] - p.m_star
        F[2:-3:2], F[3:-3:2] = rw, rm
        F[-3], F[-2] = w[-1], m[-1]
        F[-1] = w[self.pin] + m[self.pin] - p.nu0
        return F

    def jacobian(self, z: np.ndarray) -> BorderedBandedSystem:
        w, m, c = unpack(z)
        n, dx = self.n, self.dx
        N = 2 * n
        lo, up = 2, 2
        ab = np.zeros((lo + up + 1, N))

        def put(rows, cols, vals):
            ab[up + rows - cols, cols] = vals

        i = np.arange(1, n - 1)
        rw, rm = 2 * i, 2 * i + 1
        fw_w, fw_m, fm_w, fm_m = reaction_jacobian(w[i], m[i], self.params)
        left = c / (2 * dx) - 1 / dx**2
        right = -c / (2 * dx) - 1 / dx**2
        diag = 2 / dx**2
        put(rw, rw - 2, left)
        put(rw, rw, diag - fw_w)
        put(rw, rw + 1, -fw_m)
        put(rw, rw + 2, right)
        put(rm, rm - 2, left)
        put(rm, rm - 1, -fm_w)
        put(rm, rm, diag - fm_m)
        put(rm, rm + 2, right)
        for k in (0, 1, N - 2, N - 1):
            put(np.array([k]), np.array([k]), 1.0)

        col = np.zeros(N)
        col[rw] = -(w[i + 1] - w[i - 1]) / (2 * dx)
        col[rm] = -(m[i + 1] - m[i - 1]) / (2 * dx)
        row = np.zeros(N)
        row[2 * self.pin] = row[2 * self.pin + 1] = 1.0
        return BorderedBandedSystem(ab, lo, up, col, row, 0.0, np.zeros(N + 1))

    def dense_jacobian(self, z: np.ndarray) -> np.ndarray:
        return self.jacobian(z).dense()


def _bordered_solver(J: BorderedBandedSystem, rhs: np.ndarray) -> np.ndarray:
    J.rhs = rhs
    return solve_bordered_banded(J)


def default_guess(params: Params, a: float, n_nodes: int, width: float = 4.0) -> np.ndarray:
    """Sigmoid profile ``(w*, m*) s(x)`` with ``(w + m)(0) = nu0`` and ``c = c*``."""
    x = make_grid(a, n_nodes)
    total = params.w_star + params.m_star
    shift = -width * math.log(total / params.nu0 - 1.0)
    s = 0.5 * (1.0 - np.tanh((x - shift) / (2.0 * width)))  # 1/(1+exp((x-shift)/width))
    return pack(params.w_star * s, params.m_star * s, min_speed(params.r, params.mu))


def _check_bounds(w, m, params: Params) -> None:
    worst = max(-w.min(), w.max() - 1.0, -m.min(), m.max() - params.K)
    if worst > BOUNDS_TOL:
        raise BoundsViolated(
            f"converged profile leaves [0,1]x[0,K] by {worst:.3e}; the domain is probably too short"
        )


def solve_wave_bvp(
    params: Params,
    a: float,
    n_nodes: int,
    initial_guess: Optional[np.ndarray] = None,
    tol: float = NEWTON_TOL,
    max_iter: int = 60,
) -> WaveSolution:
    """Newton solve of the pinned traveling-wave problem on ``[-a, a]``.

    Without ``initial_guess`` the solve starts from :func:`default_guess`
    (sigmoid width 4) and retries once with width 2.
    """
    if a < 2 * params.a0:
        raise ValueError(f"half-length a={a} is below 2*a0={2 * params.a0:.4g}")
    if n_nodes < 200:
        raise ValueError("need at least 200 nodes")
    x = make_grid(a, n_nodes)
    prob = WaveProblem(params, x)
    if initial_guess is not None:
        guesses = [np.asarray(initial_guess, dtype=float)]
        if guesses[0].shape != (2 * n_nodes + 1,) or not np.all(np.isfinite(guesses[0])):
            raise GuessRejected("initial guess must be finite with 2*n_nodes + 1 entries")
    else:
        guesses = [default_guess(params, a, n_nodes, 4.0), default_guess(params, a, n_nodes, 2.0)]
    opts = NewtonOptions(tol=tol, max_iter=max_iter, max_halvings=8, linear_solver=_bordered_solver)
    failures = []
    for z0 in guesses:
        try:
            res = newton_solve(prob.residual, prob.jacobian, z0, opts)
        except (MaxIterationsExceeded, SingularJacobian) as exc:
            failures.append(exc)
            continue
        w, m, c = unpack(res.x)
        _check_bounds(w, m, params)
        return WaveSolution(
            c=c, x=x, w=w.copy(), m=m.copy(), a=a, params=params,
            residual_norm=res.residual_norm, iterations=res.iterations, trace=res.residual_norms,
        )
    trace = getattr(failures[-1], "trace", [])
    raise NewtonFailed(f"traveling-wave Newton solve failed: {failures[-1]}", trace=trace)


def discrete_min_speed(params: Params, dx: float) -> float:
    """Minimal speed of the linearized central-difference scheme at spacing ``dx``.

    For ``exp(-k x) X`` the discrete operator gives
    ``c(k) = (h+ + 2 (cosh(k dx) - 1) / dx^2) / (sinh(k dx) / dx)``; this is its
    minimum over ``k``, which tends to ``c*`` as ``dx -> 0``.
    """
    h_plus = spectral_data(params.r, params.mu).h_plus

    def c_of_k(k):
        return (h_plus + 2.0 * (math.cosh(k * dx) - 1.0) / dx**2) / (math.sinh(k * dx) / dx)

    k0 = math.sqrt(h_plus)
    res = minimize_scalar(c_of_k, bounds=(0.1 * k0, 10.0 * k0), method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


def pad_solution(sol: WaveSolution, a_new: float, n_nodes: int) -> np.ndarray:
    """Initial guess on ``[-a_new, a_new]`` built from a solution on a shorter domain.

    The left end is filled with ``(w*, m*)``.  Right of the point where the
    old profile has decayed below ``1e-4 nu0``, the old leading edge is written
    as ``exp(-c x / 2)`` times a slowly varying factor; that factor is stretched
    onto the longer interval and the exponential uses ``c*``.  The speed guess
    assumes the finite-box deficit ``c_h - c(a)`` scales like ``1/a^2``, with
    ``c_h`` the discrete minimal speed.  Seeding with the old speed instead
    lands on spurious branches whose far tail changes sign.
    """
    p = sol.params
    x = make_grid(a_new, n_nodes)
    c_star = min_speed(p.r, p.mu)
    s = sol.w + sol.m
    small = np.nonzero((sol.x > 0) & (s < 1e-4 * p.nu0))[0]
    i_cut = int(small[0]) if small.size else sol.n - 1
    x_cut = sol.x[i_cut]
    w = np.interp(x, sol.x, sol.w)
    m = np.interp(x, sol.x, sol.m)
    w[x < sol.x[0]] = p.w_star
    m[x < sol.x[0]] = p.m_star
    tail = x > x_cut
    y = x_cut + (x[tail] - x_cut) * (sol.a - x_cut) / (a_new - x_cut)
    old_env = np.exp(-0.5 * sol.c * (y - x_cut))
    new_env = np.exp(-0.5 * c_star * (x[tail] - x_cut))
    for v, v_old in ((w, sol.w), (m, sol.m)):
        if v_old[i_cut] > 0:
            v[tail] = new_env * np.interp(y, sol.x, v_old) / old_env
        else:
            v[tail] = 0.0
    w[-1] = m[-1] = 0.0
    c_h = discrete_min_speed(p, float(x[1] - x[0]))
    c_guess = c_h - (c_h - sol.c) * (sol.a / a_new) ** 2
    return pack(w, m, c_guess)


def has_sign_change(sol: WaveSolution) -> bool:
    """True when some node is negative: a spurious branch with an oscillating tail."""
    return bool(min(sol.w.min(), sol.m.min()) < 0.0)


def continue_in_domain(params: Params, a_list: Sequence[float], n_per_unit: float = 20.0) -> list[WaveSolution]:
    """Solve on a sequence of growing domains, each seeded by the previous one.

    A solve that lands on a sign-changing branch is redone from the default guess.
    """
    a_list = list(a_list)
    if any(b <= a for a, b in zip(a_list, a_list[1:])):
        raise ValueError("a_list must be increasing")
    out: list[WaveSolution] = []
    for a in a_list:
        n = 2 * int(round(a * n_per_unit)) + 1
        guess = pad_solution(out[-1], a, n) if out else None
        sol = solve_wave_bvp(params, a, n, initial_guess=guess)
        if guess is not None and has_sign_change(sol):
            sol = solve_wave_bvp(params, a, n)
        out.append(sol)
    return out


def residual(sol: WaveSolution) -> float:
    """Sup-norm of the interior discrete operator (boundary and pinning rows excluded)."""
    prob = WaveProblem(sol.params, sol.x)
    rw, rm = prob.operator(sol.w, sol.m, sol.c)
    return float(max(np.abs(rw).max(), np.abs(rm).max()))


# shape and tail diagnostics -------------------------------------------------

def _is_nonincreasing(d: np.ndarray, slack: float) -> bool:
    return bool(np.all(d <= slack))


def _unimodal_peak(v: np.ndarray, slack: float) -> Optional[int]:
    d = np.diff(v)
    k = int(np.argmax(v))
    if k == 0 or k == v.size - 1:
        return None
    if np.all(d[:k] >= -slack) and np.all(d[k:] <= slack):
        return k
    return None


def classify_profiles(x: np.ndarray, w: np.ndarray, m: np.ndarray, tol: float = 1e-6) -> ShapeClass:
    """Sort a front into the three admissible shapes.

    A: ``w`` decreasing, ``m`` rises to a single peak at ``x_bar < 0`` then decays.
    B: the same with the roles of ``w`` and ``m`` swapped.
    C: both decreasing.
    Differences within ``tol * max|difference|`` of zero count as flat.
    """
    dw, dm = np.diff(w), np.diff(m)
    sw = tol * np.abs(dw).max() if dw.size else 0.0
    sm = tol * np.abs(dm).max() if dm.size else 0.0
    w_dec, m_dec = _is_nonincreasing(dw, sw), _is_nonincreasing(dm, sm)
    if w_dec and m_dec:
        return ShapeClass("C")
    if w_dec:
        k = _unimodal_peak(m, sm)
        if k is not None and x[k] < 0:
            return ShapeClass("A", float(x[k]))
    if m_dec:
        k = _unimodal_peak(w, sw)
        if k is not None and x[k] < 0:
            return ShapeClass("B", float(x[k]))
    return ShapeClass("Unclassified")


def classify_shape(sol: WaveSolution, tol: float = 1e-6) -> ShapeClass:
    return classify_profiles(sol.x, sol.w, sol.m, tol)


def tail_fit(x: np.ndarray, w: np.ndarray, m: np.ndarray, lo: float = 1e-8, hi: float = 1e-3) -> TailReport:
    """Log-slope of ``w + m`` and mean ``w/m`` where ``lo <= w + m <= hi`` on ``x >= 0``."""
    s = w + m
    sel = (x >= 0) & (s >= lo) & (s <= hi) & (w > 0) & (m > 0)
    idx = np.nonzero(sel)[0]
    if idx.size < 3:
        raise TailTooShort("fewer than 3 tail nodes within the fitting band")
    # first contiguous run only: the band must be a single stretch of the tail
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    if breaks.size:
        idx = idx[: breaks[0] + 1]
    if s[idx].max() / s[idx].min() < 100.0:
        raise TailTooShort("tail window spans fewer than 2 decades")
    xs = x[idx]
    slope = np.polyfit(xs, np.log(s[idx]), 1)[0]
    ratio = float(np.mean(w[idx] / m[idx]))
    return TailReport(lambda_meas=float(slope), ratio_meas=ratio, window=(float(xs[0]), float(xs[-1])))


def tail_report(sol: WaveSolution) -> TailReport:
    return tail_fit(sol.x, sol.w, sol.m)


def turning_points(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Indices where the discrete difference of ``v`` changes sign."""
    d = np.diff(v)
    return np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0] + 1


def expected_tail(params: Params, c: Optional[float] = None) -> tuple[float, float]:
    """Linear prediction ``(-c*/2, X1/X2)`` for the tail diagnostics."""
    sd = spectral_data(params.r, params.mu)
    return -0.5 * sd.c_star, sd.tail_ratio


def level_position(x: np.ndarray, total: np.ndarray, level: float) -> float:
    """Rightmost ``x`` where ``total`` drops through ``level`` (linear interpolation)."""
    above = np.nonzero(total >= level)[0]
    if above.size == 0 or above[-1] == total.size - 1:
        raise ValueError(f"profile never drops through {level}")
    i = int(above[-1])
    return float(x[i] + (level - total[i]) * (x[i + 1] - x[i]) / (total[i + 1] - total[i]))


def profile_difference(
    first: tuple[np.ndarray, np.ndarray, np.ndarray],
    second: tuple[np.ndarray, np.ndarray, np.ndarray],
    level: float = 0.1,
    window: tuple[float, float] = (-30.0, 30.0),
) -> float:
    """Sup-distance of two ``(x, w, m)`` fronts after aligning ``w + m = level`` at 0.

    The second profile is interpolated onto the nodes of the first lying in
    ``window``.
    """
    x1, w1, m1 = (np.asarray(v, dtype=float) for v in first)
    x2, w2, m2 = (np.asarray(v, dtype=float) for v in second)
    x1 = x1 - level_position(x1, w1 + m1, level)
    x2 = x2 - level_position(x2, w2 + m2, level)
    sel = (x1 >= max(window[0], x2[0])) & (x1 <= min(window[1], x2[-1]))
    if not sel.any():
        raise ValueError("profiles do not overlap on the window")
    xs = x1[sel]
    dw = np.abs(np.interp(xs, x2, w2) - w1[sel]).max()
    dm = np.abs(np.interp(xs, x2, m2) - m1[sel]).max()
    return float(max(dw, dm))
