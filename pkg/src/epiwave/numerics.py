"""Numerical kernels: banded linear solves, damped Newton, explicit Runge-Kutta."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import (
    LineSearchFailed,
    MaxIterationsExceeded,
    SingularCore,
    SingularJacobian,
    SingularSchurComplement,
    StepSizeUnderflow,
    ZeroPivot,
)


# ---------------------------------------------------------------------------
# linear systems
# ---------------------------------------------------------------------------

@dataclass
class TridiagonalSystem:
    sub: np.ndarray    # length n-1
    diag: np.ndarray   # length n
    sup: np.ndarray    # length n-1
    rhs: np.ndarray    # length n, or (n, k) for several right-hand sides

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.sup = np.asarray(self.sup, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.diag.shape[0]
        if self.sub.shape != (n - 1,) or self.sup.shape != (n - 1,) or self.rhs.shape[0] != n:
            raise ValueError("inconsistent tridiagonal lengths")

    def banded(self) -> np.ndarray:
        n = self.diag.shape[0]
        ab = np.zeros((3, n))
        ab[0, 1:] = self.sup
        ab[1] = self.diag
        ab[2, :-1] = self.sub
        return ab

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Solve ``A x = rhs`` for a tridiagonal ``A``.

    Raises :class:`ZeroPivot` when elimination meets an exactly singular pivot.
    """
    try:
        return solve_banded((1, 1), system.banded(), system.rhs, check_finite=True)
    except LinAlgError as exc:
        raise ZeroPivot(str(exc)) from exc


@dataclass
class BorderedBandedSystem:
    """``[[A, b], [d^T, e]] [x; y] = [f; g]`` with banded ``A`` and scalar ``y``.

    ``core`` holds ``A`` in LAPACK diagonal-ordered storage
    (``core[u + i - j, j] = A[i, j]``) with ``lower``/``upper`` bandwidths.
    """

    core: np.ndarray
    lower: int
    upper: int
    border_col: np.ndarray
    border_row: np.ndarray
    corner: float
    rhs: np.ndarray  # length n + 1

    @property
    def n(self) -> int:
        return self.core.shape[1]

    def dense(self) -> np.ndarray:
        n, l, u = self.n, self.lower, self.upper
        A = np.zeros((n + 1, n + 1))
        for k in range(-l, u + 1):
            band = self.core[u - k]
            if k >= 0:
                idx = np.arange(n - k)
                A[idx, idx + k] = band[k:]
            else:
                idx = np.arange(-k, n)
                A[idx, idx + k] = band[: n + k]
        A[:n, n] = self.border_col
        A[n, :n] = self.border_row
        A[n, n] = self.corner
        return A

    def matvec(self, z: np.ndarray) -> np.ndarray:
        return self.dense() @ z


def banded_from_dense(A: np.ndarray, lower: int, upper: int) -> np.ndarray:
    n = A.shape[0]
    ab = np.zeros((lower + upper + 1, n))
    for i in range(n):
        for j in range(max(0, i - lower), min(n, i + upper + 1)):
            ab[upper + i - j, j] = A[i, j]
    return ab


def solve_bordered_banded(system: BorderedBandedSystem) -> np.ndarray:
    """Block elimination for a banded system bordered by one row and column."""
    n = system.n
    f, g = system.rhs[:n], system.rhs[n]
    both = np.column_stack([f, system.border_col])
    try:
        sol = solve_banded((system.lower, system.upper), system.core, both, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise SingularCore(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularCore("banded core solve produced non-finite values")
    af, ab = sol[:, 0], sol[:, 1]
    schur = system.corner - system.border_row @ ab
    scale = abs(system.corner) + np.abs(system.border_row) @ np.abs(ab) + 1e-300
    if abs(schur) <= 1e-14 * scale:
        raise SingularSchurComplement(f"Schur complement {schur:.3e} vanishes")
    y = (g - system.border_row @ af) / schur
    return np.append(af - ab * y, y)


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------

def _dense_solve(J, rhs):
    return np.linalg.solve(np.atleast_2d(J), np.atleast_1d(rhs))


@dataclass
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 8
    linear_solver: Callable = _dense_solve


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norms: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    damping: list = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return self.residual_norms[-1]


def newton_solve(residual_fn, jacobian_fn, x0, options: Optional[NewtonOptions] = None) -> NewtonResult:
    """Damped Newton iteration on ``F(x) = 0`` in the sup-norm.

    Each step is halved (at most ``max_halvings`` times) until the residual
    norm decreases.  ``jacobian_fn`` may return anything that
    ``options.linear_solver(J, rhs)`` accepts.
    """
    opts = options or NewtonOptions()
    x = np.array(x0, dtype=float, copy=True)
    F = np.atleast_1d(residual_fn(x))
    fnorm = float(np.max(np.abs(F)))
    res = NewtonResult(x=x, iterations=0, residual_norms=[fnorm])
    while fnorm > opts.tol:
        if res.iterations >= opts.max_iter:
            raise MaxIterationsExceeded(
                f"Newton did not reach tol={opts.tol:g} in {opts.max_iter} iterations "
                f"(|F|={fnorm:.3e})",
                trace=res.residual_norms,
            )
        try:
            dx = opts.linear_solver(jacobian_fn(x), -F)
        except (LinAlgError, ArithmeticError) as exc:
            raise SingularJacobian(str(exc)) from exc
        dx = np.reshape(dx, x.shape)
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian("Newton step is not finite")
        t = 1.0
        for _ in range(opts.max_halvings + 1):
            x_try = x + t * dx
            F_try = np.atleast_1d(residual_fn(x_try))
            n_try = float(np.max(np.abs(F_try)))
            if np.isfinite(n_try) and n_try < fnorm:
                break
            t *= 0.5
        else:
            raise LineSearchFailed(
                f"no decrease of |F|={fnorm:.3e} after {opts.max_halvings} halvings",
                trace=res.residual_norms,
            )
        x, F, fnorm = x_try, F_try, n_try
        res.iterations += 1
        res.residual_norms.append(fnorm)
        res.step_norms.append(float(np.max(np.abs(t * dx))))
        res.damping.append(t)
    res.x = x
    return res


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------

@dataclass
class OdeTrajectory:
    t: np.ndarray      # strictly monotone abscissae
    y: np.ndarray      # shape (len(t), dim)
    f: np.ndarray      # derivative at each abscissa, for Hermite dense output
    n_rejected: int = 0
    method: str = ""

    def __call__(self, s) -> np.ndarray:
        """Cubic Hermite interpolation between accepted steps."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = self.t
        sign = 1.0 if t[-1] >= t[0] else -1.0
        ts = sign * t
        idx = np.clip(np.searchsorted(ts, sign * s, side="right") - 1, 0, len(t) - 2)
        t0, t1 = t[idx], t[idx + 1]
        h = (t1 - t0)[:, None]
        th = ((s - t0) / (t1 - t0))[:, None]
        y0, y1 = self.y[idx], self.y[idx + 1]
        f0, f1 = self.f[idx], self.f[idx + 1]
        h00 = 2 * th**3 - 3 * th**2 + 1
        h10 = th**3 - 2 * th**2 + th
        h01 = -2 * th**3 + 3 * th**2
        h11 = th**3 - th**2
        return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


# Dormand-Prince 5(4)
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


def _rk4_step(rhs, t, y, h, k1=None):
    k1 = rhs(t, y) if k1 is None else k1
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_ode(
    rhs: Callable,
    y0: Sequence[float],
    span: tuple[float, float],
    tolerance: float = 1e-8,
    *,
    step: Optional[float] = None,
    first_step: Optional[float] = None,
    max_steps: int = 1_000_000,
    stop: Optional[Callable] = None,
) -> OdeTrajectory:
    """Integrate ``y' = rhs(t, y)`` over ``span`` (which may run backwards).

    With ``step`` given, classical fixed-step RK4 is used (the final step is
    shortened to land on ``span[1]``).  Otherwise an adaptive Dormand-Prince
    5(4) pair keeps the per-step local error estimate below ``tolerance``
    (mixed absolute/relative).  ``stop(t, y)`` returning True ends the
    integration after the current step.
    """
    t0, t1 = float(span[0]), float(span[1])
    direction = 1.0 if t1 >= t0 else -1.0
    y = np.array(y0, dtype=float)
    ts, ys, fs = [t0], [y.copy()], [np.asarray(rhs(t0, y), dtype=float)]
    t = t0
    if step is not None:
        h = abs(step) * direction
        nsteps = int(math.ceil(abs(t1 - t0) / abs(step) - 1e-9))
        for i in range(nsteps):
            hh = h if i < nsteps - 1 else (t1 - t)
            y = _rk4_step(rhs, t, y, hh, fs[-1])
            t = t0 + (i + 1) * h if i < nsteps - 1 else t1
            ts.append(t)
            ys.append(y)
            fs.append(np.asarray(rhs(t, y), dtype=float))
            if not np.all(np.isfinite(y)):
                raise StepSizeUnderflow(f"solution blew up at t={t}")
            if stop is not None and stop(t, y):
                break
        return OdeTrajectory(np.array(ts), np.array(ys), np.array(fs), method="rk4")

    span_len = abs(t1 - t0)
    h = direction * (first_step or min(1e-2, span_len) or 1e-2)
    n_rej = 0
    k = [None] * 7
    k[0] = fs[0]
    for _ in range(max_steps):
        if direction * (t - t1) >= 0:
            break
        if direction * (t + h - t1) > 0:
            h = t1 - t
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_DP_A[i], k[:i]))
            k[i] = np.asarray(rhs(t + _DP_C[i] * h, yi), dtype=float)
        y_new = y + h * sum(b * kj for b, kj in zip(_DP_B5, k) if b != 0.0)
        err_vec = h * sum(e * kj for e, kj in zip(_DP_E, k) if e != 0.0)
        scale = tolerance * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err = float(np.max(np.abs(err_vec) / scale)) if y.size else 0.0
        if not np.isfinite(err):
            err = 1e10
        if err <= 1.0:
            t = t + h
            y = y_new
            k[0] = k[6]  # first-same-as-last
            ts.append(t)
            ys.append(y.copy())
            fs.append(k[6].copy())
            factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** (-0.2))
            h *= factor
            if stop is not None and stop(t, y):
                break
        else:
            n_rej += 1
            h *= max(0.1, 0.9 * err ** (-0.2))
        if abs(h) < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.6g}")
    else:
        raise StepSizeUnderflow(f"exceeded {max_steps} steps before t={t1}")
    return OdeTrajectory(np.array(ts), np.array(ys), np.array(fs), n_rejected=n_rej, method="dopri5")
