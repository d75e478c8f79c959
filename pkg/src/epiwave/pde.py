"""Method-of-lines simulation of the reaction-diffusion system on a bounded interval.

Diffusion uses the 3-point Laplacian with zero-flux ends (ghost node mirrored
about the boundary node, ``u[-1] = u[1]``).  With that closure the conserved
discrete mass is the trapezoidal sum, see :func:`mass`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_banded

from .errors import BadIcSpec, CflViolation, InsufficientSamples, NonFiniteField
from .model import Params, min_speed, reaction

SCHEMES = ("explicit", "semi_implicit")
DEFAULT_THETA = 0.1


@dataclass(frozen=True)
class Grid:
    x_min: float
    dx: float
    n: int

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got {self.dx}")
        if self.n < 3:
            raise ValueError(f"grid needs at least 3 nodes, got {self.n}")

    @classmethod
    def from_interval(cls, x_min: float, x_max: float, dx: float) -> "Grid":
        n = int(round((x_max - x_min) / dx)) + 1
        return cls(x_min=x_min, dx=(x_max - x_min) / (n - 1), n=n)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)


def auto_grid(params: Params, t_end: float, dx: float = 0.1, x_min: float = 0.0, margin: float = 100.0) -> Grid:
    """Grid long enough that a front launched near ``x_min`` stays off the far end."""
    length = min_speed(params.r, params.mu) * t_end + margin
    return Grid.from_interval(x_min, x_min + length, dx)


@dataclass
class FieldPair:
    w: np.ndarray
    m: np.ndarray

    def copy(self) -> "FieldPair":
        return FieldPair(self.w.copy(), self.m.copy())

    @property
    def total(self) -> np.ndarray:
        return self.w + self.m


@dataclass
class SimState:
    t: float
    fields: FieldPair
    grid: Grid
    params: Params
    scheme: str = "semi_implicit"


# initial conditions -------------------------------------------------------

@dataclass(frozen=True)
class Heaviside:
    x0: float = 0.0
    w_level: float = 1.0
    m_level: float = 0.0


@dataclass(frozen=True)
class EquilibriumPlateau:
    x0: float = 0.0


@dataclass(frozen=True)
class CustomProfile:
    w: Sequence[float]
    m: Sequence[float]


IcSpec = Union[Heaviside, EquilibriumPlateau, CustomProfile]


def init_state(grid: Grid, params: Params, ic: IcSpec, scheme: str = "semi_implicit") -> SimState:
    x = grid.x
    if isinstance(ic, Heaviside):
        if ic.w_level < 0 or ic.m_level < 0:
            raise BadIcSpec("Heaviside levels must be nonnegative")
        left = x <= ic.x0
        w = np.where(left, float(ic.w_level), 0.0)
        m = np.where(left, float(ic.m_level), 0.0)
    elif isinstance(ic, EquilibriumPlateau):
        left = x <= ic.x0
        w = np.where(left, params.w_star, 0.0)
        m = np.where(left, params.m_star, 0.0)
    elif isinstance(ic, CustomProfile):
        w = np.array(ic.w, dtype=float)
        m = np.array(ic.m, dtype=float)
        if w.shape != (grid.n,) or m.shape != (grid.n,):
            raise BadIcSpec(f"custom profiles must have {grid.n} nodes")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m))):
            raise BadIcSpec("custom profiles must be finite")
        if np.any(w < 0) or np.any(m < 0):
            raise BadIcSpec("custom profiles must be nonnegative")
    else:
        raise BadIcSpec(f"unknown initial condition {ic!r}")
    if scheme not in SCHEMES:
        raise BadIcSpec(f"unknown scheme {scheme!r}")
    return SimState(t=0.0, fields=FieldPair(w, m), grid=grid, params=params, scheme=scheme)


# time stepping ------------------------------------------------------------

def laplacian(u: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(u)
    out[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
    out[0] = 2.0 * (u[1] - u[0])
    out[-1] = 2.0 * (u[-2] - u[-1])
    return out / (dx * dx)


def mass(u: np.ndarray, dx: float) -> float:
    """Trapezoidal mass, invariant under the zero-flux discrete Laplacian."""
    return dx * (u.sum() - 0.5 * (u[0] + u[-1]))


def _implicit_diffusion_matrix(n: int, dx: float, dt: float) -> np.ndarray:
    k = dt / (dx * dx)
    ab = np.zeros((3, n))
    ab[1] = 1.0 + 2.0 * k
    ab[0, 1:] = -k
    ab[2, :-1] = -k
    ab[0, 1] = -2.0 * k
    ab[2, -2] = -2.0 * k
    return ab


def check_explicit_dt(dt: float, dx: float, r: float) -> None:
    if dt > 0.5 * dx * dx * (1 + 1e-12):
        raise CflViolation(f"explicit scheme needs dt <= dx^2/2 = {0.5 * dx * dx:.3g}, got {dt}")
    if dt > 0.1 / max(1.0, r) * (1 + 1e-12):
        raise CflViolation(f"explicit scheme needs dt <= 0.1/max(1, r) = {0.1 / max(1.0, r):.3g}, got {dt}")


class _Stepper:
    """Caches the implicit diffusion matrix across steps of one run."""

    def __init__(self, grid: Grid, params: Params, dt: float, scheme: str, with_reaction: bool = True):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if scheme == "explicit":
            check_explicit_dt(dt, grid.dx, params.r)
        self.grid, self.params, self.dt, self.scheme = grid, params, dt, scheme
        self.with_reaction = with_reaction
        self._ab = _implicit_diffusion_matrix(grid.n, grid.dx, dt) if scheme == "semi_implicit" else None

    def __call__(self, state: SimState) -> SimState:
        w, m = state.fields.w, state.fields.m
        dt, dx = self.dt, self.grid.dx
        if self.with_reaction:
            fw, fm = reaction(w, m, self.params)
        else:
            fw = fm = 0.0
        if self.scheme == "explicit":
            w_new = w + dt * (laplacian(w, dx) + fw)
            m_new = m + dt * (laplacian(m, dx) + fm)
        else:
            rhs = np.column_stack([w + dt * fw, m + dt * fm])
            sol = solve_banded((1, 1), self._ab, rhs, check_finite=False)
            w_new, m_new = sol[:, 0], sol[:, 1]
        if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(m_new))):
            raise NonFiniteField(f"non-finite field after step at t={state.t + dt:.6g}")
        return SimState(
            t=state.t + dt,
            fields=FieldPair(w_new, m_new),
            grid=state.grid,
            params=state.params,
            scheme=self.scheme,
        )


def step(state: SimState, dt: float, scheme: Optional[str] = None, with_reaction: bool = True) -> SimState:
    """Advance one time step.

    ``explicit``: forward Euler on diffusion and reaction.
    ``semi_implicit``: backward Euler on diffusion (one tridiagonal solve per
    component), forward Euler on reaction.
    """
    scheme = scheme or state.scheme
    return _Stepper(state.grid, state.params, dt, scheme, with_reaction)(state)


# observers ----------------------------------------------------------------

def front_position(fields: FieldPair, grid: Grid, theta: float = DEFAULT_THETA) -> Optional[float]:
    """Rightmost ``x`` with ``w + m >= theta``, linearly interpolated; None if absent."""
    s = fields.w + fields.m
    above = np.nonzero(s >= theta)[0]
    if above.size == 0:
        return None
    i = int(above[-1])
    x = grid.x_min + i * grid.dx
    if i == grid.n - 1:
        return x
    s0, s1 = s[i], s[i + 1]
    return x + grid.dx * (s0 - theta) / (s0 - s1)


@dataclass
class FrontTrack:
    theta: float = DEFAULT_THETA
    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    speed: Optional[float] = None
    r2: Optional[float] = None

    def add(self, t: float, x: Optional[float]) -> None:
        if x is None:
            return
        if self.t and t < self.t[-1]:
            raise ValueError("front samples must be time-ordered")
        self.t.append(float(t))
        self.x.append(float(x))


class FrontTracker:
    """Observer sampling the front position every ``every`` steps."""

    def __init__(self, theta: float = DEFAULT_THETA, every: int = 25):
        self.track = FrontTrack(theta=theta)
        self.every = every

    def __call__(self, state: SimState) -> None:
        self.track.add(state.t, front_position(state.fields, state.grid, self.track.theta))


class SnapshotRecorder:
    def __init__(self, every: int = 500):
        self.every = every
        self.snapshots: list[tuple[float, FieldPair]] = []

    def __call__(self, state: SimState) -> None:
        self.snapshots.append((state.t, state.fields.copy()))


class BoxMonitor:
    """Records the worst excursion of ``(w, m)`` outside ``[0, 1] x [0, K]``."""

    def __init__(self, every: int = 1):
        self.every = every
        self.worst = 0.0
        self.steps_checked = 0
        self.w_range = (math.inf, -math.inf)
        self.m_range = (math.inf, -math.inf)

    def __call__(self, state: SimState) -> None:
        w, m, K = state.fields.w, state.fields.m, state.params.K
        lo_w, hi_w, lo_m, hi_m = float(w.min()), float(w.max()), float(m.min()), float(m.max())
        excess = max(-lo_w, hi_w - 1.0, -lo_m, hi_m - K, 0.0)
        self.worst = max(self.worst, excess)
        self.w_range = (min(self.w_range[0], lo_w), max(self.w_range[1], hi_w))
        self.m_range = (min(self.m_range[0], lo_m), max(self.m_range[1], hi_m))
        self.steps_checked += 1


def estimate_speed(track: FrontTrack, fit_window_fraction: float = 0.5, min_samples: int = 10) -> tuple[float, float]:
    """Least-squares slope of ``x_f(t)`` over the trailing part of the track.

    Returns ``(speed, r2)``.  The window is the last ``fit_window_fraction``
    of the tracked time interval.
    """
    t = np.asarray(track.t, dtype=float)
    x = np.asarray(track.x, dtype=float)
    if t.size == 0:
        raise InsufficientSamples("empty front track")
    t_cut = t[-1] - fit_window_fraction * (t[-1] - t[0])
    sel = t >= t_cut - 1e-12 * max(1.0, abs(t_cut))
    if sel.sum() < min_samples:
        raise InsufficientSamples(f"need >= {min_samples} samples in the fit window, got {int(sel.sum())}")
    tt, xx = t[sel], x[sel]
    slope, intercept = np.polyfit(tt, xx, 1)
    resid = xx - (slope * tt + intercept)
    ss_tot = float(np.sum((xx - xx.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


# driver -------------------------------------------------------------------

@dataclass
class SimResult:
    state: SimState
    track: FrontTrack
    snapshots: list
    steps: int


def run(
    params: Params,
    grid: Grid,
    ic: IcSpec,
    t_end: float,
    dt: float,
    scheme: str = "semi_implicit",
    observers: Sequence[Callable] = (),
    theta: float = DEFAULT_THETA,
    track_every: Optional[int] = None,
    with_reaction: bool = True,
) -> SimResult:
    """Integrate to ``t_end`` and return the final state with its front track.

    A :class:`FrontTracker` is always attached (sampling every ``track_every``
    steps, default every 0.5 time units).  Extra observers are called after
    every ``obs.every`` accepted steps (default 1) and once on the initial state.
    """
    state = init_state(grid, params, ic, scheme)
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    if n_steps and abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    track_every = track_every or max(1, int(round(0.5 / dt)))
    tracker = FrontTracker(theta=theta, every=track_every)
    all_obs = [tracker, *observers]
    for obs in all_obs:
        obs(state)
    snapshots = []
    if n_steps:
        stepper = _Stepper(grid, params, dt, scheme, with_reaction)
        for k in range(1, n_steps + 1):
            state = stepper(state)
            for obs in all_obs:
                if k % getattr(obs, "every", 1) == 0 or k == n_steps:
                    obs(state)
    for obs in observers:
        if isinstance(obs, SnapshotRecorder):
            snapshots = obs.snapshots
    return SimResult(state=state, track=tracker.track, snapshots=snapshots, steps=n_steps)


def measure_speed(result: SimResult, fit_window_fraction: float = 0.5) -> float:
    speed, r2 = estimate_speed(result.track, fit_window_fraction)
    result.track.speed, result.track.r2 = speed, r2
    return speed


def shifted_profile(state: SimState, level: float) -> tuple[np.ndarray, FieldPair]:
    """Coordinates shifted so that ``w + m`` crosses ``level`` at ``x = 0``."""
    xf = front_position(state.fields, state.grid, level)
    if xf is None:
        raise ValueError(f"w + m never reaches {level}")
    return state.grid.x - xf, state.fields
