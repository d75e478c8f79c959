"""Closed-form quantities of the wild/mutant competition model.

The rescaled system reads::

    w_t - w_xx = w (1 - (w + m)) + mu (m - w)
    m_t - m_xx = r m (1 - (w + m) / K) + mu (w - m)

with ``r > 1`` (the mutant grows faster at low density), ``K < 1`` (the mutant
saturates earlier) and a symmetric mutation rate ``mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import KOutOfRange, MuOutOfRange, NoRootInUnitInterval, RBelowOne, SpeedBelowMinimal

ABS_TOL = 1e-12
ROOT_TOL = 1e-14


@dataclass(frozen=True)
class Equilibrium:
    w_star: float
    m_star: float

    @property
    def total(self) -> float:
        return self.w_star + self.m_star


@dataclass(frozen=True)
class Params:
    """Validated model parameters with the derived constants ``nu0`` and ``a0``.

    ``nu0`` is the level used to pin traveling waves, ``(w + m)(0) = nu0``, and
    ``a0`` is the reference half-length below which a zero-speed front cannot
    carry that much mass.  Build instances with :func:`validate_params`.
    """

    r: float
    K: float
    mu: float
    nu0: float
    a0: float
    equilibrium: Equilibrium = field(repr=False, compare=False)

    @property
    def w_star(self) -> float:
        return self.equilibrium.w_star

    @property
    def m_star(self) -> float:
        return self.equilibrium.m_star


@dataclass(frozen=True)
class SpectralData:
    h_plus: float
    X: tuple[float, float]
    c_star: float
    c: Optional[float] = None
    lambda_minus: Optional[float] = None
    lambda_plus: Optional[float] = None

    @property
    def tail_ratio(self) -> float:
        """Expected ``w/m`` in the leading edge, ``X1/X2``."""
        return self.X[0] / self.X[1]


@dataclass(frozen=True)
class RegionTag:
    region: str  # "D_l", "D_r", "both" (only at the equilibrium) or "neither"
    sign_fw: int
    sign_fm: int

    @property
    def in_D_l(self) -> bool:
        return self.region in ("D_l", "both")

    @property
    def in_D_r(self) -> bool:
        return self.region in ("D_r", "both")


def k_upper_bound(r: float, mu: float) -> float:
    return min(1.0, (r / (r - 1.0)) * (1.0 - mu / (1.0 - mu)))


def mu_upper_bound(r: float, K: float) -> float:
    return min(r / 2.0, 1.0 - 1.0 / r, 1.0 - K, K)


def validate_params(r: float, K: float, mu: float) -> Params:
    """Check the standing assumptions on ``(r, K, mu)`` and derive ``nu0``, ``a0``.

    Raises the error matching the first violated inequality: ``r > 1``, then
    ``0 < K < 1``, then the bound on ``mu``, then the sharper bound on ``K``.
    """
    r, K, mu = float(r), float(K), float(mu)
    for name, value in (("r", r), ("K", K), ("mu", mu)):
        if not math.isfinite(value):
            exc = {"r": RBelowOne, "K": KOutOfRange, "mu": MuOutOfRange}[name]
            raise exc(f"{name} must be finite, got {value!r}")
    if not r > 1.0:
        raise RBelowOne(f"r must satisfy r > 1, got r={r}")
    if not 0.0 < K < 1.0:
        raise KOutOfRange(f"K must satisfy 0 < K < 1, got K={K}")
    mu_max = mu_upper_bound(r, K)
    if not 0.0 < mu < mu_max:
        raise MuOutOfRange(
            f"mu must satisfy 0 < mu < min(r/2, 1-1/r, 1-K, K) = {mu_max:.6g}, got mu={mu}"
        )
    k_max = k_upper_bound(r, mu)
    if not K < k_max:
        raise KOutOfRange(
            f"K must satisfy 0 < K < min(1, (r/(r-1))(1 - mu/(1-mu))) = {k_max:.6g}, got K={K}"
        )
    eq = _solve_equilibrium(r, K, mu)
    nu0 = min(K * (1.0 - mu) / 4.0, eq.total / 2.0)
    a0 = math.pi / math.sqrt(2.0 * (1.0 - mu))
    return Params(r=r, K=K, mu=mu, nu0=nu0, a0=a0, equilibrium=eq)


def reaction(w, m, params: Params):
    """Reaction terms ``(f_w, f_m)``; works elementwise on arrays."""
    r, K, mu = params.r, params.K, params.mu
    fw = w * (1.0 - (w + m)) + mu * (m - w)
    fm = r * m * (1.0 - (w + m) / K) + mu * (w - m)
    return fw, fm


def reaction_jacobian(w, m, params: Params):
    """Partial derivatives ``(dfw/dw, dfw/dm, dfm/dw, dfm/dm)``."""
    r, K, mu = params.r, params.K, params.mu
    fw_w = 1.0 - 2.0 * w - m - mu
    fw_m = -w + mu
    fm_w = -r * m / K + mu
    fm_m = r * (1.0 - (w + 2.0 * m) / K) - mu
    return fw_w, fw_m, fm_w, fm_m


def _positive_root(b, q):
    """Nonnegative root of ``z**2 - b z - q = 0`` for ``q >= 0``, cancellation-free."""
    b = np.asarray(b, dtype=float)
    q = np.asarray(q, dtype=float)
    disc = np.sqrt(b * b + 4.0 * q)
    with np.errstate(divide="ignore", invalid="ignore"):
        alt = np.where(disc - b > 0, 2.0 * q / (disc - b), 0.0)
    out = np.where(b >= 0, 0.5 * (b + disc), alt)
    return out if out.ndim else float(out)


def phi_w(m, params: Params):
    """Wild-type nullcline: the ``w >= 0`` solving ``f_w(w, m) = 0``."""
    m = np.asarray(m, dtype=float)
    return _positive_root(1.0 - params.mu - m, params.mu * m)


def phi_m(w, params: Params):
    """Mutant nullcline: the ``m >= 0`` solving ``f_m(w, m) = 0``."""
    w = np.asarray(w, dtype=float)
    s = params.mu * params.K / params.r
    return _positive_root(params.K - s - w, s * w)


def equilibrium_quadratic(r: float, K: float, mu: float) -> tuple[float, float, float]:
    """Coefficients ``(A, B, C0)`` of ``C(w) = A w^2 + B w + C0``.

    ``C`` is obtained by eliminating ``m = w(1-mu-w)/(w-mu)`` from ``f_m = 0``.
    """
    s = K + 2.0 * mu - 1.0
    rk = r / K
    A = -rk * s + 2.0 * mu
    B = rk * (s * (1.0 - mu) + mu * K) - mu * (1.0 + 2.0 * mu)
    C0 = mu * (mu - r * (1.0 - mu))
    return A, B, C0


def equilibrium_polynomial(w, r: float, K: float, mu: float):
    return (r / K) * (1.0 - mu - w) * (w * (K + 2.0 * mu - 1.0) - mu * K) + mu * (2.0 * w - 1.0) * (w - mu)


def _bisect(f, lo: float, hi: float, tol: float = ROOT_TOL) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def _solve_equilibrium(r: float, K: float, mu: float) -> Equilibrium:
    A, B, C0 = equilibrium_quadratic(r, K, mu)
    poly = lambda w: (A * w + B) * w + C0  # noqa: E731
    if poly(0.0) * poly(1.0) > 0:
        raise NoRootInUnitInterval(
            f"C(w) has no sign change on (0, 1) for r={r}, K={K}, mu={mu}"
        )
    if abs(A) < ABS_TOL:
        w = _bisect(poly, 0.0, 1.0)
    else:
        disc = B * B - 4.0 * A * C0
        if disc < 0:
            raise NoRootInUnitInterval(f"C(w) has complex roots for r={r}, K={K}, mu={mu}")
        sq = math.sqrt(disc)
        q = -0.5 * (B + math.copysign(sq, B))
        roots = [q / A] + ([C0 / q] if q != 0 else [])
        inside = [x for x in roots if 0.0 < x < 1.0]
        if not inside:
            w = _bisect(poly, 0.0, 1.0)
        else:
            w = inside[0]
            # polish; the closed form can lose a few ulps
            for _ in range(3):
                d = 2.0 * A * w + B
                if d == 0:
                    break
                w -= poly(w) / d
    if not mu < w < 1.0:
        raise NoRootInUnitInterval(f"equilibrium w*={w} outside (mu, 1) for r={r}, K={K}, mu={mu}")
    m = w * (1.0 - mu - w) / (w - mu)
    return Equilibrium(w_star=w, m_star=m)


def equilibrium(params: Params) -> Equilibrium:
    """Interior steady state ``(w*, m*)`` in ``(0, 1) x (0, K)``."""
    return _solve_equilibrium(params.r, params.K, params.mu)


def m_star_bound(params: Params) -> float:
    """Upper bound on ``m*`` valid for ``mu < 1 - K``."""
    r, K, mu = params.r, params.K, params.mu
    return (mu * K / r) * (1.0 - mu) / (1.0 - mu - K * (1.0 - 2.0 * mu / r))


def principal_eigen(r: float, mu: float) -> tuple[float, tuple[float, float]]:
    """Principal eigenpair of ``M = [[1-mu, mu], [mu, r-mu]]`` (unnormalized vector)."""
    d = math.hypot(1.0 - r, 2.0 * mu)
    h_plus = 0.5 * (1.0 + r - 2.0 * mu + d)
    if r > 1.0:
        x1 = 4.0 * mu * mu / (d + (r - 1.0)) if d + (r - 1.0) > 0 else 0.0
    else:
        x1 = 1.0 - r + d
    return h_plus, (x1, 2.0 * mu)


def min_speed(r: float, mu: float) -> float:
    """Minimal traveling-wave speed ``c* = 2 sqrt(h_plus)``.

    Accepts ``mu = 0`` and ``r = 1`` so it can serve as a limit oracle.
    """
    return math.sqrt(2.0 * (1.0 + r - 2.0 * mu + math.sqrt((r - 1.0) ** 2 + 4.0 * mu * mu)))


def tail_exponents(c: float, c_star: float) -> tuple[float, float]:
    """Decay rates ``(lambda_minus, lambda_plus)`` of ``exp(lambda x)`` tails at speed ``c``."""
    if c < c_star:
        raise SpeedBelowMinimal(f"c={c} is below the minimal speed c*={c_star}")
    disc = math.sqrt(max(c * c - c_star * c_star, 0.0))
    return 0.5 * (-c - disc), 0.5 * (-c + disc)


def spectral_data(r: float, mu: float, c: Optional[float] = None) -> SpectralData:
    h_plus, X = principal_eigen(r, mu)
    c_star = min_speed(r, mu)
    if c is None:
        return SpectralData(h_plus=h_plus, X=X, c_star=c_star)
    lm, lp = tail_exponents(c, c_star)
    return SpectralData(h_plus=h_plus, X=X, c_star=c_star, c=c, lambda_minus=lm, lambda_plus=lp)


def _sign(v: float, tol: float) -> int:
    return 0 if abs(v) <= tol else (1 if v > 0 else -1)


def classify_region(w: float, m: float, params: Params, tol: float = ABS_TOL) -> RegionTag:
    ws, ms = params.w_star, params.m_star
    fw, fm = reaction(w, m, params)
    in_box = 0.0 < w < 1.0 and 0.0 < m < params.K
    left = in_box and w <= ws + tol and m >= ms - tol
    right = in_box and w >= ws - tol and m <= ms + tol
    region = "both" if left and right else "D_l" if left else "D_r" if right else "neither"
    return RegionTag(region=region, sign_fw=_sign(float(fw), tol), sign_fm=_sign(float(fm), tol))
