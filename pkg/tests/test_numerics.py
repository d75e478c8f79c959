import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiwave.errors import LineSearchFailed, MaxIterationsExceeded, SingularCore, SingularSchurComplement, ZeroPivot
from epiwave.numerics import (
    BorderedBandedSystem,
    NewtonOptions,
    TridiagonalSystem,
    banded_from_dense,
    integrate_ode,
    newton_solve,
    solve_bordered_banded,
    solve_tridiagonal,
)


def random_tridiagonal(rng, n):
    sub = rng.uniform(-1, 1, n - 1)
    sup = rng.uniform(-1, 1, n - 1)
    diag = 2.5 + rng.uniform(0, 1, n)  # strictly diagonally dominant
    return TridiagonalSystem(sub, diag, sup, rng.normal(size=n))


def random_bordered(rng, n, lo=2, up=2):
    A = np.zeros((n, n))
    for k in range(-lo, up + 1):
        A += np.diag(rng.uniform(-1, 1, n - abs(k)), k)
    A += np.diag(np.full(n, lo + up + 1.0))
    col, row = rng.normal(size=n), rng.normal(size=n)
    return BorderedBandedSystem(banded_from_dense(A, lo, up), lo, up, col, row, 5.0 + rng.normal(), rng.normal(size=n + 1))


# tridiagonal -------------------------------------------------------------------

def test_identity():
    b = np.arange(5.0)
    sys_ = TridiagonalSystem(np.zeros(4), np.ones(5), np.zeros(4), b)
    assert np.array_equal(solve_tridiagonal(sys_), b)


def test_random_dominant_matches_dense(rng):
    s = random_tridiagonal(rng, 50)
    x = solve_tridiagonal(s)
    assert np.max(np.abs(x - np.linalg.solve(s.dense(), s.rhs))) <= 1e-12
    assert np.max(np.abs(s.dense() @ x - s.rhs)) <= 1e-12 * np.max(np.abs(s.rhs))


def test_dirichlet_laplacian_parabola():
    # -u'' = 1 on (0, 1), u(0) = u(1) = 0: the 3-point stencil is exact on quadratics
    n = 99
    h = 1.0 / (n + 1)
    s = TridiagonalSystem(-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1), h * h * np.ones(n))
    x = h * np.arange(1, n + 1)
    assert np.max(np.abs(solve_tridiagonal(s) - 0.5 * x * (1 - x))) <= 1e-12


def test_zero_pivot():
    s = TridiagonalSystem(np.zeros(2), np.array([1.0, 0.0, 1.0]), np.zeros(2), np.ones(3))
    with pytest.raises(ZeroPivot):
        solve_tridiagonal(s)


def test_inconsistent_lengths():
    with pytest.raises(ValueError):
        TridiagonalSystem(np.zeros(3), np.ones(3), np.zeros(2), np.ones(3))


# bordered ----------------------------------------------------------------------

def test_bordered_matches_dense(rng):
    s = random_bordered(rng, 100)
    x = solve_bordered_banded(s)
    assert np.max(np.abs(x - np.linalg.solve(s.dense(), s.rhs))) <= 1e-10


def test_bordered_with_zero_border_is_banded_solve(rng):
    s = random_bordered(rng, 30)
    s.border_col[:] = 0.0
    s.border_row[:] = 0.0
    s.corner = 2.0
    x = solve_bordered_banded(s)
    A = s.dense()[:30, :30]
    assert np.allclose(x[:30], np.linalg.solve(A, s.rhs[:30]), atol=1e-12)
    assert x[30] == pytest.approx(s.rhs[30] / 2.0)


def test_bordered_singular_cases(rng):
    s = random_bordered(rng, 10)
    s.core[:, :] = 0.0
    with pytest.raises(SingularCore):
        solve_bordered_banded(s)
    s = random_bordered(rng, 10)
    s.border_col[:] = 0.0
    s.border_row[:] = 0.0
    s.corner = 0.0
    with pytest.raises(SingularSchurComplement):
        solve_bordered_banded(s)


def test_matvec_roundtrip(rng):
    s = random_bordered(rng, 40)
    x = solve_bordered_banded(s)
    assert np.max(np.abs(s.matvec(x) - s.rhs)) <= 1e-10 * np.max(np.abs(s.rhs))


@given(st.integers(3, 60), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_bordered_property(n, seed):
    s = random_bordered(np.random.default_rng(seed), n)
    assert np.allclose(solve_bordered_banded(s), np.linalg.solve(s.dense(), s.rhs), atol=1e-10)


# Newton ------------------------------------------------------------------------

def test_newton_linear():
    res = newton_solve(lambda x: x, lambda x: np.eye(1), [0.7])
    assert res.iterations <= 2 and abs(res.x[0]) <= 1e-10


def test_newton_sqrt2_quadratic_convergence():
    opts = NewtonOptions(tol=1e-15)
    res = newton_solve(lambda x: x**2 - 2, lambda x: np.diag(2 * x), [1.0], opts)
    assert res.x[0] == pytest.approx(math.sqrt(2), abs=1e-15)
    errs = [abs(n) for n in res.residual_norms if n > 1e-14]
    ratios = [e1 / e0**2 for e0, e1 in zip(errs, errs[1:])]
    assert max(ratios) < 1.0  # e_{k+1} <= C e_k^2 with C ~ 1/(2 sqrt 2)


def test_newton_superlinear_tail():
    F = lambda x: np.array([x[0] ** 3 + x[1] - 1, x[1] ** 3 - x[0] + 1])  # noqa: E731
    J = lambda x: np.array([[3 * x[0] ** 2, 1.0], [-1.0, 3 * x[1] ** 2]])  # noqa: E731
    res = newton_solve(F, J, [0.5, 0.5], NewtonOptions(tol=1e-14))
    r = res.residual_norms[-4:]
    assert r[2] / r[1] < r[1] / r[0]


def test_newton_limits():
    with pytest.raises(MaxIterationsExceeded) as info:
        newton_solve(lambda x: x**2 + 1, lambda x: np.diag(2 * x + 1e-3), [3.0], NewtonOptions(max_iter=3))
    assert len(info.value.trace) >= 1
    # wrong-sign Jacobian: every trial step increases |F|
    with pytest.raises(LineSearchFailed):
        newton_solve(lambda x: x - 1, lambda x: -np.eye(1), [0.0])


# ODE -----------------------------------------------------------------------------

def test_constant_solution():
    traj = integrate_ode(lambda t, y: np.zeros_like(y), [1.0], (0, 5), 1e-10)
    assert np.all(traj.y == 1.0)


def test_exponential_adaptive():
    traj = integrate_ode(lambda t, y: y, [1.0], (0, 1), 1e-10)
    assert abs(traj.y[-1, 0] - math.e) <= 1e-9
    assert traj.t[-1] == 1.0
    assert np.all(np.diff(traj.t) > 0)


def test_exponential_backward():
    traj = integrate_ode(lambda t, y: y, [1.0], (0, -1), 1e-10)
    assert abs(traj.y[-1, 0] - math.exp(-1)) <= 1e-9
    assert np.all(np.diff(traj.t) < 0)


def test_tolerance_refinement_improves_accuracy():
    errs = [abs(integrate_ode(lambda t, y: y, [1.0], (0, 1), tol).y[-1, 0] - math.e) for tol in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_rk4_order_four():
    hs = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = [abs(integrate_ode(lambda t, y: y, [1.0], (0, 1), step=h).y[-1, 0] - math.e) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 4.0) <= 0.1


def test_dense_output_accuracy():
    traj = integrate_ode(lambda t, y: np.array([y[1], -y[0]]), [0.0, 1.0], (0, 6), 1e-11)
    s = np.linspace(0, 6, 301)
    assert np.max(np.abs(traj(s)[:, 0] - np.sin(s))) <= 1e-6


def test_stop_condition():
    traj = integrate_ode(lambda t, y: y, [1.0], (0, 10), 1e-8, stop=lambda t, y: y[0] > 2)
    assert traj.t[-1] < 1.0 and traj.y[-1, 0] > 2
