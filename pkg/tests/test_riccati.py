import cmath

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ivi.errors import DomainError
from ivi.kernels import ConstantKernel, ShiftedFractionalKernel
from ivi.params import ModelParams, table1_case
from ivi.riccati import char_fn, laplace_U, riccati_solve


def flat_model(rho=-0.7, a=0.02, V0=0.02):
    # Case-1 b and c with K = 1: classical Heston
    return ModelParams(a=a, b=-0.3, c=0.3, rho=rho, V0=V0, kernel=ConstantKernel(1.0))


def heston_closed(p, v, w, T):
    """Textbook Heston: psi(T) and int_0^T psi for psi' = F(psi), psi(0) = 0."""
    beta = -p.b - p.rho * p.c * v
    A = w + 0.5 * (v * v - v)
    d = cmath.sqrt(beta * beta - 2 * p.c**2 * A)
    g = (beta - d) / (beta + d)
    e = cmath.exp(-d * T)
    psi = (beta - d) / p.c**2 * (1 - e) / (1 - g * e)
    ipsi = ((beta - d) * T - 2 * cmath.log((1 - g * e) / (1 - g))) / p.c**2
    return psi, ipsi


def heston_ode(p, v, w, grid):
    A = w + 0.5 * (v * v - v)
    B = p.rho * p.c * v + p.b
    C = 0.5 * p.c**2

    def rhs(t, y):
        z = complex(y[0], y[1])
        f = A + B * z + C * z * z
        return [f.real, f.imag]

    sol = solve_ivp(rhs, (0, grid[-1]), [0.0, 0.0], t_eval=grid, method="RK45", rtol=1e-12, atol=1e-14)
    return sol.y[0] + 1j * sol.y[1]


def test_zero_arguments():
    sol = riccati_solve(table1_case(2), 0.0, 0.0, 200)
    assert np.all(sol.psi == 0) and sol.exponent == 0
    assert char_fn(table1_case(2), 0.0, 0.0, 200).value == 1
    assert laplace_U(table1_case(3), 0.0, 200) == 1.0


@pytest.mark.parametrize("v,w", [(0.0, -1.0), (0.5 + 2j, -1.0), (0.5 + 2j, 0.0), (3j, 0.0)])
def test_flat_kernel_against_ode(v, w):
    p = flat_model()
    sol = riccati_solve(p, v, w, 2000)
    ref = heston_ode(p, v, w, sol.grid)
    assert np.max(np.abs(sol.psi - ref)) < 1e-6


@pytest.mark.parametrize("v", [0.0, 0.5 + 2j, 1j, 2.5j, 0.5 - 7j])
@pytest.mark.parametrize("w", [0.0, -1.0])
def test_flat_kernel_against_closed_form(v, w):
    p = flat_model()
    psi_T, ipsi = heston_closed(p, v, w, p.T)
    sol = riccati_solve(p, v, w, 2000)
    if abs(v) < 3:
        assert abs(sol.psi[-1] - psi_T) < 1e-6
    else:
        # second order in h, the error grows like |v|^2 h^2
        assert abs(sol.psi[-1] - psi_T) < 2e-6
    cf = np.exp(p.V0 * psi_T + p.a * ipsi)
    assert abs(char_fn(p, v, w, 2000).value - cf) < 1e-6


def test_vectorized_matches_scalar():
    p = table1_case(1)
    vs = np.array([0.5 + 1j, 0.5 + 4j, 0.2 - 1j])
    vec = char_fn(p, vs, -0.3, 400).value
    for v, val in zip(vs, vec):
        assert char_fn(p, v, -0.3, 400).value == pytest.approx(val, rel=1e-14)


@pytest.mark.parametrize("case", [1, 2, 3, 4])
@pytest.mark.parametrize("v,w", [(0.0, -1.0), (0.5 + 2j, 0.0), (1.0, -2.0), (0.3 + 10j, -0.5 + 3j)])
def test_sign_and_origin(case, v, w):
    sol = riccati_solve(table1_case(case), v, w, 500)
    assert sol.psi[0] == 0
    assert np.max(sol.psi.real) <= 1e-10


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_martingale_char_fn(case):
    assert abs(char_fn(table1_case(case), 1.0, 0.0).value - 1) < 1e-6


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_laplace_bounded(case):
    for w in (-0.1, -1.0, -10.0):
        val = laplace_U(table1_case(case), w, 500)
        assert 0 < val <= 1


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_grid_doubling_monotone(case):
    p = table1_case(case)
    ms = [250, 500, 1000, 2000, 4000]
    ex = [riccati_solve(p, 0.0, -1.0, m).exponent for m in ms]
    diffs = [abs(a - b) for a, b in zip(ex, ex[1:])]
    assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:])), diffs


def test_self_convergence_order_h01():
    p = ModelParams(a=0.04, b=0.0, c=0.7, rho=-0.7, V0=0.02, kernel=ShiftedFractionalKernel(H=0.1))
    ms = [200, 400, 800, 1600]
    sols = [riccati_solve(p, 0.0, -1.0, m).psi for m in ms]
    # compare on the coarse grid
    diffs = [np.max(np.abs(a - b[:: 2])) for a, b in zip(sols, sols[1:])]
    orders = [np.log2(d1 / d2) for d1, d2 in zip(diffs, diffs[1:])]
    assert all(o > 0.9 for o in orders), orders


def test_zero_model_laplace():
    p = ModelParams(a=0.0, b=-0.3, c=0.3, rho=0.0, V0=0.0, kernel=ShiftedFractionalKernel(H=0.1))
    assert laplace_U(p, -1.0, 200) == 1.0


def test_strip_enforced():
    p = table1_case(2)
    with pytest.raises(DomainError):
        riccati_solve(p, 0.0, 0.5, 10)
    with pytest.raises(DomainError):
        riccati_solve(p, 1.5, 0.0, 10)
    with pytest.raises(DomainError):
        riccati_solve(p, -0.1 + 1j, 0.0, 10)
    with pytest.raises(DomainError):
        laplace_U(p, 0.3)
    with pytest.raises(DomainError):
        riccati_solve(p, 0.0, 0.0, 0)
