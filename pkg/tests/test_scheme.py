import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ivi.errors import DomainError, NonnegativityError
from ivi.igdist import IGParams, ig_char, ig_cdf, ig_moment
from ivi.kernels import ConstantKernel, ShiftedFractionalKernel, g0_integral, kernel_weights
from ivi.params import ModelParams, table1_case
from ivi.scheme import (
    Discretization,
    Draws,
    SchemeState,
    alpha_next,
    explicit_increment,
    explicit_step,
    heston_step,
    ivi_increment,
    ivi_step,
    one_step_char_check,
    psi_hat,
    psi_hat_residual,
    simulate,
    simulate_path,
)


def zero_model(**kw):
    base = dict(a=0.0, b=-0.3, c=0.3, rho=-0.7, V0=0.0, kernel=ShiftedFractionalKernel(H=0.1))
    base.update(kw)
    return ModelParams(**base)


def one_step_params(p, n):
    disc = Discretization.build(p, n)
    k0, a0 = disc.k0, disc.g0_panels[0]
    return IGParams(a0 / (1 - p.b * k0), (a0 / (p.c * k0)) ** 2), disc


def test_alpha0_is_first_panel():
    p = table1_case(2)
    state = SchemeState(Discretization.build(p, 10), paths=3)
    a0 = alpha_next(state)
    np.testing.assert_allclose(a0, g0_integral(p.curve, 0.0, 0.1), rtol=1e-14)


def test_alpha_zero_system():
    state = SchemeState(Discretization.build(zero_model(), 10), paths=2)
    assert np.all(alpha_next(state) == 0)


def test_alpha1_hand_set():
    p = table1_case(2)
    state = SchemeState(Discretization.build(p, 10), paths=1)
    alpha_next(state)
    state.advance(np.array([0.01]), np.array([0.002]))
    k = kernel_weights(p.kernel, 1.0, 10).k
    expected = g0_integral(p.curve, 0.1, 0.2) + k[1] * (0.0 * 0.01 + 0.7 * 0.002)
    assert alpha_next(state)[0] == pytest.approx(expected, rel=1e-14)


def test_alpha_clamp_and_violation():
    p = table1_case(2)
    disc = Discretization.build(p, 4)
    state = SchemeState(disc, paths=2)
    alpha_next(state)
    # drive alpha slightly negative: within roundoff is clamped
    tiny = -(disc.g0_panels[1] + 0.5 * disc.clamp_threshold) / (disc.k[1] * p.c)
    state.advance(np.zeros(2), np.array([tiny, 0.0]))
    a1 = alpha_next(state)
    assert a1[0] == 0.0 and a1[1] > 0
    assert state.min_alpha_raw < 0

    state = SchemeState(disc, paths=1)
    alpha_next(state)
    state.advance(np.zeros(1), np.array([-1.0]))
    with pytest.raises(NonnegativityError):
        alpha_next(state)
    # explicit scheme keeps the raw negative value
    state = SchemeState(disc, paths=1, scheme="explicit")
    alpha_next(state)
    state.advance(np.zeros(1), np.array([-1.0]))
    assert alpha_next(state)[0] < 0


def test_ivi_increment_zero_alpha():
    disc = Discretization.build(table1_case(2), 4)
    U, Z = ivi_increment(disc, np.array([0.0]), np.array([0.4]), np.array([0.3]))
    assert U[0] == 0.0 and Z[0] == 0.0


def test_c_zero_deterministic():
    p = ModelParams(a=0.04, b=-0.3, c=0.0, rho=0.0, V0=0.02, kernel=ShiftedFractionalKernel(H=0.1))
    disc = Discretization.build(p, 5)
    U, Z = ivi_increment(disc, np.array([0.01]), np.array([2.0]), np.array([0.5]))
    assert U[0] == pytest.approx(0.01 / (1 + 0.3 * disc.k0))
    assert Z[0] == pytest.approx(2.0 * math.sqrt(U[0]))
    # U path is deterministic: only b U feeds back
    batch = simulate(p, 8, rng=np.random.default_rng(1), paths=50)
    assert np.all(batch.U_inc == batch.U_inc[0])


def test_c_zero_is_limit_of_ig_law():
    # Z = ((1 - b k0) U - alpha) / (c k0) tends to N(0, U) as c -> 0
    base = dict(a=0.04, b=-0.3, rho=0.0, V0=0.02, kernel=ShiftedFractionalKernel(H=0.1))
    g = np.random.default_rng(4)
    xi, eta = g.standard_normal(200_000), g.random(200_000)
    disc = Discretization.build(ModelParams(c=1e-4, **base), 4)
    alpha = np.full(xi.size, disc.g0_panels[0])
    U, Z = ivi_increment(disc, alpha, xi, eta)
    U0, Z0 = ivi_increment(Discretization.build(ModelParams(c=0.0, **base), 4), alpha, xi, eta)
    assert np.max(np.abs(U - U0)) < 3e-3 * U0[0]
    assert Z.var() == pytest.approx(U0[0], rel=0.02)


def test_one_step_mean_1e6():
    p = table1_case(2)
    ig, disc = one_step_params(p, 1)
    batch = simulate(p, 1, rng=np.random.default_rng(5), paths=1_000_000)
    U = batch.U_total
    se = math.sqrt(ig.variance / U.size)
    assert abs(U.mean() - ig.mu) < 3 * se
    assert ig.mu == pytest.approx(disc.g0_panels[0] / (1 - p.b * disc.k0))


def test_one_step_conditional_mean_of_z():
    p = table1_case(2)  # b = 0
    batch = simulate(p, 1, rng=np.random.default_rng(6), paths=1_000_000)
    Z = batch.Z_total
    assert abs(Z.mean()) < 3 * Z.std(ddof=1) / math.sqrt(Z.size)


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_single_step_ks(case):
    p = table1_case(case)
    ig, _ = one_step_params(p, 1)
    U = simulate(p, 1, rng=np.random.default_rng(100 + case), paths=100_000).U_total
    res = stats.kstest(U, lambda x: ig_cdf(ig, x))
    assert res.pvalue > 0.01


def test_explicit_examples():
    U, Z = explicit_increment(np.array([-0.03]), np.array([1.0]))
    assert U[0] == 0 and Z[0] == 0
    U, Z = explicit_increment(np.array([0.04]), np.array([0.0]))
    assert (U[0], Z[0]) == (0.04, 0.0)
    U, Z = explicit_increment(np.array([0.04]), np.array([1.0]))
    assert U[0] == 0.04 and Z[0] == pytest.approx(0.2, abs=1e-16)


def test_heston_step_examples():
    disc = Discretization.build(table1_case(2), 2)
    state = SchemeState(disc, paths=1)
    state.disc = Discretization(**{**disc.__dict__, "rho": 0.0})
    assert heston_step(state, np.array([0.0]), np.array([0.3]), np.array([1.7]))[0] == 0.0
    state = SchemeState(Discretization(**{**disc.__dict__, "rho": -1.0}), paths=1)
    out = heston_step(state, np.array([0.04]), np.array([0.01]), np.array([5.0]))
    assert out[0] == pytest.approx(-0.03, abs=1e-16)


def test_martingale_price_case2():
    p = table1_case(2)
    n, paths = 32, 1_000_000
    g = np.random.default_rng(77)
    half = paths // 2
    draws = Draws.from_rng(g, half, n, with_price=True)
    S = simulate(p, n, draws, with_price=True).S_T
    # antithetic price normals only, variance draws shared
    S2 = simulate(p, n, Draws(draws.xi, draws.eta, -draws.normal), with_price=True).S_T
    pair = 0.5 * (S + S2)
    assert abs(pair.mean() - 1.0) < 4 * pair.std(ddof=1) / math.sqrt(half)


@pytest.mark.parametrize("scheme", ["ivi", "explicit"])
def test_zero_model_all_zero(scheme):
    res = simulate_path(zero_model(), 20, np.random.default_rng(0), scheme=scheme, with_price=True)
    assert res.U_total == 0 and res.Z_total == 0 and res.logS_T == 0
    assert np.all(res.U_inc == 0) and np.all(res.Z_inc == 0)


def test_z_linear_relation_exact():
    p = table1_case(1)
    batch = simulate(p, 50, rng=np.random.default_rng(9), paths=2000)
    disc = batch.disc
    rhs = ((1 - p.b * disc.k0) * batch.U_inc - batch.alpha) / (p.c * disc.k0)
    np.testing.assert_allclose(batch.Z_inc, rhs, rtol=0, atol=1e-15)


def test_determinism():
    p = table1_case(1)
    a = simulate_path(p, 100, np.random.default_rng(42), with_price=True)
    b = simulate_path(p, 100, np.random.default_rng(42), with_price=True)
    assert a.U_total == b.U_total and a.logS_T == b.logS_T
    assert np.array_equal(a.U_inc, b.U_inc)


def test_partial_sums_monotone():
    batch = simulate(table1_case(3), 32, rng=np.random.default_rng(2), paths=500)
    assert np.all(np.diff(np.cumsum(batch.U_inc, axis=1), axis=1) >= 0)
    np.testing.assert_allclose(batch.U_total, batch.U_inc.sum(axis=1))


def test_flat_kernel_matches_hand_recursion():
    p = ModelParams(a=0.3, b=0.0, c=0.5, rho=0.0, V0=0.04, kernel=ConstantKernel(1.0))
    n = 5
    g = np.random.default_rng(8)
    draws = Draws.from_rng(g, 1, n)
    batch = simulate(p, n, draws)
    h = 1.0 / n
    # one-factor recursion: alpha_i = (V0 + a t_i) h + a h^2 / 2 + h c Z_{0,t_i}
    Zsum, alphas = 0.0, []
    for i in range(n):
        t = i * h
        alpha = p.V0 * h + p.a * (t * h + h * h / 2) + h * p.c * Zsum
        U = batch.U_inc[0, i]
        alphas.append(alpha)
        Zsum += (U - alpha) / (p.c * h)
    np.testing.assert_allclose(batch.alpha[0], alphas, rtol=0, atol=1e-14)


def test_psi_hat_matches_textbook_and_ig_char():
    p = table1_case(1)
    ig, disc = one_step_params(p, 1)
    k0, b, c = disc.k0, p.b, p.c
    for w in (-1.0, -2.0, -0.5 + 1j):
        psi = complex(psi_hat(k0, b, c, w))
        textbook = ((1 - b * k0) - np.sqrt(complex((1 - b * k0) ** 2 - 2 * w * c**2 * k0**2))) / (c**2 * k0)
        assert psi == pytest.approx(textbook, rel=1e-12)
        assert np.exp(psi * disc.g0_panels[0] / k0) == pytest.approx(ig_char(ig, w), rel=1e-12)


def test_char_check_examples():
    p = table1_case(2)
    chk = one_step_char_check(p, 10, 0.0, 10, np.random.default_rng(0))
    assert chk.exact == 1
    disc = Discretization.build(p, 10)
    psi = psi_hat(disc.k0, 0.0, p.c, -1.0)
    assert psi_hat_residual(disc.k0, 0.0, p.c, psi, -1.0) < 1e-12
    chk = one_step_char_check(table1_case(1), 1, -2.0, 1_000_000, np.random.default_rng(1))
    assert abs(chk.mc_estimate - chk.exact) < 3 * chk.std_error
    with pytest.raises(DomainError):
        one_step_char_check(p, 1, 0.5, 10, np.random.default_rng(0))


@given(st.floats(1e-4, 1.0), st.floats(-3, 0), st.floats(0, 3), st.floats(-20, 0), st.floats(-20, 20))
def test_psi_hat_root_property(k0, b, c, wr, wi):
    w = complex(wr, wi)
    psi = psi_hat(k0, b, c, w)
    scale = max(1.0, abs(k0 * w), abs(psi))
    assert psi_hat_residual(k0, b, c, psi, w) < 1e-12 * scale
    assert psi.real <= 1e-15


def test_bad_inputs():
    with pytest.raises(DomainError):
        Discretization.build(table1_case(1), 0)
    with pytest.raises(DomainError):
        SchemeState(Discretization.build(table1_case(1), 2), paths=1, scheme="euler")
    with pytest.raises(DomainError):
        simulate(table1_case(1), 3)
