"""European calls by Fourier inversion of the Volterra Heston characteristic
function, Black-Scholes helpers and implied volatility. Zero rates and
dividends throughout, so S is a martingale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import ConvergenceError, DomainError
from .riccati import DEFAULT_M, char_fn

# Gauss-Kronrod (7, 15) on [-1, 1], QUADPACK qk15 constants
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss-7 weights scattered onto the Kronrod node layout (odd positions)
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[[1, 3, 5]] = _WG[:3]
G_WEIGHTS[7] = _WG[3]
G_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

CONTOUR_SHIFT = 0.5


@dataclass
class QuadConfig:
    tol: float = 1e-9
    u_max0: float = 20.0
    panels0: int = 8
    max_rounds: int = 40
    u_cap: float = 1e5


@dataclass
class OptionQuote:
    strike: float
    maturity: float
    price: float
    implied_vol: float | None = None


def _panel_rules(lo, hi, values):
    """(kronrod, gauss) estimates for each panel; values shaped (panels, 15, q)."""
    half = 0.5 * (hi - lo)
    kron = half[:, None] * np.einsum("j,pjq->pq", GK_WEIGHTS, values)
    gauss = half[:, None] * np.einsum("j,pjq->pq", G_WEIGHTS, values)
    return kron, gauss


def lewis_integral(params, log_moneyness, m=DEFAULT_M, quad=None):
    """int_0^inf Re[exp(i u kappa) phi(1/2 + i u)] / (u^2 + 1/4) du for each kappa.

    Adaptive Gauss-Kronrod panels; every refinement round solves the Riccati
    equation for all new nodes at once. The upper limit doubles until the
    outermost panel contributes less than ``tol``.
    """
    quad = quad or QuadConfig()
    kappa = np.atleast_1d(np.asarray(log_moneyness, dtype=float))

    def integrand(lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        u = mid[:, None] + half[:, None] * GK_NODES[None, :]
        phi = char_fn(params, CONTOUR_SHIFT + 1j * u.ravel(), 0.0, m).value.reshape(u.shape)
        vals = (np.exp(1j * u[..., None] * kappa) * phi[..., None]).real / (u[..., None] ** 2 + 0.25)
        return _panel_rules(lo, hi, vals)

    edges = np.linspace(0.0, quad.u_max0, quad.panels0 + 1)
    lo, hi = edges[:-1], edges[1:]
    kron, gauss = integrand(lo, hi)
    done = []
    u_max = quad.u_max0
    for _ in range(quad.max_rounds):
        err = np.max(np.abs(kron - gauss), axis=1)
        # tail: the outermost panel must be negligible, else extend
        tail = float(np.max(np.abs(kron[np.argmax(hi)])))
        budget = quad.tol * (hi - lo) / u_max
        bad = err > budget
        keep = ~bad
        done.append(kron[keep].sum(axis=0))
        new_lo, new_hi = [], []
        if np.any(bad):
            mid = 0.5 * (lo[bad] + hi[bad])
            new_lo += [lo[bad], mid]
            new_hi += [mid, hi[bad]]
        if tail > quad.tol:
            if 2 * u_max > quad.u_cap:
                raise ConvergenceError(f"Fourier integrand not negligible below u = {u_max}")
            ext = np.linspace(u_max, 2 * u_max, quad.panels0 + 1)
            new_lo.append(ext[:-1])
            new_hi.append(ext[1:])
            u_max *= 2
        if not new_lo:
            return np.sum(done, axis=0)
        lo, hi = np.concatenate(new_lo), np.concatenate(new_hi)
        kron, gauss = integrand(lo, hi)
    raise ConvergenceError("adaptive Fourier quadrature did not converge")


def call_price_fourier(params, strike, m=DEFAULT_M, quad=None):
    """Call price S0 - sqrt(S0 K) / pi * lewis_integral; vectorized over strikes."""
    strikes = np.atleast_1d(np.asarray(strike, dtype=float))
    if np.any(strikes <= 0):
        raise DomainError("strikes must be positive")
    S0 = params.S0
    integral = lewis_integral(params, np.log(S0 / strikes), m, quad)
    price = S0 - np.sqrt(S0 * strikes) / np.pi * integral
    price = np.clip(price, np.maximum(S0 - strikes, 0.0), S0)
    return float(price[0]) if np.ndim(strike) == 0 else price


def put_price_fourier(params, strike, m=DEFAULT_M, quad=None):
    """Put from the same contour: K - sqrt(S0 K) / pi * lewis_integral."""
    strikes = np.atleast_1d(np.asarray(strike, dtype=float))
    if np.any(strikes <= 0):
        raise DomainError("strikes must be positive")
    S0 = params.S0
    integral = lewis_integral(params, np.log(S0 / strikes), m, quad)
    price = strikes - np.sqrt(S0 * strikes) / np.pi * integral
    return float(price[0]) if np.ndim(strike) == 0 else price


def bs_call(S0, strike, T, sigma):
    if sigma <= 0 or T <= 0:
        return max(S0 - strike, 0.0)
    sd = sigma * math.sqrt(T)
    d1 = (math.log(S0 / strike) + 0.5 * sd * sd) / sd
    return float(S0 * ndtr(d1) - strike * ndtr(d1 - sd))


def bs_vega(S0, strike, T, sigma):
    sd = sigma * math.sqrt(T)
    d1 = (math.log(S0 / strike) + 0.5 * sd * sd) / sd
    return S0 * math.sqrt(T) * math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)


def implied_vol(price, S0, strike, T, lo=1e-4, hi=5.0):
    """Black-Scholes volatility reproducing ``price`` (zero rates)."""
    intrinsic = max(S0 - strike, 0.0)
    if not intrinsic < price < S0:
        raise DomainError(f"price {price} outside the no-arbitrage range ({intrinsic}, {S0})")
    f = lambda s: bs_call(S0, strike, T, s) - price
    if f(lo) > 0 or f(hi) < 0:
        raise DomainError(f"implied volatility outside [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)


@dataclass
class SmilePoint:
    strike: float
    iv_mc: float
    iv_reference: float
    price_mc: float
    std_error: float
    price_reference: float
    iv_std_error: float


def smile(params, strikes, n_mc, paths, seed, scheme="ivi", m=DEFAULT_M, threads=None):
    """MC and Fourier implied volatilities across ``strikes``."""
    from . import montecarlo

    strikes = [float(k) for k in strikes]
    if any(k <= 0 for k in strikes):
        raise DomainError("strikes must be positive")
    estimates = montecarlo.estimate_calls(params, strikes, n_mc, paths, seed, scheme=scheme, threads=threads)
    refs = np.atleast_1d(call_price_fourier(params, strikes, m))
    out = []
    for k, est, ref in zip(strikes, estimates, refs):
        iv_ref = implied_vol(ref, params.S0, k, params.T)
        try:
            iv_mc = implied_vol(est.value, params.S0, k, params.T)
            iv_se = est.std_error / bs_vega(params.S0, k, params.T, iv_mc)
        except DomainError:
            iv_mc, iv_se = float("nan"), float("nan")
        out.append(SmilePoint(k, iv_mc, iv_ref, est.value, est.std_error, float(ref), iv_se))
    return out
