"""Riccati-Volterra solver and the joint characteristic function of (log S_T, U_T).

psi(t) = int_0^t K(t-s) F(psi(s)) ds with
F(u) = w + (v^2 - v)/2 + (rho c v + b) u + c^2 u^2 / 2, and

    E[exp(v log(S_T/S_0) + w U_{0,T})] = exp(int_0^T F(psi(T-s)) g0(s) ds).

Discretization: product integration on a uniform grid with F(psi)
interpolated linearly between nodes, the weights being exact panel moments
of K (from its first and second antiderivatives). On the first panel F is
frozen at its right-node value, which keeps the scheme stable when the
kernel concentrates its mass at the origin (H near -1/2); with that choice
the first step coincides with the one-step iVi root. Each implicit node is
a quadratic in psi and is solved exactly, picking the root with the smaller
real part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

DEFAULT_M = 2000


@dataclass
class RiccatiSolution:
    grid: np.ndarray
    psi: np.ndarray
    exponent: np.ndarray | complex
    v: np.ndarray | complex
    w: np.ndarray | complex
    max_clamp: float = 0.0


@dataclass
class CharFnValue:
    value: np.ndarray | complex
    v: np.ndarray | complex
    w: np.ndarray | complex
    params: object


def _check_strip(v, w):
    if np.any(w.real > 0):
        raise DomainError("need Re(w) <= 0")
    if np.any(v.real < 0) or np.any(v.real > 1):
        raise DomainError("need 0 <= Re(v) <= 1")


def product_weights(kernel, T, m):
    """Panel integrals k_l and their split onto the panel end nodes.

    For panel l (lag in [l h, (l+1) h]) ``near`` is the weight of the node at
    lag l h and ``far`` that of the node at lag (l+1) h; near + far = k_l.
    """
    h = T / m
    grid = np.arange(m + 1) * h
    I1 = kernel.integral(grid)
    I2 = kernel.double_integral(grid)
    k = np.diff(I1)
    near = (np.diff(I2) - h * I1[:-1]) / h
    return k, near, k - near


def _solve_node(hist, W, A, B, C):
    """psi = hist + W (A + B psi + C psi^2), root with the smaller real part."""
    qa = W * C
    qb = W * B - 1.0
    qc = hist + W * A
    if np.all(qa == 0):
        return -qc / qb
    disc = np.sqrt(qb * qb - 4.0 * qa * qc)
    sign = np.where((np.conj(qb) * disc).real >= 0, 1.0, -1.0)
    q = -0.5 * (qb + sign * disc)
    r1 = q / qa
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(q != 0, qc / q, 0.0)
    psi = np.where(r1.real <= r2.real, r1, r2)
    if not np.all(np.isfinite(psi)):
        raise ConvergenceError("Riccati node has no finite root")
    return psi


def riccati_solve(params, v, w, m=DEFAULT_M):
    """Solve for psi on m+1 uniform nodes of [0, T]; v may be an array."""
    if m < 1:
        raise DomainError(f"need m >= 1, got {m}")
    scalar = np.ndim(v) == 0 and np.ndim(w) == 0
    v, w = np.broadcast_arrays(np.atleast_1d(np.asarray(v, dtype=complex)), np.atleast_1d(np.asarray(w, dtype=complex)))
    _check_strip(v, w)
    T, b, c, rho = params.T, params.b, params.c, params.rho
    A = w + 0.5 * (v * v - v)
    B = rho * c * v + b
    C = 0.5 * c * c

    k, near, far = product_weights(params.kernel, T, m)
    coef = np.empty(m)
    coef[0] = near[0]
    coef[1:] = near[1:] + far[:-1]

    psi = np.zeros((m + 1, v.size), dtype=complex)
    Fs = np.zeros((m + 1, v.size), dtype=complex)
    max_clamp = 0.0

    def settle(j, value):
        nonlocal max_clamp
        pos = value.real > 0
        if np.any(pos):
            max_clamp = max(max_clamp, float(value.real.max()))
            value = np.where(pos, 1j * value.imag, value)
        psi[j] = value
        Fs[j] = A + B * value + C * value * value

    settle(1, _solve_node(0.0, k[0], A, B, C))
    for j in range(2, m + 1):
        hist = coef[j - 1 : 0 : -1] @ Fs[1:j] + far[j - 1] * Fs[1]
        settle(j, _solve_node(hist, near[0], A, B, C))
    Fs[0] = Fs[1]

    # int_0^T F(psi(r)) g0(T - r) dr with exact g0 panel integrals
    grid = np.arange(m + 1) * (T / m)
    G = params.curve.antiderivative(T - grid)
    panel_g0 = G[:-1] - G[1:]
    exponent = panel_g0 @ (0.5 * (Fs[:-1] + Fs[1:]))

    if scalar:
        return RiccatiSolution(grid, psi[:, 0], complex(exponent[0]), complex(v[0]), complex(w[0]), max_clamp)
    return RiccatiSolution(grid, psi, exponent, v, w, max_clamp)


def char_fn(params, v, w=0.0, m=DEFAULT_M):
    sol = riccati_solve(params, v, w, m)
    return CharFnValue(value=np.exp(sol.exponent), v=sol.v, w=sol.w, params=params)


def laplace_U(params, w, m=DEFAULT_M):
    """E[exp(w U_{0,T})] for real w <= 0."""
    if np.iscomplexobj(w) or w > 0:
        raise DomainError(f"need real w <= 0, got {w}")
    value = char_fn(params, 0.0, w, m).value
    if abs(value.imag) > 1e-12:
        raise ConvergenceError(f"Laplace transform has imaginary part {value.imag:.3e}")
    return float(value.real)
