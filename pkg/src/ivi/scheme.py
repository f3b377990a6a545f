"""The iVi recursion, the clipped explicit benchmark and the log-price update.

All routines are vectorized over a batch of independent paths: arrays of
increments have shape (paths, n). The per-step randomness budget is fixed,
one normal ``xi`` and one uniform ``eta`` for the variance increment plus one
normal for the price, so a batch is a deterministic function of its
:class:`Draws`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NonnegativityError, NumericalError
from .igdist import ig_transform
from .kernels import kernel_weights, resolvent_curve, resolvent_kernel

SCHEMES = ("ivi", "explicit")
ALPHA_CLAMP_REL = 1e-12


@dataclass(frozen=True)
class Discretization:
    """Everything the recursion needs that does not depend on the path."""

    n: int
    T: float
    k: np.ndarray
    g0_panels: np.ndarray
    b: float
    c: float
    rho: float
    log_S0: float

    @classmethod
    def build(cls, params, n, resolvent=False):
        if n < 1:
            raise DomainError(f"need n >= 1, got {n}")
        kernel, curve, b = params.kernel, params.curve, params.b
        if resolvent:
            kernel, curve, b = resolvent_kernel(kernel, b), resolvent_curve(curve, b), 0.0
        return cls(
            n=n,
            T=params.T,
            k=kernel_weights(kernel, params.T, n).k,
            g0_panels=curve.panel_integrals(params.T, n),
            b=b,
            c=params.c,
            rho=params.rho,
            log_S0=math.log(params.S0),
        )

    @property
    def k0(self):
        return self.k[0]

    @property
    def clamp_threshold(self):
        return ALPHA_CLAMP_REL * max(1.0, float(np.sum(self.g0_panels)))

    @property
    def times(self):
        return np.arange(self.n + 1) * (self.T / self.n)


@dataclass
class Draws:
    """Standard normals ``xi``, uniforms ``eta`` and price normals, each (paths, n)."""

    xi: np.ndarray
    eta: np.ndarray
    normal: np.ndarray | None = None

    @classmethod
    def from_rng(cls, rng, paths, n, with_price=False):
        xi = rng.standard_normal((paths, n))
        eta = rng.random((paths, n))
        normal = rng.standard_normal((paths, n)) if with_price else None
        return cls(xi, eta, normal)

    @property
    def paths(self):
        return self.xi.shape[0]

    def antithetic(self):
        """Mirror image: -xi, 1 - eta, -normal. Leaves the IG law unchanged."""
        normal = None if self.normal is None else -self.normal
        return Draws(-self.xi, 1.0 - self.eta, normal)


@dataclass
class SchemeState:
    disc: Discretization
    paths: int
    scheme: str = "ivi"
    i: int = 0
    U_inc: np.ndarray = field(init=False)
    Z_inc: np.ndarray = field(init=False)
    alpha: np.ndarray = field(init=False)
    logS: np.ndarray = field(init=False)
    # b U_j + c Z_j, stored step-major so the convolution is one vector-matrix product
    _drive: np.ndarray = field(init=False, repr=False)
    _k_rev: np.ndarray = field(init=False, repr=False)
    min_alpha_raw: float = math.inf

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}")
        n = self.disc.n
        self.U_inc = np.zeros((self.paths, n))
        self.Z_inc = np.zeros((self.paths, n))
        self.alpha = np.zeros((self.paths, n))
        self.logS = np.full(self.paths, self.disc.log_S0)
        self._drive = np.zeros((n, self.paths))
        # contiguous reversed weights: _k_rev[n-1-i : n-1] == k[i:0:-1]
        self._k_rev = np.ascontiguousarray(self.disc.k[::-1])

    def advance(self, U, Z):
        i = self.i
        self.U_inc[:, i] = U
        self.Z_inc[:, i] = Z
        self._drive[i] = self.disc.b * U + self.disc.c * Z
        self.i += 1


def alpha_raw(state):
    """g0 panel integral plus the discrete convolution of past drive terms."""
    i, d = state.i, state.disc
    if i >= d.n:
        raise DomainError("all steps already taken")
    if i == 0:
        return np.full(state.paths, d.g0_panels[0])
    return d.g0_panels[i] + state._k_rev[d.n - 1 - i : d.n - 1] @ state._drive[:i]


def alpha_next(state):
    """alpha_i for the current step.

    For the iVi scheme negatives within roundoff are clamped to 0 and anything
    beyond ``clamp_threshold`` raises; the explicit scheme keeps the raw value.
    """
    alpha = alpha_raw(state)
    lowest = float(alpha.min())
    state.min_alpha_raw = min(state.min_alpha_raw, lowest)
    if state.scheme == "ivi" and lowest < 0:
        if lowest < -state.disc.clamp_threshold:
            raise NonnegativityError(f"alpha_{state.i} = {lowest:.3e} is negative beyond roundoff")
        alpha = np.maximum(alpha, 0.0)
    state.alpha[:, state.i] = alpha
    return alpha


def ivi_increment(disc, alpha, xi, eta):
    """U ~ IG(alpha / (1 - b k0), (alpha / (c k0))**2) and the matching Z.

    With c = 0 there is no feedback from Z into alpha and the increments
    become U = alpha / (1 - b k0), Z = sqrt(U) xi.
    """
    k0, b, c = disc.k0, disc.b, disc.c
    damp = 1.0 - b * k0
    if c == 0:
        # c -> 0 limit of the IG law: U is deterministic and Z ~ N(0, U)
        U = alpha / damp
        return U, np.sqrt(U) * xi
    U = ig_transform(alpha / damp, (alpha / (c * k0)) ** 2, xi, eta)
    Z = (damp * U - alpha) / (c * k0)
    return U, Z


def explicit_increment(alpha, xi):
    U = np.maximum(alpha, 0.0)
    return U, np.sqrt(U) * xi


def ivi_step(state, xi, eta):
    alpha = alpha_next(state)
    U, Z = ivi_increment(state.disc, alpha, xi, eta)
    state.advance(U, Z)
    return U, Z


def explicit_step(state, xi):
    alpha = alpha_next(state)
    U, Z = explicit_increment(alpha, xi)
    state.advance(U, Z)
    return U, Z


def heston_step(state, U, Z, normal):
    rho = state.disc.rho
    state.logS = state.logS - 0.5 * U + rho * Z + math.sqrt(1.0 - rho * rho) * np.sqrt(U) * normal
    return state.logS


@dataclass
class PathBatch:
    disc: Discretization
    U_inc: np.ndarray
    Z_inc: np.ndarray
    alpha: np.ndarray
    logS: np.ndarray | None
    min_alpha_raw: float
    logS_path: np.ndarray | None = None

    @property
    def U_total(self):
        return self.U_inc.sum(axis=1)

    @property
    def Z_total(self):
        return self.Z_inc.sum(axis=1)

    @property
    def S_T(self):
        return None if self.logS is None else np.exp(self.logS)

    def path(self, j):
        return PathResult(
            U_total=float(self.U_total[j]),
            Z_total=float(self.Z_total[j]),
            logS_T=None if self.logS is None else float(self.logS[j]),
            U_inc=self.U_inc[j].copy(),
            Z_inc=self.Z_inc[j].copy(),
        )


@dataclass
class PathResult:
    U_total: float
    Z_total: float
    logS_T: float | None
    U_inc: np.ndarray | None = None
    Z_inc: np.ndarray | None = None


def run(disc, draws, scheme="ivi", with_price=False):
    """Run the recursion for a batch on a prebuilt discretization."""
    if with_price and draws.normal is None:
        raise DomainError("price simulation needs the price-normal draws")
    state = SchemeState(disc, draws.paths, scheme)
    logS_path = np.empty((draws.paths, disc.n)) if with_price else None
    for i in range(disc.n):
        if scheme == "ivi":
            U, Z = ivi_step(state, draws.xi[:, i], draws.eta[:, i])
        else:
            U, Z = explicit_step(state, draws.xi[:, i])
        if with_price:
            logS_path[:, i] = heston_step(state, U, Z, draws.normal[:, i])
    return PathBatch(
        disc=disc,
        U_inc=state.U_inc,
        Z_inc=state.Z_inc,
        alpha=state.alpha,
        logS=state.logS if with_price else None,
        min_alpha_raw=state.min_alpha_raw,
        logS_path=logS_path,
    )


def simulate(params, n, draws=None, *, rng=None, paths=1, scheme="ivi", with_price=False, resolvent=False):
    """Simulate ``paths`` independent paths with ``n`` uniform steps on [0, T]."""
    disc = Discretization.build(params, n, resolvent=resolvent)
    if draws is None:
        if rng is None:
            raise DomainError("pass either draws or rng")
        draws = Draws.from_rng(rng, paths, n, with_price)
    return run(disc, draws, scheme=scheme, with_price=with_price)


def simulate_path(params, n, rng, scheme="ivi", with_price=False, resolvent=False):
    batch = simulate(params, n, rng=rng, paths=1, scheme=scheme, with_price=with_price, resolvent=resolvent)
    return batch.path(0)


def psi_hat(k0, b, c, w):
    """Root with nonpositive real part of psi = k0 w + k0 b psi + k0 c^2 psi^2 / 2.

    Written as 2 w k0 / ((1 - b k0) + sqrt(...)), which equals the textbook
    ((1 - b k0) - sqrt(...)) / (c^2 k0) without the cancellation at small w.
    """
    w = np.asarray(w, dtype=complex)
    damp = 1.0 - b * k0
    root = np.sqrt(damp**2 - 2 * w * c**2 * k0**2)
    return 2 * w * k0 / (damp + root)


def psi_hat_residual(k0, b, c, psi, w):
    return np.abs(psi - k0 * w - k0 * b * psi - 0.5 * k0 * c**2 * psi**2)


@dataclass
class CharCheck:
    w: complex
    mc_estimate: complex
    std_error: float
    exact: complex
    residual: float
    paths: int


def one_step_char_check(params, n, w, paths, rng):
    """Compare E[exp(w U_{0,1})] from IG draws with exp(psi_hat alpha0 / k0)."""
    w = complex(w)
    if w.real > 0:
        raise DomainError("requires Re(w) <= 0")
    disc = Discretization.build(params, n)
    k0, alpha0 = disc.k0, float(disc.g0_panels[0])
    psi = complex(psi_hat(k0, disc.b, disc.c, w))
    residual = float(psi_hat_residual(k0, disc.b, disc.c, psi, w))
    if residual >= 1e-12:
        raise NumericalError(f"psi_hat residual {residual:.3e} too large")
    xi = rng.standard_normal((paths, 1))
    eta = rng.random((paths, 1))
    U, _ = ivi_increment(disc, np.full(paths, alpha0), xi[:, 0], eta[:, 0])
    f = np.exp(w * U)
    se = float(np.sqrt((np.var(f.real) + np.var(f.imag)) / paths)) if paths > 1 else 0.0
    return CharCheck(
        w=w,
        mc_estimate=complex(f.mean()),
        std_error=se,
        exact=complex(np.exp(psi * alpha0 / k0)),
        residual=residual,
        paths=paths,
    )
