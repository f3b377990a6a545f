"""Convolution kernels, input curves and their exactly integrated quantities.

Every kernel exposes three vectorized callables:

    K(t)                 pointwise value, t > 0
    integral(t)          I1(t) = int_0^t K(s) ds
    double_integral(t)   I2(t) = int_0^t I1(s) ds

The scheme only ever consumes panel integrals of K (the weights k_l) and of
the input curve g0(t) = V0 + a * I1(t), so singular kernels never have to be
evaluated at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate

from .errors import ConfigError, ConvergenceError, DomainError

ML_MAX_ABS_Z = 50.0
GL_NODES = 64


def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


class Kernel:
    """Base class. Subclasses override the closed forms they know."""

    family = "custom"
    closed_form = False
    # power p such that K(t) ~ t**p near 0; < 0 means singular at the origin
    singular_exponent = 0.0

    def __call__(self, t):
        raise NotImplementedError

    @property
    def singular(self):
        return self.singular_exponent < 0

    def _check_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.singular and np.any(t <= 0):
            raise DomainError(f"{self.family} kernel is singular at 0; got t <= 0")
        if np.any(t < 0):
            raise DomainError("kernel evaluated at negative time")
        return t

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array([self._quad_integral(float(x)) for x in t.ravel()])
        return out.reshape(t.shape) if t.shape else float(out[0])

    def double_integral(self, t):
        t = np.asarray(t, dtype=float)

        def one(x):
            if x == 0.0:
                return 0.0
            val, _ = integrate.quad(lambda s: self._quad_integral(s), 0.0, x, limit=200)
            return val

        out = np.array([one(float(x)) for x in t.ravel()])
        return out.reshape(t.shape) if t.shape else float(out[0])

    def regular_part(self, t):
        """K(t) * t**(-singular_exponent), bounded near the origin."""
        t = np.asarray(t, dtype=float)
        return self(t) * t ** (-self.singular_exponent)

    def _quad_integral(self, x):
        if x == 0.0:
            return 0.0
        return _panel_quadrature(self, 0.0, x)

    def to_config(self):
        raise ConfigError("kernel.family", f"{self.family} kernels are not serializable")


def _panel_quadrature(kernel, lo, hi, order=GL_NODES):
    """Gauss-Legendre on [lo, hi]; singularity substitution when lo == 0."""
    x, w = _gauss_legendre(order)
    width = hi - lo
    if lo == 0.0 and kernel.singular:
        # s = u**(1/q) turns s**(q-1) ds into a smooth measure
        q = 1.0 + kernel.singular_exponent
        umax = width**q
        s = np.maximum((umax * x) ** (1.0 / q), np.finfo(float).tiny)
        return float(umax * np.sum(w * kernel.regular_part(s)) / q)
    return float(width * np.sum(w * kernel(lo + width * x)))


@dataclass(frozen=True)
class ShiftedFractionalKernel(Kernel):
    """K(t) = beta * (epsilon + t) ** (H - 1/2).

    ``beta`` defaults to 1 / Gamma(H + 1/2). With ``epsilon == 0`` the kernel
    is singular at 0 and requires H > -1/2.
    """

    H: float
    epsilon: float = 0.0
    beta: float | None = None

    family = "shifted_fractional"
    closed_form = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError("kernel.epsilon", f"must be >= 0, got {self.epsilon}")
        if self.H > 0.5:
            raise ConfigError("kernel.H", f"must be <= 1/2, got {self.H}")
        if self.epsilon == 0 and self.H <= -0.5:
            raise ConfigError("kernel.H", f"must be > -1/2 when epsilon = 0, got {self.H}")
        if self.beta is None:
            p = self.H + 0.5
            g = math.gamma(p) if p > 0 else float("nan")
            if not (g > 0 and math.isfinite(g)):
                raise ConfigError("kernel.beta", f"no default for H = {self.H}; pass beta explicitly")
            object.__setattr__(self, "beta", 1.0 / g)
        elif not self.beta > 0:
            raise ConfigError("kernel.beta", f"must be > 0, got {self.beta}")

    @property
    def singular_exponent(self):
        return self.H - 0.5 if self.epsilon == 0 else 0.0

    def __call__(self, t):
        t = self._check_t(t)
        return self.beta * (self.epsilon + t) ** (self.H - 0.5)

    def regular_part(self, t):
        if self.epsilon == 0:
            return self.beta * np.ones_like(np.asarray(t, dtype=float))
        return self(t)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        p, eps = self.H + 0.5, self.epsilon
        if eps == 0:
            return self.beta * t**p / p
        x = np.log1p(t / eps)
        if p == 0:
            return self.beta * x
        return self.beta * eps**p * np.expm1(p * x) / p

    def double_integral(self, t):
        t = np.asarray(t, dtype=float)
        p, eps = self.H + 0.5, self.epsilon
        if eps == 0:
            return self.beta * t ** (p + 1) / (p * (p + 1))
        x = np.log1p(t / eps)
        r = t / eps
        if p == 0:
            return self.beta * ((eps + t) * x - t)
        if p == -1:
            return self.beta * (x - r) / p
        return self.beta * eps ** (p + 1) * (np.expm1((p + 1) * x) / (p + 1) - r) / p

    def to_config(self):
        return {"family": self.family, "H": self.H, "epsilon": self.epsilon, "beta": self.beta}


class FractionalKernel(ShiftedFractionalKernel):
    """Unshifted fractional kernel beta * t ** (H - 1/2), H in (-1/2, 1/2]."""

    family = "fractional"

    def __init__(self, H, beta=None):
        super().__init__(H=H, epsilon=0.0, beta=beta)

    def to_config(self):
        return {"family": self.family, "H": self.H, "beta": self.beta}


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    beta: float = 1.0

    family = "constant"
    closed_form = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("kernel.beta", f"must be > 0, got {self.beta}")

    def __call__(self, t):
        t = self._check_t(t)
        return self.beta * np.ones_like(t) if t.shape else self.beta

    def integral(self, t):
        return self.beta * np.asarray(t, dtype=float)

    def double_integral(self, t):
        return 0.5 * self.beta * np.asarray(t, dtype=float) ** 2

    def to_config(self):
        return {"family": self.family, "beta": self.beta}


@dataclass(frozen=True)
class ExpSumKernel(Kernel):
    """K(t) = sum_i c_i exp(-x_i t) with c_i, x_i >= 0."""

    terms: tuple = field(default_factory=tuple)

    family = "exp_sum"
    closed_form = True

    def __post_init__(self):
        terms = tuple((float(c), float(x)) for c, x in self.terms)
        if not terms:
            raise ConfigError("kernel.exp_terms", "at least one (c, x) term required")
        for c, x in terms:
            if c < 0 or x < 0:
                raise ConfigError("kernel.exp_terms", f"weights and rates must be >= 0, got ({c}, {x})")
        object.__setattr__(self, "terms", terms)

    def __call__(self, t):
        t = self._check_t(t)
        return sum(c * np.exp(-x * t) for c, x in self.terms)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, x in self.terms:
            out = out + (c * t if x == 0 else -c * np.expm1(-x * t) / x)
        return out

    def double_integral(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, x in self.terms:
            if x == 0:
                out = out + 0.5 * c * t**2
                continue
            y = x * t
            small = np.abs(y) < 1e-3
            series = t**2 * (0.5 - y / 6 + y**2 / 24 - y**3 / 120)
            with np.errstate(invalid="ignore", divide="ignore"):
                exact = (y + np.expm1(-y)) / x**2
            out = out + c * np.where(small, series, exact)
        return out

    def to_config(self):
        return {"family": self.family, "exp_terms": [list(t) for t in self.terms]}


@dataclass(frozen=True)
class ResolventKernel(Kernel):
    """R^b / b for a fractional kernel: kappa t^(alpha-1) E_{alpha,alpha}(lam t^alpha).

    Integrals follow termwise from the series:
    I1 = kappa t^alpha E_{alpha,alpha+1}(lam t^alpha),
    I2 = kappa t^(alpha+1) E_{alpha,alpha+2}(lam t^alpha).
    """

    kappa: float
    alpha: float
    lam: float

    family = "resolvent"
    closed_form = True

    @property
    def singular_exponent(self):
        return self.alpha - 1.0

    def _ml(self, beta, t):
        z = self.lam * t**self.alpha
        return np.vectorize(lambda x: mittag_leffler(self.alpha, beta, x), otypes=[float])(z)

    def __call__(self, t):
        t = self._check_t(t)
        return self.kappa * t ** (self.alpha - 1) * self._ml(self.alpha, t)

    def regular_part(self, t):
        return self.kappa * self._ml(self.alpha, np.asarray(t, dtype=float))

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return self.kappa * t**self.alpha * self._ml(self.alpha + 1, t)

    def double_integral(self, t):
        t = np.asarray(t, dtype=float)
        return self.kappa * t ** (self.alpha + 1) * self._ml(self.alpha + 2, t)


@dataclass(frozen=True)
class CustomKernel(Kernel):
    """Arbitrary nonnegative non-increasing kernel; integrals by quadrature."""

    func: object
    singular_exponent: float = 0.0

    def __call__(self, t):
        t = self._check_t(t)
        return np.asarray(self.func(t), dtype=float)


def kernel_from_config(cfg):
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    try:
        if family == "shifted_fractional":
            return ShiftedFractionalKernel(H=float(cfg["H"]), epsilon=float(cfg.get("epsilon", 0.0)), beta=cfg.get("beta"))
        if family == "fractional":
            return FractionalKernel(H=float(cfg["H"]), beta=cfg.get("beta"))
        if family == "constant":
            return ConstantKernel(beta=float(cfg.get("beta", 1.0)))
        if family == "exp_sum":
            return ExpSumKernel(terms=tuple(tuple(t) for t in cfg["exp_terms"]))
    except KeyError as exc:
        raise ConfigError(f"kernel.{exc.args[0]}", "missing") from None
    raise ConfigError("kernel.family", f"unknown family {family!r}")


def kernel_eval(kernel, t):
    return kernel(t)


@dataclass(frozen=True)
class KernelWeights:
    n: int
    T: float
    k: np.ndarray

    @property
    def h(self):
        return self.T / self.n


def kernel_weights(kernel, T, n):
    """k[l] = int_0^{T/n} K(l T/n + s) ds for l = 0..n-1."""
    if n < 1 or not T > 0:
        raise DomainError(f"need n >= 1 and T > 0, got n={n}, T={T}")
    if kernel.closed_form:
        grid = np.arange(n + 1) * (T / n)
        k = np.diff(kernel.integral(grid))
    else:
        k = quadrature_weights(kernel, T, n)
    k.setflags(write=False)
    return KernelWeights(n=n, T=float(T), k=k)


def quadrature_weights(kernel, T, n, order=GL_NODES):
    """Panel integrals of K by Gauss-Legendre, singularity-aware on panel 0."""
    h = T / n
    x, w = _gauss_legendre(order)
    k = np.empty(n)
    k[0] = _panel_quadrature(kernel, 0.0, h, order)
    if n > 1:
        s = h * (np.arange(1, n)[:, None] + x[None, :])
        k[1:] = h * (kernel(s) @ w)
    return k


@dataclass(frozen=True)
class InputCurve:
    """g0(t) = V0 + a * int_0^t K(s) ds."""

    V0: float
    a: float
    kernel: Kernel

    def __post_init__(self):
        if self.V0 < 0:
            raise ConfigError("model.V0", f"must be >= 0, got {self.V0}")
        if self.a < 0:
            raise ConfigError("model.a", f"must be >= 0, got {self.a}")

    def __call__(self, t):
        return self.V0 + self.a * self.kernel.integral(t)

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.V0 * t + self.a * self.kernel.double_integral(t)

    def integral(self, s, t):
        if not 0 <= s <= t:
            raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
        return float(self.antiderivative(t) - self.antiderivative(s))

    def panel_integrals(self, T, n):
        grid = np.arange(n + 1) * (T / n)
        return np.diff(self.antiderivative(grid))


@dataclass(frozen=True)
class ResolventCurve:
    """Integrated input curve int_0^t g~0 after eliminating the linear drift.

    int_0^t g~0 solves u = G1 + b K * u with G1 = int g0; for
    K = kappa t^(alpha-1) / Gamma(alpha) this is
    u(t) = V0 t E_{alpha,2}(lam t^alpha) + a kappa t^(alpha+1) E_{alpha,alpha+2}(lam t^alpha).
    """

    V0: float
    a: float
    kappa: float
    alpha: float
    lam: float

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        z = self.lam * t**self.alpha
        ml = np.vectorize(mittag_leffler, otypes=[float])
        return self.V0 * t * ml(self.alpha, 2.0, z) + self.a * self.kappa * t ** (self.alpha + 1) * ml(
            self.alpha, self.alpha + 2.0, z
        )

    def integral(self, s, t):
        if not 0 <= s <= t:
            raise DomainError(f"need 0 <= s <= t, got s={s}, t={t}")
        return float(self.antiderivative(t) - self.antiderivative(s))

    def panel_integrals(self, T, n):
        grid = np.arange(n + 1) * (T / n)
        return np.diff(self.antiderivative(grid))


def g0_integral(curve, s, t):
    return curve.integral(s, t)


def _fractional_form(kernel):
    """(kappa, alpha) with K = kappa t^(alpha-1) / Gamma(alpha), or None."""
    if isinstance(kernel, ConstantKernel):
        return kernel.beta, 1.0
    if isinstance(kernel, ShiftedFractionalKernel) and kernel.epsilon == 0:
        alpha = kernel.H + 0.5
        return kernel.beta * math.gamma(alpha), alpha
    return None


def resolvent_kernel(kernel, b):
    """Kernel R^b / b where R^b = bK + bK * R^b; K itself when b == 0."""
    if b > 0:
        raise DomainError(f"b must be <= 0, got {b}")
    if b == 0:
        return kernel
    if isinstance(kernel, ConstantKernel):
        return ExpSumKernel(terms=((kernel.beta, -b * kernel.beta),))
    form = _fractional_form(kernel)
    if form is None:
        raise DomainError(f"no closed-form resolvent for {kernel.family} kernels with epsilon > 0")
    kappa, alpha = form
    return ResolventKernel(kappa=kappa, alpha=alpha, lam=b * kappa)


def resolvent_curve(curve, b):
    if b == 0:
        return curve
    form = _fractional_form(curve.kernel)
    if form is None:
        raise DomainError(f"no closed-form resolvent for {curve.kernel.family} kernels")
    kappa, alpha = form
    return ResolventCurve(V0=curve.V0, a=curve.a, kappa=kappa, alpha=alpha, lam=b * kappa)


def mittag_leffler(alpha, beta, z):
    """E_{alpha,beta}(z) = sum_n z^n / Gamma(alpha n + beta), |z| <= 50.

    Summed in mpmath with working precision raised past the largest term so
    the alternating series for negative z does not cancel catastrophically.
    """
    if not (alpha > 0 and beta > 0):
        raise DomainError(f"need alpha, beta > 0, got {alpha}, {beta}")
    z = float(z)
    if abs(z) > ML_MAX_ABS_Z:
        raise ConvergenceError(f"|z| = {abs(z)} exceeds the series domain {ML_MAX_ABS_Z}")
    if z == 0.0:
        return 1.0 / math.gamma(beta)
    # log10 of the largest term
    logz = math.log(abs(z))
    peak, n = -math.inf, 0
    while True:
        lt = n * logz - math.lgamma(alpha * n + beta)
        peak = max(peak, lt)
        if n > 2 and lt < peak - 40:
            break
        n += 1
    dps = 20 + max(0, int(peak / math.log(10)) + 1)
    with mpmath.workdps(dps):
        zm = mpmath.mpf(z)
        total = mpmath.mpf(0)
        term_pow = mpmath.mpf(1)
        a, b = mpmath.mpf(alpha), mpmath.mpf(beta)
        for k in range(100000):
            term = term_pow * mpmath.rgamma(a * k + b)
            total += term
            lt = k * logz - math.lgamma(alpha * k + beta)
            if k > 2 and lt < peak - 40 and (abs(term) < 1e-17 * abs(total) or lt < peak - 120):
                return float(total)
            term_pow *= zm
    raise ConvergenceError("Mittag-Leffler series did not converge")
