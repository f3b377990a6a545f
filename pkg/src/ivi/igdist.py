"""Inverse Gaussian distribution IG(mu, lambda).

IG(0, 0) is the Dirac mass at 0; the scheme produces it whenever alpha = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import DomainError


@dataclass(frozen=True)
class IGParams:
    mu: float
    lam: float

    def __post_init__(self):
        if self.mu < 0 or self.lam < 0:
            raise DomainError(f"IG parameters must be >= 0, got mu={self.mu}, lambda={self.lam}")
        if (self.mu == 0) != (self.lam == 0):
            raise DomainError("mu and lambda must vanish together")

    @property
    def degenerate(self):
        return self.mu == 0

    @property
    def variance(self):
        return 0.0 if self.degenerate else self.mu**3 / self.lam


def _require_nondegenerate(p):
    if p.degenerate:
        raise DomainError("IG(0, 0) is a Dirac mass and has no density")


def ig_pdf(p, x):
    _require_nondegenerate(p)
    x = np.asarray(x, dtype=float)
    mu, lam = p.mu, p.lam
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = np.sqrt(lam / (2 * np.pi * x**3)) * np.exp(-lam * (x - mu) ** 2 / (2 * mu**2 * x))
    return np.where(x > 0, val, 0.0)


def ig_cdf(p, x):
    """Closed-form CDF; the exp(2 lam / mu) factor is folded into the log."""
    _require_nondegenerate(p)
    x = np.asarray(x, dtype=float)
    mu, lam = p.mu, p.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(lam / x)
        first = ndtr(r * (x / mu - 1))
        second = np.exp(2 * lam / mu + log_ndtr(-r * (x / mu + 1)))
    return np.where(x > 0, first + np.nan_to_num(second), 0.0)


def ig_char(p, w):
    """E[exp(w X)] for Re w <= 0, principal branch of the square root."""
    w = np.asarray(w, dtype=complex)
    if np.any(w.real > 0):
        raise DomainError("characteristic function requires Re(w) <= 0")
    if p.degenerate:
        return np.ones_like(w) if w.shape else complex(1.0)
    out = np.exp((p.lam / p.mu) * (1 - np.sqrt(1 - 2 * w * p.mu**2 / p.lam)))
    return out if w.shape else complex(out)


def ig_moment(p, order):
    """Raw moment via E[X^n] = (2n-3) mu^2/lam E[X^(n-1)] + mu^2 E[X^(n-2)]."""
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    _require_nondegenerate(p)
    mu2 = p.mu**2
    prev, cur = 1.0, p.mu
    for n in range(2, order + 1):
        prev, cur = cur, (2 * n - 3) * mu2 / p.lam * cur + mu2 * prev
    return cur


def ig_transform(mu, lam, xi, eta):
    """Michael-Schucany-Haas map from one normal xi and one uniform eta.

    The smaller root mu**2 / X_big is used for the candidate instead of the
    subtractive formula, which cancels for large xi**2. mu == 0 entries give 0.
    """
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(xi, dtype=float) ** 2
    live = mu > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(live, mu / (2 * np.where(live, lam, 1.0)), 0.0)
        x_big = mu + ratio * (mu * y + np.sqrt(4 * mu * lam * y + (mu * y) ** 2))
        x_small = np.where(live, mu**2 / np.where(live, x_big, 1.0), 0.0)
        accept = np.asarray(eta) * (mu + x_small) <= mu
    return np.where(live, np.where(accept, x_small, x_big), 0.0)


def ig_sample(p, rng, size=None):
    """Draw from IG(p.mu, p.lam); consumes one normal and one uniform per
    nondegenerate draw and nothing for the Dirac case."""
    if p.degenerate:
        return 0.0 if size is None else np.zeros(size)
    xi = rng.standard_normal(size)
    eta = rng.random(size)
    out = ig_transform(p.mu, p.lam, xi, eta)
    return float(out) if size is None else out
