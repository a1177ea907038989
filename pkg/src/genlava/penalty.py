"""The LAVA penalty and its Huber-like profile.

Minimising ``lambda1*|beta| + lambda2*b**2`` over ``beta + b = t`` gives

    rho(t) = lambda2 * t**2                          if |t| <= kappa
           = lambda1 * |t| - lambda1**2 / (4*lambda2) otherwise,

with knot ``kappa = lambda1 / (2*lambda2)``.  ``rho`` is a scaled Huber
function, so it is continuously differentiable with ``rho'(t) = 2*lambda2*clip(t, -kappa, kappa)``.

``lambda2 = inf`` is accepted and means the pure Lasso penalty ``lambda1*|t|``
(knot at zero, ``b`` forced to zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyParams:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        l1, l2 = float(self.lambda1), float(self.lambda2)
        if not math.isfinite(l1) or l1 < 0:
            raise ValueError("lambda1 must be finite and >= 0")
        if math.isnan(l2) or l2 <= 0:
            raise ValueError("lambda2 must be > 0 (use inf for the Lasso)")
        object.__setattr__(self, "lambda1", l1)
        object.__setattr__(self, "lambda2", l2)

    @classmethod
    def from_gamma(cls, lambda1: float, gamma: float) -> "PenaltyParams":
        """``(lambda1, gamma)`` parametrisation with ``lambda2 = gamma*lambda1/2``."""
        if not gamma > 0:
            raise ValueError("gamma must be > 0")
        return cls(lambda1, gamma * lambda1 / 2.0)

    @classmethod
    def lasso(cls, lambda1: float) -> "PenaltyParams":
        return cls(lambda1, math.inf)

    @property
    def is_lasso(self) -> bool:
        return math.isinf(self.lambda2)

    @property
    def kappa_t(self) -> float:
        """Knot ``lambda1 / (2*lambda2)``; also the bound on ``|b_j|``."""
        if self.is_lasso:
            return 0.0
        return self.lambda1 / (2.0 * self.lambda2)

    @property
    def gamma(self) -> float:
        if self.is_lasso:
            return math.inf
        return 2.0 * self.lambda2 / self.lambda1 if self.lambda1 > 0 else math.inf


def _finite(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("input must be finite")
    return t


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def rho_eval(p: PenaltyParams, t):
    """Huber-like penalty ``rho(t)``, elementwise."""
    t = _finite(t)
    a = np.abs(t)
    if p.is_lasso:
        return _scalar_or_array(p.lambda1 * a)
    k = p.kappa_t
    out = np.where(a <= k, p.lambda2 * t * t, p.lambda1 * a - p.lambda1**2 / (4.0 * p.lambda2))
    return _scalar_or_array(out)


def rho_grad(p: PenaltyParams, t):
    """Derivative of ``rho`` (lava mode only; the Lasso penalty has none)."""
    t = _finite(t)
    return _scalar_or_array(2.0 * p.lambda2 * np.clip(t, -p.kappa_t, p.kappa_t))


def rho_prox(p: PenaltyParams, step: float, z):
    """``argmin_x 0.5*(x - z)**2 + step*rho(x)``, elementwise."""
    if not step > 0:
        raise ValueError("step must be > 0")
    z = _finite(z)
    shift = step * p.lambda1
    shrunk = z - shift * np.sign(z)
    if p.is_lasso:
        out = np.where(np.abs(z) <= shift, 0.0, shrunk)
    else:
        out = np.where(np.abs(z) <= p.kappa_t + shift, z / (1.0 + 2.0 * step * p.lambda2), shrunk)
    return _scalar_or_array(out)


def split_theta(p: PenaltyParams, theta) -> tuple[np.ndarray, np.ndarray]:
    """Split ``theta`` into a sparse part ``beta`` and a dense part ``b = theta - beta``.

    ``beta`` is ``theta`` soft-thresholded at the knot, so ``|b_j| <= kappa``
    with equality wherever ``beta_j != 0``.  Entries exactly at the knot go
    entirely to ``b``.
    """
    theta = _finite(theta).reshape(-1)
    if p.is_lasso:
        return theta.copy(), np.zeros_like(theta)
    k = p.kappa_t
    beta = np.where(np.abs(theta) > k, theta - np.sign(theta) * k, 0.0)
    return beta, theta - beta


def penalty_of_split(p: PenaltyParams, beta, b) -> float:
    """``lambda1*||beta||_1 + lambda2*||b||_2^2``."""
    beta = _finite(beta).reshape(-1)
    b = _finite(b).reshape(-1)
    if beta.shape != b.shape:
        raise ValueError("beta and b must have equal length")
    ridge = 0.0 if p.is_lasso and not np.any(b) else p.lambda2 * float(b @ b)
    return p.lambda1 * float(np.abs(beta).sum()) + ridge
