"""Seeded data-generating processes for the simulation studies.

Covariates follow a latent factor model ``X = Gamma' U + Z`` with
``U ~ N(0, I_q)`` and ``Z ~ N(0, Sigma)``.  Responses are either logistic in
``X'beta0 + U'delta0`` (estimation study), linear in the same index (rate
checks), or the two-response design of the edge test: a linear confounded
``W`` and a logistic ``Y`` that depends on ``W`` through ``b_effect``.

Randomness: every dataset is generated from ``SeedSequence([seed, rep])``
with the PCG64 bit generator and NumPy's ``Generator`` samplers.  The
sequence is spawned into three independent streams, used in a fixed order:

1. ``params``: Gamma (q x p), beta0, then betaW and deltaW when present;
2. ``design``: U (n x q), then the standard normals behind Z (n x p);
3. ``response``: the noise of W (n), then the uniforms that make Y.

Splitting the streams means the response stage can be replayed for several
``b_effect`` values against identical ``X``/``U``/``W`` (common random numbers).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .glm import Dataset, _sigmoid

RHO = 0.9


class DesignKind(str, enum.Enum):
    TOEPLITZ = "toeplitz"
    EXPDECAY = "expdecay"


class ResponseKind(str, enum.Enum):
    LOGISTIC = "logistic"
    LINEAR = "linear"
    LINEAR_W = "linear-w"


class DeltaMode(str, enum.Enum):
    UNIT_ONES = "unit-ones"
    RADEMACHER = "rademacher"


class GammaDecay(str, enum.Enum):
    VARIABLES = "variables"  # sd nu/k with k the column (variable) index
    FACTORS = "factors"  # sd nu/j with j the row (factor) index


def toeplitz_sigma(p: int, rho: float = RHO) -> np.ndarray:
    if p < 1:
        raise ValueError("p must be >= 1")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def expdecay_sigma(p: int, rho: float = RHO) -> np.ndarray:
    """Inverse of the AR(1) Toeplitz matrix, rescaled to unit diagonal.

    The inverse is tridiagonal: ``(1 - rho^2)^{-1}`` times diagonal
    ``(1, 1 + rho^2, ..., 1 + rho^2, 1)`` and off-diagonal ``-rho``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return np.ones((1, 1))
    diag = np.full(p, 1.0 + rho * rho)
    diag[[0, -1]] = 1.0
    inv = np.diag(diag)
    i = np.arange(p - 1)
    inv[i, i + 1] = inv[i + 1, i] = -rho
    # the 1/(1 - rho^2) factor cancels in the rescaling
    s = 1.0 / np.sqrt(diag)
    out = inv * s[:, None] * s[None, :]
    np.fill_diagonal(out, 1.0)
    return out


def design_sigma(kind: DesignKind | str, p: int) -> np.ndarray:
    kind = DesignKind(kind)
    return toeplitz_sigma(p) if kind is DesignKind.TOEPLITZ else expdecay_sigma(p)


def sample_gamma(q: int, p: int, nu: float, rng: np.random.Generator,
                 decay: GammaDecay | str = GammaDecay.FACTORS) -> np.ndarray:
    """Loadings ``Gamma`` (q x p) with independent N(0, nu^2/k^2) entries, k 1-based.

    ``k`` is the factor (row) index by default, so every factor loads on all
    variables, the singular values of Gamma grow like sqrt(p) and the
    confounding bias of the regression shrinks as p grows.  With
    ``decay="variables"`` ``k`` is the column index: each factor's loading norm
    then stays bounded in p and the bias does not vanish.
    """
    if q < 0 or p < 1 or nu < 0:
        raise ValueError("need q >= 0, p >= 1, nu >= 0")
    E = rng.standard_normal((q, p))
    if GammaDecay(decay) is GammaDecay.VARIABLES:
        return E * (nu / np.arange(1, p + 1))[None, :]
    return E * (nu / np.arange(1, q + 1))[:, None]


def sample_beta0(p: int, s: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``s`` uniformly chosen coordinates set to independent Rademacher signs."""
    if not 1 <= s <= p:
        raise ValueError("s must satisfy 1 <= s <= p")
    support = np.sort(rng.choice(p, size=s, replace=False))
    beta = np.zeros(p)
    beta[support] = rng.choice(np.array([-1.0, 1.0]), size=s)
    return beta, support


def unit_ones(q: int) -> np.ndarray:
    return np.full(q, 1.0 / math.sqrt(q)) if q > 0 else np.zeros(0)


def sample_delta(q: int, mode: DeltaMode | str, rng: np.random.Generator) -> np.ndarray:
    if DeltaMode(mode) is DeltaMode.UNIT_ONES:
        return unit_ones(q)
    return rng.choice(np.array([-1.0, 1.0]), size=q)


def sample_design(n: int, Sigma: np.ndarray, Gamma: np.ndarray, rng: np.random.Generator):
    """Draw ``(X, U, Z)`` with ``U ~ N(0, I_q)``, ``Z ~ N(0, Sigma)``, ``X = U Gamma + Z``."""
    q, p = Gamma.shape
    if Sigma.shape != (p, p):
        raise ValueError("Sigma and Gamma disagree on p")
    chol = np.linalg.cholesky(Sigma)  # raises LinAlgError if not positive-definite
    U = rng.standard_normal((n, q))
    Z = rng.standard_normal((n, p)) @ chol.T
    X = U @ Gamma + Z
    return X, U, Z


def bernoulli(index: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    return (uniforms < _sigmoid(index)).astype(float)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int
    p: int
    q: int = 5
    s: int = 5
    nu: float = 1.0
    design: DesignKind = DesignKind.TOEPLITZ
    response: ResponseKind = ResponseKind.LOGISTIC
    b_effect: float = 0.0
    seed: int = 0
    delta_w_mode: DeltaMode = DeltaMode.UNIT_ONES
    gamma_decay: GammaDecay = GammaDecay.FACTORS

    def __post_init__(self):
        for name, enum_cls in (("design", DesignKind), ("response", ResponseKind),
                               ("delta_w_mode", DeltaMode), ("gamma_decay", GammaDecay)):
            object.__setattr__(self, name, enum_cls(getattr(self, name)))
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.s > self.p:
            raise ValueError("s must not exceed p")
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if not self.nu >= 0:
            raise ValueError("nu must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One simulated dataset together with the truth that generated it."""

    config: ScenarioConfig
    rep: int
    data: Dataset
    Sigma: np.ndarray
    Gamma: np.ndarray
    beta0: np.ndarray
    support: np.ndarray
    delta0: np.ndarray
    U: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    beta_w: np.ndarray | None = None
    delta_w: np.ndarray | None = None


def _streams(seed: int, rep: int):
    ss = np.random.SeedSequence([seed, rep])
    return [np.random.Generator(np.random.PCG64(c)) for c in ss.spawn(3)]


def sample_w_and_y(X, U, beta_w, delta_w, beta0, delta0, b_effect, rng):
    """``W = X'betaW + U'deltaW + N(0,1)``; ``Y ~ Bernoulli(f(X'beta0 + U'delta0 + b W))``."""
    w = X @ beta_w + U @ delta_w + rng.standard_normal(X.shape[0])
    y = bernoulli(X @ beta0 + U @ delta0 + b_effect * w, rng.random(X.shape[0]))
    return w, y


def draw_scenario(cfg: ScenarioConfig, rep: int = 0) -> Scenario:
    """Generate replication ``rep`` of ``cfg``; a pure function of ``(cfg, rep)``."""
    r_params, r_design, r_resp = _streams(cfg.seed, rep)
    Sigma = design_sigma(cfg.design, cfg.p)
    Gamma = sample_gamma(cfg.q, cfg.p, cfg.nu, r_params, cfg.gamma_decay)
    beta0, support = sample_beta0(cfg.p, cfg.s, r_params)
    delta0 = unit_ones(cfg.q)
    beta_w = delta_w = None
    if cfg.response is ResponseKind.LINEAR_W:
        beta_w, _ = sample_beta0(cfg.p, cfg.s, r_params)
        delta_w = sample_delta(cfg.q, cfg.delta_w_mode, r_params)
    X, U, Z = sample_design(cfg.n, Sigma, Gamma, r_design)
    index = X @ beta0 + U @ delta0
    w = None
    if cfg.response is ResponseKind.LOGISTIC:
        y = bernoulli(index, r_resp.random(cfg.n))
    elif cfg.response is ResponseKind.LINEAR:
        y = index + r_resp.standard_normal(cfg.n)
    else:
        w, y = sample_w_and_y(X, U, beta_w, delta_w, beta0, delta0, cfg.b_effect, r_resp)
    return Scenario(cfg, rep, Dataset(y, X, w), Sigma, Gamma, beta0, support, delta0,
                    U, Z, beta_w, delta_w)


def with_b_effect(cfg: ScenarioConfig, b: float) -> ScenarioConfig:
    return replace(cfg, b_effect=float(b))
