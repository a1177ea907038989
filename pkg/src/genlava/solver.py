"""Generalised LAVA fits.

The joint problem over ``(beta, b)`` is solved in its profiled form

    minimise  L(theta) + sum_j rho(theta_j)

by monotone accelerated proximal gradient with backtracking, after which
``theta`` is split back into a sparse ``beta`` and a dense ``b``.  Optimality
is certified through the KKT residual of the joint problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .glm import Dataset, LinkFamily, LinkSpec, empirical_loss, loss_gradient
from .penalty import PenaltyParams, penalty_of_split, split_theta


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 5000
    tol: float = 1e-8
    init_step: float = 1.0
    backtrack_factor: float = 0.5
    restart: bool = True
    kkt_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.init_step > 0:
            raise ValueError("init_step must be > 0")
        if not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be > 0")


@dataclass(frozen=True, eq=False)
class LavaFit:
    theta_hat: np.ndarray
    beta_hat: np.ndarray
    b_hat: np.ndarray
    objective: float
    objective_trace: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool
    params: PenaltyParams
    step: float = field(default=1.0, repr=False)


class Problem:
    """Arrays a fit needs, prepared once and reused across many penalties.

    Identity-link problems with ``n >= p`` are reduced to the Gram matrix
    ``X'X/n`` and ``X'y/n`` so that an iteration no longer touches the rows.
    """

    def __init__(self, data: Dataset, link: LinkSpec, use_gram: bool | None = None):
        data.check_link(link)
        self.data = data
        self.link = link
        X = data.X
        y = np.ascontiguousarray(data.y)
        empty2, empty1 = np.empty((0, 0)), np.empty(0)
        if use_gram is None:
            use_gram = link.family is LinkFamily.IDENTITY and data.n >= data.p
        if use_gram and link.family is not LinkFamily.IDENTITY:
            raise ValueError("the Gram reduction needs the identity link")
        if use_gram:
            self.mode = K.MODE_GRAM
            self.X, self.XT = empty2, empty2
            self.G = np.ascontiguousarray(X.T @ X / data.n)
            self.c = np.ascontiguousarray(X.T @ y / data.n)
        else:
            self.mode = K.MODE_LOGISTIC if link.family is LinkFamily.LOGISTIC else K.MODE_IDENTITY
            self.X, self.XT = np.ascontiguousarray(X), np.ascontiguousarray(X.T)
            self.G, self.c = empty2, empty1
        self.y = y

    @property
    def p(self) -> int:
        return self.data.p

    def _args(self):
        return self.mode, self.X, self.XT, self.y, self.G, self.c

    def fit(self, params: PenaltyParams, opts: SolverOptions | None = None,
            theta0=None, step: float | None = None) -> LavaFit:
        opts = opts or SolverOptions()
        theta0 = np.zeros(self.p) if theta0 is None else np.asarray(theta0, dtype=float).copy()
        trace = np.empty(opts.max_iter + 1)
        lam2 = math.inf if params.is_lasso else params.lambda2
        theta, obj, it, ok, _, step_out, n_trace = K.apg_fit(
            *self._args(), params.lambda1, lam2, params.is_lasso, theta0,
            opts.init_step if step is None else step, opts.max_iter, opts.tol,
            opts.backtrack_factor, opts.restart, opts.kkt_tol * max(1.0, params.lambda1), trace,
        )
        return self._finish(params, theta, obj, trace[:n_trace].copy(), it, ok, step_out)

    def path(self, params_seq, opts: SolverOptions | None = None, theta0=None,
             step: float | None = None) -> np.ndarray:
        """Warm-started fits; returns the ``len(params_seq) x p`` matrix of ``theta`` values.

        All entries must share the same mode (all Lasso, or all LAVA).
        """
        opts = opts or SolverOptions()
        params_seq = list(params_seq)
        if not params_seq:
            return np.empty((0, self.p))
        lasso = params_seq[0].is_lasso
        if any(pp.is_lasso != lasso for pp in params_seq):
            raise ValueError("cannot mix Lasso and LAVA penalties in one path")
        lam1 = np.array([pp.lambda1 for pp in params_seq])
        lam2 = np.full(len(params_seq), math.inf) if lasso else np.array(
            [pp.lambda2 for pp in params_seq])
        theta0 = np.zeros(self.p) if theta0 is None else np.asarray(theta0, dtype=float)
        thetas, *_ = K.apg_path(
            *self._args(), lam1, lam2, lasso, theta0,
            opts.init_step if step is None else step, opts.max_iter, opts.tol,
            opts.backtrack_factor, opts.restart, opts.kkt_tol,
        )
        return thetas

    def path_fits(self, params_seq, opts: SolverOptions | None = None) -> list[LavaFit]:
        """Like :meth:`path` but returns full :class:`LavaFit` records."""
        opts = opts or SolverOptions()
        theta, step, out = np.zeros(self.p), opts.init_step, []
        for pp in params_seq:
            fit = self.fit(pp, opts, theta0=theta, step=step)
            theta, step = fit.theta_hat, fit.step / opts.backtrack_factor
            out.append(fit)
        return out

    def _finish(self, params, theta, obj, trace, it, ok, step) -> LavaFit:
        beta, b = split_theta(params, theta)
        kkt = kkt_residual(self.data, self.link, params, beta, b)
        return LavaFit(
            theta_hat=theta, beta_hat=beta, b_hat=b, objective=float(obj),
            objective_trace=trace, kkt_residual=kkt, iterations=int(it),
            converged=bool(ok), params=params, step=float(step),
        )


def fit_lava(data: Dataset, link: LinkSpec, params: PenaltyParams,
             opts: SolverOptions | None = None) -> LavaFit:
    """Minimise ``L(beta + b) + lambda1*||beta||_1 + lambda2*||b||_2^2``.

    Non-convergence is reported through ``converged=False`` rather than raised.
    """
    return Problem(data, link).fit(params, opts)


def fit_lasso(data: Dataset, link: LinkSpec, lambda1: float,
              opts: SolverOptions | None = None) -> LavaFit:
    """The ``lambda2 = inf`` limit: an l1-penalised M-estimator, ``b_hat = 0``."""
    return Problem(data, link).fit(PenaltyParams.lasso(lambda1), opts)


def joint_objective(data: Dataset, link: LinkSpec, params: PenaltyParams, beta, b) -> float:
    beta = np.asarray(beta, dtype=float)
    b = np.asarray(b, dtype=float)
    return empirical_loss(data, link, beta + b) + penalty_of_split(params, beta, b)


def kkt_residual(data: Dataset, link: LinkSpec, params: PenaltyParams, beta, b) -> float:
    """Largest violation of the joint-problem stationarity conditions at ``(beta, b)``.

    With ``g`` the loss gradient at ``beta + b``: ``|g_j + 2*lambda2*b_j|`` for
    ``b`` and the l1 subgradient condition for ``beta``.  In Lasso mode ``b`` is
    pinned at zero and only the ``beta`` conditions apply.
    """
    beta = np.asarray(beta, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if beta.shape != b.shape or beta.shape[0] != data.p:
        raise ValueError("beta and b must both have length p")
    g = loss_gradient(data, link, beta + b)
    nz = beta != 0
    beta_part = np.where(nz, np.abs(g + params.lambda1 * np.sign(beta)),
                         np.maximum(0.0, np.abs(g) - params.lambda1))
    worst = float(beta_part.max())
    if not params.is_lasso:
        worst = max(worst, float(np.abs(g + 2.0 * params.lambda2 * b).max()))
    return worst
