"""Tuning-parameter grids and K-fold cross-validation over ``(lambda1, gamma)``.

LAVA is tuned in the ``(lambda1, gamma)`` parametrisation, ``lambda2 =
gamma * lambda1 / 2``.  ``lambda1`` runs over a log-spaced grid starting at
the smallest value that zeroes the Lasso, ``||grad L(0)||_inf``.  The held-out
criterion is the mean M-loss ``l(y, x'theta_hat)`` on the validation fold.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .glm import Dataset, LinkSpec, format_float, loss_gradient
from .penalty import PenaltyParams
from .solver import LavaFit, Problem, SolverOptions

LAVA = "lava"
LASSO = "lasso"


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class CvConfig:
    n_folds: int = 10
    n_lambda1: int = 100
    lambda_min_ratio: float | None = None
    gamma_grid: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")
        if self.n_lambda1 < 1:
            raise ValueError("n_lambda1 must be >= 1")
        if self.lambda_min_ratio is not None and not 0 < self.lambda_min_ratio <= 1:
            raise ValueError("lambda_min_ratio must lie in (0, 1]")
        if self.gamma_grid is not None:
            g = tuple(float(v) for v in self.gamma_grid)
            if not g or any(not v > 0 for v in g):
                raise ValueError("gamma_grid must be non-empty and strictly positive")
            object.__setattr__(self, "gamma_grid", g)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def min_ratio(self, n: int, p: int) -> float:
        """Explicit ratio, else the glmnet rule: 1e-4 when n >= p, 0.01 when n < p."""
        if self.lambda_min_ratio is not None:
            return self.lambda_min_ratio
        return 0.01 if n < p else 1e-4

    def gammas(self, p: int) -> tuple[float, ...]:
        return self.gamma_grid if self.gamma_grid is not None else tuple(gamma_grid_default(p))


def lambda1_grid(data: Dataset, link: LinkSpec, cfg: CvConfig) -> np.ndarray:
    """Descending log-spaced grid from ``||grad L(0)||_inf`` down to ``min_ratio`` times that."""
    lam_max = float(np.abs(loss_gradient(data, link, np.zeros(data.p))).max())
    if not lam_max > 0:
        raise DegenerateDataError("null gradient: the zero fit is already stationary")
    if cfg.n_lambda1 == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, math.log10(cfg.min_ratio(data.n, data.p)), cfg.n_lambda1)


def gamma_grid_default(p_features: int) -> np.ndarray:
    """``(p/50, p/40, p/30, p/20, p/10)``."""
    if p_features < 1:
        raise ValueError("p must be >= 1")
    return p_features / np.array([50.0, 40.0, 30.0, 20.0, 10.0])


def fold_assignment(n: int, n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of ``range(n)`` cut into ``n_folds`` near-equal blocks."""
    if not 2 <= n_folds <= n:
        raise ValueError(f"need 2 <= n_folds <= n, got n_folds={n_folds}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, n_folds)]


def _penalties(method: str, lambdas, gamma: float) -> list[PenaltyParams]:
    if method == LASSO:
        return [PenaltyParams.lasso(l) for l in lambdas]
    return [PenaltyParams.from_gamma(l, gamma) for l in lambdas]


@dataclass(frozen=True, eq=False)
class CvTable:
    """One row per ``(lambda1, gamma)`` cell; ``gamma`` is ``inf`` for the Lasso."""

    lambda1: np.ndarray
    gamma: np.ndarray
    mean_cv_loss: np.ndarray
    sd_cv_loss: np.ndarray
    fold_losses: np.ndarray = field(repr=False)
    method: str = LAVA

    @property
    def best_index(self) -> int:
        # ties go to larger lambda1, then larger gamma
        order = np.lexsort((-self.gamma, -self.lambda1, self.mean_cv_loss))
        return int(order[0])

    @property
    def best(self) -> tuple[float, float]:
        i = self.best_index
        return float(self.lambda1[i]), float(self.gamma[i])

    def best_params(self) -> PenaltyParams:
        lam, gam = self.best
        if self.method == LASSO:
            return PenaltyParams.lasso(lam)
        return PenaltyParams.from_gamma(lam, gam)

    def __len__(self) -> int:
        return len(self.lambda1)

    def to_csv(self, path: str | Path) -> None:
        best = self.best_index
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda1", "gamma", "mean_cv_loss", "sd_cv_loss", "is_best"])
            for i in range(len(self)):
                w.writerow([format_float(self.lambda1[i]), format_float(self.gamma[i]),
                            format_float(self.mean_cv_loss[i]), format_float(self.sd_cv_loss[i]),
                            int(i == best)])


def _fold_losses(data: Dataset, link: LinkSpec, train, test, lambdas, gammas, method,
                 opts) -> np.ndarray:
    problem = Problem(data.subset(train), link)
    Xv, yv = data.X[test], data.y[test]
    out = np.empty((len(gammas), len(lambdas)))
    for g, gamma in enumerate(gammas):
        thetas = problem.path(_penalties(method, lambdas, gamma), opts)
        eta = Xv @ thetas.T
        out[g] = np.mean(-yv[:, None] * eta + link.F(eta), axis=0)
    return out


def cross_validate(data: Dataset, link: LinkSpec, cfg: CvConfig, method: str = LAVA,
                   opts: SolverOptions | None = None, n_jobs: int = 1) -> CvTable:
    """K-fold CV over the ``lambda1 x gamma`` grid (``gamma`` ignored for the Lasso).

    Results do not depend on ``n_jobs``: folds are evaluated independently and
    reduced in fold order.
    """
    if method not in (LAVA, LASSO):
        raise ValueError(f"unknown method {method!r}")
    data.check_link(link)
    lambdas = lambda1_grid(data, link, cfg)
    gammas = (math.inf,) if method == LASSO else cfg.gammas(data.p)
    folds = fold_assignment(data.n, cfg.n_folds, cfg.seed)
    everything = np.arange(data.n)
    jobs = [(np.setdiff1d(everything, f, assume_unique=True), f) for f in folds]

    def run(job):
        return _fold_losses(data, link, job[0], job[1], lambdas, gammas, method, opts)

    if n_jobs == 1:
        per_fold = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            per_fold = list(pool.map(run, jobs))
    losses = np.stack(per_fold)  # (K, G, L)
    mean = losses.mean(axis=0)
    sd = losses.std(axis=0, ddof=1)
    G, L = mean.shape
    return CvTable(
        lambda1=np.tile(lambdas, G),
        gamma=np.repeat(np.asarray(gammas, dtype=float), L),
        mean_cv_loss=mean.reshape(-1),
        sd_cv_loss=sd.reshape(-1),
        fold_losses=losses.reshape(len(folds), -1),
        method=method,
    )


def refit(data: Dataset, link: LinkSpec, table: CvTable,
          opts: SolverOptions | None = None) -> LavaFit:
    """Full-data fit at the CV choice, warm-started down the ``lambda1`` path."""
    lam, gam = table.best
    path_lams = np.unique(table.lambda1)[::-1]
    path_lams = path_lams[path_lams >= lam]
    seq = _penalties(table.method, path_lams, gam)
    problem = Problem(data, link)
    opts = opts or SolverOptions()
    theta0 = np.zeros(data.p)
    if len(seq) > 1:
        theta0 = problem.path(seq[:-1], opts)[-1]
    return problem.fit(seq[-1], opts, theta0=theta0)


def cv_fit(data: Dataset, link: LinkSpec, cfg: CvConfig, method: str = LAVA,
           opts: SolverOptions | None = None, n_jobs: int = 1,
           cv_opts: SolverOptions | None = None) -> tuple[LavaFit, CvTable]:
    """Cross-validate, then refit on all rows.

    ``cv_opts`` (default ``opts``) drives the fold fits, so a looser tolerance
    can be used there while the final fit keeps ``opts``.
    """
    table = cross_validate(data, link, cfg, method, cv_opts or opts, n_jobs)
    return refit(data, link, table, opts), table


def parse_grid(text: str | Sequence[float]) -> tuple[float, ...]:
    if isinstance(text, str):
        return tuple(float(v) for v in text.split(",") if v.strip())
    return tuple(float(v) for v in text)
