"""Residual-covariance test for a single edge W -> Y given covariates X."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .glm import Dataset, LinkSpec, format_float, write_columns_csv
from .penalty import PenaltyParams
from .selection import LAVA, CvConfig, cv_fit
from .solver import LavaFit, Problem, SolverOptions

_STD_NORMAL = NormalDist()
DEGENERATE_TOL = 1e-14


class DegenerateStatisticError(ArithmeticError):
    """The residual products have (numerically) zero variance."""


@dataclass(frozen=True)
class GcmResult:
    t_stat: float
    p_value: float
    reject: bool
    alpha: float
    n_used: int
    fit_y_summary: tuple[float, bool]
    fit_w_summary: tuple[float, bool]

    def to_csv(self, path: str | Path) -> None:
        write_columns_csv(
            path, ["t_stat", "p_value", "reject", "alpha", "n"],
            [[format_float(self.t_stat)], [format_float(self.p_value)],
             [str(self.reject).lower()], [format_float(self.alpha)], [str(self.n_used)]],
        )


def residuals(data: Dataset, link: LinkSpec, fit: LavaFit, y=None) -> np.ndarray:
    """``y - f(X theta_hat)``; ``y`` defaults to the dataset response."""
    y = data.y if y is None else np.asarray(y, dtype=float)
    return y - link.f(data.X @ fit.theta_hat)


def gcm_statistic(eps_y, eps_w) -> float:
    """Normalised mean of the residual products, using the 1/n variance."""
    a = np.asarray(eps_y, dtype=float)
    b = np.asarray(eps_w, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("residual vectors must be 1-d and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two residual pairs")
    R = a * b
    mean = R.mean()
    var = np.mean(R * R) - mean * mean
    if not var > DEGENERATE_TOL:
        raise DegenerateStatisticError(
            f"residual products have variance {var:.3g}; the statistic is undefined")
    return float(math.sqrt(n) * mean / math.sqrt(var))


def normal_quantile(prob: float) -> float:
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie strictly between 0 and 1")
    return _STD_NORMAL.inv_cdf(prob)


def two_sided_p_value(t: float) -> float:
    # erfc keeps precision in the far tail where 1 - cdf would cancel
    return math.erfc(abs(t) / math.sqrt(2.0))


def decide(t: float, alpha: float) -> bool:
    return abs(t) > normal_quantile(1.0 - alpha / 2.0)


def result_from_statistic(t: float, alpha: float, n: int, fit_y: LavaFit,
                          fit_w: LavaFit) -> GcmResult:
    return GcmResult(
        t_stat=t, p_value=two_sided_p_value(t), reject=decide(t, alpha), alpha=alpha,
        n_used=n,
        fit_y_summary=(fit_y.kkt_residual, fit_y.converged),
        fit_w_summary=(fit_w.kkt_residual, fit_w.converged),
    )


@dataclass(frozen=True)
class Fixed:
    """Fixed penalties for the Y and W regressions."""

    params_y: PenaltyParams
    params_w: PenaltyParams


def tuning_seeds(master_seed: int) -> tuple[int, int]:
    """Independent fold seeds for the two regressions, derived from one seed."""
    a, b = np.random.SeedSequence(master_seed).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def fit_one(data: Dataset, link: LinkSpec, tuning, method: str, seed: int | None,
            which: str, opts: SolverOptions | None = None,
            cv_opts: SolverOptions | None = None) -> LavaFit:
    data.check_link(link)
    if isinstance(tuning, Fixed):
        params = tuning.params_y if which == "y" else tuning.params_w
        return Problem(data, link).fit(params, opts)
    cfg = tuning if seed is None else replace(tuning, seed=seed)
    fit, _ = cv_fit(data, link, cfg, method, opts=opts, cv_opts=cv_opts)
    return fit


def gcm_edge_test(data: Dataset, link_y: LinkSpec, link_w: LinkSpec,
                  tuning: Fixed | CvConfig, alpha: float = 0.05, method: str = LAVA,
                  opts: SolverOptions | None = None, cv_opts: SolverOptions | None = None,
                  n_jobs: int = 1) -> GcmResult:
    """Test ``Y independent of W given X`` from the two penalised regressions.

    With CV tuning the two fold seeds are derived from ``tuning.seed`` so the
    regressions are tuned independently.
    """
    if data.w is None:
        raise ValueError("dataset has no w column")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    seeds = (None, None) if isinstance(tuning, Fixed) else tuning_seeds(tuning.seed)
    data_w = data.with_response(data.w)
    jobs = [(data, link_y, seeds[0], "y"), (data_w, link_w, seeds[1], "w")]

    def run(job):
        d, link, seed, which = job
        return fit_one(d, link, tuning, method, seed, which, opts, cv_opts)

    if n_jobs > 1:
        with ThreadPoolExecutor(2) as pool:
            fit_y, fit_w = pool.map(run, jobs)
    else:
        fit_y, fit_w = map(run, jobs)
    t = gcm_statistic(residuals(data, link_y, fit_y), residuals(data_w, link_w, fit_w))
    return result_from_statistic(t, alpha, data.n, fit_y, fit_w)
