"""Monte-Carlo studies: estimation error of GenLava vs the Lasso, and the size
and power of the residual-covariance edge test.

Every replication derives its own seeds from the master seed and its
position in the grid, replications are mapped in order over a thread pool,
and nothing time-dependent is written unless ``timing`` is switched on, so
the output tables do not depend on the number of threads.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .gcm import (
    DegenerateStatisticError,
    decide,
    gcm_statistic,
    residuals,
    tuning_seeds,
)
from .glm import IDENTITY, LOGISTIC, LinkSpec, format_float, write_columns_csv
from .selection import LASSO, LAVA, CvConfig, DegenerateDataError, cv_fit
from .simulate import (
    DesignKind,
    GammaDecay,
    ResponseKind,
    ScenarioConfig,
    draw_scenario,
    with_b_effect,
)
from .solver import SolverOptions

GENLAVA = "GenLava"
LASSO_METHOD = "Lasso"
METHODS = {GENLAVA: LAVA, LASSO_METHOD: LASSO}

# tolerances for the fold fits; the final refit keeps the default options
CV_SOLVER_OPTIONS = SolverOptions(tol=1e-6, kkt_tol=1e-4)

# numerical failures that turn a replication into a flagged row
FIT_ERRORS = (ArithmeticError, DegenerateDataError, ValueError, np.linalg.LinAlgError)


def prediction_error_metric(beta_hat, beta0, Sigma, Gamma) -> float:
    """``(beta_hat - beta0)' (Sigma + Gamma'Gamma) (beta_hat - beta0)``."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    p = beta0.size
    if (beta_hat.ndim != 1 or beta_hat.shape != beta0.shape or Sigma.shape != (p, p)
            or Gamma.shape[1] != p):
        raise ValueError("shape mismatch between beta, Sigma and Gamma")
    d = beta_hat - beta0
    Gd = Gamma @ d if Gamma.size else np.zeros(0)
    # written as a sum of two quadratic forms so the result is never negative
    # through rounding when Sigma is PSD
    return float(max(d @ Sigma @ d, 0.0) + Gd @ Gd)


def derive_seed(*key: int) -> int:
    """A 64-bit seed that is a pure function of the integer key."""
    return int(np.random.SeedSequence(list(key)).generate_state(1, dtype=np.uint64)[0])


def ordered_map(fn: Callable, items: Sequence, threads: int) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool (0 = auto)."""
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads if threads > 0 else None) as pool:
        return list(pool.map(fn, items))


def response_link(response: ResponseKind) -> LinkSpec:
    return IDENTITY if response is ResponseKind.LINEAR else LOGISTIC


# --------------------------------------------------------------- estimation

@dataclass(frozen=True)
class EstimationRecord:
    rep: int
    method: str
    error_metric: float
    cv_lambda1: float
    cv_gamma: float
    wall_seconds: float
    design: str
    q: int
    nu: float
    s: int
    n: int
    p: int
    l2_error: float
    failed: bool

    FIELDS = ("rep", "method", "error_metric", "cv_lambda1", "cv_gamma", "wall_seconds",
              "design", "q", "nu", "s", "n", "p", "l2_error", "failed")


@dataclass(frozen=True)
class EstimationConfig:
    n: int = 800
    p: int = 200
    designs: tuple[str, ...] = ("toeplitz",)
    qs: tuple[int, ...] = (5,)
    nus: tuple[float, ...] = (1.0,)
    ss: tuple[int, ...] = (5,)
    reps: int = 50
    seed: int = 0
    response: str = "logistic"
    gamma_decay: str = GammaDecay.FACTORS.value
    methods: tuple[str, ...] = (GENLAVA, LASSO_METHOD)
    cv: CvConfig = field(default_factory=lambda: CvConfig(n_lambda1=25))
    cv_opts: SolverOptions = CV_SOLVER_OPTIONS
    opts: SolverOptions = field(default_factory=SolverOptions)
    timing: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        ResponseKind(self.response)
        if ResponseKind(self.response) is ResponseKind.LINEAR_W:
            raise ValueError("the estimation study uses the logistic or linear response")

    def scenarios(self) -> list[ScenarioConfig]:
        out = []
        for k, (design, q, nu, s) in enumerate(
                itertools.product(self.designs, self.qs, self.nus, self.ss)):
            out.append(ScenarioConfig(
                n=self.n, p=self.p, q=q, s=s, nu=nu, design=design, response=self.response,
                seed=derive_seed(self.seed, k), gamma_decay=self.gamma_decay))
        return out


def _estimation_rep(cfg: EstimationConfig, scen: ScenarioConfig, rep: int) -> list[EstimationRecord]:
    sc = draw_scenario(scen, rep)
    link = response_link(scen.response)
    cv = replace(cfg.cv, seed=derive_seed(scen.seed, rep, 1))
    common = dict(rep=rep, design=scen.design.value, q=scen.q, nu=scen.nu, s=scen.s,
                  n=scen.n, p=scen.p)
    out = []
    for name in cfg.methods:
        t0 = time.perf_counter()
        try:
            fit, table = cv_fit(sc.data, link, cv, METHODS[name], opts=cfg.opts,
                                cv_opts=cfg.cv_opts)
        except FIT_ERRORS:
            out.append(EstimationRecord(method=name, error_metric=math.nan, cv_lambda1=math.nan,
                                        cv_gamma=math.nan, wall_seconds=math.nan,
                                        l2_error=math.nan, failed=True, **common))
            continue
        wall = time.perf_counter() - t0 if cfg.timing else math.nan
        lam, gam = table.best
        out.append(EstimationRecord(
            method=name,
            error_metric=prediction_error_metric(fit.beta_hat, sc.beta0, sc.Sigma, sc.Gamma),
            cv_lambda1=lam, cv_gamma=gam, wall_seconds=wall,
            l2_error=float(np.linalg.norm(fit.beta_hat - sc.beta0)),
            failed=not fit.converged, **common))
    return out


def run_estimation_benchmark(cfg: EstimationConfig, threads: int = 1) -> list[EstimationRecord]:
    """Per replication: draw a dataset, CV-fit every method, score ``beta_hat``.

    A replication whose fit raises a numerical error is kept as a row with
    NaN metrics and ``failed=True``; a fit that hits the iteration cap is
    scored but also flagged.
    """
    jobs = [(scen, rep) for scen in cfg.scenarios() for rep in range(cfg.reps)]
    rows = ordered_map(lambda job: _estimation_rep(cfg, *job), jobs, threads)
    return [r for chunk in rows for r in chunk]


def median_errors(records: Iterable[EstimationRecord], attr: str = "error_metric") -> dict[str, float]:
    by: dict[str, list[float]] = {}
    for r in records:
        v = getattr(r, attr)
        if not r.failed and math.isfinite(v):
            by.setdefault(r.method, []).append(v)
    return {m: float(np.median(v)) for m, v in by.items()}


def estimation_summary(records: Sequence[EstimationRecord]) -> list[dict]:
    keys = sorted({(r.design, r.q, r.nu, r.s, r.method) for r in records},
                  key=lambda k: (k[0], k[1], k[2], k[3], k[4]))
    out = []
    for key in keys:
        rows = [r for r in records if (r.design, r.q, r.nu, r.s, r.method) == key]
        ok = [r.error_metric for r in rows if not r.failed and math.isfinite(r.error_metric)]
        out.append(dict(design=key[0], q=key[1], nu=key[2], s=key[3], method=key[4],
                        reps_used=len(ok), failures=len(rows) - len(ok),
                        median_error=float(np.median(ok)) if ok else math.nan,
                        mean_error=float(np.mean(ok)) if ok else math.nan))
    return out


# ---------------------------------------------------------------- inference

@dataclass(frozen=True)
class InferenceRecord:
    rep: int
    method: str
    b_effect: float
    t_stat: float
    reject: bool
    p_value: float
    failed: bool

    FIELDS = ("rep", "method", "b_effect", "t_stat", "reject", "p_value", "failed")


@dataclass(frozen=True)
class InferenceConfig:
    b_grid: tuple[float, ...] = (0.0, 0.03, 0.06, 0.1, 0.13, 0.16, 0.2)
    n: int = 1000
    p: int = 100
    q: int = 5
    s: int = 5
    nu: float = 1.0
    design: str = DesignKind.EXPDECAY.value
    reps: int = 200
    alpha: float = 0.05
    seed: int = 0
    gamma_decay: str = GammaDecay.FACTORS.value
    delta_w_mode: str = "unit-ones"
    methods: tuple[str, ...] = (GENLAVA, LASSO_METHOD)
    cv: CvConfig = field(default_factory=lambda: CvConfig(n_lambda1=25))
    cv_opts: SolverOptions = CV_SOLVER_OPTIONS
    opts: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.b_grid:
            raise ValueError("b_grid must not be empty")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie strictly between 0 and 1")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(n=self.n, p=self.p, q=self.q, s=self.s, nu=self.nu,
                              design=self.design, response=ResponseKind.LINEAR_W,
                              seed=derive_seed(self.seed, 0), delta_w_mode=self.delta_w_mode,
                              gamma_decay=self.gamma_decay)


def _inference_rep(cfg: InferenceConfig, rep: int) -> list[InferenceRecord]:
    base = cfg.scenario()
    seed_y, seed_w = tuning_seeds(derive_seed(base.seed, rep, 2))
    cv_y, cv_w = replace(cfg.cv, seed=seed_y), replace(cfg.cv, seed=seed_w)
    out = []
    # X, U and W do not depend on b, so the W regression is shared across the b grid
    first = draw_scenario(base, rep)
    data_w = first.data.with_response(first.data.w)
    eps_w = {}
    for name in cfg.methods:
        try:
            fit_w, _ = cv_fit(data_w, IDENTITY, cv_w, METHODS[name], opts=cfg.opts,
                              cv_opts=cfg.cv_opts)
            eps_w[name] = residuals(data_w, IDENTITY, fit_w)
        except FIT_ERRORS:
            eps_w[name] = None
    for b in cfg.b_grid:
        sc = draw_scenario(with_b_effect(base, b), rep)
        for name in cfg.methods:
            t = math.nan
            if eps_w[name] is not None:
                try:
                    fit_y, _ = cv_fit(sc.data, LOGISTIC, cv_y, METHODS[name], opts=cfg.opts,
                                      cv_opts=cfg.cv_opts)
                    t = gcm_statistic(residuals(sc.data, LOGISTIC, fit_y), eps_w[name])
                except FIT_ERRORS + (DegenerateStatisticError,):
                    pass
            failed = not math.isfinite(t)
            p_value = math.nan if failed else math.erfc(abs(t) / math.sqrt(2.0))
            out.append(InferenceRecord(rep=rep, method=name, b_effect=float(b), t_stat=t,
                                       reject=False if failed else decide(t, cfg.alpha),
                                       p_value=p_value, failed=failed))
    return out


def run_inference_benchmark(cfg: InferenceConfig, threads: int = 1):
    """Returns ``(records, summary)``; summary rows give rejection rates per method and b."""
    chunks = ordered_map(lambda rep: _inference_rep(cfg, rep), list(range(cfg.reps)), threads)
    records = [r for chunk in chunks for r in chunk]
    return records, inference_summary(records, cfg)


def inference_summary(records: Sequence[InferenceRecord], cfg: InferenceConfig) -> list[dict]:
    out = []
    for name in cfg.methods:
        for b in cfg.b_grid:
            rows = [r for r in records if r.method == name and r.b_effect == float(b)]
            ok = [r for r in rows if not r.failed]
            rate = sum(r.reject for r in ok) / len(ok) if ok else math.nan
            out.append(dict(method=name, b_effect=float(b), reps_used=len(ok),
                            failures=len(rows) - len(ok), rejection_rate=rate))
    return out


def rejection_rates(summary: Sequence[dict]) -> dict[tuple[str, float], float]:
    return {(row["method"], row["b_effect"]): row["rejection_rate"] for row in summary}


# ----------------------------------------------------------------- CSV out

def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_records_csv(path: str | Path, records: Sequence, fields: Sequence[str]) -> None:
    cols = [[_cell(getattr(r, f)) for r in records] for f in fields]
    write_columns_csv(path, list(fields), cols)


def write_summary_csv(path: str | Path, rows: Sequence[dict]) -> None:
    if not rows:
        raise ValueError("empty summary")
    fields = list(rows[0])
    write_columns_csv(path, fields, [[_cell(r[f]) for r in rows] for f in fields])
