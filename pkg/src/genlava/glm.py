"""Link functions, the GLM M-loss and its gradient.

The loss for a single observation is ``l(y, eta) = -y * eta + F(eta)`` where
``F`` is an antiderivative of the (increasing) link ``f``.  Two families are
supported: the identity link (squared-error loss up to a term free of
``eta``) and the logistic link (the Bernoulli negative log-likelihood).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class LinkFamily(enum.IntEnum):
    IDENTITY = 0
    LOGISTIC = 1


def _sigmoid(eta):
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(eta):
    eta = np.asarray(eta, dtype=float)
    return np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))


@dataclass(frozen=True)
class LinkSpec:
    """A link ``f`` together with its antiderivative ``F`` and derivative."""

    family: LinkFamily

    @classmethod
    def from_name(cls, name: str) -> "LinkSpec":
        try:
            return cls(LinkFamily[name.strip().upper()])
        except KeyError:
            raise ValueError(f"unknown link family {name!r}") from None

    @property
    def name(self) -> str:
        return self.family.name.lower()

    def f(self, eta):
        if self.family is LinkFamily.IDENTITY:
            return np.asarray(eta, dtype=float) * 1.0
        return _sigmoid(eta)

    def F(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.family is LinkFamily.IDENTITY:
            return 0.5 * eta * eta
        return _softplus(eta)

    def fprime(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.family is LinkFamily.IDENTITY:
            return np.ones_like(eta)
        s = _sigmoid(eta)
        return s * (1.0 - s)


IDENTITY = LinkSpec(LinkFamily.IDENTITY)
LOGISTIC = LinkSpec(LinkFamily.LOGISTIC)


def _check_finite(x, what="eta"):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} must be finite")


def link_eval(link: LinkSpec, eta):
    """Evaluate ``f(eta)``; scalar in, scalar out."""
    _check_finite(eta)
    out = link.f(eta)
    return float(out) if np.ndim(out) == 0 else out


def loss_eval(link: LinkSpec, y, eta):
    """Per-observation loss ``-y * eta + F(eta)``."""
    _check_finite(eta)
    out = -np.asarray(y, dtype=float) * np.asarray(eta, dtype=float) + link.F(eta)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response ``y``, design ``X`` (n x p) and an optional auxiliary response ``w``."""

    y: np.ndarray
    X: np.ndarray
    w: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        X = np.ascontiguousarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        n, p = X.shape
        if y.shape[0] != n:
            raise ValueError(f"y has {y.shape[0]} entries but X has {n} rows")
        if n < 1:
            raise ValueError("need at least one observation")
        if p < 1:
            raise ValueError("need at least one feature")
        _check_finite(y, "y")
        _check_finite(X, "X")
        w = self.w
        if w is not None:
            w = np.ascontiguousarray(w, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ValueError("w must have one entry per row of X")
            _check_finite(w, "w")
            w.setflags(write=False)
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != p:
                raise ValueError("feature_names must have one entry per column")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"x{j + 1}" for j in range(self.p))

    def subset(self, rows) -> "Dataset":
        w = None if self.w is None else self.w[rows]
        return Dataset(self.y[rows], self.X[rows], w, self.feature_names)

    def with_response(self, y) -> "Dataset":
        """Same design, different response (used to regress ``w`` on ``X``)."""
        return Dataset(y, self.X, None, self.feature_names)

    def check_link(self, link: LinkSpec) -> None:
        if link.family is LinkFamily.LOGISTIC and not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("logistic fits need every y in {0, 1}")


def _check_theta(data: Dataset, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != data.p:
        raise ValueError(f"theta has length {theta.shape[0]}, expected p={data.p}")
    return theta


def empirical_loss(data: Dataset, link: LinkSpec, theta) -> float:
    """Mean loss ``(1/n) sum_i l(y_i, x_i' theta)``."""
    theta = _check_theta(data, theta)
    eta = data.X @ theta
    return float(np.mean(-data.y * eta + link.F(eta)))


def loss_gradient(data: Dataset, link: LinkSpec, theta) -> np.ndarray:
    """Gradient ``(1/n) sum_i (f(x_i' theta) - y_i) x_i``."""
    theta = _check_theta(data, theta)
    eta = data.X @ theta
    return data.X.T @ (link.f(eta) - data.y) / data.n


# --- CSV I/O ---------------------------------------------------------------


class DatasetFormatError(ValueError):
    pass


def read_dataset_csv(path: str | Path) -> Dataset:
    """Read a dataset CSV: header row, a ``y`` column, optional ``w``, features."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        if "y" not in header:
            raise DatasetFormatError(f"{path}: line 1: missing 'y' column")
        if len(set(header)) != len(header):
            raise DatasetFormatError(f"{path}: line 1: duplicate column names")
        iy = header.index("y")
        iw = header.index("w") if "w" in header else None
        feat = [i for i, h in enumerate(header) if i not in (iy, iw)]
        if not feat:
            raise DatasetFormatError(f"{path}: line 1: no feature columns")
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DatasetFormatError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    return Dataset(
        y=arr[:, iy],
        X=arr[:, feat],
        w=None if iw is None else arr[:, iw],
        feature_names=[header[i] for i in feat],
    )


def write_dataset_csv(data: Dataset, path: str | Path) -> None:
    cols: list[tuple[str, np.ndarray]] = [("y", data.y)]
    if data.w is not None:
        cols.append(("w", data.w))
    cols += [(name, data.X[:, j]) for j, name in enumerate(data.names)]
    write_columns_csv(path, [c[0] for c in cols], [c[1] for c in cols])


def format_float(x: float) -> str:
    return repr(float(x))


def write_columns_csv(path: str | Path, header: Sequence[str], columns: Sequence) -> None:
    """Write equal-length columns to CSV using round-trip float formatting."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow(
                [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
