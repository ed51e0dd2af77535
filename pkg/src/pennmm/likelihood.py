"""Log-likelihoods with score and curvature for the linear, logistic, Poisson
and Cox proportional hazards models, plus the truncated-power cubic spline
basis used for time-varying intercepts.

All models take coefficient vectors without an implicit intercept; add a
column of ones to the design if one is wanted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

__all__ = [
    "FAMILIES",
    "CURVATURES",
    "ETA_CLAMP",
    "Dataset",
    "LikelihoodError",
    "SingularDesignError",
    "LikelihoodModel",
    "LinearModel",
    "LogisticModel",
    "PoissonModel",
    "CoxModel",
    "make_model",
    "check_full_rank",
    "spline_basis",
]

FAMILIES = ("linear", "logistic", "poisson", "cox")
CURVATURES = ("observed", "fisher")

# linear predictors are clamped to this range when evaluating GLM means
ETA_CLAMP = 35.0


class LikelihoodError(FloatingPointError):
    """Non-finite log-likelihood; ``eta`` holds the offending linear predictor."""

    def __init__(self, message, eta=None):
        super().__init__(message)
        self.eta = eta


class SingularDesignError(np.linalg.LinAlgError):
    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix, response and (for Cox models) the failure indicator.

    For survival data ``response`` holds the observed times
    ``Z = min(T, C)`` and ``status`` the indicator ``T <= C``.
    """

    design: np.ndarray
    response: np.ndarray
    status: Optional[np.ndarray] = None
    column_names: Sequence[str] = field(default=())

    def __post_init__(self):
        X = np.array(self.design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.response, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"design {X.shape} and response {y.shape} disagree")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        if self.status is not None:
            s = np.array(self.status, dtype=float).ravel()
            if s.shape != y.shape or not np.all((s == 0) | (s == 1)):
                raise ValueError("status must be a 0/1 vector with one entry per row")
            if np.any(y <= 0):
                raise ValueError("observed times must be positive")
            s.setflags(write=False)
            object.__setattr__(self, "status", s)
        names = list(self.column_names) or [f"x{j + 1}" for j in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise ValueError("column_names must have one label per design column")
        object.__setattr__(self, "column_names", tuple(names))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]

    def subset(self, columns) -> "Dataset":
        """Dataset restricted to the given design columns (indices or boolean mask)."""
        idx = np.flatnonzero(columns) if np.asarray(columns).dtype == bool else np.asarray(columns, dtype=int)
        return Dataset(
            self.design[:, idx],
            self.response,
            self.status,
            [self.column_names[j] for j in idx],
        )


def check_full_rank(X, rtol=1e-10):
    """Raise :class:`SingularDesignError` if ``X`` lacks full column rank.

    Uses a pivoted QR; the error names the smallest diagonal pivot.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[1] == 0:
        return
    if X.shape[0] < X.shape[1]:
        raise SingularDesignError(f"design has {X.shape[0]} rows for {X.shape[1]} columns", pivot=0.0)
    _, r, perm = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[-1] <= rtol * max(diag[0], 1.0):
        raise SingularDesignError(
            f"design is rank deficient: smallest pivot {diag[-1]:.3g} at column {perm[-1]}",
            pivot=float(diag[-1]),
        )


class LikelihoodModel:
    """Base class; subclasses supply the per-family formulas.

    The log-likelihood is a sum over observations (over failures for Cox),
    never an average.
    """

    family = ""

    def __init__(self, data: Dataset):
        self.data = data
        self.clamp_events = 0

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d

    def _eta(self, beta):
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.d,):
            raise ValueError(f"beta has shape {beta.shape}, expected ({self.d},)")
        return self.data.design @ beta

    def _clamped(self, eta):
        over = np.abs(eta) > ETA_CLAMP
        if over.any():
            self.clamp_events += int(over.sum())
            return np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        return eta

    def loglik(self, beta) -> float:
        raise NotImplementedError

    def score(self, beta) -> np.ndarray:
        return self.per_observation_scores(beta).sum(axis=0)

    def per_observation_scores(self, beta) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, beta) -> np.ndarray:
        raise NotImplementedError

    def curvature(self, beta, kind="observed") -> np.ndarray:
        """Observed Hessian, or ``-n I(beta)`` when ``kind == "fisher"``."""
        if kind not in CURVATURES:
            raise ValueError(f"curvature kind must be one of {CURVATURES}")
        if kind == "fisher":
            return self.fisher(beta)
        return self.hessian(beta)

    def fisher(self, beta) -> np.ndarray:
        # canonical links: expected and observed information coincide
        return self.hessian(beta)

    def saturated_loglik(self) -> float:
        """Upper bound used as the deviance reference."""
        raise NotImplementedError

    def deviance(self, beta) -> float:
        return 2.0 * (self.saturated_loglik() - self.loglik(beta))

    def _finite(self, value, eta):
        if not np.isfinite(value):
            raise LikelihoodError(f"non-finite {self.family} log-likelihood", eta=eta)
        return float(value)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, d={self.d})"


class LinearModel(LikelihoodModel):
    """Gaussian linear model with unit variance: ``-0.5 * ||y - X beta||^2``."""

    family = "linear"

    def __init__(self, data):
        super().__init__(data)
        X = data.design
        self._xtx = X.T @ X
        self._xty = X.T @ data.response

    def loglik(self, beta):
        eta = self._eta(beta)
        r = self.data.response - eta
        return self._finite(-0.5 * r @ r, eta)

    def score(self, beta):
        return self._xty - self._xtx @ np.asarray(beta, dtype=float)

    def per_observation_scores(self, beta):
        r = self.data.response - self._eta(beta)
        return self.data.design * r[:, None]

    def hessian(self, beta):
        return -self._xtx.copy()

    def saturated_loglik(self):
        return 0.0

    def rss(self, beta):
        return -2.0 * self.loglik(beta)


class LogisticModel(LikelihoodModel):
    family = "logistic"

    def _mean(self, eta):
        return 1.0 / (1.0 + np.exp(-self._clamped(eta)))

    def loglik(self, beta):
        eta = self._eta(beta)
        y = self.data.response
        return self._finite(np.sum(y * eta - np.logaddexp(0.0, eta)), eta)

    def score(self, beta):
        eta = self._eta(beta)
        return self.data.design.T @ (self.data.response - self._mean(eta))

    def per_observation_scores(self, beta):
        eta = self._eta(beta)
        return self.data.design * (self.data.response - self._mean(eta))[:, None]

    def hessian(self, beta):
        mu = self._mean(self._eta(beta))
        X = self.data.design
        return -(X.T * (mu * (1.0 - mu))) @ X

    def saturated_loglik(self):
        return 0.0


class PoissonModel(LikelihoodModel):
    """Poisson log-linear model; the ``log y!`` constant is dropped."""

    family = "poisson"

    def _mean(self, eta):
        return np.exp(self._clamped(eta))

    def loglik(self, beta):
        eta = self._eta(beta)
        y = self.data.response
        with np.errstate(over="ignore"):
            val = np.sum(y * eta - np.exp(eta))
        return self._finite(val, eta)

    def score(self, beta):
        eta = self._eta(beta)
        return self.data.design.T @ (self.data.response - self._mean(eta))

    def per_observation_scores(self, beta):
        eta = self._eta(beta)
        return self.data.design * (self.data.response - self._mean(eta))[:, None]

    def hessian(self, beta):
        mu = self._mean(self._eta(beta))
        X = self.data.design
        return -(X.T * mu) @ X

    def saturated_loglik(self):
        y = self.data.response
        pos = y > 0
        return float(np.sum(y[pos] * np.log(y[pos])) - y.sum())


class CoxModel(LikelihoodModel):
    """Cox partial likelihood with Breslow handling of tied failure times.

    The risk set of a failure at time ``t`` is every subject with observed
    time ``>= t``.  Per-observation scores attribute each failure's term to
    the failing subject; censored subjects get zero rows.
    """

    family = "cox"

    def __init__(self, data):
        if data.status is None:
            raise ValueError("Cox model requires a status vector")
        super().__init__(data)
        z = data.response
        order = np.argsort(-z, kind="stable")
        self._order = order
        zs = z[order]
        # last index (in descending order) of each block of tied times
        last = np.empty(len(zs), dtype=int)
        i = len(zs) - 1
        while i >= 0:
            j = i
            while j > 0 and zs[j - 1] == zs[i]:
                j -= 1
            last[j : i + 1] = i
            i = j - 1
        self._last = last
        self._fail = data.status[order] == 1

    def _risk_sums(self, beta, second=False):
        eta = self._eta(beta)
        shift = eta.max()
        w = np.exp(eta - shift)
        Xs = self.data.design[self._order]
        ws = w[self._order]
        s0 = np.cumsum(ws)[self._last]
        s1 = np.cumsum(ws[:, None] * Xs, axis=0)[self._last]
        s2 = None
        if second:
            outer = ws[:, None, None] * Xs[:, :, None] * Xs[:, None, :]
            s2 = np.cumsum(outer, axis=0)[self._last]
        return eta, shift, Xs, s0, s1, s2

    def loglik(self, beta):
        eta, shift, _, s0, _, _ = self._risk_sums(beta)
        f = self._fail
        val = np.sum(eta[self._order][f] - shift - np.log(s0[f]))
        return self._finite(val, eta)

    def per_observation_scores(self, beta):
        _, _, Xs, s0, s1, _ = self._risk_sums(beta)
        rows = np.where(self._fail[:, None], Xs - s1 / s0[:, None], 0.0)
        out = np.empty_like(rows)
        out[self._order] = rows
        return out

    def hessian(self, beta):
        _, _, _, s0, s1, s2 = self._risk_sums(beta, second=True)
        f = self._fail
        m1 = s1[f] / s0[f][:, None]
        m2 = s2[f] / s0[f][:, None, None]
        return -(m2.sum(axis=0) - m1.T @ m1)

    def saturated_loglik(self):
        # each partial-likelihood term is a log-probability, so 0 bounds it
        return 0.0


_FAMILY_CLASSES = {
    "linear": LinearModel,
    "logistic": LogisticModel,
    "poisson": PoissonModel,
    "cox": CoxModel,
}


def make_model(family: str, data: Dataset) -> LikelihoodModel:
    try:
        cls = _FAMILY_CLASSES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}") from None
    if (family == "cox") != (data.status is not None):
        raise ValueError("a status vector is required for, and only for, the Cox family")
    return cls(data)


def spline_basis(t, knot_quantiles=(0.10, 0.25, 0.50, 0.75, 0.90), return_knots=False):
    """Truncated power cubic basis ``[1, t, t^2, t^3, (t - k_1)_+^3, ...]``.

    ``t`` is standardized first and the knots are empirical quantiles of the
    standardized values.

    Returns
    -------
    basis : ndarray, shape (n, 4 + len(knot_quantiles))
    knots : ndarray
        Knot locations on the standardized scale, only if ``return_knots``.
    """
    t = np.asarray(t, dtype=float).ravel()
    if t.size < 10:
        raise ValueError("spline_basis needs at least 10 observations")
    sd = t.std()
    if sd == 0:
        raise ValueError("constant t: knots would coincide")
    ts = (t - t.mean()) / sd
    knots = np.quantile(ts, knot_quantiles)
    if np.any(np.diff(knots) <= 0):
        raise ValueError(f"duplicate knots {knots}; t has too few distinct values")
    cols = [np.ones_like(ts), ts, ts**2, ts**3]
    cols += [np.maximum(ts - k, 0.0) ** 3 for k in knots]
    basis = np.column_stack(cols)
    return (basis, knots) if return_knots else basis
