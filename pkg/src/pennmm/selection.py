"""Tuning-parameter selection by generalized cross-validation, exhaustive
best-subset search under AIC/BIC, and oracle fits on a known support."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .inference import penalty_weights
from .likelihood import LikelihoodModel
from .penalty import PenaltySpec
from .solver import FitConfig, FitResult, fit, fit_lqa, fit_mle

__all__ = [
    "GcvCurve",
    "SubsetSearchResult",
    "SubsetTable",
    "MAX_SUBSET_DIM",
    "default_lambda_grid",
    "effective_dof",
    "gcv_score",
    "gcv_select",
    "enumerate_subsets",
    "best_subset",
    "criterion_weight",
    "oracle_fit",
]

logger = logging.getLogger(__name__)

MAX_SUBSET_DIM = 25


@dataclass(frozen=True)
class GcvCurve:
    lambdas: np.ndarray
    scores: np.ndarray
    dof: np.ndarray
    chosen: int

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.chosen])


@dataclass(frozen=True)
class SubsetSearchResult:
    best_subset: np.ndarray
    criterion_value: float
    n_models_evaluated: int
    elapsed: float
    fit: FitResult
    criterion: str


def default_lambda_grid(n: int, num: int = 50, lo: float = 1e-3, hi: float = 2.0) -> np.ndarray:
    """``num`` log-spaced values spanning ``[lo, hi] * sqrt(log(n) / n)``."""
    scale = np.sqrt(np.log(n) / n)
    return np.geomspace(lo, hi, num) * scale


def effective_dof(model: LikelihoodModel, fit_result: FitResult) -> float:
    """``trace{(H - nE)^{-1} H}`` over the active coordinates."""
    idx = np.flatnonzero(fit_result.active)
    if idx.size == 0:
        return 0.0
    beta = fit_result.beta_hat
    H = model.hessian(beta)[np.ix_(idx, idx)]
    spec = fit_result.spec
    if spec.lam == 0:
        return float(idx.size)
    ek = penalty_weights(spec, beta)[idx]
    A = H - model.n * np.diag(ek)
    return float(np.trace(np.linalg.solve(A, H)))


def _deviance(model, beta):
    if model.family == "linear":
        return -2.0 * model.loglik(beta)
    return model.deviance(beta)


def gcv_score(model: LikelihoodModel, fit_result: FitResult):
    """Return ``(gcv, dof)`` with ``gcv = D / (n (1 - dof/n)^2)``.

    ``D`` is the residual sum of squares for the linear model and the
    deviance against the saturated log-likelihood otherwise (``-2 loglik``
    for the Cox partial likelihood).
    """
    n = model.n
    e = effective_dof(model, fit_result)
    dev = _deviance(model, fit_result.beta_hat)
    denom = n * (1.0 - e / n) ** 2
    if denom <= 0:
        return np.inf, e
    return dev / denom, e


def gcv_select(
    model: LikelihoodModel,
    penalty: PenaltySpec,
    lambda_grid=None,
    config: Optional[FitConfig] = None,
    method: str = "mm",
    beta0=None,
):
    """Fit along ``lambda_grid`` and pick the GCV minimizer.

    Parameters
    ----------
    penalty : PenaltySpec
        Template; its ``lam`` is replaced by each grid value.
    method : {"mm", "lqa"}
        Perturbed MM fit or the unperturbed drop-forever variant.
    beta0 : array, optional
        Shared start for every grid point (default: the MLE, computed once).

    Returns
    -------
    curve : GcvCurve
    best : FitResult
        Fit at the chosen lambda.  Ties go to the larger lambda.
    """
    config = config or FitConfig()
    grid = np.asarray(default_lambda_grid(model.n) if lambda_grid is None else lambda_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    order = np.argsort(grid, kind="stable")
    grid = grid[order]
    if beta0 is None:
        beta0 = fit_mle(model, config).beta_hat
    fitter = {"mm": fit, "lqa": fit_lqa}[method]
    scores = np.full(grid.size, np.inf)
    dofs = np.full(grid.size, np.nan)
    fits: List[Optional[FitResult]] = [None] * grid.size
    for i, lam in enumerate(grid):
        try:
            res = fitter(model, penalty.with_lambda(lam), beta0=beta0, config=config)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError, RuntimeError) as exc:
            logger.info("fit at lambda=%.4g failed: %s", lam, exc)
            continue
        fits[i] = res
        if not res.converged:
            continue
        scores[i], dofs[i] = gcv_score(model, res)
    if not np.isfinite(scores).any():
        raise RuntimeError("every fit along the lambda grid failed")
    best = scores.min()
    chosen = int(np.flatnonzero(scores == best)[-1])
    return GcvCurve(grid, scores, dofs, chosen), fits[chosen]


def criterion_weight(criterion: str, n: int) -> float:
    """Per-parameter charge ``0.5 * n * lam^2`` with lam^2 = 2/n (AIC) or log(n)/n (BIC)."""
    c = criterion.upper()
    if c == "AIC":
        return 1.0
    if c == "BIC":
        return 0.5 * np.log(n)
    raise ValueError(f"criterion must be AIC or BIC, got {criterion!r}")


@dataclass
class SubsetTable:
    """Log-likelihood of the MLE on every subset; shared by AIC and BIC."""

    masks: np.ndarray
    logliks: np.ndarray
    fits: list
    elapsed: float

    @property
    def sizes(self):
        return self.masks.sum(axis=1)


def _profile_loglik(model, fit_result):
    # Gaussian log-likelihood with sigma^2 profiled out (constants dropped)
    rss = max(-2.0 * model.loglik(fit_result.beta_hat), 1e-300)
    return -0.5 * model.n * np.log(rss / model.n)


def enumerate_subsets(model: LikelihoodModel, config: Optional[FitConfig] = None, max_dim: int = MAX_SUBSET_DIM) -> SubsetTable:
    """Fit the unpenalized model on all ``2**d`` subsets, the empty one included."""
    d = model.d
    if d > max_dim:
        raise ValueError(
            f"exhaustive search over d={d} covariates needs 2**{d} fits; the cost grows "
            f"exponentially, refusing above d={max_dim}"
        )
    config = config or FitConfig()
    start = time.perf_counter()
    masks = np.array(list(itertools.product([False, True], repeat=d)), dtype=bool).reshape(-1, d)
    logliks = np.empty(len(masks))
    fits = []
    for i, mask in enumerate(masks):
        res = fit_mle(model, config, support=mask)
        ll = _profile_loglik(model, res) if model.family == "linear" else model.loglik(res.beta_hat)
        logliks[i] = ll
        fits.append(res)
    return SubsetTable(masks, logliks, fits, time.perf_counter() - start)


def best_subset(model: LikelihoodModel, criterion: str = "BIC", config: Optional[FitConfig] = None, table: Optional[SubsetTable] = None) -> SubsetSearchResult:
    """Exhaustive search minimizing ``-loglik(S) + w |S|``.

    ``w`` is 1 for AIC and ``log(n) / 2`` for BIC (see :func:`criterion_weight`).

    For the linear model the log-likelihood has the error variance profiled
    out.  Pass ``table`` to reuse fits from :func:`enumerate_subsets`.
    """
    if table is None:
        table = enumerate_subsets(model, config)
    w = criterion_weight(criterion, model.n)
    values = -table.logliks + w * table.sizes
    best = int(np.argmin(values))
    return SubsetSearchResult(
        best_subset=table.masks[best].copy(),
        criterion_value=float(values[best]),
        n_models_evaluated=len(table.masks),
        elapsed=table.elapsed,
        fit=table.fits[best],
        criterion=criterion.upper(),
    )


def oracle_fit(model: LikelihoodModel, true_support, config: Optional[FitConfig] = None) -> FitResult:
    """Unpenalized MLE on the true support, zeros elsewhere."""
    mask = np.asarray(true_support, dtype=bool)
    if mask.shape != (model.d,):
        raise ValueError("true_support must be a boolean vector of length d")
    return fit_mle(model, config, support=mask)
