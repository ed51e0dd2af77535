"""Sandwich covariance for penalized estimates.

The bread is the Hessian of the minorizer at the estimate,
``loglik''(beta) - n E``, and the meat is ``n`` times the empirical
covariance of the per-observation scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .likelihood import LikelihoodModel
from .penalty import PenaltySpec, curvature_weight
from .solver import FitResult

__all__ = ["CovarianceReport", "sandwich_cov", "meat_centered", "meat_shifted", "penalty_weights"]


@dataclass(frozen=True)
class CovarianceReport:
    """Sandwich covariance of a fit.

    ``available[j]`` is False where the bread could not be inverted for
    coordinate ``j``; those rows and columns of ``cov`` are zero and ``se[j]``
    is 0.
    """

    cov: np.ndarray
    se: np.ndarray
    available: np.ndarray
    bread_condition: float
    dispersion: float = 1.0


def meat_centered(scores: np.ndarray) -> np.ndarray:
    """``sum_i g_i g_i' - n gbar gbar'`` (n times the score covariance)."""
    n = scores.shape[0]
    gbar = scores.mean(axis=0)
    return scores.T @ scores - n * np.outer(gbar, gbar)


def meat_shifted(scores: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Same quantity computed from the shifted scores ``g_i - shift``.

    Centering removes any common shift, so this must agree with
    :func:`meat_centered`; keeping both forms guards the algebra.
    """
    n = scores.shape[0]
    h = scores - shift
    hbar = h.mean(axis=0)
    return h.T @ h - n * np.outer(hbar, hbar)


def penalty_weights(spec: PenaltySpec, beta, active=None):
    """Diagonal of E at ``beta``; ``inf`` where it is undefined (eps = 0, beta_j = 0)."""
    beta = np.asarray(beta, dtype=float)
    ek = np.zeros_like(beta)
    for j, b in enumerate(beta):
        if spec.epsilon == 0 and b == 0:
            ek[j] = np.inf if spec.lam > 0 else 0.0
        else:
            ek[j] = curvature_weight(spec, b)
    return ek


def sandwich_cov(model: LikelihoodModel, spec: PenaltySpec, fit: FitResult) -> CovarianceReport:
    """Sandwich covariance ``B^{-1} V B^{-1}`` at ``fit.beta_hat``.

    ``spec`` must carry the epsilon used by the fit (``fit.spec`` does).
    Coordinates with an infinite or non-invertible bread entry are reported
    unavailable.  For the linear model the meat is inflated by
    ``n / (n - |active|)`` so that its scale matches the residual variance
    estimate ``RSS / (n - |active|)``.
    """
    beta = np.asarray(fit.beta_hat, dtype=float)
    n, d = model.n, model.d
    ek = penalty_weights(spec, beta)
    usable = np.isfinite(ek)
    if fit.method == "mle":
        # coordinates outside a submodel were never estimated
        usable &= fit.active
    idx = np.flatnonzero(usable)

    scores = model.per_observation_scores(beta)
    meat = meat_centered(scores)
    dispersion = 1.0
    if model.family == "linear":
        k = int(fit.active.sum())
        rss = float(np.sum((model.data.response - model.data.design @ beta) ** 2))
        dof = max(n - k, 1)
        dispersion = rss / dof
        meat = meat * (n / dof)

    bread = model.hessian(beta)[np.ix_(idx, idx)] - n * np.diag(ek[idx])
    cov = np.zeros((d, d))
    available = np.zeros(d, dtype=bool)
    cond = np.inf
    if idx.size:
        cond = float(np.linalg.cond(bread))
        try:
            inv = np.linalg.inv(bread)
        except np.linalg.LinAlgError:
            inv = None
        if inv is not None and np.all(np.isfinite(inv)):
            block = inv @ meat[np.ix_(idx, idx)] @ inv
            block = 0.5 * (block + block.T)
            ok = np.isfinite(np.diag(block)) & (np.diag(block) >= 0)
            cov[np.ix_(idx, idx)] = np.where(np.outer(ok, ok), block, 0.0)
            available[idx] = ok
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return CovarianceReport(cov=cov, se=se, available=available, bread_condition=cond, dispersion=dispersion)
