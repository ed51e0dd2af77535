"""MM-Newton maximization of the perturbed penalized likelihood

    Q_eps(beta) = loglik(beta) - n * sum_j p_eps(|beta_j|).

Each iteration builds the quadratic minorizer S_k of Q_eps at the current
point, takes a Newton step on it and halves the step until S_k increases.
For the linear model the minorizer is itself quadratic and the step is the
ridge-type closed form ``(X'X + n E_k)^{-1} X'y``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy import linalg

from .likelihood import CURVATURES, LikelihoodError, LikelihoodModel, check_full_rank
from .penalty import (
    PenaltySpec,
    curvature_weight,
    derivative_plus,
    epsilon_rule,
    lasso,
    perturbed_derivative,
    perturbed_value,
    second_derivative_plus,
)

__all__ = [
    "FitConfig",
    "TraceRecord",
    "FitResult",
    "SurrogateState",
    "LineSearchFailed",
    "AscentViolation",
    "q_eps",
    "grad_q_eps",
    "grad_q",
    "surrogate",
    "mm_step",
    "fit",
    "fit_mle",
    "fit_lqa",
    "rate_diagnostic",
    "contraction_ratios",
    "ascent_violations",
]

logger = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
LINE_SEARCH_FAILED = "line_search_failed"

# relative slack for comparing objective values that agree to rounding
ASCENT_SLACK = 1e-12


class LineSearchFailed(RuntimeError):
    pass


class AscentViolation(RuntimeError):
    """Q_eps decreased although the minorizer increased: a bug, not bad data."""


@dataclass(frozen=True)
class FitConfig:
    """Solver settings.

    Parameters
    ----------
    tau : float
        Convergence tolerance.  Iteration stops once every
        ``|dQ_eps/dbeta_j| < tau / 2``; afterwards coefficients with
        ``|dQ/dbeta_j| > tau`` are set to zero.
    max_iter : int
    curvature : {"observed", "fisher"}
        Second-derivative matrix used in the Newton step.
    max_halvings : int
        Step-halving attempts before giving up on an iteration.
    epsilon_override : float, optional
        Use this perturbation instead of the rule based on the start.
    refresh_epsilon : bool
        When the zero rule flags a coordinate, retry with epsilon rescaled to
        the flagged magnitudes and keep the retry only if it changes which
        coordinates are flagged.  Ignored when ``epsilon_override`` is set.
    """

    tau: float = 1e-8
    max_iter: int = 500
    curvature: str = "observed"
    max_halvings: int = 30
    epsilon_override: Optional[float] = None
    refresh_epsilon: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.max_iter < 1 or self.max_halvings < 1:
            raise ValueError("max_iter and max_halvings must be positive")
        if self.curvature not in CURVATURES:
            raise ValueError(f"curvature must be one of {CURVATURES}")
        if self.epsilon_override is not None and self.epsilon_override < 0:
            raise ValueError("epsilon_override must be nonnegative")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    q_eps: float
    alpha: float
    grad_max: float
    beta: np.ndarray = field(repr=False)
    # objective value after the LQA drop rule redefined the objective, if it did
    q_restart: Optional[float] = None

    @property
    def baseline(self) -> float:
        """Value the next iteration has to beat."""
        return self.q_eps if self.q_restart is None else self.q_restart


@dataclass
class FitResult:
    """Outcome of :func:`fit`.

    ``beta_eps`` is the converged maximizer of Q_eps before the zero rule;
    ``beta_hat`` is the same vector with deleted coordinates set to 0.
    """

    beta_hat: np.ndarray
    active: np.ndarray
    epsilon: float
    iterations: int
    trace: List[TraceRecord]
    status: str
    zero_rule_gradients: np.ndarray
    beta_eps: np.ndarray
    spec: PenaltySpec
    config: FitConfig
    beta0: Optional[np.ndarray] = None
    epsilon_degenerate: bool = False
    shifted_solves: int = 0
    method: str = "mm"
    refit: bool = False
    n_obs: int = 0
    epsilon_refreshes: int = 0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def n_zero(self) -> int:
        return int((~self.active).sum())

    def q_values(self) -> np.ndarray:
        return np.array([r.q_eps for r in self.trace])


@dataclass(frozen=True)
class SurrogateState:
    """Minorizer of Q_eps at ``center``.

    ``ek_diag[j] = p'(|center_j|+) / (eps + |center_j|)``; the minorizer is

        S(beta) = loglik(beta) - n * sum_j [p_eps(|c_j|) + 0.5 * ek_j * (beta_j^2 - c_j^2)].
    """

    center: np.ndarray
    ek_diag: np.ndarray
    spec: PenaltySpec

    @cached_property
    def _base(self) -> float:
        c = self.center
        return float(np.sum(perturbed_value(self.spec, c)) - 0.5 * np.sum(self.ek_diag * c * c))

    def penalty(self, beta) -> float:
        return self._base + 0.5 * float(np.sum(self.ek_diag * beta * beta))

    def value(self, model: LikelihoodModel, beta) -> float:
        return model.loglik(beta) - model.n * self.penalty(beta)

    def gradient(self, model: LikelihoodModel, beta) -> np.ndarray:
        return model.score(beta) - model.n * self.ek_diag * beta


def q_eps(model: LikelihoodModel, spec: PenaltySpec, beta) -> float:
    """Perturbed penalized log-likelihood; ordinary Q when ``spec.epsilon == 0``."""
    beta = np.asarray(beta, dtype=float)
    return model.loglik(beta) - model.n * float(np.sum(perturbed_value(spec, beta)))


def grad_q_eps(model: LikelihoodModel, spec: PenaltySpec, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    return model.score(beta) - model.n * np.sign(beta) * perturbed_derivative(spec, beta)


def grad_q(model: LikelihoodModel, spec: PenaltySpec, beta) -> np.ndarray:
    """Gradient of the unperturbed Q using right derivatives at ``|beta_j|``.

    Q has a kink at ``beta_j == 0``; there the sign of the score picks the side.
    """
    beta = np.asarray(beta, dtype=float)
    g = model.score(beta)
    s = np.where(beta != 0, np.sign(beta), np.sign(g))
    return g - model.n * s * derivative_plus(spec, np.abs(beta))


def surrogate(spec: PenaltySpec, beta_k) -> SurrogateState:
    beta_k = np.array(beta_k, dtype=float)
    ek = np.atleast_1d(np.asarray(curvature_weight(spec, beta_k), dtype=float))
    return SurrogateState(beta_k, ek, spec)


def _slack(x):
    return ASCENT_SLACK * max(1.0, abs(x))


class _System:
    """Cholesky solves for the positive definite ``A = -H + n E``.

    Falls back to ``A + delta I`` with ``delta = 1e-10 * trace(A) / d`` when
    the factorization fails; each fallback is counted.
    """

    def __init__(self):
        self.shifts = 0

    def solve(self, A, b):
        try:
            return linalg.cho_solve(linalg.cho_factor(A, check_finite=False), b, check_finite=False)
        except linalg.LinAlgError:
            pass
        delta = 1e-10 * max(np.trace(A) / A.shape[0], 1e-300)
        self.shifts += 1
        logger.debug("Cholesky failed; retrying with shift %.3g", delta)
        try:
            return linalg.cho_solve(
                linalg.cho_factor(A + delta * np.eye(A.shape[0]), check_finite=False), b, check_finite=False
            )
        except linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"Newton system is singular even after shift {delta:.3g}; smallest diagonal {np.min(np.diag(A)):.3g}"
            ) from exc


def _restricted(vec_or_mat, idx):
    if vec_or_mat.ndim == 1:
        return vec_or_mat[idx]
    return vec_or_mat[np.ix_(idx, idx)]


def mm_step(model, spec, state: SurrogateState, config: FitConfig = FitConfig(), free=None, _system=None):
    """One MM iteration from ``state.center``.

    Parameters
    ----------
    free : array of int, optional
        Coordinates allowed to move; the rest stay at their current value.

    Returns
    -------
    beta_next : ndarray
    alpha : float
        Step length actually used (1 for the linear closed form).

    Raises
    ------
    LineSearchFailed
        No ``alpha = 2**-v``, ``v < max_halvings``, increased the minorizer.
    """
    system = _system or _System()
    beta = state.center
    d = beta.shape[0]
    idx = np.arange(d) if free is None else np.asarray(free, dtype=int)
    n = model.n
    H = model.curvature(beta, config.curvature)
    if free is not None:
        H = _restricted(H, idx)
    A = -H + n * np.diag(state.ek_diag[idx])
    s_old = state.value(model, beta)

    if model.family == "linear":
        # closed form on the free block, fixed coordinates entering through X'y
        if free is None:
            xty = model._xty
        else:
            fixed = np.setdiff1d(np.arange(d), idx)
            xty = model._xty[idx] - model._xtx[np.ix_(idx, fixed)] @ beta[fixed]
        nxt = beta.copy()
        nxt[idx] = system.solve(A, xty)
        s_new = state.value(model, nxt)
        if s_new < s_old - _slack(s_old):
            raise LineSearchFailed(f"closed-form step decreased the minorizer by {s_old - s_new:.3g}")
        return nxt, 1.0

    grad = state.gradient(model, beta)[idx]
    direction = system.solve(A, grad)
    predicted = 0.5 * float(grad @ direction)
    alpha = 1.0
    for _ in range(config.max_halvings):
        nxt = beta.copy()
        nxt[idx] = beta[idx] + alpha * direction
        try:
            s_new = state.value(model, nxt)
        except LikelihoodError:
            alpha *= 0.5
            continue
        if s_new > s_old:
            return nxt, alpha
        # gain below rounding: accept the full step if it loses nothing measurable
        if alpha == 1.0 and predicted <= _slack(s_old) and s_new >= s_old - _slack(s_old):
            return nxt, alpha
        alpha *= 0.5
    raise LineSearchFailed(
        f"no step among 2^-0..2^-{config.max_halvings - 1} increased the minorizer "
        f"(predicted gain {predicted:.3g})"
    )


def _run(model, spec, beta, config):
    """Iterate the MM map until the perturbed gradient is below tau / 2."""
    beta = np.array(beta, dtype=float)
    free = np.ones(model.d, dtype=bool)
    system = _System()
    q = q_eps(model, spec, beta)
    g = grad_q_eps(model, spec, beta)
    trace = [TraceRecord(0, q, float("nan"), float(np.max(np.abs(g), initial=0.0)), beta.copy())]
    status = MAX_ITER
    k = 0
    while True:
        gmax = float(np.max(np.abs(g), initial=0.0))
        if gmax < config.tau / 2:
            status = CONVERGED
            break
        if k >= config.max_iter:
            break
        k += 1
        state = surrogate(spec, beta)
        try:
            nxt, alpha = mm_step(model, spec, state, config, _system=system)
        except LineSearchFailed as exc:
            logger.debug("line search failed at iteration %d: %s", k, exc)
            status = LINE_SEARCH_FAILED
            break
        q_new = q_eps(model, spec, nxt)
        if q_new < q - _slack(q):
            raise AscentViolation(
                f"Q_eps fell from {q!r} to {q_new!r} at iteration {k} while the minorizer rose"
            )
        beta, q = nxt, q_new
        g = grad_q_eps(model, spec, beta)
        trace.append(TraceRecord(k, q, alpha, float(np.max(np.abs(g), initial=0.0)), beta.copy()))
    return beta, free, trace, status, k, system.shifts


def fit_mle(model: LikelihoodModel, config: FitConfig = None, start=None, support=None) -> FitResult:
    """Unpenalized maximum likelihood by Newton steps with step-halving.

    ``support`` (boolean or index array) restricts the fit to a submodel; the
    remaining coefficients are held at zero.
    """
    config = config or FitConfig()
    d = model.d
    beta = np.zeros(d) if start is None else np.array(start, dtype=float)
    spec = lasso(0.0)
    if support is None:
        check_full_rank(model.data.design)
        beta, free, trace, status, k, shifts = _run(model, spec, beta, config)
        active = np.ones(d, dtype=bool)
    else:
        mask = np.zeros(d, dtype=bool)
        mask[np.asarray(support) if np.asarray(support).dtype != bool else np.flatnonzero(support)] = True
        beta[~mask] = 0.0
        if mask.any():
            check_full_rank(model.data.design[:, mask])
        beta, free, trace, status, k, shifts = _run_support(model, spec, beta, config, mask)
        active = mask
    grads = np.abs(np.where(active, model.score(beta), 0.0))
    return FitResult(
        beta_hat=beta,
        active=active,
        epsilon=0.0,
        iterations=k,
        trace=trace,
        status=status,
        zero_rule_gradients=grads,
        beta_eps=beta.copy(),
        spec=spec,
        config=config,
        beta0=None,
        shifted_solves=shifts,
        method="mle",
        n_obs=model.n,
    )


def _run_support(model, spec, beta, config, mask):
    # identical iteration with coordinates outside ``mask`` frozen at zero
    d = model.d
    system = _System()
    idx = np.flatnonzero(mask)
    q = model.loglik(beta)
    g = np.where(mask, model.score(beta), 0.0)
    trace = [TraceRecord(0, q, float("nan"), float(np.max(np.abs(g), initial=0.0)), beta.copy())]
    status = MAX_ITER
    k = 0
    while True:
        if np.max(np.abs(g), initial=0.0) < config.tau / 2:
            status = CONVERGED
            break
        if k >= config.max_iter:
            break
        k += 1
        state = SurrogateState(beta.copy(), np.zeros(d), spec)
        try:
            beta, alpha = mm_step(model, spec, state, config, free=idx, _system=system)
        except LineSearchFailed:
            status = LINE_SEARCH_FAILED
            break
        q_new = model.loglik(beta)
        if q_new < q - _slack(q):
            raise AscentViolation(f"log-likelihood fell from {q!r} to {q_new!r} at iteration {k}")
        q = q_new
        g = np.where(mask, model.score(beta), 0.0)
        trace.append(TraceRecord(k, q, alpha, float(np.max(np.abs(g), initial=0.0)), beta.copy()))
    return beta, mask, trace, status, k, system.shifts


def _resolve_epsilon(model, spec, beta0, config):
    if config.epsilon_override is not None:
        return float(config.epsilon_override), False
    eps, degenerate = epsilon_rule(spec, beta0, config.tau, model.n)
    if degenerate and spec.lam > 0 and spec.derivative_at_zero > 0:
        # all-zero start: use a unit coefficient scale instead of min |beta0_j|
        eps = config.tau / (2.0 * model.n * spec.derivative_at_zero)
        logger.warning("all-zero starting value; falling back to epsilon = %.3g", eps)
    return eps, degenerate


def fit(model: LikelihoodModel, spec: PenaltySpec, beta0=None, config: FitConfig = None) -> FitResult:
    """Maximize the perturbed penalized likelihood and apply the zero rule.

    Parameters
    ----------
    model : LikelihoodModel
    spec : PenaltySpec
        Penalty; its ``epsilon`` field is ignored and replaced by the value
        from :func:`~pennmm.penalty.epsilon_rule` (or ``config.epsilon_override``).
    beta0 : array, optional
        Starting value.  Defaults to the unpenalized MLE.
    config : FitConfig, optional

    Returns
    -------
    FitResult
        ``status`` is "converged", "max_iter" or "line_search_failed"; the
        latter two are reported rather than raised.
    """
    config = config or FitConfig()
    check_full_rank(model.data.design)
    if beta0 is None:
        mle = fit_mle(model, config)
        beta0 = mle.beta_hat
    beta0 = np.array(beta0, dtype=float)
    if spec.lam == 0:
        eps, degenerate = 0.0, True
    else:
        eps, degenerate = _resolve_epsilon(model, spec, beta0, config)
    spec_eps = spec.with_epsilon(eps)
    start = beta0
    if eps == 0 and spec.lam > 0 and np.any(beta0 == 0):
        raise ValueError("epsilon = 0 requires a start with no zero coefficients")
    beta, _, trace, status, k, shifts = _run(model, spec_eps, start, config)
    grads = np.abs(grad_q(model, spec_eps.with_epsilon(0.0), beta))
    flagged = grads > config.tau

    refreshes = 0
    may_refresh = config.refresh_epsilon and config.epsilon_override is None and eps > 0
    while may_refresh and status == CONVERGED and flagged.any() and refreshes < model.d:
        # The fixed epsilon bounds the perturbation bias by tau / 2 only for
        # |beta_j| >= min |beta0_j|.  A survivor that shrank below that can be
        # flagged by the bias alone; a coordinate truly at zero scales with
        # epsilon and stays flagged however small epsilon gets.
        new_eps = config.tau * float(np.min(np.abs(beta[flagged]))) / (2.0 * model.n * spec.derivative_at_zero)
        if not 0 < new_eps < eps:
            break
        spec_new = spec.with_epsilon(new_eps)
        b2, _, tr2, st2, k2, sh2 = _run(model, spec_new, beta, config)
        g2 = np.abs(grad_q(model, spec.with_epsilon(0.0), b2))
        f2 = g2 > config.tau
        if st2 != CONVERGED or np.array_equal(f2, flagged):
            break
        trace[-1] = replace(trace[-1], q_restart=tr2[0].q_eps)
        trace.extend(replace(r, iteration=r.iteration + k) for r in tr2[1:])
        beta, grads, flagged, eps, spec_eps = b2, g2, f2, new_eps, spec_new
        k += k2
        shifts += sh2
        refreshes += 1

    active = (beta != 0) & ~flagged
    if spec.lam == 0:
        active = np.ones(model.d, dtype=bool)
    beta_hat = np.where(active, beta, 0.0)
    return FitResult(
        beta_hat=beta_hat,
        active=active,
        epsilon=eps,
        iterations=k,
        trace=trace,
        status=status,
        zero_rule_gradients=grads,
        beta_eps=beta,
        spec=spec_eps,
        config=config,
        beta0=beta0,
        epsilon_degenerate=degenerate,
        shifted_solves=shifts,
        method="mm",
        n_obs=model.n,
        epsilon_refreshes=refreshes,
    )


def fit_lqa(model, spec, beta0=None, config=None, drop_tol=1e-4) -> FitResult:
    """Unperturbed local quadratic approximation (epsilon = 0).

    A coordinate whose magnitude falls below ``drop_tol`` is set to zero and
    never revisited.  Convergence is judged on the surviving coordinates only.
    """
    config = config or FitConfig()
    check_full_rank(model.data.design)
    if beta0 is None:
        beta0 = fit_mle(model, config).beta_hat
    beta0 = np.array(beta0, dtype=float)
    spec0 = spec.with_epsilon(0.0)
    start = np.where(np.abs(beta0) < drop_tol, 0.0, beta0)
    if spec.lam == 0:
        return fit_mle(model, config, start=beta0)
    beta, free, trace, status, k, shifts = _run_lqa(model, spec0, start, config, drop_tol)
    grads = np.abs(np.where(free, grad_q(model, spec0, beta), 0.0))
    return FitResult(
        beta_hat=np.where(free, beta, 0.0),
        active=free.copy(),
        epsilon=0.0,
        iterations=k,
        trace=trace,
        status=status,
        zero_rule_gradients=grads,
        beta_eps=beta,
        spec=spec0,
        config=config,
        beta0=beta0,
        shifted_solves=shifts,
        method="lqa",
        n_obs=model.n,
    )


def _run_lqa(model, spec, beta, config, drop_tol):
    d = model.d
    n = model.n
    system = _System()
    free = beta != 0

    def objective(b):
        return model.loglik(b) - n * float(np.sum(perturbed_value(spec, b[free])))

    def gradient(b):
        g = model.score(b) - n * np.sign(b) * derivative_plus(spec, np.abs(b))
        return np.where(free, g, 0.0)

    q = objective(beta)
    g = gradient(beta)
    trace = [TraceRecord(0, q, float("nan"), float(np.max(np.abs(g), initial=0.0)), beta.copy())]
    status = MAX_ITER
    k = 0
    while True:
        if np.max(np.abs(g), initial=0.0) < config.tau / 2:
            status = CONVERGED
            break
        if k >= config.max_iter:
            break
        k += 1
        idx = np.flatnonzero(free)
        ek = np.zeros(d)
        ek[idx] = curvature_weight(spec, beta[idx])
        state = SurrogateState(beta.copy(), ek, spec)
        try:
            nxt, alpha = mm_step(model, spec, state, config, free=idx, _system=system)
        except LineSearchFailed:
            status = LINE_SEARCH_FAILED
            break
        q_new = objective(nxt)
        if q_new < q - _slack(q):
            raise AscentViolation(f"Q fell from {q!r} to {q_new!r} at LQA iteration {k}")
        beta = nxt
        dropped = free & (np.abs(beta) < drop_tol)
        if dropped.any():
            free = free & ~dropped
            beta[dropped] = 0.0
        # dropping coordinates changes the objective itself; later steps are compared against the new value
        restart = objective(beta) if dropped.any() else None
        q = q_new if restart is None else restart
        g = gradient(beta)
        trace.append(TraceRecord(k, q_new, alpha, float(np.max(np.abs(g), initial=0.0)), beta.copy(), restart))
    return beta, free, trace, status, k, system.shifts


def ascent_violations(trace, slack=ASCENT_SLACK) -> int:
    """Number of trace steps where the objective decreased by more than the relative slack."""
    if len(trace) < 2:
        return 0
    prev = np.array([r.baseline for r in trace[:-1]])
    q = np.array([r.q_eps for r in trace[1:]])
    tol = slack * np.maximum(1.0, np.abs(prev))
    return int(np.sum(q < prev - tol))


def _penalty_gap_diag(spec: PenaltySpec, beta):
    """``a(t)`` on the diagonal of ``(Hess S - Hess Q_eps) / n`` at a fixed point.

    Differentiating ``p_eps'(t) = p'(t) t / (eps + t)`` gives

        a(t) = |t| / (eps + |t|) * (p''(|t|+) - p'(|t|+) / (eps + |t|)).
    """
    t = np.abs(np.asarray(beta, dtype=float))
    eps = spec.epsilon
    denom = eps + t
    safe = np.where(denom > 0, denom, 1.0)
    p1 = derivative_plus(spec, t)
    p2 = second_derivative_plus(spec, t)
    return np.where(denom > 0, t / safe * (p2 - p1 / safe), 0.0)


def rate_diagnostic(model: LikelihoodModel, spec: PenaltySpec, beta_star, tau: float = 1e-8, curvature="observed"):
    """Eigenvalues of the derivative of the MM map at a stationary point.

    ``spec`` must carry the epsilon used in the fit.

    Returns
    -------
    eigenvalues : ndarray, ascending
    rho : float
        Largest eigenvalue, the local linear convergence rate.
    """
    beta_star = np.asarray(beta_star, dtype=float)
    g = grad_q_eps(model, spec, beta_star)
    gmax = float(np.max(np.abs(g), initial=0.0))
    if gmax > tau:
        raise ValueError(f"beta_star is not stationary: max |grad Q_eps| = {gmax:.3g} > tau = {tau:.3g}")
    n = model.n
    H = model.curvature(beta_star, curvature)
    ek = surrogate(spec, beta_star).ek_diag
    B = -H + n * np.diag(ek)  # -Hess S, positive definite
    C = -n * np.diag(_penalty_gap_diag(spec, beta_star))  # -(Hess S - Hess Q_eps), PSD
    eig = linalg.eigh(C, B, eigvals_only=True)
    return eig, float(eig.max(initial=0.0))


def map_derivative(model, spec, beta_star, curvature="observed"):
    """The matrix ``(Hess S)^{-1} (Hess S - Hess Q_eps)`` at ``beta_star``."""
    n = model.n
    H = model.curvature(beta_star, curvature)
    ek = surrogate(spec, beta_star).ek_diag
    hess_s = H - n * np.diag(ek)
    return np.linalg.solve(hess_s, n * np.diag(_penalty_gap_diag(spec, beta_star)))


def iterate_map(model, spec, beta_start, n_iter, config: FitConfig = None):
    """Apply the MM map ``n_iter`` times (epsilon taken from ``spec``)."""
    config = config or FitConfig()
    beta = np.array(beta_start, dtype=float)
    path = [beta.copy()]
    system = _System()
    for _ in range(n_iter):
        beta, _ = mm_step(model, spec, surrogate(spec, beta), config, _system=system)
        path.append(beta.copy())
    return np.array(path)


def contraction_ratios(model, spec, beta_start, beta_star=None, max_iter=5000, floor=1e-9, config=None):
    """Empirical ratios ``|b_{k+1} - b*| / |b_k - b*|`` along the MM path.

    ``beta_star`` defaults to the point the map settles on (iterated until
    successive iterates agree to rounding).  Only steps whose error exceeds
    ``floor`` times the scale of ``beta_star`` are reported, so the ratios are
    not dominated by rounding.
    """
    path = [np.array(beta_start, dtype=float)]
    system = _System()
    config = config or FitConfig()
    beta = path[0]
    for _ in range(max_iter):
        beta_next, _ = mm_step(model, spec, surrogate(spec, beta), config, _system=system)
        path.append(beta_next)
        if np.max(np.abs(beta_next - beta)) <= 1e-15 * max(1.0, np.max(np.abs(beta_next))):
            break
        beta = beta_next
    path = np.array(path)
    star = path[-1] if beta_star is None else np.asarray(beta_star, dtype=float)
    err = np.linalg.norm(path - star, axis=1)
    scale = max(1.0, float(np.linalg.norm(star)))
    keep = err > floor * scale
    ratios = []
    for k in range(len(err) - 1):
        if keep[k] and keep[k + 1]:
            ratios.append(err[k + 1] / err[k])
    return np.array(ratios), err
