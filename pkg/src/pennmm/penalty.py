"""Concave sparsity penalties, their epsilon-perturbed versions and the
quadratic majorizers used by the MM iterations.

Every penalty here is a function of ``|theta|`` that is nondecreasing and
concave on ``(0, inf)`` with a finite right derivative at the origin.  The
perturbed penalty is

    p_eps(t) = p(t) - eps * int_0^t p'(s+) / (eps + s) ds,

and the quadratic

    Phi(theta) = p_eps(|theta0|) + (theta**2 - theta0**2) * p'(|theta0|+) / (2 (eps + |theta0|))

lies above ``p_eps(|theta|)`` everywhere and touches it at ``+-theta0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate

__all__ = [
    "KINDS",
    "LQ_FLOOR",
    "PenaltySpec",
    "Majorizer",
    "PenaltyDomainError",
    "EpsilonChoice",
    "scad",
    "lasso",
    "lq",
    "hard_threshold",
    "derivative_plus",
    "second_derivative_plus",
    "value",
    "perturbed_value",
    "majorizer_at",
    "epsilon_rule",
]

KINDS = ("scad", "l1", "lq", "hard")

# Below this argument the L_q derivative is held constant so that p'(0+) is finite.
LQ_FLOOR = 1e-8

_QUAD_ABS_TOL = 1e-12


class PenaltyDomainError(ValueError):
    """Raised when a majorizer is requested at a point where it is undefined."""


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty kind, its tuning constants and the perturbation ``epsilon``.

    Parameters
    ----------
    kind : {"scad", "l1", "lq", "hard"}
    lam : float
        Tuning parameter, ``lam >= 0``.
    a : float
        SCAD shape constant, must exceed 2.  Ignored by other kinds.
    q : float
        Exponent of the L_q penalty, ``0 < q <= 1``.  Ignored by other kinds.
    epsilon : float
        Perturbation of the majorizer denominator, ``epsilon >= 0``.
    """

    kind: str
    lam: float
    a: float = 3.7
    q: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lam must be a finite nonnegative number, got {self.lam}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be finite and nonnegative, got {self.epsilon}")
        if self.kind == "scad" and not self.a > 2:
            raise ValueError(f"SCAD requires a > 2, got {self.a}")
        if self.kind == "lq" and not 0 < self.q <= 1:
            raise ValueError(f"L_q requires 0 < q <= 1, got {self.q}")

    def with_epsilon(self, epsilon: float) -> "PenaltySpec":
        return replace(self, epsilon=float(epsilon))

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return replace(self, lam=float(lam))

    @property
    def derivative_at_zero(self) -> float:
        """Right derivative ``p'(0+)`` (capped for L_q with q < 1)."""
        return float(derivative_plus(self, 0.0))

    @property
    def capped(self) -> bool:
        """True when the L_q derivative cap near zero is in effect."""
        return self.kind == "lq" and self.q < 1 and self.lam > 0


def scad(lam, a=3.7, epsilon=0.0):
    return PenaltySpec("scad", lam, a=a, epsilon=epsilon)


def lasso(lam, epsilon=0.0):
    return PenaltySpec("l1", lam, epsilon=epsilon)


def lq(lam, q, epsilon=0.0):
    return PenaltySpec("lq", lam, q=q, epsilon=epsilon)


def hard_threshold(lam, epsilon=0.0):
    return PenaltySpec("hard", lam, epsilon=epsilon)


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def derivative_plus(spec: PenaltySpec, theta):
    """Right derivative ``p'(theta+)`` for ``theta >= 0`` (vectorized)."""
    t = np.asarray(theta, dtype=float)
    if np.any(t < 0):
        raise ValueError("derivative_plus is defined for theta >= 0")
    lam = spec.lam
    if spec.kind == "l1":
        out = np.full_like(t, lam)
    elif spec.kind == "scad":
        a = spec.a
        out = np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1.0))
        # at t == lam both branches give lam; the right limit matches
    elif spec.kind == "hard":
        out = np.where(t < lam, 2.0 * (lam - t), 0.0)
    else:  # lq
        q = spec.q
        tt = np.maximum(t, LQ_FLOOR)
        out = lam * q * tt ** (q - 1.0)
    return _scalar_or_array(theta, out)


def second_derivative_plus(spec: PenaltySpec, theta):
    """Right second derivative ``p''(theta+)`` for ``theta >= 0``."""
    t = np.asarray(theta, dtype=float)
    lam = spec.lam
    if spec.kind == "l1" or lam == 0:
        out = np.zeros_like(t)
    elif spec.kind == "scad":
        a = spec.a
        out = np.where((t >= lam) & (t < a * lam), -1.0 / (a - 1.0), 0.0)
    elif spec.kind == "hard":
        out = np.where(t < lam, -2.0, 0.0)
    else:
        q = spec.q
        out = np.where(t >= LQ_FLOOR, lam * q * (q - 1.0) * np.maximum(t, LQ_FLOOR) ** (q - 2.0), 0.0)
    return _scalar_or_array(theta, out)


def value(spec: PenaltySpec, theta):
    """Penalty ``p(|theta|)``: the antiderivative of :func:`derivative_plus` from 0."""
    t = np.abs(np.asarray(theta, dtype=float))
    lam = spec.lam
    if spec.kind == "l1":
        out = lam * t
    elif spec.kind == "scad":
        a = spec.a
        mid = (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0))
        out = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, 0.5 * (a + 1.0) * lam * lam))
    elif spec.kind == "hard":
        out = np.where(t < lam, lam * lam - (t - lam) ** 2, lam * lam)
    else:
        q = spec.q
        if q == 1.0:
            out = lam * t
        else:
            slope0 = lam * q * LQ_FLOOR ** (q - 1.0)
            tail = slope0 * LQ_FLOOR + lam * (np.maximum(t, LQ_FLOOR) ** q - LQ_FLOOR**q)
            out = np.where(t < LQ_FLOOR, slope0 * t, tail)
    return _scalar_or_array(theta, out)


def _lq_tail_integral(spec, eps, t):
    # int_{floor}^{t} lam q s^(q-1) / (eps + s) ds, in log coordinates s = e^u
    lam, q = spec.lam, spec.q
    f = lambda u: lam * q * np.exp(q * u) / (eps + np.exp(u))
    val, _ = integrate.quad(f, np.log(LQ_FLOOR), np.log(t), epsabs=_QUAD_ABS_TOL, epsrel=1e-12, limit=200)
    return val


def _perturbation_integral(spec, eps, t):
    """``int_0^t p'(s+)/(eps + s) ds`` for ``t >= 0`` and ``eps > 0``."""
    lam = spec.lam
    if spec.kind == "l1" or (spec.kind == "lq" and spec.q == 1.0):
        return lam * np.log1p(t / eps)
    if spec.kind == "scad":
        a = spec.a
        u1 = np.minimum(t, lam)
        out = lam * np.log1p(u1 / eps)
        u2 = np.clip(t, lam, a * lam)
        out = out + ((a * lam + eps) * np.log((eps + u2) / (eps + lam)) - (u2 - lam)) / (a - 1.0)
        return out
    if spec.kind == "hard":
        u = np.minimum(t, lam)
        return 2.0 * ((lam + eps) * np.log1p(u / eps) - u)
    # lq, q < 1: constant slope below the floor, quadrature above it
    slope0 = lam * spec.q * LQ_FLOOR ** (spec.q - 1.0)
    head = slope0 * np.log1p(np.minimum(t, LQ_FLOOR) / eps)
    flat = np.atleast_1d(t)
    tail = np.array([_lq_tail_integral(spec, eps, ti) if ti > LQ_FLOOR else 0.0 for ti in flat.ravel()])
    return head + tail.reshape(flat.shape).reshape(np.shape(t))


def perturbed_value(spec: PenaltySpec, theta):
    """Perturbed penalty ``p_eps(|theta|)``; equals :func:`value` when ``epsilon == 0``."""
    eps = spec.epsilon
    if eps == 0 or spec.lam == 0:
        return value(spec, theta)
    t = np.abs(np.asarray(theta, dtype=float))
    out = value(spec, t) - eps * _perturbation_integral(spec, eps, t)
    return _scalar_or_array(theta, out)


def perturbed_derivative(spec: PenaltySpec, theta):
    """Derivative of ``p_eps`` at ``|theta|``: ``p'(|theta|+) |theta| / (eps + |theta|)``.

    With ``epsilon == 0`` this is ``p'(|theta|+)`` (the right derivative at zero).
    """
    t = np.abs(np.asarray(theta, dtype=float))
    d = np.asarray(derivative_plus(spec, t))
    if spec.epsilon > 0:
        d = d * t / (spec.epsilon + t)
    return _scalar_or_array(theta, d)


@dataclass(frozen=True)
class Majorizer:
    """Quadratic ``constant + quad_coeff * theta**2`` majorizing ``p_eps(|theta|)``."""

    center: float
    constant: float
    quad_coeff: float

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _scalar_or_array(theta, self.constant + self.quad_coeff * theta * theta)


def curvature_weight(spec: PenaltySpec, theta0):
    """``p'(|theta0|+) / (eps + |theta0|)``, twice the majorizer's quadratic coefficient.

    Raises :class:`PenaltyDomainError` where ``eps == 0`` and ``theta0 == 0``
    with a nonzero derivative there.
    """
    t = np.abs(np.asarray(theta0, dtype=float))
    d = np.asarray(derivative_plus(spec, t))
    denom = spec.epsilon + t
    if denom.min(initial=np.inf) > 0:
        return _scalar_or_array(theta0, d / denom)
    if np.any((denom == 0) & (d != 0)):
        raise PenaltyDomainError(
            "majorizer undefined at theta0 = 0 with epsilon = 0; use a positive epsilon"
        )
    w = np.where(denom == 0, 0.0, d / np.where(denom == 0, 1.0, denom))
    return _scalar_or_array(theta0, w)


def majorizer_at(spec: PenaltySpec, theta0: float) -> Majorizer:
    """Quadratic majorizer of ``p_eps(|.|)`` anchored at ``theta0``."""
    theta0 = float(theta0)
    if spec.epsilon == 0 and theta0 == 0:
        raise PenaltyDomainError(
            "majorizer undefined at theta0 = 0 with epsilon = 0; use a positive epsilon"
        )
    c = 0.5 * curvature_weight(spec, theta0)
    return Majorizer(theta0, float(perturbed_value(spec, theta0)) - c * theta0 * theta0, c)


class EpsilonChoice(NamedTuple):
    epsilon: float
    degenerate: bool


def epsilon_rule(spec: PenaltySpec, beta0, tau: float, n: int) -> EpsilonChoice:
    """Fixed perturbation ``tau * min|beta0_j != 0| / (2 n p'(0+))``.

    Returns ``EpsilonChoice(0.0, True)`` when every start coefficient is zero
    or ``p'(0+) == 0`` (for instance ``lam == 0``).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if n < 1:
        raise ValueError("n must be a positive integer")
    b = np.abs(np.asarray(beta0, dtype=float)).ravel()
    nz = b[b != 0]
    d0 = spec.derivative_at_zero
    if nz.size == 0 or d0 == 0:
        return EpsilonChoice(0.0, True)
    return EpsilonChoice(float(tau * nz.min() / (2.0 * n * d0)), False)
