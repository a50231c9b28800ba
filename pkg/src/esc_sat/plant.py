"""Quadratic map, saturation primitives, gradient estimate and control laws.

Two loop variants are covered.  In the input-saturation loop the map sees
sat(theta) and the controller adds an anti-windup correction driven by the
dead-zone of theta.  In the gradient-saturation loop the map input is not
clipped but the parameter update rate sat(K*ghat) is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .signals import DitherSpec, eval_M, eval_M_dot, eval_S, eval_S_dot

__all__ = [
    "QuadraticMap",
    "SaturationBounds",
    "AwController",
    "GradSatController",
    "PerturbationTerms",
    "saturate",
    "deadzone",
    "map_output",
    "gradient_estimate",
    "aw_control",
    "gradsat_control",
    "delta_matrix",
    "delta_dot_matrix",
    "perturbation_terms",
]


@dataclass(frozen=True)
class SaturationBounds:
    """Element-wise symmetric saturation limits."""

    limits: np.ndarray

    def __post_init__(self):
        lim = np.atleast_1d(np.asarray(self.limits, dtype=float))
        if np.any(lim <= 0):
            raise ValueError("saturation limits must be strictly positive")
        object.__setattr__(self, "limits", lim)

    @property
    def dim(self) -> int:
        return self.limits.size


def saturate(v: np.ndarray, bounds: SaturationBounds) -> np.ndarray:
    """Clamp each component of v to [-limit, +limit]."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != bounds.dim:
        raise ValueError(f"dimension mismatch: {v.shape[-1]} vs {bounds.dim}")
    return np.clip(v, -bounds.limits, bounds.limits)


def deadzone(v: np.ndarray, bounds: SaturationBounds) -> np.ndarray:
    """Dead-zone psi(v) = v - sat(v); zero on the linear region including its
    boundary, growing linearly outside."""
    v = np.asarray(v, dtype=float)
    return v - saturate(v, bounds)


@dataclass(frozen=True)
class QuadraticMap:
    """Static quadratic performance map with unknown optimum.

    q_star and theta_star are the extremum value and point, hessian the
    curvature.  input_bounds, when present, are the actuator limits the map
    input passes through; the optimizer must then sit strictly inside them.
    """

    q_star: float
    theta_star: np.ndarray
    hessian: np.ndarray
    input_bounds: Optional[SaturationBounds] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        hess = np.asarray(self.hessian, dtype=float)
        if hess.shape != (theta.size, theta.size):
            raise ValueError("hessian shape does not match theta_star")
        if np.max(np.abs(hess - hess.T)) != 0.0:
            raise ValueError("hessian must be exactly symmetric")
        if self.input_bounds is not None:
            if self.input_bounds.dim != theta.size:
                raise ValueError("input_bounds dimension mismatch")
            if np.any(np.abs(theta) >= self.input_bounds.limits):
                raise ValueError(
                    "theta_star must lie strictly inside the input bounds"
                )
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "hessian", hess)

    @property
    def dim(self) -> int:
        return self.theta_star.size


def map_output(qmap: QuadraticMap, theta: np.ndarray, apply_input_sat: bool) -> float:
    """Evaluate the map at theta, optionally clipping the input first."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != qmap.dim:
        raise ValueError("theta dimension mismatch")
    if apply_input_sat:
        if qmap.input_bounds is None:
            raise ValueError("map has no input bounds to apply")
        v = saturate(theta, qmap.input_bounds)
    else:
        v = theta
    d = v - qmap.theta_star
    return float(qmap.q_star + 0.5 * d @ qmap.hessian @ d)


def gradient_estimate(y: float, m: np.ndarray) -> np.ndarray:
    """Demodulated gradient estimate ghat = M(t)*y."""
    return np.asarray(m, dtype=float) * float(y)


@dataclass(frozen=True)
class AwController:
    """Feedback gain plus anti-windup gain acting on the input dead-zone."""

    k: np.ndarray
    k_aw: np.ndarray
    bounds: SaturationBounds

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        k_aw = np.asarray(self.k_aw, dtype=float)
        n = self.bounds.dim
        if k.shape != (n, n) or k_aw.shape != (n, n):
            raise ValueError("controller gains must be square of the loop dimension")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "k_aw", k_aw)

    @property
    def dim(self) -> int:
        return self.bounds.dim


@dataclass(frozen=True)
class GradSatController:
    """Feedback gain whose output rate is clipped component-wise."""

    k: np.ndarray
    bounds: SaturationBounds

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        n = self.bounds.dim
        if k.shape != (n, n):
            raise ValueError("controller gain must be square of the loop dimension")
        object.__setattr__(self, "k", k)

    @property
    def dim(self) -> int:
        return self.bounds.dim


def aw_control(ctrl: AwController, g_hat: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """u = K*ghat - K_aw*psi(theta); reduces to K*ghat in the linear region."""
    g_hat = np.asarray(g_hat, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if g_hat.size != ctrl.dim or theta.size != ctrl.dim:
        raise ValueError("dimension mismatch")
    return ctrl.k @ g_hat - ctrl.k_aw @ deadzone(theta, ctrl.bounds)


def gradsat_control(ctrl: GradSatController, g_hat: np.ndarray) -> np.ndarray:
    """u = sat(K*ghat); every component obeys the rate limits."""
    g_hat = np.asarray(g_hat, dtype=float)
    if g_hat.size != ctrl.dim:
        raise ValueError("dimension mismatch")
    return saturate(ctrl.k @ g_hat, ctrl.bounds)


def delta_matrix(spec: DitherSpec, t: float, convention: str = "mean_free") -> np.ndarray:
    """Multiplicative dither perturbation Delta(t) with M(t)S(t)^T = I + Delta.

    convention "mean_free" uses Delta_ii = -cos(2 w_i t), the form that is
    zero-mean over a period and satisfies the product identity above.  The
    "literal" convention keeps Delta_ii = 1 - cos(2 w_i t), whose period mean
    is one; it is retained so the discrepancy between the two can be measured
    (see analysis.zero_mean_report).
    """
    if convention not in ("mean_free", "literal"):
        raise ValueError(f"unknown delta convention {convention!r}")
    w = spec.omegas
    a = spec.amplitudes
    n = spec.dim
    delta = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                delta[i, i] = -np.cos(2.0 * w[i] * t)
                if convention == "literal":
                    delta[i, i] += 1.0
            else:
                delta[i, j] = (a[j] / a[i]) * (
                    np.cos((w[i] - w[j]) * t) - np.cos((w[i] + w[j]) * t)
                )
    return delta


def delta_dot_matrix(spec: DitherSpec, t: float) -> np.ndarray:
    """Analytic d/dt of Delta(t); identical for both diagonal conventions."""
    w = spec.omegas
    a = spec.amplitudes
    n = spec.dim
    ddot = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                ddot[i, i] = 2.0 * w[i] * np.sin(2.0 * w[i] * t)
            else:
                ddot[i, j] = (a[j] / a[i]) * (
                    -(w[i] - w[j]) * np.sin((w[i] - w[j]) * t)
                    + (w[i] + w[j]) * np.sin((w[i] + w[j]) * t)
                )
    return ddot


@dataclass(frozen=True)
class PerturbationTerms:
    """Dither-induced terms entering the error dynamics at one time instant."""

    delta: np.ndarray       # Delta(t)
    omega_mat: np.ndarray   # (I + Delta(t)) H
    w: np.ndarray           # additive residual of the input-saturation loop
    varsigma: np.ndarray    # additive residual of the gradient-estimate dynamics


def perturbation_terms(
    spec: DitherSpec,
    qmap: QuadraticMap,
    t: float,
    theta_tilde: np.ndarray,
    convention: str = "mean_free",
) -> PerturbationTerms:
    """Evaluate Delta(t), Omega(t) and the residuals w(t), varsigma(t).

    theta_tilde is the (frozen) estimation error; the dead-zone inside w is
    evaluated along theta(t) = theta_tilde + theta_star + S(t), so w reduces
    to its dither-only part whenever that path stays in the linear region.
    """
    theta_tilde = np.atleast_1d(np.asarray(theta_tilde, dtype=float))
    H = qmap.hessian
    S = eval_S(spec, t)
    M = eval_M(spec, t)
    delta = delta_matrix(spec, t, convention)
    omega_mat = (np.eye(spec.dim) + delta) @ H

    theta = theta_tilde + qmap.theta_star + S
    if qmap.input_bounds is not None:
        psi = deadzone(theta, qmap.input_bounds)
    else:
        psi = np.zeros_like(theta)

    omega_true = np.outer(M, S) @ H
    w = (
        M * qmap.q_star
        + 0.5 * omega_true @ S
        + 0.5 * M * float(theta_tilde @ H @ theta_tilde)
        - M * float(theta_tilde @ H @ psi)
        + 0.5 * M * float(psi @ H @ psi)
    )

    ddot = delta_dot_matrix(spec, t)
    delta_mf = delta if convention == "mean_free" else delta - np.eye(spec.dim)
    varsigma = (
        eval_M_dot(spec, t) * qmap.q_star
        + ddot @ H @ theta_tilde
        + 0.5 * H @ eval_S_dot(spec, t)
        + 0.5 * ddot @ H @ S
        + 0.5 * delta_mf @ H @ eval_S_dot(spec, t)
    )
    return PerturbationTerms(delta=delta, omega_mat=omega_mat, w=w, varsigma=varsigma)
