"""Post-hoc certification of simulated runs.

Everything here is an oracle over immutable trajectories or closed-form
signal definitions: exponential-decay fits, true-versus-average deviation,
residual-band checks, randomized sector-condition sampling, and period-mean
quadrature for the zero-mean terms the averaging step discards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .plant import (
    AwController,
    QuadraticMap,
    SaturationBounds,
    deadzone,
    delta_matrix,
    perturbation_terms,
)
from .signals import DitherSpec, eval_M, eval_S
from .sim import Trajectory
from .synthesis import GradSatDesign

__all__ = [
    "DecayFit",
    "BandReport",
    "ZeroMeanReport",
    "fit_decay",
    "sup_deviation",
    "check_convergence_bands",
    "sample_deadzone_sector_global",
    "sample_deadzone_sector_regional",
    "zero_mean_report",
    "average_rhs_consistency",
    "draw_interior_states",
]

SECTOR_SLACK_TOL = 1e-12


# ---------------------------------------------------------------------------
# quadrature

def _simpson_weights(nodes: int, span: float) -> np.ndarray:
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError("composite Simpson needs an odd node count >= 3")
    h = span / (nodes - 1)
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _period_mean(values: np.ndarray, weights: np.ndarray, period: float):
    return np.tensordot(weights, values, axes=(0, 0)) / period


# ---------------------------------------------------------------------------
# decay fitting

@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit of a signal norm."""

    eta_hat: float
    kappa_hat: float
    amplitude: float
    window: tuple[float, float]
    residual: float
    truncated: bool = False


_SIGNALS = ("theta_tilde", "g_hat", "u", "theta")


def _signal_norms(traj: Trajectory, signal: str) -> np.ndarray:
    if signal == "v":
        if traj.v is None:
            raise ValueError("trajectory carries no Lyapunov values")
        return traj.v.copy()
    if signal not in _SIGNALS:
        raise ValueError(f"unknown signal selector {signal!r}")
    return np.linalg.norm(getattr(traj, signal), axis=1)


def fit_decay(
    traj: Trajectory,
    signal: str = "theta_tilde",
    window: Optional[tuple[float, float]] = None,
) -> DecayFit:
    """Fit norm(signal) ~ amplitude * exp(-eta_hat * t) on a time window.

    The fit runs on the logarithm, so the signal must stay positive there;
    trailing samples at exact zero are dropped and flagged as a truncation.
    """
    norms = _signal_norms(traj, signal)
    t = traj.times
    if window is None:
        window = (float(t[0]), float(t[-1]))
    lo, hi = window
    mask = (t >= lo) & (t <= hi)
    tw = t[mask]
    nw = norms[mask]
    if tw.size < 2:
        raise ValueError("window selects fewer than two samples")
    truncated = False
    zero = np.flatnonzero(nw <= 0.0)
    if zero.size:
        if zero[0] < 2:
            raise ValueError("signal is zero at the start of the window")
        tw = tw[: zero[0]]
        nw = nw[: zero[0]]
        truncated = True
    slope, intercept = np.polyfit(tw, np.log(nw), 1)
    pred = intercept + slope * tw
    residual = float(np.sqrt(np.mean((np.log(nw) - pred) ** 2)))
    amplitude = float(np.exp(intercept))
    return DecayFit(
        eta_hat=float(-slope),
        kappa_hat=amplitude / float(nw[0]) * float(np.exp(slope * tw[0])),
        amplitude=amplitude,
        window=(float(tw[0]), float(tw[-1])),
        residual=residual,
        truncated=truncated,
    )


def sup_deviation(a: Trajectory, b: Trajectory, signal: str = "theta_tilde") -> float:
    """max over a's samples of the norm of the signal difference.

    b is resampled onto a's time base by linear interpolation; the time spans
    must overlap.
    """
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if lo >= hi:
        raise ValueError("trajectories cover disjoint time spans")
    mask = (a.times >= lo) & (a.times <= hi)
    ta = a.times[mask]
    if signal == "v":
        va = _signal_norms(a, "v")[mask]
        vb = np.interp(ta, b.times, _signal_norms(b, "v"))
        return float(np.max(np.abs(va - vb)))
    sa = getattr(a, signal)[mask]
    sb_full = getattr(b, signal)
    sb = np.vstack(
        [np.interp(ta, b.times, sb_full[:, j]) for j in range(sb_full.shape[1])]
    ).T
    return float(np.max(np.linalg.norm(sa - sb, axis=1)))


# ---------------------------------------------------------------------------
# residual bands

@dataclass(frozen=True)
class BandReport:
    r_theta: float
    theta_band: float
    theta_ok: bool
    r_y: float
    y_band: float
    y_ok: bool
    tail_start: float

    def records(self) -> list[str]:
        """key=value lines for harness consumption."""
        return [
            f"r_theta={self.r_theta!r}",
            f"theta_band={self.theta_band!r}",
            f"theta_ok={self.theta_ok}",
            f"r_y={self.r_y!r}",
            f"y_band={self.y_band!r}",
            f"y_ok={self.y_ok}",
            f"tail_start={self.tail_start!r}",
        ]


def check_convergence_bands(
    traj: Trajectory,
    qmap: QuadraticMap,
    dither: DitherSpec,
    c_theta: float = 10.0,
    c_y: float = 100.0,
    tail_fraction: float = 0.2,
) -> BandReport:
    """Tail residuals of theta and y against O(a + 1/w) and O(a^2 + 1/w^2).

    The asymptotic statements hide constants, so calibration factors c_theta
    and c_y convert them into checkable bands: calibrate once on a base run,
    then reuse the same constants across parameter sweeps.
    """
    t = traj.times
    tail_start = t[0] + (1.0 - tail_fraction) * (t[-1] - t[0])
    tail = t >= tail_start
    r_theta = float(
        np.max(np.linalg.norm(traj.theta[tail] - qmap.theta_star, axis=1))
    )
    r_y = float(np.max(np.abs(traj.y[tail] - qmap.q_star)))
    a = float(np.sqrt(np.sum(dither.amplitudes**2)))
    omega = 2.0 * np.pi / dither.period
    theta_band = c_theta * (a + 1.0 / omega)
    y_band = c_y * (a**2 + 1.0 / omega**2)
    return BandReport(
        r_theta=r_theta,
        theta_band=theta_band,
        theta_ok=r_theta <= theta_band,
        r_y=r_y,
        y_band=y_band,
        y_ok=r_y <= y_band,
        tail_start=float(tail_start),
    )


# ---------------------------------------------------------------------------
# sector-condition sampling

def sample_deadzone_sector_global(
    bounds: SaturationBounds,
    theta_star: np.ndarray,
    trials: int = 10_000,
    seed: int = 0,
) -> float:
    """Max slack of psi(th)' L (psi(th) - tt) over random states and weights.

    tt = th - theta_star, so the pair satisfies the interior-optimizer
    relation the sector argument rests on.  Any positive diagonal weight must
    keep the form nonpositive; the returned maximum should not exceed
    roundoff.
    """
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    if np.any(np.abs(theta_star) >= bounds.limits):
        raise ValueError("theta_star must lie strictly inside the bounds")
    rng = np.random.default_rng(seed)
    n = bounds.dim
    worst = -np.inf
    for _ in range(trials):
        theta_av = rng.uniform(-3.0, 3.0, size=n) * bounds.limits
        lam = rng.uniform(0.1, 10.0, size=n)
        psi = deadzone(theta_av, bounds)
        form = float(psi @ (lam * (psi - (theta_av - theta_star))))
        worst = max(worst, form)
    return worst


def sample_deadzone_sector_regional(
    design: GradSatDesign,
    trials: int = 10_000,
    seed: int = 0,
) -> float:
    """Max slack of psi(Kg)' U (psi(Kg) - Lg) over the admissible set.

    Samples are drawn from a box sized so that a useful fraction satisfies
    |(K - L)_l g| <= ubar_l; candidates outside are rejected.  A rejection
    rate above 99.9% means the admissible set is degenerate for sampling.
    """
    rng = np.random.default_rng(seed)
    n = design.dim
    diff = design.k - design.l
    row_scale = np.abs(diff).sum(axis=1)
    box = 2.0 * float(np.min(design.bounds.limits / np.maximum(row_scale, 1e-12)))
    worst = -np.inf
    accepted = 0
    attempts = 0
    max_attempts = trials * 1000
    while accepted < trials:
        if attempts >= max_attempts:
            raise RuntimeError(
                "admissible set rejected more than 99.9% of samples"
            )
        attempts += 1
        g = rng.uniform(-box, box, size=n)
        if np.any(np.abs(diff @ g) > design.bounds.limits):
            continue
        accepted += 1
        ups = rng.uniform(0.1, 10.0, size=n)
        kg = design.k @ g
        psi = kg - np.clip(kg, -design.bounds.limits, design.bounds.limits)
        form = float(psi @ (ups * (psi - design.l @ g)))
        worst = max(worst, form)
    return worst


# ---------------------------------------------------------------------------
# period means

@dataclass(frozen=True)
class TermMean:
    mean: float
    linf: float

    @property
    def rel(self) -> float:
        return abs(self.mean) / max(self.linf, 1e-300)


@dataclass(frozen=True)
class ZeroMeanReport:
    terms: dict[str, TermMean] = field(default_factory=dict)
    delta_diag_note: str = ""

    def records(self) -> list[str]:
        """key=value lines (mean and relative mean per term)."""
        out = []
        for name, tm in self.terms.items():
            out.append(f"{name}.mean={tm.mean!r}")
            out.append(f"{name}.rel={tm.rel!r}")
        return out

    def max_rel(self, prefixes: Sequence[str]) -> float:
        vals = [
            tm.rel
            for name, tm in self.terms.items()
            if any(name.startswith(p) for p in prefixes)
        ]
        if not vals:
            raise ValueError(f"no terms match prefixes {prefixes}")
        return max(vals)


def zero_mean_report(
    dither: DitherSpec,
    qmap: QuadraticMap,
    theta_tilde: np.ndarray,
    nodes: int = 20001,
) -> ZeroMeanReport:
    """Period means of every term the averaging step discards.

    Both diagonal conventions of the multiplicative perturbation are
    measured: the mean-free form averages to zero, the literal form to one.
    The consistency check in ``average_rhs_consistency`` pins the mean-free
    convention as the one reproducing the averaged loop.
    """
    theta_tilde = np.atleast_1d(np.asarray(theta_tilde, dtype=float))
    T = dither.period
    ts = np.linspace(0.0, T, nodes)
    wq = _simpson_weights(nodes, T)
    n = dither.dim
    terms: dict[str, TermMean] = {}

    S = eval_S(dither, ts)
    M = eval_M(dither, ts)
    for i in range(n):
        terms[f"S[{i}]"] = TermMean(
            float(_period_mean(S[:, i], wq, T)), float(np.max(np.abs(S[:, i])))
        )
        terms[f"M[{i}]"] = TermMean(
            float(_period_mean(M[:, i], wq, T)), float(np.max(np.abs(M[:, i])))
        )

    deltas = np.empty((nodes, n, n))
    for idx, t in enumerate(ts):
        deltas[idx] = delta_matrix(dither, t, "mean_free")
    dmean = _period_mean(deltas, wq, T)
    dlinf = np.max(np.abs(deltas), axis=0)
    for i in range(n):
        for j in range(n):
            label = f"delta_mean_free[{i},{j}]"
            terms[label] = TermMean(float(dmean[i, j]), float(dlinf[i, j]))
    for i in range(n):
        lit = deltas[:, i, i] + 1.0
        terms[f"delta_literal[{i},{i}]"] = TermMean(
            float(_period_mean(lit, wq, T)), float(np.max(np.abs(lit)))
        )

    wt = np.empty((nodes, n))
    vs = np.empty((nodes, n))
    for idx, t in enumerate(ts):
        pt = perturbation_terms(dither, qmap, float(t), theta_tilde)
        wt[idx] = pt.w
        vs[idx] = pt.varsigma
    wmean = _period_mean(wt, wq, T)
    vmean = _period_mean(vs, wq, T)
    for i in range(n):
        terms[f"w[{i}]"] = TermMean(
            float(wmean[i]), float(np.max(np.abs(wt[:, i])))
        )
        terms[f"varsigma[{i}]"] = TermMean(
            float(vmean[i]), float(np.max(np.abs(vs[:, i])))
        )

    lit_means = [terms[f"delta_literal[{i},{i}]"].mean for i in range(n)]
    note = (
        "literal diagonal perturbation has period mean "
        f"{np.round(lit_means, 6).tolist()} (expected 1), mean-free variant "
        "averages to zero; the averaged-loop consistency check selects the "
        "mean-free convention"
    )
    return ZeroMeanReport(terms=terms, delta_diag_note=note)


def draw_interior_states(
    qmap: QuadraticMap,
    dither: DitherSpec,
    count: int,
    seed: int = 0,
    margin: float = 0.05,
) -> np.ndarray:
    """Estimation errors whose dithered input path stays strictly unsaturated."""
    if qmap.input_bounds is None:
        raise ValueError("map has no input bounds")
    rng = np.random.default_rng(seed)
    room = qmap.input_bounds.limits - dither.amplitudes - margin
    if np.any(room <= 0):
        raise ValueError("dither amplitudes leave no unsaturated interior")
    lo = -room - qmap.theta_star
    hi = room - qmap.theta_star
    return rng.uniform(lo, hi, size=(count, qmap.dim))


def average_rhs_consistency(
    dither: DitherSpec,
    qmap: QuadraticMap,
    ctrl: AwController,
    theta_tilde_states: np.ndarray,
    nodes: int = 20001,
    demod_remove_offset: bool = True,
) -> float:
    """Max relative gap between the period-averaged loop and its model.

    For each frozen estimation error the true right-hand side (demodulated
    gradient times K minus the anti-windup term) is averaged over one period
    by composite Simpson and compared with K H tt - (K H + K_aw) psi(tt +
    theta_star).  On unsaturated states the model reduces to K H tt; this is
    the binding check that fixes the mean-free perturbation convention.
    """
    states = np.atleast_2d(np.asarray(theta_tilde_states, dtype=float))
    T = dither.period
    ts = np.linspace(0.0, T, nodes)
    wq = _simpson_weights(nodes, T)
    S = eval_S(dither, ts)
    M = eval_M(dither, ts)
    H = qmap.hessian
    K = ctrl.k
    offset = qmap.q_star if demod_remove_offset else 0.0
    lim = qmap.input_bounds.limits if qmap.input_bounds is not None else None
    clim = ctrl.bounds.limits
    worst = 0.0
    for tt in states:
        theta = tt + qmap.theta_star + S
        v = np.clip(theta, -lim, lim) if lim is not None else theta
        d = v - qmap.theta_star
        y = qmap.q_star + 0.5 * np.einsum("ij,jk,ik->i", d, H, d)
        ghat = M * (y - offset)[:, None]
        psi = theta - np.clip(theta, -clim, clim)
        u = ghat @ K.T - psi @ ctrl.k_aw.T
        avg = _period_mean(u, wq, T)
        psi_av = deadzone(tt + qmap.theta_star, ctrl.bounds)
        model = K @ H @ (tt - psi_av) - ctrl.k_aw @ psi_av
        denom = max(float(np.linalg.norm(model)), 1e-12)
        worst = max(worst, float(np.linalg.norm(avg - model)) / denom)
    return worst
