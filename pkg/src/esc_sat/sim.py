"""Fixed-step simulation of the true seeking loops and their averages.

All four scenarios integrate with the classical 4th-order Runge-Kutta rule at
a fixed step; the dead-zone kink makes the right-hand sides merely Lipschitz,
so no step adaptation is attempted and identical configurations reproduce
bitwise-identical trajectories.

The demodulated gradient estimate is M(t) times the measured output.  By
default the constant optimum value of the map is removed before demodulation
(``demod_remove_offset``): that term is zero-mean and vanishes from every
averaged quantity, but at moderate dither frequencies its integrated ripple
dominates the loop and buries the seeking behaviour the averaged model
predicts.  Setting the flag False gives the raw textbook loop.

Average dynamics are integrated in the same clock in which the decay
certificates are stated; the 1/omega factor of the rescaled form is dropped,
equivalent to simulating in the fast time variable and relabeling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .plant import (
    AwController,
    GradSatController,
    QuadraticMap,
)
from .signals import DitherSpec

__all__ = [
    "SimConfig",
    "Trajectory",
    "SimulationBlowUp",
    "simulate",
    "simulate_input_sat",
    "simulate_gradient_sat",
    "simulate_average_aw",
    "simulate_average_gradsat",
    "export_csv",
]

SCENARIOS = (
    "input-saturation",
    "gradient-saturation",
    "average-aw",
    "average-gradsat",
)

BLOWUP_FACTOR = 1e6
DEFAULT_STEPS_PER_PERIOD = 1000
MIN_STEPS_PER_PERIOD = 200


class SimulationBlowUp(RuntimeError):
    """State left the admissible region; carries the time of blow-up."""

    def __init__(self, time: float):
        super().__init__(f"simulation state blew up at t = {time:.6g} s")
        self.time = time


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs: scenario, plant, dither, gains and grid."""

    scenario: str
    qmap: QuadraticMap
    dither: DitherSpec
    controller: object
    theta0: np.ndarray
    t_end: float
    dt: Optional[float] = None
    demod_remove_offset: bool = True
    g0: Optional[np.ndarray] = None
    p_matrix: Optional[np.ndarray] = None
    certify_region: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if theta0.size != self.qmap.dim:
            raise ValueError("theta0 dimension mismatch")
        if self.dither.dim != self.qmap.dim:
            raise ValueError("dither dimension mismatch")
        want_aw = self.scenario in ("input-saturation", "average-aw")
        if want_aw and not isinstance(self.controller, AwController):
            raise TypeError(f"scenario {self.scenario} needs an AwController")
        if not want_aw and not isinstance(self.controller, GradSatController):
            raise TypeError(f"scenario {self.scenario} needs a GradSatController")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        dt = self.dt
        if dt is None:
            dt = self.dither.period / DEFAULT_STEPS_PER_PERIOD
        if dt <= 0:
            raise ValueError("dt must be positive")
        if dt > self.dither.period / MIN_STEPS_PER_PERIOD:
            raise ValueError(
                f"dt = {dt} is coarser than period/{MIN_STEPS_PER_PERIOD}"
            )
        if self.g0 is not None:
            g0 = np.atleast_1d(np.asarray(self.g0, dtype=float))
            if g0.size != self.qmap.dim:
                raise ValueError("g0 dimension mismatch")
            object.__setattr__(self, "g0", g0)
        if self.p_matrix is not None:
            p = np.asarray(self.p_matrix, dtype=float)
            if p.shape != (self.qmap.dim, self.qmap.dim):
                raise ValueError("p_matrix shape mismatch")
            object.__setattr__(self, "p_matrix", p)
        if self.certify_region and self.p_matrix is None:
            raise ValueError("certify_region needs p_matrix")
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "dt", float(dt))


@dataclass
class Trajectory:
    """Time-indexed record of one run; rows share the time base."""

    times: np.ndarray
    theta: np.ndarray          # map input theta(t) (or its average counterpart)
    theta_tilde: np.ndarray    # estimation error
    y: np.ndarray
    u: np.ndarray
    g_hat: np.ndarray
    v: Optional[np.ndarray] = None   # Lyapunov values when a P matrix is supplied
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.theta.shape[1]


def _rk4_run(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    record: Callable[[float, np.ndarray], tuple],
    x0: np.ndarray,
    t_end: float,
    dt: float,
):
    nstep = int(round(t_end / dt))
    limit = BLOWUP_FACTOR * (1.0 + float(np.linalg.norm(x0)))
    rows = [record(0.0, x0)]
    x = x0.copy()
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(nstep):
        t = i * dt
        k1 = rhs(t, x)
        k2 = rhs(t + half, x + half * k1)
        k3 = rhs(t + half, x + half * k2)
        k4 = rhs(t + dt, x + dt * k3)
        x = x + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        t_next = t + dt
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > limit:
            raise SimulationBlowUp(t_next)
        rows.append(record(t_next, x))
    return rows


def _stack(rows, p_matrix, meta) -> Trajectory:
    times = np.array([r[0] for r in rows])
    theta = np.vstack([r[1] for r in rows])
    theta_tilde = np.vstack([r[2] for r in rows])
    y = np.array([r[3] for r in rows])
    u = np.vstack([r[4] for r in rows])
    g_hat = np.vstack([r[5] for r in rows])
    v = None
    if p_matrix is not None:
        state = np.vstack([r[6] for r in rows])
        v = np.einsum("ij,jk,ik->i", state, p_matrix, state)
    return Trajectory(times, theta, theta_tilde, y, u, g_hat, v=v, metadata=meta)


def simulate_input_sat(cfg: SimConfig) -> Trajectory:
    """True loop with input saturation and anti-windup correction."""
    if cfg.scenario != "input-saturation":
        raise ValueError("config scenario is not input-saturation")
    ctrl: AwController = cfg.controller
    qmap = cfg.qmap
    if qmap.input_bounds is None:
        raise ValueError("input-saturation scenario needs map input bounds")
    amps = cfg.dither.amplitudes
    omegas = cfg.dither.omegas
    two_over_a = 2.0 / amps
    lim = qmap.input_bounds.limits
    clim = ctrl.bounds.limits
    H = qmap.hessian
    th_star = qmap.theta_star
    q_star = qmap.q_star
    offset = q_star if cfg.demod_remove_offset else 0.0
    K = ctrl.k
    Kaw = ctrl.k_aw

    def rhs(t, th_hat):
        s = np.sin(omegas * t)
        theta = th_hat + amps * s
        d = np.clip(theta, -lim, lim) - th_star
        y = q_star + 0.5 * (d @ H @ d)
        ghat = two_over_a * s * (y - offset)
        psi = theta - np.clip(theta, -clim, clim)
        return K @ ghat - Kaw @ psi

    def record(t, th_hat):
        s = np.sin(omegas * t)
        theta = th_hat + amps * s
        d = np.clip(theta, -lim, lim) - th_star
        y = q_star + 0.5 * (d @ H @ d)
        ghat = two_over_a * s * (y - offset)
        psi = theta - np.clip(theta, -clim, clim)
        u = K @ ghat - Kaw @ psi
        tt = th_hat - th_star
        return (t, theta, tt, y, u, ghat, tt)

    rows = _rk4_run(rhs, record, cfg.theta0, cfg.t_end, cfg.dt)
    meta = {
        "scenario": cfg.scenario,
        "dt": cfg.dt,
        "demod_remove_offset": cfg.demod_remove_offset,
    }
    return _stack(rows, cfg.p_matrix, meta)


def simulate_gradient_sat(cfg: SimConfig) -> Trajectory:
    """True loop with the saturated (rate-limited) gradient update."""
    if cfg.scenario != "gradient-saturation":
        raise ValueError("config scenario is not gradient-saturation")
    ctrl: GradSatController = cfg.controller
    qmap = cfg.qmap
    amps = cfg.dither.amplitudes
    omegas = cfg.dither.omegas
    two_over_a = 2.0 / amps
    ulim = ctrl.bounds.limits
    H = qmap.hessian
    th_star = qmap.theta_star
    q_star = qmap.q_star
    offset = q_star if cfg.demod_remove_offset else 0.0
    K = ctrl.k

    def rhs(t, th_hat):
        s = np.sin(omegas * t)
        d = th_hat + amps * s - th_star
        y = q_star + 0.5 * (d @ H @ d)
        ghat = two_over_a * s * (y - offset)
        return np.clip(K @ ghat, -ulim, ulim)

    def record(t, th_hat):
        s = np.sin(omegas * t)
        theta = th_hat + amps * s
        d = theta - th_star
        y = q_star + 0.5 * (d @ H @ d)
        ghat = two_over_a * s * (y - offset)
        u = np.clip(K @ ghat, -ulim, ulim)
        tt = th_hat - th_star
        return (t, theta, tt, y, u, ghat, tt)

    rows = _rk4_run(rhs, record, cfg.theta0, cfg.t_end, cfg.dt)
    meta = {
        "scenario": cfg.scenario,
        "dt": cfg.dt,
        "demod_remove_offset": cfg.demod_remove_offset,
    }
    return _stack(rows, cfg.p_matrix, meta)


def simulate_average_aw(cfg: SimConfig) -> Trajectory:
    """Autonomous average of the input-saturation loop; no dither enters."""
    if cfg.scenario != "average-aw":
        raise ValueError("config scenario is not average-aw")
    ctrl: AwController = cfg.controller
    qmap = cfg.qmap
    if qmap.input_bounds is None:
        raise ValueError("average-aw scenario needs map input bounds")
    lim = qmap.input_bounds.limits
    clim = ctrl.bounds.limits
    H = qmap.hessian
    th_star = qmap.theta_star
    q_star = qmap.q_star
    K = ctrl.k
    Kaw = ctrl.k_aw
    KH = K @ H

    def rhs(t, tt):
        theta_av = tt + th_star
        psi = theta_av - np.clip(theta_av, -clim, clim)
        return KH @ (tt - psi) - Kaw @ psi

    def record(t, tt):
        theta_av = tt + th_star
        psi = theta_av - np.clip(theta_av, -clim, clim)
        d = np.clip(theta_av, -lim, lim) - th_star
        y = q_star + 0.5 * (d @ H @ d)
        ghat = H @ (tt - psi)
        u = KH @ (tt - psi) - Kaw @ psi
        return (t, theta_av, tt, y, u, ghat, tt)

    tt0 = cfg.theta0 - th_star
    rows = _rk4_run(rhs, record, tt0, cfg.t_end, cfg.dt)
    meta = {
        "scenario": cfg.scenario,
        "dt": cfg.dt,
        "clock": "certificate clock (rescale factor dropped)",
    }
    return _stack(rows, cfg.p_matrix, meta)


def simulate_average_gradsat(cfg: SimConfig) -> Trajectory:
    """Autonomous average of the rate-limited loop in gradient coordinates.

    The gradient state and the parameter error are co-integrated; the error
    part only feeds the recorded trajectory for closeness comparisons.  With
    ``certify_region`` the initial gradient state must lie inside the unit
    sublevel set of the supplied Lyapunov matrix, since the decay certificate
    is regional.
    """
    if cfg.scenario != "average-gradsat":
        raise ValueError("config scenario is not average-gradsat")
    ctrl: GradSatController = cfg.controller
    qmap = cfg.qmap
    ulim = ctrl.bounds.limits
    H = qmap.hessian
    th_star = qmap.theta_star
    q_star = qmap.q_star
    K = ctrl.k
    n = qmap.dim

    tt0 = cfg.theta0 - th_star
    g0 = cfg.g0 if cfg.g0 is not None else H @ tt0
    if cfg.certify_region:
        v0 = float(g0 @ cfg.p_matrix @ g0)
        if v0 > 1.0:
            raise ValueError(
                f"initial gradient state outside the certified region (V = {v0:.4g})"
            )

    def rhs(t, state):
        g = state[:n]
        u = np.clip(K @ g, -ulim, ulim)
        return np.concatenate([H @ u, u])

    def record(t, state):
        g = state[:n]
        tt = state[n:]
        theta_av = tt + th_star
        d = theta_av - th_star
        y = q_star + 0.5 * (d @ H @ d)
        u = np.clip(K @ g, -ulim, ulim)
        return (t, theta_av, tt, y, u, g, g)

    rows = _rk4_run(rhs, record, np.concatenate([g0, tt0]), cfg.t_end, cfg.dt)
    meta = {
        "scenario": cfg.scenario,
        "dt": cfg.dt,
        "clock": "certificate clock (rescale factor dropped)",
    }
    return _stack(rows, cfg.p_matrix, meta)


_DISPATCH = {
    "input-saturation": simulate_input_sat,
    "gradient-saturation": simulate_gradient_sat,
    "average-aw": simulate_average_aw,
    "average-gradsat": simulate_average_gradsat,
}


def simulate(cfg: SimConfig) -> Trajectory:
    """Run the scenario named in the config."""
    return _DISPATCH[cfg.scenario](cfg)


def export_csv(traj: Trajectory, path: str, stride: int = 1) -> None:
    """Write t, theta, y, u and ghat columns as decimal text."""
    if stride < 1:
        raise ValueError("stride must be at least 1")
    n = traj.dim
    header = (
        ["t"]
        + [f"theta_{i + 1}" for i in range(n)]
        + ["y"]
        + [f"u_{i + 1}" for i in range(n)]
        + [f"ghat_{i + 1}" for i in range(n)]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for idx in range(0, traj.times.size, stride):
            row = (
                [repr(float(traj.times[idx]))]
                + [repr(float(x)) for x in traj.theta[idx]]
                + [repr(float(traj.y[idx]))]
                + [repr(float(x)) for x in traj.u[idx]]
                + [repr(float(x)) for x in traj.g_hat[idx]]
            )
            fh.write(",".join(row) + "\n")
