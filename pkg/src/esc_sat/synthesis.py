"""Gain synthesis for both saturation scenarios via vertex LMI feasibility.

Anti-windup design searches for P (symmetric), Lambda (diagonal) and the
auxiliary gains Z = P*K, Z_aw = P*K_aw making

    [ Z H_i + H_i Z' + 2 eta P        *    ]
    [ Lambda - Z_aw' - H_i Z'     -2 Lambda ]  < 0

hold at every polytope vertex H_i; K and K_aw are recovered by solving
against P.  The certified decay of the averaged loop is then eta, with
conditioning prefactor kappa = sqrt(lmax(P)/lmin(P)).

Rate-saturation design searches for W (symmetric), a diagonal multiplier,
and X, Y, Z with K = Z*X^-1, L = Y*X^-1, under one 3n-by-3n strict block per
vertex plus, for every row, the coupling block

    [ W              Z_l' - Y_l' ]
    [ *              ubar_l^2    ]  >= 0

which places the unit sublevel set of V = g' P g (P = X^-T W X^-1) inside
the region where the dead-zone sector bound with slope L is valid.

Both systems are homogeneous (fully for anti-windup, partially for rate
saturation), so small shaping blocks P >= eps*I etc. pin the scale away from
zero.  Every returned design is re-verified by eigendecomposition of the
re-assembled inequalities, independent of the solver's internal state.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import matio
from .plant import SaturationBounds
from .polytope import HessianPolytope
from .sdp import LmiBlock, LmiProblem, SdpSolution, solve_feasibility

__all__ = [
    "AwDesign",
    "GradSatDesign",
    "InfeasibleDesignError",
    "SynthesisNumericalError",
    "design_aw_gains",
    "design_gradsat_gain",
    "find_aw_certificate",
    "verify_aw_design",
    "verify_gradsat_design",
    "verify_ellipsoid_inclusion",
    "save_design",
    "load_design",
]

log = logging.getLogger(__name__)

SHAPING_EPS = 1e-4
STRICT_MARGIN_SCALE = 1e-7
PSD_MARGIN = 1e-9
COND_WARN = 1e10


class InfeasibleDesignError(Exception):
    """The vertex inequalities admit no solution at the requested decay."""

    def __init__(self, message: str, worst_block: str = "", slack: float = np.nan):
        super().__init__(message)
        self.worst_block = worst_block
        self.slack = slack


class SynthesisNumericalError(Exception):
    """The solver or the gain recovery broke down numerically."""


# ---------------------------------------------------------------------------
# variable packing


class _VarLayout:
    """Maps named matrix variables onto a flat decision vector."""

    def __init__(self, n: int):
        self.n = n
        self._slices: dict[str, tuple[str, slice]] = {}
        self._size = 0

    def add(self, name: str, kind: str) -> None:
        n = self.n
        length = {"sym": n * (n + 1) // 2, "diag": n, "full": n * n}[kind]
        self._slices[name] = (kind, slice(self._size, self._size + length))
        self._size += length

    @property
    def size(self) -> int:
        return self._size

    def unpack(self, x: np.ndarray, name: str) -> np.ndarray:
        kind, sl = self._slices[name]
        v = np.asarray(x)[sl]
        n = self.n
        if kind == "diag":
            return np.diag(v)
        if kind == "full":
            return v.reshape(n, n)
        out = np.zeros((n, n))
        idx = 0
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = v[idx]
                idx += 1
        return out

    def basis(self) -> np.ndarray:
        """Identity matrix over the flat decision vector, row per variable."""
        return np.eye(self._size)


def _affine_stack(
    layout: _VarLayout, build: Callable[[np.ndarray], np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Split a linear matrix expression into base and coefficient stack."""
    base = build(np.zeros(layout.size))
    coeffs = np.stack([build(e) - base for e in layout.basis()])
    return base, coeffs


def _strict_margin(coeffs: np.ndarray, base: np.ndarray) -> float:
    scale = max(
        1.0,
        float(np.linalg.norm(base)),
        max(float(np.linalg.norm(c)) for c in coeffs),
    )
    return STRICT_MARGIN_SCALE * scale


def _shaping_block(
    layout: _VarLayout, name: str, expr: Callable[[np.ndarray], np.ndarray]
) -> LmiBlock:
    base, coeffs = _affine_stack(layout, expr)
    return LmiBlock(
        base=base - SHAPING_EPS * np.eye(base.shape[0]),
        coeffs=coeffs,
        sense="psd",
        margin=PSD_MARGIN,
        name=name,
    )


# ---------------------------------------------------------------------------
# anti-windup scenario


@dataclass(frozen=True)
class AwDesign:
    """Anti-windup gain pair with its Lyapunov certificate."""

    k: np.ndarray
    k_aw: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    eta: float
    kappa: float
    bounds: SaturationBounds
    ill_conditioned: bool = False

    @property
    def dim(self) -> int:
        return self.k.shape[0]


def _aw_vertex_block(P, Lam, Z, Zaw, Hi, eta):
    b11 = Z @ Hi + Hi @ Z.T + 2.0 * eta * P
    b21 = Lam - Zaw.T - Hi @ Z.T
    b22 = -2.0 * Lam
    top = np.hstack([b11, b21.T])
    bot = np.hstack([b21, b22])
    M = np.vstack([top, bot])
    return 0.5 * (M + M.T)


def _assemble_aw_problem(
    poly: HessianPolytope, eta: float
) -> tuple[LmiProblem, _VarLayout]:
    n = poly.dim
    layout = _VarLayout(n)
    layout.add("p", "sym")
    layout.add("lam", "diag")
    layout.add("z", "full")
    layout.add("z_aw", "full")

    blocks = []
    for i, Hi in enumerate(poly.vertices):
        def build(x, Hi=Hi):
            return _aw_vertex_block(
                layout.unpack(x, "p"),
                layout.unpack(x, "lam"),
                layout.unpack(x, "z"),
                layout.unpack(x, "z_aw"),
                Hi,
                eta,
            )

        base, coeffs = _affine_stack(layout, build)
        blocks.append(
            LmiBlock(
                base=base,
                coeffs=coeffs,
                sense="strict",
                margin=_strict_margin(coeffs, base),
                name=f"vertex[{i}]",
            )
        )
    blocks.append(_shaping_block(layout, "p_floor", lambda x: layout.unpack(x, "p")))
    blocks.append(
        _shaping_block(layout, "lam_floor", lambda x: layout.unpack(x, "lam"))
    )
    return LmiProblem(num_vars=layout.size, blocks=tuple(blocks)), layout


def _raise_for_failure(sol: SdpSolution, what: str) -> None:
    if sol.status == "numerical-failure":
        raise SynthesisNumericalError(
            f"{what}: solver failed after {sol.iterations} iterations: {sol.message}"
        )
    if sol.status == "infeasible":
        vertex_checks = [c for c in sol.blocks if c.name.startswith("vertex")]
        worst = max(
            vertex_checks or sol.blocks,
            key=lambda c: c.extreme_eig if c.sense == "strict" else -c.extreme_eig,
        )
        raise InfeasibleDesignError(
            f"{what}: infeasible (slack {sol.slack:.3e}, most violated "
            f"block {worst.name!r})",
            worst_block=worst.name,
            slack=sol.slack,
        )


def _kappa_of(P: np.ndarray) -> float:
    eigs = np.linalg.eigvalsh(P)
    return float(np.sqrt(eigs[-1] / eigs[0]))


def design_aw_gains(
    poly: HessianPolytope,
    eta: float,
    bounds: SaturationBounds,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> AwDesign:
    """Synthesize (K, K_aw) certifying decay eta over the whole polytope."""
    if eta <= 0:
        raise ValueError("decay rate eta must be positive")
    if bounds.dim != poly.dim:
        raise ValueError("saturation bounds dimension mismatch")
    problem, layout = _assemble_aw_problem(poly, eta)
    sol = solve_feasibility(problem, tol=tol, max_iter=max_iter)
    _raise_for_failure(sol, "anti-windup design")

    P = layout.unpack(sol.x, "p")
    Lam = layout.unpack(sol.x, "lam")
    Z = layout.unpack(sol.x, "z")
    Zaw = layout.unpack(sol.x, "z_aw")
    cond = float(np.linalg.cond(P))
    log.debug("anti-windup design: cond(P) = %.3e", cond)
    ill = cond > COND_WARN
    if ill:
        warnings.warn(
            f"recovered P is ill-conditioned (cond {cond:.2e}); gains may be "
            "inaccurate",
            RuntimeWarning,
            stacklevel=2,
        )
    K = np.linalg.solve(P, Z)
    Kaw = np.linalg.solve(P, Zaw)
    design = AwDesign(
        k=K,
        k_aw=Kaw,
        p=P,
        lam=Lam,
        eta=eta,
        kappa=_kappa_of(P),
        bounds=bounds,
        ill_conditioned=ill,
    )
    worst = verify_aw_design(design, poly)
    if worst >= 0:
        raise SynthesisNumericalError(
            f"recovered anti-windup gains fail re-verification (lmax {worst:.3e})"
        )
    return design


def verify_aw_design(design: AwDesign, poly: HessianPolytope) -> float:
    """Largest eigenvalue of the vertex inequalities rebuilt from (P, K).

    Negative return certifies the design for every Hessian in the polytope;
    convexity of the inequality in H makes the vertex check sufficient.
    """
    Z = design.p @ design.k
    Zaw = design.p @ design.k_aw
    worst = -np.inf
    for Hi in poly.vertices:
        M = _aw_vertex_block(design.p, design.lam, Z, Zaw, Hi, design.eta)
        worst = max(worst, float(np.linalg.eigvalsh(M)[-1]))
    return worst


def find_aw_certificate(
    k: np.ndarray,
    k_aw: np.ndarray,
    poly: HessianPolytope,
    eta: float,
    bounds: SaturationBounds,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> AwDesign:
    """Search a Lyapunov certificate (P, Lambda) for externally given gains.

    Used to validate gain matrices quoted from elsewhere: with K and K_aw
    fixed the vertex inequalities are affine in (P, Lambda) alone.
    """
    k = np.asarray(k, dtype=float)
    k_aw = np.asarray(k_aw, dtype=float)
    n = poly.dim
    layout = _VarLayout(n)
    layout.add("p", "sym")
    layout.add("lam", "diag")

    blocks = []
    for i, Hi in enumerate(poly.vertices):
        def build(x, Hi=Hi):
            P = layout.unpack(x, "p")
            Lam = layout.unpack(x, "lam")
            return _aw_vertex_block(P, Lam, P @ k, P @ k_aw, Hi, eta)

        base, coeffs = _affine_stack(layout, build)
        blocks.append(
            LmiBlock(
                base=base,
                coeffs=coeffs,
                sense="strict",
                margin=_strict_margin(coeffs, base),
                name=f"vertex[{i}]",
            )
        )
    blocks.append(_shaping_block(layout, "p_floor", lambda x: layout.unpack(x, "p")))
    blocks.append(
        _shaping_block(layout, "lam_floor", lambda x: layout.unpack(x, "lam"))
    )
    problem = LmiProblem(num_vars=layout.size, blocks=tuple(blocks))
    sol = solve_feasibility(problem, tol=tol, max_iter=max_iter)
    _raise_for_failure(sol, "certificate search")
    P = layout.unpack(sol.x, "p")
    Lam = layout.unpack(sol.x, "lam")
    return AwDesign(
        k=k,
        k_aw=k_aw,
        p=P,
        lam=Lam,
        eta=eta,
        kappa=_kappa_of(P),
        bounds=bounds,
    )


# ---------------------------------------------------------------------------
# rate-saturation scenario


@dataclass(frozen=True)
class GradSatDesign:
    """Rate-limited gain with congruence variables and Lyapunov certificate."""

    k: np.ndarray
    l: np.ndarray
    w: np.ndarray
    x: np.ndarray
    y: np.ndarray
    upsilon_tilde: np.ndarray
    p: np.ndarray
    eta: float
    epsilon: float
    bounds: SaturationBounds
    kappa_g: float
    ill_conditioned: bool = False

    @property
    def dim(self) -> int:
        return self.k.shape[0]


def _gradsat_vertex_block(W, Ut, X, Y, Z, Hi, eta, epsilon):
    b11 = Hi @ Z + Z.T @ Hi + 2.0 * eta * W
    b21 = W - X.T + epsilon * Hi @ Z
    b22 = -epsilon * (X.T + X)
    b31 = Y - Ut @ Hi
    b32 = -epsilon * Ut @ Hi
    b33 = -2.0 * Ut
    M = np.vstack(
        [
            np.hstack([b11, b21.T, b31.T]),
            np.hstack([b21, b22, b32.T]),
            np.hstack([b31, b32, b33]),
        ]
    )
    return 0.5 * (M + M.T)


def _gradsat_row_block(W, Y, Z, row: int, ubar: float):
    n = W.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = W
    M[:n, n] = Z[row, :] - Y[row, :]
    M[n, :n] = M[:n, n]
    M[n, n] = ubar**2
    return M


def _assemble_gradsat_problem(
    poly: HessianPolytope, eta: float, epsilon: float, bounds: SaturationBounds
) -> tuple[LmiProblem, _VarLayout]:
    n = poly.dim
    layout = _VarLayout(n)
    layout.add("w", "sym")
    layout.add("ut", "diag")
    layout.add("x", "full")
    layout.add("y", "full")
    layout.add("z", "full")

    def parts(x):
        return (
            layout.unpack(x, "w"),
            layout.unpack(x, "ut"),
            layout.unpack(x, "x"),
            layout.unpack(x, "y"),
            layout.unpack(x, "z"),
        )

    blocks = []
    for i, Hi in enumerate(poly.vertices):
        def build(x, Hi=Hi):
            return _gradsat_vertex_block(*parts(x), Hi, eta, epsilon)

        base, coeffs = _affine_stack(layout, build)
        blocks.append(
            LmiBlock(
                base=base,
                coeffs=coeffs,
                sense="strict",
                margin=_strict_margin(coeffs, base),
                name=f"vertex[{i}]",
            )
        )
    for ell in range(n):
        def build_row(x, ell=ell):
            W, _, _, Y, Z = parts(x)
            return _gradsat_row_block(W, Y, Z, ell, bounds.limits[ell])

        base, coeffs = _affine_stack(layout, build_row)
        blocks.append(
            LmiBlock(
                base=base,
                coeffs=coeffs,
                sense="psd",
                margin=PSD_MARGIN,
                name=f"row[{ell}]",
            )
        )
    blocks.append(_shaping_block(layout, "w_floor", lambda x: layout.unpack(x, "w")))
    blocks.append(_shaping_block(layout, "ut_floor", lambda x: layout.unpack(x, "ut")))
    blocks.append(
        _shaping_block(
            layout,
            "x_sym_floor",
            lambda x: layout.unpack(x, "x") + layout.unpack(x, "x").T,
        )
    )
    return LmiProblem(num_vars=layout.size, blocks=tuple(blocks)), layout


def design_gradsat_gain(
    poly: HessianPolytope,
    eta: float,
    epsilon: float,
    bounds: SaturationBounds,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> GradSatDesign:
    """Synthesize a rate-limited gain with a regional decay certificate."""
    if eta <= 0:
        raise ValueError("decay rate eta must be positive")
    if epsilon <= 0:
        raise ValueError("the congruence scalar epsilon must be positive")
    if bounds.dim != poly.dim:
        raise ValueError("rate bound dimension mismatch")
    problem, layout = _assemble_gradsat_problem(poly, eta, epsilon, bounds)
    sol = solve_feasibility(problem, tol=tol, max_iter=max_iter)
    _raise_for_failure(sol, "rate-saturation design")

    W = layout.unpack(sol.x, "w")
    Ut = layout.unpack(sol.x, "ut")
    X = layout.unpack(sol.x, "x")
    Y = layout.unpack(sol.x, "y")
    Z = layout.unpack(sol.x, "z")

    cond_x = float(np.linalg.cond(X))
    log.debug("rate-saturation design: cond(X) = %.3e", cond_x)
    if cond_x > 1e12:
        raise SynthesisNumericalError(
            f"recovered X is numerically singular (cond {cond_x:.2e})"
        )
    # K = Z X^-1 and L = Y X^-1 via K X = Z  =>  X' K' = Z'
    K = np.linalg.solve(X.T, Z.T).T
    L = np.linalg.solve(X.T, Y.T).T
    # P = X^-T W X^-1: first A = X^-T W, then P = A X^-1 via X' P' = A'
    A = np.linalg.solve(X.T, W)
    P = np.linalg.solve(X.T, A.T).T
    P = 0.5 * (P + P.T)
    cond_p = float(np.linalg.cond(P))
    ill = cond_p > COND_WARN
    if ill:
        warnings.warn(
            f"recovered P is ill-conditioned (cond {cond_p:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )
    design = GradSatDesign(
        k=K,
        l=L,
        w=W,
        x=X,
        y=Y,
        upsilon_tilde=Ut,
        p=P,
        eta=eta,
        epsilon=epsilon,
        bounds=bounds,
        kappa_g=_kappa_of(P),
        ill_conditioned=ill,
    )
    vertex_max, row_min = verify_gradsat_design(design, poly)
    if vertex_max >= 0 or row_min < -10 * PSD_MARGIN:
        raise SynthesisNumericalError(
            "recovered rate-saturation gain fails re-verification "
            f"(vertex lmax {vertex_max:.3e}, row lmin {row_min:.3e})"
        )
    return design


def verify_gradsat_design(
    design: GradSatDesign, poly: HessianPolytope
) -> tuple[float, float]:
    """Re-verify both inequality families by substitution.

    Returns (max vertex eigenvalue, min row-coupling eigenvalue); the design
    is certified when the first is negative and the second nonnegative up to
    the psd margin.  Z is rebuilt as K*X so the check exercises the recovered
    gains rather than echoing the solver's variables.
    """
    Z = design.k @ design.x
    Y = design.l @ design.x
    vertex_max = -np.inf
    for Hi in poly.vertices:
        M = _gradsat_vertex_block(
            design.w, design.upsilon_tilde, design.x, Y, Z, Hi,
            design.eta, design.epsilon,
        )
        vertex_max = max(vertex_max, float(np.linalg.eigvalsh(M)[-1]))
    row_min = np.inf
    for ell in range(design.dim):
        M = _gradsat_row_block(design.w, Y, Z, ell, design.bounds.limits[ell])
        row_min = min(row_min, float(np.linalg.eigvalsh(M)[0]))
    return vertex_max, row_min


def verify_ellipsoid_inclusion(design: GradSatDesign) -> np.ndarray:
    """Per-row residual lmin(P - (K_l - L_l)'(K_l - L_l)/ubar_l^2).

    All residuals nonnegative (up to the psd margin) certify that the unit
    sublevel set of V = g'Pg lies inside the sector-validity region, i.e. the
    certificate is valid on the whole claimed domain of attraction.
    """
    out = np.empty(design.dim)
    for ell in range(design.dim):
        diff = design.k[ell, :] - design.l[ell, :]
        M = design.p - np.outer(diff, diff) / design.bounds.limits[ell] ** 2
        out[ell] = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    return out


# ---------------------------------------------------------------------------
# design files


def save_design(design, path: str) -> None:
    """Write a design to a line-oriented text file (row-major matrices)."""
    lines = []
    if isinstance(design, AwDesign):
        lines.append("kind = aw")
        lines.append(f"eta = {design.eta!r}")
        lines.append(f"bounds = {matio.format_vector(design.bounds.limits)}")
        lines.append(f"k = {matio.format_matrix(design.k)}")
        lines.append(f"k_aw = {matio.format_matrix(design.k_aw)}")
        lines.append(f"p = {matio.format_matrix(design.p)}")
        lines.append(f"lambda = {matio.format_matrix(design.lam)}")
        lines.append(f"kappa = {design.kappa!r}")
    elif isinstance(design, GradSatDesign):
        lines.append("kind = gradsat")
        lines.append(f"eta = {design.eta!r}")
        lines.append(f"epsilon = {design.epsilon!r}")
        lines.append(f"bounds = {matio.format_vector(design.bounds.limits)}")
        lines.append(f"k = {matio.format_matrix(design.k)}")
        lines.append(f"l = {matio.format_matrix(design.l)}")
        lines.append(f"w = {matio.format_matrix(design.w)}")
        lines.append(f"x = {matio.format_matrix(design.x)}")
        lines.append(f"y = {matio.format_matrix(design.y)}")
        lines.append(f"upsilon_tilde = {matio.format_matrix(design.upsilon_tilde)}")
        lines.append(f"p = {matio.format_matrix(design.p)}")
        lines.append(f"kappa_g = {design.kappa_g!r}")
    else:
        raise TypeError(f"not a design: {type(design).__name__}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_design(path: str):
    """Read back a design file written by save_design."""
    entries: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    kind = entries.pop("kind", None)
    try:
        if kind == "aw":
            bounds = SaturationBounds(matio.parse_vector(entries["bounds"]))
            p = matio.parse_matrix(entries["p"])
            return AwDesign(
                k=matio.parse_matrix(entries["k"]),
                k_aw=matio.parse_matrix(entries["k_aw"]),
                p=p,
                lam=matio.parse_matrix(entries["lambda"]),
                eta=float(entries["eta"]),
                kappa=float(entries["kappa"]),
                bounds=bounds,
            )
        if kind == "gradsat":
            bounds = SaturationBounds(matio.parse_vector(entries["bounds"]))
            return GradSatDesign(
                k=matio.parse_matrix(entries["k"]),
                l=matio.parse_matrix(entries["l"]),
                w=matio.parse_matrix(entries["w"]),
                x=matio.parse_matrix(entries["x"]),
                y=matio.parse_matrix(entries["y"]),
                upsilon_tilde=matio.parse_matrix(entries["upsilon_tilde"]),
                p=matio.parse_matrix(entries["p"]),
                eta=float(entries["eta"]),
                epsilon=float(entries["epsilon"]),
                bounds=bounds,
                kappa_g=float(entries["kappa_g"]),
            )
    except KeyError as exc:
        raise ValueError(f"design file {path} is missing field {exc}") from None
    raise ValueError(f"design file {path} has unknown kind {kind!r}")
