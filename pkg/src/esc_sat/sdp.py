"""Dense feasibility solver for small linear matrix inequality systems.

A problem is a set of affine symmetric-matrix maps F^k(x) = F0^k + sum_j x_j
F_j^k, each required strictly negative definite or positive semidefinite up
to a per-block margin.  Feasibility is decided through the phase-I program

    minimize t  s.t.  F^k(x) <= t*I  (strict blocks),  -F^k(x) <= t*I  (psd),

solved with a log-det barrier and damped Newton steps.  The systems arising
here are tiny (tens of scalar unknowns, blocks of order <= 12), so a dense
second-order method is both the simplest and the most reliable choice.

The solver never trusts its own barrier state: a candidate is accepted only
once an eigendecomposition of every assembled block meets the margins, and
``check_solution`` re-runs that test independently of the solve path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "LmiBlock",
    "LmiProblem",
    "BlockCheck",
    "SdpSolution",
    "solve_feasibility",
    "check_solution",
]

_SYM_TOL = 1e-9


def _symmetrize(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be square")
    skew = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if skew > _SYM_TOL * scale:
        raise ValueError(f"{what} is not symmetric (skew {skew:.3e})")
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True)
class LmiBlock:
    """One affine block F(x) = base + sum_j x_j coeffs[j] with a sense.

    sense "strict" demands lambda_max(F(x)) <= -margin, sense "psd" demands
    lambda_min(F(x)) >= -margin.
    """

    base: np.ndarray
    coeffs: np.ndarray          # shape (num_vars, d, d)
    sense: str = "strict"
    margin: float = 0.0
    name: str = ""

    def __post_init__(self):
        base = _symmetrize(self.base, f"block {self.name!r} base")
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 3 or coeffs.shape[1:] != base.shape:
            raise ValueError(f"block {self.name!r} coefficient stack has bad shape")
        coeffs = np.stack(
            [_symmetrize(c, f"block {self.name!r} coeff {j}") for j, c in enumerate(coeffs)]
        )
        if self.sense not in ("strict", "psd"):
            raise ValueError(f"unknown block sense {self.sense!r}")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.base.shape[0]


@dataclass(frozen=True)
class LmiProblem:
    num_vars: int
    blocks: tuple[LmiBlock, ...]

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("problem needs at least one variable")
        if not self.blocks:
            raise ValueError("problem needs at least one block")
        for b in self.blocks:
            if b.coeffs.shape[0] != self.num_vars:
                raise ValueError(
                    f"block {b.name!r} has {b.coeffs.shape[0]} coefficient "
                    f"matrices for {self.num_vars} variables"
                )
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def assemble(self, block: LmiBlock, x: np.ndarray) -> np.ndarray:
        """F(x) for one block, symmetrized against accumulated roundoff."""
        F = block.base + np.tensordot(x, block.coeffs, axes=(0, 0))
        return 0.5 * (F + F.T)


@dataclass(frozen=True)
class BlockCheck:
    name: str
    sense: str
    extreme_eig: float          # lambda_max for strict blocks, lambda_min for psd
    margin: float
    ok: bool


@dataclass(frozen=True)
class SdpSolution:
    x: np.ndarray
    slack: float                # max over blocks of the phase-I eigenvalue slack
    status: str                 # feasible | infeasible | numerical-failure
    iterations: int
    blocks: tuple[BlockCheck, ...] = field(default_factory=tuple)
    message: str = ""


def check_solution(problem: LmiProblem, x: np.ndarray) -> tuple[BlockCheck, ...]:
    """Extreme eigenvalue of every assembled block at x, by eigendecomposition.

    Deliberately independent of the solver: this is the acceptance oracle for
    any claimed feasible point.
    """
    x = np.asarray(x, dtype=float)
    if x.size != problem.num_vars:
        raise ValueError("x has the wrong number of variables")
    out = []
    for b in problem.blocks:
        eigs = np.linalg.eigvalsh(problem.assemble(b, x))
        if b.sense == "strict":
            ext = float(eigs[-1])
            ok = ext <= -b.margin
        else:
            ext = float(eigs[0])
            ok = ext >= -b.margin
        out.append(BlockCheck(b.name, b.sense, ext, b.margin, ok))
    return tuple(out)


def _phase1_slack(problem: LmiProblem, x: np.ndarray) -> float:
    """max_k lambda_max of the sign-unified blocks (the phase-I objective)."""
    worst = -np.inf
    for b in problem.blocks:
        F = problem.assemble(b, x)
        G = F if b.sense == "strict" else -F
        worst = max(worst, float(np.linalg.eigvalsh(G)[-1]))
    return worst


def solve_feasibility(
    problem: LmiProblem,
    tol: float = 1e-8,
    max_iter: int = 500,
    box_bound: float = 1e6,
    log_path: Optional[str] = None,
) -> SdpSolution:
    """Decide feasibility of an LMI system and return a certified point.

    Newton with Cholesky step solves and Armijo backtracking (factor 0.5,
    slope 0.01) minimizes t/mu - sum_k log det(t*I - G^k(x)) over a shrinking
    barrier parameter mu, starting from x = 0 and t0 = max_k lambda_max + 1.
    Variables are confined to |x_j| <= box_bound, which keeps the phase-I
    objective bounded for homogeneous systems.  After every Newton step the
    per-block eigenvalue contracts are tested directly; the first iterate
    passing all of them is returned as feasible.  If the barrier gap closes
    below ``tol`` first, the problem is declared infeasible with the residual
    slack.  Newton breakdowns and iteration exhaustion give numerical-failure.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = problem.num_vars
    nb = len(problem.blocks)
    # unified stacks: S_k(z) = t*I - s_k*F^k(x); coefficient of z in S_k is
    # [-s_k*F_j ..., I]
    signs = [1.0 if b.sense == "strict" else -1.0 for b in problem.blocks]
    bases = [signs[k] * problem.blocks[k].base for k in range(nb)]
    stacks = []
    for k, b in enumerate(problem.blocks):
        d = b.dim
        C = np.empty((m + 1, d, d))
        C[:m] = -signs[k] * b.coeffs
        C[m] = np.eye(d)
        stacks.append(C)

    def g_of(k: int, x: np.ndarray) -> np.ndarray:
        G = bases[k] + np.tensordot(x, -stacks[k][:m], axes=(0, 0))
        return 0.5 * (G + G.T)

    def chol_or_none(S: np.ndarray):
        try:
            return np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return None

    def barrier_value(z: np.ndarray, mu: float) -> float:
        val = z[m] / mu
        for k in range(nb):
            S = z[m] * np.eye(problem.blocks[k].dim) - g_of(k, z[:m])
            L = chol_or_none(S)
            if L is None:
                return np.inf
            val -= 2.0 * float(np.sum(np.log(np.diag(L))))
        for j in range(m):
            if abs(z[j]) >= box_bound:
                return np.inf
            val -= np.log(box_bound - z[j]) + np.log(box_bound + z[j])
        return val

    def contracts_met(x: np.ndarray) -> bool:
        return all(c.ok for c in check_solution(problem, x))

    x0 = np.zeros(m)
    t0 = max(float(np.linalg.eigvalsh(g_of(k, x0))[-1]) for k in range(nb)) + 1.0
    z = np.concatenate([x0, [t0]])
    nu = sum(b.dim for b in problem.blocks) + 2 * m
    mu = 1.0 + abs(t0)
    shrink = 0.2
    iterations = 0
    log_rows: list[str] = []

    def finish(status: str, message: str = "") -> SdpSolution:
        x = z[:m].copy()
        if log_path is not None:
            with open(log_path, "w") as fh:
                fh.write("iter,t,decrement,step\n")
                fh.writelines(log_rows)
        return SdpSolution(
            x=x,
            slack=_phase1_slack(problem, x),
            status=status,
            iterations=iterations,
            blocks=check_solution(problem, x),
            message=message,
        )

    if contracts_met(z[:m]):
        return finish("feasible", "origin already satisfies all contracts")

    while True:
        # center at the current mu
        for _ in range(200):
            if iterations >= max_iter:
                return finish(
                    "numerical-failure", f"iteration budget {max_iter} exhausted"
                )
            grad = np.zeros(m + 1)
            hess = np.zeros((m + 1, m + 1))
            grad[m] = 1.0 / mu
            domain_ok = True
            for k in range(nb):
                d = problem.blocks[k].dim
                S = z[m] * np.eye(d) - g_of(k, z[:m])
                L = chol_or_none(S)
                if L is None:
                    domain_ok = False
                    break
                Si = np.linalg.solve(S, np.eye(d))
                U = np.einsum("ab,jbc->jac", Si, stacks[k])
                grad -= np.einsum("jaa->j", U)
                hess += np.einsum("jab,kba->jk", U, U)
            if not domain_ok:
                return finish(
                    "numerical-failure", "iterate left the barrier domain"
                )
            for j in range(m):
                grad[j] += 1.0 / (box_bound - z[j]) - 1.0 / (box_bound + z[j])
                hess[j, j] += (
                    1.0 / (box_bound - z[j]) ** 2 + 1.0 / (box_bound + z[j]) ** 2
                )
            try:
                Lh = np.linalg.cholesky(hess)
            except np.linalg.LinAlgError:
                hess += 1e-12 * np.trace(hess) / (m + 1) * np.eye(m + 1)
                try:
                    Lh = np.linalg.cholesky(hess)
                except np.linalg.LinAlgError:
                    return finish(
                        "numerical-failure", "barrier Hessian lost definiteness"
                    )
            dz = -np.linalg.solve(Lh.T, np.linalg.solve(Lh, grad))
            decrement2 = float(-grad @ dz)
            if decrement2 / 2.0 <= 1e-10:
                break
            f0 = barrier_value(z, mu)
            slope = float(grad @ dz)
            alpha = 1.0
            stepped = False
            while alpha > 1e-14:
                zn = z + alpha * dz
                if barrier_value(zn, mu) <= f0 + 0.01 * alpha * slope:
                    stepped = True
                    break
                alpha *= 0.5
            if not stepped:
                break
            z = z + alpha * dz
            iterations += 1
            log_rows.append(
                f"{iterations},{z[m]!r},{np.sqrt(max(decrement2, 0.0))!r},{alpha!r}\n"
            )
            if contracts_met(z[:m]):
                return finish("feasible")
        if contracts_met(z[:m]):
            return finish("feasible")
        if nu * mu <= tol:
            worst = max(
                (c for c in check_solution(problem, z[:m]) if not c.ok),
                key=lambda c: abs(c.extreme_eig),
                default=None,
            )
            msg = (
                f"barrier gap {nu * mu:.2e} below tol with contracts unmet"
                + (f"; worst block {worst.name!r}" if worst is not None else "")
            )
            return finish("infeasible", msg)
        mu *= shrink
