import dataclasses

import numpy as np
import pytest

from esc_sat.plant import SaturationBounds
from esc_sat.polytope import HessianPolytope, from_scaled_nominal
from esc_sat.sdp import check_solution
from esc_sat.synthesis import (
    AwDesign,
    InfeasibleDesignError,
    _assemble_aw_problem,
    design_aw_gains,
    design_gradsat_gain,
    find_aw_certificate,
    load_design,
    save_design,
    verify_aw_design,
    verify_ellipsoid_inclusion,
    verify_gradsat_design,
)
from conftest import EX1_K, EX1_KAW


def test_aw_design_reference_polytope(ex1_polytope, ex1_bounds):
    design = design_aw_gains(ex1_polytope, 1.0, ex1_bounds)
    assert verify_aw_design(design, ex1_polytope) < 0
    assert np.all(np.linalg.eigvalsh(design.p) > 0)
    assert np.all(np.diag(design.lam) > 0)
    assert design.kappa >= 1.0


def test_aw_design_roundtrip_against_solver(ex1_polytope, ex1_bounds):
    # substitution residuals must agree with the solver's own slack
    problem, layout = _assemble_aw_problem(ex1_polytope, 1.0)
    from esc_sat.sdp import solve_feasibility

    sol = solve_feasibility(problem)
    assert sol.status == "feasible"
    design = design_aw_gains(ex1_polytope, 1.0, ex1_bounds)
    rebuilt = verify_aw_design(design, ex1_polytope)
    solver_worst = max(
        c.extreme_eig for c in check_solution(problem, sol.x) if c.sense == "strict"
    )
    assert rebuilt == pytest.approx(solver_worst, rel=1e-6)


def test_aw_design_singleton_stable():
    poly = HessianPolytope((-np.eye(2),))
    design = design_aw_gains(poly, 0.1, SaturationBounds([1.0, 1.0]))
    assert verify_aw_design(design, poly) < 0
    # stabilizing K H with H = -I needs K positive definite in symmetric part
    sym = 0.5 * (design.k + design.k.T)
    assert np.all(np.linalg.eigvalsh(sym) > 0)


def test_aw_design_contradictory_polytope_infeasible():
    H = np.array([[2.0, 0.3], [0.3, 1.0]])
    poly = HessianPolytope((H, -H))
    with pytest.raises(InfeasibleDesignError) as exc:
        design_aw_gains(poly, 0.5, SaturationBounds([1.0, 1.0]))
    assert exc.value.worst_block.startswith("vertex")
    assert exc.value.slack > 0


def test_aw_feasibility_monotone_in_eta(ex1_polytope, ex1_bounds):
    # a smaller decay request can only be easier
    design_aw_gains(ex1_polytope, 1.0, ex1_bounds)
    design_aw_gains(ex1_polytope, 0.5, ex1_bounds)


def test_verify_rejects_zero_gains(ex1_polytope, ex1_bounds):
    bad = AwDesign(
        k=np.zeros((2, 2)),
        k_aw=np.zeros((2, 2)),
        p=np.eye(2),
        lam=np.eye(2),
        eta=1.0,
        kappa=1.0,
        bounds=ex1_bounds,
    )
    assert verify_aw_design(bad, ex1_polytope) >= 0


def test_verify_scaling_homogeneity(ex1_polytope, ex1_bounds):
    design = design_aw_gains(ex1_polytope, 1.0, ex1_bounds)
    for c in (1e-3, 1.0, 1e3):
        scaled = dataclasses.replace(design, p=c * design.p, lam=c * design.lam)
        assert (verify_aw_design(scaled, ex1_polytope) < 0) == (
            verify_aw_design(design, ex1_polytope) < 0
        )


def test_certificate_search_for_published_gains(ex1_polytope, ex1_bounds):
    cert = find_aw_certificate(EX1_K, EX1_KAW, ex1_polytope, 0.9, ex1_bounds)
    assert verify_aw_design(cert, ex1_polytope) < 0
    assert np.allclose(cert.k, EX1_K)


def test_certified_published_gains_decay_in_simulation(ex1_polytope, ex1_bounds):
    # the found certificate must actually bound the simulated average loop
    from esc_sat.plant import AwController, QuadraticMap
    from esc_sat.polytope import evaluate
    from esc_sat.signals import DitherSpec
    from esc_sat.sim import SimConfig, simulate

    cert = find_aw_certificate(EX1_K, EX1_KAW, ex1_polytope, 0.9, ex1_bounds)
    H = evaluate(ex1_polytope, [0.6822, 0.3178])
    qmap = QuadraticMap(10.0, [2.0, 4.0], H, ex1_bounds)
    cfg = SimConfig(
        scenario="average-aw",
        qmap=qmap,
        dither=DitherSpec([0.1, 0.1], (10, 70), 1.0),
        controller=AwController(EX1_K, EX1_KAW, ex1_bounds),
        theta0=np.array([2.5, 6.0]),
        t_end=5.0,
        p_matrix=cert.p,
    )
    traj = simulate(cfg)
    bound = traj.v[0] * np.exp(-2.0 * cert.eta * traj.times) * (1.0 + 1e-6)
    assert np.all(traj.v <= bound)


def test_gradsat_design_reference_polytope(ex2_polytope, ex2_bounds):
    design = design_gradsat_gain(ex2_polytope, 1.0, 0.5, ex2_bounds)
    vmax, rmin = verify_gradsat_design(design, ex2_polytope)
    assert vmax < 0
    assert rmin >= -1e-9
    assert np.min(verify_ellipsoid_inclusion(design)) >= -1e-9
    assert np.all(np.linalg.eigvalsh(design.p) > 0)
    # the congruence bound makes X invertible by construction
    assert np.all(np.linalg.eigvalsh(design.x + design.x.T) > 0)


def test_gradsat_scalar_case():
    poly = HessianPolytope((np.array([[-1.0]]),))
    design = design_gradsat_gain(poly, 0.2, 0.5, SaturationBounds([1.0]))
    assert design.k[0, 0] > 0
    vmax, rmin = verify_gradsat_design(design, poly)
    assert vmax < 0 and rmin >= -1e-9


def test_gradsat_epsilon_must_be_positive(ex2_polytope, ex2_bounds):
    with pytest.raises(ValueError):
        design_gradsat_gain(ex2_polytope, 1.0, 0.0, ex2_bounds)


def test_ellipsoid_limit_cases(ex2_polytope, ex2_bounds):
    design = design_gradsat_gain(ex2_polytope, 1.0, 0.5, ex2_bounds)
    p_min = float(np.linalg.eigvalsh(design.p)[0])
    # taking the sector slope at the gain itself removes the subtrahend
    same = dataclasses.replace(design, l=design.k.copy())
    assert np.allclose(verify_ellipsoid_inclusion(same), p_min)
    # enormous rate limits do the same in the limit
    wide = dataclasses.replace(
        design, bounds=SaturationBounds([1e9] * design.dim)
    )
    assert np.allclose(verify_ellipsoid_inclusion(wide), p_min, atol=1e-12)


def test_design_file_roundtrip(tmp_path, ex1_polytope, ex1_bounds, ex2_polytope, ex2_bounds):
    aw = design_aw_gains(ex1_polytope, 1.0, ex1_bounds)
    path = tmp_path / "aw.txt"
    save_design(aw, str(path))
    back = load_design(str(path))
    assert np.array_equal(back.k, aw.k)
    assert np.array_equal(back.k_aw, aw.k_aw)
    assert np.array_equal(back.p, aw.p)
    assert back.eta == aw.eta

    gs = design_gradsat_gain(ex2_polytope, 1.0, 0.5, ex2_bounds)
    path = tmp_path / "gs.txt"
    save_design(gs, str(path))
    back = load_design(str(path))
    assert np.array_equal(back.k, gs.k)
    assert np.array_equal(back.x, gs.x)
    assert back.epsilon == gs.epsilon


def test_load_design_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("kind = aw\nk = 1 0; 0 1\n")
    with pytest.raises(ValueError, match="missing field"):
        load_design(str(path))
    path.write_text("kind = squirrel\n")
    with pytest.raises(ValueError, match="unknown kind"):
        load_design(str(path))
