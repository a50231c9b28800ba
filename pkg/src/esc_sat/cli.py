"""Command line front end: design gains, simulate, sweep, verify.

Exit codes are a stable contract: 0 success, 1 usage or parse problems,
2 infeasibility or a failed certificate, 3 simulation blow-up.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from . import analysis, synthesis
from .config import (
    ConfigError,
    ExperimentConfig,
    build_controller,
    build_dither,
    build_polytope,
    build_qmap,
    build_sim_config,
    build_synthesis_request,
    load_config,
    resolve_hessian,
)
from .plant import AwController, GradSatController
from .polytope import HessianPolytope
from .sim import SimulationBlowUp, export_csv, simulate
from .svgplot import render_trajectory_svg
from .synthesis import (
    AwDesign,
    GradSatDesign,
    InfeasibleDesignError,
    SynthesisNumericalError,
    load_design,
    save_design,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CERTIFICATE = 2
EXIT_BLOWUP = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _atomic_write(path: str, writer) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".esc-sat-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _warn_frequencies(cfg: ExperimentConfig) -> None:
    report = build_dither(cfg).admissibility()
    if not report.valid:
        print(f"warning: {report.describe()}", file=sys.stderr)
        print(
            "warning: proceeding anyway; averaged predictions may be distorted",
            file=sys.stderr,
        )


def _cmd_design(args) -> int:
    cfg = load_config(args.config)
    _warn_frequencies(cfg)
    req = build_synthesis_request(cfg)
    poly = build_polytope(cfg)
    if poly is None:
        print("error: [map] must define a polytope for gain design", file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    try:
        if req.kind == "aw":
            design = synthesis.design_aw_gains(poly, req.eta, req.bounds)
            worst = synthesis.verify_aw_design(design, poly)
            lines.append(f"kind = aw, eta = {req.eta}, kappa = {design.kappa:.6g}")
            for i, Hi in enumerate(poly.vertices):
                sub = synthesis.verify_aw_design(design, HessianPolytope((Hi,)))
                lines.append(f"vertex[{i}] lambda_max = {sub:.6e}")
            lines.append(f"overall lambda_max = {worst:.6e}")
            ok = worst < 0
        else:
            eps = req.epsilon if req.epsilon is not None else 0.5
            if args.epsilon_sweep:
                # no principled rule fixes the congruence scalar; report how
                # feasibility and conditioning move across candidate values
                for cand in (float(v) for v in args.epsilon_sweep.split(",")):
                    try:
                        trial = synthesis.design_gradsat_gain(
                            poly, req.eta, cand, req.bounds
                        )
                        vmax_c, _ = synthesis.verify_gradsat_design(trial, poly)
                        lines.append(
                            f"epsilon = {cand:g}: feasible, kappa_g = "
                            f"{trial.kappa_g:.6g}, vertex lambda_max = {vmax_c:.3e}"
                        )
                    except (InfeasibleDesignError, SynthesisNumericalError) as exc:
                        lines.append(f"epsilon = {cand:g}: {exc}")
            design = synthesis.design_gradsat_gain(poly, req.eta, eps, req.bounds)
            vmax, rmin = synthesis.verify_gradsat_design(design, poly)
            ell = synthesis.verify_ellipsoid_inclusion(design)
            lines.append(
                f"kind = gradsat, eta = {req.eta}, epsilon = {eps}, "
                f"kappa_g = {design.kappa_g:.6g}"
            )
            lines.append(f"vertex lambda_max = {vmax:.6e}")
            lines.append(f"row-coupling lambda_min = {rmin:.6e}")
            lines.append(
                "ellipsoid inclusion residuals = "
                + " ".join(f"{r:.6e}" for r in ell)
            )
            ok = vmax < 0 and rmin >= -1e-9 and np.min(ell) >= -1e-9
    except InfeasibleDesignError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except SynthesisNumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE

    design_path = os.path.join(out_dir, args.design_name)
    _atomic_write(design_path, lambda p: save_design(design, p))
    report_path = os.path.join(out_dir, "design_report.txt")
    text = "\n".join(lines) + "\n"
    _atomic_write(report_path, lambda p: open(p, "w").write(text))
    print(text, end="")
    print(f"design written to {design_path}")
    if not ok:
        print("verification failed on the recovered design", file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def _load_sim_pieces(cfg: ExperimentConfig, design_path: Optional[str]):
    design = load_design(design_path) if design_path else None
    poly = build_polytope(cfg)
    hessian = resolve_hessian(cfg, poly)
    qmap = build_qmap(cfg, hessian)
    dither = build_dither(cfg)
    controller = build_controller(cfg, qmap, design)
    p_matrix = design.p if design is not None else None
    sim_cfg = build_sim_config(cfg, qmap, dither, controller, p_matrix=p_matrix)
    return sim_cfg, qmap, dither, poly, design


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    _warn_frequencies(cfg)
    sim_cfg, qmap, dither, _, _ = _load_sim_pieces(cfg, args.design)
    os.makedirs(args.out, exist_ok=True)
    stride = args.stride
    if stride is None:
        stride = int(cfg.get("outputs", "stride", "1"))
    try:
        traj = simulate(sim_cfg)
    except SimulationBlowUp as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    csv_path = os.path.join(args.out, "trajectory.csv")
    _atomic_write(csv_path, lambda p: export_csv(traj, p, stride=stride))
    print(f"trajectory written to {csv_path} ({traj.times.size} samples)")
    want_plot = args.plot or cfg.get("outputs", "plot", "false") == "true"
    if want_plot:
        svg_path = os.path.join(args.out, "trajectory.svg")
        _atomic_write(svg_path, lambda p: render_trajectory_svg(traj, p))
        print(f"plot written to {svg_path}")
    band = analysis.check_convergence_bands(traj, qmap, dither)
    print(
        f"tail residuals: |theta - theta*| = {band.r_theta:.4g} "
        f"(band {band.theta_band:.4g}, {'ok' if band.theta_ok else 'FAIL'}), "
        f"|y - q*| = {band.r_y:.4g} "
        f"(band {band.y_band:.4g}, {'ok' if band.y_ok else 'FAIL'})"
    )
    return EXIT_OK


def _average_counterpart(sim_cfg):
    scenario = (
        "average-aw"
        if isinstance(sim_cfg.controller, AwController)
        else "average-gradsat"
    )
    from dataclasses import replace

    return replace(sim_cfg, scenario=scenario, dt=None)


def _sweep_one(cfg_path: str, design_path, param: str, value: float):
    cfg = load_config(cfg_path)
    sim_cfg, qmap, dither, _, _ = _load_sim_pieces(cfg, design_path)
    from dataclasses import replace

    if param == "omega-scale":
        dither = dither.with_base_omega(dither.base_omega * value)
    else:
        # amplitude values are absolute and apply to every channel
        from .signals import DitherSpec

        dither = DitherSpec(
            np.full(dither.dim, value), dither.freq_multipliers, dither.base_omega
        )
    sim_cfg = replace(sim_cfg, dither=dither, dt=None)
    traj = simulate(sim_cfg)
    avg = simulate(_average_counterpart(sim_cfg))
    dev = analysis.sup_deviation(traj, avg, "theta_tilde")
    band = analysis.check_convergence_bands(traj, qmap, dither)
    fit = analysis.fit_decay(avg, "theta_tilde")
    return (value, dev, band.r_theta, band.r_y, fit.eta_hat)


def _cmd_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if len(values) < 2:
        print("error: sweep needs at least two values", file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(args.out, exist_ok=True)
    workers = int(os.environ.get("ESC_SAT_THREADS", "0")) or min(4, len(values))
    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(
                    lambda v: _sweep_one(args.config, args.design, args.param, v),
                    values,
                )
            )
    except SimulationBlowUp as exc:
        print(f"blow-up during sweep: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    path = os.path.join(args.out, "sweep.csv")

    def write(p):
        with open(p, "w") as fh:
            fh.write("value,sup_deviation,tail_r_theta,tail_r_y,eta_hat\n")
            for row in rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")

    _atomic_write(path, write)
    for row in rows:
        print(
            f"{args.param} = {row[0]:g}: sup|tt - tt_av| = {row[1]:.4g}, "
            f"r_theta = {row[2]:.4g}, r_y = {row[3]:.4g}, eta_hat = {row[4]:.4g}"
        )
    print(f"sweep summary written to {path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    if not os.path.exists(args.design):
        print(f"error: no such design file {args.design}", file=sys.stderr)
        return EXIT_USAGE
    if not os.path.exists(args.config):
        print(f"error: no such config {args.config}", file=sys.stderr)
        return EXIT_USAGE
    design = load_design(args.design)
    cfg = load_config(args.config)
    poly = build_polytope(cfg)
    if poly is None:
        print("error: config defines no polytope", file=sys.stderr)
        return EXIT_USAGE
    failures = []
    if isinstance(design, AwDesign):
        worst = synthesis.verify_aw_design(design, poly)
        print(f"vertex inequalities: lambda_max = {worst:.6e}")
        if worst >= 0:
            failures.append("vertex inequalities not negative definite")
        from . import matio

        theta_star = matio.parse_vector(cfg.require("map", "theta_star"))
        slack = analysis.sample_deadzone_sector_global(
            design.bounds, theta_star, trials=10_000, seed=args.seed
        )
        print(f"dead-zone sector sampling: max slack = {slack:.3e}")
        if slack > analysis.SECTOR_SLACK_TOL:
            failures.append("sector condition violated in sampling")
    elif isinstance(design, GradSatDesign):
        vmax, rmin = synthesis.verify_gradsat_design(design, poly)
        print(f"vertex inequalities: lambda_max = {vmax:.6e}")
        print(f"row-coupling blocks: lambda_min = {rmin:.6e}")
        ell = synthesis.verify_ellipsoid_inclusion(design)
        print(
            "ellipsoid inclusion residuals: "
            + " ".join(f"{r:.6e}" for r in ell)
        )
        slack = analysis.sample_deadzone_sector_regional(
            design, trials=10_000, seed=args.seed
        )
        print(f"dead-zone sector sampling: max slack = {slack:.3e}")
        if vmax >= 0:
            failures.append("vertex inequalities not negative definite")
        if rmin < -1e-9:
            failures.append("row-coupling blocks not positive semidefinite")
        if float(np.min(ell)) < -1e-9:
            failures.append("certified region leaves the sector-validity set")
        if slack > analysis.SECTOR_SLACK_TOL:
            failures.append("sector condition violated in sampling")
    else:
        print("error: unrecognized design object", file=sys.stderr)
        return EXIT_USAGE
    if failures:
        for f in failures:
            print(f"FAILED: {f}", file=sys.stderr)
        return EXIT_CERTIFICATE
    print("all certificates pass")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="esc-sat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="synthesize gains from a config")
    p.add_argument("config")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--design-name", default="design.txt")
    p.add_argument(
        "--epsilon-sweep",
        default=None,
        help="comma-separated congruence-scalar candidates to report on "
        "(rate-saturation designs only)",
    )
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("simulate", help="run one closed-loop simulation")
    p.add_argument("config")
    p.add_argument("--design", default=None, help="design file for gains")
    p.add_argument("--out", default=".")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--stride", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="sweep dither frequency or amplitude")
    p.add_argument("config")
    p.add_argument("--design", default=None)
    p.add_argument("--param", choices=("omega-scale", "amplitude"), required=True)
    p.add_argument("--values", required=True, help="comma-separated scale factors")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="re-check the certificates of a design")
    p.add_argument("design")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
