"""Command-line entry point: ``xlmimo <command> [options]``."""

import argparse
import math
import os
import sys

from threadpoolctl import threadpool_limits

from . import geometry
from .channel import matrix_to_csv, sample_scene
from .frontend import build_frontend, frontend_to_csv, receive
from .harness import (ESTIMATORS, SWEEP_AXES, ExperimentConfig, _dictionaries, _grids,
                      _run_estimator, complexity_report, nmse, run_sweep, trial_seeds)
from .los_estimator import estimate_los, trace_to_csv
from .nlos_estimator import estimate_nlos, nlos_to_csv

# option name -> ExperimentConfig field
_OVERRIDES = {
    "q_xi": "q_xi", "q_alpha": "q_alpha", "t_iter": "t_iter", "r_min": "r_min",
    "q_angle": "q_angle", "q_curv": "q_curv", "l_hat": "l_hat", "stopping": "stopping",
    "trials": "trials", "seed": "seed", "snr_db": "snr_db", "axis": "sweep_axis",
}


def _add_config_args(p, default_profile):
    p.add_argument("--config", help="JSON experiment config (overrides --profile)")
    p.add_argument("--profile", choices=("desk", "paper"), default=default_profile)
    p.add_argument("--paper-scale", action="store_true",
                   help="full-size arrays, beams and grids")


def _add_estimator_args(p):
    g = p.add_argument_group("LoS grid search")
    g.add_argument("--q-xi", type=int)
    g.add_argument("--q-alpha", type=int)
    g.add_argument("--t-iter", type=int)
    g.add_argument("--r-min", type=float)
    g = p.add_argument_group("scattered paths")
    g.add_argument("--q-angle", type=int)
    g.add_argument("--q-curv", type=int)
    g.add_argument("--l-hat", type=int)
    g.add_argument("--stopping", choices=("fixed", "residual"))
    p.add_argument("--estimators", nargs="+", choices=ESTIMATORS)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--seed", type=int)


def _config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.profile(args.profile)
    if getattr(args, "paper_scale", False):
        cfg = cfg.paper_scale()
    kw = {}
    for opt, name in _OVERRIDES.items():
        v = getattr(args, opt, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "estimators", None):
        kw["estimators"] = tuple(args.estimators)
    if getattr(args, "points", None):
        kw["sweep_points"] = tuple(args.points)
    if getattr(args, "timing", False):
        kw["record_timing"] = True
    return cfg.replace(**kw) if kw else cfg


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args):
    cfg = _config(args)
    text = run_sweep(cfg, workers=args.workers)
    _emit(text, args.out)
    return 0


def cmd_criteria(args):
    array = _config(args).array_config()
    lam = array.wavelength
    rows = [
        ("fraunhofer_rx", geometry.fraunhofer_distance(array.aperture_rx, lam)),
        ("fraunhofer_tx", geometry.fraunhofer_distance(array.aperture_tx, lam)),
        ("mimo_ard", geometry.mimo_ard(array)),
        ("sopd", geometry.sopd(array)),
        ("parabolic_validity", geometry.parabolic_validity_distance(array)),
        ("upd_los", geometry.uniform_power_distance(array, args.threshold, "los",
                                                    definition=args.definition)),
        ("upd_nlos", geometry.uniform_power_distance(array, args.threshold, "nlos",
                                                     definition=args.definition)),
    ]
    _emit("criterion,distance_m\n" + "".join(f"{k},{float(v)!r}\n" for k, v in rows), args.out)
    return 0


def cmd_verify_lemma1(args):
    array = _config(args).array_config()
    lines = ["range_m,max_error_rad,bound_rad,ratio,structure_ok,theta_rx,theta_tx,azim_rx,"
             "delta_rx,delta_tx\n"]
    ok = True
    for R in args.ranges:
        rep = geometry.lemma1_bruteforce(array, R, args.grid_density)
        wc = rep.argmax_config
        ok &= rep.structure_ok and abs(rep.ratio - 1.0) <= args.tolerance
        vals = (R, rep.max_error_rad, rep.analytic_bound_rad, rep.ratio)
        lines.append(",".join(repr(float(v)) for v in vals) + f",{rep.structure_ok},"
                     + ",".join(repr(float(v)) for v in (wc.theta_rx, wc.theta_tx, wc.azim_rx,
                                                         wc.delta_rx, wc.delta_tx)) + "\n")
    _emit("".join(lines), args.out)
    return 0 if ok else 1


def cmd_complexity(args):
    _emit(complexity_report(_config(args)), args.out)
    return 0


def cmd_trial(args):
    """Run one trial and dump the truth, frontend, estimates, trace and supports."""
    cfg = _config(args)
    value = cfg.sweep_points[0] if args.point is None else args.point
    pcfg = cfg.at_point(value)
    array = pcfg.array_config()
    rng_scene, rng_frontend, rng_noise = trial_seeds(pcfg.seed, args.index)
    scene = sample_scene(array, rng_scene, pcfg.scene_config())
    fe = build_frontend(array, rng_frontend, pcfg.m_rx // pcfg.k_rx, pcfg.m_tx // pcfg.k_tx,
                        pcfg.modulus_convention)
    H = scene.total
    Y = receive(fe, H, rng_noise, pcfg.noise_var)
    os.makedirs(args.out_dir, exist_ok=True)
    path = lambda name: os.path.join(args.out_dir, name)  # noqa: E731
    matrix_to_csv(H, path("truth.csv"))
    matrix_to_csv(Y, path("observation.csv"))
    frontend_to_csv(fe, path("frontend.csv"))

    print(f"sweep_value={value!r} trial={args.index} snr_db={pcfg.snr_db!r}")
    g = scene.truth_geom
    print(f"truth R={g.range_m:.3f} m phi_rx={g.phi_rx:.6f} phi_tx={g.phi_tx:.6f} eta={g.eta:.3e}")
    for name in pcfg.estimators:
        if name == "asagm_smr":
            los = estimate_los(Y, fe, _grids(pcfg.q_xi, pcfg.q_alpha, pcfg.r_min), pcfg.t_iter,
                               pcfg.centroid_scale)
            dicts = _dictionaries(array, pcfg.q_angle, pcfg.q_curv, pcfg.dict_r_min)
            nl = estimate_nlos(Y, fe, los.channel, dicts, pcfg.sparsity, pcfg.sparsity,
                               pcfg.stopping, pcfg.noise_var, pcfg.normalize_columns)
            trace_to_csv(los.trace, path("asagm_trace.csv"))
            nlos_to_csv(nl, dicts, path("smr_support.csv"))
            Hhat = los.channel + nl.channel
            print(f"  asagm  phi_rx={los.phi_rx:.6f} phi_tx={los.phi_tx:.6f} eta={los.eta:.3e}"
                  f" los_nmse={nmse(los.channel, scene.los):.4g}")
        else:
            try:
                Hhat, _ = _run_estimator(name, pcfg, Y, fe, scene)
            except Exception as exc:  # report and continue with the others
                print(f"{name}: {type(exc).__name__}: {exc}")
                continue
        matrix_to_csv(Hhat, path(f"estimate_{name}.csv"))
        e = nmse(Hhat, H)
        print(f"{name}: nmse={e:.6g} ({10 * math.log10(e):.2f} dB)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="xlmimo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="Monte-Carlo NMSE sweep, CSV output")
    _add_config_args(p, "desk")
    _add_estimator_args(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--points", type=float, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--timing", action="store_true", help="record wall time per estimator")
    p.add_argument("--workers", type=int, help="process count (default: XLMIMO_THREADS or cores)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("criteria", help="near-field distance criteria of an array config")
    _add_config_args(p, "paper")
    p.add_argument("--threshold", type=float, default=0.9, help="power-ratio threshold")
    p.add_argument("--definition", choices=("pair", "reference"), default="pair")
    p.add_argument("--out")
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("verify-lemma1", help="brute-force worst phase error of the subarray model")
    _add_config_args(p, "paper")
    p.add_argument("--ranges", type=float, nargs="+", default=[50.0, 100.0, 200.0])
    p.add_argument("--grid-density", type=int, default=64)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_lemma1)

    p = sub.add_parser("complexity", help="operation counts and measured doubling ratios")
    _add_config_args(p, "desk")
    _add_estimator_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("trial", help="single-trial debug dump")
    _add_config_args(p, "desk")
    _add_estimator_args(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--point", type=float, help="sweep value (default: first configured point)")
    p.add_argument("--index", type=int, default=0, help="trial index")
    p.add_argument("--out-dir", default="trial_dump")
    p.set_defaults(func=cmd_trial)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    with threadpool_limits(limits=1):
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
