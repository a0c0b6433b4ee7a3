"""Command-line front end.

Subcommands:

* ``density``   -- prior density curves (parameter or distance scale) as CSV
* ``scale``     -- solve a (U, a) probability statement into prior rates (JSON)
* ``compare``   -- prior-comparison curves and replicated simulation study
* ``fit``       -- grid posterior for a dataset file (JSON)
* ``structure`` -- covariance / structure matrices as headerless CSV

Exit codes: 0 success, 1 usage or file error, 2 infeasible or domain error.
Every command is deterministic given its flags (plus ``--seed`` where
sampling is involved). Output paths resolve against ``PCVCM_OUTPUT_DIR``
when that variable is set and the path is relative.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys

import numpy as np

from . import gmrf, inference, pcpriors, scaling

_SQRT2 = math.sqrt(2.0)


class _UsageError(Exception):
    pass


class _ParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _resolve_path(path):
    base = os.environ.get("PCVCM_OUTPUT_DIR", "")
    if base and path and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _write_text(text, output):
    if output:
        path = _resolve_path(output)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- density

_DENSITY_ALIASES = {
    "exch": "exchangeable", "rw": "precision", "matern-tau": "precision",
}


def _density_prior(args):
    """Resolve the prior object for the density command."""
    family = _DENSITY_ALIASES.get(args.family, args.family)
    if family in ("uniform", "reference"):
        return family, (pcpriors.UniformCorrPrior() if family == "uniform"
                        else pcpriors.Ar1ReferencePrior())
    rate = args.theta if family != "matern-phi" else args.lambda_phi
    has_statement = args.U is not None and args.a is not None
    if rate is not None and has_statement:
        print("warning: both a raw rate and a (U, a) statement were given; "
              "the raw rate wins", file=sys.stderr)
    if rate is None:
        if not has_statement:
            raise _UsageError(f"family {family!r} needs a rate or a (U, a) statement")
        solver = {"exchangeable": scaling.solve_exchangeable,
                  "ar1": scaling.solve_ar1,
                  "precision": scaling.solve_precision}.get(family)
        if solver is not None:
            rate = solver(args.U, args.a).theta
        else:  # matern-phi
            rate = scaling.solve_matern(args.U, args.a, 1.0, 0.5).rates["lambda_phi"]
    if rate <= 0.0:
        raise ValueError(f"rate must be positive, got {rate}")
    prior = {"exchangeable": pcpriors.ExchCorrPrior,
             "ar1": pcpriors.Ar1CorrPrior,
             "precision": pcpriors.Gumbel2PrecisionPrior,
             "matern-phi": pcpriors.MaternRangePrior}[family](rate)
    return family, prior


def _corr_param_curve(prior, start, end, points, d_max):
    """Correlation-scale curve on a distance-clustered grid.

    Uniform spacing in ``d = sqrt(1 - rho)`` resolves the integrable spike
    at the base model; when the finite endpoint density exists it is
    emitted too, so that a trapezoid over the rows recovers total mass 1.
    """
    d_hi = math.sqrt(1.0 - start)
    d_lo = math.sqrt(1.0 - end) if end < 1.0 else 0.0
    start_value = prior.pdf(start)
    if d_lo > 0.0:
        d = np.linspace(d_hi, d_lo, points)
        rho = 1.0 - d ** 2
        return rho, np.asarray(prior.pdf(rho))
    if math.isfinite(start_value):
        cells = points - 1
        h = (d_hi - d_lo) / cells
        d = (d_lo + (np.arange(cells) + 0.5) * h)[::-1]
        rho = np.concatenate(([start], 1.0 - d ** 2))
        dens = np.concatenate(([start_value], np.asarray(prior.pdf(1.0 - d ** 2))))
        return rho, dens
    h = (d_hi - d_lo) / points
    d = (d_lo + (np.arange(points) + 0.5) * h)[::-1]
    rho = 1.0 - d ** 2
    return rho, np.asarray(prior.pdf(rho))


def _cmd_density(args):
    family, prior = _density_prior(args)
    points = args.grid_points
    if points < 2:
        raise ValueError("need at least 2 grid points")
    if args.scale == "distance":
        dist = pcpriors.to_distance_scale(prior)
        upper = getattr(dist, "upper", math.inf)
        if math.isinf(upper):
            lo = dist.quantile(0.005) if args.grid_start is None else args.grid_start
            hi = dist.quantile(0.995) if args.grid_end is None else args.grid_end
        else:
            lo = 0.0 if args.grid_start is None else args.grid_start
            hi = upper if args.grid_end is None else args.grid_end
        d = np.linspace(lo, hi, points)
        values, dens = d, np.asarray(dist.pdf(d))
    elif family in ("exchangeable", "ar1", "uniform", "reference"):
        lower = 0.0 if family == "exchangeable" else -1.0
        start = lower if args.grid_start is None else args.grid_start
        end = 1.0 if args.grid_end is None else args.grid_end
        if not lower <= start < end <= 1.0:
            raise ValueError("invalid correlation grid range")
        values, dens = _corr_param_curve(prior, start, end, points,
                                         1.0 if family == "exchangeable" else _SQRT2)
    else:
        # positive parameters: uniform grid on the exponential distance
        # variable, mapped back and emitted in ascending parameter order
        dist = pcpriors.to_distance_scale(prior)
        s_lo, s_hi = dist.quantile(0.005), dist.quantile(0.995)
        s = np.linspace(s_lo, s_hi, points)
        param = s ** -2.0 if family == "precision" else 1.0 / s
        order = np.argsort(param)
        values = param[order]
        dens = np.asarray(prior.pdf(values))
    _write_text(_csv_text(["value", "density"], zip(values, dens)), args.output)
    return 0


# ------------------------------------------------------------------ scale

def _cmd_scale(args):
    config = {"family": args.family, "U": args.U, "a": args.a,
              "U_tau": args.U_tau, "a_tau": args.a_tau}
    try:
        if args.family in ("exch", "exchangeable"):
            solved = scaling.solve_exchangeable(args.U, args.a)
        elif args.family == "ar1":
            solved = scaling.solve_ar1(args.U, args.a)
        elif args.family in ("rw", "precision", "icar"):
            solved = scaling.solve_precision(args.U, args.a)
        else:  # matern
            if args.U_tau is None or args.a_tau is None:
                raise _UsageError("matern scaling needs --U-tau and --a-tau")
            solved = scaling.solve_matern(args.U, args.a, args.U_tau, args.a_tau)
    except (scaling.FeasibilityError, ValueError) as exc:
        payload = {"feasible": False, "error": str(exc), "config": config}
        _write_text(inference.canonical_json(payload), args.output)
        return 2
    payload = {
        "feasible": True,
        "family": solved.family,
        "rates": solved.rates,
        "residual": solved.residual,
        "iterations": solved.iterations,
        "direction": solved.direction,
        "near_infeasible": solved.near_infeasible,
        "config": config,
    }
    _write_text(inference.canonical_json(payload), args.output)
    return 0


# ---------------------------------------------------------------- compare

def _comparison_curves(pc_theta, points=512):
    d = np.linspace(0.0, _SQRT2, points)
    priors = inference.default_comparison_priors(pc_theta)
    curves = {name: np.asarray(pcpriors.to_distance_scale(p).pdf(d))
              for name, p in priors.items()}
    return d, curves


def _cmd_compare(args):
    if args.scenario not in ("sc1", "sc2"):
        raise ValueError(f"invalid scenario {args.scenario!r}")
    pc_theta = (scaling.solve_ar1(0.5, 0.75).theta
                if args.pc_theta is None else args.pc_theta)
    if pc_theta <= 0.0:
        raise ValueError("pc prior rate must be positive")
    out_dir = _resolve_path(args.output_dir) or "."
    os.makedirs(out_dir, exist_ok=True)
    prefix = os.path.join(out_dir, f"compare_{args.scenario}")

    d, curves = _comparison_curves(pc_theta)
    curves_path = prefix + "_curves.csv"
    rows = zip(d, curves["pc"], curves["uniform"], curves["reference"])
    with open(curves_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(["d", "pc", "uniform", "reference"], rows))
    written = [curves_path]

    if args.reps > 0:
        report = inference.compare_priors(
            args.scenario, replications=args.reps, seed=args.seed,
            n=args.n, noise_sd=args.noise, grid_points=args.grid_points,
            pc_theta=pc_theta)
        report["config"] = {
            "scenario": args.scenario, "n": args.n, "noise": args.noise,
            "reps": args.reps, "seed": args.seed,
            "grid_points": args.grid_points, "pc_theta": pc_theta,
        }
        report_path = prefix + "_report.json"
        with open(report_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(inference.canonical_json(report))
        table_rows = []
        for name in sorted(report["priors"]):
            agg = report["priors"][name]["aggregate"]
            table_rows.append([name,
                               repr(agg["mean_abs_error"]),
                               repr(agg["mean_posterior_rho"]),
                               repr(agg["mean_p_rho_above_0.9"]),
                               repr(agg["mean_base_mass"])])
        summary_path = prefix + "_summary.csv"
        with open(summary_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(
                ["prior", "mean_abs_error", "mean_posterior_rho",
                 "mean_p_rho_above_0.9", "mean_base_mass"], table_rows))
        written += [report_path, summary_path]
    for path in written:
        print(path)
    return 0


# -------------------------------------------------------------------- fit

def _fit_prior(args):
    family = args.family
    if family == "matern":
        if args.lambda_phi is not None and args.lambda_tau is not None:
            return pcpriors.MaternJointPrior(args.lambda_phi, args.lambda_tau)
        if None in (args.U, args.a, args.U_tau, args.a_tau):
            raise _UsageError("matern fits need --lambda-phi/--lambda-tau or "
                              "--U/--a plus --U-tau/--a-tau")
        solved = scaling.solve_matern(args.U, args.a, args.U_tau, args.a_tau)
        return pcpriors.MaternJointPrior(solved.rates["lambda_phi"],
                                         solved.rates["lambda_tau"])
    theta = args.theta
    has_statement = args.U is not None and args.a is not None
    if theta is not None and has_statement:
        print("warning: both a raw rate and a (U, a) statement were given; "
              "the raw rate wins", file=sys.stderr)
    if theta is None:
        if not has_statement:
            raise _UsageError("fit needs --theta or a (U, a) statement")
        solver = {"exchangeable": scaling.solve_exchangeable,
                  "ar1": scaling.solve_ar1}.get(family, scaling.solve_precision)
        theta = solver(args.U, args.a).theta
    cls = {"exchangeable": pcpriors.ExchCorrPrior,
           "ar1": pcpriors.Ar1CorrPrior}.get(family, pcpriors.Gumbel2PrecisionPrior)
    return cls(theta)


def _cmd_fit(args):
    try:
        dataset = inference.dataset_from_csv(args.data, sigma_noise=args.noise)
    except OSError as exc:
        raise _ParseError(f"cannot read {args.data}: {exc}") from exc
    except (ValueError, IndexError) as exc:
        raise _ParseError(f"cannot parse {args.data}: {exc}") from exc
    prior = _fit_prior(args)
    graph = gmrf.read_edge_list(args.graph) if args.graph else None
    spec = inference.VcmModelSpec(
        family=args.family, prior=prior,
        alpha_var=args.alpha_sd ** 2, beta0_var=args.beta0_sd ** 2,
        nu=args.nu, graph=graph)
    posterior = inference.fit_grid(dataset, spec, grid_points=args.grid_points)
    mixed = posterior.mixed_effects()
    summaries = {}
    for key in posterior.grid:
        summaries[f"mean_{key}"] = posterior.mean(key)
    if "d" in posterior.grid:
        summaries["p_base_mass"] = posterior.prob("d", below=0.1)
    total_effect = dataset.x * (mixed["beta0_mean"] + mixed["beta_mean"])
    payload = {
        "config": {
            "data": args.data, "family": args.family, "noise": args.noise,
            "grid_points": args.grid_points, "alpha_sd": args.alpha_sd,
            "beta0_sd": args.beta0_sd, "nu": args.nu, "graph": args.graph,
            "theta": args.theta, "U": args.U, "a": args.a,
            "U_tau": args.U_tau, "a_tau": args.a_tau,
            "lambda_phi": args.lambda_phi, "lambda_tau": args.lambda_tau,
        },
        "family": args.family,
        "n": dataset.n,
        "grid": {k: list(v) for k, v in posterior.grid.items()},
        "log_prior": list(posterior.log_prior),
        "log_marginal": list(posterior.log_marginal),
        "posterior_weights": list(posterior.posterior_weights),
        "summaries": summaries,
        "vc_estimates": {
            "alpha_mean": mixed["alpha_mean"], "alpha_var": mixed["alpha_var"],
            "beta0_mean": mixed["beta0_mean"], "beta0_var": mixed["beta0_var"],
            "beta_mean": list(mixed["beta_mean"]),
            "beta_var": list(mixed["beta_var"]),
            "total_effect_mean": list(total_effect),
        },
    }
    _write_text(inference.canonical_json(payload), args.output)
    return 0


# -------------------------------------------------------------- structure

def _cmd_structure(args):
    family = args.family
    if family in ("exchangeable", "ar1"):
        if args.n is None or args.rho is None:
            raise _UsageError(f"{family} structure needs --n and --rho")
        build = (gmrf.build_exchangeable if family == "exchangeable"
                 else gmrf.build_ar1)
        matrix = build(args.n, args.rho)
    elif family in ("rw1", "rw2"):
        if args.n is None:
            raise _UsageError(f"{family} structure needs --n")
        structure = gmrf.build_rw_structure(args.n, int(family[-1]))
        if args.scaled:
            structure = gmrf.scale_structure(structure)
        matrix = structure.matrix
    elif family == "icar":
        if not args.graph:
            raise _UsageError("icar structure needs --graph")
        try:
            graph = gmrf.read_edge_list(args.graph)
        except OSError as exc:
            raise _ParseError(f"cannot read {args.graph}: {exc}") from exc
        structure = gmrf.build_icar_structure(graph)
        if args.scaled:
            structure = gmrf.scale_structure(structure)
        matrix = structure.matrix
    else:  # matern
        if not args.locations:
            raise _UsageError("matern structure needs --locations")
        if args.phi is None:
            raise _UsageError("matern structure needs --phi")
        try:
            locations = np.loadtxt(args.locations, delimiter=",", skiprows=1)
        except OSError as exc:
            raise _ParseError(f"cannot read {args.locations}: {exc}") from exc
        matrix = gmrf.build_matern(np.atleast_2d(locations), args.nu, args.phi)
    text = _csv_text(None, matrix)
    _write_text(text, args.output)
    return 0


# ------------------------------------------------------------------- main

def _build_parser():
    parser = _Parser(prog="pcvcm",
                     description="Shrinkage priors for varying-coefficient models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="emit a prior density curve as CSV")
    p.add_argument("--family", required=True,
                   choices=["exchangeable", "exch", "ar1", "precision", "rw",
                            "matern-phi", "matern-tau", "uniform", "reference"])
    p.add_argument("--theta", type=float)
    p.add_argument("--lambda-phi", dest="lambda_phi", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--grid-start", type=float)
    p.add_argument("--grid-end", type=float)
    p.add_argument("--grid-points", type=int, default=1000)
    p.add_argument("--scale", choices=["param", "distance"], default="param")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_density)

    p = sub.add_parser("scale", help="solve a (U, a) statement into prior rates")
    p.add_argument("--family", required=True,
                   choices=["exchangeable", "exch", "ar1", "rw", "precision",
                            "icar", "matern"])
    p.add_argument("--U", type=float, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--U-tau", dest="U_tau", type=float)
    p.add_argument("--a-tau", dest="a_tau", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_scale)

    p = sub.add_parser("compare", help="prior comparison curves and simulation")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--pc-theta", dest="pc_theta", type=float)
    p.add_argument("--output-dir", default="")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("fit", help="grid posterior for a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--family", required=True,
                   choices=["exchangeable", "ar1", "rw1", "rw2", "icar", "matern"])
    p.add_argument("--noise", type=float, required=True)
    p.add_argument("--theta", type=float)
    p.add_argument("--U", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--U-tau", dest="U_tau", type=float)
    p.add_argument("--a-tau", dest="a_tau", type=float)
    p.add_argument("--lambda-phi", dest="lambda_phi", type=float)
    p.add_argument("--lambda-tau", dest="lambda_tau", type=float)
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--alpha-sd", dest="alpha_sd", type=float,
                   default=math.sqrt(1000.0))
    p.add_argument("--beta0-sd", dest="beta0_sd", type=float, default=1.0)
    p.add_argument("--nu", type=float, default=1.5)
    p.add_argument("--graph")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("structure", help="emit a covariance/structure matrix CSV")
    p.add_argument("--family", required=True,
                   choices=["exchangeable", "ar1", "rw1", "rw2", "icar", "matern"])
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--scaled", action="store_true")
    p.add_argument("--graph")
    p.add_argument("--locations")
    p.add_argument("--nu", type=float, default=1.5)
    p.add_argument("--phi", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_structure)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (_ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (scaling.FeasibilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
