"""Command-line interface: fit, simulate, experiment, and oracle subcommands."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import yaml

from .dirichlet import DirichletSpec, default_alpha0, exact_marginal, sequential_imputation_marginal
from .harness import (
    ExperimentSpec,
    MixtureModelSpec,
    load_observations,
    run_experiment,
    run_fit,
    simulate,
)
from .kernels import GAUSS_LOC, GAUSS_LOCSCALE, POISSON, Grid, KernelSpec
from .recursion import PRConfig
from .search import AnnealConfig

_KERNELS = [POISSON, GAUSS_LOC, GAUSS_LOCSCALE]


def _parse_axis(text: str):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"axis spec {text!r} must be lo:hi:count or comma-separated values")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        return tuple(np.linspace(lo, hi, count))
    return tuple(float(v) for v in text.split(","))


def parse_grid(text: str) -> Grid:
    """Parse ``lo:hi:count`` or ``v1,v2,...``; join two axes with ``x`` for lattices."""
    axes = text.split("x")
    if len(axes) == 1:
        return Grid(axis1=_parse_axis(axes[0]))
    if len(axes) == 2:
        return Grid(axis1=_parse_axis(axes[0]), axis2=_parse_axis(axes[1]))
    raise ValueError(f"grid spec {text!r} has more than two axes")


def _kernel_from_args(args) -> KernelSpec:
    if args.kernel == POISSON:
        return KernelSpec.poisson()
    if args.kernel == GAUSS_LOC:
        if args.sigma is None:
            raise ValueError("--kernel gauss-loc requires --sigma")
        return KernelSpec.gaussian_location(args.sigma)
    return KernelSpec.gaussian_location_scale()


def _support_values(text: str, spec: KernelSpec):
    if spec.is_two_dimensional:
        pairs = []
        for item in text.split(","):
            mu, _, sd = item.partition(":")
            if not sd:
                raise ValueError("location-scale support entries must be mu:sd pairs")
            pairs.append((float(mu), float(sd) ** 2))
        return pairs
    return [float(v) for v in text.split(",")]


def _fit_payload(result, args) -> dict:
    support = [sp.coords for sp in result.best_support]
    return {
        "support": [list(c) if isinstance(c, tuple) else c for c in support],
        "weights": [float(w) for w in result.best_weights],
        "objective": result.best_objective,
        "objective_std_permutations": result.objective_std_permutations,
        "size": result.size,
        "seconds": result.seconds,
        "config": {
            "kernel": args.kernel,
            "sigma": args.sigma,
            "grid": args.grid,
            "gamma": args.gamma,
            "perms": args.perms,
            "iters": args.iters,
            "temp_a": args.temp_a,
            "flip_k": args.flip_k,
            "prop_r": args.prop_r,
            "rho": None if args.no_penalty else args.rho,
            "seed": args.seed,
        },
    }


def _cmd_fit(args) -> int:
    spec = _kernel_from_args(args)
    grid = parse_grid(args.grid)
    data = load_observations(args.data)
    seed_seq = np.random.SeedSequence(args.seed)
    perm_seed, chain_seed = (int(s) for s in seed_seq.generate_state(2))
    pr_cfg = PRConfig(gamma=args.gamma, n_permutations=args.perms, permutation_seed=perm_seed)
    anneal_cfg = AnnealConfig(
        iterations=args.iters,
        temp_a=args.temp_a,
        flip_k=args.flip_k,
        prop_r=args.prop_r,
        rho=None if args.no_penalty else args.rho,
        chain_seed=chain_seed,
        init_level=args.init_level,
    )
    result = run_fit(
        data,
        grid,
        spec,
        pr_cfg,
        anneal_cfg,
        density_path=args.emit_density,
        trace_path=args.emit_trace,
    )
    payload = json.dumps(_fit_payload(result, args), indent=2)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(payload + "\n")
    else:
        print(payload)
    return 0


def _cmd_simulate(args) -> int:
    with open(args.model) as handle:
        config = yaml.safe_load(handle)
    model = MixtureModelSpec.from_config(config)
    obs = simulate(model, args.n, args.seed)
    with open(args.out, "w") as handle:
        for value in obs:
            handle.write(f"{float(value)!r}\n")
    print(f"wrote {len(obs)} observations to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    exp = ExperimentSpec.from_yaml(args.spec)
    table = run_experiment(exp)
    table.write_csv(args.out_table)
    print(table)
    for message in table.failure_messages:
        print(f"warning: {message}", file=sys.stderr)
    return 0


def _cmd_oracle(args) -> int:
    spec = _kernel_from_args(args)
    data = load_observations(args.data)
    support = _support_values(args.support, spec)
    alpha0 = args.alpha0 if args.alpha0 is not None else default_alpha0()
    dspec = DirichletSpec.uniform(len(support), alpha0)
    payload = {
        "support": args.support,
        "alpha0": alpha0,
        "n": int(data.size),
    }
    if args.exact:
        payload["log_marginal"] = exact_marginal(support, data, dspec, spec)
        payload["method"] = "exact"
    else:
        est, se = sequential_imputation_marginal(support, data, dspec, spec, args.paths, args.seed)
        payload.update(log_marginal=est, standard_error=se, n_paths=args.paths, method="sequential-imputation")
    print(json.dumps(payload, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridmix",
        description="Finite mixture estimation with unknown support over a candidate grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate a mixture support from a data file")
    fit.add_argument("--data", required=True, help="observations, one value per line")
    fit.add_argument("--kernel", required=True, choices=_KERNELS)
    fit.add_argument("--grid", required=True, help="lo:hi:count or v1,v2,...; two axes joined by 'x'")
    fit.add_argument("--sigma", type=float, default=None, help="fixed scale for gauss-loc")
    fit.add_argument("--gamma", type=float, default=0.67)
    fit.add_argument("--perms", type=int, default=100)
    fit.add_argument("--iters", type=int, default=5000)
    fit.add_argument("--temp-a", type=float, default=1.0)
    fit.add_argument("--flip-k", type=int, default=1)
    fit.add_argument("--prop-r", type=float, default=1.0)
    pen = fit.add_mutually_exclusive_group(required=True)
    pen.add_argument("--rho", type=float, default=None, help="prior inclusion probability")
    pen.add_argument("--no-penalty", action="store_true", help="run without the size penalty")
    fit.add_argument("--init-level", type=int, default=None)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", default=None, help="write the JSON result here instead of stdout")
    fit.add_argument("--emit-density", default=None, help="write the fitted density curve CSV here")
    fit.add_argument("--emit-trace", default=None, help="write the per-iteration trace CSV here")
    fit.set_defaults(func=_cmd_fit)

    sim = sub.add_parser("simulate", help="draw observations from a mixture model file")
    sim.add_argument("--model", required=True, help="YAML mixture model spec")
    sim.add_argument("--n", required=True, type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    exp = sub.add_parser("experiment", help="run a replicated simulation study")
    exp.add_argument("--spec", required=True, help="YAML experiment spec")
    exp.add_argument("--out-table", required=True, help="complexity table CSV output")
    exp.set_defaults(func=_cmd_experiment)

    orc = sub.add_parser("oracle", help="Dirichlet-prior marginal likelihood for a fixed support")
    orc.add_argument("--data", required=True)
    orc.add_argument("--support", required=True, help="v1,v2,... (or mu:sd pairs for gauss-locscale)")
    orc.add_argument("--kernel", default=POISSON, choices=_KERNELS)
    orc.add_argument("--sigma", type=float, default=None)
    orc.add_argument("--alpha0", type=float, default=None)
    orc.add_argument("--paths", type=int, default=10000)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--exact", action="store_true", help="use exact enumeration (small cases only)")
    orc.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        if code != 0:
            print(
                json.dumps({"error": "invalid command line arguments", "type": "UsageError"}),
                file=sys.stderr,
            )
        return code
    try:
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
