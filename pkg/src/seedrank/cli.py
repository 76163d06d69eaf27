"""Command-line harness.

    seedrank <subcommand> [--seed U64] [--out DIR] [flags]

Subcommands: generate, walk, centroids, rank, estimate, bp, experiment.
Exit codes: 0 success, 2 usage/validation, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bp import BpParams, run as bp_run, write_beliefs_csv, write_run_metadata
from .blocktheory import (check_homogeneity, psi_c_block, solve_c_block,
                          theory_report)
from .discriminants import (DiscriminantModel, estimate_moments,
                            geometric_model, heat_kernel_weights, lin_sbmrank,
                            ppr_weights, quad_sbmrank, score,
                            write_scores_csv)
from .errors import (DegenerateMomentsError, DegenerateParameterError,
                     NearSingularEstimatorError, NumericFailureError,
                     ParameterError, SeedrankError)
from .estimation import estimate
from .experiments import ExperimentConfig, run_experiment
from .sbm import SbmParams, generate, load_graph, save_graph
from .walks import WalkConfig, class_mean_profiles, landing_probabilities

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _parse_block_split(text: str):
    """'1,2/3,4' -> ([1, 2], [3, 4])"""
    try:
        left, right = text.split("/")
        S = [int(x) for x in left.split(",") if x]
        T = [int(x) for x in right.split(",") if x]
    except ValueError as exc:
        raise ParameterError(f"malformed split {text!r}; expected e.g. 1,2/3,4") from exc
    if not S or not T:
        raise ParameterError("both sides of the split must be non-empty")
    return S, T


def _load_params(path) -> SbmParams:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"malformed params JSON: {exc}") from exc
    return SbmParams.from_json_dict(raw)


def _seeds_arg(text: str):
    return [int(x) for x in text.split(",") if x]


def cmd_generate(args) -> int:
    params = _load_params(args.params)
    graph = generate(params, args.seed)
    paths = save_graph(graph, args.out)
    print(json.dumps({"nodes": graph.n, "edges": graph.num_edges, **paths}))
    return EXIT_OK


def cmd_walk(args) -> int:
    graph = load_graph(args.graph)
    profile = landing_probabilities(graph, WalkConfig(_seeds_arg(args.seeds), args.K))
    out = Path(args.out) / "profile.csv" if Path(args.out).is_dir() else Path(args.out)
    profile.to_csv(out)
    print(json.dumps({"profile": str(out), "K": args.K}))
    return EXIT_OK


def cmd_centroids(args) -> int:
    """Theory centroids / prediction vector for a params file, optionally
    with simulation-estimated class moments alongside."""
    params = _load_params(args.params)
    S, T = _parse_block_split(args.split)
    rec = solve_c_block(params, seed_block=min(S), K=args.K)
    solution = psi_c_block(rec, S, T)
    homog = check_homogeneity(params, S, T)
    report = theory_report(solution, homog)
    if args.empirical_sims:
        mom = estimate_moments(params, split=(S, T), M=args.empirical_sims,
                               K_max=args.K, rng_seed=args.seed)
        report["moments"] = {
            "K": mom.K,
            "a": mom.a.tolist(),
            "b": mom.b.tolist(),
            "sigma_a": mom.sigma_a.tolist(),
            "sigma_b": mom.sigma_b.tolist(),
            "pi_a": mom.pi_a,
            "count_a": mom.count_a,
            "count_b": mom.count_b,
        }
    out = Path(args.out) / "centroids.json" if Path(args.out).is_dir() else Path(args.out)
    with open(out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"centroids": str(out)}))
    return EXIT_OK


def _load_moments(path):
    from .discriminants import ClassMoments
    with open(path) as fh:
        raw = json.load(fh)
    raw = raw.get("moments", raw)
    return ClassMoments(a=np.asarray(raw["a"]), b=np.asarray(raw["b"]),
                        sigma_a=np.asarray(raw["sigma_a"]),
                        sigma_b=np.asarray(raw["sigma_b"]),
                        pi_a=float(raw["pi_a"]),
                        count_a=raw.get("count_a"), count_b=raw.get("count_b"))


def cmd_rank(args) -> int:
    graph = load_graph(args.graph)
    profile = landing_probabilities(graph,
                                    WalkConfig([args.seed_node], args.K))
    if args.method == "ppr":
        if args.alpha is None:
            raise ParameterError("--alpha is required for method=ppr")
        model = ppr_weights(args.alpha, args.K)
    elif args.method == "heat-kernel":
        if args.t is None:
            raise ParameterError("--t is required for method=heat-kernel")
        model = heat_kernel_weights(args.t, args.K)
    elif args.method == "geometric":
        if args.centroids_file:
            with open(args.centroids_file) as fh:
                cj = json.load(fh)
            model = geometric_model(np.asarray(cj["centroid_a"])[:args.K],
                                    np.asarray(cj["centroid_b"])[:args.K])
        else:
            S, T = _parse_block_split(args.split)
            if graph.params is None:
                raise ParameterError("geometric method needs --centroids-file "
                                     "or a graph directory with params.json")
            solution = psi_c_block(
                solve_c_block(graph.params, seed_block=min(S), K=args.K), S, T)
            model = geometric_model(solution.centroid_a, solution.centroid_b)
    elif args.method in ("lin-sbmrank", "quad-sbmrank"):
        if not args.moments_file:
            raise ParameterError(f"--moments-file is required for {args.method}")
        mom = _load_moments(args.moments_file)
        mom = mom.truncated(min(mom.K, args.K))
        model = lin_sbmrank(mom) if args.method == "lin-sbmrank" else quad_sbmrank(mom)
    else:
        raise ParameterError(f"unknown method {args.method!r}")
    if model.K != args.K:
        raise ParameterError(
            f"method produced K={model.K} but profile has K={args.K}")
    scores = score(model, profile)
    out = Path(args.out) / "scores.csv" if Path(args.out).is_dir() else Path(args.out)
    write_scores_csv(out, scores)
    print(json.dumps({"scores": str(out), "method": args.method}))
    return EXIT_OK


def cmd_estimate(args) -> int:
    graph = load_graph(args.graph)
    est = estimate(graph, args.na, args.nb)
    out = Path(args.out) / "estimate.json" if Path(args.out).is_dir() else Path(args.out)
    est.save(out)
    print(json.dumps(est.to_json_dict()))
    return EXIT_OK


def cmd_bp(args) -> int:
    graph = load_graph(args.graph)
    if graph.params is None:
        raise ParameterError("bp needs a graph directory with params.json")
    params = BpParams.from_sbm(graph.params, tol=args.tol,
                               max_iters=args.max_iters)
    result = bp_run(graph, params, _seeds_arg(args.seed_nodes),
                    args.seed_class, rng_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_beliefs_csv(out / "beliefs.csv", result.beliefs)
    write_run_metadata(out / "bp_run.json", result)
    print(json.dumps(result.metadata()))
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {"seed": args.seed, "jobs": args.jobs}
    if args.config:
        cfg = ExperimentConfig.from_json_file(args.config, overrides)
    else:
        if not args.experiment:
            raise ParameterError("either --config or an experiment id is required")
        cfg = ExperimentConfig(args.experiment,
                               {k: v for k, v in overrides.items() if v is not None})
    manifest = run_experiment(cfg, args.out)
    if manifest["errors"]:
        print(json.dumps({"errors": manifest["errors"]}), file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps({"experiment": cfg.experiment, "out": str(args.out),
                      "outputs": manifest["outputs"]}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seedrank", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="."):
        sp.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")
        sp.add_argument("--out", default=out_default, help="output path/dir")

    sp = sub.add_parser("generate", help="sample a graph realization")
    sp.add_argument("--params", required=True, help="params JSON file")
    common(sp, out_default="graph")
    sp.set_defaults(fn=cmd_generate)

    sp = sub.add_parser("walk", help="landing-probability profile")
    sp.add_argument("--graph", required=True, help="graph directory")
    sp.add_argument("--seeds", required=True, help="comma-separated node ids")
    sp.add_argument("--K", type=int, default=6)
    common(sp)
    sp.set_defaults(fn=cmd_walk)

    sp = sub.add_parser("centroids", help="theory report (+ optional moments)")
    sp.add_argument("--params", required=True)
    sp.add_argument("--split", default="1/2", help="block split, e.g. 1,2/3,4")
    sp.add_argument("--K", type=int, default=6)
    sp.add_argument("--empirical-sims", type=int, default=0,
                    help="estimate class moments from this many simulations")
    common(sp)
    sp.set_defaults(fn=cmd_centroids)

    sp = sub.add_parser("rank", help="score nodes from a single seed")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--method", required=True,
                    choices=["ppr", "heat-kernel", "geometric", "lin-sbmrank",
                             "quad-sbmrank"])
    sp.add_argument("--seed-node", type=int, required=True)
    sp.add_argument("--K", type=int, default=6)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--split", default="1/2")
    sp.add_argument("--centroids-file", default=None)
    sp.add_argument("--moments-file", default=None)
    common(sp)
    sp.set_defaults(fn=cmd_rank)

    sp = sub.add_parser("estimate", help="affiliation parameter estimates")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--na", type=int, default=None)
    sp.add_argument("--nb", type=int, default=None)
    common(sp)
    sp.set_defaults(fn=cmd_estimate)

    sp = sub.add_parser("bp", help="belief propagation with seed clamping")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--seed-nodes", required=True, help="comma-separated ids")
    sp.add_argument("--seed-class", type=int, default=1)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-iters", type=int, default=1000)
    common(sp)
    sp.set_defaults(fn=cmd_bp)

    sp = sub.add_parser("experiment", help="run an experiment suite")
    sp.add_argument("experiment", nargs="?", default=None,
                    help="experiment id (or use --config)")
    sp.add_argument("--config", default=None, help="config JSON file")
    sp.add_argument("--jobs", type=int, default=None,
                    help="trial-level parallelism")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="results")
    sp.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize others
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except (NumericFailureError, NearSingularEstimatorError,
            DegenerateMomentsError, DegenerateParameterError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SeedrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
