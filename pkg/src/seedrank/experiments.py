"""The three experiment suites behind the CLI, as reusable functions.

Each suite consumes an :class:`ExperimentConfig`, derives one RNG stream
per trial from (seed, setting index, trial index), and writes the CSV
schemas from :mod:`seedrank.evaluation` plus a manifest echoing the
configuration.  Outputs are byte-identical across reruns with the same
config and seed (the manifest's wall-time field aside).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bp import BpParams, run as bp_run
from .blocktheory import check_homogeneity, psi_c_block, solve_c_block
from .discriminants import (ClassMoments, estimate_moments, geometric_model,
                            heat_kernel_weights, lin_sbmrank, ppr_weights,
                            quad_sbmrank, score)
from .errors import ParameterError, SeedrankError
from .estimation import estimate
from .evaluation import (labeling_from_scores, pearson_correlation,
                         recall_curve, quantile_bands, write_bands_csv,
                         write_correlation_csv, write_heatmap_csv,
                         write_recall_csv)
from .sbm import (AffiliationParams, SbmParams, affiliation_to_sbm, generate,
                  make_rng)
from .walks import WalkConfig, class_mean_profiles, landing_probabilities

EXPERIMENTS = ("centroids-fig1", "correlation-fig2", "recall-fig2",
               "heatmap-figS1")
METHODS = ("ppr-alpha-star", "ppr-alpha-est", "ppr-fixed", "heat-kernel",
           "lin-sbmrank", "quad-sbmrank", "bp")

# 4-block exemplar model: non-identical blocks whose S={1,2}/T={3,4} split
# is (near-)homogeneous; P columns index the source block (directed).
FOUR_BLOCK_PARAMS = {
    "n": 2048,
    "pi": [491 / 2048, 532 / 2048, 471 / 2048, 554 / 2048],
    "P": [
        [0.40, 0.15, 0.08, 0.04],
        [0.15, 0.38, 0.04, 0.08],
        [0.06, 0.08, 0.37, 0.16],
        [0.06, 0.04, 0.18, 0.36],
    ],
    "directed": True,
    "self_loops": False,
}


def affiliation_from_sweep(n: int, expected_degree: float,
                           ratio: float) -> AffiliationParams:
    """Balanced two-block parameters from the (degree, ratio) sweep axes.

    Uses the half-size normalization c_in = (n/2) p_in, c_out = (n/2) p_out
    with expected_degree = (c_in + c_out)/2 and ratio = c_out/c_in, i.e.
    p_in + p_out = 4 * expected_degree / n.
    """
    if n % 2:
        raise ParameterError("sweep parameterization needs even n")
    if not 0 < ratio <= 1:
        raise ParameterError("ratio must lie in (0, 1]")
    N = n // 2
    total = 2.0 * expected_degree / N
    p_in = total / (1.0 + ratio)
    p_out = total - p_in
    if p_in > 1.0:
        raise ParameterError("expected degree too large for n")
    return AffiliationParams(n_a=N, n_b=N, p_in=p_in, p_out=p_out)


_DEFAULTS = {
    "centroids-fig1": {
        "params": FOUR_BLOCK_PARAMS,
        "split": [[1, 2], [3, 4]],
        "realizations": 200,
        "K": 6,
        "levels": [0.0015, 0.9985],
    },
    "correlation-fig2": {
        "n": 128,
        "expected_degree": 16.0,
        "ratios": [round(0.1 * i, 10) for i in range(1, 10)],
        "trials": 100,
        "methods": ["ppr-alpha-star", "lin-sbmrank", "bp"],
        "K": 6,
        "moments_sims": 100,
    },
    "recall-fig2": {
        "n": 128,
        "p_in": 0.3125,
        "p_out": 0.1875,
        "trials": 500,
        "methods": ["quad-sbmrank", "lin-sbmrank", "ppr-alpha-star",
                    "ppr-alpha-est", "heat-kernel"],
        "K": 6,
        "moments_sims": 100,
    },
    "heatmap-figS1": {
        "n": 128,
        "p_in_grid": {"lo": 0.05, "hi": 0.5, "steps": 10},
        "p_out_grid": {"lo": 0.05, "hi": 0.5, "steps": 10},
        "trials": 20,
        "methods": ["ppr-fixed", "ppr-alpha-star", "lin-sbmrank"],
        "K": 6,
        "moments_sims": 40,
    },
}

_COMMON_DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "cond_cap": 1e10,
    "method_params": {"ppr-fixed": {"alpha": 0.7}, "heat-kernel": {"t": 2.0}},
    "bp": {"tol": 1e-6, "max_iters": 1000},
}


@dataclass
class ExperimentConfig:
    """Validated experiment settings: suite id plus an options mapping."""

    experiment: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(
                f"unknown experiment {self.experiment!r}; "
                f"expected one of {', '.join(EXPERIMENTS)}")
        merged = dict(_COMMON_DEFAULTS)
        merged.update(_DEFAULTS[self.experiment])
        merged.update(self.options)
        self.options = merged
        for key in ("trials", "realizations"):
            if key in merged and int(merged[key]) < 1:
                raise ParameterError(f"{key} must be >= 1")
        for m in merged.get("methods", []):
            if m not in METHODS:
                raise ParameterError(f"unknown method {m!r}")

    @classmethod
    def from_json_file(cls, path, overrides: dict | None = None
                       ) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        if "experiment" not in raw:
            raise ParameterError("config JSON missing required field 'experiment'")
        exp = raw.pop("experiment")
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(experiment=exp, options=raw)

    def __getitem__(self, key):
        return self.options[key]


def _trial_stream(seed, *indices) -> np.random.SeedSequence:
    """Independent, reproducible stream for one trial of one setting."""
    return np.random.SeedSequence((int(seed),) + tuple(int(i) for i in indices))


@dataclass
class _MethodSet:
    """Per-setting context shared by all trials: discriminant models and
    BP parameters prebuilt from the true generating parameters."""

    aff: AffiliationParams
    K: int
    models: dict
    moments: ClassMoments | None
    bp_params: BpParams | None
    alpha_star: float


def _build_method_set(methods, aff: AffiliationParams, K: int,
                      moments_sims: int, cond_cap: float, method_params: dict,
                      bp_options: dict, seed, setting_index: int) -> _MethodSet:
    alpha_star = ((aff.p_in - aff.p_out) / (aff.p_in + aff.p_out)
                  if aff.p_in + aff.p_out > 0 else 0.0)
    models = {}
    moments = None
    if "ppr-alpha-star" in methods:
        models["ppr-alpha-star"] = ppr_weights(alpha_star, K)
    if "ppr-fixed" in methods:
        models["ppr-fixed"] = ppr_weights(
            float(method_params.get("ppr-fixed", {}).get("alpha", 0.7)), K)
    if "heat-kernel" in methods:
        models["heat-kernel"] = heat_kernel_weights(
            float(method_params.get("heat-kernel", {}).get("t", 2.0)), K)
    if "lin-sbmrank" in methods or "quad-sbmrank" in methods:
        moments = estimate_moments(
            aff, M=moments_sims, K_max=K, cond_cap=cond_cap,
            rng_seed=np.random.SeedSequence((int(seed), 0xC0FFEE, setting_index)))
        if "lin-sbmrank" in methods:
            models["lin-sbmrank"] = lin_sbmrank(moments)
        if "quad-sbmrank" in methods:
            models["quad-sbmrank"] = quad_sbmrank(moments)
    bp_params = None
    if "bp" in methods:
        bp_params = BpParams.from_sbm(affiliation_to_sbm(aff),
                                      tol=float(bp_options.get("tol", 1e-6)),
                                      max_iters=int(bp_options.get("max_iters", 1000)))
    return _MethodSet(aff=aff, K=K, models=models, moments=moments,
                      bp_params=bp_params, alpha_star=alpha_star)


def _method_scores(method: str, mset: _MethodSet, graph, profile, seed_node):
    """Scores for one discriminant method on one trial (BP handled apart)."""
    if method == "ppr-alpha-est":
        est = estimate(graph, mset.aff.n_a, mset.aff.n_b)
        alpha = float(np.clip(est.alpha_est, -1.0 + 1e-9, 1.0 - 1e-9))
        model = ppr_weights(alpha, mset.K)
    else:
        model = mset.models[method]
    if model.K != profile.K:
        return score(model, _truncate_profile(profile, model.K))
    return score(model, profile)


def _truncate_profile(profile, K):
    from .walks import LandingProfile
    return LandingProfile(probs=profile.probs[:, :K], seed_set=profile.seed_set,
                          K=K)


def _trial_labelings(methods, mset: _MethodSet, params: SbmParams, stream,
                     bp_seed_class: int = 1):
    """Generate one graph + single-seed profile and label it per method.

    Returns (labelings dict, errors dict); a method that raises records
    the error string instead of a labeling.
    """
    rng = make_rng(stream)
    graph = generate(params, rng)
    in_nodes = np.flatnonzero(graph.labels == 1)
    seed_node = int(rng.choice(in_nodes))
    profile = landing_probabilities(graph, WalkConfig([seed_node], mset.K))
    n_a = in_nodes.size
    truth = graph.labels == 1

    labelings, errors = {}, {}
    for method in methods:
        try:
            if method == "bp":
                result = bp_run(graph, mset.bp_params, [seed_node],
                                bp_seed_class, rng_seed=stream.spawn(1)[0])
                labelings[method] = result.labeling == bp_seed_class
            else:
                s = _method_scores(method, mset, graph, profile, seed_node)
                labelings[method] = labeling_from_scores(s, [seed_node], n_a)
        except SeedrankError as exc:
            errors[method] = f"{type(exc).__name__}: {exc}"
    return labelings, errors, truth, graph, profile, seed_node


# ---------------------------------------------------------------------------
# suite: centroids-fig1


def run_centroids_fig1(cfg: ExperimentConfig, out_dir) -> dict:
    """Monte Carlo centroid concentration against the block-recurrence
    prediction for the 4-block exemplar model."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    params = SbmParams.from_json_dict(cfg["params"])
    S, T = (list(s) for s in cfg["split"])
    K = int(cfg["K"])
    R = int(cfg["realizations"])
    seed = cfg["seed"]

    theory = psi_c_block(solve_c_block(params, seed_block=S[0], K=K), S, T)
    homogeneity = check_homogeneity(params, S, T)

    a_samples = np.empty((R, K))
    b_samples = np.empty((R, K))
    w_minus_psi = np.empty((R, K))
    errors = {}
    for r in range(R):
        stream = _trial_stream(seed, 0, r)
        rng = make_rng(stream)
        graph = generate(params, rng)
        block1 = np.flatnonzero(graph.labels == 1)
        seed_node = int(rng.choice(block1))
        profile = landing_probabilities(graph, WalkConfig([seed_node], K))
        a_hat, b_hat = class_mean_profiles(profile, graph.labels, (S, T))
        a_samples[r] = a_hat
        b_samples[r] = b_hat
        w_minus_psi[r] = (a_hat - b_hat) - theory.psi

    levels = tuple(cfg["levels"])
    rows = []
    for name, samples, theo in (("in", a_samples, theory.centroid_a),
                                ("out", b_samples, theory.centroid_b),
                                ("w_minus_psi", w_minus_psi, np.zeros(K))):
        band = quantile_bands(samples, levels)
        mean = samples.mean(axis=0)
        for k in range(K):
            rows.append((name, k + 1, band.lo[k], band.hi[k], mean[k], theo[k]))
    bands_path = out / "centroid_bands.csv"
    write_bands_csv(bands_path, rows)

    manifest = _manifest(cfg, t0, errors, outputs=[bands_path.name])
    manifest["homogeneity"] = {
        "d": [[homogeneity.d11, homogeneity.d12],
              [homogeneity.d21, homogeneity.d22]],
        "max_violation": homogeneity.max_violation,
        "holds": homogeneity.holds,
    }
    manifest["alpha_star"] = theory.alpha_star
    _write_manifest(out, manifest)
    return manifest


# ---------------------------------------------------------------------------
# suite: correlation-fig2


def _correlation_setting(args):
    """All trials of one ratio (worker-safe payload)."""
    (cfg_options, ratio, setting_index, methods) = args
    n = int(cfg_options["n"])
    aff = affiliation_from_sweep(n, float(cfg_options["expected_degree"]), ratio)
    mset = _build_method_set(methods, aff, int(cfg_options["K"]),
                             int(cfg_options["moments_sims"]),
                             float(cfg_options["cond_cap"]),
                             cfg_options["method_params"], cfg_options["bp"],
                             cfg_options["seed"], setting_index)
    params = affiliation_to_sbm(aff)
    rows, errors = [], {}
    for t in range(int(cfg_options["trials"])):
        stream = _trial_stream(cfg_options["seed"], setting_index + 1, t)
        labelings, errs, truth, *_ = _trial_labelings(methods, mset, params,
                                                      stream)
        for method in methods:
            if method in labelings:
                r = pearson_correlation(labelings[method], truth)
                rows.append((t, method, ratio, r))
        for method, msg in errs.items():
            errors[f"ratio={ratio}/trial={t}/{method}"] = msg
    return rows, errors


def run_correlation_fig2(cfg: ExperimentConfig, out_dir) -> dict:
    """Label correlation versus the out/in balance for a degree-matched
    balanced two-block sweep."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    methods = list(cfg["methods"])
    ratios = [float(r) for r in cfg["ratios"]]
    payloads = [(cfg.options, ratio, i, methods) for i, ratio in enumerate(ratios)]
    results = _map_maybe_parallel(_correlation_setting, payloads,
                                  int(cfg.options.get("jobs", 1)))
    rows, errors = [], {}
    for setting_rows, setting_errors in results:
        rows.extend(setting_rows)
        errors.update(setting_errors)
    csv_path = out / "correlation.csv"
    write_correlation_csv(csv_path, rows)
    manifest = _manifest(cfg, t0, errors, outputs=[csv_path.name])
    _write_manifest(out, manifest)
    return manifest


# ---------------------------------------------------------------------------
# suite: recall-fig2


def run_recall_fig2(cfg: ExperimentConfig, out_dir) -> dict:
    """Cumulative recall of single-seed expansion, averaged over trials."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    n = int(cfg["n"])
    if n % 2:
        raise ParameterError("recall suite expects balanced blocks (even n)")
    aff = AffiliationParams(n_a=n // 2, n_b=n // 2,
                            p_in=float(cfg["p_in"]), p_out=float(cfg["p_out"]))
    methods = list(cfg["methods"])
    mset = _build_method_set(methods, aff, int(cfg["K"]),
                             int(cfg["moments_sims"]), float(cfg["cond_cap"]),
                             cfg["method_params"], cfg["bp"], cfg["seed"], 0)
    params = affiliation_to_sbm(aff)
    trials = int(cfg["trials"])

    sums = {m: np.zeros(n) for m in methods}
    sumsq = {m: np.zeros(n) for m in methods}
    counts = {m: 0 for m in methods}
    errors = {}
    for t in range(trials):
        stream = _trial_stream(cfg["seed"], 1, t)
        rng = make_rng(stream)
        graph = generate(params, rng)
        in_nodes = np.flatnonzero(graph.labels == 1)
        seed_node = int(rng.choice(in_nodes))
        profile = landing_probabilities(graph, WalkConfig([seed_node], mset.K))
        for method in methods:
            try:
                if method == "bp":
                    result = bp_run(graph, mset.bp_params, [seed_node], 1,
                                    rng_seed=stream.spawn(1)[0])
                    scores = result.beliefs[:, 0]
                else:
                    scores = _method_scores(method, mset, graph, profile,
                                            seed_node)
                curve = recall_curve(scores, graph.labels, {1}, [seed_node])
                sums[method] += curve.recall
                sumsq[method] += curve.recall ** 2
                counts[method] += 1
            except SeedrankError as exc:
                errors[f"trial={t}/{method}"] = f"{type(exc).__name__}: {exc}"

    rows = []
    for method in methods:
        cnt = max(counts[method], 1)
        mean = sums[method] / cnt
        var = np.clip(sumsq[method] / cnt - mean ** 2, 0.0, None)
        std = np.sqrt(var)
        for m in range(n):
            rows.append((method, m + 1, mean[m], std[m]))
    csv_path = out / "recall.csv"
    write_recall_csv(csv_path, rows)
    manifest = _manifest(cfg, t0, errors, outputs=[csv_path.name])
    manifest["recall_at_block_size"] = {
        m: (sums[m][aff.n_a - 1] / max(counts[m], 1)) for m in methods}
    _write_manifest(out, manifest)
    return manifest


# ---------------------------------------------------------------------------
# suite: heatmap-figS1


def _heatmap_cell(args):
    (cfg_options, p_in, p_out, cell_index, methods) = args
    n = int(cfg_options["n"])
    aff = AffiliationParams(n_a=n // 2, n_b=n // 2, p_in=p_in, p_out=p_out)
    mset = _build_method_set(methods, aff, int(cfg_options["K"]),
                             int(cfg_options["moments_sims"]),
                             float(cfg_options["cond_cap"]),
                             cfg_options["method_params"], cfg_options["bp"],
                             cfg_options["seed"], cell_index)
    params = affiliation_to_sbm(aff)
    acc = {m: [] for m in methods}
    errors = {}
    for t in range(int(cfg_options["trials"])):
        stream = _trial_stream(cfg_options["seed"], cell_index + 1, t)
        labelings, errs, truth, *_ = _trial_labelings(methods, mset, params,
                                                      stream)
        for method, mask in labelings.items():
            acc[method].append(pearson_correlation(mask, truth))
        for method, msg in errs.items():
            errors[f"cell={cell_index}/trial={t}/{method}"] = msg
    rows = [(m, p_in, p_out, float(np.mean(acc[m])) if acc[m] else np.nan)
            for m in methods]
    return rows, errors


def run_heatmap_figS1(cfg: ExperimentConfig, out_dir) -> dict:
    """Mean label correlation over a (p_in, p_out) grid."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    methods = list(cfg["methods"])
    gi, go = cfg["p_in_grid"], cfg["p_out_grid"]
    p_ins = np.linspace(float(gi["lo"]), float(gi["hi"]), int(gi["steps"]))
    p_outs = np.linspace(float(go["lo"]), float(go["hi"]), int(go["steps"]))
    payloads = []
    idx = 0
    for p_in in p_ins:
        for p_out in p_outs:
            payloads.append((cfg.options, float(p_in), float(p_out), idx, methods))
            idx += 1
    results = _map_maybe_parallel(_heatmap_cell, payloads,
                                  int(cfg.options.get("jobs", 1)))
    rows, errors = [], {}
    for cell_rows, cell_errors in results:
        rows.extend(cell_rows)
        errors.update(cell_errors)
    csv_path = out / "heatmap.csv"
    write_heatmap_csv(csv_path, rows)
    manifest = _manifest(cfg, t0, errors, outputs=[csv_path.name])
    _write_manifest(out, manifest)
    return manifest


# ---------------------------------------------------------------------------
# shared plumbing


def _map_maybe_parallel(fn, payloads, jobs: int):
    if jobs <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, payloads))


def _manifest(cfg: ExperimentConfig, t0: float, errors: dict, outputs) -> dict:
    return {
        "experiment": cfg.experiment,
        "config": _jsonable(cfg.options),
        "outputs": list(outputs),
        "errors": errors,
        "versions": {"seedrank": __version__, "numpy": np.__version__},
        "wall_time_s": round(time.time() - t0, 3),
    }


def _write_manifest(out_dir, manifest: dict) -> None:
    with open(Path(out_dir) / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    runner = {
        "centroids-fig1": run_centroids_fig1,
        "correlation-fig2": run_correlation_fig2,
        "recall-fig2": run_recall_fig2,
        "heatmap-figS1": run_heatmap_figS1,
    }[cfg.experiment]
    return runner(cfg, out_dir)
