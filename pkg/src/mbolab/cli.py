"""Configuration-driven command line harness.

Subcommands: sample, build-graph, spectrum, run, validate-schedule, study,
report. Configuration comes from a TOML file; every flag overrides its config
key. Exit codes: 0 success, 2 config error, 3 numerical failure, 4 infeasible
or inadmissible schedule.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .diagnostics import (
    band_edge_position,
    degree_density_error,
    front_error,
    heat_approx_error,
    kernel_sup_error,
    spectral_convergence_report,
    write_rows_csv,
)
from .fronts import EXTINCT, analytic_front, band, cap, circle, drift_front_ode, signed_distance
from .graph import KernelProfile, build_graph, kernel_constants, save_graph_csv
from .manifolds import SPHERE, TORUS, DensitySpec, ManifoldSpec, sample_points, save_cloud_csv
from .mbo import initial_state_from_region, run_mbo, save_trace_csv
from .schedule import (
    InadmissibleParameters,
    ScheduleParams,
    check_admissible,
    exponents,
    practical_override,
    schedule_for_n,
)
from .spectral import (
    CacheError,
    EigensolverError,
    FullHeatOperator,
    TruncatedHeatOperator,
    graph_content_hash,
    partial_eigendecomposition,
    spectrum_cache_load,
    spectrum_cache_save,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

SCENARIOS = (
    "shrinking-circle",
    "stationary-band",
    "sphere-cap",
    "density-drift",
    "heat-error",
    "kernel-error",
    "spectral-report",
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_config(path, overrides: dict) -> dict:
    cfg = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            cfg = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {p}: {exc}") from exc
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config key {key!r}")
    return cfg[key]


def _positive(cfg: dict, key: str) -> float:
    value = float(_require(cfg, key))
    if value <= 0:
        raise ConfigError(f"config key {key!r} must be positive, got {value}")
    return value


def resolve_cache_dir(cfg: dict) -> Path:
    cache = cfg.get("cache_dir") or os.environ.get("MBOLAB_CACHE")
    if cache is None:
        cache = Path.home() / ".cache" / "mbolab"
    cache = Path(cache)
    cache.mkdir(parents=True, exist_ok=True)
    return cache


def resolve_output_dir(cfg: dict) -> Path:
    out = Path(cfg.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def manifold_from(cfg: dict) -> ManifoldSpec:
    kind = cfg.get("manifold", "torus")
    if kind in ("torus", TORUS):
        return ManifoldSpec(TORUS, float(cfg.get("side", 1.0)))
    if kind in ("sphere", SPHERE):
        return ManifoldSpec(SPHERE)
    raise ConfigError(f"unknown manifold {kind!r}")


def density_from(cfg: dict) -> DensitySpec:
    form = cfg.get("density", "uniform")
    if form == "uniform":
        return DensitySpec()
    if form == "cosine":
        return DensitySpec("cosine", int(cfg.get("density_axis", 0)), float(cfg.get("density_amplitude", 0.3)))
    raise ConfigError(f"unknown density {form!r}")


def kernel_from(cfg: dict) -> KernelProfile:
    try:
        return KernelProfile(cfg.get("kernel", "indicator"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def front_from(cfg: dict, manifold: ManifoldSpec):
    kind = cfg.get("front", "circle")
    if kind == "circle":
        center = cfg.get("center", [0.5, 0.5])
        return circle(manifold, (float(center[0]), float(center[1])), float(cfg.get("radius", 0.25)))
    if kind == "band":
        return band(manifold, float(cfg.get("band_a", 0.25)), float(cfg.get("band_b", 0.75)), int(cfg.get("band_axis", 0)))
    if kind == "cap":
        return cap(float(cfg.get("theta", np.pi / 3)))
    raise ConfigError(f"unknown front {kind!r}")


# ---------------------------------------------------------------------------
# cached spectra


def cached_spectrum(graph, K: int, tol: float, cache: Path):
    """Load the eigendecomposition from the cache or compute and store it."""
    if K > graph.n:
        raise ConfigError(f"K = {K} exceeds n = {graph.n}")
    ghash = graph_content_hash(graph)
    path = cache / f"{ghash.hex()}.K{K}.tol{tol:g}.spec"
    if path.exists():
        try:
            return spectrum_cache_load(path, expected_graph_hash=ghash), True
        except CacheError:
            pass  # stale or corrupt entry: fall through and recompute
    dec = partial_eigendecomposition(graph, K, tol=tol)
    spectrum_cache_save(dec, path)
    return dec, False


# ---------------------------------------------------------------------------
# scenario runners (each returns a summary dict; artifacts land in out_dir)


def _build(cfg, seed):
    manifold = manifold_from(cfg)
    density = density_from(cfg)
    n = int(_positive(cfg, "n"))
    cloud = sample_points(manifold, density, n, seed)
    graph = build_graph(cloud, _positive(cfg, "eps"), kernel_from(cfg))
    return cloud, graph


def _kappa(cfg, manifold) -> float:
    return kernel_constants(kernel_from(cfg), manifold.intrinsic_dim).kappa


def run_shrinking_circle(cfg, seed, out_dir: Path) -> dict:
    cloud, graph = _build(cfg, seed)
    h = _positive(cfg, "h")
    kappa = _kappa(cfg, cloud.manifold)
    front = front_from({**cfg, "front": "circle"}, cloud.manifold)
    r0 = front.radius
    horizon = float(cfg.get("horizon", 2.0 * r0**2 / (2.0 * kappa)))
    trace = run_mbo(
        FullHeatOperator(graph),
        h,
        initial_state_from_region(cloud, front),
        max_steps=max(int(np.ceil(horizon / h)), 1),
        record_energy=True,
    )
    save_trace_csv(trace, out_dir / f"trace_seed{seed}.csv")
    area = cloud.manifold.volume
    ones = np.array([s.ones_count for s in trace.states]) / cloud.n
    r2 = ones * area / np.pi
    t = trace.times
    half = r2 >= r0**2 / 2
    slope = float(np.polyfit(t[half], r2[half], 1)[0]) if half.sum() > 2 else float("nan")
    fe = front_error(
        trace,
        cloud,
        lambda s: analytic_front(front, kappa, s),
        t[:-1] if len(t) > 1 else t,
        collar=2 * (graph.epsilon + h),
    )
    write_rows_csv(
        [
            {"time": ti, "disagreement_fraction": f, "max_wrong_distance": d}
            for ti, f, d in zip(fe.times, fe.disagreement_fraction, fe.max_wrong_distance)
        ],
        out_dir / f"front_error_seed{seed}.csv",
    )
    return {
        "seed": seed,
        "steps": trace.steps,
        "pinned_at": trace.pinned_at,
        "r2_slope": slope,
        "r2_slope_expected": -2.0 * kappa,
        "extinction_estimate": fe.extinction_estimate,
        "extinction_expected": r0**2 / (2.0 * kappa),
        "energy_monotone": bool(np.all(np.diff(trace.energies) <= 1e-10)),
    }


def run_stationary_band(cfg, seed, out_dir: Path) -> dict:
    cloud, graph = _build(cfg, seed)
    h = _positive(cfg, "h")
    front = front_from({**cfg, "front": "band"}, cloud.manifold)
    steps = int(cfg.get("steps", 50))
    trace = run_mbo(
        FullHeatOperator(graph),
        h,
        initial_state_from_region(cloud, front),
        max_steps=steps,
        stop_on_fixpoint=False,
        record_energy=True,
    )
    save_trace_csv(trace, out_dir / f"trace_seed{seed}.csv")
    sd = signed_distance(front, cloud.points)
    collar = 2 * (graph.epsilon + h)
    wrong = (trace.states[-1].labels != trace.states[0].labels) & (np.abs(sd) > collar)
    return {
        "seed": seed,
        "steps": trace.steps,
        "collar": collar,
        "disagreements_outside_collar": int(wrong.sum()),
        "energy_monotone": bool(np.all(np.diff(trace.energies) <= 1e-10)),
    }


def run_sphere_cap(cfg, seed, out_dir: Path) -> dict:
    cfg = {**cfg, "manifold": "sphere", "density": "uniform"}
    cloud, graph = _build(cfg, seed)
    h = _positive(cfg, "h")
    kappa = _kappa(cfg, cloud.manifold)
    front = front_from({**cfg, "front": "cap"}, cloud.manifold)
    horizon = float(cfg.get("horizon", -np.log(np.cos(front.theta0)) / kappa))
    trace = run_mbo(
        FullHeatOperator(graph),
        h,
        initial_state_from_region(cloud, front),
        max_steps=max(int(np.ceil(horizon / h)), 1),
        record_energy=True,
    )
    save_trace_csv(trace, out_dir / f"trace_seed{seed}.csv")
    # area fraction of a cap of colatitude theta is (1 - cos theta)/2
    ones = np.array([s.ones_count for s in trace.states]) / cloud.n
    cos_theta = np.clip(1.0 - 2.0 * ones, -1.0, 1.0)
    rows = []
    for l, ct in enumerate(cos_theta):
        t = l * h
        ref = analytic_front(front, kappa, t)
        ref_ct = 1.0 if ref is EXTINCT else float(np.cos(ref.theta0))
        rows.append({"time": t, "cos_theta": float(ct), "cos_theta_analytic": ref_ct})
    write_rows_csv(rows, out_dir / f"cap_angle_seed{seed}.csv")
    return {
        "seed": seed,
        "steps": trace.steps,
        "pinned_at": trace.pinned_at,
        "final_cos_theta": float(cos_theta[-1]),
        "energy_monotone": bool(np.all(np.diff(trace.energies) <= 1e-10)),
    }


def run_density_drift(cfg, seed, out_dir: Path) -> dict:
    cfg = {**cfg, "density": cfg.get("density", "cosine")}
    cloud, graph = _build(cfg, seed)
    h = _positive(cfg, "h")
    kappa = _kappa(cfg, cloud.manifold)
    front = front_from({**cfg, "front": "band"}, cloud.manifold)
    horizon = float(cfg.get("horizon", 0.05))
    steps = max(round(horizon / h), 1)
    trace = run_mbo(
        FullHeatOperator(graph),
        h,
        initial_state_from_region(cloud, front),
        max_steps=steps,
        stop_on_fixpoint=False,
        record_energy=True,
    )
    save_trace_csv(trace, out_dir / f"trace_seed{seed}.csv")
    a0, axis = front.a, front.axis
    lo, hi = a0 - 0.15, a0 + 0.15
    rows = []
    for l, state in enumerate(trace.states):
        pos = band_edge_position(cloud, state.labels, lo, hi, axis=axis)
        ode = drift_front_ode(a0, cloud.manifold, cloud.density, kappa, l * h) if l else a0
        rows.append({"time": l * h, "edge_position": pos, "edge_position_ode": ode})
    write_rows_csv(rows, out_dir / f"drift_seed{seed}.csv")
    baseline = rows[0]["edge_position"]
    disp = rows[-1]["edge_position"] - baseline
    disp_ode = rows[-1]["edge_position_ode"] - a0
    return {
        "seed": seed,
        "steps": trace.steps,
        "displacement": disp,
        "displacement_ode": disp_ode,
        "relative_error": disp / disp_ode - 1.0 if disp_ode else float("nan"),
        "energy_monotone": bool(np.all(np.diff(trace.energies) <= 1e-10)),
    }


def run_heat_error(cfg, seed, out_dir: Path) -> dict:
    cloud, graph = _build(cfg, seed)
    h = _positive(cfg, "h")
    kappa = _kappa(cfg, cloud.manifold)
    report = heat_approx_error(FullHeatOperator(graph), h, kappa, cloud.density, grid_n=int(cfg.get("grid_n", 256)))
    rows = [{"function": name, "sup_error": err, "seed": seed} for name, err in report["per_function"].items()]
    write_rows_csv(rows, out_dir / f"heat_error_seed{seed}.csv")
    return {
        "seed": seed,
        "sup_coefficient": report["sup_coefficient"],
        "lip_coefficient": report["lip_coefficient"],
        "fit_condition_number": report["fit_condition_number"],
        "worst_error": max(report["per_function"].values()),
        "degree_density_error": degree_density_error(graph, cloud.density),
    }


def run_kernel_error(cfg, seed, out_dir: Path, cache: Path) -> dict:
    cloud, graph = _build(cfg, seed)
    h = _positive(cfg, "h")
    K = int(_positive(cfg, "K"))
    kappa = _kappa(cfg, cloud.manifold)
    dec, hit = cached_spectrum(graph, K, float(cfg.get("tol", 1e-10)), cache)
    report = kernel_sup_error(dec, graph, h, kappa, cloud.density)
    return {
        "seed": seed,
        "K": K,
        "sup_error": report.sup_error,
        "normalized": report.normalized,
        "pairs_checked": report.pairs_checked,
        "exhaustive": report.exhaustive,
        "cache_hit": hit,
    }


def run_spectral_report(cfg, seed, out_dir: Path, cache: Path) -> dict:
    from .continuum_spectra import continuum_eigensystem

    cloud, graph = _build(cfg, seed)
    K = int(_positive(cfg, "K"))
    kappa = _kappa(cfg, cloud.manifold)
    dec, hit = cached_spectrum(graph, K, float(cfg.get("tol", 1e-10)), cache)
    es = continuum_eigensystem(cloud.manifold, cloud.density, K)
    report = spectral_convergence_report(dec, graph, es, kappa, min(K, es.count))
    write_rows_csv(report["rows"], out_dir / f"eigenvalues_seed{seed}.csv")
    write_rows_csv(
        [
            {"first": g["indices"][0], "last": g["indices"][1], "cont_eigenvalue": g["cont_eigenvalue"], "max_angle_deg": g["max_angle_deg"]}
            for g in report["groups"]
        ],
        out_dir / f"eigenspace_angles_seed{seed}.csv",
    )
    worst = max((r["abs_error"] for r in report["rows"]), default=0.0)
    return {"seed": seed, "K": K, "worst_abs_error": worst, "cache_hit": hit}


def run_scenario(cfg: dict, seed: int, out_dir: Path, cache: Path) -> dict:
    scenario = _require(cfg, "scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    if scenario == "shrinking-circle":
        return run_shrinking_circle(cfg, seed, out_dir)
    if scenario == "stationary-band":
        return run_stationary_band(cfg, seed, out_dir)
    if scenario == "sphere-cap":
        return run_sphere_cap(cfg, seed, out_dir)
    if scenario == "density-drift":
        return run_density_drift(cfg, seed, out_dir)
    if scenario == "heat-error":
        return run_heat_error(cfg, seed, out_dir)
    if scenario == "kernel-error":
        return run_kernel_error(cfg, seed, out_dir, cache)
    return run_spectral_report(cfg, seed, out_dir, cache)


def write_manifest(out_dir: Path, cfg: dict, summaries: list, wall: float) -> None:
    manifest = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "versions": {"mbolab": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_seconds": wall,
        "results": summaries,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def write_error_record(out_dir: Path, exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    try:
        (out_dir / "error.json").write_text(json.dumps(record, indent=2) + "\n")
    except OSError:
        pass


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args) -> int:
    cfg = load_config(args.config, {"manifold": args.manifold, "density": args.density, "n": args.n, "seed": args.seed})
    cloud = sample_points(manifold_from(cfg), density_from(cfg), int(_positive(cfg, "n")), int(cfg.get("seed", 0)))
    save_cloud_csv(cloud, args.output)
    print(f"wrote {cloud.n} points to {args.output}")
    return EXIT_OK


def cmd_build_graph(args) -> int:
    cfg = load_config(args.config, {"manifold": args.manifold, "density": args.density, "n": args.n, "seed": args.seed, "eps": args.eps, "kernel": args.kernel})
    cloud, graph = _build(cfg, int(cfg.get("seed", 0)))
    out = Path(args.output)
    save_graph_csv(graph, out, out.with_suffix(".degrees.csv"))
    print(f"graph n={graph.n} eps={graph.epsilon} nnz={graph.weights.nnz} connected={graph.connected}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config, {"manifold": args.manifold, "density": args.density, "n": args.n, "seed": args.seed, "eps": args.eps, "kernel": args.kernel, "K": args.K, "cache_dir": args.cache_dir})
    cloud, graph = _build(cfg, int(cfg.get("seed", 0)))
    cache = resolve_cache_dir(cfg)
    dec, hit = cached_spectrum(graph, int(_positive(cfg, "K")), float(cfg.get("tol", 1e-10)), cache)
    write_rows_csv(
        [{"l": l + 1, "eigenvalue": float(v), "residual": float(r)} for l, (v, r) in enumerate(zip(dec.eigenvalues, dec.residuals))],
        args.output,
    )
    print(f"K={dec.K} eigenvalues -> {args.output} (cache {'hit' if hit else 'miss'})")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {
        "scenario": args.scenario,
        "n": args.n,
        "eps": args.eps,
        "h": args.h,
        "K": args.K,
        "output_dir": args.output_dir,
        "cache_dir": args.cache_dir,
    }
    cfg = load_config(args.config, overrides)
    seeds = cfg.get("seeds", [int(cfg.get("seed", 0))])
    if isinstance(seeds, int):
        seeds = [seeds]
    out_dir = resolve_output_dir(cfg)
    cache = resolve_cache_dir(cfg)
    t0 = time.perf_counter()
    summaries = [run_scenario(cfg, int(seed), out_dir, cache) for seed in seeds]
    write_manifest(out_dir, cfg, summaries, time.perf_counter() - t0)
    for s in summaries:
        print(json.dumps(s, default=str))
    return EXIT_OK


def cmd_validate_schedule(args) -> int:
    ok, report = check_admissible(args.k, args.s, args.q)
    if not ok:
        print(report, file=sys.stderr)
        return EXIT_INFEASIBLE
    alpha, beta = exponents(args.k, args.s, args.q)
    params = ScheduleParams(args.k, args.s, args.q, c_h=args.c_h, c_eps=args.c_eps)
    rows = []
    for n in args.n:
        out = schedule_for_n(params, n)
        rows.append(
            {
                "n": n,
                "K": out.K,
                "clamped": out.clamped,
                "alpha": out.alpha,
                "beta": out.beta,
                "h": out.h,
                "eps": out.eps,
                "eps_lower_theorem": out.eps_lower_theorem,
                "eps_lower_corollary": out.eps_lower_corollary,
                "feasible": out.feasible,
            }
        )
    if args.csv:
        write_rows_csv(rows, sys.stdout)
    else:
        print(report)
        print(f"alpha = {alpha}, beta = {beta}")
        for row in rows:
            print(json.dumps(row))
    if rows and not all(r["feasible"] for r in rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


def _study_one(payload):
    cfg, seed, out_dir, cache = payload
    row = {"seed": seed}
    t0 = time.perf_counter()
    try:
        row.update(run_scenario(cfg, seed, Path(out_dir), Path(cache)))
        row["error"] = ""
    except Exception as exc:  # noqa: BLE001 - a study survives bad runs
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_seconds"] = time.perf_counter() - t0
    return row


def cmd_study(args) -> int:
    cfg = load_config(args.config, {"scenario": args.scenario, "output_dir": args.output_dir, "cache_dir": args.cache_dir})
    ns = cfg.get("ns", [int(_positive(cfg, "n"))] if "n" in cfg else None)
    if ns is None:
        raise ConfigError("study needs 'n' or 'ns' in the config")
    seeds = cfg.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = [seeds]
    out_dir = resolve_output_dir(cfg)
    cache = resolve_cache_dir(cfg)
    jobs = []
    for n in ns:
        for seed in seeds:
            jobs.append(({**cfg, "n": int(n)}, int(seed), str(out_dir), str(cache)))
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_study_one, jobs))
    else:
        rows = [_study_one(j) for j in jobs]
    for row, (job_cfg, _, _, _) in zip(rows, jobs):
        row["n"] = job_cfg["n"]
    write_rows_csv(rows, out_dir / "study.csv")
    long_rows = []
    for row in rows:
        for key, value in row.items():
            if key in ("n", "seed", "error") or not isinstance(value, (int, float, np.floating)):
                continue
            long_rows.append(
                {
                    "metric": key,
                    "n": row.get("n"),
                    "eps": cfg.get("eps", ""),
                    "h": cfg.get("h", ""),
                    "K": cfg.get("K", ""),
                    "seed": row["seed"],
                    "value": value,
                }
            )
    write_rows_csv(long_rows, out_dir / "study_long.csv", columns=["metric", "n", "eps", "h", "K", "seed", "value"])
    write_manifest(out_dir, cfg, rows, time.perf_counter() - t0)
    failures = [r for r in rows if r.get("error")]
    print(f"study: {len(rows)} runs, {len(failures)} failures -> {out_dir / 'study.csv'}")
    for r in failures:
        print(f"  n={r.get('n')} seed={r['seed']}: {r['error']}", file=sys.stderr)
    return EXIT_NUMERICAL if len(failures) == len(rows) and rows else EXIT_OK


_PLOT_RADIUS = """\
import csv
import matplotlib.pyplot as plt

times, r2 = [], []
with open({trace!r}) as fh:
    for row in csv.DictReader(fh):
        times.append(float(row["time"]))
        r2.append(float(row["r2"]))
fig, ax = plt.subplots()
ax.plot(times, r2, "o-", label="measured")
ax.plot(times, [{r0sq} + {slope} * t for t in times], "--", label="fit slope {slope:.4f}")
ax.set_xlabel("t")
ax.set_ylabel("r^2(t)")
ax.legend()
fig.savefig({figure!r}, dpi=150)
"""

_PLOT_LOGLOG = """\
import csv
import matplotlib.pyplot as plt

ns, errs = [], []
with open({data!r}) as fh:
    for row in csv.DictReader(fh):
        ns.append(float(row["n"]))
        errs.append(float(row[{column!r}]))
fig, ax = plt.subplots()
ax.loglog(ns, errs, "o-")
ax.set_xlabel("n")
ax.set_ylabel({column!r})
fig.savefig({figure!r}, dpi=150)
"""

_PLOT_REGION = """\
import csv
import matplotlib.pyplot as plt

ss, qs = [], []
with open({data!r}) as fh:
    for row in csv.DictReader(fh):
        ss.append(float(row["s"]))
        qs.append(float(row["q_boundary"]))
fig, ax = plt.subplots()
ax.plot(ss, qs, "k-", label="q = 1/(2/k - s), k = {k}")
ax.fill_between(ss, qs, [max(qs)] * len(qs), alpha=0.3, label="admissible")
ax.set_xlabel("s")
ax.set_ylabel("q")
ax.set_ylim(0, max(qs))
ax.legend()
fig.savefig({figure!r}, dpi=150)
"""


def cmd_report(args) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    made = []

    if args.trace:
        trace_path = Path(args.trace)
        if not trace_path.exists():
            raise ConfigError(f"trace file not found: {trace_path}")
        import csv as _csv

        with open(trace_path) as fh:
            reader = _csv.DictReader(fh)
            for col in ("time", "ones_count"):
                if col not in (reader.fieldnames or []):
                    raise ConfigError(f"trace file {trace_path} is missing column {col!r}")
            rows = list(reader)
        times = np.array([float(r["time"]) for r in rows])
        ones = np.array([float(r["ones_count"]) for r in rows])
        n_total = ones[0] / (np.pi * args.r0**2) if args.r0 else ones.max()
        r2 = ones / n_total / np.pi
        data = out_dir / "radius_vs_time.csv"
        write_rows_csv([{"time": t, "r2": v} for t, v in zip(times, r2)], data)
        half = r2 >= r2[0] / 2
        slope = float(np.polyfit(times[half], r2[half], 1)[0]) if half.sum() > 2 else float("nan")
        script = out_dir / "plot_radius_vs_time.py"
        script.write_text(_PLOT_RADIUS.format(trace=str(data), r0sq=float(r2[0]), slope=slope, figure=str(out_dir / "radius_vs_time.png")))
        made += [data, script]

    if args.study:
        study_path = Path(args.study)
        if not study_path.exists():
            raise ConfigError(f"study file not found: {study_path}")
        import csv as _csv

        with open(study_path) as fh:
            reader = _csv.DictReader(fh)
            fields = reader.fieldnames or []
            rows = list(reader)
        if "n" not in fields:
            raise ConfigError(f"study file {study_path} is missing column 'n'")
        column = args.column or ("normalized" if "normalized" in fields else None)
        if column is None or column not in fields:
            raise ConfigError(f"study file {study_path} is missing column {column or 'normalized'!r}")
        data = out_dir / "error_vs_n.csv"
        write_rows_csv([{"n": r["n"], column: r[column]} for r in rows if r.get(column)], data, columns=["n", column])
        script = out_dir / "plot_error_vs_n.py"
        script.write_text(_PLOT_LOGLOG.format(data=str(data), column=column, figure=str(out_dir / "error_vs_n.png")))
        made += [data, script]

    if args.region:
        k = args.k
        ss = np.linspace(0.01, 2.0 / k - 0.01, 100)
        rows = [{"s": float(s), "q_boundary": float(1.0 / (2.0 / k - s))} for s in ss]
        data = out_dir / "parameter_region.csv"
        write_rows_csv(rows, data)
        script = out_dir / "plot_parameter_region.py"
        script.write_text(_PLOT_REGION.format(data=str(data), k=k, figure=str(out_dir / "parameter_region.png")))
        made += [data, script]

    if not made:
        print("nothing to report; pass --trace, --study or --region", file=sys.stderr)
        return EXIT_CONFIG
    for p in made:
        print(f"wrote {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbolab", description="Threshold dynamics on random geometric graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="TOML config file; flags override its keys")
        p.add_argument("--manifold", default=None, choices=["torus", "sphere"])
        p.add_argument("--density", default=None, choices=["uniform", "cosine"])
        p.add_argument("-n", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("sample", help="sample a point cloud to CSV")
    common(p)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("build-graph", help="build the weighted epsilon-graph and export it")
    common(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--kernel", default=None, choices=["indicator", "triangular", "quadratic"])
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_build_graph)

    p = sub.add_parser("spectrum", help="compute or load the cached partial eigendecomposition")
    common(p)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--kernel", default=None, choices=["indicator", "triangular", "quadratic"])
    p.add_argument("-K", type=int, default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("run", help="run a scenario from a config file")
    p.add_argument("--config", default=None)
    p.add_argument("--scenario", default=None, choices=list(SCENARIOS))
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("-K", type=int, default=None)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--cache-dir", default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("validate-schedule", help="check admissibility and emit the (K, h, eps) schedule")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("-s", type=float, required=True)
    p.add_argument("-q", type=float, required=True)
    p.add_argument("-n", type=int, nargs="+", default=[10000])
    p.add_argument("--c-h", type=float, default=1.0)
    p.add_argument("--c-eps", type=float, default=1.0)
    p.add_argument("--csv", action="store_true", help="machine-readable CSV on stdout")
    p.set_defaults(fn=cmd_validate_schedule)

    p = sub.add_parser("study", help="sweep a scenario over n and seeds")
    p.add_argument("--config", default=None)
    p.add_argument("--scenario", default=None, choices=list(SCENARIOS))
    p.add_argument("--output-dir", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_study)

    p = sub.add_parser("report", help="emit figure data files plus matplotlib scripts")
    p.add_argument("--trace", default=None, help="trace CSV from a shrinking-circle run")
    p.add_argument("--r0", type=float, default=None, help="initial radius for normalizing the trace")
    p.add_argument("--study", default=None, help="study CSV for the error-vs-n figure")
    p.add_argument("--column", default=None, help="error column to plot from the study CSV")
    p.add_argument("--region", action="store_true", help="emit the admissible parameter region")
    p.add_argument("-k", type=int, default=2)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InadmissibleParameters) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EigensolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        out = getattr(args, "output_dir", None)
        if out:
            write_error_record(Path(out), exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
