"""Command line: ``simulate``, ``infer`` and ``summarize``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path as FsPath

import numpy as np
from scipy.stats import gaussian_kde

from . import __version__
from .gillespie import SimulationCapError, simulate_path
from .likelihood import ImproperPosteriorError, PriorSpec, rho_transform
from .model import (
    ConfigError,
    ModelSpec,
    ObservationSeries,
    file_digest,
    load_model,
    read_observations,
    write_observations,
    write_path,
)
from .sampler import InitializationError, RunConfig, Target, initialize, run_chain

log = logging.getLogger("mjpbayes")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read_json(path) -> dict:
    try:
        return json.loads(FsPath(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} col {e.colno}: {e.msg}") from None


def observation_times(args, model: ModelSpec) -> np.ndarray:
    if args.obs_times:
        return np.asarray(args.obs_times, dtype=float)
    ref = model.config.get("reference", {}).get("obs_times", {})
    t0 = args.t0 if args.t0 is not None else ref.get("start", 0.0)
    tn = args.tn if args.tn is not None else ref.get("stop")
    step = args.step if args.step is not None else ref.get("step")
    if tn is None or step is None:
        raise ConfigError("observation times: give --obs-times or --tn and --step")
    n = int(round((tn - t0) / step))
    if n < 1 or not math.isclose(t0 + n * step, tn, rel_tol=0, abs_tol=1e-9 * max(1.0, abs(tn))):
        raise ConfigError("observation times: (tn - t0) must be a positive multiple of step")
    return t0 + step * np.arange(n + 1)


def draw_initial_state(model: ModelSpec, rng) -> np.ndarray:
    return np.array([rng.integers(s.lo, s.hi + 1) for s in model.init], dtype=np.int64)


def simulate_dataset(model: ModelSpec, theta, eta: float, times, rng, y0=None, scenario=None):
    """Simulate a path on ``[times[0], times[-1]]`` and noisy observations.

    Exact scenarios record the states themselves; unobserved species are
    written as ``na``.
    """
    sc = model.scenario(scenario)
    y0 = draw_initial_state(model, rng) if y0 is None else np.asarray(y0, dtype=np.int64)
    path = simulate_path(model, theta, y0, (times[0], times[-1]), rng)
    states = path.states_at(model.A, times).astype(float)
    if not sc.exact:
        states = states + rng.standard_normal(states.shape) / math.sqrt(eta)
    states[:, ~np.asarray(sc.observed)] = np.nan
    return path, ObservationSeries(np.asarray(times, dtype=float), states, model.species)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    ref = model.config.get("reference", {})
    theta = np.asarray(args.theta if args.theta is not None else ref.get("theta", []), dtype=float)
    if theta.shape != (model.r,):
        raise ConfigError(f"--theta: expected {model.r} rates")
    eta = args.eta if args.eta is not None else ref.get("eta", 1.0)
    if eta <= 0:
        raise ConfigError("--eta must be positive")
    times = observation_times(args, model)
    y0 = None
    if args.y0 is not None:
        y0 = np.asarray(args.y0, dtype=np.int64)
        if y0.shape != (model.p,) or np.any(y0 < 0):
            raise ConfigError(f"--y0: expected {model.p} nonnegative integers")
    rng = np.random.default_rng(args.seed)
    path, obs = simulate_dataset(model, theta, eta, times, rng, y0, args.scenario)
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_path(out / "path.csv", path)
    write_observations(out / "obs.csv", obs)
    print(f"wrote {out / 'path.csv'} ({path.n_tot} events) and {out / 'obs.csv'} ({len(times)} rows)")
    return 0


# ---------------------------------------------------------------------------
# infer


def _chain_job(job: dict) -> dict:
    model = load_model(job["model"])
    obs = read_observations(job["obs"], model.species)
    run = RunConfig.from_dict(job["run"])
    target = Target.build(model, obs, run)
    rng = np.random.default_rng(np.random.SeedSequence(run.seed).spawn(job["chains"])[job["chain"]])
    out = FsPath(job["dir"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    state = initialize(target, run, rng)
    t1 = time.perf_counter()
    trace = run_chain(state, target, run)
    t2 = time.perf_counter()
    trace.write(out / "trace.csv", out / "latent.csv")
    for m, p in trace.snapshots:
        write_path(out / f"path_{m:08d}.csv", p)
    write_path(out / "path_final.csv", state.path)
    return {"chain": job["chain"], "acceptance": state.acceptance_rates(),
            "seconds": {"init": t1 - t0, "sampling": t2 - t1}}


def cmd_infer(args) -> int:
    if args.manifest:
        man = _read_json(args.manifest)
        model_file, obs_file, run_cfg = man["model"], man["obs"], man["run"]
        chains = man["chains"]
        for f, key in ((model_file, "model_sha256"), (obs_file, "obs_sha256")):
            if file_digest(f) != man[key]:
                raise ConfigError(f"{f}: contents differ from the manifest digest")
    else:
        if not args.model or not args.obs:
            raise ConfigError("infer needs --model and --obs (or --manifest)")
        model_file, obs_file = args.model, args.obs
        run_cfg = _read_json(args.run) if args.run else {}
        chains = args.chains
    if args.seed is not None:
        run_cfg["seed"] = args.seed
    if args.iterations is not None:
        run_cfg["iterations"] = args.iterations
    if args.scenario is not None:
        run_cfg["scenario"] = args.scenario
    if chains < 1:
        raise ConfigError("--chains must be >= 1")
    run = RunConfig.from_dict(run_cfg)
    model = load_model(model_file)
    obs = read_observations(obs_file, model.species)
    Target.build(model, obs, run)  # validate before spawning workers

    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [{"model": str(model_file), "obs": str(obs_file), "run": run_cfg, "chains": chains,
             "chain": k, "dir": str(out / f"chain_{k}")} for k in range(chains)]
    if chains == 1 or args.workers == 1:
        results = [_chain_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            results = list(ex.map(_chain_job, jobs))

    manifest = {
        "version": __version__,
        "model": str(FsPath(model_file).resolve()),
        "model_sha256": file_digest(model_file),
        "obs": str(FsPath(obs_file).resolve()),
        "obs_sha256": file_digest(obs_file),
        "run": run_cfg,
        "run_sha256": _json_digest(run_cfg),
        "seed": run.seed,
        "chains": chains,
        "results": results,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for res in results:
        rates = ", ".join(f"{k} {v:.3f}" for k, v in res["acceptance"].items())
        print(f"chain {res['chain']}: acceptance {rates}")
    return 0


def _json_digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# summarize


def read_trace(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty trace")
    header = rows[0]
    data = []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}: row {ln}: expected {len(header)} fields, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ConfigError(f"{path}: row {ln}: non-numeric field") from None
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def burn_rows(n: int, burn_in: float) -> int:
    """Rows to discard: a fraction when ``burn_in < 1``, else a count."""
    k = int(math.floor(burn_in * n)) if burn_in < 1 else int(burn_in)
    if k >= n:
        raise ConfigError(f"burn-in {burn_in} leaves no rows out of {n}")
    return k


def summarize_columns(names, samples: np.ndarray, probs) -> list[dict]:
    out = []
    for k, name in enumerate(names):
        x = samples[:, k]
        row = {"parameter": name, "mean": float(np.mean(x)), "median": float(np.median(x)), "sd": float(np.std(x, ddof=1)) if len(x) > 1 else 0.0}
        for p in probs:
            row[f"q{p:g}"] = float(np.quantile(x, p))
        out.append(row)
    return out


def kde_grid(x: np.ndarray, points: int = 256) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return np.array([lo]), np.array([math.inf])
    pad = 0.1 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, points)
    return grid, gaussian_kde(x)(grid)


def latent_bands(path, burn_in: float, probs) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    iters = sorted({int(r["iter"]) for r in rows})
    keep = set(iters[burn_rows(len(iters), burn_in):])
    groups: dict[tuple[float, str], list[float]] = {}
    for r in rows:
        if int(r["iter"]) in keep:
            groups.setdefault((float(r["t"]), r["species"]), []).append(float(r["value"]))
    out = []
    for (t, s), vals in sorted(groups.items()):
        v = np.array(vals)
        row = {"t": t, "species": s, "mean": float(v.mean())}
        for p in probs:
            row[f"q{p:g}"] = float(np.quantile(v, p))
        out.append(row)
    return out


def _write_rows(path, rows: list[dict]):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def cmd_summarize(args) -> int:
    probs = args.probs
    if any(not 0 <= p <= 1 for p in probs):
        raise ConfigError("--probs must lie in [0, 1]")
    headers, blocks = None, []
    for f in args.trace:
        h, data = read_trace(f)
        if headers is not None and h != headers:
            raise ConfigError(f"{f}: columns differ from {args.trace[0]}")
        headers = h
        blocks.append(data[burn_rows(len(data), args.burn_in):])
    samples = np.vstack(blocks)
    cols = [c for c in headers if c.startswith("theta_") or c == "eta"]
    idx = [headers.index(c) for c in cols]
    names, values = list(cols), samples[:, idx]
    if args.model:
        model = load_model(args.model)
        groups = PriorSpec.from_config(model).reparam_groups
        if groups:
            th = samples[:, [headers.index(f"theta_{i + 1}") for i in range(model.r)]]
            rho = np.array([rho_transform(t, groups) for t in th])
            names += [f"rho_{k + 1}" for k in range(rho.shape[1])]
            values = np.hstack([values, rho])
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "parameters.csv", summarize_columns(names, values, probs))
    kde_rows = []
    for k, name in enumerate(names):
        grid, dens = kde_grid(values[:, k], args.kde_points)
        kde_rows += [{"parameter": name, "x": float(g), "density": float(d)} for g, d in zip(grid, dens)]
    _write_rows(out / "kde.csv", kde_rows)
    bands = []
    for f in args.latent or []:
        bands += latent_bands(f, args.burn_in, probs)
    _write_rows(out / "latent_bands.csv", bands)
    print(f"summarised {len(samples)} draws of {len(names)} parameters into {out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mjpbayes", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", help="simulate a path and an observation file")
    s.add_argument("--model", required=True)
    s.add_argument("--theta", type=_float_list)
    s.add_argument("--eta", type=float)
    s.add_argument("--y0", type=_float_list)
    s.add_argument("--t0", type=float)
    s.add_argument("--tn", type=float)
    s.add_argument("--step", type=float)
    s.add_argument("--obs-times", type=_float_list)
    s.add_argument("--scenario")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("infer", help="initialise and run the sampler")
    i.add_argument("--model")
    i.add_argument("--obs")
    i.add_argument("--run", help="run config (JSON)")
    i.add_argument("--manifest", help="rerun from a previous manifest.json")
    i.add_argument("--seed", type=int)
    i.add_argument("--iterations", type=int)
    i.add_argument("--scenario")
    i.add_argument("--chains", type=int, default=1)
    i.add_argument("--workers", type=int)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)

    m = sub.add_parser("summarize", help="posterior summaries from trace files")
    m.add_argument("--trace", nargs="+", required=True)
    m.add_argument("--latent", nargs="*")
    m.add_argument("--model", help="add sum/ratio columns for reversible pairs")
    m.add_argument("--burn-in", type=float, default=0.5)
    m.add_argument("--probs", type=_float_list, default=[0.025, 0.5, 0.975])
    m.add_argument("--kde-points", type=int, default=256)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_summarize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ImproperPosteriorError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (InitializationError, SimulationCapError, RuntimeError, FloatingPointError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
