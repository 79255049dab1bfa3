"""``daavm`` command line: simulate, surrogate, run, bench, summarize.

All commands read one TOML config. Any key may be overridden from the
environment as ``DAAVM_<SECTION>__<KEY>=<toml value>`` (``DAAVM_SEED=7``,
``DAAVM_SAMPLER__ITERATIONS=2000``). Exit codes: 0 ok, 2 config error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import design, diagnostics, ergm, pointproc, potts, samplers, sir, surrogate
from .core import PriorSpec, ProposalSpec, named_stream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

VARIANTS = ("avm", "daavm_f", "daavm_gp", "daavm_s", "mh_surrogate", "pmcmc", "da_pmcmc")
NUMERIC_ERRORS = (FloatingPointError, np.linalg.LinAlgError, surrogate.GPFitError, ergm.SeparationError,
                  ergm.MoveTheta0Error, pointproc.InfeasibleParams, ZeroDivisionError, OverflowError)

DEFAULT_PRIORS = {
    "potts": [{"name": "theta", "kind": "uniform", "lo": 0.0, "hi": 2.0}],
    "pointproc": [{"name": "lambda", "kind": "uniform", "lo": 2e-4, "hi": 6e-4},
                  {"name": "theta1", "kind": "uniform", "lo": 1.0, "hi": 2.0},
                  {"name": "theta2", "kind": "uniform", "lo": 0.0, "hi": 20.0},
                  {"name": "theta3", "kind": "uniform", "lo": 0.0, "hi": 1.0}],
    "ergm": [{"name": n, "kind": "normal", "mean": 0.0, "var": 10.0} for n in ergm.ErgmModel.param_names],
    "sir": [{"name": "beta", "kind": "lognormal", "logmean": math.log(2.0), "sdlog": 1.0},
            {"name": "gamma", "kind": "lognormal", "logmean": 0.0, "sdlog": 1.0},
            {"name": "rho", "kind": "beta", "a": 2.0, "b": 2.0}],
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


# --------------------------------------------------------------------------
# configuration


def _parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_env(cfg: dict, environ=None) -> dict:
    cfg = copy.deepcopy(cfg)
    environ = os.environ if environ is None else environ
    for key, raw in sorted(environ.items()):
        if not key.startswith("DAAVM_"):
            continue
        path = [p.lower() for p in key[6:].split("__") if p]
        node = cfg
        for p in path[:-1]:
            node = node.setdefault(p, {})
        node[path[-1]] = _parse_value(raw)
    return cfg


def load_config(path, seed=None, out=None, environ=None) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        cfg = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    cfg = apply_env(cfg, environ)
    cfg["_dir"] = str(p.resolve().parent)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["out"] = str(out)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    """Collect every problem before failing."""
    problems = []
    model = cfg.get("model")
    kind = model.get("kind") if isinstance(model, dict) else None
    if kind not in DEFAULT_PRIORS:
        problems.append(f"model.kind must be one of {sorted(DEFAULT_PRIORS)}, got {kind!r}")
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        problems.append("seed must be an unsigned 64-bit integer")
    s = cfg.get("sampler")
    if s is not None:
        v = s.get("variant")
        if v not in VARIANTS:
            problems.append(f"sampler.variant must be one of {VARIANTS}, got {v!r}")
        it = s.get("iterations")
        if not isinstance(it, int) or it < 1:
            problems.append("sampler.iterations must be a positive integer")
        elif not 0 <= s.get("burnin", 0) < it:
            problems.append("sampler.burnin must lie in [0, iterations)")
        if v == "daavm_s":
            if "K" not in s:
                problems.append("sampler.K is required for daavm_s")
            if s.get("m1", 1) > s.get("m2", s.get("m", 10)):
                problems.append("sampler.m1 must not exceed sampler.m2")
            if kind not in ("potts", "pointproc"):
                problems.append(f"daavm_s needs a model with spatial subsampling, not {kind!r}")
        if v in ("pmcmc", "da_pmcmc") and kind != "sir":
            problems.append(f"{v} is only defined for the sir model")
        if v in ("avm", "daavm_f", "daavm_gp", "daavm_s") and kind == "sir":
            problems.append(f"{v} needs an intractable-normalizer model; use pmcmc/da_pmcmc for sir")
        if v in ("daavm_f", "da_pmcmc") and kind == "pointproc":
            problems.append("the point process has no frequentist surrogate; use daavm_gp or daavm_s")
        if "scale" in s and any(not (float(a) > 0) for a in np.atleast_1d(s["scale"])):
            problems.append("sampler.scale entries must be positive")
    sur = cfg.get("surrogate", {})
    if sur.get("kind") == "gp" and kind == "sir":
        problems.append("gp surrogate is not available for the sir model")
    data = (model or {}).get("data") if isinstance(model, dict) else None
    if data is not None:
        for f in np.atleast_1d(data):
            if not _resolve(cfg, f).exists():
                problems.append(f"model.data file {f} does not exist")
    if problems:
        raise ConfigError(problems)


def _resolve(cfg, f) -> Path:
    p = Path(f)
    return p if p.is_absolute() else Path(cfg.get("_dir", ".")) / p


def _out(cfg) -> Path:
    return _resolve(cfg, cfg.get("out", "out"))


def _public(cfg) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def data_hash(cfg) -> str:
    """Hash of the model and prior blocks plus the data file contents."""
    h = hashlib.sha256(samplers.config_hash({"model": cfg["model"], "prior": cfg.get("prior")}).encode())
    for f in _data_files(cfg):
        if f.exists():
            h.update(f.read_bytes())
    return h.hexdigest()[:16]


# --------------------------------------------------------------------------
# models and data


_DATA_NAMES = {"potts": ["lattice.txt"], "pointproc": ["points.csv"], "ergm": ["edges.csv", "nodes.csv"],
               "sir": ["cases.csv"]}


def _data_files(cfg) -> list[Path]:
    m = cfg["model"]
    if "data" in m:
        return [_resolve(cfg, f) for f in np.atleast_1d(m["data"]).tolist()]
    return [_out(cfg) / n for n in _DATA_NAMES[m["kind"]]]


def _prior(cfg) -> PriorSpec:
    entries = cfg.get("prior", {}).get("coords", DEFAULT_PRIORS[cfg["model"]["kind"]])
    try:
        return PriorSpec.from_config(entries)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"prior: {e}") from None


def _window(m) -> tuple:
    w = m.get("window", [0.0, 780.0, 0.0, 780.0])
    if len(w) != 4 or not (w[0] < w[1] and w[2] < w[3]):
        raise ConfigError("model.window must be [x0, x1, y0, y1] with x0 < x1 and y0 < y1")
    return tuple(float(v) for v in w)


def build_model(cfg, x=None):
    m = cfg["model"]
    kind = m["kind"]
    if kind == "potts":
        return potts.PottsModel(m.get("m", 32), m.get("q", 4), m.get("boundary", "free"))
    if kind == "pointproc":
        n_ref = m.get("n_ref") or (len(x) if x is not None else 100)
        return pointproc.PointProcessModel(_window(m), m.get("R", 2.0), max(int(n_ref), 1), m.get("cap", 1.2),
                                           0.5 if m.get("halve_pairs", False) else 1.0)
    if kind == "ergm":
        if x is None:
            raise ConfigError("the ergm model needs network data")
        return ergm.ErgmModel(x.grade, random_scan=m.get("random_scan", False))
    return None


def load_data(cfg):
    m = cfg["model"]
    files = _data_files(cfg)
    missing = [str(f) for f in files if not f.exists()]
    if missing:
        raise ConfigError(f"data file(s) {missing} missing; run 'daavm simulate' first or set model.data")
    kind = m["kind"]
    if kind == "potts":
        cells, q = potts.read_lattice(files[0])
        if q != m.get("q", 4) or cells.shape[0] != m.get("m", 32):
            raise ConfigError(f"lattice file is {cells.shape[0]}x{cells.shape[0]} with q={q}; model block disagrees")
        return cells
    if kind == "pointproc":
        return pointproc.read_points(files[0])
    if kind == "ergm":
        return ergm.read_network(files[0], files[1])
    return sir.read_cases(files[0], m.get("N", 100000))


def _state(kind, data):
    return data.adjacency if kind == "ergm" else data


# --------------------------------------------------------------------------
# commands


def cmd_simulate(cfg) -> dict:
    m = cfg["model"]
    kind = m["kind"]
    spec = m.get("simulate")
    if spec is None:
        raise ConfigError("model.simulate block is required for 'simulate'")
    rng = named_stream(cfg.get("seed", 0), "model-sim")
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    theta = np.asarray(spec.get("theta", _default_truth(kind)), dtype=float)
    cycles = int(spec.get("cycles", 1000))
    files = _data_files(cfg)
    if kind == "potts":
        model = build_model(cfg)
        x = model.simulate_aux(theta, cycles, rng)
        potts.write_lattice(files[0], x, model.q)
        info = {"S": potts.potts_stat(x, model.boundary)}
    elif kind == "pointproc":
        model = pointproc.PointProcessModel(_window(m), m.get("R", 2.0), int(spec.get("n_ref", 500)),
                                            m.get("cap", 1.2))
        x = model.simulate_aux(theta, cycles, rng)
        pointproc.write_points(files[0], x)
        info = {"n_points": int(len(x))}
    elif kind == "ergm":
        net = ergm.faux_mesa_like(theta, rng, cycles=cycles)
        ergm.write_network(files[0], files[1], net)
        info = {"n_edges": int(net.adjacency.sum() // 2)}
    else:
        obs, _ = sir.simulate_sir(theta, int(m.get("N", 100000)), int(spec.get("T", 52)), rng,
                                  min_total=int(spec.get("min_total", 100)))
        sir.write_cases(files[0], obs)
        info = {"total_cases": int(obs.cases.sum())}
    prov = {"seed": cfg.get("seed", 0), "theta": theta.tolist(), "cycles": cycles, "files": [str(f) for f in files],
            "data_hash": data_hash(cfg), **info}
    (out / "provenance.json").write_text(json.dumps(prov, indent=1))
    return prov


def _default_truth(kind):
    return {"potts": [0.8], "pointproc": [3e-4, 1.34, 11.5, 0.22],
            "ergm": [-3.2, 1.9, 2.1, 1.9, 2.0, 2.3, 2.7, 0.05, 1.5], "sir": [2.0, 0.5, 0.1]}[kind]


def _freq_fit(cfg, kind, model, data, rng):
    sur = cfg.get("surrogate", {})
    if kind == "potts":
        r = model.mple(data)
        return np.array([r.theta]), np.array([[r.fisher]])
    if kind == "ergm":
        th, fisher = ergm.ergm_mple(data.adjacency, data.grade)
        if sur.get("method", "mple") == "mcmle":
            th, fisher = ergm.ergm_mcmle(data.adjacency, data.grade, th, int(sur.get("N", 1000)),
                                         int(sur.get("m", 10)), rng)
        return th, fisher
    if kind == "sir":
        fit = sir.sir_freq_fit(data, int(sur.get("particles", cfg.get("sampler", {}).get("particles", 500))), rng)
        return fit.theta, np.linalg.inv(fit.cov)
    raise ConfigError(f"no frequentist surrogate for {kind}")


def cmd_surrogate(cfg) -> dict:
    kind = cfg["model"]["kind"]
    sur = cfg.get("surrogate", {})
    skind = sur.get("kind", "gaussian-frequentist")
    data = load_data(cfg)
    model = build_model(cfg, data)
    prior = _prior(cfg)
    rng = named_stream(cfg.get("seed", 0), "surrogate")
    t0 = time.perf_counter()
    art = {"kind": skind, "config_hash": data_hash(cfg)}
    if skind == "gaussian-frequentist":
        th, fisher = _freq_fit(cfg, kind, model, data, rng)
        art.update(theta=np.asarray(th).tolist(), fisher=np.asarray(fisher).tolist())
    elif skind == "gp":
        em, info = _build_gp(cfg, kind, model, data, prior, rng)
        art.update(emulator=em.to_dict(), **info)
    elif skind == "flat":
        pass
    else:
        raise ConfigError(f"surrogate.kind must be gp, gaussian-frequentist or flat, got {skind!r}")
    art["build_ms"] = (time.perf_counter() - t0) * 1e3
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(sur.get("path", out / "surrogate.json"))
    path = path if path.is_absolute() else _resolve(cfg, path)
    path.write_text(json.dumps(art, indent=1))
    return {"path": str(path), "kind": skind, "build_ms": art["build_ms"]}


def _build_gp(cfg, kind, model, data, prior, rng):
    sur = cfg.get("surrogate", {})
    x = _state(kind, data)
    p = prior.dim
    d = int(sur.get("d", 100 * p))
    m_is = int(sur.get("m", 100))
    N = int(sur.get("N", 1000))
    source = sur.get("design", "abc" if kind != "pointproc" else "shortrun")
    g_design = named_stream(cfg.get("seed", 0), "design")
    theta_ref = sur.get("theta_ref")
    if source == "shortrun" or kind == "pointproc":
        pilot_iters = int(sur.get("pilot_iterations", 10 * d))
        scale = np.asarray(sur.get("pilot_scale", cfg.get("sampler", {}).get("scale", prior.center() * 0.05)))
        theta0 = np.asarray(cfg.get("sampler", {}).get("theta0", prior.center()), dtype=float)
        pilot = samplers.avm_run(model, x, prior, ProposalSpec(scale), int(cfg.get("sampler", {}).get("m", 10)),
                                 pilot_iters + pilot_iters // 5, g_design, theta0=theta0, burnin=pilot_iters // 5,
                                 adapt=True)
        draws = pilot.draws[pilot_iters // 5:]
        particles = design.shortrun_particles(draws, d, g_design, prior=prior)
        if theta_ref is None:
            theta_ref = draws.mean(axis=0)
    else:
        th, fisher = _freq_fit(cfg, kind, model, data, rng)
        se = np.sqrt(np.diag(np.linalg.inv(design_fisher(fisher))))
        if theta_ref is None:
            theta_ref = th
        if source == "abc":
            particles = design.abc_particles(model, x, th, se, int(sur.get("D", 10 * d)), sur.get("eps", "auto"), d,
                                             g_design, m=int(cfg.get("sampler", {}).get("m", 10)), prior=prior)
        elif source == "lhs":
            box = design.Box.from_prior(prior).intersect(design.Box(th - 10 * se, th + 10 * se))
            particles = design.lhs(d, box, g_design)
        else:
            raise ConfigError(f"surrogate.design must be abc, lhs or shortrun, got {source!r}")
    ref = surrogate.reference_draws(model, theta_ref, N, m_is, rng)
    z = surrogate.is_logz(model, ref, theta_ref, particles)
    em = surrogate.gp_fit(particles, z, trend=sur.get("trend", "linear"))
    return em, {"theta_ref": np.asarray(theta_ref, dtype=float).tolist(), "design": source}


def design_fisher(F):
    F, _ = surrogate.nearest_spd(np.atleast_2d(F))
    return F


def _load_surrogate(cfg, kind, model, data, prior, force):
    sur = cfg.get("surrogate", {})
    path = Path(sur.get("path", _out(cfg) / "surrogate.json"))
    path = path if path.is_absolute() else _resolve(cfg, path)
    if not path.exists():
        raise ConfigError(f"surrogate artifact {path} not found; run 'daavm surrogate' first")
    art = json.loads(path.read_text())
    if art.get("config_hash") != data_hash(cfg) and not force:
        raise ConfigError(f"surrogate {path} was built for different model/data (hash mismatch); use --force")
    if art["kind"] == "gaussian-frequentist":
        return surrogate.freq_surrogate(art["theta"], art["fisher"]), art.get("build_ms", 0.0)
    if art["kind"] == "gp":
        em = surrogate.GPEmulator.from_dict(art["emulator"])
        return surrogate.gp_surrogate(em, prior, model, _state(kind, data)), art.get("build_ms", 0.0)
    return surrogate.flat_surrogate(), 0.0


def cmd_run(cfg, force: bool = False) -> diagnostics.Summary:
    kind = cfg["model"]["kind"]
    s = cfg.get("sampler")
    if s is None:
        raise ConfigError("sampler block is required for 'run'")
    variant = s["variant"]
    data = load_data(cfg)
    model = build_model(cfg, data)
    prior = _prior(cfg)
    x = _state(kind, data)
    iters, burnin, m = int(s["iterations"]), int(s.get("burnin", 0)), int(s.get("m", 10))
    scale = np.atleast_1d(np.asarray(s.get("scale", [0.1] * prior.dim), dtype=float))
    if scale.size == 1 and prior.dim > 1:
        scale = np.full(prior.dim, scale[0])
    cov = s.get("cov")
    proposal = ProposalSpec(scale, None if cov is None else np.asarray(cov, dtype=float))
    theta0 = s.get("theta0")
    rng = named_stream(cfg.get("seed", 0), f"chain-{int(s.get('chain', 0))}")
    common = dict(theta0=theta0, burnin=burnin, adapt=bool(s.get("adapt", True)),
                  target_accept=float(s.get("target_accept", 0.25)))
    setup_ms = 0.0
    if variant == "avm":
        tr = samplers.avm_run(model, x, prior, proposal, m, iters, rng, aux_start=s.get("aux_start", "canonical"),
                              **common)
    elif variant in ("daavm_f", "daavm_gp"):
        sur, setup_ms = _load_surrogate(cfg, kind, model, data, prior, force)
        tr = samplers.daavm_run(model, x, prior, proposal, sur, m, iters, rng, variant=variant,
                                aux_start=s.get("aux_start", "canonical"), **common)
    elif variant == "daavm_s":
        tr = samplers.daavm_s_run(model, x, prior, proposal, int(s["K"]), int(s.get("m1", m)), int(s.get("m2", m)),
                                  iters, rng, sub_aux=s.get("sub_aux", "proposal"), **common)
    elif variant == "mh_surrogate":
        sur, setup_ms = _load_surrogate(cfg, kind, model, data, prior, force)
        t0 = theta0 if theta0 is not None else prior.center()
        tr = samplers.mh_surrogate_run(sur, proposal, iters, rng, t0,
                                       prior=prior if s.get("with_prior", False) else None,
                                       burnin=burnin, adapt=common["adapt"])
    else:
        P = int(s.get("particles", 500))
        if variant == "pmcmc":
            tr = samplers.pmcmc_run(data, prior, proposal, P, iters, rng, **common)
        else:
            sur, setup_ms = _load_surrogate(cfg, kind, model, data, prior, force)
            tr = samplers.da_pmcmc_run(data, prior, proposal, sur, P, iters, rng, **common)
    tr.setup_ms = setup_ms
    tr.seed = cfg.get("seed", 0)
    tr.config_hash = samplers.config_hash(_public(cfg))
    tr.meta["config"] = _public(cfg)
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    name = s.get("name", variant)
    tr.save(out / f"trace_{name}.csv")
    summ = diagnostics.summarize(tr, burnin, coord=s.get("ess_coord"))
    summ.to_json(out / f"summary_{name}.json")
    return summ


def cmd_summarize(path, burnin: int = 0) -> diagnostics.Summary:
    tr = samplers.Trace.load(path)
    if burnin == 0:
        burnin = int(tr.meta.get("burnin", 0))
    return diagnostics.summarize(tr, burnin)


def _bench_one(args):
    path, seed, force = args
    try:
        cfg = load_config(path, seed=seed)
        return cmd_run(cfg, force=force).to_dict(), None, EXIT_OK
    except ConfigError as e:
        return None, f"{path}: {e}", EXIT_CONFIG
    except NUMERIC_ERRORS as e:
        return None, f"{path}: {type(e).__name__}: {e}", EXIT_NUMERIC


def cmd_bench(paths, seed=None, threads: int | None = None, force: bool = False):
    """Run each config (outputs go to its own ``out``); returns ``(rows, errors, exit_code)``."""
    if len(paths) < 2:
        raise ConfigError("bench needs at least two --config files")
    jobs = [(p, seed, force) for p in paths]
    workers = max(1, threads or os.cpu_count() or 1)
    if workers == 1:
        results = [_bench_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_bench_one, jobs))
    rows = [diagnostics.Summary(**r) for r, _, _ in results if r is not None]
    errors = [e for _, e, _ in results if e is not None]
    return rows, errors, max(c for _, _, c in results)


# --------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="daavm", description="Delayed-acceptance auxiliary-variable MCMC")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", action="append", default=[], metavar="PATH", help="run config (repeat)")
        else:
            p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--threads", type=int, default=None, metavar="N")
        p.add_argument("--force", action="store_true", help="overwrite outputs / accept mismatched surrogates")

    common(sub.add_parser("simulate", help="simulate a dataset"))
    common(sub.add_parser("surrogate", help="build the first-stage surrogate"))
    common(sub.add_parser("run", help="run a sampler"))
    common(sub.add_parser("bench", help="run several configs and tabulate"), multi=True)
    sp = sub.add_parser("summarize", help="summarize a trace CSV")
    sp.add_argument("trace")
    sp.add_argument("--burnin", type=int, default=0)
    sp.add_argument("--out", metavar="DIR")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if getattr(args, "threads", None):
        try:
            import numba
            numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
        except (ImportError, ValueError):
            pass
    try:
        if args.command == "summarize":
            s = cmd_summarize(args.trace, args.burnin)
            print(diagnostics.format_table([s]))
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                s.to_json(Path(args.out) / (Path(args.trace).stem + "_summary.json"))
            return EXIT_OK
        if args.command == "bench":
            rows, errors, code = cmd_bench(args.config, args.seed, args.threads, args.force)
            print(diagnostics.format_table(rows))
            for e in errors:
                print(f"error: {e}", file=sys.stderr)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "bench.json").write_text(
                    json.dumps([r.to_dict() for r in rows], indent=1, default=lambda o: None))
            return code
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        if args.command == "simulate":
            files = _data_files(cfg)
            if any(f.exists() for f in files) and not args.force:
                raise ConfigError(f"{files[0]} exists; pass --force to overwrite")
            print(json.dumps(cmd_simulate(cfg), indent=1))
        elif args.command == "surrogate":
            print(json.dumps(cmd_surrogate(cfg), indent=1))
        else:
            print(diagnostics.format_table([cmd_run(cfg, force=args.force)]))
        return EXIT_OK
    except ConfigError as e:
        for p in e.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
