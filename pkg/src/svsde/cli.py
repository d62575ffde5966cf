"""Command-line entry point: ``svsde <command> [options]``.

Commands read a JSON config (``--config``); ``--seed`` overrides the config
seed. Every run writes ``manifest.json`` into ``--out`` with the resolved
config, its hash, the seed, library versions and output checksums. A manifest
can itself be passed as ``--config`` to repeat the run.

Exit codes: 0 ok, 2 usage or config error, 3 data validation error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys

import numpy as np

from . import __version__
from ._jit import JIT_DISABLED
from .data_io import load_trajectories, save_trajectories, from_simulation
from .errors import ArgumentError, DomainError, NumericError, ParseError, ValidationError
from .geometry import NestGeometry, four_chamber_nest
from .params import ModelParams
from .presets import get_preset
from .sde import SimConfig, SimState, first_passage, simulate_individuals
from .surfaces import WallField, surface_from_spec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST_VERSION = 1


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# config and manifest helpers
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if "manifest_version" in cfg:
        cfg = cfg["config"]
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions() -> dict:
    import numba
    import scipy
    return {"svsde": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def write_manifest(out, command: str, cfg: dict, seed, outputs, extra=None, threads=None):
    man = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "seed": seed,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "versions": _versions(),
        "jit_disabled": JIT_DISABLED,
        "threads": threads,
        "outputs": {os.path.basename(p): _file_hash(p) for p in outputs},
    }
    if extra:
        man.update(extra)
    path = os.path.join(out, "manifest.json")
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, default=_json_default)
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float):
        return repr(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _seed(args, cfg, default=0) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", default)
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {seed!r}") from None
    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    cfg["seed"] = seed
    return seed


def _geometry(spec):
    if spec is None:
        return None
    if spec == "four_chamber":
        return four_chamber_nest()
    if isinstance(spec, dict):
        return NestGeometry.from_dict(spec)
    return NestGeometry.load(spec)


def _sim_from_config(cfg: dict, seed: int):
    """(SimConfig, ModelParams, n_individuals) from a preset name or explicit fields."""
    if "preset" in cfg:
        kw = {k: cfg[k] for k in ("n_obs", "n_individuals") if k in cfg}
        pre = get_preset(cfg["preset"], seed=seed, **kw)
        sim, params, n = pre.config, pre.params, pre.n_individuals
        if "params" in cfg:
            params = params.replace(**cfg["params"])
        if "n_individuals" in cfg:
            n = int(cfg["n_individuals"])
        if "n_steps" in cfg:
            sim = sim.replace(n_steps=int(cfg["n_steps"]))
        return sim, params, n
    try:
        geo = _geometry(cfg.get("geometry"))
        wall = cfg.get("wall")
        if wall is not None:
            wall = WallField(tuple(wall["bounds"]), float(wall.get("decay", 1.0)))
        init = cfg.get("initial", [0.0, 0.0, 0.0, 0.0])
        sim = SimConfig(
            delta=float(cfg["delta"]), n_steps=int(cfg["n_steps"]), initial=SimState(*init),
            seed=seed, potential=surface_from_spec(cfg.get("potential", {"kind": "zero"})),
            motility=surface_from_spec(cfg.get("motility", {"kind": "constant", "value": 1.0})),
            wall=wall, truncate_walls=bool(cfg.get("truncate_walls", False)), geometry=geo)
    except KeyError as exc:
        raise ConfigError(f"config lacks required key {exc}") from None
    params = ModelParams.from_dict(cfg.get("params", {}))
    return sim, params, int(cfg.get("n_individuals", 1))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    sim, params, n = _sim_from_config(cfg, seed)
    paths = simulate_individuals(sim, params, n)
    data = from_simulation(paths, sim.delta)
    out = os.path.join(args.out, "trajectories.csv")
    save_trajectories(out, data, with_velocity=True)
    write_manifest(args.out, "simulate", cfg, seed, [out], threads=args.threads)
    return EXIT_OK


def _load_data(path, cfg, geometry):
    opts = cfg.get("data", {})
    try:
        data = load_trajectories(path, geometry, delta=float(opts.get("delta", 1.0)),
                                 max_gap=int(opts.get("max_gap", 5)),
                                 min_length=int(opts.get("min_length", 3)),
                                 clamp_tol=float(opts.get("clamp_tol", 1.0)))
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}") from None
    except (ParseError, ValidationError) as exc:
        raise DataError(str(exc)) from None
    if data.n_observations == 0:
        raise DataError("no usable observations after ingestion")
    return data


def _chain_config(cfg: dict, seed: int):
    from .inference import ChainConfig
    fit = dict(cfg.get("fit", {}))
    fit["seed"] = seed
    return ChainConfig.from_dict(fit)


def cmd_fit(args) -> int:
    from .inference import run_chain
    from .analysis import write_summary
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    if args.variant is not None:
        cfg.setdefault("fit", {})["variant"] = args.variant
    chain_cfg = _chain_config(cfg, seed)
    geometry = None
    if args.geometry is not None:
        try:
            geometry = _geometry(args.geometry)
        except (ParseError, ValidationError, FileNotFoundError) as exc:
            raise DataError(f"geometry: {exc}") from None
    data_path = args.data or cfg.get("data", {}).get("path")
    if data_path is None:
        raise ConfigError("no data file given (--data or data.path)")
    data = _load_data(data_path, cfg, geometry)
    os.makedirs(args.out, exist_ok=True)
    report = os.path.join(args.out, "ingest_report.json")
    data.report.write_json(report)
    outputs = [report]
    extra = {"ingest": data.report.to_dict()}
    if chain_cfg.iterations > 0:
        chain = run_chain(data, chain_cfg)
        chain.save(args.out)
        outputs += [os.path.join(args.out, f) for f in
                    ("scalars.csv", "gamma.csv", "alpha.csv", "chain.json")]
        extra["acceptance"] = chain.acceptance
        if len(chain):
            summ = os.path.join(args.out, "summary.json")
            rows = write_summary(summ, chain)
            outputs.append(summ)
            extra["mcse"] = {r["parameter"]: r["mcse"] for r in rows}
    write_manifest(args.out, "fit", cfg, seed, outputs, extra, threads=args.threads)
    return EXIT_OK


def _grid(spec, name):
    try:
        lo, hi, n = spec
        return np.linspace(float(lo), float(hi), int(n))
    except (TypeError, ValueError):
        raise ConfigError(f"grid.{name} must be [lo, hi, n]") from None


def cmd_surfaces(args) -> int:
    from .analysis import posterior_surfaces
    from .inference import PosteriorChain
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    chain = _load_chain(args.chain or cfg.get("chain"), PosteriorChain)
    grid = cfg.get("grid")
    if grid is None:
        (x0, x1), (y0, y1) = chain.basis_x.domain, chain.basis_y.domain
        grid = {"x": [x0, x1, 41], "y": [y0, y1, 41]}
    xs, ys = _grid(grid.get("x"), "x"), _grid(grid.get("y"), "y")
    summ = posterior_surfaces(chain, xs, ys)
    outs = []
    for which in ("potential", "motility"):
        p = os.path.join(args.out, f"{which}.csv")
        summ.write_csv(p, which)
        outs.append(p)
    write_manifest(args.out, "surfaces", cfg, seed, outs, threads=args.threads)
    return EXIT_OK


def _load_chain(path, cls):
    if path is None:
        raise ConfigError("no chain directory given (--chain)")
    try:
        return cls.load(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"chain output not found: {exc.filename}") from None


def cmd_predict(args) -> int:
    from .analysis import one_step_error
    from .inference import PosteriorChain
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    chains = args.chain or cfg.get("chains") or []
    if isinstance(chains, str):
        chains = [chains]
    if not chains:
        raise ConfigError("no chain directory given (--chain)")
    rows = []
    for path in chains:
        ch = _load_chain(path, PosteriorChain)
        rows.append({"chain": path, "variant": ch.variant, "mean_error": one_step_error(ch)})
    out = os.path.join(args.out, "prediction_error.json")
    with open(out, "w") as fh:
        json.dump(rows, fh, indent=2)
    write_manifest(args.out, "predict", cfg, seed, [out], threads=args.threads)
    return EXIT_OK


def cmd_spread(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    if "delta" not in cfg:
        cfg.setdefault("preset", "spread")
    sim, params, n = _sim_from_config(cfg, seed)
    geo = sim.geometry if sim.geometry is not None else _geometry(cfg.get("geometry"))
    if geo is None:
        raise ConfigError("spread needs a geometry")
    n = int(cfg.get("n_agents", n))
    start = cfg.get("start")
    if isinstance(start, str):
        names = geo.section_names
        if start not in names:
            raise ConfigError(f"unknown start section {start!r}")
        x0, x1, y0, y1 = geo.sections[names.index(start)][1]
        start = ((x0 + x1) / 2, (y0 + y1) / 2)
    res = first_passage(geo, sim, params, n, start=start)
    out = os.path.join(args.out, "first_passage.csv")
    with open(out, "w") as fh:
        fh.write("agent,section,entry_time\n")
        for a, name, t in res.rows():
            fh.write(f"{a},{name},{'inf' if not np.isfinite(t) else repr(float(t))}\n")
    med = os.path.join(args.out, "medians.json")
    with open(med, "w") as fh:
        json.dump({k: (v if np.isfinite(v) else None) for k, v in res.medians().items()}, fh,
                  indent=2)
    write_manifest(args.out, "spread", cfg, seed, [out, med], threads=args.threads)
    return EXIT_OK


def cmd_thin(args) -> int:
    from .analysis import thinning_study, write_table
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    if "delta" not in cfg:
        cfg.setdefault("preset", "thinning")
    sim, params, n = _sim_from_config(cfg, seed)
    factors = cfg.get("factors", [1, 5, 10])
    chain_cfg = _chain_config(cfg, seed)
    rows = thinning_study(sim, params, n, factors, chain_cfg)
    out = os.path.join(args.out, "thinning.csv")
    write_table(out, rows)
    write_manifest(args.out, "thin", cfg, seed, [out], threads=args.threads)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "surfaces": cmd_surfaces,
            "predict": cmd_predict, "spread": cmd_spread, "thin": cmd_thin}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (or a previous manifest)")
    common.add_argument("--seed", type=int, help="master seed; overrides the config")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads (recorded; sampling is sequential)")
    ap = argparse.ArgumentParser(prog="svsde", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"svsde {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate trajectories")
    p = sub.add_parser("fit", parents=[common], help="run the posterior sampler")
    p.add_argument("--data", help="trajectory CSV (id,t,x,y)")
    p.add_argument("--geometry", help="nest geometry JSON")
    p.add_argument("--variant", choices=["full", "h0", "m1", "H0", "M1"])
    p = sub.add_parser("surfaces", parents=[common], help="posterior surface grids")
    p.add_argument("--chain", help="directory written by fit")
    p = sub.add_parser("predict", parents=[common], help="one-step prediction error")
    p.add_argument("--chain", action="append", help="fit directory (repeatable)")
    sub.add_parser("spread", parents=[common], help="first-passage spread simulation")
    sub.add_parser("thin", parents=[common], help="thinning study")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("svsde: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args)
    except (ConfigError, ArgumentError, DomainError) as exc:
        print(f"svsde: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ParseError, ValidationError) as exc:
        print(f"svsde: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"svsde: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
