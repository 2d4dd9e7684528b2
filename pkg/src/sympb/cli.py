"""Command-line front end: simulations, orbit reports, sweeps, figures.

Exit codes: 0 success, 1 error, 2 analysis refusal (preconditions of the
requested analysis do not hold, e.g. the cone check fails at the requested
dissipation rate or a symmetry-only analysis is asked of an asymmetric table).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import attractor as att
from . import periodic as per
from .errors import AnalysisRefused, BilliardError, ConfigError
from .svg import write_phase_portrait
from .table import TWO_PI, BilliardTable, TableSpec

try:
    import tomllib as _toml
except ModuleNotFoundError:  # python < 3.11
    import tomli as _toml

COMMANDS = ("simulate", "periodic", "classify", "graph", "rotation", "figure")

# built-in demonstration configurations
PRESETS = {
    "sin2": {
        "table": {"kind": "support", "harmonics": [{"k": 0, "cos": 1.0}, {"k": 2, "sin": 0.125}]},
        "lambda": 0.9,
        "n": 2000,
        "n0": 30,
        "seeds": 200,
    },
    "sin2cos3": {
        "table": {
            "kind": "support",
            "harmonics": [
                {"k": 0, "cos": 1.0},
                {"k": 2, "sin": 0.125},
                {"k": 3, "cos": 1.0 / 27.0},
            ],
        },
        "lambda": 0.71,
        "n": 2000,
        "n0": 10,
        "seeds": 200,
    },
    "flatcos2": {
        "table": {"kind": "polar", "harmonics": [{"k": 0, "cos": 1.0}, {"k": 2, "cos": -0.2}]},
        "lambda": 0.71,
        "n": 2000,
        "n0": 10,
        "seeds": 200,
    },
}


@dataclass
class RunConfig:
    table: dict | str | None = None
    lam: float | None = None
    sweep: tuple | None = None  # (start, stop, steps)
    seeds: int = 200
    rng_seed: int = 0
    n: int = 2000
    n0: int | None = None
    commands: list = field(default_factory=list)
    out: str = "."

    def resolved_n0(self):
        if self.n0 is not None:
            return self.n0
        lam = self.lam if self.lam is not None else 1.0
        return 30 if lam >= 0.7 else 10

    def to_dict(self):
        d = {
            "seeds": self.seeds,
            "rng_seed": self.rng_seed,
            "n": self.n,
            "out": self.out,
        }
        if self.table is not None:
            d["table"] = self.table
        if self.lam is not None:
            d["lambda"] = self.lam
        if self.sweep is not None:
            d["lambda_sweep"] = list(self.sweep)
        if self.n0 is not None:
            d["n0"] = self.n0
        if self.commands:
            d["commands"] = list(self.commands)
        return d

    @staticmethod
    def from_dict(d):
        cfg = RunConfig()
        if "table" in d:
            cfg.table = d["table"]
        if "lambda" in d:
            cfg.lam = float(d["lambda"])
        if "lambda_sweep" in d:
            cfg.sweep = tuple(d["lambda_sweep"])
        cfg.seeds = int(d.get("seeds", cfg.seeds))
        cfg.rng_seed = int(d.get("rng_seed", cfg.rng_seed))
        cfg.n = int(d.get("n", cfg.n))
        if "n0" in d:
            cfg.n0 = int(d["n0"])
        cfg.commands = list(d.get("commands", []))
        cfg.out = d.get("out", cfg.out)
        cfg.validate()
        return cfg

    def validate(self):
        if self.lam is not None and not (0.0 < self.lam <= 1.0):
            raise ConfigError(f"lambda must be in (0, 1], got {self.lam}")
        if self.seeds < 1:
            raise ConfigError("seed count must be >= 1")
        n0 = self.n0 if self.n0 is not None else 0
        if not (self.n > n0 >= 0):
            raise ConfigError(f"need n > n0 >= 0, got n={self.n}, n0={n0}")
        for c in self.commands:
            if c not in COMMANDS:
                raise ConfigError(f"unknown command {c!r}")


def load_config_file(path):
    with open(path, "rb") as fh:
        if path.endswith(".toml"):
            return _toml.load(fh)
        return json.load(fh)


def _build_table(cfg):
    if cfg.table is None:
        raise ConfigError("no table given (use --table or a config file)")
    if isinstance(cfg.table, dict):
        spec = TableSpec.from_dict(cfg.table)
    else:
        with open(cfg.table, "r", encoding="utf8") as fh:
            spec = TableSpec.from_dict(json.load(fh))
    return BilliardTable(spec)


def draw_seeds(count, rng_seed):
    """Uniform plot-chart seeds away from the chart boundary (deterministic)."""
    rng = np.random.default_rng(rng_seed)
    theta = rng.uniform(0.0, TWO_PI, count)
    psi = rng.uniform(0.05, math.pi - 0.05, count)
    return np.stack([theta, psi], axis=-1)


def _worker_count():
    env = os.environ.get("SYMPB_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _iterate_cloud(table, lam, seeds, n, n0):
    workers = _worker_count()
    if workers <= 1 or seeds.shape[0] < 2 * workers:
        return att.iterate_cloud(table, lam, seeds, n, n0)
    chunks = np.array_split(np.arange(seeds.shape[0]), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(lambda idx: att.iterate_cloud(table, lam, seeds[idx], n, n0), chunks)
        )
    # merge, restoring global seed ids; per-seed results do not depend on chunking
    ref = parts[0]
    offsets = np.cumsum([0] + [c.size for c in chunks[:-1]])
    return att.AttractorCloud(
        lam=ref.lam,
        n=ref.n,
        n0=ref.n0,
        theta=np.concatenate([p.theta for p in parts]),
        psi=np.concatenate([p.psi for p in parts]),
        s=np.concatenate([p.s for p in parts]),
        lift=np.concatenate([p.lift for p in parts]),
        seed_id=np.concatenate([p.seed_id + off for p, off in zip(parts, offsets)]),
        iterate_index=np.concatenate([p.iterate_index for p in parts]),
        lifts=np.concatenate([p.lifts for p in parts], axis=0),
        terminated=np.concatenate([p.terminated for p in parts]),
        seeds=seeds,
        table=ref.table,
        table_id=ref.table_id,
    )


def _warn_origin(table, lam):
    if lam is not None and lam < 1.0:
        compatible = table.centrally_symmetric and np.allclose(
            table.origin, table.symmetry_center, atol=1e-9
        )
        if not compatible:
            print(
                "warning: origin not verified compatible; dissipative dynamics "
                "depends on the origin choice",
                file=sys.stderr,
            )


def cmd_simulate(cfg, tag="simulate"):
    table = _build_table(cfg)
    if cfg.lam is None:
        raise ConfigError("simulate needs --lambda")
    _warn_origin(table, cfg.lam)
    seeds = draw_seeds(cfg.seeds, cfg.rng_seed)
    cloud = _iterate_cloud(table, cfg.lam, seeds, cfg.n, cfg.resolved_n0())
    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, f"{tag}_cloud.csv")
    svg_path = os.path.join(cfg.out, f"{tag}_phase.svg")
    att.cloud_to_csv(cloud, csv_path)
    psi0 = seeds[cloud.seed_id, 1]
    write_phase_portrait(
        svg_path,
        cloud.theta,
        cloud.psi,
        psi0,
        title=f"lambda={cfg.lam:g}  n={cfg.n}  n0={cfg.resolved_n0()}  seeds={cfg.seeds}",
    )
    print(csv_path)
    print(svg_path)
    return 0


def _orbits_or_refuse(table):
    if not table.centrally_symmetric:
        raise AnalysisRefused("periodic analysis needs a centrally symmetric table")
    found = per.find_four_periodic(table)
    return found


def orbit_record(table, orbit, lam):
    report = per.classify_orbit(table, lam, orbit)
    return {
        "theta1": orbit.theta1,
        "theta2": orbit.theta2,
        "k12": report.k12,
        "lambda": lam,
        "type": report.orbit_type,
        "mu": [[m.real, m.imag] for m in report.mu],
    }


def cmd_periodic(cfg):
    table = _build_table(cfg)
    found = _orbits_or_refuse(table)
    lam = cfg.lam if cfg.lam is not None else 0.5
    if isinstance(found, per.RadonFamily):
        payload = {"radon_family": True, "max_residual": found.max_residual}
    else:
        payload = {"radon_family": False, "orbits": [orbit_record(table, o, lam) for o in found]}
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "orbits.json")
    with open(path, "w", encoding="utf8") as fh:
        json.dump(payload, fh, indent=2)
    print(path)
    return 0


def cmd_classify(cfg):
    table = _build_table(cfg)
    found = _orbits_or_refuse(table)
    if isinstance(found, per.RadonFamily):
        raise AnalysisRefused("table carries a continuum of 4-periodic orbits")
    if cfg.sweep is not None:
        start, stop, steps = cfg.sweep
        lams = np.linspace(float(start), float(stop), int(steps))
    elif cfg.lam is not None:
        lams = [cfg.lam]
    else:
        raise ConfigError("classify needs --lambda or --lambda-sweep")
    rows = [orbit_record(table, o, float(lam)) for o in found for lam in lams]
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "classify.json")
    with open(path, "w", encoding="utf8") as fh:
        json.dump(rows, fh, indent=2)
    print(path)
    return 0


def cmd_graph(cfg):
    table = _build_table(cfg)
    if cfg.lam is None:
        raise ConfigError("graph needs --lambda")
    graph = att.graph_transform_fixed_point(table, cfg.lam)  # NotContracted -> exit 2
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "graph.csv")
    att.graph_to_csv(graph, path)
    print(path)
    return 0


def cmd_rotation(cfg):
    table = _build_table(cfg)
    if cfg.lam is None:
        raise ConfigError("rotation needs --lambda")
    _warn_origin(table, cfg.lam)
    seeds = draw_seeds(cfg.seeds, cfg.rng_seed)
    cloud = _iterate_cloud(table, cfg.lam, seeds, cfg.n, cfg.resolved_n0())
    interval = att.rotation_interval(cloud)
    witness = att.non_graph_witness(cloud, math.pi / 256, 0.1)
    payload = {
        "lambda": cfg.lam,
        "rho_minus": interval.rho_minus,
        "rho_plus": interval.rho_plus,
        "n_used": interval.n_used,
        "per_seed": [float(x) for x in interval.per_seed],
    }
    if witness is not None:
        payload["non_graph_witness"] = list(witness)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "rotation.json")
    with open(path, "w", encoding="utf8") as fh:
        json.dump(payload, fh, indent=2)
    print(path)
    return 0


def cmd_figure(cfg, preset, overrides=()):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    sub = RunConfig.from_dict(dict(PRESETS[preset]))
    sub.rng_seed = cfg.rng_seed
    sub.out = cfg.out
    for name in overrides:
        setattr(sub, name, getattr(cfg, name))
    sub.validate()
    return cmd_simulate(sub, tag=preset)


def _parse_sweep(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("sweep must be start:stop:steps")
    return float(parts[0]), float(parts[1]), int(parts[2])


def build_parser():
    parser = argparse.ArgumentParser(prog="sympb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("run",):
        p = sub.add_parser(name)
        p.add_argument("--table", help="table spec JSON file")
        p.add_argument("--config", help="run config file (JSON or TOML)")
        p.add_argument("--lambda", dest="lam", type=float, help="dissipation rate in (0, 1]")
        p.add_argument("--lambda-sweep", dest="sweep", help="start:stop:steps")
        p.add_argument("--seeds", type=int, help="number of random seeds")
        p.add_argument("--rng-seed", type=int, help="RNG seed (default 0)")
        p.add_argument("--n", type=int, help="iterations per seed")
        p.add_argument("--n0", type=int, help="transient cutoff")
        p.add_argument("--out", help="output directory")
        if name == "figure":
            p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    return parser


def config_from_args(args):
    base = {}
    if args.config:
        base = load_config_file(args.config)
    cfg = RunConfig.from_dict(base)
    if args.table is not None:
        cfg.table = args.table
    if args.lam is not None:
        cfg.lam = args.lam
    if args.sweep is not None:
        cfg.sweep = _parse_sweep(args.sweep)
    if args.seeds is not None:
        cfg.seeds = args.seeds
    if getattr(args, "rng_seed", None) is not None:
        cfg.rng_seed = args.rng_seed
    if args.n is not None:
        cfg.n = args.n
    if args.n0 is not None:
        cfg.n0 = args.n0
    if args.out is not None:
        cfg.out = args.out
    cfg.validate()
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "periodic":
            return cmd_periodic(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "graph":
            return cmd_graph(cfg)
        if args.command == "rotation":
            return cmd_rotation(cfg)
        if args.command == "figure":
            overrides = [
                name
                for name, flag in (("lam", args.lam), ("seeds", args.seeds), ("n", args.n), ("n0", args.n0))
                if flag is not None
            ]
            return cmd_figure(cfg, args.preset, overrides)
        if args.command == "run":
            if not cfg.commands:
                raise ConfigError("run needs a config file with a 'commands' list")
            for command in cfg.commands:
                code = {
                    "simulate": cmd_simulate,
                    "periodic": cmd_periodic,
                    "classify": cmd_classify,
                    "graph": cmd_graph,
                    "rotation": cmd_rotation,
                }[command](cfg)
                if code != 0:
                    return code
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except AnalysisRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (BilliardError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
