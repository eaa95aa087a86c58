"""Command-line entry point: ad-hoc subcommands and config-driven recipes."""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ResourceCapError
from .recipes import REGISTRY, Context, Table, list_recipes

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3
POWER = re.compile(r"^\s*(-?\d+(?:\.\d*)?)\s*\^\s*(-?\d+)\s*$")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration

def parse_scalar(raw: str, like):
    raw = raw.strip()
    if isinstance(like, bool):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        m = POWER.match(raw)
        return float(m.group(1)) ** int(m.group(2)) if m else float(raw)
    return raw


def coerce(key: str, raw: str, default):
    try:
        if isinstance(default, tuple):
            like = default[0] if default else 0.0
            return tuple(parse_scalar(x, like) for x in raw.split(",") if x.strip())
        return parse_scalar(raw, default)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


@dataclass
class ExperimentConfig:
    recipe: str
    params: dict
    seed: int = 0
    out: Path = Path("out")
    threads: int = 1
    raw: dict = field(default_factory=dict)


def read_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        out[key] = val
    return out


def build_config(raw: dict[str, str], seed=None, out=None, threads=None) -> ExperimentConfig:
    raw = dict(raw)
    name = raw.pop("recipe", None)
    if name is None:
        raise ConfigError("missing key 'recipe'")
    if name not in REGISTRY:
        raise ConfigError(f"unknown recipe {name!r}; see `list`")
    cfg_seed = int(raw.pop("seed", 0))
    defaults = REGISTRY[name].defaults
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {', '.join(unknown)}")
    params = dict(defaults)
    for k, v in raw.items():
        params[k] = coerce(k, v, defaults[k])
    return ExperimentConfig(name, params, cfg_seed if seed is None else seed,
                            Path(out) if out else Path("out"), threads or 1, raw)


# --------------------------------------------------------------------------
# output

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def table_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.header)
    for row in t.rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def jsonable(x):
    if isinstance(x, dict):
        return {k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class Report:
    recipe: str
    params: dict
    verdicts: list
    tables: dict
    elapsed_seconds: float

    @property
    def passed(self) -> bool:
        return all(v["pass"] for v in self.verdicts)

    def as_dict(self) -> dict:
        return jsonable({"recipe": self.recipe, "params": self.params, "verdicts": self.verdicts,
                         "tables": sorted(self.tables), "elapsed_seconds": self.elapsed_seconds})


def run(config: ExperimentConfig, write: bool = True) -> Report:
    rec = REGISTRY[config.recipe]
    t0 = time.perf_counter()
    try:
        tables, verdicts = rec.fn(config.params, Context(config.seed, config.threads))
    except ResourceCapError as exc:
        raise type(exc)(f"{config.recipe}: {exc}") from exc
    elapsed = time.perf_counter() - t0
    files = {f"{name}.csv": table_csv(t) for name, t in tables.items()}
    params = dict(config.params, seed=config.seed)
    report = Report(config.recipe, params, [v.as_dict() for v in verdicts], files, elapsed)
    if write:
        config.out.mkdir(parents=True, exist_ok=True)
        for name, body in files.items():
            (config.out / name).write_text(body)
        (config.out / "report.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    return report


# --------------------------------------------------------------------------
# subcommands

def _floats(text: str) -> list[float]:
    return [parse_scalar(x, 0.0) for x in text.split(",") if x.strip()]


def cmd_list(args) -> int:
    for name, desc, params, claim in list_recipes():
        print(f"{name}\n  {desc}\n  claim: {claim}\n  params: {', '.join(params)}")
    return EXIT_PASS


def cmd_run(args) -> int:
    cfg = build_config(read_config_text(Path(args.config).read_text()), args.seed, args.out, args.threads)
    if args.dry_run:
        print(f"config ok: recipe {cfg.recipe}, {len(cfg.params)} parameters")
        return EXIT_PASS
    report = run(cfg)
    for v in report.verdicts:
        print(f"{'PASS' if v['pass'] else 'FAIL'} {v['name']} = {v['value']!r} (tolerance {v['tolerance']})")
    print(f"wrote {cfg.out / 'report.json'}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_generate(args) -> int:
    from .geometry import PointCloud, four_corner_cantor, generate_ifs_cloud, middle_third_cantor, write_cloud_csv
    from .rng import stream

    if args.kind == "cantor":
        cloud = generate_ifs_cloud(middle_third_cantor(), args.depth)
    elif args.kind == "four-corner":
        cloud = generate_ifs_cloud(four_corner_cantor(), args.depth)
    else:
        cloud = PointCloud(stream(args.seed, "generate").random((args.n, args.dim)))
    if args.dry_run:
        return EXIT_PASS
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "cloud.csv"
    write_cloud_csv(cloud, path)
    print(path)
    return EXIT_PASS


def cmd_dimension(args) -> int:
    from .geometry import read_cloud_csv
    from .measures import (DiscreteMeasure, ScaleSeries, ball_average, box_count_series, box_dimension,
                           frostman_exponent)

    cloud = read_cloud_csv(args.cloud)
    scales = _floats(args.scales)
    if args.dry_run:
        return EXIT_PASS
    m = DiscreteMeasure.uniform(cloud)
    if args.method == "box":
        series = box_count_series(cloud, scales)
        value = box_dimension(series)
    elif args.method == "frostman":
        value = frostman_exponent(m, scales)
        series = None
    else:
        R = sorted(scales)
        est = [ball_average(m, r, args.samples, args.seed, args.threads) for r in R]
        # stored by decreasing 1/R so the series is keyed like the box counts
        series = ScaleSeries([1 / r for r in R], [e.value for e in est], [e.stderr for e in est])
        from .measures import loglog_slope
        value = m.dim - loglog_slope(R, [e.value for e in est])
    if series is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        series.to_csv(args.out / "series.csv")
    print(json.dumps({"method": args.method, "dimension": value}))
    return EXIT_PASS


def cmd_bounds(args) -> int:
    from .recipes import REGISTRY as R

    params = dict(R["bounds-table"].defaults, n=args.n, k=args.k, s_start=args.s_start, s_stop=args.s_stop,
                  s_step=args.s_step, spot_s=(), spot_values=())
    if args.dry_run:
        return EXIT_PASS
    tables, _ = R["bounds-table"].fn(params, Context(args.seed, args.threads))
    sys.stdout.write(table_csv(tables["bounds"]))
    return EXIT_PASS


def cmd_energy(args) -> int:
    from .energy import chain_ratio, energy_rhs, group_energy, haar_energy
    from .geometry import haar_orthogonal, read_cloud_csv
    from .measures import DiscreteMeasure
    from .rng import stream

    m = DiscreteMeasure.uniform(read_cloud_csv(args.cloud))
    if args.dry_run:
        return EXIT_PASS
    E = haar_energy(m, args.k, args.delta, args.g_samples, args.seed, threads=args.threads)
    mats = haar_orthogonal(stream(args.seed, "energy-cli"), m.dim, args.g_samples)
    rhs = [energy_rhs(m, a, args.k, args.delta) for a in mats]
    holds = all(group_energy(m, a, args.k, args.delta).value <= r + 1e-12 for a, r in zip(mats, rhs))
    out = {"E": E.value, "E_stderr": E.stderr, "rhs": float(np.mean(rhs)), "lemma52_holds": holds,
           "chain_ratio": chain_ratio(m, args.k, args.delta, args.g_samples, args.seed, args.threads)}
    print(json.dumps(out))
    return EXIT_PASS if holds else EXIT_FAIL


def cmd_incidence(args) -> int:
    from .geometry import PointCloud
    from .incidence import (build_pair_tubes, bush, fit_richness_exponent, random_family, rich_profile, union_volume,
                            verify_bound)
    from .incidence.tubes import IncidenceError
    from .recipes import _profile_table
    from .rng import stream

    d = args.delta
    if args.config == "bush3d":
        fam = bush(3, d)
    elif args.config == "bush2d":
        fam = bush(2, d, count=args.L)
    elif args.config == "random3d":
        fam = random_family(3, d, args.L or 4096, seed=args.seed)
    else:
        rng = stream(args.seed, "pairs")
        m = args.L or 8
        F1 = PointCloud(rng.random((m, 2)) * 0.4)
        F2 = PointCloud(rng.random((m, 2)) * 0.4 + [1.0, 0.0])
        fam = build_pair_tubes(F1, F2, d)
    bound = args.bound or ("weak" if fam.dim == 3 else "cordoba")
    if args.dry_run:
        return EXIT_PASS
    prof = rich_profile(fam, args.cell or d / 2, threads=args.threads)
    max_ratio, _ = verify_bound(prof, bound, d)
    try:
        slope = fit_richness_exponent(prof)
    except IncidenceError:
        slope = None
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "profile.csv").write_text(table_csv(_profile_table(prof, bound, d)))
    vol = union_volume(fam, inflate=args.inflate, threads=args.threads)
    print(json.dumps({"L": len(fam), "delta": d, "fitted_exponent": slope, "max_ratio": max_ratio,
                      "union_volume": vol, "inflate": args.inflate}))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--dry-run", action="store_true")

    ap = argparse.ArgumentParser(prog="falconerlab", parents=[common],
                                 description="Numerical experiments on configuration sets, energies and tube incidences.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("list", parents=[common], help="list recipes").set_defaults(fn=cmd_list)

    p = sub.add_parser("run", parents=[common], help="run a recipe from a key = value config")
    p.add_argument("config")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("generate", parents=[common], help="write a point cloud CSV")
    p.add_argument("kind", choices=["cantor", "four-corner", "random"])
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--dim", type=int, default=2)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("dimension", parents=[common], help="box / Frostman / L2 dimension of a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--method", choices=["box", "frostman", "l2"], default="box")
    p.add_argument("--scales", required=True, help="comma list: cell sizes, probe radii or frequencies R")
    p.add_argument("--samples", type=int, default=50_000)
    p.set_defaults(fn=cmd_dimension)

    p = sub.add_parser("bounds", parents=[common], help="configuration dimension bounds as CSV")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--s-start", type=float, default=0.1)
    p.add_argument("--s-stop", type=float, default=2.0)
    p.add_argument("--s-step", type=float, default=0.1)
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("energy", parents=[common], help="group energy diagnostics of a cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--delta", type=lambda s: parse_scalar(s, 0.0), default=0.1)
    p.add_argument("--g-samples", type=int, default=32)
    p.set_defaults(fn=cmd_energy)

    p = sub.add_parser("incidence", parents=[common], help="richness profile of a tube arrangement")
    p.add_argument("--config", choices=["bush3d", "bush2d", "random3d", "pairs"], default="bush3d")
    p.add_argument("--delta", type=lambda s: parse_scalar(s, 0.0), default=2.0**-6)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--cell", type=lambda s: parse_scalar(s, 0.0), default=None)
    p.add_argument("--inflate", type=float, default=3.0)
    p.add_argument("--bound", choices=["weak", "guess", "szt", "cordoba", "weak_planar"], default=None)
    p.set_defaults(fn=cmd_incidence)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.out is None:
        args.out = Path("out")
    seed = args.seed
    if args.command != "run":
        args.seed = 0 if seed is None else seed
    try:
        return args.fn(args)
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
