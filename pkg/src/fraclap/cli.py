"""Command-line front end.

Subcommands ``green``, ``gmfpt``, ``split`` and ``validate``.  A run is described
by a :class:`RunConfig`, read from ``--config`` JSON with command-line flags
taking precedence.  Every output file carries the config hash.

Exit codes: 0 ok, 2 usage, 3 numerical regime, 4 resources.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, fdsolve
from .capture import GreensBank, build_interaction, gmfpt_full, gmfpt_two_term
from .constants import make_alpha_params
from .errors import (
    ConfigurationError,
    DomainError,
    RegimeError,
    ResolutionError,
    ResourceError,
    SingularityError,
    SolverError,
)
from .greens import CutoffSpec, field_summary, solve_r_tilde, write_field_csv
from .lattice import BoundaryKind
from .operator import SCHEMES, GridSpec, assemble
from .splitting import shield_targets, split_field, split_full, split_two_term
from .targets import Role, Target, TargetSet
from . import validate as validation

log = logging.getLogger("fraclap")

EXIT_OK, EXIT_USAGE, EXIT_REGIME, EXIT_RESOURCE = 0, 2, 3, 4
SWEEP_PARAMS = ("s", "alpha", "eps")
LAYOUTS = ("shield",)
HASH_EXCLUDE = ("output", "jobs")


@dataclass
class TargetSpec:
    """A target whose coordinates may be the sweep placeholder ``"s"``."""

    center: list
    kappa: float = 1.0
    role: str = "target"

    def resolve(self, s: Optional[float]) -> Target:
        center = []
        for v in self.center:
            if v == "s":
                if s is None:
                    raise ConfigurationError("targets: placeholder 's' used without an 's' sweep")
                center.append(s)
            else:
                center.append(float(v))
        return Target(tuple(center), float(self.kappa), Role(self.role))


@dataclass
class SweepSpec:
    param: str
    start: float
    stop: float
    step: float

    def values(self) -> list[float]:
        if self.step <= 0 or self.stop < self.start:
            raise ConfigurationError(f"sweep: need step > 0 and stop >= start, got {self.start}:{self.stop}:{self.step}")
        count = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 12) for k in range(count)]

    @classmethod
    def parse(cls, text: str, param: Optional[str] = None) -> "SweepSpec":
        if param is None:
            if "=" not in text:
                raise ConfigurationError(f"sweep: expected NAME=START:STOP:STEP, got {text!r}")
            param, text = text.split("=", 1)
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigurationError(f"sweep: expected START:STOP:STEP, got {text!r}") from None
        return cls(param.strip(), start, stop, step)


@dataclass
class RunConfig:
    boundary: str = "neumann"
    alpha: float = 0.6
    n: int = 64
    m_max: int = 6
    scheme: str = "corrected"
    r0: Optional[float] = None
    r1: Optional[float] = None
    x0: Optional[list] = None
    eps: float = 0.03
    targets: list = field(default_factory=list)
    layout: Optional[str] = None
    sweep: Optional[SweepSpec] = None
    oracle: bool = False
    oracle_n: int = 96
    separation_factor: float = 10.0
    dump_field: bool = False
    output: str = "fraclap-out"
    jobs: int = 1

    def __post_init__(self):
        self.targets = [t if isinstance(t, TargetSpec) else TargetSpec(**t) for t in self.targets]
        if isinstance(self.sweep, dict):
            self.sweep = SweepSpec(**self.sweep)
        if self.x0 is not None:
            self.x0 = [float(v) for v in self.x0]

    def validate(self) -> "RunConfig":
        def bad(name, msg):
            raise ConfigurationError(f"{name}: {msg}")

        if self.boundary not in ("periodic", "neumann"):
            bad("boundary", f"expected periodic or neumann, got {self.boundary!r}")
        try:
            make_alpha_params(self.alpha)
        except DomainError as exc:
            bad("alpha", str(exc))
        if not isinstance(self.n, int) or self.n < 4:
            bad("n", f"expected an integer >= 4, got {self.n!r}")
        if not isinstance(self.oracle_n, int) or self.oracle_n < 4:
            bad("oracle_n", f"expected an integer >= 4, got {self.oracle_n!r}")
        if not isinstance(self.m_max, int) or self.m_max < 1:
            bad("m_max", f"expected an integer >= 1, got {self.m_max!r}")
        if self.scheme not in SCHEMES:
            bad("scheme", f"expected one of {SCHEMES}, got {self.scheme!r}")
        if not 0 < self.eps < 0.5:
            bad("eps", f"expected 0 < eps < 0.5, got {self.eps}")
        if self.x0 is not None and len(self.x0) != 2:
            bad("x0", "expected two coordinates")
        if self.layout is not None and self.layout not in LAYOUTS:
            bad("layout", f"expected one of {LAYOUTS}, got {self.layout!r}")
        if self.sweep is not None:
            if self.sweep.param not in SWEEP_PARAMS:
                bad("sweep", f"parameter must be one of {SWEEP_PARAMS}, got {self.sweep.param!r}")
            self.sweep.values()
        if self.jobs < 1:
            bad("jobs", "expected at least one worker")
        for t in self.targets:
            if len(t.center) != 2:
                bad("targets", f"centre needs two coordinates, got {t.center!r}")
            if t.role not in {r.value for r in Role}:
                bad("targets", f"unknown role {t.role!r}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"{unknown[0]}: unknown config field")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in HASH_EXCLUDE}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    # --- derived objects

    def target_set(self, s: Optional[float] = None, eps: Optional[float] = None) -> TargetSet:
        eps = self.eps if eps is None else eps
        if self.layout == "shield":
            targets = shield_targets(eps)
        else:
            targets = [t.resolve(s) for t in self.targets]
        if not targets:
            raise ConfigurationError("targets: at least one target is required")
        return TargetSet(eps, targets, self.boundary, self.separation_factor)

    def cutoff(self, x0) -> CutoffSpec:
        return CutoffSpec.default(x0, r1=self.r1, r0=self.r0)


# --- output helpers -----------------------------------------------------------

def _header(cfg: RunConfig, command: str) -> list[str]:
    return [
        f"fraclap {__version__} {command}",
        f"config-hash: {cfg.config_hash()}",
        f"boundary={cfg.boundary} alpha={cfg.alpha!r} n={cfg.n} m_max={cfg.m_max} scheme={cfg.scheme} eps={cfg.eps!r}",
    ]


def write_table(path: Path, header: list[str], columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, str) else f"{v:.15g}" for v in row])


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metadata(cfg: RunConfig, command: str, issued: list[str]) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "policy": {"separation_factor": cfg.separation_factor, "eps_validity_factor": 5.0},
        "warnings": issued,
    }


def _map(cfg: RunConfig, fn, items):
    if cfg.jobs == 1:
        return [fn(v) for v in items]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(fn, items))


class _Operators:
    """Assembled operators shared across sweep points."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._ops: dict = {}
        self._banks: dict = {}

    def get(self, n: int, alpha: float):
        key = (n, alpha)
        if key not in self._ops:
            self._ops[key] = assemble(GridSpec(n), self.cfg.boundary, alpha, self.cfg.m_max, scheme=self.cfg.scheme)
        return self._ops[key]

    def bank(self, alpha: float) -> GreensBank:
        if alpha not in self._banks:
            self._banks[alpha] = GreensBank(self.get(self.cfg.n, alpha), cutoff_factory=self.cfg.cutoff)
        return self._banks[alpha]


def _points(cfg: RunConfig):
    """``(sweep value, alpha, eps, s)`` for each run point."""
    if cfg.sweep is None:
        return [(None, cfg.alpha, cfg.eps, None)]
    vals = cfg.sweep.values()
    p = cfg.sweep.param
    return [(v, v if p == "alpha" else cfg.alpha, v if p == "eps" else cfg.eps, v if p == "s" else None) for v in vals]


# --- commands -----------------------------------------------------------------

def cmd_green(cfg: RunConfig) -> dict:
    if cfg.x0 is None:
        raise ConfigurationError("x0: a source point is required for 'green'")
    out = Path(cfg.output)
    op = assemble(GridSpec(cfg.n), cfg.boundary, cfg.alpha, cfg.m_max, scheme=cfg.scheme)
    gf = solve_r_tilde(op, cfg.x0, cfg.cutoff(cfg.x0))
    header = _header(cfg, "green")
    write_field_csv(gf, out / "green_field.csv", header)
    summary = {"config_hash": cfg.config_hash(), **field_summary(gf)}
    _write_json(out / "green_summary.json", summary)
    return summary


def cmd_gmfpt(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    ops = _Operators(cfg)
    points = _points(cfg)
    for _, alpha, _, _ in points:
        ops.get(cfg.n, alpha)

    def run(point):
        value, alpha, eps, s = point
        params = make_alpha_params(alpha)
        ts = cfg.target_set(s, eps)
        im = build_interaction(ts, ops.bank(alpha), alpha)
        ubar, strengths = gmfpt_full(ts, im, params)
        row = {"value": value, "ubar": ubar, "two_term": gmfpt_two_term(ts, im, params), "s": strengths}
        if cfg.oracle:
            row["fd"] = fdsolve.solve_mfpt(ops.get(cfg.oracle_n, alpha), ts)[1]
        return row

    rows = _map(cfg, run, points)
    header = _header(cfg, "gmfpt")
    extra = ["ubar_fd"] if cfg.oracle else []
    if cfg.sweep is not None:
        cols = [cfg.sweep.param, "ubar_asymptotic", "ubar_two_term"] + extra
        table = [[r["value"], r["ubar"], r["two_term"]] + ([r["fd"]] if cfg.oracle else []) for r in rows]
        write_table(out / "gmfpt_sweep.csv", header, cols, table)
    else:
        r = rows[0]
        write_table(out / "gmfpt.csv", header, ["ubar_asymptotic", "ubar_two_term"] + extra,
                    [[r["ubar"], r["two_term"]] + ([r["fd"]] if cfg.oracle else [])])
        ts = cfg.target_set()
        write_table(out / "gmfpt_strengths.csv", header, ["index", "x1", "x2", "kappa", "s"],
                    [[str(i), *t.center, t.kappa, si] for i, (t, si) in enumerate(zip(ts.targets, r["s"]))])
    return {"rows": [{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in r.items()} for r in rows]}


def cmd_split(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    ops = _Operators(cfg)
    points = _points(cfg)
    for _, alpha, _, _ in points:
        ops.get(cfg.n, alpha)

    def run(point):
        value, alpha, eps, s = point
        params = make_alpha_params(alpha)
        ts = cfg.target_set(s, eps)
        bank = ops.bank(alpha)
        im = build_interaction(ts, bank, alpha)
        res = split_full(ts, im, params, bank.evaluator(ts))
        row = {"value": value, "alpha": alpha, "vbar": res.vbar, "two_term": split_two_term(ts, im, params),
               "s": res.s, "result": res}
        if cfg.oracle:
            row["fd_field"], row["fd"] = fdsolve.solve_split(ops.get(cfg.oracle_n, alpha), ts)
        return row

    rows = _map(cfg, run, points)
    header = _header(cfg, "split")
    extra = ["vbar_fd"] if cfg.oracle else []
    first = cfg.sweep.param if cfg.sweep is not None else "alpha"
    table = [[r["value"] if cfg.sweep is not None else r["alpha"], r["vbar"], r["two_term"]]
             + ([r["fd"]] if cfg.oracle else []) for r in rows]
    name = "split_sweep.csv" if cfg.sweep is not None else "split.csv"
    write_table(out / name, header, [first, "vbar_full", "vbar_two_term"] + extra, table)
    if cfg.dump_field:
        for r in rows:
            tag = "" if cfg.sweep is None else f"_{cfg.sweep.param}{r['value']:g}"
            nodes = GridSpec(cfg.n).nodes()
            v = split_field(r["result"], nodes)
            write_table(out / f"split_field{tag}.csv", header, ["x1", "x2", "v"], np.column_stack([nodes, v]))
            if cfg.oracle:
                fd_nodes = GridSpec(cfg.oracle_n).nodes()
                write_table(out / f"split_field_fd{tag}.csv", header, ["x1", "x2", "v"],
                            np.column_stack([fd_nodes, r["fd_field"]]))
    keep = ("value", "alpha", "vbar", "two_term", "s", "fd")
    return {"rows": [{k: (r[k].tolist() if isinstance(r[k], np.ndarray) else r[k]) for k in keep if k in r} for r in rows]}


def cmd_validate(cfg: RunConfig, perturb=None) -> dict:
    checks = validation.run_checks(BoundaryKind.parse(cfg.boundary), cfg.alpha, cfg.n, cfg.m_max, cfg.scheme,
                                   perturb=perturb)
    rep = {"config_hash": cfg.config_hash(), **validation.report(checks)}
    _write_json(Path(cfg.output) / "validate.json", rep)
    return rep


COMMANDS = {"green": cmd_green, "gmfpt": cmd_gmfpt, "split": cmd_split, "validate": cmd_validate}


# --- argument parsing ---------------------------------------------------------

def _point(text: str) -> list:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numeric X,Y, got {text!r}") from None


def _target(text: str) -> dict:
    parts = [p.strip() for p in text.split(",")]
    if not 2 <= len(parts) <= 4:
        raise argparse.ArgumentTypeError(f"expected X,Y[,KAPPA[,ROLE]], got {text!r}")
    try:
        center = [p if p == "s" else float(p) for p in parts[:2]]
        kappa = float(parts[2]) if len(parts) > 2 else 1.0
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad target {text!r}") from None
    return {"center": center, "kappa": kappa, "role": parts[3] if len(parts) > 3 else "target"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration; flags override it")
    common.add_argument("--boundary", choices=["periodic", "neumann"])
    common.add_argument("--alpha", type=float)
    common.add_argument("--n", type=int, help="grid nodes per side")
    common.add_argument("--m-max", dest="m_max", type=int, help="image truncation radius")
    common.add_argument("--scheme", choices=list(SCHEMES))
    common.add_argument("--r0", type=float, help="cutoff plateau radius")
    common.add_argument("--r1", type=float, help="cutoff support radius")
    common.add_argument("--eps", type=float, help="common target scale")
    common.add_argument("--target", dest="targets", type=_target, action="append",
                        help="X,Y[,KAPPA[,ROLE]]; X or Y may be 's' for the sweep value")
    common.add_argument("--layout", choices=list(LAYOUTS), help="generate the targets from a named layout")
    common.add_argument("--sweep", help="NAME=START:STOP:STEP with NAME in s, alpha, eps")
    common.add_argument("--alpha-sweep", help="START:STOP:STEP over alpha")
    common.add_argument("--oracle", action="store_true", default=None, help="add the finite-difference oracle")
    common.add_argument("--oracle-n", dest="oracle_n", type=int, help="oracle grid nodes per side")
    common.add_argument("--separation-factor", dest="separation_factor", type=float)
    common.add_argument("--jobs", type=int, help="worker threads for sweep points")
    common.add_argument("-o", "--output", help="output directory")
    common.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="fraclap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fraclap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    g = sub.add_parser("green", parents=[common], help="Green's function for one source point")
    g.add_argument("--x0", type=_point, help="source point X,Y")
    sub.add_parser("gmfpt", parents=[common], help="mean first passage time")
    s = sub.add_parser("split", parents=[common], help="splitting probability")
    s.add_argument("--field", dest="dump_field", action="store_true", default=None, help="dump the pointwise field")
    v = sub.add_parser("validate", parents=[common], help="run the invariant probes")
    v.add_argument("--inject-asymmetry", type=float, default=None, help=argparse.SUPPRESS)
    return parser


_OVERRIDES = ("boundary", "alpha", "n", "m_max", "scheme", "r0", "r1", "eps", "targets", "layout", "oracle",
              "oracle_n", "separation_factor", "jobs", "output", "x0", "dump_field")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config.read_text()) if args.config else RunConfig()
    updates = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k, None) is not None}
    cfg = cfg.replace(**updates)
    if args.sweep and args.alpha_sweep:
        raise ConfigurationError("sweep: give either --sweep or --alpha-sweep")
    if args.sweep:
        cfg.sweep = SweepSpec.parse(args.sweep)
    elif args.alpha_sweep:
        cfg.sweep = SweepSpec.parse(args.alpha_sweep, "alpha")
    return cfg.validate()


def _asymmetry_hook(amount: float):
    def perturb(A):
        A[0, 1] += amount * np.abs(A).max()
        return A

    return perturb


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.print_config:
            print(cfg.to_json())
            return EXIT_OK
        Path(cfg.output).mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "validate" and args.inject_asymmetry:
                result = cmd_validate(cfg, _asymmetry_hook(args.inject_asymmetry))
            else:
                result = COMMANDS[args.command](cfg)
        issued = sorted({str(w.message) for w in caught})
        for msg in issued:
            log.warning(msg)
        _write_json(Path(cfg.output) / "metadata.json", _metadata(cfg, args.command, issued))
        print(json.dumps(result, indent=2, sort_keys=True, default=float))
        if args.command == "validate" and not result["passed"]:
            failed = [c["name"] for c in result["checks"] if not c["passed"]]
            print(f"fraclap: validation failed: {', '.join(failed)}", file=sys.stderr)
            return EXIT_REGIME
        return EXIT_OK
    except (ConfigurationError, DomainError) as exc:
        print(f"fraclap: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RegimeError, ResolutionError, SolverError, SingularityError) as exc:
        print(f"fraclap: numerical error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ResourceError, MemoryError) as exc:
        print(f"fraclap: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
