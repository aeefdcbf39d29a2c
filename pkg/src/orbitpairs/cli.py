"""Command line front end: ``orbitpairs {validate,census,thermo,report,clt}``.

Exit status: 0 success, 2 bad configuration or input, 3 resource budget
exceeded, 4 numerical failure.  Failures print one JSON line
``{"error": <kind>, "message": <text>}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .asymptotics import DEFAULT_BOXES, clt_table, convergence_report, format_clt_table
from .census import (
    DEFAULT_BUDGET,
    atomic_write,
    count_orbits,
    enumerate_prime_orbits,
    format_orbit_table,
    ingest_orbit_table,
)
from .errors import DomainError, NumericError, OrbitPairsError, ResourceError
from .homology_model import HomologyClass, load_model, validate_model
from .thermo import ThermoSummary, summarize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4

SUBCOMMANDS = ("validate", "census", "thermo", "report", "clt")


@dataclass
class RunConfig:
    command: str
    model: Path | None = None
    orbits: Path | None = None
    summary: Path | None = None
    tmax: float | None = None
    tgrid: list[float] = field(default_factory=list)
    betas: list[tuple[int, ...]] = field(default_factory=list)
    alphas: list[tuple[int, ...]] = field(default_factory=list)
    boxes: dict = field(default_factory=dict)
    delta: float | None = None
    workers: int = 1
    out: Path = Path(".")
    seed: int = 0
    budget: int = DEFAULT_BUDGET

    def check(self):
        if self.command not in SUBCOMMANDS:
            raise DomainError(f"unknown subcommand {self.command!r}")
        if self.workers < 1:
            raise DomainError("--workers must be >= 1")
        if self.budget < 1:
            raise DomainError("--budget must be >= 1")
        if self.tmax is not None and not self.tmax > 0:
            raise DomainError("--tmax must be positive")
        if self.tmax is not None and any(not 0 < t <= self.tmax for t in self.tgrid):
            raise DomainError("T grid must lie in (0, T_max]")
        if self.delta is not None and not self.delta > 0:
            raise DomainError("--delta must be positive")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma separated list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise DomainError(f"T grid must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise DomainError(f"bad T grid {spec!r}")
        n = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(n + 1)]
    return [float(p) for p in spec.split(",") if p.strip()]


def parse_vector(spec: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in spec.split(","))
    except ValueError:
        raise DomainError(f"bad integer vector {spec!r}") from None


def parse_box(spec: str):
    """``lo:hi`` per coordinate, coordinates separated by commas (``inf`` allowed)."""
    lo, hi = [], []
    for part in spec.split(","):
        bounds = part.split(":")
        if len(bounds) != 2:
            raise DomainError(f"bad box {spec!r}; expected lo:hi[,lo:hi...]")
        lo.append(float(bounds[0]))
        hi.append(float(bounds[1]))
    return lo, hi


def build_parser():
    p = argparse.ArgumentParser(prog="orbitpairs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model_required=True):
        src = sp.add_mutually_exclusive_group(required=model_required)
        src.add_argument("--model", type=Path, help="model file (JSON or YAML)")
        if not model_required:
            src.add_argument("--orbits", type=Path, help="orbit-table CSV to analyse instead of a model")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("validate", help="check a model file")
    common(sp)

    sp = sub.add_parser("census", help="enumerate prime orbits and write the orbit CSV")
    common(sp)
    sp.add_argument("--tmax", type=float, required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)

    sp = sub.add_parser("thermo", help="entropy, winding cycle, Hessian and constants")
    common(sp)

    for name, helptext in (("report", "measured vs predicted pair counts"), ("clt", "empirical vs Gaussian box fractions")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, model_required=False)
        sp.add_argument("--summary", type=Path, help="thermo JSON (required with --orbits)")
        sp.add_argument("--tmax", type=float)
        sp.add_argument("--tgrid", required=True, help="start:stop:step or comma list")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
        if name == "report":
            sp.add_argument("--beta", action="append", default=None, help="homology difference, e.g. 2 or 1,0 (repeatable)")
            sp.add_argument("--alpha", action="append", default=None, help="window offset (repeatable)")
            sp.add_argument("--delta", type=float)
        sp.add_argument("--box", action="append", default=None, help="lo:hi[,lo:hi...] (repeatable; write --box=-1:1 for negative bounds)")
    return p


def config_from_args(args) -> RunConfig:
    boxes = {}
    for i, spec in enumerate(getattr(args, "box", None) or []):
        boxes[f"box{i + 1}"] = parse_box(spec)
    tgrid = parse_grid(args.tgrid) if getattr(args, "tgrid", None) else []
    cfg = RunConfig(
        command=args.command,
        model=args.model,
        orbits=getattr(args, "orbits", None),
        summary=getattr(args, "summary", None),
        tmax=getattr(args, "tmax", None),
        tgrid=tgrid,
        betas=[parse_vector(b) for b in (getattr(args, "beta", None) or [])],
        alphas=[parse_vector(a) for a in (getattr(args, "alpha", None) or [])],
        boxes=boxes,
        delta=getattr(args, "delta", None),
        workers=getattr(args, "workers", 1),
        out=args.out,
        seed=args.seed,
        budget=getattr(args, "budget", DEFAULT_BUDGET),
    )
    if cfg.command in ("report", "clt") and cfg.tmax is None and cfg.model is not None:
        cfg.tmax = max(tgrid) if tgrid else None
    cfg.check()
    return cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _load_checked(path):
    model = load_model(path)
    report = validate_model(model)
    if report.lattice_warning:
        print("notice: edge lengths look commensurate; the flow may not be weak-mixing", file=sys.stderr)
    return model, report


def _summary_for(cfg, model):
    if cfg.summary is not None:
        return ThermoSummary.from_record(json.loads(cfg.summary.read_text()))
    if model is None:
        raise DomainError("--summary is required when analysing an ingested orbit table")
    return summarize(model)


def _table_for(cfg):
    if cfg.orbits is not None:
        table = ingest_orbit_table(cfg.orbits, t_max=cfg.tmax)
        return table, None
    model, report = _load_checked(cfg.model)
    if not report.strongly_connected:
        raise DomainError("model graph is not strongly connected")
    table = enumerate_prime_orbits(model, cfg.tmax, workers=cfg.workers, budget=cfg.budget)
    return table, model


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    out = Path(cfg.out)
    if cfg.command == "validate":
        model, report = _load_checked(cfg.model)
        rec = {
            "strongly_connected": report.strongly_connected,
            "lattice_warning": report.lattice_warning,
            "k": report.k,
            "edge_count": report.edge_count,
        }
        print(json.dumps(rec), file=stdout)
        if not report.ok:
            raise DomainError("model rejected: needs a strongly connected graph with at least two edges")
        return EXIT_OK

    if cfg.command == "census":
        table, _ = _table_for(cfg)
        atomic_write(out / "orbits.csv", format_orbit_table(table))
        print(f"prime orbits with length <= {cfg.tmax}: {table.total} ({len(table)} rows) -> {out / 'orbits.csv'}", file=stdout)
        return EXIT_OK

    if cfg.command == "thermo":
        model, report = _load_checked(cfg.model)
        if not report.ok:
            raise DomainError("model rejected by validation")
        summary = summarize(model)
        atomic_write(out / "thermo.json", summary.to_json() + "\n")
        print(summary.describe(), file=stdout)
        print(summary.to_json(), file=stdout)
        return EXIT_OK

    if cfg.tmax is None and cfg.orbits is None:
        raise DomainError("--tmax or --tgrid required")
    table, model = _table_for(cfg)
    summary = _summary_for(cfg, model)
    if any(t > table.t_max for t in cfg.tgrid):
        raise DomainError(f"T grid exceeds the table cutoff {table.t_max}")
    boxes = cfg.boxes or DEFAULT_BOXES

    if cfg.command == "clt":
        rows = clt_table(table, summary, cfg.tgrid, boxes, seed=cfg.seed)
        atomic_write(out / "clt.csv", format_clt_table(table.k, rows))
        print(f"{len(rows)} CLT rows -> {out / 'clt.csv'}", file=stdout)
        return EXIT_OK

    betas = cfg.betas or [HomologyClass.zero(table.k).coords]
    report = convergence_report(
        table, summary, betas, cfg.tgrid, delta=cfg.delta, alpha_list=cfg.alphas or None,
        boxes=boxes, seed=cfg.seed,
    )
    atomic_write(out / "report.csv", report.to_csv())
    atomic_write(out / "report_clt.csv", report.clt_csv())
    last = cfg.tgrid[-1]
    print(f"pi({last}) = {count_orbits(table, last)}; report -> {out / 'report.csv'}", file=stdout)
    return EXIT_OK


def _fail(kind, message, status):
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ResourceError as exc:
        return _fail(exc.kind, str(exc), EXIT_RESOURCE)
    except NumericError as exc:
        return _fail(exc.kind, str(exc), EXIT_NUMERIC)
    except OrbitPairsError as exc:
        return _fail(exc.kind, str(exc), EXIT_USAGE)
    except (OSError, ValueError) as exc:
        return _fail("config", str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
