"""Command-line interface: ``simulate``, ``eval`` and ``validate``.

Settings come from an optional JSON file (``--config``) and flags; flags
override file values.  ``--print-config`` writes the resolved configuration
as JSON, which is again a valid ``--config`` file.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import metrics, sim, transient
from .errors import DomainError
from .harness import checks
from .randvar import RngStream
from .transient import QueueParams, StatePhase

SEED_ENV = "FRACERLANG_SEED"
QUANTITIES = ("p0", "pns", "plen", "mean", "busy", "wait")


@dataclass
class RunConfig:
    """Resolved settings of one invocation; mirrors the JSON config schema."""

    command: str = "eval"
    lam: float = 4.0
    mu: float = 5.0
    k: int = 2
    nu: float = 0.75
    seed: int = 0
    stream_id: int = 0
    output: str | None = None
    format: str = "csv"
    # simulate
    method: str = "gillespie"
    horizon: float | None = 10.0
    max_events: int | None = None
    resolution: float | None = None
    # eval
    quantity: str = "p0"
    t_grid: str = "0:2:21"
    state: list = field(default_factory=lambda: [1, 1])
    m: int = 1
    wait_t: float = 1.0
    wait_t0: float = 0.8
    wait_n: int = 3
    # validate
    suite: str = "fast"
    time_budget: float | None = None
    workers: int = 1

    @property
    def params(self):
        return QueueParams(self.lam, self.mu, self.k, self.nu)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def parse_grid(spec):
    """``start:stop:count`` to an inclusive linear grid."""
    try:
        start, stop, count = spec.split(":")
        grid = np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise DomainError(f"bad grid {spec!r}; expected start:stop:count") from exc
    if grid.size < 1 or np.any(grid < 0):
        raise DomainError("grid must be nonempty and nonnegative")
    return grid


def _parser():
    ap = argparse.ArgumentParser(prog="fracerlang",
                                 description="Fractional M/E_k/1 queue: simulation, "
                                             "evaluation and validation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--lam", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--k", type=int)
        p.add_argument("--nu", type=float)
        p.add_argument("--seed", type=int, help=f"default from ${SEED_ENV}, else 0")
        p.add_argument("--stream-id", dest="stream_id", type=int)
        p.add_argument("--output", "-o")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--print-config", dest="print_config", action="store_true",
                       help="print the resolved configuration as JSON and exit")

    p = sub.add_parser("simulate", help="write a sample path")
    common(p)
    p.add_argument("--method", choices=("gillespie", "subordinated"))
    p.add_argument("--horizon", type=float)
    p.add_argument("--max-events", dest="max_events", type=int)
    p.add_argument("--resolution", type=float)

    p = sub.add_parser("eval", help="tabulate an analytic quantity on a grid")
    common(p)
    p.add_argument("--quantity", choices=QUANTITIES)
    p.add_argument("--t-grid", dest="t_grid", help="start:stop:count")
    p.add_argument("--state", type=int, nargs=2, metavar=("N", "S"))
    p.add_argument("--m", type=int, help="queue length in phases for plen")
    p.add_argument("--wait-t", dest="wait_t", type=float)
    p.add_argument("--wait-t0", dest="wait_t0", type=float)
    p.add_argument("--wait-n", dest="wait_n", type=int)

    p = sub.add_parser("validate", help="run the consistency checks")
    common(p)
    p.add_argument("--suite", choices=("fast", "full"))
    p.add_argument("--time-budget", dest="time_budget", type=float)
    p.add_argument("--workers", type=int)
    return ap


def resolve_config(argv, environ=None):
    """Merge defaults, environment seed, JSON file and flags (in that order)."""
    environ = os.environ if environ is None else environ
    args = _parser().parse_args(argv)
    doc = {}
    if SEED_ENV in environ:
        doc["seed"] = int(environ[SEED_ENV])
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc.update(json.load(fh))
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            doc[f.name] = list(value) if f.name == "state" else value
    doc["command"] = args.command
    # an explicit event cap replaces the default horizon
    if args.command == "simulate" and getattr(args, "max_events", None) is not None \
            and getattr(args, "horizon", None) is None:
        doc["horizon"] = None
    return RunConfig.from_dict(doc), args.print_config


def _open_output(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def cmd_simulate(cfg: RunConfig):
    rng = RngStream(cfg.seed, cfg.stream_id)
    sim_cfg = sim.SimConfig(cfg.params, rng, max_events=cfg.max_events,
                            horizon=None if cfg.max_events is not None else cfg.horizon)
    if cfg.method == "gillespie":
        path = sim.simulate_gillespie(sim_cfg)
    else:
        path = sim.simulate_subordinated(sim_cfg, cfg.resolution)
    path.validate()
    echo = cfg.to_dict()
    text = sim.path_to_json(path, echo) if cfg.format == "json" else sim.path_to_csv(path)
    with _open_output(cfg.output) as fh:
        fh.write(text)
    if cfg.output not in (None, "-") and cfg.format == "csv":
        with open(cfg.output + ".json", "w") as fh:
            json.dump({"config": echo, "events": int(path.times.size - 1)}, fh, indent=1)
    return 0


def evaluate(cfg: RunConfig):
    """Rows ``(t, value, est_error)`` for the configured quantity and grid."""
    p = cfg.params
    control = transient.DEFAULT_CONTROL
    grid = parse_grid(cfg.t_grid)
    tol = control.abs_tol
    rows = []
    if cfg.quantity == "busy":
        # the tabulated path is checked to 1e-9 at interpolation midpoints
        values = metrics.busy_period_cdf_array(p, grid)
        return [(t, float(v), 1e-9) for t, v in zip(grid, values)]
    for t in grid:
        t = float(t)
        if cfg.quantity == "p0":
            rows.append((t, transient.frac_p0(p, t), tol))
        elif cfg.quantity == "pns":
            rows.append((t, transient.frac_pns(p, StatePhase(*cfg.state), t), tol))
        elif cfg.quantity == "plen":
            rows.append((t, transient.queue_length_prob(p, cfg.m, t), tol))
        elif cfg.quantity == "mean":
            rows.append((t, metrics.mean_queue_length(p, t), tol))
        elif cfg.quantity == "wait":
            ctx = metrics.WaitContext(cfg.wait_t, cfg.wait_t0, cfg.wait_n)
            if t == 0.0:
                continue
            value, err = metrics.waiting_density_conditional(ctx, p, t, full_output=True)
            rows.append((t, value, err))
        else:
            raise DomainError(f"unknown quantity {cfg.quantity!r}")
    return rows


def cmd_eval(cfg: RunConfig):
    rows = evaluate(cfg)
    header = "xi" if cfg.quantity == "wait" else "t"
    with _open_output(cfg.output) as fh:
        if cfg.format == "json":
            json.dump({"config": cfg.to_dict(),
                       "rows": [{header: t, "value": v, "est_error": e} for t, v, e in rows]},
                      fh, indent=1)
        else:
            fh.write(f"{header},value,est_error\n")
            for t, v, e in rows:
                fh.write(f"{t:.16e},{v:.16e},{e:.16e}\n")
    return 0


def cmd_validate(cfg: RunConfig):
    report = checks.validate_all(cfg.params, cfg.suite, cfg.time_budget, cfg.seed,
                                 cfg.workers)
    text = checks.report_json(report)
    with _open_output(cfg.output) as fh:
        fh.write(text + "\n")
    for c in report["checks"]:
        margin = c["margin"]
        shown = "nan" if margin is None or not math.isfinite(margin) else f"{margin:+.3f}"
        print(f"{c['status']:>7}  {c['check_id']:<24} margin {shown}  "
              f"{c['budget_used']:.1f}s", file=sys.stderr)
    return 0 if report["passed"] else 1


COMMANDS = {"simulate": cmd_simulate, "eval": cmd_eval, "validate": cmd_validate}


def main(argv=None):
    try:
        cfg, print_only = resolve_config(argv)
        if print_only:
            print(json.dumps(cfg.to_dict(), indent=1))
            return 0
        return COMMANDS[cfg.command](cfg)
    except (DomainError, ArithmeticError) as exc:
        print(f"fracerlang: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
