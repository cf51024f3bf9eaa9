"""Command-line entry points: run, compare, membership, sweep, drive.

Exit codes: 0 for a Completed run (or a passing check), 2 for BlewUp, 1 for
Inconclusive runs and errors, 3 when membership or a drive search fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import subprocess
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import Verdict, classify, refinement_study
from .config import (
    ConfigError,
    RunConfig,
    as_mode_state,
    base_initial_data,
    config_from_dict,
    initial_state,
    load_config,
    preset,
    replace,
)
from .dynamics import FullState, Trajectory, integrate
from .energy import EnergyLedger, check_energy_inequality
from .initial_data import DriveFailure, check_membership, drive_to_class

log = logging.getLogger("chemoblow")

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP, EXIT_NOT_MEMBER = 0, 1, 2, 3
LEDGER_COLUMNS = ("t", "F", "D", "mass", "u_max", "dt")
PHASE_COLUMNS = ("chi", "xi", "sigma", "m", "verdict", "t_last", "G0", "c2_fit")


def version_stamp() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=here,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return repr(float(x))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


class SnapshotWriter:
    """Observer that keeps every ``every``-th accepted state (and the first)."""

    def __init__(self, every: int):
        self.every = every
        self.count = 0
        self.kept: list[tuple[int, object]] = []

    def __call__(self, state, dt) -> None:
        if self.every > 0 and self.count % self.every == 0:
            self.kept.append((self.count, state))
        self.count += 1


def _snapshot_csv(state, r) -> str:
    if isinstance(state, FullState):
        return _csv_text(("r", "u", "v", "w"), zip(r, state.u, state.v, state.w))
    return _csv_text(("r", "u", "z"), zip(r, state.u, state.z))


def execute(cfg: RunConfig):
    """Build the grid and initial data, integrate, and classify. No file output."""
    g = cfg.build_grid()
    s0, drive_meta = initial_state(cfg, g)
    th = cfg.thresholds
    membership = check_membership(s0.u, s0.v, s0.w, cfg.params, g, th.m, th.A, th.K)
    ledger = EnergyLedger(cfg.params, g)
    snaps = SnapshotWriter(cfg.snapshot_every)
    traj = integrate(as_mode_state(s0, cfg), cfg.params, g, cfg.control, [ledger, snaps])
    report = classify(traj, ledger.records, cfg.control, g.n)
    return g, s0, drive_meta, membership, ledger, snaps, traj, report


def cmd_run(cfg: RunConfig, out: Path) -> int:
    if cfg.mode == "compare":
        return cmd_compare(cfg, out)
    g, s0, drive_meta, membership, ledger, snaps, traj, report = execute(cfg)

    rows = [[getattr(rec, c) for c in LEDGER_COLUMNS] for rec in ledger.records]
    atomic_write(out / "ledger.csv", _csv_text(LEDGER_COLUMNS, rows))
    kept = list(snaps.kept)
    if cfg.snapshot_every > 0 and (not kept or kept[-1][0] != snaps.count - 1):
        kept.append((snaps.count - 1, traj.final))
    for idx, state in kept:
        atomic_write(out / "snapshots" / f"{idx:04d}.csv", _snapshot_csv(state, g.r))

    inequality = None
    if len(ledger.records) >= 2 and np.isfinite(ledger.records[0].F):
        rep = check_energy_inequality(ledger.records)
        inequality = {
            "max_residual": rep.max_residual,
            "violation_fraction": rep.violation_fraction,
            "tol": rep.tol,
            "passed": rep.passed,
        }
    doc = {
        "version": version_stamp(),
        "config": cfg.to_dict(),
        "blowup": report.to_dict(),
        "membership": membership.to_dict(),
        "drive": drive_meta,
        "energy_inequality": inequality,
        "run": {
            "steps": traj.steps,
            "rejections": traj.rejections,
            "termination": traj.reason.value,
            "message": traj.message,
            "mass_drift": abs(traj.mass[-1] - traj.mass[0]) / traj.mass[0] if traj.mass[0] else 0.0,
        },
    }
    atomic_write(out / "report.json", _json_text(doc))
    log.info("run finished: %s at t=%.6g", report.verdict.value, report.t_last)
    if report.verdict is Verdict.BLEW_UP:
        return EXIT_BLOWUP
    return EXIT_OK if report.verdict is Verdict.COMPLETED else EXIT_ERROR


def cmd_compare(cfg: RunConfig, out: Path) -> int:
    cfg.params.require_reducible()
    g = cfg.build_grid()
    s0, _ = initial_state(cfg, g)
    study = refinement_study(s0, cfg.params, g, list(cfg.compare.dts), cfg.compare.t_end)
    ser = study.series
    atomic_write(out / "equivalence.csv", _csv_text(("t", "e_z", "e_u"), zip(ser.t, ser.e_z, ser.e_u)))
    orders = [None] + [float(o) for o in study.orders]
    atomic_write(
        out / "refinement.csv",
        _csv_text(
            ("dt", "max_e_z", "max_e_u", "order"),
            [(r.dt, r.max_e_z, r.max_e_u, o) for r, o in zip(study.rows, orders)],
        ),
    )
    summary = {
        "exact": study.exact,
        "passed": study.passed,
        "roundoff": study.roundoff,
        "rows": [vars(r) for r in study.rows],
        "orders": [None if not np.isfinite(o) else float(o) for o in study.orders],
    }
    atomic_write(out / "compare.json", _json_text({"version": version_stamp(), "config": cfg.to_dict(), **summary}))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if study.passed else EXIT_ERROR


def cmd_membership(cfg: RunConfig, out: Path | None = None) -> int:
    g = cfg.build_grid()
    s0, _ = initial_state(cfg, g)
    th = cfg.thresholds
    rep = check_membership(s0.u, s0.v, s0.w, cfg.params, g, th.m, th.A, th.K)
    print(json.dumps(rep.to_dict(), sort_keys=True))
    return EXIT_OK if rep.satisfies else EXIT_NOT_MEMBER


def cmd_drive(cfg: RunConfig, out: Path) -> int:
    g = cfg.build_grid()
    s = base_initial_data(cfg, g)
    th = cfg.thresholds
    try:
        res = drive_to_class(
            s.u, s.v, s.w, cfg.params, g, th.m, th.A, th.K, th.eps, p_exp=th.p, select=cfg.initial.drive_select
        )
    except DriveFailure as exc:
        print(json.dumps({"success": False, "error": str(exc)}, sort_keys=True))
        return EXIT_NOT_MEMBER
    atomic_write(out / "initial.csv", _csv_text(("r", "u", "v", "w"), zip(g.r, res.u0, res.v0, res.w0)))
    doc = {
        "success": True,
        "sigma": res.sigma,
        "weight": res.weight,
        "distance": res.distance,
        "membership": res.report.to_dict(),
    }
    atomic_write(out / "drive.json", _json_text(doc))
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def sweep_points(cfg: RunConfig) -> list[dict]:
    sw = cfg.sweep
    axes = {
        "chi": sw.chi if sw.chi is not None else (cfg.params.chi,),
        "xi": sw.xi if sw.xi is not None else (cfg.params.xi,),
        "sigma": sw.sigma if sw.sigma is not None else (cfg.initial.sigma,),
        "m": sw.m if sw.m is not None else (cfg.thresholds.m,),
    }
    names = list(axes)
    return [dict(zip(names, combo)) for combo in itertools.product(*(axes[k] for k in names))]


def _sweep_row(args) -> list:
    base, point, use_bump = args
    row = [point["chi"], point["xi"], point["sigma"], point["m"]]
    try:
        data = dict(base)
        data["params"] = {**data["params"], "chi": point["chi"], "xi": point["xi"]}
        data["thresholds"] = {**data["thresholds"], "m": point["m"]}
        initial = dict(data["initial"])
        if use_bump:
            initial.update(kind="bump", sigma=point["sigma"])
        data["initial"] = initial
        data["sweep"] = {}
        cfg = config_from_dict(data, "<sweep>")
        if cfg.params.sensitivity <= 0.0:
            return row + ["Invalid", None, None, None]
        _, _, _, _, ledger, _, _, report = execute(cfg)
        return row + [report.verdict.value, report.t_last, ledger.records[0].F, report.c2_fit]
    except Exception as exc:  # noqa: BLE001 - one bad row must not sink the sweep
        log.warning("sweep point %s failed: %s", point, exc)
        return row + [Verdict.INCONCLUSIVE.value, None, None, None]


def cmd_sweep(cfg: RunConfig, out: Path, workers: int = 1) -> int:
    points = sweep_points(cfg)
    base = cfg.to_dict()
    use_bump = cfg.sweep.sigma is not None or cfg.initial.kind == "bump"
    jobs = [(base, pt, use_bump) for pt in points]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(job) for job in jobs]
    atomic_write(out / "phase.csv", _csv_text(PHASE_COLUMNS, rows))
    log.info("sweep: %d rows written", len(rows))
    return EXIT_OK


COMMANDS = ("run", "compare", "membership", "sweep", "drive")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chemoblow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="YAML run configuration")
        src.add_argument("--preset", choices=("subcritical3d", "supercritical3d", "steady"))
        sp.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        if name == "sweep":
            sp.add_argument("--workers", type=int, default=1)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("CHEMOBLOW_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.preset is not None:
            cfg = preset(args.preset)
        else:
            cfg = RunConfig()
        out = args.out if args.out is not None else Path(cfg.output_dir)
        if args.command == "compare":
            if not cfg.params.reducible:
                raise ConfigError("compare needs beta == delta: unequal decay rates cannot be reduced")
            cfg = replace(cfg, mode="compare")
            return cmd_compare(cfg, out)
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.command == "membership":
            return cmd_membership(cfg, out)
        if args.command == "drive":
            return cmd_drive(cfg, out)
        return cmd_sweep(cfg, out, workers=max(1, args.workers))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
