"""Sweep (chi, xi, m) for Gaussian initial data and tabulate verdicts.

Thin wrapper over ``chemoblow sweep``: builds the configuration, runs it with
a process pool and prints the phase table.
"""

import argparse
import csv
from pathlib import Path

from chemoblow.cli import cmd_sweep
from chemoblow.config import preset, replace


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--chi", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    ap.add_argument("--xi", type=float, nargs="+", default=[0.5, 1.0])
    ap.add_argument("--m", type=float, nargs="+", default=[5.0, 20.0, 60.0])
    ap.add_argument("--sigma", type=float, nargs="+", default=[0.05])
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--t-end", type=float, default=0.5)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", type=Path, default=Path("results/sweep"))
    args = ap.parse_args()

    cfg = replace(
        preset("subcritical3d"),
        grid={"N": args.N},
        control={"t_end": args.t_end, "dt_init": 1e-6, "dt_min": 1e-9},
        initial={"kind": "bump", "sigma": args.sigma[0]},
        snapshot_every=0,
        sweep={"chi": tuple(args.chi), "xi": tuple(args.xi), "sigma": tuple(args.sigma), "m": tuple(args.m)},
    )
    cmd_sweep(cfg, args.out, workers=args.workers)
    with open(args.out / "phase.csv") as fh:
        for row in csv.DictReader(fh):
            g0 = f"{float(row['G0']):10.2f}" if row["G0"] else " " * 10
            print(f"chi={row['chi']:>4} xi={row['xi']:>4} m={row['m']:>5}  {row['verdict']:<12} t_last={row['t_last'] or '-':<22} G0={g0}")


if __name__ == "__main__":
    main()
