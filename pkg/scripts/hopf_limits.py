"""First Hopf delay of the 9-patch network across dispersal rates.

Compares r0(d) with the local-model value pi/(2 max m) for small d and the
average-model value n pi/(2 sum m) for large d, and writes the Hopf curves
as JSON for plotting.

    python scripts/hopf_limits.py --curves curves.json
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from patchhopf.charroots import first_hopf, hopf_curves_sweep, write_curves_json
from patchhopf.conversions import average_model_hopf, local_model_hopf
from patchhopf.network import paper_network_9


@dataclass(frozen=True)
class SweepConfig:
    d_min: float = 1e-3
    d_max: float = 1e3
    d_steps: int = 25
    grid_size: int = 512
    jobs: int = 1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--curves", type=Path, help="write Hopf curves JSON here")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    cfg = SweepConfig(jobs=args.jobs)

    net = paper_network_9()
    local, average = local_model_hopf(net), average_model_hopf(net)
    print(f"local model  pi/(2 max m)   = {local:.6f}")
    print(f"average model n pi/(2 sum m) = {average:.6f}")
    print(f"{'d':>8s} {'r0':>10s} {'theta':>8s} {'nu':>8s} {'|r0-local|':>11s} {'|r0-avg|':>10s} {'sign':>9s}")
    for d in np.geomspace(cfg.d_min, cfg.d_max, 7):
        hp = first_hopf(net, d, cfg.grid_size)
        print(
            f"{d:8.0e} {hp.r:10.6f} {hp.theta:8.4f} {hp.nu:8.4f} "
            f"{abs(hp.r - local):11.2e} {abs(hp.r - average):10.2e} {hp.transversal:>9s}"
        )
    if args.curves:
        grid = np.geomspace(cfg.d_min, cfg.d_max, cfg.d_steps)
        curves = hopf_curves_sweep(net, grid, cfg.grid_size, jobs=cfg.jobs)
        write_curves_json(curves, args.curves)
        for c in curves:
            print(f"branch {c.branch!s:>4s}: {len(c.samples):3d} samples, {c.end_reason}")


if __name__ == "__main__":
    main()
