"""Hopf delay near the extinction threshold of a network with sum(m) < 0.

As d rises to d_*, the equilibrium shrinks to zero and r0 blows up like
d_* pi / (2 h) / (d_* - d). Prints the table for the two-patch net m=(1,-2).

    python scripts/threshold_blowup.py
"""

from dataclasses import dataclass

import numpy as np

from patchhopf.charroots import first_hopf
from patchhopf.conversions import threshold_blowup_limit
from patchhopf.equilibrium import equilibrium
from patchhopf.network import build_from_edges
from patchhopf.spectral import lambda_star


@dataclass(frozen=True)
class BlowupConfig:
    m: tuple = (1.0, -2.0)
    coupling: float = 1.0
    gaps: tuple = (1e-1, 1e-2, 1e-3, 1e-4)


def main(cfg: BlowupConfig = BlowupConfig()):
    net = build_from_edges(2, [(1, 2, cfg.coupling)], list(cfg.m))
    th = lambda_star(net)
    limit = threshold_blowup_limit(net)
    print(f"d_* = {th.d_star:.12f}, limit of (d_* - d) r0 = {limit:.6f}")
    print(f"{'d':>10s} {'max u':>10s} {'r0':>12s} {'(d_*-d) r0':>12s} {'error':>10s}")
    for gap in cfg.gaps:
        d = th.d_star - gap * th.d_star / 2
        u = equilibrium(net, d).u
        r0 = first_hopf(net, d).r
        scaled = (th.d_star - d) * r0
        print(f"{d:10.6f} {np.max(u):10.3e} {r0:12.4f} {scaled:12.6f} {abs(scaled - limit):10.2e}")


if __name__ == "__main__":
    main()
