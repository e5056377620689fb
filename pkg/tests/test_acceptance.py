"""Acceptance criteria, one test per criterion.

Each test records PASS/FAIL with its runtime; the summary is printed at the
end of the pytest run (see conftest.py) or when this file is run directly.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from patchhopf.charroots import first_hopf, hopf_scan
from patchhopf.dde import estimate_period, simulate, stability_verdict
from patchhopf.equilibrium import d_hat, equilibrium
from patchhopf.network import build_from_edges, paper_network_9, random_network
from patchhopf.spectral import convexity_certificate, lambda_star, spectral_bound

from conftest import homogeneous
from oracles import det_grid_crossings, match_one_to_one

RESULTS = {}

PI_48 = np.pi / 48
NINE_PI_256 = 9 * np.pi / 256


@contextmanager
def criterion(number, name, limit):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < limit
        RESULTS[number] = (name, ok and within, elapsed, limit)
    assert within, f"runtime {elapsed:.1f}s exceeds {limit}s"


def two_patch():
    return build_from_edges(2, [(1, 2, 1.0)], [1.0, -2.0])


def test_01_threshold_exactness():
    with criterion(1, "threshold exactness", 1.0):
        th = lambda_star(two_patch())
        assert abs(th.lambda_star - 0.5) < 1e-10
        assert abs(th.d_star - 2.0) < 1e-10


def test_02_spectral_derivative():
    with criterion(2, "spectral derivative and convexity", 30.0):
        rng = np.random.default_rng(20240601)
        for _ in range(100):
            net = random_network(int(rng.integers(2, 7)), rng)
            for lam in rng.uniform(0.01, 10.0, 3):
                h = 1e-5 * max(1.0, lam)
                sp = spectral_bound(net, lam).s_prime
                fd = (spectral_bound(net, lam + h).s - spectral_bound(net, lam - h).s) / (2 * h)
                assert abs(fd - sp) <= 1e-5 * max(1.0, abs(sp))
            rep = convexity_certificate(net, np.linspace(0.0, 5.0, 26))
            assert not rep.violations and rep.equality_case_consistent


def test_03_equilibrium_limits():
    with criterion(3, "equilibrium limits", 5.0):
        net = paper_network_9()
        small = [equilibrium(net, d) for d in (1e-1, 1e-2, 1e-3)]
        large = [equilibrium(net, d) for d in (10.0, 1e2, 1e3)]
        e_small = [np.max(np.abs(s.u - net.m)) for s in small]
        e_large = [np.max(np.abs(s.u - 128 / 9)) for s in large]
        assert e_small[0] > e_small[1] > e_small[2]
        assert e_large[0] > e_large[1] > e_large[2]
        assert all(s.residual < 1e-10 for s in small + large)


def test_04_small_d_hopf_limit():
    with criterion(4, "small-d Hopf limit", 60.0):
        net = paper_network_9()
        r = {d: first_hopf(net, d).r for d in (1e-1, 1e-2, 1e-3)}
        assert abs(r[1e-3] - PI_48) < 0.02 * PI_48
        err = [abs(r[d] - PI_48) for d in (1e-1, 1e-2, 1e-3)]
        assert err[0] > err[1] > err[2]


def test_05_large_d_hopf_limit():
    with criterion(5, "large-d Hopf limit", 60.0):
        net = paper_network_9()
        r = {d: first_hopf(net, d).r for d in (10.0, 1e2, 1e3)}
        assert abs(r[1e3] - NINE_PI_256) < 0.02 * NINE_PI_256
        err = [abs(r[d] - NINE_PI_256) for d in (10.0, 1e2, 1e3)]
        assert err[0] > err[1] > err[2]


def test_06_branch_structure():
    with criterion(6, "branch structure at d=1e-2", 60.0):
        net = paper_network_9()
        pts = hopf_scan(net, 1e-2, with_transversality=False)
        assert len(pts) == 9
        labels = [hp.branch for hp in pts]
        assert sorted(labels) == list(range(1, 10))
        for hp in pts:
            m_q = net.m[hp.branch - 1]
            assert abs(hp.nu - m_q) <= 0.05 * m_q
            assert abs(hp.theta - np.pi / 2) <= 0.05 * np.pi / 2


def test_07_threshold_blowup():
    with criterion(7, "delta<0 blow-up", 30.0):
        net = two_patch()
        d_star = lambda_star(net).d_star
        err = [abs((d_star - d) * first_hopf(net, d).r - 2.5 * np.pi) for d in (1.9, 1.99, 1.999)]
        assert err[0] > err[1] > err[2]


def test_08_transversality():
    with criterion(8, "transversality", 60.0):
        net = paper_network_9()
        from patchhopf.charroots import crossing_speed

        for d in (1e-2, 0.5, 10.0, 1e3):
            hp = first_hopf(net, d)
            fd, closed = crossing_speed(net, d, hp)
            assert hp.transversal == "positive"
            assert fd is not None and fd > 0 and closed > 0


def test_09_scan_oracle():
    with criterion(9, "scan oracle", 300.0):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            while True:
                net = random_network(int(rng.integers(2, 4)), rng)
                d = float(10 ** rng.uniform(-2, 1))
                if d < d_hat(net):
                    break
            u = equilibrium(net, d).u
            pts = hopf_scan(net, d, with_transversality=False)
            centres, dth, dnu = det_grid_crossings(net, d, u, 2000, 2000)
            assert match_one_to_one([(p.theta, p.nu) for p in pts], centres, dth, dnu)


def test_10_figure_2_reproduction():
    with criterion(10, "figure 2/3 qualitative reproduction", 300.0):
        net = paper_network_9()
        horizon = 60.0
        assert stability_verdict(net, 0.5, 0.087, horizon) == "oscillates"
        assert stability_verdict(net, 10.0, 0.15, horizon) == "oscillates"
        for d in (0.5, 10.0):
            r0 = first_hopf(net, d).r
            if d == 0.5:
                assert stability_verdict(net, d, 0.5 * r0, horizon) == "converges"
            assert stability_verdict(net, d, 0.95 * r0, horizon) == "converges"
            assert stability_verdict(net, d, 1.05 * r0, horizon) == "oscillates"
        cv = {
            r: estimate_period(simulate(net, 0.5, r, t_end=200.0), 1, t_skip=100.0).peak_spacing_cv
            for r in (0.087, 0.09)
        }
        assert cv[0.09] > cv[0.087]


def test_11_integrator_order():
    with criterion(11, "integrator order and invariance", 30.0):
        net = homogeneous(2, 1.0)
        history, r, t_end = [0.2, 1.4], 1.5, 12.0
        for n in (20, 40):
            ref = simulate(net, 1.0, r, history, t_end, 8 * n).u[-1]
            e1 = np.max(np.abs(simulate(net, 1.0, r, history, t_end, n).u[-1] - ref))
            e2 = np.max(np.abs(simulate(net, 1.0, r, history, t_end, 2 * n).u[-1] - ref))
            assert 12 <= e1 / e2 <= 20
        paper = paper_network_9()
        for d, rr in ((0.5, 0.087), (10.0, 0.15), (0.5, 0.02)):
            ue = equilibrium(paper, d).u
            traj = simulate(paper, d, rr, ue, 100 * rr + 10)
            assert np.max(np.abs(traj.u - ue)) < 1e-8


def summary_lines():
    lines = []
    for number in sorted(RESULTS):
        name, ok, elapsed, limit = RESULTS[number]
        status = "PASS" if ok else "FAIL"
        lines.append(f"[{status}] criterion {number:2d}: {name} ({elapsed:.2f}s, limit {limit:g}s)")
    return lines


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
