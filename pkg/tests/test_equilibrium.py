import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

import patchhopf.equilibrium as eqm
from patchhopf.equilibrium import (
    branch_sweep,
    d_hat,
    equilibrium,
    equilibrium_limit_large_d,
    equilibrium_limit_small_d,
    newton,
    residual_vector,
    threshold_expansion,
    write_branch_csv,
)
from patchhopf.errors import ConvergenceError, NoEquilibriumError, ThresholdUndefinedError
from patchhopf.network import build_from_edges, random_network

from conftest import homogeneous


@pytest.mark.parametrize("d", [1e-4, 0.3, 1.0, 50.0, 1e5])
def test_homogeneous_exact(d):
    state = equilibrium(homogeneous(5, 2.5), d)
    np.testing.assert_array_equal(state.u, np.full(5, 2.5))
    assert state.residual == 0.0


def test_small_d_paper(paper9):
    d = 1e-6
    state = equilibrium(paper9, d)
    assert state.residual < 1e-10
    assert np.max(np.abs(state.u - paper9.m)) < 10 * d * np.max(np.abs(paper9.D))


def test_large_d_paper(paper9):
    state = equilibrium(paper9, 1e6)
    assert np.max(np.abs(state.u - 128 / 9)) < 1e-4
    assert np.all(state.u > 0)


def test_monotone_limits(paper9):
    small = [np.max(np.abs(equilibrium(paper9, d).u - paper9.m)) for d in (1e-1, 1e-2, 1e-3)]
    large = [np.max(np.abs(equilibrium(paper9, d).u - 128 / 9)) for d in (10, 1e2, 1e3)]
    assert small[0] > small[1] > small[2]
    assert large[0] > large[1] > large[2]


def test_limit_formulas(paper9, two_patch):
    np.testing.assert_array_equal(equilibrium_limit_small_d(paper9), paper9.m)
    np.testing.assert_array_equal(equilibrium_limit_small_d(two_patch), [1.0, 0.0])
    with pytest.raises(ValueError, match="nonzero"):
        equilibrium_limit_small_d(build_from_edges(2, [(1, 2, 1.0)], [1.0, 0.0]))
    np.testing.assert_allclose(equilibrium_limit_large_d(paper9), np.full(9, 128 / 9))
    np.testing.assert_array_equal(equilibrium_limit_large_d(homogeneous(2, 1.0)), [1.0, 1.0])
    with pytest.raises(ValueError):
        equilibrium_limit_large_d(two_patch)


def test_extinction_regime(two_patch, paper9):
    assert d_hat(paper9) == np.inf
    assert d_hat(two_patch) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(NoEquilibriumError) as exc:
        equilibrium(two_patch, 2.5)
    assert exc.value.code == "extinction-regime"
    with pytest.raises(ValueError):
        equilibrium(two_patch, 0.0)


def test_threshold_expansion_two_patch(two_patch):
    ex = threshold_expansion(two_patch)
    assert ex.lambda_star == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(ex.eta_hat, [2 / 3, 1 / 3], atol=1e-12)
    assert ex.alpha_star == pytest.approx(4 / 3, abs=1e-12)
    # hand solution of the restricted linear system
    np.testing.assert_allclose(ex.xi_star, [4 / 27, -8 / 27], atol=1e-10)
    assert ex.xi_residual < 1e-10
    assert abs(ex.eta_hat @ ex.xi_star) < 1e-12


def test_threshold_expansion_formula_matches_fields():
    rng = np.random.default_rng(5)
    for _ in range(10):
        net = random_network(int(rng.integers(2, 7)), rng, m_low=-10, m_high=2)
        if net.delta >= 0:
            continue
        ex = threshold_expansion(net)
        eta, m, lam = ex.eta_hat, net.m, ex.lambda_star
        assert ex.alpha_star == pytest.approx(np.sum(m * eta**2) / (lam * np.sum(eta**3)), rel=1e-12)
        lhs = net.D @ ex.xi_star + lam * m * ex.xi_star + m * eta - lam * ex.alpha_star * eta**2
        assert np.max(np.abs(lhs)) < 1e-10


def test_threshold_expansion_needs_negative_delta(paper9):
    with pytest.raises(ThresholdUndefinedError):
        threshold_expansion(paper9)


def test_expansion_consistency(two_patch):
    """Leading term error is second order in lambda - lambda_*."""
    ex = threshold_expansion(two_patch)
    errs, gaps = [], []
    for d in (1.9, 1.99, 1.999):
        gap = 1 / d - ex.lambda_star
        u = equilibrium(two_patch, d).u
        errs.append(np.max(np.abs(u - ex.alpha_star * gap * ex.eta_hat)))
        gaps.append(gap)
    orders = np.diff(np.log(errs)) / np.diff(np.log(gaps))
    assert np.all(orders > 1.8)


def test_near_threshold_scaling(two_patch):
    ex = threshold_expansion(two_patch)
    target = ex.alpha_star * ex.eta_hat
    errs, gaps = [], []
    for d in (1.99, 1.999):
        gap = 1 / d - ex.lambda_star
        errs.append(np.max(np.abs(equilibrium(two_patch, d).u / gap - target)))
        gaps.append(gap)
    order = np.log(errs[1] / errs[0]) / np.log(gaps[1] / gaps[0])
    # the error is exactly first order, so finite spacings land within 1 +- O(gap)
    assert order >= 0.95


def test_uniqueness_probe(paper9):
    d = 0.7
    ref = equilibrium(paper9, d).u
    rng = np.random.default_rng(11)
    top = 2 * np.max(np.maximum(paper9.m, 0))
    for _ in range(20):
        start = rng.uniform(1e-6, top, paper9.n)
        u, res, ok = newton(paper9, d, start)
        if not ok:
            u = equilibrium(paper9, d, guess=start).u
        assert np.max(np.abs(u - ref)) < 1e-8


def test_fallback_path(paper9, monkeypatch):
    real = eqm.newton
    calls = []

    def flaky(net, d, u0):
        calls.append(1)
        if len(calls) == 1:
            return np.asarray(u0, float), np.inf, False
        return real(net, d, u0)

    monkeypatch.setattr(eqm, "newton", flaky)
    monkeypatch.setattr(eqm, "monotone_newton", lambda net, d: (np.zeros(net.n), np.inf, False))
    state = equilibrium(paper9, 0.5)
    assert state.method == "timestep-fallback"
    assert state.residual < 1e-10
    monkeypatch.setattr(eqm, "newton", lambda net, d, u0: (np.asarray(u0, float), 1.0, False))
    with pytest.raises(ConvergenceError, match="residual history"):
        equilibrium(paper9, 0.5)


def test_monotone_newton_rescues_boundary_solution():
    # damped Newton from the uniform guess lands on a semi-trivial solution here
    net = random_network(3, np.random.default_rng(4)).with_m([6.2, -1.82, -1.36])
    for d in (0.5, 3.0, 10.0):
        u, res, ok = eqm.monotone_newton(net, d)
        assert ok and np.all(u > 0)
        np.testing.assert_allclose(u, equilibrium(net, d).u, rtol=1e-10)


def test_branch_sweep_paper(paper9, tmp_path):
    states = branch_sweep(paper9, np.geomspace(1e-3, 1e3, 25))
    assert all(s.residual < 1e-10 and np.all(s.u > 1e-14) for s in states)
    path = tmp_path / "branch.csv"
    write_branch_csv(states, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "d,u1,u2,u3,u4,u5,u6,u7,u8,u9,residual,method"
    assert len(lines) == 26
    buf = io.StringIO()
    write_branch_csv(states, buf)
    assert buf.getvalue() == path.read_text()


def test_branch_sweep_to_threshold(two_patch):
    states = branch_sweep(two_patch, [1.0, 1.5, 1.9, 1.99, 1.999])
    norms = [np.max(s.u) for s in states]
    assert np.all(np.diff(norms) < 0) and norms[-1] < 1e-3


def test_branch_sweep_homogeneous():
    states = branch_sweep(homogeneous(3, 4.0), [0.01, 1, 100])
    for s in states:
        np.testing.assert_array_equal(s.u, [4.0, 4.0, 4.0])


def test_branch_sweep_grid_checks(paper9):
    with pytest.raises(ValueError):
        branch_sweep(paper9, [1.0, 0.5])


nets = st.builds(
    lambda seed, n: random_network(n, np.random.default_rng(seed)),
    st.integers(0, 2**32 - 1),
    st.integers(2, 6),
)


@given(net=nets, logd=st.floats(-3, 3))
def test_residual_contract(net, logd):
    d = 10**logd
    if d >= d_hat(net):
        return
    state = equilibrium(net, d)
    assert state.residual < 1e-10
    assert np.all(state.u > 1e-14)
    assert np.max(np.abs(residual_vector(net, d, state.u))) == pytest.approx(state.residual)


@given(net=nets, logd=st.floats(-2, 2), c=st.floats(0.2, 5.0))
def test_scaling_covariance(net, logd, c):
    """(m, u, d) -> (c m, c u, c d) maps equilibria to equilibria."""
    d = 10**logd
    if c * d >= d_hat(net.with_m(c * net.m)) or d >= d_hat(net):
        return
    u = equilibrium(net, d).u
    uc = equilibrium(net.with_m(c * net.m), c * d).u
    np.testing.assert_allclose(uc, c * u, rtol=1e-8, atol=1e-10 * c * np.max(u))
