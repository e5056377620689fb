"""Spectral bound of ``lam * diag(m) + D`` and the extinction threshold.

``s(lam)`` is the Perron root of the quasi-positive symmetric matrix
``lam * Q + D`` with ``Q = diag(m)``. Its derivative follows from the Perron
vector alone, ``s'(lam) = sum(m w^2) / sum(w^2)``, and ``s`` is convex in
``lam`` (strictly, unless all ``m_j`` coincide).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._io import csv_writer, fmt, open_text
from .errors import ConvergenceError, ThresholdUndefinedError
from .network import PatchNetwork

POWER_MAXITER = 100_000
POWER_RTOL = 1e-14
LAMBDA_CAP = 1e15


@dataclass(frozen=True)
class SpectralPoint:
    lam: float
    s: float
    w: np.ndarray
    s_prime: float
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def d(self) -> float:
        return 1.0 / self.lam if self.lam > 0 else np.inf


@dataclass(frozen=True)
class ThresholdResult:
    lambda_star: float
    d_star: float
    s_prime_at_star: float
    eta_hat: np.ndarray


def perron_pair(M: np.ndarray, seed=None) -> tuple[float, np.ndarray, dict]:
    """Dominant eigenpair of a symmetric, irreducible, quasi-positive matrix.

    Shifted power iteration picks out the Perron root, then a few steps of
    Rayleigh-quotient inverse iteration polish the pair to working precision.
    The returned vector is positive and sums to one; positivity doubles as the
    certificate that the dominant pair was found.
    """
    n = M.shape[0]
    diag = np.diag(M)
    radius = np.abs(M).sum(axis=1) - np.abs(diag)
    # Gershgorin: every eigenvalue of M + shift*I is >= 0.
    shift = float(np.max(radius - diag)) + 1.0
    shift = max(shift, 1.0)
    B = M + shift * np.eye(n)

    x = np.full(n, 1.0 / np.sqrt(n)) if seed is None else np.abs(np.asarray(seed, float))
    x = x / np.linalg.norm(x)
    rho_prev = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, POWER_MAXITER + 1):
        y = B @ x
        rho = float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(rho - rho_prev) <= POWER_RTOL * max(1.0, abs(rho)):
            converged = True
            break
        rho_prev = rho

    s = float(x @ M @ x)
    # Offset the shift by a few ulps of ||M|| so M - shift*I is never exactly
    # singular; inverse iteration is insensitive to that perturbation.
    offset = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(M).sum(axis=1))))
    for _ in range(3):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                warnings.simplefilter("ignore", RuntimeWarning)
                lu = scipy.linalg.lu_factor(M - (s + offset) * np.eye(n), check_finite=False)
                y = scipy.linalg.lu_solve(lu, x, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(y)):
            break
        x = y / np.linalg.norm(y)
        s = float(x @ M @ x)

    if x.sum() < 0:
        x = -x
    residual = float(np.max(np.abs(M @ x - s * x)))
    diagnostics = {
        "power_iterations": iterations,
        "power_converged": converged,
        "residual": residual,
        "near_degenerate": not converged,
    }
    if not np.all(x > 0):
        raise ConvergenceError(
            f"Perron vector not positive after {iterations} power iterations", code="eigensolver"
        )
    w = x / x.sum()
    return s, w, diagnostics


def shifted_matrix(net: PatchNetwork, lam: float) -> np.ndarray:
    return lam * np.diag(net.m) + net.D


def spectral_bound(net: PatchNetwork, lam: float, seed=None) -> SpectralPoint:
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    s, w, diag = perron_pair(shifted_matrix(net, lam), seed=seed)
    s_prime = float(np.sum(net.m * w**2) / np.sum(w**2))
    return SpectralPoint(float(lam), s, w, s_prime, diag)


def spectral_curve(net: PatchNetwork, lambda_grid) -> list[SpectralPoint]:
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be nonnegative and strictly increasing")
    out, seed = [], None
    for lam in grid:
        pt = spectral_bound(net, lam, seed=seed)
        out.append(pt)
        seed = pt.w
    return out


def write_spectral_csv(points, path) -> None:
    with open_text(path) as fh:
        w = csv_writer(fh)
        w.writerow(["lambda", "s", "s_prime"])
        for p in points:
            w.writerow([fmt(p.lam), fmt(p.s), fmt(p.s_prime)])


def spectral_to_json(points) -> list:
    return [{"lambda": p.lam, "s": p.s, "s_prime": p.s_prime} for p in points]


def lambda_star(net: PatchNetwork) -> ThresholdResult:
    """Positive root of ``s(lam) = 0`` for networks with ``sum(m) < 0``."""
    delta = net.delta
    if delta >= 0:
        raise ThresholdUndefinedError(
            f"threshold undefined: equilibrium exists for all d (delta={delta:g} >= 0)"
        )
    hi = 1.0
    p_hi = spectral_bound(net, hi)
    while p_hi.s <= 0:
        hi *= 2.0
        if hi > LAMBDA_CAP:
            raise ConvergenceError("no sign change of s(lambda) below 1e15", code="bracket")
        p_hi = spectral_bound(net, hi, seed=p_hi.w)
    lo = hi / 2.0
    p_lo = spectral_bound(net, lo, seed=p_hi.w)
    while p_lo.s >= 0:
        lo /= 2.0
        if lo < 1e-300:
            raise ConvergenceError("no negative shoulder of s(lambda) found", code="bracket")
        p_lo = spectral_bound(net, lo, seed=p_lo.w)

    # Safeguarded Newton: s is convex and increasing at the root, so Newton
    # from the right converges monotonically; bisection guards the rest.
    lam, p = hi, p_hi
    for _ in range(200):
        if abs(p.s) < 1e-12:
            break
        step = lam - p.s / p.s_prime if p.s_prime > 0 else np.nan
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        lam = step
        p = spectral_bound(net, lam, seed=p.w)
        if p.s > 0:
            hi = lam
        else:
            lo = lam
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    else:
        raise ConvergenceError("threshold iteration did not converge", code="no-convergence")
    return ThresholdResult(lam, 1.0 / lam, p.s_prime, p.w)


@dataclass
class ConvexityReport:
    lambdas: np.ndarray
    second_differences: np.ndarray
    tolerance: float
    violations: list[int]
    homogeneous: bool
    equality_case_consistent: bool

    @property
    def ok(self) -> bool:
        return not self.violations and self.equality_case_consistent


def convexity_certificate(net: PatchNetwork, lambda_grid) -> ConvexityReport:
    """Second divided differences of ``s`` on a grid, flagged when negative.

    ``s'' == 0`` everywhere exactly when the growth rates are homogeneous;
    the report checks that the samples agree with that.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size < 3:
        raise ValueError("convexity certificate needs at least 3 grid points")
    s = np.array([p.s for p in spectral_curve(net, grid)])
    h0 = grid[1:-1] - grid[:-2]
    h1 = grid[2:] - grid[1:-1]
    second = 2.0 * ((s[2:] - s[1:-1]) / h1 - (s[1:-1] - s[:-2]) / h0) / (h0 + h1)
    scale = max(1.0, float(np.max(np.abs(s))), float(np.max(np.abs(np.diff(s) / np.diff(grid)))))
    tol = 1e-6 * scale
    violations = [int(i) + 1 for i in np.nonzero(second < -tol)[0]]
    homogeneous = bool(np.all(net.m == net.m[0]))
    if homogeneous:
        consistent = bool(np.all(np.abs(second) <= tol))
    else:
        consistent = bool(np.any(second > tol))
    return ConvexityReport(grid, second, tol, violations, homogeneous, consistent)
