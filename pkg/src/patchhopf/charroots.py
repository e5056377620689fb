"""Purely imaginary characteristic roots and Hopf delay values.

Linearising the patch model at ``u = u^d`` gives the characteristic matrix

    Delta(mu, r) = d D + diag(m - u) - exp(-mu r) diag(u) - mu I.

Writing ``mu = i nu`` and ``theta = nu r (mod 2 pi)`` separates the problem:
for every ``theta`` the matrix ``A(theta) = d D + diag(m - u) - exp(-i theta)
diag(u)`` is formed and its eigenvalues are followed as ``theta`` sweeps
``[0, 2 pi)``. An eigenvalue crossing the imaginary axis at ``i nu`` with
``nu > 0`` is a root of the characteristic equation for the delays
``r_l = (theta + 2 l pi) / nu``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from ._io import csv_writer, fmt, open_text, write_json
from .equilibrium import equilibrium
from .errors import ConvergenceError, NoCrossingError
from .network import PatchNetwork

TWO_PI = 2.0 * np.pi
IM_FLOOR = 1e-10
RE_TOL = 1e-12
MAX_REFINE_DEPTH = 4
MAX_GRID = 1 << 16
CONTINUATION_BOUND = 0.2


@dataclass(frozen=True)
class HopfPoint:
    d: float
    theta: float
    nu: float
    r: float
    psi: np.ndarray = field(repr=False)
    l: int = 0
    branch: Optional[int] = None
    transversal: str = "inconclusive"

    def harmonic(self, l: int) -> "HopfPoint":
        """Same root at the ``l``-th delay ``(theta + 2 l pi) / nu``."""
        return replace(self, l=l, r=(self.theta + TWO_PI * l) / self.nu)


@dataclass
class HopfCurve:
    branch: Optional[int]
    samples: list = field(default_factory=list)
    end_reason: str = "grid-end"

    @property
    def d(self) -> np.ndarray:
        return np.array([d for d, _ in self.samples])

    @property
    def r(self) -> np.ndarray:
        return np.array([hp.r for _, hp in self.samples])


@dataclass
class ScanResult:
    points: list
    grid_sizes: list
    counts: list
    collisions: int


def char_matrix(net: PatchNetwork, d: float, u: np.ndarray, theta: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return d * net.D + np.diag(net.m - u) - np.exp(-1j * theta) * np.diag(u)


def char_residual(net: PatchNetwork, d: float, u: np.ndarray, hp: HopfPoint) -> float:
    A = char_matrix(net, d, u, hp.theta)
    return float(np.max(np.abs(A @ hp.psi - 1j * hp.nu * hp.psi)))


def _eigs(A0: np.ndarray, u: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    stack = A0[None, :, :] - np.exp(-1j * thetas)[:, None, None] * np.diag(u)[None, :, :]
    return np.linalg.eigvals(stack)


def _greedy_match(prev: np.ndarray, cand: np.ndarray):
    """Order ``cand`` to follow ``prev``; flag ambiguous moves near the imaginary axis.

    A move is ambiguous when it exceeds half the distance to the nearest other
    eigenvalue.
    """
    n = prev.size
    dist = np.abs(prev[:, None] - cand[None, :])
    order = np.empty(n, dtype=int)
    free_p = np.ones(n, dtype=bool)
    free_c = np.ones(n, dtype=bool)
    flat = np.argsort(dist, axis=None)
    taken = 0
    for idx in flat:
        i, j = divmod(int(idx), n)
        if free_p[i] and free_c[j]:
            order[i] = j
            free_p[i] = free_c[j] = False
            taken += 1
            if taken == n:
                break
    matched = cand[order]
    if n == 1:
        return matched, False
    moves = np.abs(matched - prev)
    sep = np.abs(matched[:, None] - matched[None, :])
    sep[np.diag_indices(n)] = np.inf
    ambiguous = moves > 0.5 * sep.min(axis=1)
    if not ambiguous.any():
        return matched, False
    # A swap between eigenvalues that all stay on one side of the imaginary
    # axis cannot create or hide a sign change, so only those straddling it count.
    involved = ambiguous.copy()
    involved[np.argmin(sep[ambiguous], axis=1)] = True
    re = np.concatenate([prev[involved].real, matched[involved].real])
    return matched, bool(re.min() <= 0.0 <= re.max())


class _Tracker:
    def __init__(self, A0, u):
        self.A0 = A0
        self.u = u
        self.collisions = 0

    def eig(self, theta):
        return _eigs(self.A0, self.u, np.atleast_1d(theta))

    def segments(self, thetas, eigs):
        """Tracked (theta_a, theta_b, mu_a, mu_b) segments covering the grid."""
        cur = eigs[0]
        out = []
        for i in range(len(thetas) - 1):
            out.extend(self._walk(thetas[i], thetas[i + 1], cur, eigs[i + 1], 0))
            cur = out[-1][3]
        return out

    def _walk(self, ta, tb, ea, eb_raw, depth):
        eb, collision = _greedy_match(ea, eb_raw)
        if not collision or depth >= MAX_REFINE_DEPTH:
            if collision:
                self.collisions += 1
            return [(ta, tb, ea, eb)]
        sub = np.linspace(ta, tb, 5)
        sub_eigs = self.eig(sub[1:-1])
        nodes = [ea] + list(sub_eigs) + [eb_raw]
        out = []
        cur = ea
        for k in range(4):
            part = self._walk(sub[k], sub[k + 1], cur, nodes[k + 1], depth + 1)
            out.extend(part)
            cur = part[-1][3]
        return out


def _refine(tracker: _Tracker, ta, tb, mua, mub):
    """Root of Re mu(theta) on [ta, tb] for the branch joining mua to mub."""

    def follow(theta):
        w = (theta - ta) / (tb - ta)
        guess = (1 - w) * mua + w * mub
        ev = tracker.eig(theta)[0]
        return ev[np.argmin(np.abs(ev - guess))]

    def g(theta):
        if theta == ta:
            return mua.real
        if theta == tb:
            return mub.real
        return follow(theta).real

    theta = brentq(g, ta, tb, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return theta, follow(theta)


def _null_vector(A: np.ndarray, nu: float) -> np.ndarray:
    """Inverse iteration for the null vector of ``A - i nu I``."""
    n = A.shape[0]
    M = A - 1j * nu * np.eye(n)
    x = np.ones(n, dtype=complex) + 1j * np.linspace(0.0, 1.0, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        lu = scipy.linalg.lu_factor(M, check_finite=False)
        for _ in range(3):
            y = scipy.linalg.lu_solve(lu, x, check_finite=False)
            if not np.all(np.isfinite(y)):
                break
            x = y / np.linalg.norm(y)
    if not np.all(np.isfinite(x)) or np.max(np.abs(M @ x)) > 1e-9:
        _, _, vh = np.linalg.svd(M)
        x = vh[-1].conj()
    return normalize_psi(x)


def normalize_psi(x: np.ndarray) -> np.ndarray:
    """Unit 2-norm with the largest-modulus component real and positive."""
    x = np.asarray(x, dtype=complex)
    k = int(np.argmax(np.abs(x)))
    x = x * (np.abs(x[k]) / x[k])
    return x / np.linalg.norm(x)


def favorable_spacing(net: PatchNetwork) -> float:
    fav = np.sort(net.m[net.m > 0])
    if fav.size < 2:
        return np.inf
    return float(np.min(np.diff(fav)))


def branch_label(net: PatchNetwork, d: float, nu: float) -> Optional[int]:
    """1-based favourable patch q with m_q nearest to nu, in the small-d regime only."""
    if not d < 0.1 * favorable_spacing(net):
        return None
    fav = np.nonzero(net.m > 0)[0]
    return int(fav[np.argmin(np.abs(net.m[fav] - nu))]) + 1


def _scan_once(net, d, u, grid_size):
    A0 = d * net.D + np.diag(net.m - u)
    tracker = _Tracker(A0, u)
    thetas = np.linspace(0.0, TWO_PI, grid_size + 1)
    eigs = _eigs(A0, u, thetas)
    scale = max(1.0, float(np.max(np.sum(np.abs(A0), axis=1) + u)))
    found = []
    for ta, tb, ea, eb in tracker.segments(thetas, eigs):
        for k in range(ea.size):
            a, b = ea[k].real, eb[k].real
            if (a < 0) == (b < 0):
                continue
            if max(ea[k].imag, eb[k].imag) <= 0:
                continue
            theta, mu = _refine(tracker, ta, tb, ea[k], eb[k])
            if theta <= 0 or theta >= TWO_PI:
                continue
            if mu.imag < IM_FLOOR:
                continue
            if abs(mu.real) > RE_TOL * scale:
                raise ConvergenceError(
                    f"crossing refinement stalled at theta={theta:.17g}: Re mu={mu.real:g}",
                    code="refinement",
                )
            found.append((theta, float(mu.imag)))
    found.sort()
    unique = []
    for theta, nu in found:
        if unique and abs(theta - unique[-1][0]) < 1e-9 and abs(nu - unique[-1][1]) < 1e-9 * max(1.0, nu):
            continue
        unique.append((theta, nu))
    return unique, tracker.collisions


def hopf_scan(
    net: PatchNetwork,
    d: float,
    grid_size: int = 512,
    u: Optional[np.ndarray] = None,
    with_transversality: bool = True,
    details: bool = False,
):
    """All purely imaginary roots ``i nu`` (``nu > 0``) with their first delay.

    The theta grid starts at ``grid_size`` and doubles until the crossing
    count is unchanged for two consecutive doublings. Points come back sorted
    by delay ``r``.
    """
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    if u is None:
        u = equilibrium(net, d).u
    u = np.asarray(u, dtype=float)
    sizes, counts = [], []
    size = grid_size
    stable = 0
    collisions = 0
    while True:
        crossings, collisions = _scan_once(net, d, u, size)
        if counts and len(crossings) == counts[-1]:
            stable += 1
        else:
            stable = 0
        sizes.append(size)
        counts.append(len(crossings))
        if stable >= 2 or size >= MAX_GRID:
            break
        size *= 2

    A0 = d * net.D + np.diag(net.m - u)
    points = []
    for theta, nu in crossings:
        A = A0 - np.exp(-1j * theta) * np.diag(u)
        psi = _null_vector(A, nu)
        hp = HopfPoint(
            d=float(d), theta=theta, nu=nu, r=theta / nu, psi=psi,
            branch=branch_label(net, d, nu),
        )
        if with_transversality:
            hp = replace(hp, transversal=transversality(net, d, hp, u=u))
        points.append(hp)
    points.sort(key=lambda p: p.r)
    if details:
        return ScanResult(points, sizes, counts, collisions)
    return points


def first_hopf(net: PatchNetwork, d: float, grid_size: int = 512, u=None) -> HopfPoint:
    """Smallest Hopf delay ``r_0`` at dispersal ``d``, with its transversality tag."""
    res = hopf_scan(net, d, grid_size, u=u, with_transversality=False, details=True)
    if not res.points:
        raise NoCrossingError(
            f"no purely imaginary root found at d={d:g} (grid sizes {res.grid_sizes}, "
            f"counts {res.counts})"
        )
    hp = res.points[0]
    return replace(hp, transversal=transversality(net, d, hp, u=u))


def track_root(net: PatchNetwork, d: float, u: np.ndarray, r: float, mu0: complex, psi0: np.ndarray,
               maxiter: int = 50):
    """Newton on the bordered system ``[Delta(mu, r) psi = 0, phi^H psi = 1]``.

    ``phi`` is ``psi0``; returns ``(mu, psi)`` or ``None`` if Newton diverges.
    """
    n = net.n
    A0 = d * net.D + np.diag(net.m - u)
    U = np.diag(u)
    phi = psi0 / np.vdot(psi0, psi0).real
    mu, psi = complex(mu0), np.asarray(psi0, dtype=complex).copy()
    scale = max(1.0, abs(mu0))
    # steps bottom out at rounding level, which grows with ||Delta||
    tol = 32 * np.finfo(float).eps * max(scale, float(np.max(np.abs(A0).sum(axis=1))) + float(np.max(u)))
    for _ in range(maxiter):
        e = np.exp(-mu * r)
        Delta = A0 - e * U - mu * np.eye(n)
        F = np.append(Delta @ psi, np.vdot(phi, psi) - 1.0)
        J = np.zeros((n + 1, n + 1), dtype=complex)
        J[:n, :n] = Delta
        J[:n, n] = (r * e * U - np.eye(n)) @ psi
        J[n, :n] = phi.conj()
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return None
        psi = psi + step[:n]
        mu = mu + step[n]
        if not np.isfinite(mu) or abs(mu - mu0) > 0.5 * scale:
            return None
        if np.max(np.abs(step)) < tol:
            return mu, psi
    return None


def crossing_speed(net: PatchNetwork, d: float, hp: HopfPoint, u=None, eps_rel: float = 1e-4):
    """``d Re mu / d r`` at a Hopf point by root tracking and by closed form.

    Returns ``(finite_difference, closed_form)``; the first is ``None`` when
    the bordered Newton iteration fails.
    """
    if u is None:
        u = equilibrium(net, d).u
    eps = eps_rel * hp.r
    mu0 = 1j * hp.nu
    plus = track_root(net, d, u, hp.r + eps, mu0, hp.psi)
    minus = track_root(net, d, u, hp.r - eps, mu0, hp.psi)
    fd = None
    if plus is not None and minus is not None:
        fd = (plus[0].real - minus[0].real) / (2 * eps)
    e = np.exp(-1j * hp.theta)
    upsi2 = np.sum(u * hp.psi**2)
    S = np.sum(hp.psi**2) - hp.r * e * upsi2
    closed = (1j * hp.nu * e * upsi2 / S).real
    return fd, float(closed)


def transversality(net: PatchNetwork, d: float, hp: HopfPoint, u=None, eps_rel: float = 1e-4) -> str:
    """Sign of ``d Re mu / d r`` at the crossing: positive, negative or inconclusive.

    The tracked finite difference decides; the closed form must agree in sign.
    """
    fd, closed = crossing_speed(net, d, hp, u=u, eps_rel=eps_rel)
    if fd is None or fd == 0 or np.sign(fd) != np.sign(closed):
        return "inconclusive"
    return "positive" if fd > 0 else "negative"


@dataclass
class SimplicityReport:
    S: complex
    S_bound: float
    sigma_min: float
    sigma_second: float
    duplicate_growth_rates: bool

    @property
    def S_nonzero(self) -> bool:
        return abs(self.S) > self.S_bound

    @property
    def null_dim_one(self) -> bool:
        return self.sigma_second > 1e3 * self.sigma_min

    @property
    def simple(self) -> bool:
        return self.S_nonzero and self.null_dim_one


def simplicity_probe(net: PatchNetwork, d: float, hp: HopfPoint, u=None) -> SimplicityReport:
    """Numerical check that ``i nu`` is a simple root at ``r = hp.r``.

    ``duplicate_growth_rates`` flags the small-d case with coinciding
    favourable growth rates, where branch labels are not meaningful.
    """
    if u is None:
        u = equilibrium(net, d).u
    e = np.exp(-1j * hp.theta)
    psi = hp.psi
    S = complex(np.sum(psi**2) - hp.r * e * np.sum(u * psi**2))
    bound = 1e-6 * np.linalg.norm(psi) ** 2 * (1.0 + hp.r * float(np.max(np.abs(u))))
    A = char_matrix(net, d, u, hp.theta) - 1j * hp.nu * np.eye(net.n)
    sv = np.linalg.svd(A, compute_uv=False)
    second = float(sv[-2]) if sv.size > 1 else np.inf
    fav = net.m[net.m > 0]
    duplicate = bool(fav.size != np.unique(fav).size)
    return SimplicityReport(S, float(bound), float(sv[-1]), second, duplicate)


def _link(curves_active, points, d):
    """Greedy nearest (theta, nu) association of new points to active curves."""
    pairs = []
    for ci, curve in enumerate(curves_active):
        last = curve.samples[-1][1]
        for pi, hp in enumerate(points):
            rel = max(abs(hp.theta - last.theta) / abs(last.theta), abs(hp.nu - last.nu) / abs(last.nu))
            pairs.append((rel, ci, pi))
    pairs.sort()
    used_c, used_p = set(), set()
    nearest = {}
    for rel, ci, pi in pairs:
        nearest.setdefault(ci, (rel, pi))
        if rel >= CONTINUATION_BOUND or ci in used_c or pi in used_p:
            continue
        used_c.add(ci)
        used_p.add(pi)
        curves_active[ci].samples.append((d, points[pi]))
    ended = []
    for ci, curve in enumerate(curves_active):
        if ci in used_c:
            continue
        rel, pi = nearest.get(ci, (np.inf, None))
        if pi is not None and pi in used_p and rel < CONTINUATION_BOUND:
            curve.end_reason = f"merged near d={d:.17g}"
        else:
            curve.end_reason = f"vanished before d={d:.17g}"
        ended.append(ci)
    fresh = [p for i, p in enumerate(points) if i not in used_p]
    return ended, fresh


def hopf_curves_sweep(net: PatchNetwork, d_grid, grid_size: int = 512, jobs: int = 1) -> list:
    """Hopf points along an increasing ``d`` grid, linked into curves.

    Each curve carries the branch label of its smallest-``d`` sample when that
    sample lies in the small-d regime.
    """
    grid = np.asarray(d_grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("d grid must be positive and strictly increasing")

    def scan(d):
        return hopf_scan(net, d, grid_size, with_transversality=False)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scans = list(pool.map(scan, grid))
    else:
        scans = [scan(d) for d in grid]

    active, done = [], []
    for d, points in zip(grid, scans):
        ended, fresh = _link(active, points, float(d)) if active else ([], points)
        for ci in sorted(ended, reverse=True):
            done.append(active.pop(ci))
        for hp in fresh:
            active.append(HopfCurve(hp.branch, [(float(d), hp)]))
    done.extend(active)
    done.sort(key=lambda c: (c.samples[0][0], c.samples[0][1].r))
    return done


def write_hopf_csv(points, path) -> None:
    with open_text(path) as fh:
        w = csv_writer(fh)
        w.writerow(["d", "branch", "theta", "nu", "r", "l", "transversal"])
        for hp in points:
            w.writerow([
                fmt(hp.d), "" if hp.branch is None else hp.branch,
                fmt(hp.theta), fmt(hp.nu), fmt(hp.r), hp.l, hp.transversal,
            ])


def hopf_to_json(points) -> list:
    return [
        {
            "d": hp.d, "branch": hp.branch, "theta": hp.theta, "nu": hp.nu, "r": hp.r,
            "l": hp.l, "transversal": hp.transversal,
        }
        for hp in points
    ]


def curves_to_json(curves) -> list:
    return [
        {
            "branch": c.branch,
            "samples": [
                {"d": d, "theta": hp.theta, "nu": hp.nu, "r": hp.r} for d, hp in c.samples
            ],
        }
        for c in curves
    ]


def write_curves_json(curves, path) -> None:
    write_json(curves_to_json(curves), path)
