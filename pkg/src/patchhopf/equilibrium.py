"""Positive equilibrium ``u^d`` of the patch model and its limiting profiles.

The steady-state equations are

    F_j(u) = d * sum_k d_jk u_k + u_j (m_j - u_j) = 0.

Because the rows of ``D`` sum to zero the coupling term is evaluated as
``d * sum_k d_jk (u_k - u_j)``, which keeps the residual free of the
cancellation error that would otherwise grow like ``d * |u|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._io import csv_writer, fmt, open_text
from .dde import relax_to_steady
from .errors import ConvergenceError, NoEquilibriumError, ThresholdUndefinedError
from .network import PatchNetwork
from .spectral import lambda_star

RESIDUAL_TOL = 1e-10
POSITIVITY_FLOOR = 1e-14
MAX_HALVINGS = 30
MAX_NEWTON = 100


@dataclass(frozen=True)
class EquilibriumState:
    d: float
    u: np.ndarray
    residual: float
    method: str


@dataclass(frozen=True)
class ThresholdExpansion:
    lambda_star: float
    eta_hat: np.ndarray
    alpha_star: float
    xi_star: np.ndarray
    xi_residual: float


def residual_vector(net: PatchNetwork, d: float, u: np.ndarray) -> np.ndarray:
    off = net.D - np.diag(np.diag(net.D))
    coupling = np.sum(off * (u[None, :] - u[:, None]), axis=1)
    return d * coupling + u * (net.m - u)


def jacobian(net: PatchNetwork, d: float, u: np.ndarray) -> np.ndarray:
    return d * net.D + np.diag(net.m - 2.0 * u)


def _residual(net, d, u):
    return float(np.max(np.abs(residual_vector(net, d, u))))


def attainable_residual(net: PatchNetwork, d: float, u: np.ndarray) -> float:
    """Residual gate: 1e-10, or the rounding floor when ``d`` is huge."""
    eps = np.finfo(float).eps
    scale = d * float(np.max(np.abs(net.D))) * float(np.max(np.abs(u)))
    return max(RESIDUAL_TOL, 64 * eps * scale)


def d_hat(net: PatchNetwork) -> float:
    """Largest dispersal rate admitting a positive equilibrium (inf if sum(m) >= 0)."""
    if net.delta >= 0:
        return np.inf
    return lambda_star(net).d_star


def newton(net: PatchNetwork, d: float, u0: np.ndarray):
    """Damped Newton with step halving and a positivity floor.

    Returns ``(u, residual, converged)``.
    """
    u = np.maximum(np.asarray(u0, dtype=float), POSITIVITY_FLOOR)
    res = _residual(net, d, u)
    for _ in range(MAX_NEWTON):
        if res < 1e-13:
            return u, res, True
        try:
            step = np.linalg.solve(jacobian(net, d, u), -residual_vector(net, d, u))
        except np.linalg.LinAlgError:
            return u, res, False
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = np.maximum(u + t * step, POSITIVITY_FLOOR)
            trial_res = _residual(net, d, trial)
            if trial_res < res:
                break
            t *= 0.5
        else:
            # no decrease: either at the rounding floor or stuck
            return u, res, res < attainable_residual(net, d, u)
        u, res = trial, trial_res
    return u, res, res < attainable_residual(net, d, u)


def monotone_newton(net: PatchNetwork, d: float):
    """Undamped Newton from the constant supersolution ``max(m)_+``.

    ``F`` is concave with a quasi-positive Jacobian, and at any point above the
    positive equilibrium the Jacobian has negative spectral bound; Newton
    iterates from a supersolution therefore decrease monotonically to ``u^d``
    and cannot be caught by the semi-trivial boundary solutions.
    Returns ``(u, residual, converged)``.
    """
    u = np.full(net.n, float(np.max(net.m)))
    res = _residual(net, d, u)
    for _ in range(MAX_NEWTON):
        if res < 1e-13:
            break
        try:
            u_new = u + np.linalg.solve(jacobian(net, d, u), -residual_vector(net, d, u))
        except np.linalg.LinAlgError:
            return u, res, False
        res_new = _residual(net, d, u_new)
        if not np.all(u_new > 0) or (np.all(u_new >= u) and res_new >= res):
            # stalled at the rounding floor
            break
        u, res = u_new, res_new
    return u, res, res < attainable_residual(net, d, u) and bool(np.all(u > POSITIVITY_FLOOR))


def initial_guess(net: PatchNetwork, d: float, expansion: "ThresholdExpansion | None" = None) -> np.ndarray:
    m_pos = np.maximum(net.m, 0.0)
    if d <= 1.0:
        return np.maximum(m_pos, 1e-3 * m_pos.max())
    if net.delta > 0:
        return np.full(net.n, net.delta / net.n)
    if expansion is None:
        expansion = threshold_expansion(net)
    gap = 1.0 / d - expansion.lambda_star
    guess = expansion.alpha_star * gap * (expansion.eta_hat + gap * expansion.xi_star)
    if np.all(guess > 0):
        return guess
    return expansion.alpha_star * gap * expansion.eta_hat


def equilibrium(net: PatchNetwork, d: float, guess=None) -> EquilibriumState:
    """Unique positive equilibrium at dispersal rate ``d``.

    Damped Newton first, then monotone Newton from a supersolution; if both
    fail the undelayed model is integrated until it settles (it converges
    globally to ``u^d``) and Newton polishes the result.
    """
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    dh = d_hat(net)
    if d >= dh:
        raise NoEquilibriumError(
            f"no positive equilibrium (extinction regime): d={d:g} >= d_*={dh:.17g}",
            code="extinction-regime",
        )
    u0 = initial_guess(net, d) if guess is None else np.asarray(guess, dtype=float)
    u, res, ok = newton(net, d, u0)
    method = "newton"
    history = [res]
    if not (ok and np.all(u > POSITIVITY_FLOOR)):
        # the damped iteration can settle on a semi-trivial boundary solution
        u, res, ok = monotone_newton(net, d)
        history.append(res)
    if not (ok and np.all(u > POSITIVITY_FLOOR)):
        method = "timestep-fallback"
        start = np.maximum(u0, 1e-3 * max(1.0, float(np.max(np.abs(net.m)))))
        relaxed, _ = relax_to_steady(net, d, start)
        u, res, ok = newton(net, d, relaxed)
        history.append(res)
    if not (res < attainable_residual(net, d, u) and np.all(u > POSITIVITY_FLOOR)):
        raise ConvergenceError(
            f"equilibrium solve failed at d={d:g}; residual history {history}",
            code="equilibrium-failed",
        )
    u = np.array(u)
    u.setflags(write=False)
    return EquilibriumState(float(d), u, res, method)


def equilibrium_limit_small_d(net: PatchNetwork) -> np.ndarray:
    """Componentwise positive part of ``m``: the ``d -> 0`` limit of ``u^d``."""
    if np.any(net.m == 0):
        raise ValueError("limit formula requires every m_j nonzero")
    return np.maximum(net.m, 0.0)


def equilibrium_limit_large_d(net: PatchNetwork) -> np.ndarray:
    """Uniform ``sum(m)/n``: the ``d -> inf`` limit of ``u^d``."""
    if not net.delta > 0:
        raise ValueError(f"large-d limit needs sum(m) > 0, got {net.delta:g}")
    return np.full(net.n, net.delta / net.n)


def threshold_expansion(net: PatchNetwork) -> ThresholdExpansion:
    """Leading-order profile of ``u`` near the extinction threshold (sum(m) < 0).

    With ``lam = 1/d`` close to ``lam_*``,
    ``u ~ alpha (lam - lam_*) [eta + (lam - lam_*) xi]`` where ``eta`` is the
    Perron vector at ``lam_*`` and ``xi`` is orthogonal to ``eta``.
    """
    if net.delta >= 0:
        raise ThresholdUndefinedError(
            f"threshold expansion needs sum(m) < 0, got {net.delta:g}"
        )
    th = lambda_star(net)
    lam, eta, m = th.lambda_star, th.eta_hat, net.m
    alpha = float(np.sum(m * eta**2) / (lam * np.sum(eta**3)))
    A = net.D + lam * np.diag(m)
    rhs = -(m * eta - lam * alpha * eta**2)
    system = np.vstack([A, eta[None, :]])
    xi, *_ = np.linalg.lstsq(system, np.append(rhs, 0.0), rcond=None)
    resid = float(np.max(np.abs(A @ xi - rhs)))
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if resid > 1e-10 * scale or abs(eta @ xi) > 1e-10 * scale:
        raise ConvergenceError(
            f"restricted system for xi is singular (residual {resid:g})", code="internal"
        )
    return ThresholdExpansion(lam, eta, alpha, xi, resid)


def branch_sweep(net: PatchNetwork, d_grid) -> list[EquilibriumState]:
    """Continuation along an increasing grid of ``d``, seeding from the previous point."""
    grid = np.asarray(d_grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("d grid must be positive and strictly increasing")
    out = []
    guess = None
    for d in grid:
        state = equilibrium(net, d, guess=guess)
        out.append(state)
        guess = state.u
    return out


def write_branch_csv(states, path) -> None:
    n = states[0].u.size if states else 0
    with open_text(path) as fh:
        w = csv_writer(fh)
        w.writerow(["d"] + [f"u{j + 1}" for j in range(n)] + ["residual", "method"])
        for s in states:
            w.writerow([fmt(s.d)] + [fmt(x) for x in s.u] + [fmt(s.residual), s.method])


def branch_to_json(states) -> list:
    return [
        {"d": s.d, "u": s.u.tolist(), "residual": s.residual, "method": s.method} for s in states
    ]
