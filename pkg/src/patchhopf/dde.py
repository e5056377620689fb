"""Time integration of the delayed patch model.

    du_j/dt = d * sum_k d_jk u_k + u_j (m_j - u_j(t - r))

Fixed-step classic RK4 on a grid aligned with the delay (``h = r / N``), so
``u(t - r)`` and ``u(t + h - r)`` are stored samples and only the half-step
delayed value needs interpolation (cubic Hermite from stored derivatives).
Histories are constant on ``[-r, 0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from ._io import csv_writer, fmt, open_text
from .errors import InsufficientOscillationError, IntegrationError
from .network import PatchNetwork

DEFAULT_STEPS_PER_DELAY = 100
MIN_STEPS_PER_DELAY = 20
NOISE_FLOOR = 1e-9
MAX_STEPS = 50_000_000

_OK, _NEGATIVE, _NONFINITE = 0, 1, 2


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    d: float
    r: float
    history: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[1]

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    amplitude: float
    n_peaks: int
    peak_spacing_cv: float


@numba.njit(cache=True)
def _rhs(dD, m, y, yd, out):
    n = y.shape[0]
    for j in range(n):
        acc = 0.0
        for k in range(n):
            acc += dD[j, k] * y[k]
        out[j] = acc + y[j] * (m[j] - yd[j])


@numba.njit(cache=True)
def _check(u):
    for j in range(u.shape[0]):
        if not math.isfinite(u[j]):
            return _NONFINITE
        if u[j] < 0.0:
            return _NEGATIVE
    return _OK


@numba.njit(cache=True)
def _rk4_delay(dD, m, hist, h, N, n_steps):
    """RK4 with delay ``N * h``; ring buffers hold the last N + 2 samples."""
    n = hist.shape[0]
    size = N + 2
    out = np.empty((n_steps + 1, n))
    ubuf = np.empty((size, n))
    fbuf = np.empty((size, n))
    u = hist.copy()
    out[0] = u
    ubuf[0] = u
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    ua = np.empty(n)
    ub = np.empty(n)
    mid = np.empty(n)
    for k in range(n_steps):
        a = k - N
        if a < 0:
            # whole delayed interval lies in the constant history
            for j in range(n):
                ua[j] = hist[j]
                ub[j] = hist[j]
                mid[j] = hist[j]
        else:
            sa = a % size
            sb = (a + 1) % size
            for j in range(n):
                ua[j] = ubuf[sa, j]
                ub[j] = ubuf[sb, j]
                mid[j] = 0.5 * (ua[j] + ub[j]) + 0.125 * h * (fbuf[sa, j] - fbuf[sb, j])
        _rhs(dD, m, u, ua, k1)
        fbuf[k % size] = k1
        for j in range(n):
            tmp[j] = u[j] + 0.5 * h * k1[j]
        _rhs(dD, m, tmp, mid, k2)
        for j in range(n):
            tmp[j] = u[j] + 0.5 * h * k2[j]
        _rhs(dD, m, tmp, mid, k3)
        for j in range(n):
            tmp[j] = u[j] + h * k3[j]
        _rhs(dD, m, tmp, ub, k4)
        for j in range(n):
            u[j] = u[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        status = _check(u)
        if status != _OK:
            return out[: k + 2], status, k + 1
        out[k + 1] = u
        ubuf[(k + 1) % size] = u
    return out, _OK, n_steps


@numba.njit(cache=True)
def _rk4_instant(dD, m, u0, h, n_steps, stop_tol):
    """RK4 for the undelayed model; stops early once max|du/dt| < stop_tol."""
    n = u0.shape[0]
    out = np.empty((n_steps + 1, n))
    u = u0.copy()
    out[0] = u
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for k in range(n_steps):
        _rhs(dD, m, u, u, k1)
        if stop_tol > 0.0:
            big = 0.0
            for j in range(n):
                big = max(big, abs(k1[j]))
            if big < stop_tol:
                return out[: k + 1], _OK, k
        for j in range(n):
            tmp[j] = u[j] + 0.5 * h * k1[j]
        _rhs(dD, m, tmp, tmp, k2)
        for j in range(n):
            tmp[j] = u[j] + 0.5 * h * k2[j]
        _rhs(dD, m, tmp, tmp, k3)
        for j in range(n):
            tmp[j] = u[j] + h * k3[j]
        _rhs(dD, m, tmp, tmp, k4)
        for j in range(n):
            u[j] = u[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        status = _check(u)
        if status != _OK:
            return out[: k + 2], status, k + 1
        out[k + 1] = u
    return out, _OK, n_steps


def _raise_status(status, step, h):
    if status == _NEGATIVE:
        raise IntegrationError(
            f"negative state at step {step} (h={h:g}); increase steps_per_delay",
            code="negative-state",
        )
    if status == _NONFINITE:
        raise IntegrationError(f"non-finite state at step {step} (h={h:g})", code="non-finite")


def instant_step(net: PatchNetwork, d: float, steps_per_delay: int = DEFAULT_STEPS_PER_DELAY) -> float:
    """Step size for ``r = 0``: resolves the fastest linear rate of the model."""
    rate = max(1.0, float(np.max(np.abs(net.m))), d * float(np.max(np.abs(np.diag(net.D)))))
    return 1.0 / (steps_per_delay * rate)


def _history(net, d, history):
    if history is None:
        from .equilibrium import equilibrium

        return 0.9 * equilibrium(net, d).u
    hist = np.asarray(history, dtype=float).reshape(-1)
    if hist.size != net.n:
        raise ValueError(f"history has length {hist.size}, expected {net.n}")
    if np.any(hist < 0) or not np.any(hist > 0) or not np.all(np.isfinite(hist)):
        raise ValueError("history must be finite, nonnegative and not identically zero")
    return hist


def simulate(
    net: PatchNetwork,
    d: float,
    r: float,
    history=None,
    t_end: float = 50.0,
    steps_per_delay: int = DEFAULT_STEPS_PER_DELAY,
) -> Trajectory:
    """Integrate from a constant history up to (at least) ``t_end``.

    ``history=None`` starts from ``0.9 * u^d``. The grid step is
    ``r / steps_per_delay``; for ``r = 0`` it comes from :func:`instant_step`
    and is shrunk so the grid ends exactly at ``t_end``.
    """
    if r < 0 or d < 0 or not t_end > 0:
        raise ValueError("need d >= 0, r >= 0 and t_end > 0")
    if steps_per_delay < MIN_STEPS_PER_DELAY:
        raise ValueError(f"steps_per_delay must be >= {MIN_STEPS_PER_DELAY}")
    hist = _history(net, d, history)
    dD = np.ascontiguousarray(d * net.D)
    m = np.ascontiguousarray(net.m)
    if r == 0:
        h = instant_step(net, d, steps_per_delay)
    else:
        h = r / steps_per_delay
    if t_end / h > MAX_STEPS:
        raise ValueError(f"t_end / h = {t_end / h:.3g} exceeds {MAX_STEPS} steps")
    if r == 0:
        n_steps = max(1, math.ceil(t_end / h))
        h = t_end / n_steps
        u, status, step = _rk4_instant(dD, m, hist, h, n_steps, 0.0)
    else:
        n_steps = max(1, math.ceil(t_end / h - 1e-9))
        u, status, step = _rk4_delay(dD, m, hist, h, steps_per_delay, n_steps)
    _raise_status(status, step, h)
    t = np.arange(n_steps + 1) * h
    return Trajectory(t, u, float(d), float(r), hist)


def relax_to_steady(net: PatchNetwork, d: float, u0, tol: float = 1e-12, t_max: float | None = None):
    """Integrate the undelayed model until ``max|du/dt| < tol``.

    Returns ``(u, reached)``. ``t_max`` defaults to ``1e6 / min(1, min|m_j|)``.
    """
    m_abs = np.abs(net.m[net.m != 0])
    if t_max is None:
        t_max = 1e6 / min(1.0, float(m_abs.min()) if m_abs.size else 1.0)
    h = instant_step(net, d, MIN_STEPS_PER_DELAY)
    dD = np.ascontiguousarray(d * net.D)
    m = np.ascontiguousarray(net.m)
    u = np.asarray(u0, dtype=float).copy()
    chunk = 200_000
    t = 0.0
    while t < t_max:
        out, status, step = _rk4_instant(dD, m, u, h, chunk, tol)
        _raise_status(status, step, h)
        u = out[-1].copy()
        if step < chunk:
            return u, True
        t += chunk * h
    return u, False


def amplitude_ratio(traj: Trajectory, reference: np.ndarray, patch: int = 1) -> float:
    """max|u_p - ref_p| over the last third of the run divided by the middle third."""
    t_end = traj.t[-1]
    x = traj.u[:, patch - 1] - reference[patch - 1]
    middle = (traj.t >= t_end / 3) & (traj.t < 2 * t_end / 3)
    last = traj.t >= 2 * t_end / 3
    a_mid = float(np.max(np.abs(x[middle])))
    a_last = float(np.max(np.abs(x[last])))
    # deviations at rounding level count as fully decayed
    if a_last <= NOISE_FLOOR * max(1.0, float(np.max(np.abs(reference)))):
        return 0.0
    return a_last / a_mid


def perturbed_history(u_eq: np.ndarray, size: float = 0.05) -> np.ndarray:
    alt = np.where(np.arange(u_eq.size) % 2 == 0, 1.0, -1.0)
    return u_eq * (1.0 + size * alt)


def stability_verdict(
    net: PatchNetwork,
    d: float,
    r: float,
    horizon: float,
    steps_per_delay: int = DEFAULT_STEPS_PER_DELAY,
) -> str:
    """Classify long-run behaviour near ``u^d`` as converges/oscillates/undecided.

    Starts 5% off the equilibrium (alternating sign across patches) and
    compares the deviation of patch 1 over the last and middle thirds of the
    horizon: ratio < 0.2 converges, > 0.9 oscillates, otherwise undecided.
    """
    from .equilibrium import equilibrium

    u_eq = equilibrium(net, d).u
    traj = simulate(net, d, r, perturbed_history(u_eq), horizon, steps_per_delay)
    ratio = amplitude_ratio(traj, u_eq)
    if ratio < 0.2:
        return "converges"
    if ratio > 0.9:
        return "oscillates"
    return "undecided"


def estimate_period(traj: Trajectory, patch: int = 1, t_skip: float = 0.0) -> PeriodEstimate:
    """Period and amplitude of patch ``patch`` (1-based) after ``t_skip``.

    Peaks are strict local maxima above the post-transient mean, each refined
    by a parabola through its three samples.
    """
    if not t_skip < traj.t[-1]:
        raise ValueError("t_skip must be smaller than the final time")
    keep = traj.t >= t_skip
    t = traj.t[keep]
    x = traj.u[keep, patch - 1]
    if x.size < 3:
        raise InsufficientOscillationError("insufficient oscillation: too few samples")
    mean = x.mean()
    y0, y1, y2 = x[:-2], x[1:-1], x[2:]
    idx = np.nonzero((y1 > y0) & (y1 > y2) & (y1 > mean))[0]
    if idx.size < 3:
        raise InsufficientOscillationError(
            f"insufficient oscillation: {idx.size} peaks after t={t_skip:g}"
        )
    h = t[1] - t[0]
    a, b, c = y0[idx], y1[idx], y2[idx]
    curv = a - 2.0 * b + c
    offset = np.where(curv != 0, 0.5 * (a - c) / np.where(curv != 0, curv, 1.0), 0.0)
    peaks = t[idx + 1] + offset * h
    spacing = np.diff(peaks)
    period = float(spacing.mean())
    cv = float(spacing.std() / period)
    return PeriodEstimate(period, float(0.5 * (x.max() - x.min())), int(idx.size), cv)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open_text(path) as fh:
        w = csv_writer(fh)
        w.writerow(["t"] + [f"u{j + 1}" for j in range(traj.n)])
        for t, row in zip(traj.t, traj.u):
            w.writerow([fmt(t)] + [fmt(v) for v in row])


def trajectory_to_json(traj: Trajectory) -> dict:
    return {"d": traj.d, "r": traj.r, "t": traj.t.tolist(), "u": traj.u.tolist()}


def pattern_export(traj: Trajectory, path, header: bool = False) -> None:
    """Write the samples-by-patches matrix of ``u`` (no time column).

    Rows are time samples, columns patches, ready for heat-map rendering.
    """
    with open_text(path) as fh:
        w = csv_writer(fh)
        if header:
            w.writerow([f"u{j + 1}" for j in range(traj.n)])
        for row in traj.u:
            w.writerow([fmt(v) for v in row])


def read_pattern(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if text and text[0].startswith("u"):
        text = text[1:]
    return np.array([[float(v) for v in line.split(",")] for line in text if line])
