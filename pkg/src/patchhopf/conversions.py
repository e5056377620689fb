"""Changes of variables and closed-form limiting Hopf values.

The package works in ``(d, r)``. The rescaled form of the model uses
``lam = 1/d`` and ``tau = d r``, with time scaled by ``d``; an imaginary
root ``i nu_lam`` of the rescaled problem corresponds to ``i nu`` with
``nu = nu_lam / lam``.
"""

from __future__ import annotations

import numpy as np

from .network import PatchNetwork
from .spectral import lambda_star


def lam_from_d(d: float) -> float:
    return 1.0 / d


def d_from_lam(lam: float) -> float:
    return 1.0 / lam


def tau_from_r(d: float, r: float) -> float:
    return d * r


def r_from_tau(lam: float, tau: float) -> float:
    return lam * tau


def nu_from_rescaled(nu_lam: float, lam: float) -> float:
    """Imaginary part in ``(d, r)`` units; equals the rescaled ``h = nu_lam / lam``."""
    return nu_lam / lam


def hutchinson_hopf(m: float) -> float:
    """First Hopf delay ``pi / (2 m)`` of ``w' = w (m - w(t - r))``."""
    if not m > 0:
        raise ValueError("growth rate must be positive")
    return np.pi / (2.0 * m)


def average_model_hopf(net: PatchNetwork) -> float:
    """``n pi / (2 sum m)``: the ``d -> inf`` limit of the first Hopf delay."""
    if not net.delta > 0:
        raise ValueError("average model needs sum(m) > 0")
    return hutchinson_hopf(net.delta / net.n)


def local_model_hopf_values(net: PatchNetwork) -> dict:
    """Hopf delay ``pi / (2 m_j)`` of each favourable patch in isolation (1-based keys)."""
    return {j + 1: hutchinson_hopf(float(mj)) for j, mj in enumerate(net.m) if mj > 0}


def local_model_hopf(net: PatchNetwork) -> float:
    """``pi / (2 max m_j)``: the ``d -> 0`` limit of the first Hopf delay."""
    return hutchinson_hopf(float(np.max(net.m)))


def threshold_h(net: PatchNetwork) -> float:
    """``sum(m eta^2) / sum(eta^2)`` at the extinction threshold (sum(m) < 0)."""
    eta = lambda_star(net).eta_hat
    return float(np.sum(net.m * eta**2) / np.sum(eta**2))


def threshold_blowup_limit(net: PatchNetwork) -> float:
    """Limit of ``(d_* - d) r_0(d)`` as ``d`` rises to ``d_*``: ``d_* pi / (2 h)``."""
    th = lambda_star(net)
    return th.d_star * np.pi / (2.0 * threshold_h(net))
