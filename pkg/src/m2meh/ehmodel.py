"""Non-linear RF energy-harvesting characteristic.

Received RF power x maps to harvested power through a saturating logistic

    u(x) = M (1 + e^{ab}) / (e^{ab} + e^{-a(x - 2b)}) - M / e^{ab}   for x >= P0
    u(x) = 0                                                         for x <  P0

with saturation level M, steepness a, midpoint-shaping constant b and
receiver sensitivity P0.  The un-gated curve ubar extends the logistic to all
x >= 0 (ubar(0) = 0, ubar -> M); it is the-version the optimizer works with
once the set of phases that can actually harvest is fixed.

Note: ubar has an inflection at x = b; it is concave for x >= b and convex on
[0, b).  Monotonicity holds everywhere.
"""

from __future__ import annotations

import numpy as np

from m2meh.params import SystemParams

__all__ = [
    "eh_harvest",
    "eh_harvest_smooth",
    "eh_harvest_smooth_deriv",
]


def eh_harvest_smooth(x, params: SystemParams):
    """Un-gated logistic harvest curve, vectorized over x >= 0 (watts)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("received power must be non-negative")
    a, b, sat = params.eh_a, params.eh_b, params.eh_sat_w
    e_ab = np.exp(a * b)
    # exp(-a(x-2b)) can underflow for large x; that limit is exactly sat.
    expo = np.clip(-a * (x - 2.0 * b), -745.0, 700.0)
    out = sat * (1.0 + e_ab) / (e_ab + np.exp(expo)) - sat / e_ab
    return out if out.ndim else float(out)


def eh_harvest_smooth_deriv(x, params: SystemParams):
    """d ubar/dx, vectorized; positive for all x >= 0."""
    x = np.asarray(x, dtype=float)
    a, b, sat = params.eh_a, params.eh_b, params.eh_sat_w
    e_ab = np.exp(a * b)
    expo = np.clip(-a * (x - 2.0 * b), -745.0, 700.0)
    s = np.exp(expo)
    out = sat * (1.0 + e_ab) * a * s / (e_ab + s) ** 2
    return out if out.ndim else float(out)


def eh_harvest(x, params: SystemParams):
    """Gated harvest curve: zero below the sensitivity threshold P0.

    The gate uses x >= P0 (harvesting starts exactly at the threshold);
    set-membership updates elsewhere use a strict comparison, so the
    boundary point belongs to the harvesting branch here.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("received power must be non-negative")
    smooth = np.asarray(eh_harvest_smooth(x, params))
    out = np.where(x >= params.eh_threshold_w, smooth, 0.0)
    return out if out.ndim else float(out)
