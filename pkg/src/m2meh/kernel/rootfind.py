"""Robust 1-D root finding for monotone functions."""

from __future__ import annotations

from typing import Callable

from m2meh.errors import NumericError


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = 1e-10,
    rel_x_tol: float = 1e-13,
    max_iter: int = 300,
) -> float:
    """Root of f on [lo, hi]; requires a sign change (f(lo)*f(hi) <= 0).

    Stops when |f(mid)| <= tol or the bracket width falls below
    rel_x_tol * |mid|.  Values of +-inf at the endpoints are accepted (only
    their sign is used).
    """
    if not lo < hi:
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo < 0) == (f_hi < 0):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f={f_lo:.3e}, {f_hi:.3e}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= tol or (hi - lo) <= rel_x_tol * max(abs(mid), 1e-300):
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def expand_bracket(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    factor: float = 2.0,
    cap: float = 1e9,
) -> tuple[float, float]:
    """Grow [lo, hi] upward by `factor` until f changes sign (f increasing).

    Assumes f(lo) < 0 is wanted; raises NumericError if no sign change is
    found below `cap`.
    """
    f_lo = f(lo)
    if f_lo > 0:
        # shrink lo towards zero until negative
        while f_lo > 0 and lo > 1e-300:
            lo /= factor
            f_lo = f(lo)
        if f_lo > 0:
            raise NumericError("could not find a negative lower bracket")
    hi = max(hi, lo * factor)
    while hi <= cap:
        if f(hi) > 0:
            return lo, hi
        hi *= factor
    raise NumericError(f"no sign change found below cap {cap:g}")
