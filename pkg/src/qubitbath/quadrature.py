"""Adaptive Gauss-Legendre quadrature and principal-value integrals.

Panels are refined level by level: each panel is compared against the sum
of its two halves, and accepted once the difference is below its share of
the tolerance. All panels at one level are evaluated in a single vectorised
call, so integrands must accept ndarrays of any shape.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import InvalidInputError, QuadratureError

Integrand = Callable[[np.ndarray], np.ndarray]

_GL_ORDER = 20
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
_INITIAL_PANELS = 4
_MAX_PANELS = 200_000
_EPS = np.finfo(float).eps


def _gauss_panels(f: Integrand, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Panel integrals and panel integrals of ``|f|`` (for the roundoff floor)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x))
    return half * (fx @ _WEIGHTS), half * (np.abs(fx) @ _WEIGHTS)


def integrate(
    f: Integrand,
    lo: float,
    hi: float,
    tol: float = 1e-10,
    breakpoints: Iterable[float] = (),
    max_panels: int = _MAX_PANELS,
) -> tuple[complex | float, float]:
    """Integrate a smooth function over ``[lo, hi]``.

    Parameters
    ----------
    f : callable
        Vectorised integrand; may be real or complex valued.
    lo, hi : float
        Finite integration limits with ``lo < hi``.
    tol : float
        Absolute error target.
    breakpoints : iterable of float
        Interior points that must be panel edges (kinks, removable points).
    max_panels : int
        Budget on the total number of panel evaluations.

    Returns
    -------
    value, error_estimate
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise InvalidInputError(f"invalid integration interval [{lo}, {hi}]")
    if not tol > 0:
        raise InvalidInputError("tolerance must be positive")

    edges = sorted({float(lo), float(hi), *(float(b) for b in breakpoints if lo < b < hi)})
    cuts = [np.linspace(a, b, _INITIAL_PANELS + 1) for a, b in zip(edges[:-1], edges[1:])]
    a = np.concatenate([c[:-1] for c in cuts])
    b = np.concatenate([c[1:] for c in cuts])

    width = hi - lo
    coarse, _ = _gauss_panels(f, a, b)
    total = 0.0
    err_total = 0.0
    used = a.size
    while a.size:
        mid = 0.5 * (a + b)
        left, left_abs = _gauss_panels(f, a, mid)
        right, right_abs = _gauss_panels(f, mid, b)
        fine = left + right
        err = np.abs(fine - coarse)
        # accept once the panel share of tol is met or the difference is at
        # roundoff level; panels too narrow to split are accepted as they stand
        floor = 100 * _EPS * (left_abs + right_abs)
        tiny = (b - a) <= 64 * _EPS * np.maximum(1.0, np.abs(mid))
        ok = (err <= np.maximum(tol * (b - a) / width, floor)) | tiny
        total = total + fine[ok].sum()
        err_total += float(err[ok].sum())
        used += 2 * a.size
        if ok.all():
            break
        if used > max_panels:
            raise QuadratureError(
                f"quadrature budget of {max_panels} panels exhausted",
                estimates=(total + coarse[~ok].sum(), total + fine[~ok].sum()),
            )
        keep = ~ok
        a, b = np.concatenate([a[keep], mid[keep]]), np.concatenate([mid[keep], b[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    if np.iscomplexobj(total):
        return complex(total), err_total
    return float(total), err_total


def pv_integral(
    f: Integrand,
    pole: float,
    domain: tuple[float, float],
    tol: float = 1e-10,
) -> float:
    """Cauchy principal value of ``int f(u) / (u - pole) du`` over ``domain``.

    The pole is made a panel edge and removed by subtraction::

        PV int f/(u-p) = int (f(u) - f(p))/(u-p) du + f(p) log((hi-p)/(p-lo))

    If the pole lies outside the domain the ordinary integral is returned.

    Examples
    --------
    >>> round(pv_integral(lambda u: u, 0.0, (-1.0, 1.0)), 12)
    2.0
    """
    lo, hi = map(float, domain)
    pole = float(pole)
    if not lo < hi:
        raise InvalidInputError(f"invalid domain {domain}")
    if pole == lo or pole == hi:
        raise InvalidInputError("principal value diverges for a pole at an endpoint")
    if pole < lo or pole > hi:
        value, _ = integrate(lambda u: f(u) / (u - pole), lo, hi, tol)
        return value

    fp = np.asarray(f(np.array([pole])))[0]

    def smooth(u):
        return (f(u) - fp) / (u - pole)

    value, _ = integrate(smooth, lo, hi, 0.5 * tol, breakpoints=(pole,))
    return value + fp * np.log((hi - pole) / (pole - lo))
