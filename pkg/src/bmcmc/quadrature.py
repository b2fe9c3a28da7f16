"""Gaussian densities and adaptive Romberg integration.

Everything downstream of the model equations funnels through this module:
``phi`` and ``Phi`` wrap the scipy special functions so the whole package
shares one definition, ``romberg`` is the reference integrator used both
directly and as the cross-check route for the jitted likelihood kernels,
and ``truncate_infinite`` replaces infinite integration limits with finite
windows wide enough that the discarded tails are below double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy.special import ndtr

# Tail window in standard deviations. A Gaussian integrand is below 1e-15
# of its peak outside mu +/- 8 sigma, so truncation error is invisible at
# the tolerances used anywhere in the package.
TAIL_WINDOW = 8.0

# Refinement cap for romberg(): 2**20 + 1 trapezoid nodes at the last level.
MAX_LEVELS = 20

_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianSpec:
    """Location and scale of one Gaussian density.

    sigma must be strictly positive; zero-width (delta) criteria never
    reach quadrature because their model variant has a closed form.
    """

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


class QuadratureError(RuntimeError):
    """Raised when romberg() fails to converge within MAX_LEVELS.

    Carries the best estimate and the final refinement gap so callers can
    decide whether the partial answer is usable.
    """

    def __init__(self, message: str, estimate: float, gap: float):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap


def phi(x, g: GaussianSpec):
    """Gaussian probability density of ``g`` evaluated at ``x``.

    Accepts scalars or arrays and returns the same shape.
    """
    z = (np.asarray(x, dtype=float) - g.mu) / g.sigma
    out = np.exp(-0.5 * z * z) * (_INV_SQRT2PI / g.sigma)
    return out if out.ndim else float(out)


def Phi(x, g: GaussianSpec):
    """Gaussian cumulative distribution of ``g`` evaluated at ``x``.

    Accepts scalars or arrays and returns the same shape.
    """
    z = (np.asarray(x, dtype=float) - g.mu) / g.sigma
    out = ndtr(z)
    return out if out.ndim else float(out)


def romberg(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-6,
    abs_tol: float = 1e-12,
) -> float:
    """Integrate ``f`` over [a, b] by Richardson-extrapolated trapezoids.

    The trapezoid estimate is refined by doubling the node count; each new
    level extends the Richardson table one column. Convergence is declared
    when consecutive diagonal entries agree within
    ``rel_tol * |estimate| + abs_tol``. Raises QuadratureError (carrying
    the best estimate and the final gap) if MAX_LEVELS refinements are not
    enough.

    Parameters
    ----------
    f : callable mapping a float to a float
    a, b : integration limits, a <= b expected but not required
    rel_tol, abs_tol : convergence tolerances, combined additively
    """
    if a == b:
        return 0.0
    width = b - a
    row_prev = [0.5 * width * (float(f(a)) + float(f(b)))]
    for level in range(1, MAX_LEVELS + 1):
        step = width / (2 ** level)
        new_x = a + step * (2.0 * np.arange(2 ** (level - 1)) + 1.0)
        trapezoid = 0.5 * row_prev[0] + step * math.fsum(float(f(x)) for x in new_x)
        row = [trapezoid]
        for m in range(1, level + 1):
            scale = 4.0 ** m
            row.append((scale * row[m - 1] - row_prev[m - 1]) / (scale - 1.0))
        gap = abs(row[level] - row_prev[level - 1])
        # Two refinements minimum so a flat coarse sample cannot fake
        # convergence before the integrand structure is seen.
        if level >= 2 and gap <= rel_tol * abs(row[level]) + abs_tol:
            return row[level]
        row_prev = row
    raise QuadratureError(
        f"romberg did not converge in {MAX_LEVELS} levels (gap {gap:.3e})",
        estimate=row[MAX_LEVELS],
        gap=gap,
    )


def truncate_infinite(
    limits: Tuple[float, float],
    specs: Sequence[GaussianSpec],
) -> Tuple[float, float]:
    """Replace infinite limits with finite envelopes over ``specs``.

    A lower limit of -inf becomes the smallest ``mu - 8 sigma`` among the
    densities appearing in the integrand; an upper limit of +inf becomes
    the largest ``mu + 8 sigma``. Finite limits pass through unchanged.
    """
    if not specs:
        raise ValueError("truncate_infinite needs at least one GaussianSpec")
    lo, hi = limits
    if math.isinf(lo) and lo < 0.0:
        lo = min(g.mu - TAIL_WINDOW * g.sigma for g in specs)
    if math.isinf(hi) and hi > 0.0:
        hi = max(g.mu + TAIL_WINDOW * g.sigma for g in specs)
    return float(lo), float(hi)
