"""Target-problem contract consumed by the chain drivers.

A problem is a parameter count, a fixer, and a log density. The fixer
maps any raw vector onto the representative of its equivalence class
(folding signs, ordering interchangeable blocks, pinning fixed entries)
and must be idempotent; the chain always evaluates the density at the
fixed vector. A log density that raises, or that returns NaN or +inf,
marks the point uncomputable and the proposal is rejected; returning
-inf is legitimate and means zero density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from bmcmc.chain import ParameterPoint

BoxLimits = Sequence[Tuple[Optional[float], Optional[float]]]


@dataclass
class ProblemDefinition:
    """Bundle of the three things a chain needs to walk a target."""

    n_parameters: int
    fixer: Callable[[np.ndarray], np.ndarray]
    log_density: Callable[[np.ndarray], Optional[float]]


def reflect_fix(raw: np.ndarray, box: BoxLimits) -> np.ndarray:
    """Fold each coordinate into its box by repeated reflection at the walls.

    ``box`` holds one (low, high) pair per coordinate; None or an infinity
    leaves that side open. Reflection is exact folding, so for a box
    (0, 1) a raw 2.3 lands on 0.3 and a raw 1.3 on 0.7, and values already
    inside are untouched. Both-open coordinates pass through. The fold is
    idempotent and keeps a symmetric proposal symmetric, which is what
    makes it a valid fixer for hard limits.
    """
    out = np.array(raw, dtype=float, copy=True)
    if len(box) != out.shape[0]:
        raise ValueError(
            f"box has {len(box)} limit pairs for {out.shape[0]} coordinates"
        )
    for k, (low, high) in enumerate(box):
        lo = -math.inf if low is None else float(low)
        hi = math.inf if high is None else float(high)
        if not lo < hi:
            raise ValueError(f"empty box ({lo}, {hi}) for coordinate {k}")
        x = out[k]
        if math.isinf(lo) and math.isinf(hi):
            continue
        if math.isinf(hi):
            out[k] = lo + abs(x - lo)
        elif math.isinf(lo):
            out[k] = hi - abs(hi - x)
        else:
            period = 2.0 * (hi - lo)
            t = math.fmod(x - lo, period)
            if t < 0.0:
                t += period
            out[k] = lo + ((hi - lo) - abs(t - (hi - lo)))
    return out


def evaluate(problem: ProblemDefinition, raw: np.ndarray) -> ParameterPoint:
    """Fix a raw vector and evaluate the log density there.

    Any exception from the density, and any NaN or +inf result, yields a
    point with ``log_density`` None (uncomputable); -inf passes through.
    """
    values = np.asarray(problem.fixer(np.array(raw, dtype=float, copy=True)), dtype=float)
    if values.shape != (problem.n_parameters,):
        raise ValueError(
            f"fixer returned shape {values.shape}, expected ({problem.n_parameters},)"
        )
    try:
        density = problem.log_density(values)
    except Exception:
        return ParameterPoint(values, None)
    if density is None:
        return ParameterPoint(values, None)
    density = float(density)
    if math.isnan(density) or density == math.inf:
        return ParameterPoint(values, None)
    return ParameterPoint(values, density)
