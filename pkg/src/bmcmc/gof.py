"""Goodness-of-fit statistics and recovery diagnostics.

``gof`` compares observed response proportions against model
probabilities cell by cell: root-mean-square deviation, an unweighted
regression of observed on predicted with 95% limits on its coefficients,
and a Kullback-Leibler divergence in bits. ``classify_fit`` applies the
rough quality guides. The remaining helpers serve parameter-recovery
studies: scale matching between recovered and generating parameters,
restart consistency, and confidence-interval coverage counting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import t as student_t

# Rough quality guides for one fitted rating matrix.
RMSD_GUIDE = 0.025
KL_GUIDE = 0.175
INTERCEPT_BAND = 0.0075
SLOPE_BAND = 0.05

# Restart log likelihoods are consistent when their spread per degree of
# freedom stays below this.
CONSISTENCY_GUIDE = 0.05


@dataclass(frozen=True)
class GofReport:
    """Cell-wise agreement statistics for one fitted matrix."""

    rmsd: float
    r_squared: float
    b0: float
    b1: float
    kl_divergence: float
    b0_halfwidth: float
    b1_halfwidth: float
    n_cells: int


def gof(observed, predicted: np.ndarray) -> GofReport:
    """Compare observed proportions with predicted probabilities.

    ``observed`` is a rating matrix (or anything with ``counts`` and
    ``trials_per_stimulus``); ``predicted`` has the same shape. The
    regression is observed on predicted over all cells; its coefficient
    half-widths are Student-t 95% limits. The divergence floors observed
    zero cells at 1 / (2 * row trials * n_stimuli) so it stays finite,
    and cells with zero predicted probability contribute nothing.
    """
    counts = np.asarray(observed.counts, dtype=float)
    trials = np.asarray(observed.trials_per_stimulus, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if predicted.shape != counts.shape:
        raise ValueError(
            f"predicted shape {predicted.shape} does not match counts {counts.shape}"
        )
    proportions = counts / trials[:, None]
    n_cells = counts.size
    residual = proportions - predicted
    rmsd = float(np.sqrt(np.mean(residual ** 2)))

    x = predicted.ravel()
    y = proportions.ravel()
    x_mean = x.mean()
    y_mean = y.mean()
    sxx = float(np.sum((x - x_mean) ** 2))
    if sxx <= 0.0:
        raise ValueError("predicted probabilities are constant; regression undefined")
    b1 = float(np.sum((x - x_mean) * (y - y_mean)) / sxx)
    b0 = float(y_mean - b1 * x_mean)
    fitted = b0 + b1 * x
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y_mean) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    dof = n_cells - 2
    if dof > 0:
        sigma2 = ss_res / dof
        t_crit = float(student_t.ppf(0.975, dof))
        b1_halfwidth = t_crit * float(np.sqrt(sigma2 / sxx))
        b0_halfwidth = t_crit * float(
            np.sqrt(sigma2 * (1.0 / n_cells + x_mean ** 2 / sxx))
        )
    else:
        b0_halfwidth = float("inf")
        b1_halfwidth = float("inf")

    n_stimuli = counts.shape[0]
    floors = 1.0 / (2.0 * trials * n_stimuli)
    floored = np.where(proportions > 0.0, proportions, floors[:, None])
    mask = predicted > 0.0
    kl = float(
        np.sum(predicted[mask] * np.log2(predicted[mask] / floored[mask]))
    )
    return GofReport(
        rmsd=rmsd,
        r_squared=float(r_squared),
        b0=b0,
        b1=b1,
        kl_divergence=kl,
        b0_halfwidth=b0_halfwidth,
        b1_halfwidth=b1_halfwidth,
        n_cells=n_cells,
    )


def classify_fit(report: GofReport) -> str:
    """Apply the rough quality guides to one report.

    acceptable: deviation and divergence within guides and both
    regression coefficients' 95% confidence half-widths below their
    bands. marginal: deviation and divergence pass but a half-width band
    fails. unacceptable: anything else.
    """
    rmsd_ok = report.rmsd < RMSD_GUIDE
    kl_ok = report.kl_divergence < KL_GUIDE
    b0_ok = report.b0_halfwidth < INTERCEPT_BAND
    b1_ok = report.b1_halfwidth < SLOPE_BAND
    if rmsd_ok and kl_ok:
        return "acceptable" if (b0_ok and b1_ok) else "marginal"
    return "unacceptable"


def rescale_generating(
    recovered: np.ndarray, generating: np.ndarray
) -> Tuple[np.ndarray, float]:
    """Least-squares scale matching the generating values to the recovered.

    The model is scale-free up to the sigma normalisation, so recovery is
    judged after multiplying the generating parameters by the b that
    minimises the squared gap: b = sum(R * G) / sum(G * G). Returns the
    rescaled generating vector and b.
    """
    recovered = np.asarray(recovered, dtype=float)
    generating = np.asarray(generating, dtype=float)
    if recovered.shape != generating.shape:
        raise ValueError("recovered and generating must have the same shape")
    denom = float(np.sum(generating ** 2))
    if denom <= 0.0:
        raise ValueError("generating vector is all zeros; rescale undefined")
    b = float(np.sum(recovered * generating) / denom)
    return b * generating, b


def consistency(log_likelihoods: Sequence[float], dof: int) -> float:
    """Spread of restart log likelihoods per degree of freedom."""
    values = [float(v) for v in log_likelihoods]
    if len(values) < 2:
        raise ValueError("consistency needs at least two restarts")
    if dof < 1:
        raise ValueError("dof must be positive")
    return (max(values) - min(values)) / dof


def coverage_check(
    recovered: np.ndarray,
    limits: np.ndarray,
    rescaled_generating: np.ndarray,
) -> Tuple[int, int]:
    """Count rescaled generating values inside the closed limits.

    ``limits`` holds the lower bounds in row 0 and upper bounds in row 1,
    one column per parameter; endpoints count as covered. Returns
    (hits, total).
    """
    recovered = np.asarray(recovered, dtype=float)
    limits = np.asarray(limits, dtype=float)
    target = np.asarray(rescaled_generating, dtype=float)
    if limits.shape != (2, target.shape[0]):
        raise ValueError(
            f"limits must have shape (2, {target.shape[0]}), got {limits.shape}"
        )
    if recovered.shape != target.shape:
        raise ValueError("recovered and rescaled_generating must have the same shape")
    hits = int(np.sum((limits[0] <= target) & (target <= limits[1])))
    return hits, target.shape[0]
