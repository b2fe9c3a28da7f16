"""Gaussian rating-scale models: parameters, canonical form, likelihood.

A trial presents stimulus h, drawing a signal strength from the
stimulus's Gaussian and one value per response criterion from that
criterion's distribution. The response is the index of the smallest
drawn criterion at or above the signal; when every criterion falls below
the signal the overflow response M+1 is given. Three variants:

* FSDT: Gaussian signal and Gaussian criteria (the full model).
* SDT: Gaussian signal, fixed criteria (criterion sigmas are zero).
* CSDT: fixed signal (signal sigmas are zero), Gaussian criteria.

Parameters travel through the chain as the flat vector
[signal means, signal sigmas, criterion means, criterion sigmas] with a
boolean mask marking the free entries. ``fix_parameters`` maps any raw
vector onto the canonical representative of its likelihood equivalence
class; it is idempotent to the bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from bmcmc import _kernels

# Weight of the soft barrier keeping free sigmas away from zero:
# 0.1 / sigma is subtracted from the log likelihood per free sigma.
SOFT_SIGMA_COEFF = 0.1


class ModelVariant(enum.Enum):
    """Which parts of the model carry trial-to-trial noise."""

    FSDT = "fsdt"
    SDT = "sdt"
    CSDT = "csdt"


@dataclass
class CJParameters:
    """Rating-model parameters plus the free/fixed mask.

    ``free_mask`` runs over the flat vector layout (signal means, signal
    sigmas, criterion means, criterion sigmas); False entries are pinned
    to their stored values by the fixer.
    """

    signal_means: np.ndarray
    signal_sigmas: np.ndarray
    criterion_means: np.ndarray
    criterion_sigmas: np.ndarray
    free_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.signal_means = np.asarray(self.signal_means, dtype=float)
        self.signal_sigmas = np.asarray(self.signal_sigmas, dtype=float)
        self.criterion_means = np.asarray(self.criterion_means, dtype=float)
        self.criterion_sigmas = np.asarray(self.criterion_sigmas, dtype=float)
        n = self.signal_means.shape[0]
        m = self.criterion_means.shape[0]
        if self.signal_sigmas.shape != (n,):
            raise ValueError("signal_sigmas length must match signal_means")
        if self.criterion_sigmas.shape != (m,):
            raise ValueError("criterion_sigmas length must match criterion_means")
        if n < 1 or m < 1:
            raise ValueError("need at least one stimulus and one criterion")
        if self.free_mask is None:
            self.free_mask = np.ones(2 * n + 2 * m, dtype=bool)
        self.free_mask = np.asarray(self.free_mask, dtype=bool)
        if self.free_mask.shape != (2 * n + 2 * m,):
            raise ValueError(
                f"free_mask must have length {2 * n + 2 * m}, got {self.free_mask.shape}"
            )

    @property
    def n_signals(self) -> int:
        return self.signal_means.shape[0]

    @property
    def n_criteria(self) -> int:
        return self.criterion_means.shape[0]


def to_vector(params: CJParameters) -> np.ndarray:
    """Flatten parameters into the chain's vector layout."""
    return np.concatenate(
        [
            params.signal_means,
            params.signal_sigmas,
            params.criterion_means,
            params.criterion_sigmas,
        ]
    )


def from_vector(vector: np.ndarray, template: CJParameters) -> CJParameters:
    """Rebuild parameters from a flat vector, keeping the template's mask."""
    n = template.n_signals
    m = template.n_criteria
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (2 * n + 2 * m,):
        raise ValueError(
            f"vector must have length {2 * n + 2 * m}, got {vector.shape}"
        )
    return CJParameters(
        signal_means=vector[:n].copy(),
        signal_sigmas=vector[n:2 * n].copy(),
        criterion_means=vector[2 * n:2 * n + m].copy(),
        criterion_sigmas=vector[2 * n + m:].copy(),
        free_mask=template.free_mask.copy(),
    )


def default_free_mask(variant: ModelVariant, n_signals: int, n_criteria: int) -> np.ndarray:
    """Standard mask: first signal mean pinned, noiseless blocks pinned."""
    n, m = n_signals, n_criteria
    mask = np.ones(2 * n + 2 * m, dtype=bool)
    mask[0] = False
    if variant is ModelVariant.CSDT:
        mask[n:2 * n] = False
    if variant is ModelVariant.SDT:
        mask[2 * n + m:] = False
    return mask


def variant_parameter_indices(variant: ModelVariant, n_signals: int, n_criteria: int) -> np.ndarray:
    """Vector indices of the parameters the variant actually models.

    Structurally-zero sigma blocks (criterion sigmas under SDT, signal
    sigmas under CSDT) are excluded; the pinned first signal mean is
    included.
    """
    n, m = n_signals, n_criteria
    keep = np.ones(2 * n + 2 * m, dtype=bool)
    if variant is ModelVariant.SDT:
        keep[2 * n + m:] = False
    if variant is ModelVariant.CSDT:
        keep[n:2 * n] = False
    return np.flatnonzero(keep)


def _sigma_indices(n: int, m: int) -> np.ndarray:
    return np.concatenate([np.arange(n, 2 * n), np.arange(2 * n + m, 2 * n + 2 * m)])


def _mean_indices(n: int, m: int) -> np.ndarray:
    return np.concatenate([np.arange(0, n), np.arange(2 * n, 2 * n + m)])


def fix_parameters(raw: np.ndarray, template: CJParameters) -> np.ndarray:
    """Map a raw vector onto the canonical member of its equivalence class.

    In order: fixed entries are pinned to the template, a free first
    signal mean is pinned to zero (the location anchor), free sigmas are
    folded positive, free non-first signal means are folded positive and
    sorted ascending, free criterion means are sorted ascending with sign
    kept, and all free parameters are divided by the mean free sigma (the
    scale anchor). Where a sorted block's sigma partners are all free
    they travel with their means, since the likelihood is invariant only
    under permuting whole (mean, sigma) pairs. The final division is
    skipped when the mean free sigma is already within 1e-15 of one,
    which makes the map exactly idempotent.
    """
    n = template.n_signals
    m = template.n_criteria
    size = 2 * n + 2 * m
    v = np.array(raw, dtype=float, copy=True)
    if v.shape != (size,):
        raise ValueError(f"raw vector must have length {size}, got {v.shape}")
    mask = template.free_mask
    template_vector = to_vector(template)
    v[~mask] = template_vector[~mask]
    if mask[0]:
        v[0] = 0.0
    sigma_idx = _sigma_indices(n, m)
    free_sigma = sigma_idx[mask[sigma_idx]]
    v[free_sigma] = np.abs(v[free_sigma])

    free_signal_means = np.array([i for i in range(1, n) if mask[i]], dtype=int)
    if free_signal_means.size:
        means = np.abs(v[free_signal_means])
        order = np.argsort(means, kind="stable")
        partners = free_signal_means + n
        if mask[partners].all():
            sigmas = v[partners]
            v[free_signal_means] = means[order]
            v[partners] = sigmas[order]
        else:
            v[free_signal_means] = means[order]

    free_criterion_means = np.array(
        [2 * n + j for j in range(m) if mask[2 * n + j]], dtype=int
    )
    if free_criterion_means.size:
        means = v[free_criterion_means]
        order = np.argsort(means, kind="stable")
        partners = free_criterion_means + m
        if mask[partners].all():
            sigmas = v[partners]
            v[free_criterion_means] = means[order]
            v[partners] = sigmas[order]
        else:
            v[free_criterion_means] = means[order]

    if free_sigma.size:
        average = float(np.mean(v[free_sigma]))
        if average > 0.0 and abs(average - 1.0) >= 1e-15:
            v[free_sigma] /= average
            mean_idx = _mean_indices(n, m)
            free_means = mean_idx[mask[mean_idx]]
            v[free_means] /= average
    return v


def _check_variant(params: CJParameters, variant: ModelVariant) -> None:
    if variant is ModelVariant.SDT:
        if params.criterion_sigmas.any():
            raise ValueError("SDT requires all criterion sigmas to be zero")
    elif variant is ModelVariant.CSDT:
        if params.signal_sigmas.any():
            raise ValueError("CSDT requires all signal sigmas to be zero")


def _sdt_row(mu: float, sigma: float, criterion_means: np.ndarray) -> np.ndarray:
    """Closed-form response probabilities with noiseless criteria.

    With fixed criteria the response is determined by which gap between
    adjacent sorted criteria the signal lands in, so each cell is a
    difference of signal cdf values. Equal criteria leave the later one a
    zero-width gap, matching the lowest-index tie rule. The overflow cell
    uses the mirrored cdf form, which keeps its full relative precision
    when the top criterion sits far above the signal.
    """
    order = np.argsort(criterion_means, kind="stable")
    cdf = ndtr((criterion_means[order] - mu) / sigma)
    out = np.empty(criterion_means.shape[0] + 1)
    out[order] = np.diff(cdf, prepend=0.0)
    out[-1] = ndtr((mu - criterion_means[order[-1]]) / sigma)
    return out


def response_probabilities(
    params: CJParameters, variant: ModelVariant, h: int
) -> np.ndarray:
    """All M+1 response probabilities for stimulus h.

    This is the reporting path; it always evaluates every cell and raises
    if the kernels fail to converge. The overflow cell is computed
    directly rather than as one minus the integral cells, so a
    configuration that zeroes it reports zero instead of the summed
    integration error of the other cells.
    """
    _check_variant(params, variant)
    if not 0 <= h < params.n_signals:
        raise ValueError(f"stimulus index {h} out of range")
    m = params.n_criteria
    need = np.ones(m, dtype=bool)
    if variant is ModelVariant.SDT:
        sigma = params.signal_sigmas[h]
        if sigma <= 0.0:
            raise ValueError("SDT requires positive signal sigmas")
        return _sdt_row(params.signal_means[h], sigma, params.criterion_means)
    if (params.criterion_sigmas <= 0.0).any():
        raise ValueError(f"{variant.value} requires positive criterion sigmas")
    if variant is ModelVariant.FSDT:
        if params.signal_sigmas[h] <= 0.0:
            raise ValueError("FSDT requires positive signal sigmas")
        cells = _kernels.full_model_row(
            params.signal_means[h],
            params.signal_sigmas[h],
            params.criterion_means,
            params.criterion_sigmas,
            need,
        )
        overflow = _kernels.full_model_overflow(
            params.signal_means[h],
            params.signal_sigmas[h],
            params.criterion_means,
            params.criterion_sigmas,
        )
    else:
        cells = _kernels.fixed_signal_row(
            params.signal_means[h],
            params.criterion_means,
            params.criterion_sigmas,
            need,
        )
        overflow = _kernels.fixed_signal_overflow(
            params.signal_means[h],
            params.criterion_means,
            params.criterion_sigmas,
        )
    if np.isnan(cells).any() or math.isnan(overflow):
        raise RuntimeError(
            f"response-probability quadrature did not converge for stimulus {h}"
        )
    return np.append(cells, overflow)


def probability_matrix(params: CJParameters, variant: ModelVariant) -> np.ndarray:
    """Stacked response probabilities, one row per stimulus."""
    return np.stack(
        [response_probabilities(params, variant, h) for h in range(params.n_signals)]
    )


def log_likelihood(
    params: CJParameters,
    variant: ModelVariant,
    data,
    include_soft_penalty: bool = True,
) -> float:
    """Multinomial log likelihood of a rating matrix under the model.

    ``data`` is anything with a ``counts`` attribute (or a bare array) of
    shape (N, M+1). Only the nonzero cells of each row are evaluated, and
    an observed overflow cell is computed directly, never as one minus
    the integral cells. Returns -inf when an observed cell has zero
    probability (including a free sigma pinned at zero) and NaN when the
    kernels fail, which callers treat as uncomputable.
    """
    counts = np.asarray(getattr(data, "counts", data))
    n = params.n_signals
    m = params.n_criteria
    if counts.shape != (n, m + 1):
        raise ValueError(
            f"counts must have shape ({n}, {m + 1}), got {counts.shape}"
        )
    _check_variant(params, variant)
    if variant is not ModelVariant.SDT and (params.criterion_sigmas <= 0.0).any():
        return -math.inf
    if variant is not ModelVariant.CSDT and (params.signal_sigmas <= 0.0).any():
        return -math.inf
    total = 0.0
    for h in range(n):
        row = counts[h]
        if not row.any():
            continue
        if variant is ModelVariant.SDT:
            probs = _sdt_row(
                params.signal_means[h], params.signal_sigmas[h], params.criterion_means
            )
            for i in range(m + 1):
                if row[i] > 0:
                    if probs[i] <= 0.0:
                        return -math.inf
                    total += row[i] * math.log(probs[i])
            continue
        need = row[:m] > 0
        if variant is ModelVariant.FSDT:
            cells = _kernels.full_model_row(
                params.signal_means[h],
                params.signal_sigmas[h],
                params.criterion_means,
                params.criterion_sigmas,
                need,
            )
        else:
            cells = _kernels.fixed_signal_row(
                params.signal_means[h],
                params.criterion_means,
                params.criterion_sigmas,
                need,
            )
        if np.isnan(cells[need]).any():
            return math.nan
        for i in range(m):
            if row[i] > 0:
                if cells[i] <= 0.0:
                    return -math.inf
                total += row[i] * math.log(cells[i])
        if row[m] > 0:
            if variant is ModelVariant.FSDT:
                rest = _kernels.full_model_overflow(
                    params.signal_means[h],
                    params.signal_sigmas[h],
                    params.criterion_means,
                    params.criterion_sigmas,
                )
            else:
                rest = _kernels.fixed_signal_overflow(
                    params.signal_means[h],
                    params.criterion_means,
                    params.criterion_sigmas,
                )
            if math.isnan(rest):
                return math.nan
            if rest <= 0.0:
                return -math.inf
            total += row[m] * math.log(rest)
    if include_soft_penalty:
        sigma_idx = _sigma_indices(n, m)
        vector = to_vector(params)
        free_sigmas = vector[sigma_idx[params.free_mask[sigma_idx]]]
        if (free_sigmas <= 0.0).any():
            return -math.inf
        total -= SOFT_SIGMA_COEFF * float(np.sum(1.0 / free_sigmas))
    return total
