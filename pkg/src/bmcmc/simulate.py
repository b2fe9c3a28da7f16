"""Pseudo-data generation for the rating models.

The simulator draws every trial the way the model describes it (one
signal value, one value per criterion, smallest criterion at or above
the signal wins) rather than sampling from precomputed cell
probabilities, so it is an independent route against which the
quadrature kernels can be checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bmcmc.models import CJParameters, ModelVariant, _check_variant

# Trials are simulated in blocks of this size to bound memory.
BLOCK = 200_000


@dataclass
class RatingMatrix:
    """Response counts, one row per stimulus, one column per response.

    The last column is the overflow response (signal above every
    criterion). ``trials_per_stimulus`` is derived from the counts when
    not given and validated against them when it is.
    """

    counts: np.ndarray
    trials_per_stimulus: np.ndarray = field(default=None)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[1] < 2:
            raise ValueError("counts must be (n_stimuli, n_responses) with >= 2 responses")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")
        row_sums = self.counts.sum(axis=1)
        if self.trials_per_stimulus is None:
            self.trials_per_stimulus = row_sums
        else:
            self.trials_per_stimulus = np.asarray(self.trials_per_stimulus, dtype=np.int64)
            if not np.array_equal(self.trials_per_stimulus, row_sums):
                raise ValueError("trials_per_stimulus does not match the count rows")
        if (self.trials_per_stimulus == 0).any():
            raise ValueError("every stimulus needs at least one trial")

    @property
    def n_stimuli(self) -> int:
        return self.counts.shape[0]

    @property
    def n_responses(self) -> int:
        return self.counts.shape[1]

    def proportions(self) -> np.ndarray:
        return self.counts / self.trials_per_stimulus[:, None]


def simulate_matrix(
    params: CJParameters,
    variant: ModelVariant,
    trials,
    rng: np.random.Generator,
) -> RatingMatrix:
    """Simulate a rating matrix trial by trial.

    ``trials`` is one count for every stimulus or a per-stimulus
    sequence. Per trial the signal is drawn first, then the criteria in
    index order; ties between equal drawn criteria go to the lowest
    index.
    """
    _check_variant(params, variant)
    n = params.n_signals
    m = params.n_criteria
    trials = np.broadcast_to(np.asarray(trials, dtype=np.int64), (n,))
    if (trials < 1).any():
        raise ValueError("every stimulus needs at least one trial")
    counts = np.zeros((n, m + 1), dtype=np.int64)
    for h in range(n):
        remaining = int(trials[h])
        while remaining > 0:
            block = min(remaining, BLOCK)
            remaining -= block
            signal = params.signal_means[h] + params.signal_sigmas[h] * rng.standard_normal(block)
            criteria = params.criterion_means + params.criterion_sigmas * rng.standard_normal(
                (block, m)
            )
            eligible = criteria >= signal[:, None]
            masked = np.where(eligible, criteria, np.inf)
            winner = np.argmin(masked, axis=1)
            response = np.where(eligible.any(axis=1), winner, m)
            counts[h] += np.bincount(response, minlength=m + 1)
    return RatingMatrix(counts=counts, trials_per_stimulus=trials.copy())
