"""Core state and single-step operations of the bootstrap Markov chain.

The chain walks a parameter vector under a Metropolis rule with a slowly
cooling temperature. Proposals come from two generators: the bootstrap
generator steps by a scaled difference of two archived states, and the
prespecified generator steps by independent Gaussians whose widths follow
the archive spread. Each generator owns a step-size multiplier that is
adjusted whenever a windowed exact binomial test rejects the 1-in-4 target
acceptance rate. Large jumps in the best known density trigger a reset
that reheats, trims the archive, and walks greedily from the best point
for a while.

The functions here perform one event each (one proposal, one acceptance
decision, one bookkeeping update); the loops that string them together
live in :mod:`bmcmc.drivers`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

# Target acceptance rate the step-size adaptation steers towards.
TARGET_ACCEPTANCE = 0.25
# Probability of picking the bootstrap generator once the archive is big
# enough to supply difference vectors.
BOOTSTRAP_FRACTION = 0.9
# Smallest window (in proposals) on which the binomial test may fire.
MIN_WINDOW_PROPOSALS = 8
# Growth factor for the accepted-steps window target after a full window
# passes without a step-size adjustment.
T_LAMBDA_GROWTH = 1.3
# Floor and starting value for the accepted-steps window target.
T_LAMBDA_INITIAL = 32
# Cooling rate: the gap to the target temperature is multiplied by this
# factor on each accepted step.
ANNEAL_GAMMA = 0.98
# A new best exceeding the old best by more than this fraction of the
# current temperature triggers a reset.
RESET_MARGIN = 0.5
# Reheat factor applied to the temperature on reset.
RESET_TEMP_FACTOR = 1.25
# Greedy steps proposed from the best point after a reset, per parameter.
GREEDY_STEPS_PER_PARAMETER = 2


@dataclass
class ParameterPoint:
    """One evaluated location: fixed parameter values plus log density.

    ``log_density`` is None when the density could not be computed there
    (the evaluation raised or returned a non-finite positive value);
    -inf is a valid value meaning the point has zero density.
    """

    values: np.ndarray
    log_density: Optional[float]


@dataclass
class Archive:
    """Store of evaluated points serving as the proposal pool.

    In optimisation mode it holds accepted points; in sampling mode it
    holds the chain state at every iteration and doubles as the sample
    store. Per-parameter spread is maintained as Welford running moments
    so appends and spread queries stay O(n_parameters) regardless of the
    archive size.
    """

    entries: List[ParameterPoint] = field(default_factory=list)

    def __post_init__(self):
        self._recompute_moments()

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, point: ParameterPoint) -> None:
        self.entries.append(point)
        values = point.values
        if self._mean is None:
            self._mean = np.array(values, dtype=float, copy=True)
            self._m2 = np.zeros_like(self._mean)
        else:
            delta = values - self._mean
            self._mean += delta / len(self.entries)
            self._m2 += delta * (values - self._mean)

    def replace_entries(self, entries: List[ParameterPoint]) -> None:
        """Swap the entry list (archive trims) and rebuild the moments."""
        self.entries = entries
        self._recompute_moments()

    def values_matrix(self) -> np.ndarray:
        """Archived parameter vectors stacked into an (n, k) array."""
        return np.stack([e.values for e in self.entries])

    def per_parameter_std(self) -> np.ndarray:
        """Population standard deviation of each parameter over entries."""
        if len(self.entries) < 2:
            return np.zeros_like(self._mean)
        return np.sqrt(np.maximum(self._m2, 0.0) / len(self.entries))

    def _recompute_moments(self) -> None:
        if not self.entries:
            self._mean = None
            self._m2 = None
            return
        matrix = self.values_matrix()
        self._mean = matrix.mean(axis=0)
        self._m2 = ((matrix - self._mean) ** 2).sum(axis=0)


@dataclass
class StepScale:
    """Adaptive step-size multiplier of one proposal generator.

    ``lam`` scales every step the generator emits. A window of recorded
    outcomes feeds an exact binomial test against TARGET_ACCEPTANCE; a
    significant excess multiplies ``lam`` by ``f_lambda``, a significant
    deficit divides it. ``t_lambda`` is the accepted-step count that, when
    reached without any adjustment, closes the window and grows itself,
    so a well-tuned scale is tested on ever longer windows.
    """

    lam: float = 1.0
    t_lambda: int = T_LAMBDA_INITIAL
    f_lambda: float = 1.5
    adjustments_made: int = 0
    window_proposals: int = 0
    window_accepted: int = 0

    def reset_window(self) -> None:
        self.window_proposals = 0
        self.window_accepted = 0


@dataclass
class AnnealState:
    """Temperature schedule plus the best point seen so far."""

    temperature: float
    target_temperature: float
    initial_temperature: float
    best_log_density: Optional[float] = None
    best_point: Optional[ParameterPoint] = None
    greedy_steps_remaining: int = 0


@dataclass
class ChainState:
    """Aggregate mutable state of one running chain."""

    current: ParameterPoint
    archive: Archive
    bootstrap_scale: StepScale
    prespecified_scale: StepScale
    anneal: AnnealState
    n_parameters: int
    sampling: bool = False
    iterations_since_reset: int = 0
    accepted_since_reset: int = 0
    archived_since_reset: int = 0
    total_proposals: int = 0
    total_accepted: int = 0
    converged: bool = False
    trace: Optional[List] = None

    def bootstrap_minimum(self) -> int:
        """Archive size needed before bootstrap proposals switch on."""
        return 2 * self.n_parameters + 4


def binomial_two_sided_p(k: int, n: int, p0: float = TARGET_ACCEPTANCE) -> float:
    """Exact two-sided binomial p-value: twice the smaller tail, capped at 1.

    Tail sums use the pmf ratio recursion in log space relative to the
    observed count, truncated once terms fall below 1e-17 of the partial
    sum, so the result is exact to double precision at any n without
    factorial overflow.
    """
    if n <= 0:
        return 1.0
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must be inside (0, 1), got {p0}")
    ln_p = math.log(p0)
    ln_q = math.log1p(-p0)
    base = (
        math.lgamma(n + 1.0)
        - math.lgamma(k + 1.0)
        - math.lgamma(n - k + 1.0)
        + k * ln_p
        + (n - k) * ln_q
    )
    ratio_down = (1.0 - p0) / p0
    ratio_up = p0 / (1.0 - p0)
    lower = 1.0
    term = 1.0
    j = k
    while j > 0:
        term *= (j / (n - j + 1.0)) * ratio_down
        lower += term
        if term < 1e-17 * lower:
            break
        j -= 1
    upper = 1.0
    term = 1.0
    j = k
    while j < n:
        term *= ((n - j) / (j + 1.0)) * ratio_up
        upper += term
        if term < 1e-17 * upper:
            break
        j += 1
    scale = math.exp(base) if base > -745.0 else 0.0
    return min(1.0, 2.0 * scale * min(lower, upper))


def select_generator(rng: np.random.Generator, archive: Archive, bootstrap_min: int) -> str:
    """Pick the proposal generator for this iteration.

    Bootstrap proposals need archived diversity, so below ``bootstrap_min``
    entries the prespecified generator is used exclusively; from there on
    the bootstrap generator is chosen with probability BOOTSTRAP_FRACTION.
    """
    if len(archive) >= bootstrap_min and rng.random() < BOOTSTRAP_FRACTION:
        return "bootstrap"
    return "prespecified"


def propose_bootstrap(
    archive: Archive, scale: StepScale, rng: np.random.Generator
) -> np.ndarray:
    """Step vector lam * (a - b) for two distinct archived entries a, b."""
    n = len(archive)
    if n < 2:
        raise ValueError("bootstrap proposals need at least two archive entries")
    i = int(rng.integers(n))
    j = int(rng.integers(n - 1))
    if j >= i:
        j += 1
    a = archive.entries[i].values
    b = archive.entries[j].values
    return scale.lam * (a - b)


def propose_prespecified(
    scale: StepScale,
    archive: Archive,
    v_star: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Independent Gaussian step with widths following the archive spread.

    Per-parameter width is the square root of the archive standard
    deviation scaled by this generator's own lam; parameters whose archive
    spread is zero (and the whole vector while the archive holds fewer
    than two entries) fall back to the externally supplied ``v_star``
    widths.
    """
    v_star = np.asarray(v_star, dtype=float)
    if len(archive) >= 2:
        spread = archive.per_parameter_std()
        widths = np.where(spread > 0.0, np.sqrt(spread), v_star)
    else:
        widths = v_star
    return scale.lam * widths * rng.standard_normal(widths.shape[0])


def metropolis_accept(
    current: ParameterPoint,
    candidate: ParameterPoint,
    anneal: AnnealState,
    rng: np.random.Generator,
) -> bool:
    """Tempered Metropolis rule; uncomputable candidates are rejected.

    Both densities at -inf count as a tie and are accepted, so a chain
    started in a zero-density region can still move.
    """
    if candidate.log_density is None:
        return False
    if current.log_density is None:
        raise ValueError("current point must have a computable log density")
    if candidate.log_density == current.log_density:
        return True
    diff = candidate.log_density - current.log_density
    if diff >= 0.0:
        return True
    return rng.random() < math.exp(diff / anneal.temperature)


def record_acceptance(scale: StepScale, accepted: bool, iterations_since_reset: int) -> None:
    """Fold one proposal outcome into the generator's adaptation window.

    After at least MIN_WINDOW_PROPOSALS outcomes the window is tested
    against TARGET_ACCEPTANCE at a significance level that tightens as
    the run since the last reset grows; a rejection adjusts ``lam`` and
    opens a fresh window. A window reaching ``t_lambda`` accepted steps
    without any adjustment closes quietly and raises ``t_lambda``.
    """
    scale.window_proposals += 1
    if accepted:
        scale.window_accepted += 1
    adjusted = False
    if scale.window_proposals >= MIN_WINDOW_PROPOSALS:
        alpha = min(0.5, 5.0 / math.sqrt(iterations_since_reset + 25.0))
        p_value = binomial_two_sided_p(scale.window_accepted, scale.window_proposals)
        if p_value < alpha:
            rate = scale.window_accepted / scale.window_proposals
            if rate > TARGET_ACCEPTANCE:
                scale.lam *= scale.f_lambda
            else:
                scale.lam /= scale.f_lambda
            scale.adjustments_made += 1
            scale.reset_window()
            adjusted = True
    if not adjusted and scale.window_accepted >= scale.t_lambda:
        scale.t_lambda = int(round(scale.t_lambda * T_LAMBDA_GROWTH))
        scale.reset_window()


def anneal_step(anneal: AnnealState, accepted: bool) -> None:
    """Cool one notch towards the target temperature on an accepted step."""
    if accepted:
        anneal.temperature = anneal.target_temperature + ANNEAL_GAMMA * (
            anneal.temperature - anneal.target_temperature
        )


def _trim_archive(state: ChainState) -> None:
    entries = state.archive.entries
    n = len(entries)
    if n <= 2:
        return
    if state.sampling:
        # Drop the oldest half; the sample store must stay recent.
        keep = n - n // 2
        state.archive.replace_entries(entries[n - keep:])
    else:
        # Keep the better half by density, but never shrink below the
        # bootstrap threshold and never lose the best entry.
        keep = min(n, max((n + 1) // 2, state.bootstrap_minimum()))
        scored = sorted(
            entries,
            key=lambda e: -math.inf if e.log_density is None else e.log_density,
            reverse=True,
        )
        state.archive.replace_entries(scored[:keep])


def maybe_reset(anneal: AnnealState, state: ChainState, new_log_density: Optional[float]) -> bool:
    """Track the best point and fire a reset on a large improvement.

    The reset test compares the new density against the best known BEFORE
    this step: an improvement above RESET_MARGIN temperatures means the
    landscape shifted enough that the tuned state is stale. A reset
    reheats (capped at the initial temperature), zeroes the window and
    progress counters, halves both accepted-step window targets, trims
    the archive, and schedules greedy proposals from the best point.
    Returns True when a reset fired so drivers can clear their own
    counters.
    """
    if new_log_density is None:
        return False
    previous_best = anneal.best_log_density
    if previous_best is None or new_log_density > previous_best:
        anneal.best_log_density = new_log_density
        anneal.best_point = state.current
    if previous_best is None:
        return False
    if not new_log_density > previous_best + RESET_MARGIN * anneal.temperature:
        return False
    anneal.temperature = min(
        anneal.temperature * RESET_TEMP_FACTOR, anneal.initial_temperature
    )
    state.iterations_since_reset = 0
    state.accepted_since_reset = 0
    state.archived_since_reset = 0
    for scale in (state.bootstrap_scale, state.prespecified_scale):
        scale.t_lambda = max(T_LAMBDA_INITIAL, scale.t_lambda // 2)
        scale.reset_window()
    _trim_archive(state)
    anneal.greedy_steps_remaining = GREEDY_STEPS_PER_PARAMETER * state.n_parameters
    return True
