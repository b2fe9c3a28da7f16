"""Maximum-likelihood fitting of rating matrices by the bootstrap chain.

``fit_model`` runs several annealed optimisations from jittered starts,
keeps the restart with the best penalty-free log likelihood, continues
it as an ergodic sampler for confidence limits, and wraps the result
with goodness-of-fit statistics. ``make_problem`` adapts a model variant
plus data to the generic problem contract; ``default_start`` builds a
crude data-driven starting point so no generating values are needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import ndtri

from bmcmc.drivers import ChainConfig, confidence_limits, run_optimisation, run_sampling
from bmcmc.gof import GofReport, classify_fit, consistency, gof
from bmcmc.io import FitConfig
from bmcmc.models import (
    CJParameters,
    ModelVariant,
    default_free_mask,
    fix_parameters,
    from_vector,
    log_likelihood,
    probability_matrix,
    to_vector,
)
from bmcmc.problem import ProblemDefinition

# Restart starting points are jittered by this multiplicative band.
JITTER_LOW = 0.8
JITTER_HIGH = 1.2

# The optimisation phase cools below the sampling temperature: at unit
# temperature the chain equilibrates about chi^2(n_free)/2 below the
# maximum and the best point seen fluctuates by several log-likelihood
# units between restarts, which is what the restart-consistency spread
# measures. Cooling the search (sampling still runs at 1) removes that
# fluctuation without extra proposals.
OPTIMISATION_TARGET_TEMPERATURE = 0.2


@dataclass
class FitResult:
    """Everything one fit produced."""

    variant: ModelVariant
    parameters: CJParameters
    vector: np.ndarray
    log_likelihood: float
    log_likelihood_soft: float
    restart_log_likelihoods: List[float]
    consistency: float
    converged: bool
    samples: np.ndarray
    limits: np.ndarray
    predicted: np.ndarray
    gof: GofReport
    classification: str
    total_proposals: int


def make_problem(
    template: CJParameters,
    variant: ModelVariant,
    data,
    include_soft_penalty: bool = True,
) -> ProblemDefinition:
    """Adapt a rating model and its data to the chain's problem contract."""
    n_parameters = 2 * template.n_signals + 2 * template.n_criteria

    def fixer(raw: np.ndarray) -> np.ndarray:
        return fix_parameters(raw, template)

    def density(vector: np.ndarray) -> float:
        return log_likelihood(
            from_vector(vector, template), variant, data, include_soft_penalty
        )

    return ProblemDefinition(
        n_parameters=n_parameters, fixer=fixer, log_density=density
    )


def default_start(data, variant: ModelVariant) -> CJParameters:
    """Crude starting parameters read off the response proportions.

    Each cumulative proportion q_hi estimates a normal cdf at c_i - mu_h
    on some common scale, so z_hi = ndtri(q_hi) is modelled additively as
    c_i - mu_h and solved by alternating means over the cells whose q is
    away from 0 and 1. Criteria no stimulus pins down are interpolated
    from their neighbours; a stimulus with every q saturated falls back
    to the mass-weighted midpoint of its response intervals. All sigmas
    start at one (half for criterion sigmas), except the blocks a
    variant pins at zero.
    """
    counts = np.asarray(data.counts, dtype=float)
    trials = np.asarray(data.trials_per_stimulus, dtype=float)
    n, m_plus_1 = counts.shape
    m = m_plus_1 - 1
    proportions = counts / trials[:, None]
    eps = 1.0 / (2.0 * trials)
    cumulative = np.cumsum(proportions[:, :m], axis=1)
    valid = (cumulative > eps[:, None]) & (cumulative < 1.0 - eps[:, None])
    z = ndtri(np.clip(cumulative, eps[:, None], 1.0 - eps[:, None]))

    signal_means = np.zeros(n)
    criterion_means = np.zeros(m)
    for _ in range(25):
        for i in range(m):
            rows = valid[:, i]
            if rows.any():
                criterion_means[i] = float(np.mean(z[rows, i] + signal_means[rows]))
            else:
                criterion_means[i] = np.nan
        known = ~np.isnan(criterion_means)
        if known.any() and not known.all():
            idx = np.arange(m, dtype=float)
            criterion_means = np.interp(idx, idx[known], criterion_means[known])
        for h in range(n):
            cols = valid[h]
            if cols.any():
                signal_means[h] = float(np.mean(criterion_means[cols] - z[h, cols]))
        signal_means -= signal_means[0]
    for i in range(1, m):
        if criterion_means[i] < criterion_means[i - 1] + 0.05:
            criterion_means[i] = criterion_means[i - 1] + 0.05
    # Interval midpoints stand in for stimuli whose q never leaves 0/1.
    centers = np.concatenate(
        (
            [criterion_means[0] - 1.0],
            0.5 * (criterion_means[:-1] + criterion_means[1:]),
            [criterion_means[-1] + 1.0],
        )
    )
    for h in range(n):
        if not valid[h].any():
            signal_means[h] = float(proportions[h] @ centers)
    # The first signal mean anchors the location scale at zero.
    shift = signal_means[0]
    signal_means -= shift
    criterion_means -= shift
    signal_sigmas = np.ones(n)
    criterion_sigmas = np.full(m, 0.5)
    if variant is ModelVariant.SDT:
        criterion_sigmas = np.zeros(m)
    if variant is ModelVariant.CSDT:
        signal_sigmas = np.zeros(n)
    return CJParameters(
        signal_means=signal_means,
        signal_sigmas=signal_sigmas,
        criterion_means=criterion_means,
        criterion_sigmas=criterion_sigmas,
        free_mask=default_free_mask(variant, n, m),
    )


def _chain_config(config: FitConfig, target_temperature: float) -> ChainConfig:
    return ChainConfig(
        initial_temperature=config.initial_temperature,
        target_temperature=target_temperature,
        v_star=config.v_star,
        max_optimisation_proposals=config.max_optimisation_proposals,
        max_sampling_proposals=config.max_sampling_proposals,
    )


def fit_model(
    data,
    config: FitConfig,
    template: Optional[CJParameters] = None,
    rng: Optional[np.random.Generator] = None,
) -> FitResult:
    """Fit one rating matrix: optimise with restarts, then sample.

    Restart winners are compared on the penalty-free log likelihood; the
    soft sigma barrier only shapes the walk. The sampling stage continues
    the winning chain at the target temperature and supplies the
    percentile confidence limits.
    """
    variant = config.variant
    template = template or default_start(data, variant)
    rng = rng or np.random.default_rng(config.seed)
    base = to_vector(template)
    free = template.free_mask
    problem = make_problem(template, variant, data, config.include_soft_penalty)
    optimise_cfg = _chain_config(config, OPTIMISATION_TARGET_TEMPERATURE)
    sampling_cfg = _chain_config(config, 1.0)

    states = []
    plain_lls = []
    for _ in range(config.restarts):
        start = base.copy()
        start[free] = start[free] * rng.uniform(JITTER_LOW, JITTER_HIGH, int(free.sum()))
        state = run_optimisation(problem, start, optimise_cfg, rng)
        states.append(state)
        best = from_vector(state.anneal.best_point.values, template)
        plain_lls.append(
            log_likelihood(best, variant, data, include_soft_penalty=False)
        )

    winner = int(np.argmax(plain_lls))
    winner_state = states[winner]
    n_cells_dof = data.counts.shape[0] * (data.counts.shape[1] - 1)
    spread = (
        consistency(plain_lls, n_cells_dof) if len(plain_lls) >= 2 else 0.0
    )

    samples = run_sampling(problem, winner_state, config.n_samples, sampling_cfg, rng)
    limits = confidence_limits(samples, config.confidence_level)

    best_vector = winner_state.anneal.best_point.values
    best_params = from_vector(best_vector, template)
    plain = log_likelihood(best_params, variant, data, include_soft_penalty=False)
    soft = log_likelihood(best_params, variant, data, include_soft_penalty=True)
    predicted = probability_matrix(best_params, variant)
    report = gof(data, predicted)
    converged = winner_state.converged and all(s.converged for s in states)

    return FitResult(
        variant=variant,
        parameters=best_params,
        vector=np.array(best_vector, copy=True),
        log_likelihood=float(plain),
        log_likelihood_soft=float(soft),
        restart_log_likelihoods=[float(v) for v in plain_lls],
        consistency=float(spread),
        converged=converged,
        samples=samples,
        limits=limits,
        predicted=predicted,
        gof=report,
        classification=classify_fit(report),
        total_proposals=sum(s.total_proposals for s in states),
    )
