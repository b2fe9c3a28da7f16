"""Chain drivers: annealed optimisation, ergodic sampling, and limits.

``run_optimisation`` anneals from a hot start until the walk has drifted
direction-free for long enough, returning the chain state with the best
point found. ``run_sampling`` continues the same state at the target
temperature, archiving the current point every iteration, until enough
fresh samples and enough step-size-weighted accepted moves have
accumulated since the last reset. ``confidence_limits`` turns any sample
matrix into percentile intervals.

Both drivers are capped in proposal count; hitting a cap flags the state
as not converged instead of looping forever.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from bmcmc.chain import (
    AnnealState,
    Archive,
    ChainState,
    StepScale,
    anneal_step,
    maybe_reset,
    metropolis_accept,
    propose_bootstrap,
    propose_prespecified,
    record_acceptance,
    select_generator,
)
from bmcmc.problem import ProblemDefinition, evaluate

# Default interval (in accepted steps) between drift-tracker snapshots.
DRIFT_INTERVAL = 24
# Reversal count demanded before optimisation may stop, floored here and
# raised to the parameter count for high-dimensional problems.
MIN_REVERSALS = 10
# Optimisation also demands this many accepted steps since the last
# reset, divided by the bootstrap lam squared.
OPTIMISATION_ACCEPT_CONSTANT = 3.0
# Sampling requires the accepted inverse-square-lam sum to reach this
# factor times n_parameters times the requested sample count.
SAMPLING_BUDGET_FACTOR = 1.4


@dataclass
class ChainConfig:
    """Knobs shared by the optimisation and sampling drivers."""

    initial_temperature: float = 10.0
    target_temperature: float = 1.0
    v_star: float = 0.5
    max_optimisation_proposals: int = 10 ** 6
    max_sampling_proposals: int = 10 ** 7
    drift_interval: int = DRIFT_INTERVAL
    min_reversals: int = MIN_REVERSALS
    record_trace: bool = False


@dataclass
class DriftTracker:
    """Detects when the optimiser stops drifting in a consistent direction.

    Every ``interval`` accepted steps the current position is snapshotted;
    each new snapshot closes a triple (a, b, c) whose two displacement
    vectors either oppose each other (negative dot product) or vanish,
    and such a triple counts one reversal. A right-angle turn (zero dot
    product between nonzero displacements) is not a reversal.
    """

    interval: int = DRIFT_INTERVAL
    sampled_points: List[np.ndarray] = field(default_factory=list)
    reversal_count: int = 0
    accepted_seen: int = 0

    def reset(self) -> None:
        self.sampled_points.clear()
        self.reversal_count = 0
        self.accepted_seen = 0


@dataclass
class ErgodicityBudget:
    """Accepted-step budget weighted by the generating step size.

    Small-lam regimes move slowly, so each accepted step contributes
    1 / lam**2; sampling may stop only once the sum reaches ``required``.
    """

    required: float
    lambda_inverse_square_sum: float = 0.0

    def add(self, lam: float) -> None:
        self.lambda_inverse_square_sum += 1.0 / (lam * lam)

    def satisfied(self) -> bool:
        return self.lambda_inverse_square_sum >= self.required

    def reset(self) -> None:
        self.lambda_inverse_square_sum = 0.0


def detect_drift(tracker: DriftTracker, new_accepted: np.ndarray) -> bool:
    """Feed one accepted position; True when a reversal was just recorded."""
    tracker.accepted_seen += 1
    if tracker.accepted_seen % tracker.interval != 0:
        return False
    tracker.sampled_points.append(np.array(new_accepted, dtype=float, copy=True))
    if len(tracker.sampled_points) < 3:
        return False
    a, b, c = tracker.sampled_points[-3:]
    first = b - a
    second = c - b
    if not first.any() or not second.any():
        tracker.reversal_count += 1
        return True
    if float(first @ second) < 0.0:
        tracker.reversal_count += 1
        return True
    return False


def _chain_iteration(
    problem: ProblemDefinition,
    state: ChainState,
    v_star: np.ndarray,
    rng: np.random.Generator,
    tracker: Optional[DriftTracker],
    budget: Optional[ErgodicityBudget],
) -> bool:
    """One proposal-evaluate-accept-bookkeep cycle. Returns acceptance."""
    state.total_proposals += 1
    state.iterations_since_reset += 1
    kind = select_generator(rng, state.archive, state.bootstrap_minimum())
    if kind == "bootstrap":
        scale = state.bootstrap_scale
        step = propose_bootstrap(state.archive, scale, rng)
    else:
        scale = state.prespecified_scale
        step = propose_prespecified(scale, state.archive, v_star, rng)
    lam_used = scale.lam
    greedy = state.anneal.greedy_steps_remaining > 0
    base = state.anneal.best_point if greedy else state.current
    candidate = evaluate(problem, base.values + step)
    accepted = metropolis_accept(state.current, candidate, state.anneal, rng)
    record_acceptance(scale, accepted, state.iterations_since_reset)
    anneal_step(state.anneal, accepted)
    if state.trace is not None:
        state.trace.append((kind, accepted))
    if accepted:
        state.current = candidate
        state.total_accepted += 1
        state.accepted_since_reset += 1
        if greedy:
            state.anneal.greedy_steps_remaining -= 1
        if budget is not None:
            budget.add(lam_used)
        if not state.sampling:
            state.archive.append(candidate)
        if tracker is not None:
            detect_drift(tracker, candidate.values)
    if state.sampling:
        state.archive.append(state.current)
        state.archived_since_reset += 1
    if accepted and maybe_reset(state.anneal, state, candidate.log_density):
        if tracker is not None:
            tracker.reset()
        if budget is not None:
            budget.reset()
    return accepted


def _initial_state(problem: ProblemDefinition, start: np.ndarray, config: ChainConfig) -> ChainState:
    start_point = evaluate(problem, np.asarray(start, dtype=float))
    if start_point.log_density is None:
        raise ValueError("log density is uncomputable at the start point")
    anneal = AnnealState(
        temperature=config.initial_temperature,
        target_temperature=config.target_temperature,
        initial_temperature=config.initial_temperature,
        best_log_density=start_point.log_density,
        best_point=start_point,
    )
    return ChainState(
        current=start_point,
        archive=Archive([start_point]),
        bootstrap_scale=StepScale(),
        prespecified_scale=StepScale(),
        anneal=anneal,
        n_parameters=problem.n_parameters,
        trace=[] if config.record_trace else None,
    )


def _v_star_vector(config: ChainConfig, n_parameters: int) -> np.ndarray:
    v = np.asarray(config.v_star, dtype=float)
    if v.ndim == 0:
        return np.full(n_parameters, float(v))
    if v.shape != (n_parameters,):
        raise ValueError(f"v_star has shape {v.shape}, expected ({n_parameters},)")
    return v.copy()


def run_optimisation(
    problem: ProblemDefinition,
    start: np.ndarray,
    config: Optional[ChainConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> ChainState:
    """Anneal towards the density maximum until the walk stops drifting.

    Termination requires, since the last reset, both enough snapshot
    reversals (max of ``config.min_reversals`` and the parameter count)
    and at least OPTIMISATION_ACCEPT_CONSTANT / lam**2 accepted steps at
    the bootstrap generator's current lam. The proposal cap marks the
    returned state not converged rather than raising.
    """
    config = config or ChainConfig()
    rng = rng or np.random.default_rng()
    state = _initial_state(problem, start, config)
    v_star = _v_star_vector(config, state.n_parameters)
    tracker = DriftTracker(interval=config.drift_interval)
    required_reversals = max(config.min_reversals, state.n_parameters)
    while True:
        if state.total_proposals >= config.max_optimisation_proposals:
            state.converged = False
            break
        _chain_iteration(problem, state, v_star, rng, tracker, budget=None)
        lam = state.bootstrap_scale.lam
        if (
            tracker.reversal_count >= required_reversals
            and state.accepted_since_reset >= OPTIMISATION_ACCEPT_CONSTANT / (lam * lam)
        ):
            state.converged = True
            break
    return state


def run_sampling(
    problem: ProblemDefinition,
    state: ChainState,
    n_samples: int,
    config: Optional[ChainConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Sample the target density, continuing from an optimised state.

    The temperature is pinned to the target, the archive switches to
    recording the current point every iteration (repeats after a
    rejection included; dropping them would bias the store towards the
    jump chain), and the run ends once at least ``n_samples`` points were
    archived since the last reset and the ergodicity budget is met.
    Returns the archived vectors since the last reset as an (m, k) array
    with m >= n_samples; ``state.converged`` reports whether the proposal
    cap was avoided.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    config = config or ChainConfig()
    rng = rng or np.random.default_rng()
    state.sampling = True
    state.anneal.temperature = config.target_temperature
    state.anneal.target_temperature = config.target_temperature
    state.anneal.initial_temperature = config.target_temperature
    state.anneal.greedy_steps_remaining = 0
    state.iterations_since_reset = 0
    state.accepted_since_reset = 0
    state.archived_since_reset = 0
    state.bootstrap_scale.reset_window()
    state.prespecified_scale.reset_window()
    v_star = _v_star_vector(config, state.n_parameters)
    budget = ErgodicityBudget(
        required=SAMPLING_BUDGET_FACTOR * state.n_parameters * n_samples
    )
    start_proposals = state.total_proposals
    while True:
        if state.total_proposals - start_proposals >= config.max_sampling_proposals:
            state.converged = False
            break
        _chain_iteration(problem, state, v_star, rng, tracker=None, budget=budget)
        if state.archived_since_reset >= n_samples and budget.satisfied():
            state.converged = True
            break
    tail = state.archive.entries[len(state.archive) - state.archived_since_reset:]
    return np.stack([point.values for point in tail])


def confidence_limits(samples: np.ndarray, level: float = 0.95) -> np.ndarray:
    """Percentile interval of each sample column at the given level.

    Uses Hazen plotting positions (order statistic k sits at probability
    (k - 0.5) / n), so 1000 samples at the 95% level interpolate at ranks
    25.5 and 975.5. Needs at least 100 samples; returns an array whose
    first row is the lower limits and second row the upper limits.
    """
    arr = np.asarray(samples, dtype=float)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be inside (0, 1), got {level}")
    if arr.shape[0] < 100:
        raise ValueError(
            f"confidence limits need at least 100 samples, got {arr.shape[0]}"
        )
    tail = 50.0 * (1.0 - level)
    return np.percentile(arr, [tail, 100.0 - tail], axis=0, method="hazen")
