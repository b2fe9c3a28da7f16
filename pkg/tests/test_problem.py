"""Problem contract: reflection fixer and guarded evaluation."""

import math

import numpy as np
import pytest

from bmcmc.problem import ProblemDefinition, evaluate, reflect_fix


def test_reflect_fix_unit_box_examples():
    box = [(0.0, 1.0)]
    assert reflect_fix(np.array([2.3]), box)[0] == pytest.approx(0.3)
    assert reflect_fix(np.array([1.3]), box)[0] == pytest.approx(0.7)
    assert reflect_fix(np.array([-0.2]), box)[0] == pytest.approx(0.2)
    assert reflect_fix(np.array([0.4]), box)[0] == 0.4


def test_reflect_fix_half_open_boxes():
    assert reflect_fix(np.array([-0.3]), [(0.0, None)])[0] == pytest.approx(0.3)
    assert reflect_fix(np.array([2.5]), [(None, 2.0)])[0] == pytest.approx(1.5)
    assert reflect_fix(np.array([1.0]), [(0.0, math.inf)])[0] == 1.0


def test_reflect_fix_open_coordinate_passes_through():
    out = reflect_fix(np.array([-7.3, 2.2]), [(None, None), (0.0, 1.0)])
    assert out[0] == -7.3
    assert out[1] == pytest.approx(0.2)


def test_reflect_fix_always_lands_inside_and_is_idempotent():
    rng = np.random.default_rng(5)
    box = [(0.0, 1.0), (-2.0, 3.0), (1.0, None), (None, -1.0)]
    for _ in range(300):
        raw = rng.uniform(-50.0, 50.0, 4)
        fixed = reflect_fix(raw, box)
        assert 0.0 <= fixed[0] <= 1.0
        assert -2.0 <= fixed[1] <= 3.0
        assert fixed[2] >= 1.0
        assert fixed[3] <= -1.0
        again = reflect_fix(fixed, box)
        assert np.array_equal(fixed, again)


def test_reflect_fix_validates_shapes_and_boxes():
    with pytest.raises(ValueError):
        reflect_fix(np.array([1.0, 2.0]), [(0.0, 1.0)])
    with pytest.raises(ValueError):
        reflect_fix(np.array([1.0]), [(2.0, 1.0)])


def test_evaluate_applies_fixer_before_density():
    seen = []

    def density(values):
        seen.append(values.copy())
        return -float(values @ values)

    problem = ProblemDefinition(
        n_parameters=2,
        fixer=lambda v: np.abs(v),
        log_density=density,
    )
    point = evaluate(problem, np.array([-1.0, 2.0]))
    assert np.array_equal(point.values, [1.0, 2.0])
    assert np.array_equal(seen[0], [1.0, 2.0])
    assert point.log_density == -5.0


def test_evaluate_turns_raising_density_into_none():
    def density(values):
        raise FloatingPointError("overflow")

    problem = ProblemDefinition(2, lambda v: v, density)
    point = evaluate(problem, np.zeros(2))
    assert point.log_density is None


def test_evaluate_turns_nan_and_positive_inf_into_none():
    problem = ProblemDefinition(1, lambda v: v, lambda v: math.nan)
    assert evaluate(problem, np.zeros(1)).log_density is None
    problem = ProblemDefinition(1, lambda v: v, lambda v: math.inf)
    assert evaluate(problem, np.zeros(1)).log_density is None


def test_evaluate_keeps_negative_inf():
    problem = ProblemDefinition(1, lambda v: v, lambda v: -math.inf)
    assert evaluate(problem, np.zeros(1)).log_density == -math.inf


def test_evaluate_rejects_wrong_fixer_shape():
    problem = ProblemDefinition(2, lambda v: v[:1], lambda v: 0.0)
    with pytest.raises(ValueError):
        evaluate(problem, np.zeros(2))
