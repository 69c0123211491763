import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvlab import (
    EmpiricalMeasure,
    InvalidArgument,
    Lipschitz,
    Model,
    StateVector,
    TimePartition,
    build_uniform_partition,
    check_growth,
    check_lipschitz,
    phi_floor,
)


def test_uniform_partition_points():
    p = build_uniform_partition(1.0, 4)
    assert p.points.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert p.mesh == 0.25
    assert build_uniform_partition(1, 1).points.tolist() == [0.0, 1.0]
    assert build_uniform_partition(1, 1).mesh == 1.0
    assert build_uniform_partition(2.0, 8).mesh == 0.25


def test_partition_endpoint_is_exact():
    p = build_uniform_partition(0.3, 7)
    assert p.points[0] == 0.0 and p.points[-1] == 0.3
    assert p.mesh == np.max(np.diff(p.points))


@pytest.mark.parametrize("T, n", [(0, 4), (-1, 4), (1, 0), (1, 2.5), (float("inf"), 3)])
def test_uniform_partition_rejects(T, n):
    with pytest.raises(InvalidArgument):
        build_uniform_partition(T, n)


def test_partition_must_increase():
    with pytest.raises(InvalidArgument):
        TimePartition([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(InvalidArgument):
        TimePartition([0.1, 1.0])


def test_phi_floor_examples():
    p = build_uniform_partition(1.0, 4)
    assert phi_floor(p, 0.3) == 0.25
    assert phi_floor(p, 0.0) == 0.0
    assert phi_floor(p, 1.0) == 1.0
    assert phi_floor(p, 0.75) == 0.75
    with pytest.raises(InvalidArgument):
        phi_floor(p, 1.0000001)
    with pytest.raises(InvalidArgument):
        phi_floor(p, -0.1)


@given(st.floats(0.0, 1.0), st.integers(1, 64))
def test_phi_floor_properties(s, n):
    p = build_uniform_partition(1.0, n)
    f = phi_floor(p, s)
    assert phi_floor(p, f) == f
    assert f <= s
    if s < 1.0:
        assert s - f < p.mesh


@given(st.floats(0.1, 10.0), st.integers(1, 200))
def test_dyadic_refinement_is_nested_bitwise(T, n):
    coarse = build_uniform_partition(T, n)
    fine = build_uniform_partition(T, 2 * n)
    assert np.array_equal(fine.points[::2], coarse.points)


def test_state_vector_rejects_non_finite():
    with pytest.raises(InvalidArgument):
        StateVector([1.0, np.nan])
    with pytest.raises(InvalidArgument):
        StateVector([np.inf])
    assert StateVector([1, 2]).dim == 2


def _model(drift, diffusion=lambda t, x, mu: np.zeros(x.shape + (1,)), C=1.0, reg=None):
    return Model(1, drift, diffusion, reg or Lipschitz(1.0), C)


def _samples():
    states = [StateVector([v]) for v in (-10.0, -1.0, 0.0, 0.5, 10.0)]
    measures = [EmpiricalMeasure([0.0, 1.0]), EmpiricalMeasure([3.0, -2.0, 5.0])]
    return states, measures, [0.0, 0.5, 1.0]


def test_check_growth_zero_model():
    rep = check_growth(_model(lambda t, x, mu: np.zeros_like(x)), *_samples())
    assert rep.max_ratio == 0.0 and rep.violations == 0


def test_check_growth_identity_drift():
    rep = check_growth(_model(lambda t, x, mu: x), *_samples())
    assert rep.max_ratio <= 1.0 and rep.violations == 0


def test_check_growth_flags_quadratic_drift():
    rep = check_growth(_model(lambda t, x, mu: x**2), *_samples())
    # 100 > 1 * (1 + 10 + W2) for x = 10 and the first measure (W2 = sqrt(0.5))
    assert rep.violations >= 1
    assert rep.max_ratio > 1.0


def test_check_growth_rejects_empty():
    m = _model(lambda t, x, mu: x)
    states, measures, times = _samples()
    for args in ([], measures, times), (states, [], times), (states, measures, []):
        with pytest.raises(InvalidArgument):
            check_growth(m, *args)


def test_check_lipschitz_detects_mislabel():
    steep = _model(lambda t, x, mu: 5.0 * x, reg=Lipschitz(1.0))
    assert check_lipschitz(steep, *_samples()).violations > 0
    ok = _model(lambda t, x, mu: 0.5 * x + 0.5 * mu.mean, reg=Lipschitz(0.5))
    assert check_lipschitz(ok, *_samples()).violations == 0
