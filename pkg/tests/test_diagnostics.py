import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvlab import (
    InvalidArgument,
    Lipschitz,
    Model,
    NoiseStream,
    brownian_increments,
    build_uniform_partition,
    euler_particle_system,
    fit_rate,
    increment_bound_check,
    mean_field_ou,
    moment_check,
    pure_diffusion,
    stability_coefficients,
    stability_driver,
    stability_initial,
    sup_sq_error,
)
from mvlab.diagnostics import w2_domination_gap
from mvlab.schemes import ParticleEnsemble


def ensemble(states, T=1.0):
    states = np.asarray(states, dtype=float)
    p = build_uniform_partition(T, states.shape[1] - 1)
    return ParticleEnsemble(p, states, None, "test", states[:, 0].copy())


def zero_model():
    return Model(1, lambda t, x, mu: np.zeros_like(x), lambda t, x, mu: np.zeros(np.shape(x) + (1,)), Lipschitz(0.0), 1.0)


def test_sup_sq_examples():
    rng = np.random.default_rng(0)
    a = ensemble(rng.normal(size=(30, 9, 2)))
    assert sup_sq_error(a, a) == 0.0
    c = np.array([0.3, -1.2])
    b = ensemble(a.states + c)
    assert sup_sq_error(a, b) == pytest.approx(np.sum(c**2), rel=1e-12)


def test_sup_sq_nested_grids():
    rng = np.random.default_rng(1)
    fine = ensemble(rng.normal(size=(10, 9, 1)))
    coarse = ensemble(fine.states[:, ::2])
    assert sup_sq_error(coarse, fine) == 0.0
    assert sup_sq_error(fine, coarse) == 0.0
    with pytest.raises(InvalidArgument):
        sup_sq_error(fine, ensemble(rng.normal(size=(11, 9, 1))))
    with pytest.raises(InvalidArgument):
        sup_sq_error(fine, ensemble(rng.normal(size=(10, 4, 1))))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_sup_sq_pseudometric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (ensemble(rng.normal(size=(12, 6, 2)) * rng.uniform(0.1, 10)) for _ in range(3))
    assert sup_sq_error(a, b) == sup_sq_error(b, a)
    ab, bc, ac = (np.sqrt(sup_sq_error(*pair)) for pair in ((a, b), (b, c), (a, c)))
    assert ac <= ab + bc + 1e-10


def test_fit_rate_examples():
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    assert fit_rate(h, h) == pytest.approx(1.0)
    assert fit_rate(h, h**2) == pytest.approx(2.0)
    assert fit_rate(h, np.full(4, 3.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidArgument):
        fit_rate(h, [1.0, 0.0, 1.0, 1.0])
    with pytest.raises(InvalidArgument):
        fit_rate(h[:2], h[:2])


@given(st.floats(1e-6, 1e6))
def test_fit_rate_scale_invariant(s):
    h = np.array([0.4, 0.2, 0.1, 0.05])
    e = np.array([0.3, 0.11, 0.05, 0.02])
    assert fit_rate(h, s * e) == pytest.approx(fit_rate(h, e), abs=1e-9)


def test_increment_bound_constant_is_zero():
    assert increment_bound_check(ensemble(np.ones((5, 11, 1))), 2) == 0.0
    assert increment_bound_check(ensemble(np.ones((5, 301, 1))), 2) == 0.0


def test_increment_bound_brownian_fourth_moment():
    N = 100_000
    d = brownian_increments(build_uniform_partition(1.0, 8), N, 1, NoiseStream(21))
    E = euler_particle_system(pure_diffusion(1.0), 0.0, d.partition, N, d)
    assert increment_bound_check(E, 2) == pytest.approx(3.0, rel=0.05)


def test_increment_bound_linear_path_fine_grid():
    # X_t = t: E|X_t - X_s|^2 / |t - s| = |t - s|, maximised by the pair (0, T)
    t = build_uniform_partition(2.0, 300).points
    E = ensemble(np.broadcast_to(t[None, :, None], (3, 301, 1)).copy(), T=2.0)
    assert increment_bound_check(E, 1) == pytest.approx(2.0)


def test_moment_check_examples():
    assert moment_check(ensemble(np.zeros((4, 5, 1))), 2) == 0.0
    assert moment_check(ensemble(np.full((4, 5, 2), [3.0, 4.0])), 1.5) == pytest.approx(5.0**3)


def test_w2_domination_gap_nonpositive():
    rng = np.random.default_rng(3)
    a = ensemble(rng.normal(size=(200, 6, 1)))
    b = ensemble(a.states + rng.normal(scale=0.3, size=a.states.shape))
    assert w2_domination_gap(a, b) <= 1e-12
    a2 = ensemble(rng.normal(size=(50, 3, 2)))
    b2 = ensemble(a2.states + 1.0)
    assert w2_domination_gap(a2, b2) <= 1e-12


P = build_uniform_partition(1.0, 64)


def test_stability_initial_examples():
    t = stability_initial(zero_model(), [1.0], [0.0, 0.5, 0.1], P, 20, seed=1)
    assert t.errors[0] == 0.0
    assert t.errors[1] == pytest.approx(0.25, rel=1e-14)
    assert t.errors[2] == pytest.approx(0.01, rel=1e-12)
    assert t.w2_dominated


def test_stability_initial_ou_slope():
    deltas = [0.5 / 2**k for k in range(6)]
    t = stability_initial(mean_field_ou(), [1.0], deltas, P, 500, seed=2)
    assert t.is_decreasing()
    assert fit_rate(deltas, t.errors) == pytest.approx(2.0, abs=0.2)


def test_stability_coefficients_examples():
    m = mean_field_ou()
    t = stability_coefficients([m, m, m], m, [1.0], P, 100, seed=3)
    assert t.errors == [0.0, 0.0, 0.0]
    levels = [1, 2, 4, 8, 16, 32, 64]
    seq = [mean_field_ou(a=-1 + 1 / n) for n in levels]
    t = stability_coefficients(seq, m, [1.0], P, 500, seed=3, levels=levels)
    assert t.is_decreasing() and t.errors[-1] < t.errors[0] / 10
    with pytest.raises(InvalidArgument):
        stability_coefficients(seq, m, [1.0], P, 10, seed=3, levels=[1])


def test_stability_driver_examples():
    tilts = (lambda t: np.ones_like(t), np.sin)
    t = stability_driver(mean_field_ou(), [1.0], P, 200, 4, [0.0], tilts)
    assert t.errors == [0.0]
    eps = [0.2, 0.1, 0.05]
    t = stability_driver(pure_diffusion(1.0), [0.0], P, 20_000, 4, eps, tilts)
    ratios = np.array(t.terminal_errors) / np.square(eps)
    assert np.all(np.abs(ratios - 1.0) < 0.05)
    assert t.is_decreasing()
