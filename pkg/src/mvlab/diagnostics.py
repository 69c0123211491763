"""Error functionals, rate fitting, moment/increment checks and stability runs.

All comparisons use synchronous coupling: two ensembles are compared particle
by particle, and particle ``i`` of each was driven by the same noise row.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from .core import StateVector, TimePartition
from .drivers import NoiseStream, brownian_increments, perturbed_driver
from .exceptions import InvalidArgument
from .measure import w2_sliced
from .schemes import euler_particle_system, euler_semimartingale

__all__ = [
    "sup_sq_error",
    "sup_sq_per_particle",
    "fit_rate",
    "increment_bound_check",
    "moment_check",
    "w2_domination_gap",
    "StabilityTable",
    "stability_initial",
    "stability_coefficients",
    "stability_driver",
]


def _common_states(A, B):
    if A.n_particles != B.n_particles:
        raise InvalidArgument(f"particle counts differ: {A.n_particles} vs {B.n_particles}")
    if A.dim != B.dim:
        raise InvalidArgument(f"dimensions differ: {A.dim} vs {B.dim}")
    pa, pb = A.partition, B.partition
    if pa == pb:
        return A.states, B.states
    if pa.n_steps <= pb.n_steps and pb.contains(pa):
        return A.states, B.states[:, pb.indices_of(pa)]
    if pa.contains(pb):
        return A.states[:, pa.indices_of(pb)], B.states
    raise InvalidArgument("partitions are neither equal nor nested")


def sup_sq_per_particle(A, B):
    """Per-particle ``max_k |X^A_k - X^B_k|^2`` on the coarser of the two grids."""
    a, b = _common_states(A, B)
    return np.max(np.sum((a - b) ** 2, axis=2), axis=1)


def sup_sq_error(A, B):
    """Monte Carlo estimate of ``E[sup_t |X^A_t - X^B_t|^2]`` under the shared driver."""
    return float(np.mean(sup_sq_per_particle(A, B)))


def fit_rate(mesh_sizes, errors):
    """Least-squares slope of log(error) against log(mesh)."""
    h = np.asarray(mesh_sizes, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.shape != e.shape or h.ndim != 1 or h.size < 3:
        raise InvalidArgument("need two equal-length sequences with at least 3 entries")
    if np.any(~(h > 0)) or np.any(~(e > 0)) or not np.all(np.isfinite(h)) or not np.all(np.isfinite(e)):
        raise InvalidArgument("mesh sizes and errors must be positive and finite")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


_ALL_PAIRS_MAX = 64


def _pair_ratio_max(x, t, p, lags=None):
    n = t.size - 1
    best = 0.0
    for lag in range(1, n + 1) if lags is None else lags:
        d = x[:, lag:] - x[:, :-lag]
        moment = np.mean(np.sum(d * d, axis=2) ** p, axis=0)
        ratio = moment / (t[lag:] - t[:-lag]) ** p
        best = max(best, float(ratio.max()))
    return best


def increment_bound_check(E, p=2):
    """Largest empirical ``E|X_t - X_s|^{2p} / |t - s|^p`` over grid pairs.

    Grids with at most 64 steps use every pair.  Finer grids use all pairs of
    the 65 points at stride ``n // 64`` plus every pair of neighbouring points.
    """
    if p < 1:
        raise InvalidArgument(f"exponent must be >= 1, got {p}")
    x = E.states
    t = E.partition.points
    n = t.size - 1
    if n <= _ALL_PAIRS_MAX:
        return _pair_ratio_max(x, t, p)
    stride = -(-n // _ALL_PAIRS_MAX)
    idx = np.arange(0, n + 1, stride)
    if idx[-1] != n:
        idx = np.append(idx, n)
    coarse = _pair_ratio_max(x[:, idx], t[idx], p)
    neighbours = _pair_ratio_max(x, t, p, lags=[1])
    return max(coarse, neighbours)


def moment_check(E, p):
    """Empirical ``E[sup_t |X_t|^{2p}]``."""
    sup_norm = np.max(np.linalg.norm(E.states, axis=2), axis=1)
    return float(np.mean(sup_norm ** (2 * p)))


def w2_domination_gap(A, B, n_projections=64, seed=0):
    """Largest ``W2(law A_k, law B_k) - sqrt(mean |A_k - B_k|^2)`` over grid times.

    Must be <= 0 up to rounding: the paired samples are one admissible coupling.
    Exact W2 in one dimension, sliced W2 (a lower bound) otherwise.
    """
    a, b = _common_states(A, B)
    rms = np.sqrt(np.mean(np.sum((a - b) ** 2, axis=2), axis=0))
    if a.shape[2] == 1:
        w2 = np.sqrt(np.mean((np.sort(a[:, :, 0], axis=0) - np.sort(b[:, :, 0], axis=0)) ** 2, axis=0))
    else:
        w2 = np.array([w2_sliced(a[:, k], b[:, k], n_projections, seed) for k in range(a.shape[1])])
    return float(np.max(w2 - rms))


@dataclass
class StabilityTable:
    """One row per perturbation level.

    ``errors`` holds sup-in-time mean-square distances, ``terminal_errors`` the
    mean-square distances at the final time.
    """

    label: str
    params: List[float] = field(default_factory=list)
    errors: List[float] = field(default_factory=list)
    terminal_errors: List[float] = field(default_factory=list)
    w2_gaps: List[float] = field(default_factory=list)

    def add(self, param, perturbed, base):
        per = sup_sq_per_particle(perturbed, base)
        diff = perturbed.terminal - base.terminal
        self.params.append(float(param))
        self.errors.append(float(np.mean(per)))
        self.terminal_errors.append(float(np.mean(np.sum(diff * diff, axis=1))))
        self.w2_gaps.append(w2_domination_gap(perturbed, base))

    def rows(self):
        return list(zip(self.params, self.errors))

    @property
    def w2_dominated(self):
        return all(g <= 1e-12 for g in self.w2_gaps)

    def is_decreasing(self, strict=True):
        e = np.asarray(self.errors)
        return bool(np.all(e[1:] < e[:-1]) if strict else np.all(e[1:] <= e[:-1]))


def _driver(p, N, dim, seed, threads):
    return brownian_increments(p, N, dim, NoiseStream(seed), threads=threads)


def _state(x, dim):
    return np.asarray(x.coords if isinstance(x, StateVector) else x, dtype=float).reshape(dim)


def stability_initial(m, x, deltas, p, N, seed, threads=1):
    """Distance between solutions started at ``x + delta e_1`` and at ``x``."""
    deltas = [float(d) for d in deltas]
    if any(d < 0 for d in deltas):
        raise InvalidArgument("deltas must be >= 0")
    driver = _driver(p, N, m.dim, seed, threads)
    x = _state(x, m.dim)
    base = euler_particle_system(m, x, p, N, driver)
    table = StabilityTable("delta")
    e1 = np.zeros(m.dim)
    e1[0] = 1.0
    for d in deltas:
        table.add(d, euler_particle_system(m, x + d * e1, p, N, driver), base)
    return table


def stability_coefficients(m_seq, m_lim, x, p, N, seed, levels=None, threads=1):
    """Distance between the solution for each model in ``m_seq`` and for ``m_lim``."""
    m_seq = list(m_seq)
    levels = list(range(1, len(m_seq) + 1)) if levels is None else list(levels)
    if len(levels) != len(m_seq):
        raise InvalidArgument("levels and m_seq differ in length")
    driver = _driver(p, N, m_lim.dim, seed, threads)
    x = _state(x, m_lim.dim)
    base = euler_particle_system(m_lim, x, p, N, driver)
    table = StabilityTable("n")
    for lvl, mn in zip(levels, m_seq):
        table.add(lvl, euler_particle_system(mn, x, p, N, driver), base)
    return table


def stability_driver(m, x, p, N, seed, eps_list, tilts, threads=1):
    """Distance between semimartingale-Euler solutions under perturbed and base drivers.

    ``tilts`` is ``(martingale_tilt, bv_tilt)`` as taken by
    :func:`~mvlab.drivers.perturbed_driver`.
    """
    mt, bt = tilts
    driver = _driver(p, N, m.dim, seed, threads)
    x = _state(x, m.dim)
    base = euler_semimartingale(m, x, p, N, driver)
    table = StabilityTable("eps")
    for eps in eps_list:
        table.add(eps, euler_semimartingale(m, x, p, N, perturbed_driver(driver, eps, mt, bt)), base)
    return table
