"""Euler, semimartingale Euler and Picard schemes on an N-particle system.

The marginal law in the coefficients is replaced by the empirical measure of
the simulated particles at the current grid point.  Coefficients are frozen at
the left end of each step (Ito convention).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Model, StateVector, TimePartition
from .drivers import DriverPath
from .exceptions import BlowUpError, InvalidArgument
from .measure import EmpiricalMeasure

__all__ = [
    "ParticleEnsemble",
    "euler_particle_system",
    "euler_semimartingale",
    "picard_iterate",
]


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    """Particle paths of shape ``(N, n_steps + 1, d)`` on ``partition``."""

    partition: TimePartition
    states: np.ndarray
    driver: Optional[DriverPath]
    model_id: str
    initial: np.ndarray

    def __post_init__(self):
        s = self.states
        if s.ndim != 3 or s.shape[1] != self.partition.n_steps + 1:
            raise InvalidArgument(f"states shape {s.shape} does not match partition")
        if not np.all(np.isfinite(s)):
            i, k = np.argwhere(~np.isfinite(s).all(axis=2))[0]
            raise BlowUpError(i, k)
        if not np.array_equal(s[:, 0], np.broadcast_to(self.initial, s[:, 0].shape)):
            raise InvalidArgument("states at time 0 differ from the initial data")

    @property
    def n_particles(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[2]

    def marginal(self, k):
        """Empirical measure of the particles at grid index ``k``."""
        return EmpiricalMeasure(self.states[:, k])

    @property
    def terminal(self):
        return self.states[:, -1]


def _initial_array(x0, N, d):
    x = np.asarray(x0.coords if isinstance(x0, StateVector) else x0, dtype=np.float64)
    if x.ndim <= 1:
        x = x.reshape(-1)
        if x.size != d:
            raise InvalidArgument(f"initial state has dimension {x.size}, model has {d}")
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("initial state is not finite")
        return np.broadcast_to(x, (N, d)).copy()
    if x.shape != (N, d):
        raise InvalidArgument(f"per-particle initial data must have shape {(N, d)}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("initial data is not finite")
    return x.copy()


def _check_inputs(m, p, N, driver):
    if int(N) != N or N < 1:
        raise InvalidArgument(f"number of particles must be a positive integer, got {N}")
    if driver.partition != p:
        raise InvalidArgument("driver partition differs from the scheme partition")
    if driver.n_particles != N or driver.dim != m.dim:
        raise InvalidArgument(
            f"driver shaped for N={driver.n_particles}, d={driver.dim}; "
            f"scheme needs N={N}, d={m.dim}"
        )


def _increment(m, t, x, mu, dA, dM):
    # unchecked evaluation: a non-finite coefficient surfaces as a blow-up of the next state
    drift = np.broadcast_to(m.drift(t, x, mu), x.shape) * dA
    sig = np.broadcast_to(m.diffusion(t, x, mu), x.shape + (m.dim,))
    if m.dim == 1:
        return drift + sig[..., 0] * dM
    return drift + np.einsum("nij,nj->ni", sig, dM)


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        i = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
        raise BlowUpError(i, step)


def _euler(m, x0, p, N, driver):
    _check_inputs(m, p, N, driver)
    N = int(N)
    x = _initial_array(x0, N, m.dim)
    states = np.empty((N, p.n_steps + 1, m.dim))
    states[:, 0] = x
    t = p.points
    dA, dM = driver.A_increments, driver.M_increments
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(p.n_steps):
            mu = EmpiricalMeasure(x)
            x = x + _increment(m, t[k], x, mu, dA[:, k], dM[:, k])
            _check_finite(x, k + 1)
            states[:, k + 1] = x
    return ParticleEnsemble(p, states, driver, m.name, states[:, 0].copy())


def euler_particle_system(m, x0, p, N, driver):
    """Euler scheme for the particle system driven by (B, t).

    ``X[k+1] = X[k] + b(t_k, X[k], mu_k) dA_k + sigma(t_k, X[k], mu_k) dM_k``
    where ``mu_k`` is the empirical measure of all particles at step k.
    """
    return _euler(m, x0, p, N, driver)


def euler_semimartingale(m, x0, p, N, driver):
    """Same recursion as :func:`euler_particle_system` for a general driver
    ``(M, A)``; only the increments differ."""
    return _euler(m, x0, p, N, driver)


def _picard_step(m, prev, driver):
    p = prev.partition
    t = p.points
    dA, dM = driver.A_increments, driver.M_increments
    x = prev.states[:, 0].copy()
    states = np.empty_like(prev.states)
    states[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(p.n_steps):
            xk = prev.states[:, k]
            mu = EmpiricalMeasure(xk)
            x = x + _increment(m, t[k], xk, mu, dA[:, k], dM[:, k])
            _check_finite(x, k + 1)
            states[:, k + 1] = x
    return ParticleEnsemble(p, states, driver, m.name, prev.initial)


def picard_iterate(m, x0, p, N, driver, k_max, tol=0.0):
    """Successive approximations ``X^{k+1} = x0 + int coef(X^k, law X^k) d(A, M)``.

    Starts from the constant path ``X^0 = x0``; every iterate uses the same
    driver.  Returns ``(iterates, distances)`` where ``iterates[0]`` is ``X^0``
    and ``distances[k] = sqrt(sup_sq_error(X^{k+1}, X^k))``.  Stops after
    ``k_max`` iterations or once a distance is ``<= tol``.
    """
    from .diagnostics import sup_sq_error

    if int(k_max) != k_max or k_max < 1:
        raise InvalidArgument(f"k_max must be a positive integer, got {k_max}")
    if not tol >= 0:
        raise InvalidArgument(f"tol must be >= 0, got {tol}")
    _check_inputs(m, p, N, driver)
    x = _initial_array(x0, int(N), m.dim)
    states = np.broadcast_to(x[:, None, :], (int(N), p.n_steps + 1, m.dim)).copy()
    current = ParticleEnsemble(p, states, driver, m.name, x)
    iterates = [current]
    distances = []
    for _ in range(int(k_max)):
        nxt = _picard_step(m, current, driver)
        iterates.append(nxt)
        distances.append(float(np.sqrt(sup_sq_error(nxt, current))))
        current = nxt
        if distances[-1] <= tol:
            break
    return iterates, distances
