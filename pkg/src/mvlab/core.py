"""Domain types for McKean-Vlasov equations dX = b(t, X, law X) dt + sigma(t, X, law X) dB.

Coefficients are evaluated in batch: ``x`` has shape ``(..., d)`` and the
measure argument is an :class:`~mvlab.measure.EmpiricalMeasure`.  ``drift``
returns ``(..., d)`` and ``diffusion`` returns ``(..., d, d)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import EvaluationError, InvalidArgument
from .measure import EmpiricalMeasure, w2_exact_1d, w2_to_dirac0, _w2_assignment

__all__ = [
    "Lipschitz",
    "UniformlyContinuous",
    "Osgood",
    "Model",
    "TimePartition",
    "StateVector",
    "build_uniform_partition",
    "phi_floor",
    "check_growth",
    "check_lipschitz",
    "CheckReport",
]


# -- regularity tags ---------------------------------------------------------


@dataclass(frozen=True)
class Lipschitz:
    constant: float

    def __post_init__(self):
        if not (np.isfinite(self.constant) and self.constant >= 0):
            raise InvalidArgument(f"Lipschitz constant must be finite and >= 0, got {self.constant}")


@dataclass(frozen=True)
class UniformlyContinuous:
    pass


@dataclass(frozen=True)
class Osgood:
    kappa: Callable[[np.ndarray], np.ndarray]


# -- model -------------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    """Drift/diffusion pair with a declared regularity class.

    Both maps must be pure.  ``growth_constant`` is the constant C with
    ``|b|, |sigma| <= C (1 + |x| + W2(mu, delta_0))``.
    """

    dim: int
    drift: Callable
    diffusion: Callable
    regularity: object = field(default_factory=UniformlyContinuous)
    growth_constant: float = 1.0
    name: str = "custom"
    params: object = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgument(f"dim must be a positive integer, got {self.dim}")
        if not (np.isfinite(self.growth_constant) and self.growth_constant > 0):
            raise InvalidArgument(f"growth_constant must be > 0, got {self.growth_constant}")

    def b(self, t, x, mu):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.drift(t, x, mu), dtype=float)
        out = np.broadcast_to(out, x.shape)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"drift of model {self.name!r} is non-finite at t={t}")
        return out

    def sigma(self, t, x, mu):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.diffusion(t, x, mu), dtype=float)
        out = np.broadcast_to(out, x.shape + (self.dim,))
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"diffusion of model {self.name!r} is non-finite at t={t}")
        return out


# -- time partitions ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimePartition:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidArgument("a partition needs at least two points")
        if pts[0] != 0.0:
            raise InvalidArgument(f"partition must start at 0, got {pts[0]}")
        if not np.all(np.isfinite(pts)) or not np.all(np.diff(pts) > 0):
            raise InvalidArgument("partition points must be finite and strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def horizon(self):
        return float(self.points[-1])

    @property
    def n_steps(self):
        return self.points.size - 1

    @property
    def steps(self):
        return np.diff(self.points)

    @property
    def mesh(self):
        return float(self.steps.max())

    def __eq__(self, other):
        if not isinstance(other, TimePartition):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def __repr__(self):
        return f"TimePartition(T={self.horizon}, n_steps={self.n_steps}, mesh={self.mesh})"

    def contains(self, other):
        """True if every point of ``other`` is a point of this partition."""
        return np.isin(other.points, self.points).all()

    def indices_of(self, other):
        """Indices in this partition of the points of a coarser ``other``."""
        idx = np.searchsorted(self.points, other.points)
        if np.any(idx >= self.points.size) or not np.array_equal(self.points[np.minimum(idx, self.points.size - 1)], other.points):
            raise InvalidArgument("partitions are not nested")
        return idx


def build_uniform_partition(T, n):
    """Uniform grid ``k T / n`` with the last point set to ``T`` exactly."""
    if not (np.isfinite(T) and T > 0):
        raise InvalidArgument(f"horizon T must be positive, got {T}")
    if int(n) != n or n < 1:
        raise InvalidArgument(f"number of steps must be a positive integer, got {n}")
    n = int(n)
    pts = np.arange(n + 1, dtype=np.float64) * (float(T) / n)
    pts[-1] = float(T)
    return TimePartition(pts)


def phi_floor(p, s):
    """Largest grid time ``t_i <= s``; ``phi_floor(p, T) == T``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(s_arr)) or np.any(s_arr < 0) or np.any(s_arr > p.horizon):
        raise InvalidArgument(f"time {s} outside [0, {p.horizon}]")
    idx = np.searchsorted(p.points, s_arr, side="right") - 1
    out = p.points[idx]
    return float(out) if out.ndim == 0 else out


# -- states ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateVector:
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=np.float64).reshape(-1)
        if c.size == 0:
            raise InvalidArgument("state vector must have at least one coordinate")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument(f"state vector has non-finite coordinates: {c}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self):
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return self.coords if dtype is None else self.coords.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, StateVector):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        return f"StateVector({self.coords.tolist()})"


# -- numeric hypothesis checks -----------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    max_ratio: float
    violations: int
    n_samples: int


def _as_states(states, dim):
    if len(states) == 0:
        raise InvalidArgument("sample_states is empty")
    arr = np.array([np.asarray(s, dtype=float).reshape(-1) for s in states])
    if arr.shape[1] != dim:
        raise InvalidArgument(f"sample states have dimension {arr.shape[1]}, model has {dim}")
    return arr


def check_growth(m, sample_states, sample_measures, sample_times):
    """Worst sampled ratio ``|coef| / (1 + |x| + W2(mu, delta_0))`` over states x measures x times.

    A sample violates the growth hypothesis when the ratio of the drift or of
    the diffusion (Frobenius norm) exceeds ``m.growth_constant``.
    """
    if len(sample_measures) == 0 or len(sample_times) == 0:
        raise InvalidArgument("sample_measures and sample_times must be non-empty")
    x = _as_states(sample_states, m.dim)
    xnorm = np.linalg.norm(x, axis=1)
    max_ratio = 0.0
    violations = 0
    n = 0
    for mu in sample_measures:
        denom = 1.0 + xnorm + w2_to_dirac0(mu)
        for t in sample_times:
            rb = np.linalg.norm(m.b(t, x, mu), axis=-1) / denom
            rs = np.linalg.norm(m.sigma(t, x, mu), axis=(-2, -1)) / denom
            r = np.maximum(rb, rs)
            max_ratio = max(max_ratio, float(r.max()))
            violations += int(np.count_nonzero(r > m.growth_constant))
            n += r.size
    return CheckReport(max_ratio, violations, n)


def _w2(mu, nu):
    if mu.dim == 1:
        return w2_exact_1d(mu, nu)
    return _w2_assignment(mu, nu)


def check_lipschitz(m, sample_states, sample_measures, sample_times, constant=None, rng=None, n_pairs=None):
    """Spot-check ``|coef(t,x,mu) - coef(t,x',mu')| <= L (|x - x'| + W2(mu, mu'))``.

    Pairs are formed between every state and a shuffled copy of the state
    list, and between consecutive measures (cyclically).  ``constant``
    defaults to the model's declared Lipschitz constant; a model without a
    Lipschitz tag needs an explicit one.
    """
    if constant is None:
        if not isinstance(m.regularity, Lipschitz):
            raise InvalidArgument("model is not tagged Lipschitz; pass constant explicitly")
        constant = m.regularity.constant
    if len(sample_measures) == 0 or len(sample_times) == 0:
        raise InvalidArgument("sample_measures and sample_times must be non-empty")
    x = _as_states(sample_states, m.dim)
    rng = np.random.default_rng(0) if rng is None else rng
    perm = rng.permutation(len(x))
    xp = x[perm]
    dx = np.linalg.norm(x - xp, axis=1)
    k = len(sample_measures)
    max_ratio = 0.0
    violations = 0
    n = 0
    for a in range(k):
        mu, nu = sample_measures[a], sample_measures[(a + 1) % k]
        wd = _w2(mu, nu)
        denom = dx + wd
        ok = denom > 0
        for t in sample_times:
            db = np.linalg.norm(m.b(t, x, mu) - m.b(t, xp, nu), axis=-1)
            ds = np.linalg.norm(m.sigma(t, x, mu) - m.sigma(t, xp, nu), axis=(-2, -1))
            r = np.maximum(db, ds)[ok] / denom[ok]
            if r.size:
                max_ratio = max(max_ratio, float(r.max()))
                violations += int(np.count_nonzero(r > constant * (1 + 1e-9)))
            n += r.size
    return CheckReport(max_ratio, violations, n)
