"""Empirical probability measures and Wasserstein-2 distances."""

from dataclasses import dataclass
from functools import cached_property
from math import gcd

import numpy as np

from .exceptions import EvaluationError, InvalidArgument
from .noise import normals

__all__ = [
    "EmpiricalMeasure",
    "w2_exact_1d",
    "w2_sliced",
    "w2_to_dirac0",
    "integrate",
]


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniform probability measure on ``N`` support points in R^d.

    ``support`` may be given as shape ``(N,)`` (read as d = 1) or ``(N, d)``.
    """

    support: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise InvalidArgument(f"support must have shape (N, d) with N, d >= 1, got {s.shape}")
        if not np.all(np.isfinite(s)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(s), axis=1))[0])
            raise InvalidArgument(f"support point {bad} is not finite: {s[bad]}")
        object.__setattr__(self, "support", s)

    @property
    def size(self):
        return self.support.shape[0]

    @property
    def dim(self):
        return self.support.shape[1]

    @cached_property
    def mean(self):
        return self.support.mean(axis=0)

    @cached_property
    def second_moment(self):
        return float(np.mean(np.sum(self.support**2, axis=1)))

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"EmpiricalMeasure(N={self.size}, d={self.dim})"


def _as_measure(mu):
    return mu if isinstance(mu, EmpiricalMeasure) else EmpiricalMeasure(mu)


def _sorted_1d(mu, name):
    if mu.dim != 1:
        raise InvalidArgument(f"{name} must be one-dimensional, has dimension {mu.dim}")
    return np.sort(mu.support[:, 0])


def _w2_sorted(a, b):
    """W2 between uniform empirical measures given sorted supports."""
    n, m = a.size, b.size
    if n == m:
        return float(np.sqrt(np.mean((a - b) ** 2)))
    # quantile functions are step functions on the grids i/n and j/m; work in
    # integer units of 1/lcm so coinciding breakpoints merge exactly
    lcm = n // gcd(n, m) * m
    sa, sb = lcm // n, lcm // m
    breaks = np.union1d(np.arange(1, n + 1, dtype=np.int64) * sa, np.arange(1, m + 1, dtype=np.int64) * sb)
    widths = np.diff(breaks, prepend=0) / lcm
    ia = (breaks - 1) // sa
    ib = (breaks - 1) // sb
    return float(np.sqrt(np.sum(widths * (a[ia] - b[ib]) ** 2)))


def w2_exact_1d(mu, nu):
    """Exact W2 between two empirical measures on the real line.

    Equal sizes pair order statistics; unequal sizes integrate the squared
    difference of the two quantile functions on their common refinement.
    """
    mu, nu = _as_measure(mu), _as_measure(nu)
    return _w2_sorted(_sorted_1d(mu, "mu"), _sorted_1d(nu, "nu"))


def sphere_directions(n_projections, dim, seed):
    """Uniform directions on the unit sphere; row j depends only on (seed, j)."""
    j = np.arange(n_projections, dtype=np.uint64)[:, None]
    c = np.arange(dim, dtype=np.uint64)[None, :]
    z = normals(seed, j, 0, c)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def w2_sliced(mu, nu, n_projections, seed, chunk=256):
    """Sliced W2: root mean of squared 1-D W2 distances over random projections."""
    mu, nu = _as_measure(mu), _as_measure(nu)
    if mu.dim != nu.dim:
        raise InvalidArgument(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if int(n_projections) != n_projections or n_projections < 1:
        raise InvalidArgument(f"n_projections must be a positive integer, got {n_projections}")
    if mu.dim == 1:
        # every projection is +-identity and the distance is sign invariant
        return w2_exact_1d(mu, nu)
    theta = sphere_directions(int(n_projections), mu.dim, seed)
    total = np.empty(theta.shape[0])
    for lo in range(0, theta.shape[0], chunk):
        th = theta[lo:lo + chunk]
        pa = np.sort(mu.support @ th.T, axis=0)
        pb = np.sort(nu.support @ th.T, axis=0)
        for c in range(th.shape[0]):
            total[lo + c] = _w2_sorted(pa[:, c], pb[:, c]) ** 2
    return float(np.sqrt(np.mean(total)))


def w2_to_dirac0(mu):
    """W2 distance to the point mass at the origin (root second moment)."""
    return float(np.sqrt(_as_measure(mu).second_moment))


def integrate(mu, f):
    """Average of ``f`` over the support.

    ``f`` is called once on the whole ``(N, d)`` support and must return an
    array whose leading axis indexes support points (a scalar is broadcast).
    """
    mu = _as_measure(mu)
    out = np.asarray(f(mu.support), dtype=float)
    if out.ndim == 0:
        out = np.broadcast_to(out, (mu.size,))
    if out.shape[0] != mu.size:
        raise InvalidArgument(f"f returned leading dimension {out.shape[0]}, expected {mu.size}")
    finite = np.isfinite(out).reshape(mu.size, -1).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise EvaluationError(f"f is not finite at support point {bad}: {mu.support[bad].tolist()}")
    return out.mean(axis=0)


def _w2_assignment(mu, nu):
    """Exact W2 for equal-size clouds in any dimension via optimal assignment."""
    from scipy.optimize import linear_sum_assignment

    if mu.size != nu.size:
        raise InvalidArgument("assignment W2 needs equal support sizes")
    cost = np.sum((mu.support[:, None, :] - nu.support[None, :, :]) ** 2, axis=-1)
    r, c = linear_sum_assignment(cost)
    return float(np.sqrt(cost[r, c].mean()))
