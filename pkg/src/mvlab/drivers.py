"""Driving noise: Brownian increments and continuous semimartingale pairs (M, A).

Every variate is addressed by ``(seed, particle, step, component)`` so a driver
is a pure function of its arguments whatever the thread count.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import TimePartition
from .exceptions import EvaluationError, InvalidArgument
from . import noise

__all__ = [
    "NoiseStream",
    "DriverPath",
    "brownian_increments",
    "aggregate_to_coarse",
    "perturbed_driver",
    "write_driver",
    "read_driver",
]

MAGIC = b"MVDRV1"


@dataclass(frozen=True)
class NoiseStream:
    seed: int

    def __post_init__(self):
        noise.seed_key(self.seed)

    def normal(self, particle, step, component):
        return float(noise.normals(self.seed, particle, step, component))

    def block(self, particles, n_steps, dim):
        return noise.normal_block(self.seed, particles, n_steps, dim)


def _is_shared(a):
    # one row broadcast over all particles
    return a.ndim == 3 and a.shape[0] > 1 and a.strides[0] == 0


def _variation(a_incr):
    if _is_shared(a_incr):
        tv = np.sum(np.linalg.norm(a_incr[0], axis=-1))
        return np.full(a_incr.shape[0], tv)
    return np.sum(np.linalg.norm(a_incr, axis=-1), axis=1)


@dataclass(frozen=True, eq=False)
class DriverPath:
    """Per-particle increments of a martingale M and a bounded-variation A.

    Both increment arrays have shape ``(N, n_steps, d)``.  ``A_increments`` may be
    a read-only broadcast view when A is the same for every particle.
    """

    partition: TimePartition
    M_increments: np.ndarray
    A_increments: np.ndarray
    total_variation_A: np.ndarray = None

    def __post_init__(self):
        m = np.asarray(self.M_increments, dtype=np.float64)
        a = np.asarray(self.A_increments, dtype=np.float64)
        if m.ndim != 3:
            raise InvalidArgument(f"M_increments must have shape (N, n_steps, d), got {m.shape}")
        if a.shape != m.shape:
            a = np.broadcast_to(a, m.shape) if a.ndim == 3 and a.shape[0] == 1 else a
        if a.shape != m.shape:
            raise InvalidArgument(f"A_increments shape {a.shape} differs from M_increments {m.shape}")
        if m.shape[1] != self.partition.n_steps:
            raise InvalidArgument(
                f"driver has {m.shape[1]} steps but partition has {self.partition.n_steps}"
            )
        tv = _variation(a)
        if self.total_variation_A is not None:
            given = np.asarray(self.total_variation_A, dtype=float)
            if given.shape != tv.shape or not np.allclose(given, tv, rtol=1e-12, atol=0):
                raise InvalidArgument("total_variation_A does not match the A increments")
        object.__setattr__(self, "M_increments", m)
        object.__setattr__(self, "A_increments", a)
        object.__setattr__(self, "total_variation_A", tv)

    @property
    def n_particles(self):
        return self.M_increments.shape[0]

    @property
    def n_steps(self):
        return self.M_increments.shape[1]

    @property
    def dim(self):
        return self.M_increments.shape[2]

    def permuted(self, order):
        """Driver with particle rows reordered."""
        order = np.asarray(order)
        a = self.A_increments if _is_shared(self.A_increments) else self.A_increments[order]
        return DriverPath(self.partition, self.M_increments[order], a)


def brownian_increments(p, N, d, stream, threads=1, chunk=512):
    """Brownian increments ``sqrt(dt_k) * Z[i, k, j]`` with ``A_t = t``."""
    if int(N) != N or N < 1 or int(d) != d or d < 1:
        raise InvalidArgument(f"need N >= 1 and d >= 1, got N={N}, d={d}")
    if not isinstance(stream, NoiseStream):
        stream = NoiseStream(int(stream))
    N, d = int(N), int(d)
    n = p.n_steps
    root_dt = np.sqrt(p.steps)[None, :, None]
    out = np.empty((N, n, d))

    def fill(lo):
        hi = min(lo + chunk, N)
        out[lo:hi] = stream.block(np.arange(lo, hi), n, d) * root_dt

    starts = range(0, N, chunk)
    threads = max(1, int(threads))
    if threads == 1:
        for lo in starts:
            fill(lo)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    a = np.broadcast_to(np.repeat(p.steps[:, None], d, axis=1)[None], (N, n, d))
    return DriverPath(p, out, a)


def _aggregate(x, starts, lengths):
    if _is_shared(x):
        row = _aggregate(x[:1].copy(), starts, lengths)
        return np.broadcast_to(row, (x.shape[0],) + row.shape[1:])
    acc = x[:, starts].copy()
    for o in range(1, int(lengths.max())):
        sel = lengths > o
        if sel.all():
            acc += x[:, starts + o]
        else:
            acc[:, sel] += x[:, starts[sel] + o]
    return acc


def aggregate_to_coarse(fine, coarse_partition):
    """Sum fine increments inside each coarse interval, left to right."""
    idx = fine.partition.indices_of(coarse_partition)
    if idx[0] != 0 or idx[-1] != fine.partition.n_steps:
        raise InvalidArgument("coarse partition must span the fine partition")
    starts = idx[:-1]
    lengths = np.diff(idx)
    m = _aggregate(fine.M_increments, starts, lengths)
    a = _aggregate(fine.A_increments, starts, lengths)
    return DriverPath(coarse_partition, m, a)


def _tilt_values(f, t, name):
    vals = np.asarray(f(t), dtype=float)
    vals = np.broadcast_to(vals, t.shape) if vals.ndim == 0 else vals
    if vals.shape != t.shape:
        vals = np.array([float(f(s)) for s in t])
    if not np.all(np.isfinite(vals)):
        raise EvaluationError(f"{name} is not finite on the grid")
    return vals


def perturbed_driver(base, eps, martingale_tilt, bv_tilt):
    """Driver ``(M^eps, A^eps)`` built on the same base noise.

    ``dM^eps = (1 + eps * martingale_tilt(t_k)) dM`` and
    ``dA^eps = dA + eps * bv_tilt(t_k) dt_k``, with tilts taken at left grid points.
    """
    if not np.isfinite(eps):
        raise InvalidArgument(f"eps must be finite, got {eps}")
    p = base.partition
    t = p.points[:-1]
    mt = _tilt_values(martingale_tilt, t, "martingale_tilt")
    bt = _tilt_values(bv_tilt, t, "bv_tilt")
    scale = (1.0 + eps * mt)[None, :, None]
    m = base.M_increments * scale
    shift = (eps * bt * p.steps)[None, :, None]
    if _is_shared(base.A_increments):
        a = np.broadcast_to(base.A_increments[:1] + shift, base.A_increments.shape)
    else:
        a = base.A_increments + shift
    return DriverPath(p, m, a)


def write_driver(path, driver):
    """Binary dump: magic, N/n/d as little-endian int64, then row-major float64
    M increments, A increments and the n + 1 partition points."""
    N, n, d = driver.M_increments.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<qqq", N, n, d))
        fh.write(np.ascontiguousarray(driver.M_increments, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(driver.A_increments, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(driver.partition.points, dtype="<f8").tobytes())


def read_driver(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise InvalidArgument(f"{path}: not a driver dump (bad magic)")
    off = len(MAGIC)
    N, n, d = struct.unpack_from("<qqq", data, off)
    off += 24
    size = N * n * d
    expected = off + 8 * (2 * size + n + 1)
    if len(data) != expected:
        raise InvalidArgument(f"{path}: expected {expected} bytes, found {len(data)}")
    flat = np.frombuffer(data, dtype="<f8", offset=off).astype(np.float64)
    m = flat[:size].reshape(N, n, d)
    a = flat[size:2 * size].reshape(N, n, d)
    pts = flat[2 * size:]
    return DriverPath(TimePartition(pts), m, a)
