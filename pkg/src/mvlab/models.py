"""Catalog of coefficient sets, addressable by string identifier.

==================  =====================================================
identifier          drift / diffusion
==================  =====================================================
mean_field_ou       a x + b_coef mean(mu)            / sigma I
mckean_kernel:NAME  integral of kernel(t, x, y) mu(dy) / I
osgood_drift        -sign(x) kappa(|x|) + c mean(mu)  / sigma0 + sigma1 sin(x)
pure_diffusion      0                                / sigma I
==================  =====================================================
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import Lipschitz, Model, Osgood
from .exceptions import InvalidArgument
from .measure import integrate

__all__ = [
    "MeanFieldOUParams",
    "McKeanKernelParams",
    "OsgoodDriftParams",
    "mean_field_ou",
    "mckean_kernel",
    "osgood_drift",
    "pure_diffusion",
    "ou_moments",
    "osgood_kappa",
    "mollified_kappa",
    "KERNELS",
    "get_model",
    "list_models",
]


def _identity_diffusion(dim, scale):
    eye = scale * np.eye(dim)

    def diffusion(t, x, mu):
        return np.broadcast_to(eye, np.shape(x) + (dim,))

    return diffusion


@dataclass(frozen=True)
class MeanFieldOUParams:
    a: float = -1.0
    b_coef: float = 0.5
    sigma: float = 0.3
    dim: int = 1

    def __post_init__(self):
        if not all(np.isfinite([self.a, self.b_coef, self.sigma])):
            raise InvalidArgument("mean_field_ou parameters must be finite")
        if self.sigma < 0:
            raise InvalidArgument(f"sigma must be >= 0, got {self.sigma}")

    @property
    def lipschitz_constant(self):
        return max(abs(self.a), abs(self.b_coef))


def mean_field_ou(a=-1.0, b_coef=0.5, sigma=0.3, dim=1):
    prm = MeanFieldOUParams(a, b_coef, sigma, dim)

    def drift(t, x, mu):
        return prm.a * x + prm.b_coef * mu.mean

    growth = max(abs(a), abs(b_coef), sigma * np.sqrt(dim)) or 1.0
    return Model(
        dim, drift, _identity_diffusion(dim, sigma), Lipschitz(prm.lipschitz_constant), growth, "mean_field_ou", prm
    )


def ou_moments(params, x0, t):
    """Mean and variance at time ``t`` of the scalar mean-field OU solution.

    The mean solves ``m' = (a + b_coef) m``; the centred process is a plain OU
    process with rate ``a``.
    """
    a, b, s = params.a, params.b_coef, params.sigma
    mean = x0 * np.exp((a + b) * t)
    var = s * s * t if a == 0 else s * s * np.expm1(2 * a * t) / (2 * a)
    return float(mean), float(var)


# -- McKean interaction kernels ---------------------------------------------


def _attraction(t, x, y):
    return y - x


def _sine(t, x, y):
    return np.sin(y - x)


KERNELS = {"attraction": _attraction, "sine": _sine}


@dataclass(frozen=True)
class McKeanKernelParams:
    kernel: Callable
    name: str = "custom"
    lipschitz_constant: float = 1.0


def mckean_kernel(kernel="attraction", dim=1, chunk=512):
    """Drift linear in the law: ``b(t, x, mu) = int kernel(t, x, y) mu(dy)``, unit diffusion.

    Cost is O(N^2) per evaluation.  The built-in kernels are 1-Lipschitz in (x, y).
    """
    if isinstance(kernel, str):
        if kernel not in KERNELS:
            raise InvalidArgument(f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}")
        prm = McKeanKernelParams(KERNELS[kernel], kernel)
    else:
        prm = McKeanKernelParams(kernel)

    def drift(t, x, mu):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, dim)
        out = np.empty_like(flat)
        for lo in range(0, flat.shape[0], chunk):
            xc = flat[lo:lo + chunk]
            out[lo:lo + chunk] = integrate(mu, lambda y: prm.kernel(t, xc[None], y[:, None]))
        return out.reshape(x.shape)

    growth = max(1.0, np.sqrt(dim))
    return Model(
        dim,
        drift,
        _identity_diffusion(dim, 1.0),
        Lipschitz(prm.lipschitz_constant),
        growth,
        f"mckean_kernel:{prm.name}",
        prm,
    )


# -- Osgood drift ------------------------------------------------------------

_U_STAR = np.exp(-2.0)
_KAPPA_STAR = 2.0 * _U_STAR
_SLOPE_STAR = 1.0  # ln(1/u*) - 1


def osgood_kappa(u):
    """Modulus ``u ln(1/u)`` on ``(0, e^-2]``, extended linearly (tangent) beyond."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or np.any(np.isnan(u_arr)):
        raise InvalidArgument("osgood_kappa needs u >= 0")
    small = np.minimum(u_arr, _U_STAR)
    with np.errstate(divide="ignore", invalid="ignore"):
        head = np.where(small > 0, -small * np.log(small), 0.0)
    out = np.where(u_arr <= _U_STAR, head, _KAPPA_STAR + _SLOPE_STAR * (u_arr - _U_STAR))
    return float(out) if out.ndim == 0 else out


def mollified_kappa(u, h):
    """``osgood_kappa`` with its chord on ``[0, h]``; Lipschitz with constant kappa(h)/h."""
    u_arr = np.asarray(u, dtype=float)
    slope = osgood_kappa(h) / h
    out = np.where(u_arr < h, slope * u_arr, osgood_kappa(np.maximum(u_arr, h)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class OsgoodDriftParams:
    c: float = 0.5
    sigma0: float = 0.3
    sigma1: float = 0.1
    mollify: Optional[float] = None

    def __post_init__(self):
        if not all(np.isfinite([self.c, self.sigma0, self.sigma1])):
            raise InvalidArgument("osgood_drift parameters must be finite")
        if self.mollify is not None and not self.mollify > 0:
            raise InvalidArgument(f"mollify scale must be > 0, got {self.mollify}")

    def kappa(self, u):
        return osgood_kappa(u) if self.mollify is None else mollified_kappa(u, self.mollify)


def osgood_drift(c=0.5, sigma0=0.3, sigma1=0.1, mollify=None):
    """Scalar model with non-Lipschitz drift ``-sign(x) kappa(|x|) + c mean(mu)``.

    With ``mollify=h`` the modulus is replaced by its chord on ``[0, h]``, which
    makes the drift Lipschitz and uniformly within ``kappa(h)`` of the original.
    """
    prm = OsgoodDriftParams(c, sigma0, sigma1, mollify)

    def drift(t, x, mu):
        return -np.sign(x) * prm.kappa(np.abs(x)) + prm.c * mu.mean

    def diffusion(t, x, mu):
        return (prm.sigma0 + prm.sigma1 * np.sin(x))[..., None]

    growth = max(1.0, abs(c), abs(sigma0) + abs(sigma1))
    if mollify is None:
        reg = Osgood(osgood_kappa)
        name = "osgood_drift"
    else:
        reg = Lipschitz(max(osgood_kappa(mollify) / mollify, abs(c), abs(sigma1)))
        name = f"osgood_drift[h={mollify:g}]"
    return Model(1, drift, diffusion, reg, growth, name, prm)


def pure_diffusion(sigma=1.0, dim=1):
    """Zero drift and constant diffusion ``sigma I``."""
    if not (np.isfinite(sigma) and sigma >= 0):
        raise InvalidArgument(f"sigma must be finite and >= 0, got {sigma}")

    def drift(t, x, mu):
        return np.zeros_like(x)

    return Model(dim, drift, _identity_diffusion(dim, sigma), Lipschitz(0.0), max(sigma * np.sqrt(dim), 1.0), "pure_diffusion")


_FACTORIES = {
    "mean_field_ou": mean_field_ou,
    "osgood_drift": osgood_drift,
    "pure_diffusion": pure_diffusion,
}


def list_models():
    return sorted(_FACTORIES) + [f"mckean_kernel:{k}" for k in sorted(KERNELS)]


def get_model(identifier, **params):
    """Build a catalog model from its identifier and keyword parameters."""
    if identifier.startswith("mckean_kernel:"):
        return mckean_kernel(identifier.split(":", 1)[1], **params)
    try:
        factory = _FACTORIES[identifier]
    except KeyError:
        raise InvalidArgument(f"unknown model {identifier!r}; known: {', '.join(list_models())}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for {identifier!r}: {exc}") from None
