"""Canonical compact sets and their exterior conformal maps.

Every domain is described by the Laurent form of the inverse map

    Psi(w) = cap * w + c0 + sum_{k>=1} c_k w^{-k},    |w| > 1,

which maps the exterior of the unit disk onto the complement of E with
Psi(inf) = inf and Psi'(inf) = cap > 0.  Disks, ellipses and segments have
closed-form exterior maps Phi = Psi^{-1}; a general ``LaurentMap`` is inverted
numerically.  All domains must contain the origin.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadRho, DomainError, InsideUnitDisk, PointInsideDomain

# |Phi| below 1 - BOUNDARY_TOL means "inside E"; boundary points map to |w| = 1.
BOUNDARY_TOL = 1e-12

NEWTON_MAXITER = 50
NEWTON_RTOL = 1e-13


class Domain:
    """Base class; subclasses provide ``laurent`` and may override ``_phi``."""

    def laurent(self) -> tuple[float, complex, tuple[complex, ...]]:
        """Return ``(cap, c0, (c_1, ..., c_p))`` of the inverse map."""
        raise NotImplementedError

    @property
    def capacity(self) -> float:
        return self.laurent()[0]

    # -- inverse map ---------------------------------------------------
    def _psi(self, w):
        cap, c0, tail = self.laurent()
        w = np.asarray(w, dtype=complex)
        out = cap * w + c0
        inv = 1.0 / w
        p = inv
        for c in tail:
            out = out + c * p
            p = p * inv
        return out

    def _dpsi(self, w):
        cap, _, tail = self.laurent()
        w = np.asarray(w, dtype=complex)
        out = np.full_like(w, cap)
        for k, c in enumerate(tail, start=1):
            out = out - k * c * w ** (-k - 1)
        return out

    def taylor_psi(self, w0: complex, order: int) -> np.ndarray:
        """Taylor coefficients ``psi_j = Psi^{(j)}(w0)/j!`` for j = 0..order."""
        cap, c0, tail = self.laurent()
        out = np.zeros(order + 1, dtype=complex)
        out[0] = complex(self._psi(w0))
        if order >= 1:
            out[1] += cap
        for k, c in enumerate(tail, start=1):
            # w^{-k} = w0^{-k} (1 + s/w0)^{-k}
            for j in range(1, order + 1):
                out[j] += c * math.comb(k + j - 1, j) * (-1) ** j * w0 ** (-k - j)
        return out

    # -- exterior map --------------------------------------------------
    def _phi(self, z):
        return _laurent_inverse(self, z)

    def contains(self, z) -> bool:
        return level(self, z) <= 1.0 + BOUNDARY_TOL

    def as_laurent_map(self) -> LaurentMap:
        cap, c0, tail = self.laurent()
        return LaurentMap(cap=cap, c0=c0, tail=tail)

    def _check_origin(self):
        w = self._phi(np.array([0.0 + 0.0j]))[0]
        if abs(w) > 1.0 + 1e-9:
            raise DomainError(f"the origin must lie in E (|Phi(0)| = {abs(w):.6g})")


@dataclass(frozen=True)
class Disk(Domain):
    center: complex = 0.0
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise DomainError("disk radius must be positive")
        self._check_origin()

    def laurent(self):
        return self.radius, self.center, ()

    def _phi(self, z):
        return (np.asarray(z, dtype=complex) - self.center) / self.radius


class _Joukowski(Domain):
    """Psi(w) = c0 + cap*w + c1/w; shared by ellipses and segments."""

    def _phi(self, z):
        cap, c0, (c1,) = self.laurent()
        u = np.asarray(z, dtype=complex) - c0
        root = np.sqrt(u * u - 4.0 * cap * c1)
        w1 = (u + root) / (2.0 * cap)
        w2 = (u - root) / (2.0 * cap)
        # the branch with |Phi| > 1 is the exterior image
        return np.where(np.abs(w1) >= np.abs(w2), w1, w2)


@dataclass(frozen=True)
class Ellipse(_Joukowski):
    """Filled ellipse; ``angle`` rotates the major axis off the real line."""

    center: complex = 0.0
    semi_major: float = 1.0
    semi_minor: float = 0.5
    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        if not self.semi_minor > 0:
            raise DomainError("degenerate ellipse (semi_minor must be > 0); use Segment")
        if self.semi_minor > self.semi_major:
            raise DomainError("semi_minor exceeds semi_major")
        self._check_origin()

    def laurent(self):
        a, b = float(self.semi_major), float(self.semi_minor)
        c1 = 0.5 * (a - b) * cmath.exp(2j * self.angle)
        return 0.5 * (a + b), self.center, (c1,)


@dataclass(frozen=True)
class Segment(_Joukowski):
    endpoint_a: complex = -1.0
    endpoint_b: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "endpoint_a", complex(self.endpoint_a))
        object.__setattr__(self, "endpoint_b", complex(self.endpoint_b))
        if self.endpoint_a == self.endpoint_b:
            raise DomainError("segment endpoints coincide")
        self._check_origin()

    def laurent(self):
        h = 0.5 * (self.endpoint_b - self.endpoint_a)
        mid = 0.5 * (self.endpoint_a + self.endpoint_b)
        return 0.5 * abs(h), mid, (h * h / (2.0 * abs(h)),)


@dataclass(frozen=True)
class LaurentMap(Domain):
    """User-supplied inverse map Psi(w) = cap*w + c0 + sum c_k w^{-k}.

    Univalence of Psi on |w| > 1 is the caller's responsibility.
    """

    cap: float = 1.0
    c0: complex = 0.0
    tail: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "cap", float(self.cap))
        object.__setattr__(self, "c0", complex(self.c0))
        object.__setattr__(self, "tail", tuple(complex(c) for c in self.tail))
        if not self.cap > 0:
            raise DomainError("cap must be positive")
        self._check_origin()

    def laurent(self):
        return self.cap, self.c0, self.tail


def _laurent_inverse(domain: Domain, z) -> np.ndarray:
    """Invert Psi by damped Newton; fall back to polynomial roots on failure."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return _newton_inverse(domain, z)


def _newton_inverse(domain: Domain, z) -> np.ndarray:
    cap, c0, tail = domain.laurent()
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = (z - c0) / cap
    w = np.where(np.abs(w) < 1.5, 1.5 * np.exp(1j * np.angle(w)), w)
    scale = np.maximum(1.0, np.abs(z))
    res = domain._psi(w) - z
    done = np.abs(res) <= NEWTON_RTOL * scale
    for _ in range(NEWTON_MAXITER):
        if done.all():
            break
        step = res / domain._dpsi(w)
        lam = np.ones(w.shape)
        new_w = w - step
        new_res = domain._psi(new_w) - z
        for _ in range(30):
            worse = (np.abs(new_res) > np.abs(res)) & ~done
            if not worse.any():
                break
            lam = np.where(worse, lam / 2, lam)
            new_w = np.where(worse, w - lam * step, new_w)
            new_res = np.where(worse, domain._psi(new_w) - z, new_res)
        w = np.where(done, w, new_w)
        res = np.where(done, res, new_res)
        done = np.abs(res) <= NEWTON_RTOL * scale
    suspect = ~done | (np.abs(w) < 1.0 + 1e-6)
    for i in np.flatnonzero(suspect):
        w[i] = _outer_root(cap, c0, tail, z[i])
    return w


def _outer_root(cap, c0, tail, z) -> complex:
    """Largest root of w^p (Psi(w) - z) = 0; the exterior preimage if |w| >= 1."""
    # descending coefficients: cap w^{p+1} + (c0 - z) w^p + c1 w^{p-1} + ... + c_p
    coeffs = [cap, c0 - z, *tail]
    roots = np.roots(coeffs)
    return complex(roots[np.argmax(np.abs(roots))])


def phi(domain: Domain, z):
    """Exterior conformal map Phi(z); raises ``PointInsideDomain`` for z in E."""
    scalar = np.ndim(z) == 0
    w = np.atleast_1d(domain._phi(np.atleast_1d(np.asarray(z, dtype=complex))))
    if np.any(np.abs(w) < 1.0 - BOUNDARY_TOL):
        bad = np.asarray(z, dtype=complex).ravel()[np.argmin(np.abs(w))]
        raise PointInsideDomain(f"{bad} lies in E; Phi is defined only outside E")
    return complex(w[0]) if scalar else w.reshape(np.shape(z))


def psi(domain: Domain, w):
    """Inverse map Psi(w) for |w| > 1."""
    arr = np.asarray(w, dtype=complex)
    if np.any(np.abs(arr) <= 1.0):
        raise InsideUnitDisk("Psi is only defined for |w| > 1")
    out = domain._psi(arr)
    return complex(out) if np.ndim(out) == 0 else out


def capacity(domain: Domain) -> float:
    return domain.capacity


def level(domain: Domain, z) -> float:
    """|Phi(z)|, the index of the level curve through z (1 on and inside E)."""
    try:
        return abs(phi(domain, z))
    except PointInsideDomain:
        return 1.0


@dataclass(frozen=True, eq=False)
class ContourSample:
    """Equispaced nodes t_k = Psi(rho e^{i theta_k}) on the level curve."""

    rho: float
    theta: np.ndarray
    t: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.theta)

    @property
    def w(self) -> np.ndarray:
        return self.rho * np.exp(1j * self.theta)


def _check_node_count(node_count: int):
    if node_count < 8 or node_count & (node_count - 1):
        raise ValueError(f"node_count must be a power of two >= 8, got {node_count}")


def sample_level_curve(domain: Domain, rho: float, node_count: int) -> ContourSample:
    if not rho > 1:
        raise BadRho(f"level-curve index must exceed 1, got {rho}")
    _check_node_count(node_count)
    theta = 2.0 * np.pi * np.arange(node_count) / node_count
    t = domain._psi(rho * np.exp(1j * theta))
    return ContourSample(rho=float(rho), theta=theta, t=t)
