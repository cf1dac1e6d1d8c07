"""Faber polynomials and Faber coefficients of a canonical compact set.

With Psi(w) = cap*w + c0 + sum_{k=1}^p c_k w^{-k}, the generating function
Psi'(w) / (Psi(w) - z) = sum_n Phi_n(z) w^{-n-1} gives the recurrence

    cap * Phi_{n+1} = (z - c0) Phi_n - sum_{k=1}^{n} c_k Phi_{n-k} - n c_n,

with c_k = 0 for k > p and Phi_0 = 1.  Faber coefficients are computed on
the circle |w| = rho:

    [G]_n = (1/2 pi) int_0^{2pi} G(Psi(rho e^{it})) rho^{-n} e^{-int} dt,

which the trapezoidal rule turns into an FFT.  For pole terms 1/(z - a)^k the
same integral is evaluated exactly by residues at w_a = Phi(a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .conformal import Domain, level, phi, sample_level_curve
from .errors import QuadratureDivergence, TooFewCoefficients
from .poly import ComplexPoly
from .rates import fit_geometric_rate

EPS = np.finfo(float).eps
ALIAS_TARGET = 1e-20
ENTIRE_RHO = 2.0
LOG_UNDERFLOW = 600.0


# ---------------------------------------------------------------- basis


@dataclass(frozen=True, eq=False)
class FaberBasis:
    domain: Domain
    polys: tuple

    @property
    def max_degree(self) -> int:
        return len(self.polys) - 1

    def values(self, z, max_degree: int | None = None) -> np.ndarray:
        """Array ``V[n] = Phi_n(z)`` for n = 0..max_degree (by the recurrence)."""
        return faber_values(self.domain, z, self.max_degree if max_degree is None else max_degree)


def _recurrence_terms(domain: Domain, n: int):
    cap, c0, tail = domain.laurent()
    ck = [(k, tail[k - 1]) for k in range(1, min(n, len(tail)) + 1)]
    const = n * tail[n - 1] if 1 <= n <= len(tail) else 0.0
    return cap, c0, ck, const


@lru_cache(maxsize=64)
def faber_polynomials(domain: Domain, max_degree: int) -> FaberBasis:
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    cap = domain.capacity
    polys = [np.array([1.0 + 0j])]
    for n in range(max_degree):
        cap_, c0, ck, const = _recurrence_terms(domain, n)
        nxt = np.zeros(n + 2, dtype=complex)
        nxt[1:] += polys[n]
        nxt[: n + 1] -= c0 * polys[n]
        for k, c in ck:
            nxt[: len(polys[n - k])] -= c * polys[n - k]
        nxt[0] -= const
        polys.append(nxt / cap_)
    for n, p in enumerate(polys):
        expected = cap ** (-n)
        if abs(p[-1] - expected) > 1e-10 * expected:
            raise ArithmeticError(f"Faber recurrence broke the leading-coefficient identity at n={n}")
    return FaberBasis(domain, tuple(ComplexPoly(p) for p in polys))


def faber_values(domain: Domain, z, max_degree: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty((max_degree + 1,) + z.shape, dtype=complex)
    out[0] = 1.0
    for n in range(max_degree):
        cap, c0, ck, const = _recurrence_terms(domain, n)
        acc = (z - c0) * out[n] - const
        for k, c in ck:
            acc = acc - c * out[n - k]
        out[n + 1] = acc / cap
    return out


def poly_to_faber(domain: Domain, p: ComplexPoly) -> np.ndarray:
    """Exact Faber coefficients of a polynomial (length deg+1)."""
    basis = faber_polynomials(domain, p.degree)
    rest = p.padded(p.degree + 1).copy()
    out = np.zeros(p.degree + 1, dtype=complex)
    for n in range(p.degree, -1, -1):
        bn = basis.polys[n].coeffs
        out[n] = rest[n] / bn[n]
        rest[: n + 1] -= out[n] * bn
    return out


# --------------------------------------------------------- coefficients


@dataclass(frozen=True, eq=False)
class FaberCoefficients:
    """[G]_n = rho^{-n} * scaled[n]; ``noise`` is eps*max|G| on the contour."""

    scaled: np.ndarray
    rho_used: float
    node_count: int
    noise: float = 0.0

    def __len__(self):
        return len(self.scaled)

    @property
    def values(self) -> np.ndarray:
        n = np.arange(len(self.scaled))
        shift = n * math.log(self.rho_used)
        if shift.max(initial=0.0) <= LOG_UNDERFLOW:
            return self.scaled * self.rho_used ** (-n.astype(float))
        with np.errstate(divide="ignore"):
            mag = np.exp(np.log(np.abs(self.scaled)) - shift)
        return mag * np.exp(1j * np.angle(self.scaled))

    def log_abs(self) -> np.ndarray:
        n = np.arange(len(self.scaled))
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.scaled)) - n * math.log(self.rho_used)

    def log_noise(self) -> np.ndarray:
        n = np.arange(len(self.scaled))
        with np.errstate(divide="ignore"):
            return math.log(self.noise) - n * math.log(self.rho_used) if self.noise > 0 else np.full(len(n), -np.inf)


def default_node_count(count: int) -> int:
    need = max(512, 8 * (count + 16))
    return 1 << (need - 1).bit_length()


def singular_level(domain: Domain, singularities) -> float:
    levels = [level(domain, s) for s in singularities]
    return min(levels) if levels else math.inf


def default_rho(domain: Domain, singularities, count: int, node_count: int) -> float:
    """Largest radius whose aliasing bound (rho/rho_sing)^(N - count) stays
    below ``ALIAS_TARGET``, never below the geometric mean sqrt(rho_sing)."""
    rs = singular_level(domain, singularities)
    if math.isinf(rs):
        return ENTIRE_RHO
    margin = math.exp(math.log(ALIAS_TARGET) / max(node_count - count, 1))
    return max(rs * margin, math.sqrt(rs))


def faber_coefficients(
    domain: Domain,
    g,
    rho: float | None = None,
    count: int = 64,
    node_count: int | None = None,
    singularities=None,
) -> FaberCoefficients:
    """Faber coefficients [g]_0..[g]_{count-1} by trapezoidal quadrature.

    ``g`` is a vectorized callable.  Either ``rho`` or the finite
    ``singularities`` of g must be supplied.
    """
    if node_count is None:
        node_count = default_node_count(count)
    if count >= node_count // 2:
        raise ValueError("count must be below node_count/2")
    if rho is None:
        if singularities is None:
            raise ValueError("need rho or the singularities of g")
        rho = default_rho(domain, singularities, count, node_count)
    if singularities is not None and rho >= singular_level(domain, singularities):
        raise QuadratureDivergence(f"rho={rho} reaches a singularity of g")
    sample = sample_level_curve(domain, rho, node_count)
    vals = np.asarray(g(sample.t), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise QuadratureDivergence("g is not finite on the level curve")
    c = np.fft.fft(vals) / node_count
    _check_resolved(c)
    noise = EPS * float(np.max(np.abs(vals)))
    return FaberCoefficients(c[:count].copy(), float(rho), node_count, noise)


def _check_resolved(c: np.ndarray):
    n = len(c)
    band = np.abs(c[3 * n // 8 : 5 * n // 8])
    top = np.max(np.abs(c))
    if top > 0 and band.max() > 1e-4 * top:
        raise QuadratureDivergence(
            "high-frequency content on the level curve: rho is too close to (or beyond) a singularity"
        )


def pole_faber_coefficients(domain: Domain, a: complex, order: int, count: int) -> np.ndarray:
    """Exact [(z - a)^{-order}]_n for n = 0..count-1.

    [G]_n = -Res_{w = w_a} w^{-n-1} (Psi(w) - a)^{-order} with w_a = Phi(a);
    the residue at infinity vanishes because the integrand is O(w^{-2}).
    """
    wa = phi(domain, a)
    k = order
    psi_t = domain.taylor_psi(wa, k)
    h = psi_t[1 : k + 1]  # (Psi(w) - a)/s = h0 + h1 s + ...
    u = _series_pow(_series_inv(h), k)  # h(s)^{-k} to order k-1
    n = np.arange(count)
    out = np.zeros(count, dtype=complex)
    log_wa = np.log(wa)
    for i in range(k):
        # coefficient of s^i in w^{-n-1} = wa^{-n-1} (1 + s/wa)^{-n-1}
        binom = np.array([math.comb(int(m) + i, i) for m in n], dtype=float) * (-1) ** i
        powers = np.exp(-(n + 1 + i) * log_wa)
        out += u[k - 1 - i] * binom * powers
    return -out


def _series_inv(h: np.ndarray) -> np.ndarray:
    m = len(h)
    inv = np.zeros(m, dtype=complex)
    inv[0] = 1.0 / h[0]
    for j in range(1, m):
        inv[j] = -np.dot(h[1 : j + 1], inv[j - 1 :: -1][:j]) / h[0]
    return inv


def _series_pow(s: np.ndarray, k: int) -> np.ndarray:
    m = len(s)
    out = np.zeros(m, dtype=complex)
    out[0] = 1.0
    for _ in range(k):
        out = np.convolve(out, s)[:m]
    return out


def faber_partial_sum(basis: FaberBasis, coeffs, degree: int, z):
    vals = coeffs.values if isinstance(coeffs, FaberCoefficients) else np.asarray(coeffs, dtype=complex)
    if degree > basis.max_degree or degree >= len(vals):
        raise ValueError("degree exceeds the available basis or coefficients")
    phis = basis.values(z, degree)
    out = np.tensordot(vals[: degree + 1], phis, axes=(0, 0))
    return complex(out) if np.ndim(out) == 0 else out


def estimate_rho0(coeffs, min_count: int = 32) -> float:
    """Index of the largest canonical domain of holomorphy, from coefficients.

    The reciprocal of the fitted limsup root growth of |[G]_n|, using only
    coefficients above both 1e-14*max and the quadrature noise floor.  A
    sequence that stops abruptly (fewer than 8 resolved terms, or a cliff
    far below the fitted trend) is treated as a polynomial: +inf.
    """
    if isinstance(coeffs, FaberCoefficients):
        logs = coeffs.log_abs()
        log_noise = coeffs.log_noise() + math.log(100.0)
    else:
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(np.asarray(coeffs, dtype=complex)))
        log_noise = np.full(len(logs), -np.inf)
    if len(logs) < min_count:
        raise TooFewCoefficients(f"need >= {min_count} coefficients, got {len(logs)}")
    top = np.max(logs)
    if not np.isfinite(top):
        return math.inf
    log_floor = np.maximum(top + math.log(1e-14), log_noise)
    resolved = np.flatnonzero(logs > log_floor)
    if len(resolved) < 8:
        return math.inf
    n = resolved.astype(float)
    rate, diag = fit_geometric_rate(n, np.exp(logs[resolved] - top), floor=0.0)
    if rate <= 0:
        return math.inf
    last = int(resolved[-1])
    if last + 1 < len(logs):
        predicted = diag.intercept + diag.slope * (last + 1) + top
        if predicted > log_floor[last + 1] + math.log(1e3):
            return math.inf
    return 1.0 / rate
