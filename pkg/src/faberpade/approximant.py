"""Simultaneous and incomplete Padé-Faber approximants.

The (n, m) denominator Q, deg Q <= |m|, is characterised by the |m|
conditions [Q z^k F_alpha]_n = 0 (k < m_alpha); the numerators are then the
Faber truncations P_{k,alpha} = sum_{l<n} [z^k Q F_alpha]_l Phi_l.  Both only
need the table T_alpha[p, l] = [z^p F_alpha]_l, built once per function:

* pole terms are split into partial fractions after multiplying by z^p, and
  their coefficients are exact residues (``pole_faber_coefficients``);
* polynomial parts are expanded exactly in the Faber basis;
* catalog tails use trapezoidal quadrature, choosing for every index the
  level curve with the smallest noise bound eps*max|g|*rho^{-l}.
"""

from __future__ import annotations

import enum
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .conformal import Domain, sample_level_curve
from .errors import DenominatorZero, QuadratureDivergence
from .faber import (
    EPS,
    default_node_count,
    default_rho,
    faber_polynomials,
    faber_values,
    pole_faber_coefficients,
    poly_to_faber,
    singular_level,
)
from .funcsys import (
    ExpTail,
    FunctionSystem,
    MeromorphicFunction,
    MultiIndex,
    PolynomialTail,
    laurent_matrix_entry,
)
from .poly import ComplexPoly

TOL_RANK = 1e-9
MONIC_TOL = 1e-8
LADDER_RATIO = 1.3
MIN_BUCKET = 64


class Normalization(enum.Enum):
    MONIC = "monic"
    UNIT_SUM = "unit_sum"


@dataclass(frozen=True)
class QuadratureSettings:
    """Overrides for tail quadrature: fixed level-curve index and node count."""

    rho: float | None = None
    nodes: int | None = None


DEFAULT_QUAD = QuadratureSettings()


# ------------------------------------------------------ coefficient tables


def _shifted_to_monomial(b: np.ndarray, a: complex) -> np.ndarray:
    """Coefficients of sum_j b_j (z - a)^j in powers of z."""
    out = np.zeros(len(b), dtype=complex)
    base = np.array([1.0 + 0j])
    for bj in b:
        out[: len(base)] += bj * base
        base = np.convolve(base, [-a, 1.0])
    return out


class FunctionExpansion:
    """Tables ``[z^p f]_l`` for one function on one domain.

    Tables are kept per coefficient-count bucket (a power of two >= 64) so
    that the values served for a request never depend on earlier requests.
    """

    def __init__(self, domain: Domain, f: MeromorphicFunction, quad: QuadratureSettings = DEFAULT_QUAD):
        f.check_domain(domain)
        self.domain = domain
        self.f = f
        self.quad = quad
        self._lock = threading.Lock()
        self._tables: dict = {}

    @staticmethod
    def bucket(count: int) -> int:
        return 1 << (max(int(count), MIN_BUCKET) - 1).bit_length()

    def table(self, max_power: int, count: int) -> np.ndarray:
        size = self.bucket(count)
        with self._lock:
            tab = self._tables.get(size)
            if tab is None or tab.shape[0] <= max_power:
                powers = max(max_power + 1, 0 if tab is None else tab.shape[0])
                tab = self._tables[size] = self._build(powers, size)
            return tab[: max_power + 1, :count]

    def _build(self, powers: int, count: int) -> np.ndarray:
        out = np.zeros((powers, count), dtype=complex)
        for term in self.f.rational_part:
            out += self._pole_rows(term, powers, count)
        tail = self.f.tail
        if isinstance(tail, PolynomialTail):
            for p in range(powers):
                poly = ComplexPoly(np.concatenate([np.zeros(p), tail.coeffs]))
                fc = poly_to_faber(self.domain, poly)[:count]
                out[p, : len(fc)] += fc
        elif tail is not None:
            out += _tail_rows(self.domain, tail, powers, count, self.quad)
        return out

    def _pole_rows(self, term, powers, count):
        a = term.location
        pole = [pole_faber_coefficients(self.domain, a, o, count) for o in range(1, term.order + 1)]
        rows = np.zeros((powers, count), dtype=complex)
        for p in range(powers):
            for o in range(1, term.order + 1):
                rows[p] += laurent_matrix_entry(term, p, o) * pole[o - 1]
            # polynomial part of z^p * term, in powers of (z - a)
            shifted = np.zeros(max(p, 1), dtype=complex)
            for o, L in enumerate(term.laurent, start=1):
                for l in range(o, p + 1):
                    shifted[l - o] += L * math.comb(p, l) * a ** (p - l)
            if np.any(shifted):
                fc = poly_to_faber(self.domain, ComplexPoly(_shifted_to_monomial(shifted, a)))[:count]
                rows[p, : len(fc)] += fc
        return rows


def _tail_radii(domain, tail, count, nodes, quad):
    if quad.rho is not None:
        rs = singular_level(domain, tail.singularities())
        if quad.rho >= rs:
            raise QuadratureDivergence(f"rho={quad.rho} reaches the tail singularity at level {rs:.6g}")
        return [float(quad.rho)]
    if isinstance(tail, ExpTail):
        cap, c0, ctail = domain.laurent()
        kappa = abs(tail.scale) * cap
        if kappa == 0:
            return [2.0]
        # M(rho) ~ exp(kappa*rho): stay clear of overflow and of aliasing at N/2
        rmax = max(1.1, min(600.0, nodes / 8.0, count + 10.0) / kappa)
        radii = [1.1]
        while radii[-1] * LADDER_RATIO < rmax:
            radii.append(radii[-1] * LADDER_RATIO)
        return radii
    return [default_rho(domain, tail.singularities(), count, nodes)]


def _tail_rows(domain, tail, powers, count, quad):
    nodes = quad.nodes or default_node_count(count)
    if count >= nodes // 2:
        raise ValueError("node count too small for the requested coefficient count")
    best = np.full((powers, count), np.inf)
    rows = np.zeros((powers, count), dtype=complex)
    n = np.arange(count)
    for rho in _tail_radii(domain, tail, count, nodes, quad):
        sample = sample_level_curve(domain, rho, nodes)
        g = tail(sample.t)
        if not np.all(np.isfinite(g)):
            continue
        tp = np.ones_like(sample.t)
        for p in range(powers):
            vals = g * tp
            c = np.fft.fft(vals) / nodes
            log_noise = math.log(EPS * max(np.max(np.abs(vals)), 1e-300)) - n * math.log(rho)
            coef = c[:count] * np.exp(-n * math.log(rho))
            better = log_noise < best[p]
            rows[p, better] = coef[better]
            best[p, better] = log_noise[better]
            tp = tp * sample.t
    if np.isinf(best).any():
        raise QuadratureDivergence("tail could not be sampled on any level curve")
    return rows


@lru_cache(maxsize=256)
def function_expansion(domain: Domain, f: MeromorphicFunction, quad: QuadratureSettings = DEFAULT_QUAD):
    return FunctionExpansion(domain, f, quad)


def _tables(domain, system, quad, max_power, count):
    return [function_expansion(domain, f, quad).table(max_power, count) for f in system]


# ------------------------------------------------------------ solves


@dataclass(frozen=True, eq=False)
class DenominatorMatrix:
    """Row (alpha, k), column j holds [z^{j+k} F_alpha]_n."""

    entries: np.ndarray
    row_labels: list
    n: int


@dataclass(frozen=True, eq=False)
class DenominatorSolve:
    denominator: ComplexPoly
    unique: bool
    singular_values: np.ndarray
    normalization: Normalization
    nullity: int
    residual: float


@dataclass(frozen=True, eq=False)
class PadeFaberResult:
    n: int
    m: MultiIndex
    denominator: ComplexPoly
    normalization: Normalization
    numerators: dict
    unique: bool
    singular_values: np.ndarray
    nullity: int = 1
    residual: float = 0.0
    domain: Domain | None = None
    numerator_faber: dict = field(default_factory=dict)
    m_star: int | None = None

    @property
    def degree_bound(self) -> int:
        return self.m.total


def _as_multi(m) -> MultiIndex:
    return m if isinstance(m, MultiIndex) else MultiIndex(m)


def denominator_matrix(domain: Domain, system: FunctionSystem, m, n: int, quad: QuadratureSettings = DEFAULT_QUAD):
    m = _as_multi(m)
    if n < 1:
        raise ValueError("n must be >= 1")
    if m.d != system.d:
        raise ValueError("multi-index length differs from the number of functions")
    tables = _tables(domain, system, quad, m.total + max(m.m) - 1, n + 1)
    labels = m.row_labels()
    A = np.array([[tables[a][j + k, n] for j in range(m.total + 1)] for a, k in labels], dtype=complex)
    return DenominatorMatrix(A, labels, n)


def _nullspace_solve(A: np.ndarray, cols: int, tol_rank=TOL_RANK, monic_tol=MONIC_TOL) -> DenominatorSolve:
    norms = np.linalg.norm(A, axis=1) if A.size else np.zeros(0)
    An = A[norms > 0] / norms[norms > 0, None] if A.size else np.zeros((0, cols), dtype=complex)
    if An.shape[0] == 0:
        sigma = np.zeros(cols)
        basis = np.eye(cols, dtype=complex)
        rank = 0
    else:
        _, s, vh = np.linalg.svd(An, full_matrices=True)
        sigma = np.zeros(cols)
        sigma[: len(s)] = s
        rank = int(np.sum(s > tol_rank * s[0]))
        basis = vh[rank:].conj().T
    nullity = cols - rank
    unique = nullity == 1
    top = basis[-1, :]
    lam = None
    normalization = Normalization.UNIT_SUM
    if np.linalg.norm(top) > 0:
        lam = basis @ (top.conj() / np.vdot(top, top).real)
        if 1.0 > monic_tol * np.max(np.abs(lam)):
            lam[-1] = 1.0
            normalization = Normalization.MONIC
    if normalization is Normalization.UNIT_SUM:
        v = basis[:, 0] if lam is None else lam
        v = v / np.sum(np.abs(v))
        big = np.argmax(np.abs(v))
        lam = v * (abs(v[big]) / v[big])
    residual = float(np.max(np.abs(An @ lam)) / np.linalg.norm(lam)) if An.shape[0] else 0.0
    return DenominatorSolve(ComplexPoly(lam), unique, sigma, normalization, nullity, residual)


def solve_denominator(matrix: DenominatorMatrix, tol_rank: float = TOL_RANK) -> DenominatorSolve:
    """Nullspace vector of the (row-equilibrated) denominator system.

    ``unique`` means a one-dimensional nullspace.  With a larger nullspace the
    monic representative of least coefficient norm is returned; when no
    trustworthy monic normalization exists the vector is scaled to unit
    coefficient sum instead.
    """
    return _nullspace_solve(matrix.entries, matrix.entries.shape[1], tol_rank)


def _numerator_faber(table: np.ndarray, Q: ComplexPoly, n: int, k: int) -> np.ndarray:
    q = Q.coeffs
    return sum(q[j] * table[j + k, :n] for j in range(len(q)))


def _faber_to_monomial(domain: Domain, a: np.ndarray) -> ComplexPoly:
    if len(a) == 0:
        return ComplexPoly([0.0])
    basis = faber_polynomials(domain, len(a) - 1)
    out = np.zeros(len(a), dtype=complex)
    for l, al in enumerate(a):
        out[: l + 1] += al * basis.polys[l].coeffs
    return ComplexPoly(out)


def numerator(domain: Domain, system: FunctionSystem, Q: ComplexPoly, n: int, alpha: int, k: int,
              quad: QuadratureSettings = DEFAULT_QUAD) -> ComplexPoly:
    """P = sum_{l<n} [z^k Q F_alpha]_l Phi_l (alpha is 0-based)."""
    if Q.is_zero():
        return ComplexPoly([0.0])
    table = function_expansion(domain, system[alpha], quad).table(Q.degree + k, n)
    return _faber_to_monomial(domain, _numerator_faber(table, Q, n, k))


def simultaneous_pade_faber(domain: Domain, system: FunctionSystem, m, n: int,
                            quad: QuadratureSettings = DEFAULT_QUAD) -> PadeFaberResult:
    m = _as_multi(m)
    sol = solve_denominator(denominator_matrix(domain, system, m, n, quad))
    numerators, faber_form = {}, {}
    Q = sol.denominator
    for alpha, ma in enumerate(m):
        table = function_expansion(domain, system[alpha], quad).table(m.total + ma - 1, n + 1)
        for k in range(ma):
            a = _numerator_faber(table, Q, n, k)
            faber_form[(alpha, k)] = a
            numerators[(alpha, k)] = _faber_to_monomial(domain, a)
    return PadeFaberResult(
        n=n, m=m, denominator=Q, normalization=sol.normalization, numerators=numerators,
        unique=sol.unique, singular_values=sol.singular_values, nullity=sol.nullity,
        residual=sol.residual, domain=domain, numerator_faber=faber_form,
    )


def incomplete_pade_faber(domain: Domain, f: MeromorphicFunction, m: int, m_star: int, n: int,
                          quad: QuadratureSettings = DEFAULT_QUAD) -> PadeFaberResult:
    """Denominator of degree <= m with only m_star conditions [z^k Q F]_n = 0."""
    if not (m >= m_star >= 1):
        raise ValueError(f"need m >= m_star >= 1, got m={m}, m_star={m_star}")
    if n < 1:
        raise ValueError("n must be >= 1")
    table = function_expansion(domain, f, quad).table(m + m_star - 1, n + 1)
    A = np.array([[table[j + k, n] for j in range(m + 1)] for k in range(m_star)], dtype=complex)
    sol = _nullspace_solve(A, m + 1)
    numerators, faber_form = {}, {}
    for k in range(m_star):
        a = _numerator_faber(table, sol.denominator, n, k)
        faber_form[(0, k)] = a
        numerators[(0, k)] = _faber_to_monomial(domain, a)
    return PadeFaberResult(
        n=n, m=MultiIndex((m,)), denominator=sol.denominator, normalization=sol.normalization,
        numerators=numerators, unique=sol.unique, singular_values=sol.singular_values,
        nullity=sol.nullity, residual=sol.residual, domain=domain, numerator_faber=faber_form,
        m_star=m_star,
    )


def solve_range(domain, system, m, n_values, quad=DEFAULT_QUAD, workers: int = 1):
    """simultaneous_pade_faber for each n; results in the order of n_values."""
    m = _as_multi(m)
    n_values = list(n_values)
    if n_values:
        # build every table once before fanning out
        _tables(domain, system, quad, m.total + max(m.m) - 1, max(n_values) + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda n: simultaneous_pade_faber(domain, system, m, n, quad), n_values))
    return [simultaneous_pade_faber(domain, system, m, n, quad) for n in n_values]


def _numerator_values(result: PadeFaberResult, alpha: int, k: int, z) -> np.ndarray:
    a = result.numerator_faber.get((alpha, k))
    if a is None:
        return result.numerators[(alpha, k)](z)
    if len(a) == 0:
        return np.zeros_like(np.asarray(z, dtype=complex))
    phis = faber_values(result.domain, z, len(a) - 1)
    return np.tensordot(a, phis, axes=(0, 0))


def evaluate_approximant(result: PadeFaberResult, alpha: int, z, k: int = 0):
    """P_{k,alpha}(z) / Q(z); numerators are summed in the Faber basis."""
    z_arr = np.asarray(z, dtype=complex)
    q = result.denominator(z_arr)
    scale = np.sum(np.abs(result.denominator.coeffs) * np.maximum(1.0, np.abs(z_arr[..., None])) ** np.arange(
        len(result.denominator.coeffs)), axis=-1)
    if np.any(np.abs(q) <= 1e-14 * scale):
        raise DenominatorZero("the denominator vanishes at an evaluation point")
    out = _numerator_values(result, alpha, k, z_arr) / q
    return complex(out) if np.ndim(out) == 0 else out
