"""Roots, system poles and the experiment harnesses built on the solves.

A *polynomial combination* of a system is G = sum_alpha v_alpha F_alpha with
deg v_alpha < m_alpha; it is parametrised by the coefficient vector
c = (c_{alpha,j}) so that G = sum c_{alpha,j} z^j F_alpha.  For a rational
system the principal part of G at every pole is a linear function of c, which
turns questions about system poles into rank questions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .approximant import (
    DEFAULT_QUAD,
    PadeFaberResult,
    QuadratureSettings,
    evaluate_approximant,
    incomplete_pade_faber,
    solve_range,
)
from .conformal import Domain, level
from .errors import (
    HypothesisViolation,
    InconsistentDeclaration,
    NonRationalSystem,
    TooFewSamples,
    ZeroPolynomial,
)
from .funcsys import (
    FunctionSystem,
    MeromorphicFunction,
    MultiIndex,
    PolynomialTail,
    evaluate,
    laurent_matrix_entry,
)
from .poly import ComplexPoly
from .rates import FitDiagnostics, fit_geometric_rate

__all__ = [
    "Declaration",
    "InverseVerdict",
    "Provenance",
    "RateReport",
    "SystemMetadata",
    "SystemPole",
    "declared_metadata",
    "fit_geometric_rate",
    "poly_roots",
    "polynomial_independence",
    "run_direct_experiment",
    "run_incomplete_experiment",
    "run_inverse_experiment",
    "sup_error_on_compact",
    "system_poles_rational",
    "track_roots",
]

RANK_TOL = 1e-9
EXACT_ORDER_TOL = 1e-12
LEVEL_RTOL = 1e-12
STABLE_WINDOW = 5
ERROR_FLOOR = 1e-12


# ---------------------------------------------------------------- roots


def poly_roots(p: ComplexPoly) -> list:
    """Roots with multiplicity: companion eigenvalues plus one Newton step."""
    if p.is_zero():
        raise ZeroPolynomial("the zero polynomial has no well-defined roots")
    if p.degree == 0:
        return []
    roots = np.roots(p.coeffs[::-1])
    dp = p.derivative()
    out = []
    for r in roots:
        val, der = p(r), dp(r)
        if der != 0:
            cand = r - val / der
            if abs(p(cand)) < abs(val):
                r = cand
        out.append(complex(r))
    return out


def sorted_roots(p: ComplexPoly) -> list:
    return sorted(poly_roots(p), key=lambda r: (round(r.real, 12), round(r.imag, 12)))


# ---------------------------------------------------------- system poles


class Provenance(enum.Enum):
    COMPUTED_RATIONAL = "ComputedRational"
    DECLARED_CATALOG = "DeclaredCatalog"


@dataclass(frozen=True)
class SystemPole:
    xi: complex
    tau: int


@dataclass(frozen=True)
class Declaration:
    """Hand-derived data for one system pole: rho[t-1] = rho_{xi,t}."""

    xi: complex
    tau: int
    rho: tuple


@dataclass(frozen=True, eq=False)
class SystemMetadata:
    system_poles: list
    rho_table: dict
    bold_rho: dict
    rho_star: dict
    predicted_Q: ComplexPoly
    predicted_rate: float
    provenance: Provenance
    rho_alpha: dict = field(default_factory=dict)

    @property
    def pole_count(self) -> int:
        return sum(p.tau for p in self.system_poles)


def _require_rational(system: FunctionSystem):
    for alpha, f in enumerate(system):
        if f.tail is not None and not isinstance(f.tail, PolynomialTail):
            raise NonRationalSystem(f"function {alpha + 1} has a non-polynomial tail; declare its metadata instead")


def _pole_catalog(system: FunctionSystem) -> list:
    """Distinct pole locations of the system with the largest order seen."""
    orders: dict = {}
    for f in system:
        for term in f.rational_part:
            orders[term.location] = max(orders.get(term.location, 0), term.order)
    return sorted(orders.items(), key=lambda kv: (abs(kv[0]), kv[0].real, kv[0].imag))


def _combination_columns(m: MultiIndex) -> list:
    return [(a, j) for a, ma in enumerate(m) for j in range(ma)]


def _laurent_block(system: FunctionSystem, m: MultiIndex, zeta: complex, max_order: int) -> np.ndarray:
    """Row o-1 maps c to the coefficient of (z - zeta)^{-o} in the combination."""
    cols = _combination_columns(m)
    block = np.zeros((max_order, len(cols)), dtype=complex)
    for col, (a, j) in enumerate(cols):
        for term in system[a].rational_part:
            if term.location == zeta:
                for o in range(1, max_order + 1):
                    block[o - 1, col] = laurent_matrix_entry(term, j, o)
    return block


def _nullspace(rows: np.ndarray, dim: int) -> np.ndarray:
    if rows.shape[0] == 0:
        return np.eye(dim, dtype=complex)
    norms = np.linalg.norm(rows, axis=1)
    rows = rows[norms > 0] / norms[norms > 0, None]
    if rows.shape[0] == 0:
        return np.eye(dim, dtype=complex)
    _, s, vh = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * s[0]))
    return vh[rank:].conj().T


def _reachable(constraints: np.ndarray, target: np.ndarray, dim: int) -> bool:
    """Is there c with constraints @ c = 0 and target @ c != 0?"""
    tn = np.linalg.norm(target)
    if tn == 0:
        return False
    basis = _nullspace(constraints, dim)
    if basis.shape[1] == 0:
        return False
    return np.linalg.norm((target / tn) @ basis) > EXACT_ORDER_TOL


class _LaurentData:
    def __init__(self, domain: Domain, system: FunctionSystem, m: MultiIndex):
        self.dim = m.total
        self.catalog = _pole_catalog(system)
        self.levels = {z: level(domain, z) for z, _ in self.catalog}
        self.blocks = {z: _laurent_block(system, m, z, k) for z, k in self.catalog}

    def rows_up_to(self, lev: float, exclude) -> list:
        return [self.blocks[z] for z, _ in self.catalog if z != exclude and self.levels[z] <= lev * (1 + LEVEL_RTOL)]

    def exact_order_possible(self, xi, t, extra_level=None) -> bool:
        lev = self.levels[xi] if extra_level is None else extra_level
        block = self.blocks[xi]
        rows = self.rows_up_to(lev, xi) + [block[t:]]
        C = np.vstack(rows) if rows else np.zeros((0, self.dim), dtype=complex)
        return _reachable(C, block[t - 1], self.dim)


def _order(data: _LaurentData, xi) -> int:
    tau = 0
    for t in range(1, data.blocks[xi].shape[0] + 1):
        if not data.exact_order_possible(xi, t):
            break
        tau = t
    return tau


def _rho_exact(data: _LaurentData, xi, t) -> float:
    """Largest index of a canonical domain in which some admissible
    combination has xi as its only pole (of order t)."""
    base = data.levels[xi] * (1 + LEVEL_RTOL)
    outer = sorted({data.levels[z] for z, _ in data.catalog if data.levels[z] > base})
    for lev in outer:
        if not data.exact_order_possible(xi, t, extra_level=lev):
            return lev
    return math.inf


def system_poles_rational(domain: Domain, system: FunctionSystem, m) -> SystemMetadata:
    """System poles, their orders and characteristic radii of a rational system.

    A pole xi has order tau if for every t <= tau some combination has a pole
    of exact order t at xi and no other pole in the closed canonical domain
    through xi.  The radii rho_{xi,t} are computed exactly: the level of the
    first pole that no such combination can remove, or +inf.
    """
    m = m if isinstance(m, MultiIndex) else MultiIndex(m)
    _require_rational(system)
    data = _LaurentData(domain, system, m)
    poles, rho_table = [], {}
    for xi, _ in data.catalog:
        tau = _order(data, xi)
        if tau == 0:
            continue
        poles.append(SystemPole(xi, tau))
        for t in range(1, tau + 1):
            rho_table[(xi, t)] = _rho_exact(data, xi, t)
    return _finish(domain, system, m, poles, rho_table, Provenance.COMPUTED_RATIONAL)


def _validate_declaration(domain, d: Declaration) -> Declaration:
    xi = complex(d.xi)
    tau = int(d.tau)
    rho = tuple(float(r) for r in d.rho)
    if tau < 1:
        raise InconsistentDeclaration(f"system pole {xi}: order must be >= 1")
    if len(rho) != tau:
        raise InconsistentDeclaration(f"system pole {xi}: need {tau} radii rho_(xi,1..tau), got {len(rho)}")
    lev = level(domain, xi)
    if lev <= 1.0:
        raise InconsistentDeclaration(f"system pole {xi} lies in E")
    for t, r in enumerate(rho, start=1):
        if not r > lev:
            raise InconsistentDeclaration(
                f"rho_({xi},{t}) = {r} does not exceed |Phi(xi)| = {lev}; the pole must lie inside its own domain"
            )
    return Declaration(xi, tau, rho)


def declared_metadata(domain: Domain, system: FunctionSystem, m, declarations) -> SystemMetadata:
    """Metadata from hand-derived (xi, tau, rho_{xi,t}) entries."""
    m = m if isinstance(m, MultiIndex) else MultiIndex(m)
    decls = [_validate_declaration(domain, d) for d in declarations]
    locs = [d.xi for d in decls]
    if len(set(locs)) != len(locs):
        raise InconsistentDeclaration("a system pole is declared twice")
    if sum(d.tau for d in decls) > m.total:
        raise InconsistentDeclaration(f"declared orders sum to more than |m| = {m.total}")
    poles = [SystemPole(d.xi, d.tau) for d in decls]
    rho_table = {(d.xi, t): r for d in decls for t, r in enumerate(d.rho, start=1)}
    return _finish(domain, system, m, poles, rho_table, Provenance.DECLARED_CATALOG)


def _bold(rho_table, xi, t) -> float:
    return min(rho_table[(xi, k)] for k in range(1, t + 1))


def _match_pole(poles, z):
    for p in poles:
        if abs(p.xi - z) <= 1e-12 * max(1.0, abs(z)):
            return p
    return None


def _rho_alpha(domain, f: MeromorphicFunction, poles, rho_table):
    """(rho_alpha, rho*_alpha) of one function of the system."""
    events = [(level(domain, t.location), t) for t in f.rational_part]
    if f.tail is not None:
        events += [(level(domain, s), None) for s in f.tail.singularities()]
    events.sort(key=lambda e: e[0])
    rho_a = math.inf
    for lev, term in events:
        sp = None if term is None else _match_pole(poles, term.location)
        if sp is None or term.order > sp.tau:
            rho_a = lev
            break
    star = rho_a
    for lev, term in events:
        if term is not None and lev < rho_a:
            sp = _match_pole(poles, term.location)
            star = min(star, _bold(rho_table, sp.xi, term.order))
    return rho_a, star


def _finish(domain, system, m, poles, rho_table, provenance) -> SystemMetadata:
    total = sum(p.tau for p in poles)
    if total > m.total:
        raise InconsistentDeclaration(f"system poles count {total} > |m| = {m.total}")
    bold = {p.xi: _bold(rho_table, p.xi, p.tau) for p in poles}
    rate = 0.0
    for p in poles:
        if math.isfinite(bold[p.xi]):
            rate = max(rate, level(domain, p.xi) / bold[p.xi])
    if not 0.0 <= rate < 1.0:
        raise InconsistentDeclaration(f"predicted rate {rate} outside [0, 1)")
    rho_alpha, rho_star = {}, {}
    for alpha, f in enumerate(system):
        rho_alpha[alpha], rho_star[alpha] = _rho_alpha(domain, f, poles, rho_table)
    roots = [p.xi for p in poles for _ in range(p.tau)]
    return SystemMetadata(
        system_poles=poles, rho_table=rho_table, bold_rho=bold, rho_star=rho_star,
        predicted_Q=ComplexPoly.from_roots(roots), predicted_rate=rate,
        provenance=provenance, rho_alpha=rho_alpha,
    )


def polynomial_independence(system: FunctionSystem, m):
    """(independent, witness).  The witness is a tuple of polynomials v_alpha
    with sum v_alpha F_alpha a polynomial, scaled so its first nonzero
    coefficient is 1; None when the system is independent."""
    m = m if isinstance(m, MultiIndex) else MultiIndex(m)
    _require_rational(system)
    blocks = [_laurent_block(system, m, z, k) for z, k in _pole_catalog(system)]
    L = np.vstack(blocks) if blocks else np.zeros((0, m.total), dtype=complex)
    basis = _nullspace(L, m.total)
    if basis.shape[1] == 0:
        return True, None
    v = basis[:, 0]
    first = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))[0]
    v = v / v[first]
    v[np.abs(v) < 1e-13] = 0
    witness, pos = [], 0
    for ma in m:
        witness.append(ComplexPoly(v[pos : pos + ma]))
        pos += ma
    return False, tuple(witness)


# -------------------------------------------------------- root tracking


def pole_labels(poles) -> list:
    """One label per root of the predicted denominator."""
    out = []
    for p in poles:
        base = format_complex(p.xi)
        out += [base] if p.tau == 1 else [f"{base}#{j}" for j in range(p.tau)]
    return out


def format_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:g}"
    return f"{z.real:g}{z.imag:+g}i"


def _assign(prev: np.ndarray, roots: np.ndarray) -> list:
    """Index into ``roots`` for each entry of ``prev`` (-1 if unmatched)."""
    cost = np.abs(prev[:, None] - roots[None, :])
    if len(prev) == len(roots):
        rows, cols = linear_sum_assignment(cost)
        out = [-1] * len(prev)
        for r, c in zip(rows, cols):
            out[r] = int(c)
        return out
    out = [-1] * len(prev)
    used = set()
    for flat in np.argsort(cost, axis=None, kind="stable"):
        i, j = divmod(int(flat), len(roots))
        if out[i] < 0 and j not in used:
            out[i] = j
            used.add(j)
    return out


def track_roots(n_values, root_lists, start, labels=None) -> dict:
    """Follow each starting point through the root sets, one assignment per n."""
    labels = labels if labels is not None else [format_complex(s) for s in start]
    prev = np.array(start, dtype=complex)
    paths = {lab: [] for lab in labels}
    for n, roots in zip(n_values, root_lists):
        roots = np.asarray(roots, dtype=complex)
        if len(roots) == 0 or len(prev) == 0:
            continue
        idx = _assign(prev, roots)
        for i, lab in enumerate(labels):
            if idx[i] >= 0:
                prev[i] = roots[idx[i]]
                paths[lab].append((int(n), complex(roots[idx[i]])))
    return paths


# ----------------------------------------------------------- experiments


def _safe_roots(p: ComplexPoly) -> list:
    try:
        return sorted_roots(p)
    except ZeroPolynomial:
        return []


def _fit_or_zero(n_values, errors, floor):
    """Fitted rate, or 0 when the sequence has already dropped below the floor."""
    try:
        return fit_geometric_rate(n_values, errors, floor=floor)
    except TooFewSamples:
        if len(errors) and errors[-1] <= floor:
            diag = FitDiagnostics(used_n=[], dropped_n=list(n_values), all_zero=True)
            return 0.0, diag
        raise


def _coeff_distance(p: ComplexPoly, q: ComplexPoly) -> float:
    return p.distance(q)


@dataclass(eq=False)
class RateReport:
    n_values: list
    errors: list
    fitted_rate: float
    theta_estimate: float
    predicted_rate: float
    root_paths: dict
    converged: bool
    denominators: list = field(default_factory=list)
    unique: list = field(default_factory=list)
    diagnostics: FitDiagnostics | None = None


def run_direct_experiment(domain: Domain, system: FunctionSystem, m, metadata: SystemMetadata, n_values,
                          quad: QuadratureSettings = DEFAULT_QUAD, workers: int = 1, tol: float = 0.05,
                          results=None) -> RateReport:
    """Distance of Q_n to the predicted denominator, its fitted rate, and the
    paths of the roots of Q_n that start at the predicted poles."""
    m = m if isinstance(m, MultiIndex) else MultiIndex(m)
    if metadata.pole_count != m.total:
        raise HypothesisViolation(
            f"the system has {metadata.pole_count} system poles counted with order, |m| = {m.total}; "
            "the direct rate statement does not apply"
        )
    n_values = list(n_values)
    if results is None:
        results = solve_range(domain, system, m, n_values, quad, workers)
    target = metadata.predicted_Q
    Qs = [r.denominator for r in results]
    errors = [_coeff_distance(Q, target) for Q in Qs]
    floor = ERROR_FLOOR * max(1.0, target.norm())
    rate, diag = _fit_or_zero(n_values, errors, floor)
    start = [p.xi for p in metadata.system_poles for _ in range(p.tau)]
    paths = track_roots(n_values, [_safe_roots(Q) for Q in Qs], start, pole_labels(metadata.system_poles))
    return RateReport(
        n_values=n_values, errors=errors, fitted_rate=rate, theta_estimate=rate,
        predicted_rate=metadata.predicted_rate, root_paths=paths, converged=rate < 1.0 - tol,
        denominators=Qs, unique=[r.unique for r in results], diagnostics=diag,
    )


@dataclass(eq=False)
class InverseVerdict:
    pole_count: int
    limit_Q: ComplexPoly | None
    theta: float
    converged: bool
    n0: int | None = None
    step_rate: float = math.nan
    reason: str = ""
    denominators: list = field(default_factory=list)
    unique: list = field(default_factory=list)
    root_paths: dict = field(default_factory=dict)

    @property
    def limit_roots(self) -> list:
        return [] if self.limit_Q is None else _safe_roots(self.limit_Q)


def _stable_start(flags) -> int | None:
    """Index where the final run of True flags begins, if it is long enough."""
    i = len(flags)
    while i > 0 and flags[i - 1]:
        i -= 1
    return i if len(flags) - i >= STABLE_WINDOW else None


def _limit_analysis(n_values, Qs, degree: int, tol: float):
    """Limit (mean of the last quartile), theta and the step rate."""
    size = degree + 1
    vecs = np.array([Q.monic().padded(size) if Q.degree == degree else Q.padded(size) for Q in Qs])
    q = max(1, len(vecs) // 4)
    limit = ComplexPoly(vecs[-q:].mean(axis=0))
    floor = ERROR_FLOOR * max(1.0, limit.norm())
    # samples inside the averaging window are biased towards the mean
    head = slice(0, len(vecs) - q)
    dist = np.linalg.norm(vecs - limit.padded(size), axis=1)
    theta, _ = _fit_or_zero(np.asarray(n_values)[head], dist[head], floor)
    steps = np.linalg.norm(np.diff(vecs, axis=0), axis=1)
    step_rate, _ = _fit_or_zero(np.asarray(n_values)[1:], steps, floor)
    converged = theta < 1.0 - tol and step_rate < 1.0 - tol and limit.degree == degree
    return limit, float(theta), float(step_rate), converged


def run_inverse_experiment(domain: Domain, system: FunctionSystem, m, n_values,
                           quad: QuadratureSettings = DEFAULT_QUAD, tol: float = 0.05,
                           workers: int = 1, results=None) -> InverseVerdict:
    """Decide convergence of Q_n from the computed sequence alone.

    Requires unique solves over a final window of at least five consecutive n.
    The limit is the mean of the last quartile; theta is the fitted rate of
    the distance to it, and the fitted rate of ||Q_{n+1} - Q_n|| must also be
    below 1 - tol (a wandering sequence has steps that do not shrink).
    """
    m = m if isinstance(m, MultiIndex) else MultiIndex(m)
    n_values = list(n_values)
    if results is None:
        results = solve_range(domain, system, m, n_values, quad, workers)
    flags = [r.unique for r in results]
    Qs = [r.denominator for r in results]
    start = _stable_start(flags)
    if start is None:
        return InverseVerdict(0, None, math.nan, False, None, reason="denominators are not unique for large n",
                              denominators=Qs, unique=flags)
    tail_n, tail_Q = n_values[start:], Qs[start:]
    if len(tail_n) < 8 + max(1, len(tail_n) // 4):
        return InverseVerdict(0, None, math.nan, False, n_values[start], reason="too few solves after n0",
                              denominators=Qs, unique=flags)
    limit, theta, step_rate, converged = _limit_analysis(tail_n, tail_Q, m.total, tol)
    paths = track_roots(tail_n, [_safe_roots(Q) for Q in tail_Q], _safe_roots(limit))
    reason = "converged" if converged else "the denominators do not settle geometrically"
    return InverseVerdict(
        pole_count=m.total if converged else 0, limit_Q=limit, theta=theta, converged=converged,
        n0=n_values[start], step_rate=step_rate, reason=reason, denominators=Qs, unique=flags,
        root_paths=paths,
    )


def inverse_matches_direct(verdict: InverseVerdict, metadata: SystemMetadata, tol: float = 1e-6) -> bool:
    """Cross-experiment check: the detected limit is the predicted denominator."""
    if not verdict.converged or verdict.limit_Q is None:
        return False
    return verdict.pole_count == metadata.pole_count and verdict.limit_Q.distance(metadata.predicted_Q) <= tol


def run_incomplete_experiment(domain: Domain, f: MeromorphicFunction, m: int, m_star: int, n_values,
                              quad: QuadratureSettings = DEFAULT_QUAD, tol: float = 0.05) -> InverseVerdict:
    """Limit of the incomplete denominators.  Their solution set has dimension
    m - m_star + 1 by construction, so uniqueness is not required."""
    n_values = list(n_values)
    results = [incomplete_pade_faber(domain, f, m, m_star, n, quad) for n in n_values]
    Qs = [r.denominator for r in results]
    limit, theta, step_rate, converged = _limit_analysis(n_values, Qs, m, tol)
    paths = track_roots(n_values, [_safe_roots(Q) for Q in Qs], _safe_roots(limit))
    return InverseVerdict(
        pole_count=limit.degree if converged else 0, limit_Q=limit, theta=theta, converged=converged,
        n0=n_values[0], step_rate=step_rate, reason="converged" if converged else "no geometric limit",
        denominators=Qs, unique=[r.unique for r in results], root_paths=paths,
    )


def sup_error_on_compact(result: PadeFaberResult, alpha: int, k: int, sample_points, f: MeromorphicFunction) -> float:
    """max over the samples of |P_{k,alpha}/Q - z^k f|."""
    z = np.asarray(sample_points, dtype=complex)
    approx = evaluate_approximant(result, alpha, z, k)
    exact = z**k * evaluate(f, z)
    return float(np.max(np.abs(approx - exact)))
