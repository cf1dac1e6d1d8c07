"""Systems of meromorphic functions: rational part plus one catalog tail.

A function is ``sum_j sum_o L_{j,o} / (z - a_j)^o + tail(z)`` where the tail
is one of

* ``PolynomialTail(coeffs)``            sum c_k z^k
* ``ExpTail(scale)``                    exp(scale * z)
* ``LogBranch(branch_point, coef)``     coef * log(z - b)
* ``PowBranch(branch_point, p, coef)``  coef * (z - b)^p, p not an integer

Branch cuts are the rays ``{b + s*b/|b| : s >= 0}`` pointing away from the
origin; on ``z - b`` the argument is taken in ``[arg b, arg b + 2*pi)``, so
``log(z - 4)`` at ``z = 0`` is ``log 4 + i*pi``.

Expression grammar (whitespace insignificant)::

    expr     := term (('+' | '-') term)*          leading sign allowed
    term     := coef '/' '(' 'z' signed ')' ['^' int]
              | [coef '*'] factor
              | coef
    factor   := 'poly' '(' complex (',' complex)* ')'
              | 'exp' '(' [coef '*'] 'z' ')'
              | 'log' '(' 'z' signed ')'
              | '(' 'z' signed ')' '^' real
    coef     := number | '(' complex ')'
    complex  := [sign] number [sign number]       e.g. 2, -1.5, 2+1i, i
    signed   := sign number [sign number]         e.g. -2, +1-0.5i
    number   := digits with optional fraction/exponent, optionally
                suffixed by 'i'; a bare 'i' is the imaginary unit

``(z-2-1i)`` denotes ``z - (2+1i)``.  Repeated pole locations are merged;
constants and ``poly`` terms add up into one polynomial tail.  At most one
non-polynomial tail may appear, and it cannot be combined with a polynomial.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .conformal import Domain, level
from .errors import DomainError, OnBranchCut, ParseError, PoleEvaluation

CUT_ATOL = 1e-14


# ---------------------------------------------------------------- tails


def _cut_log(u, theta):
    """log(u) with the cut along arg(u) = theta; arg in [theta, theta + 2pi)."""
    ang = np.mod(np.angle(u) - theta, 2.0 * np.pi)
    on_cut = (ang < CUT_ATOL) | (ang > 2.0 * np.pi - CUT_ATOL)
    if np.any(on_cut | (u == 0)):
        raise OnBranchCut("point lies on the declared branch cut")
    return np.log(np.abs(u)) + 1j * (theta + ang)


@dataclass(frozen=True)
class PolynomialTail:
    coeffs: tuple = (0j,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def singularities(self):
        return ()


@dataclass(frozen=True)
class ExpTail:
    scale: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scale", complex(self.scale))

    def __call__(self, z):
        return np.exp(self.scale * np.asarray(z, dtype=complex))

    def singularities(self):
        return ()


@dataclass(frozen=True)
class LogBranch:
    branch_point: complex
    coefficient: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branch_point", complex(self.branch_point))
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        if self.branch_point == 0:
            raise DomainError("branch point at the origin")

    def __call__(self, z):
        b = self.branch_point
        u = np.asarray(z, dtype=complex) - b
        return self.coefficient * _cut_log(u, np.angle(b))

    def singularities(self):
        return (self.branch_point,)


@dataclass(frozen=True)
class PowBranch:
    branch_point: complex
    exponent: float
    coefficient: complex = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branch_point", complex(self.branch_point))
        object.__setattr__(self, "exponent", float(self.exponent))
        object.__setattr__(self, "coefficient", complex(self.coefficient))
        if self.branch_point == 0:
            raise DomainError("branch point at the origin")
        if float(self.exponent).is_integer():
            raise ValueError("PowBranch exponent must not be an integer")

    def __call__(self, z):
        b = self.branch_point
        u = np.asarray(z, dtype=complex) - b
        return self.coefficient * np.exp(self.exponent * _cut_log(u, np.angle(b)))

    def singularities(self):
        return (self.branch_point,)


TAIL_TYPES = (PolynomialTail, ExpTail, LogBranch, PowBranch)


# ------------------------------------------------------------ functions


@dataclass(frozen=True)
class PoleTerm:
    """sum_{o=1}^{tau} laurent[o-1] / (z - location)^o with laurent[-1] != 0."""

    location: complex
    laurent: tuple

    def __post_init__(self):
        object.__setattr__(self, "location", complex(self.location))
        lau = tuple(complex(c) for c in self.laurent)
        if not lau or lau[-1] == 0:
            raise ValueError("top Laurent coefficient of a pole term must be nonzero")
        object.__setattr__(self, "laurent", lau)

    @property
    def order(self) -> int:
        return len(self.laurent)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if np.any(z == self.location):
            raise PoleEvaluation(f"evaluation at the pole {self.location}")
        inv = 1.0 / (z - self.location)
        acc = np.zeros_like(z)
        for c in reversed(self.laurent):
            acc = (acc + c) * inv
        return acc


@dataclass(frozen=True)
class MeromorphicFunction:
    rational_part: tuple = ()
    tail: object = None

    def __post_init__(self):
        rp = tuple(self.rational_part)
        locs = [t.location for t in rp]
        if len(set(locs)) != len(locs):
            raise ValueError("pole locations must be pairwise distinct")
        object.__setattr__(self, "rational_part", rp)
        if self.tail is not None and not isinstance(self.tail, TAIL_TYPES):
            raise TypeError(f"unsupported tail {self.tail!r}")

    def __call__(self, z):
        return evaluate(self, z)

    def is_rational(self) -> bool:
        return self.tail is None or isinstance(self.tail, PolynomialTail)

    def singularities(self) -> tuple:
        """Finite singular points: poles, then any branch point."""
        tail_s = self.tail.singularities() if self.tail is not None else ()
        return tuple(t.location for t in self.rational_part) + tuple(tail_s)

    def check_domain(self, domain: Domain):
        """Raise unless every singularity lies strictly outside E."""
        for s in self.singularities():
            if level(domain, s) <= 1.0 + 1e-12:
                raise DomainError(f"singularity {s} is not outside E")

    def scaled(self, c: complex) -> MeromorphicFunction:
        c = complex(c)
        rp = tuple(PoleTerm(t.location, [c * x for x in t.laurent]) for t in self.rational_part)
        tail = self.tail
        if isinstance(tail, PolynomialTail):
            tail = PolynomialTail([c * x for x in tail.coeffs])
        elif isinstance(tail, (LogBranch, PowBranch)):
            kw = dict(tail.__dict__)
            kw["coefficient"] = c * tail.coefficient
            tail = type(tail)(**kw)
        elif isinstance(tail, ExpTail):
            raise ValueError("scaling an exponential tail is not representable in the catalog")
        return MeromorphicFunction(rp, tail)

    def __str__(self):
        return format_function(self)


def evaluate(f: MeromorphicFunction, z):
    z_arr = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z_arr)
    for term in f.rational_part:
        acc = acc + term(z_arr)
    if f.tail is not None:
        acc = acc + f.tail(z_arr)
    return complex(acc) if acc.ndim == 0 else acc


def true_poles(f: MeromorphicFunction) -> list[tuple[complex, int]]:
    return [(t.location, t.order) for t in f.rational_part]


@dataclass(frozen=True)
class FunctionSystem:
    functions: tuple
    names: tuple = field(default=())

    def __post_init__(self):
        fs = tuple(self.functions)
        if not fs:
            raise ValueError("a function system needs at least one function")
        names = tuple(self.names) or tuple(f"f{i + 1}" for i in range(len(fs)))
        if len(names) != len(fs):
            raise ValueError("one name per function required")
        object.__setattr__(self, "functions", fs)
        object.__setattr__(self, "names", names)

    @property
    def d(self) -> int:
        return len(self.functions)

    def __getitem__(self, alpha):
        return self.functions[alpha]

    def __iter__(self):
        return iter(self.functions)

    def is_rational(self) -> bool:
        return all(f.is_rational() for f in self.functions)

    def check_domain(self, domain: Domain):
        for f in self.functions:
            f.check_domain(domain)


@dataclass(frozen=True)
class MultiIndex:
    m: tuple

    def __post_init__(self):
        m = tuple(int(x) for x in np.atleast_1d(self.m))
        if not m or any(x < 1 for x in m):
            raise ValueError(f"multi-index entries must be >= 1, got {m}")
        object.__setattr__(self, "m", m)

    @property
    def total(self) -> int:
        return sum(self.m)

    @property
    def d(self) -> int:
        return len(self.m)

    def __iter__(self):
        return iter(self.m)

    def __getitem__(self, i):
        return self.m[i]

    def row_labels(self) -> list[tuple[int, int]]:
        """(alpha, k) pairs, 0-based alpha, in row order of the defining system."""
        return [(a, k) for a, ma in enumerate(self.m) for k in range(ma)]


# --------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"""
    (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<sym>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str  # 'num', 'ident', 'sym', 'end'
    text: str
    col: int  # 1-based


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(), pos + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


def _num_value(tok: _Tok) -> complex:
    t = tok.text
    if t.endswith("i"):
        return 1j * float(t[:-1])
    return complex(float(t))


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg, expected=()):
        raise ParseError(msg, self.tok.col, expected)

    def is_sym(self, s, tok=None):
        tok = tok or self.tok
        return tok.kind == "sym" and tok.text == s

    def is_ident(self, name, tok=None):
        tok = tok or self.tok
        return tok.kind == "ident" and tok.text == name

    def expect_sym(self, s):
        if not self.is_sym(s):
            self.fail(f"expected {s!r}", {s})
        self.i += 1

    def expect_ident(self, name):
        if not self.is_ident(name):
            self.fail(f"expected {name!r}", {name})
        self.i += 1

    def is_number_start(self, tok=None):
        tok = tok or self.tok
        return tok.kind == "num" or self.is_ident("i", tok)

    def number(self) -> complex:
        if self.tok.kind == "num":
            v = _num_value(self.tok)
        elif self.is_ident("i"):
            v = 1j
        else:
            self.fail("expected a number", {"number"})
        self.i += 1
        return v

    def sign(self) -> float:
        if self.is_sym("+"):
            self.i += 1
            return 1.0
        if self.is_sym("-"):
            self.i += 1
            return -1.0
        self.fail("expected a sign", {"+", "-"})

    def complex_literal(self, signed=False) -> complex:
        if signed or self.is_sym("+") or self.is_sym("-"):
            s = self.sign()
        else:
            s = 1.0
        v = s * self.number()
        nxt = self.peek()
        if (self.is_sym("+") or self.is_sym("-")) and self.is_number_start(nxt):
            s2 = self.sign()
            v += s2 * self.number()
        return v

    def coef(self) -> complex:
        if self.is_sym("("):
            self.i += 1
            v = self.complex_literal()
            self.expect_sym(")")
            return v
        return self.number()

    def shifted_z(self) -> complex:
        """Parse ``z <signed>`` inside parentheses and return the shift a."""
        self.expect_ident("z")
        if not (self.is_sym("+") or self.is_sym("-")):
            self.fail("expected a shift after 'z'", {"+", "-"})
        return -self.complex_literal(signed=True)

    def integer(self) -> int:
        if self.tok.kind != "num" or not re.fullmatch(r"\d+", self.tok.text):
            self.fail("expected a positive integer", {"integer"})
        v = int(self.tok.text)
        self.i += 1
        if v < 1:
            self.fail("pole order must be >= 1", {"integer"})
        return v

    def real(self) -> float:
        s = 1.0
        if self.is_sym("-") or self.is_sym("+"):
            s = self.sign()
        if self.tok.kind != "num" or self.tok.text.endswith("i"):
            self.fail("expected a real number", {"number"})
        v = float(self.tok.text)
        self.i += 1
        return s * v

    # a term returns ('pole', a, order, c) | ('poly', coeffs) | ('tail', obj)
    def term(self, sign):
        starts_factor = (
            self.is_ident("poly")
            or self.is_ident("exp")
            or self.is_ident("log")
            or (self.is_sym("(") and self.is_ident("z", self.peek()))
        )
        if starts_factor:
            return self.factor(sign)
        if not (self.is_number_start() or self.is_sym("(")):
            self.fail("expected a term", {"number", "(", "poly", "exp", "log"})
        c = sign * self.coef()
        if self.is_sym("/"):
            self.i += 1
            self.expect_sym("(")
            a = self.shifted_z()
            self.expect_sym(")")
            order = 1
            if self.is_sym("^"):
                self.i += 1
                order = self.integer()
            return ("pole", a, order, c)
        if self.is_sym("*"):
            self.i += 1
            return self.factor(c)
        return ("poly", [c])

    def factor(self, c):
        if self.is_ident("poly"):
            self.i += 1
            self.expect_sym("(")
            coeffs = [self.complex_literal()]
            while self.is_sym(","):
                self.i += 1
                coeffs.append(self.complex_literal())
            self.expect_sym(")")
            return ("poly", [c * x for x in coeffs])
        if self.is_ident("exp"):
            if c != 1:
                self.fail("exp tails take no outer coefficient", {"exp"})
            self.i += 1
            self.expect_sym("(")
            s = 1.0
            if not self.is_ident("z"):
                s = self.coef()
                self.expect_sym("*")
            self.expect_ident("z")
            self.expect_sym(")")
            return ("tail", ExpTail(s))
        if self.is_ident("log"):
            self.i += 1
            self.expect_sym("(")
            b = self.shifted_z()
            self.expect_sym(")")
            return ("tail", LogBranch(b, c))
        if self.is_sym("("):
            self.i += 1
            b = self.shifted_z()
            self.expect_sym(")")
            self.expect_sym("^")
            col = self.tok.col
            p = self.real()
            if float(p).is_integer():
                raise ParseError("branch exponent must not be an integer", col, {"number"})
            return ("tail", PowBranch(b, p, c))
        self.fail("expected a factor", {"poly", "exp", "log", "("})

    def parse(self) -> MeromorphicFunction:
        sign = 1.0
        if self.is_sym("+") or self.is_sym("-"):
            sign = self.sign()
        items = [self.term(sign)]
        while self.tok.kind != "end":
            if not (self.is_sym("+") or self.is_sym("-")):
                self.fail("expected '+', '-' or end of input", {"+", "-", "end"})
            sign = self.sign()
            items.append(self.term(sign))
        return _assemble(items, self)


def _assemble(items, parser) -> MeromorphicFunction:
    poles: dict[complex, list[complex]] = {}
    poly: list[complex] = []
    tail = None
    for item in items:
        if item[0] == "pole":
            _, a, order, c = item
            lau = poles.setdefault(a, [])
            lau.extend([0j] * (order - len(lau)))
            lau[order - 1] += c
        elif item[0] == "poly":
            coeffs = item[1]
            poly.extend([0j] * (len(coeffs) - len(poly)))
            for k, c in enumerate(coeffs):
                poly[k] += c
        else:
            if tail is not None:
                parser.fail("at most one non-polynomial tail is supported")
            tail = item[1]
    if poly:
        if tail is not None:
            parser.fail("a polynomial cannot be combined with a non-polynomial tail")
        tail = PolynomialTail(poly)
    terms = []
    for a, lau in poles.items():
        while lau and lau[-1] == 0:
            lau.pop()
        if lau:
            terms.append(PoleTerm(a, lau))
    return MeromorphicFunction(tuple(terms), tail)


def parse_function_expression(text: str) -> MeromorphicFunction:
    return _Parser(text).parse()


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_signed(x: float) -> str:
    s = _fmt_real(x)
    return s if s.startswith("-") else "+" + s


def _fmt_complex(c: complex) -> str:
    return f"{_fmt_real(c.real)}{_fmt_signed(c.imag)}i"


def _fmt_shift(a: complex) -> str:
    # "(z-2.0-1.0i)" means z - (2+1i)
    return f"(z{_fmt_signed(-a.real)}{_fmt_signed(-a.imag)}i)"


def format_function(f: MeromorphicFunction) -> str:
    """Canonical text form; ``parse_function_expression`` inverts it exactly."""
    parts = []
    for t in f.rational_part:
        for o, c in enumerate(t.laurent, start=1):
            if c == 0:
                continue
            s = f"({_fmt_complex(c)})/{_fmt_shift(t.location)}"
            parts.append(s + (f"^{o}" if o > 1 else ""))
    tail = f.tail
    if isinstance(tail, PolynomialTail):
        parts.append("poly(" + ",".join(_fmt_complex(c) for c in tail.coeffs) + ")")
    elif isinstance(tail, ExpTail):
        parts.append(f"exp(({_fmt_complex(tail.scale)})*z)")
    elif isinstance(tail, LogBranch):
        parts.append(f"({_fmt_complex(tail.coefficient)})*log{_fmt_shift(tail.branch_point)}")
    elif isinstance(tail, PowBranch):
        parts.append(
            f"({_fmt_complex(tail.coefficient)})*{_fmt_shift(tail.branch_point)}^{_fmt_real(tail.exponent)}"
        )
    if not parts:
        return "0.0"
    return " + ".join(parts)


def laurent_matrix_entry(term: PoleTerm, j: int, order: int) -> complex:
    """Coefficient of (z - a)^{-order} in z^j * term (a = term.location)."""
    a = term.location
    total = 0j
    for l in range(j + 1):
        idx = order + l
        if idx <= term.order:
            total += math.comb(j, l) * a ** (j - l) * term.laurent[idx - 1]
    return total
