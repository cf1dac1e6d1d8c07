"""Dense complex polynomials in the monomial basis (ascending coefficients)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroPolynomial


def _as_coeffs(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1, dtype=complex)
    return c[: nz[-1] + 1].copy()


@dataclass(frozen=True, eq=False)
class ComplexPoly:
    """Polynomial sum_k coeffs[k] z^k.

    Trailing exact zeros are stripped on construction, so ``degree`` is
    ``len(coeffs) - 1`` and the leading coefficient is nonzero unless the
    polynomial is identically zero (stored as ``[0]``, degree 0).
    """

    coeffs: np.ndarray

    def __init__(self, coeffs):
        object.__setattr__(self, "coeffs", _as_coeffs(coeffs))
        self.coeffs.setflags(write=False)

    @classmethod
    def from_roots(cls, roots, leading=1.0) -> ComplexPoly:
        c = np.array([leading], dtype=complex)
        for r in roots:
            c = np.convolve(c, [-complex(r), 1.0])
        return cls(c)

    @classmethod
    def monomial(cls, k: int) -> ComplexPoly:
        c = np.zeros(k + 1, dtype=complex)
        c[k] = 1.0
        return cls(c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            acc = acc * z + c
        return acc if acc.ndim else complex(acc)

    def padded(self, length: int) -> np.ndarray:
        """Coefficient vector zero-padded (never truncated) to ``length``."""
        out = np.zeros(max(length, len(self.coeffs)), dtype=complex)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def __add__(self, other):
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return ComplexPoly(self.padded(n) + other.padded(n))

    __radd__ = __add__

    def __neg__(self):
        return ComplexPoly(-self.coeffs)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        return ComplexPoly(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def norm(self, ord=2) -> float:
        """Coefficient norm."""
        return float(np.linalg.norm(self.coeffs, ord))

    def distance(self, other, ord=2) -> float:
        return (self - other).norm(ord)

    def monic(self) -> ComplexPoly:
        if self.is_zero():
            raise ZeroPolynomial("cannot normalize the zero polynomial")
        return ComplexPoly(self.coeffs / self.coeffs[-1])

    def trimmed(self, rtol: float) -> ComplexPoly:
        """Drop leading coefficients below ``rtol * max|coeff|``."""
        scale = np.max(np.abs(self.coeffs))
        c = self.coeffs.copy()
        c[np.abs(c) <= rtol * scale] = 0.0
        keep = np.flatnonzero(c)
        if keep.size == 0:
            return ComplexPoly([0.0])
        return ComplexPoly(self.coeffs[: keep[-1] + 1])

    def derivative(self) -> ComplexPoly:
        if self.degree == 0:
            return ComplexPoly([0.0])
        return ComplexPoly(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def shift(self, a: complex) -> np.ndarray:
        """Taylor coefficients about ``a``: p(z) = sum_k out[k] (z - a)^k."""
        out = self.coeffs.copy()
        n = len(out)
        # repeated synthetic division
        for i in range(n - 1):
            for j in range(n - 2, i - 1, -1):
                out[j] += a * out[j + 1]
        return out

    def __repr__(self):
        return f"ComplexPoly({np.array2string(self.coeffs, precision=6)})"


def _coerce(x) -> ComplexPoly:
    if isinstance(x, ComplexPoly):
        return x
    return ComplexPoly([complex(x)])
