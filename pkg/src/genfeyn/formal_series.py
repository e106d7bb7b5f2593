"""Truncated multivariate formal power series with exact coefficients."""
from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Any, Callable, Iterable, Mapping, Sequence

import sympy

Multi = tuple[int, ...]


class SeriesContextError(ValueError):
    pass


def _clean(v: Any) -> Any:
    if isinstance(v, sympy.Basic):
        v = sympy.expand(v)
        if v.is_Rational:
            return Fraction(int(v.p), int(v.q))
    return v


def _is_zero(v: Any) -> bool:
    return v == 0


class TruncatedSeries:
    """Series in ``variables`` truncated at total degree ``D``.

    Coefficients live in a dict multidegree -> value; absent entries are zero.
    """

    __slots__ = ("variables", "D", "coeffs")

    def __init__(self, variables: Sequence[str], D: int, coeffs: Mapping[Multi, Any] | None = None):
        self.variables = tuple(variables)
        self.D = int(D)
        out: dict[Multi, Any] = {}
        for k, v in (coeffs or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != len(self.variables):
                raise SeriesContextError(f"multidegree {k} does not match variables {self.variables}")
            if sum(k) > self.D:
                continue
            v = _clean(v)
            if not _is_zero(v):
                out[k] = v
        self.coeffs = out

    # constructors
    @classmethod
    def zero(cls, variables: Sequence[str], D: int) -> "TruncatedSeries":
        return cls(variables, D)

    @classmethod
    def constant(cls, variables: Sequence[str], D: int, c: Any) -> "TruncatedSeries":
        return cls(variables, D, {(0,) * len(variables): c})

    @classmethod
    def variable(cls, variables: Sequence[str], D: int, name: str) -> "TruncatedSeries":
        k = [0] * len(variables)
        k[list(variables).index(name)] = 1
        return cls(variables, D, {tuple(k): 1})

    def _ctx(self, other: "TruncatedSeries") -> None:
        if self.variables != other.variables or self.D != other.D:
            raise SeriesContextError(
                f"series contexts differ: {self.variables}/D={self.D} vs {other.variables}/D={other.D}"
            )

    def _coerce(self, other: Any) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            self._ctx(other)
            return other
        return TruncatedSeries.constant(self.variables, self.D, other)

    # ring operations
    def __add__(self, other: Any) -> "TruncatedSeries":
        other = self._coerce(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return TruncatedSeries(self.variables, self.D, out)

    __radd__ = __add__

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.variables, self.D, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other: Any) -> "TruncatedSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "TruncatedSeries":
        return self._coerce(other) - self

    def __mul__(self, other: Any) -> "TruncatedSeries":
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries(self.variables, self.D, {k: v * other for k, v in self.coeffs.items()})
        self._ctx(other)
        out: dict[Multi, Any] = {}
        for ka, va in self.coeffs.items():
            da = sum(ka)
            for kb, vb in other.coeffs.items():
                if da + sum(kb) > self.D:
                    continue
                k = tuple(x + y for x, y in zip(ka, kb))
                out[k] = out.get(k, 0) + va * vb
        return TruncatedSeries(self.variables, self.D, out)

    def __rmul__(self, other: Any) -> "TruncatedSeries":
        return self * other

    def __pow__(self, n: int) -> "TruncatedSeries":
        out = TruncatedSeries.constant(self.variables, self.D, 1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        if self.variables != other.variables or self.D != other.D:
            return False
        return (self - other).coeffs == {}

    def __repr__(self) -> str:
        return f"TruncatedSeries({self.variables}, D={self.D}, {self.render()})"

    # queries
    @property
    def constant_term(self) -> Any:
        return self.coeffs.get((0,) * len(self.variables), 0)

    def coefficient(self, multidegree: Sequence[int]) -> Any:
        return self.coeffs.get(tuple(multidegree), 0)

    def homogeneous(self, degree: int) -> "TruncatedSeries":
        return TruncatedSeries(self.variables, self.D, {k: v for k, v in self.coeffs.items() if sum(k) == degree})

    def truncate(self, D: int) -> "TruncatedSeries":
        return TruncatedSeries(self.variables, D, self.coeffs)

    def map_coefficients(self, f: Callable[[Any], Any]) -> "TruncatedSeries":
        return TruncatedSeries(self.variables, self.D, {k: f(v) for k, v in self.coeffs.items()})

    def render(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for k in sorted(self.coeffs, key=lambda k: (sum(k), tuple(-e for e in k))):
            mono = "*".join(
                (n if e == 1 else f"{n}^{e}") for n, e in zip(self.variables, k) if e
            )
            coef = self.coeffs[k]
            terms.append(f"({coef})" + (f" * {mono}" if mono else ""))
        return " + ".join(terms)


def exp(a: TruncatedSeries) -> TruncatedSeries:
    """sum_{k<=D} a^k / k!; requires zero constant term."""
    if not _is_zero(a.constant_term):
        raise ValueError("exp needs a series with zero constant term")
    out = TruncatedSeries.constant(a.variables, a.D, 1)
    power = TruncatedSeries.constant(a.variables, a.D, 1)
    for k in range(1, a.D + 1):
        power = power * a
        out = out + power * Fraction(1, factorial(k))
    return out


def log(a: TruncatedSeries) -> TruncatedSeries:
    """-sum_{k<=D} (1-a)^k / k; requires constant term 1."""
    if a.constant_term != 1:
        raise ValueError("log needs a series with constant term 1")
    u = 1 - a
    out = TruncatedSeries.zero(a.variables, a.D)
    power = TruncatedSeries.constant(a.variables, a.D, 1)
    for k in range(1, a.D + 1):
        power = power * u
        out = out - power * Fraction(1, k)
    return out


def series_from_terms(variables: Sequence[str], D: int, terms: Iterable[tuple[Multi, Any]]) -> TruncatedSeries:
    acc: dict[Multi, Any] = {}
    for k, v in terms:
        k = tuple(k)
        acc[k] = acc.get(k, 0) + v
    return TruncatedSeries(variables, D, acc)
