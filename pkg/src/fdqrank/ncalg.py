"""Exact noncommutative polynomials in t_1..t_n and their tensor squares.

Coefficients are Gaussian rationals (``a + b i`` with ``a, b`` in Q).  All
objects are immutable; every operation returns a new canonical value with no
zero coefficients, so ``==`` is algebraic equality.

Monomials are tuples of 1-based variable indices; ``()`` is the unit.
Canonical term order is by degree, then lexicographic on the index tuple.
"""

from __future__ import annotations

from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Union

from .errors import ResourceError, UsageError

__all__ = [
    "GaussianRational",
    "NCPoly",
    "TensorPoly",
    "LIMITS",
    "differentiate",
    "contract",
    "involution",
    "tensor",
    "monomial_key",
    "format_monomial",
]

# Guards against runaway relator expansion; override per process if needed.
LIMITS = {"max_degree": 64, "max_terms": 10**6}

Monomial = tuple


class GaussianRational:
    """Exact element of Q(i)."""

    __slots__ = ("real", "imag")

    def __init__(self, real=0, imag=0):
        object.__setattr__(self, "real", Fraction(real))
        object.__setattr__(self, "imag", Fraction(imag))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            raise TypeError("floating complex values are not exact; pass Fractions")
        if isinstance(value, float):
            raise TypeError("floating values are not exact; pass Fractions")
        return cls(value, 0)

    def __add__(self, other):
        other = _maybe_coerce(other)
        if other is NotImplemented:
            return other
        return GaussianRational(self.real + other.real, self.imag + other.imag)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.real, -self.imag)

    def __sub__(self, other):
        other = _maybe_coerce(other)
        if other is NotImplemented:
            return other
        return GaussianRational(self.real - other.real, self.imag - other.imag)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = _maybe_coerce(other)
        if other is NotImplemented:
            return other
        a, b, c, d = self.real, self.imag, other.real, other.imag
        return GaussianRational(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _maybe_coerce(other)
        if other is NotImplemented:
            return other
        norm = other.real * other.real + other.imag * other.imag
        if norm == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return self * GaussianRational(other.real / norm, -other.imag / norm)

    def conjugate(self):
        return GaussianRational(self.real, -self.imag)

    def __bool__(self):
        return bool(self.real) or bool(self.imag)

    def __eq__(self, other):
        other = _maybe_coerce(other)
        if other is NotImplemented:
            return False
        return self.real == other.real and self.imag == other.imag

    def __hash__(self):
        return hash((self.real, self.imag))

    def __complex__(self):
        return complex(float(self.real), float(self.imag))

    def __repr__(self):
        return f"GaussianRational({self.real!s}, {self.imag!s})"

    def __str__(self):
        return format_coefficient(self)


def _maybe_coerce(value):
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, (int, Fraction)):
        return GaussianRational(value, 0)
    return NotImplemented


I = GaussianRational(0, 1)
ONE = GaussianRational(1, 0)


def _frac_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_coefficient(c: GaussianRational) -> str:
    """Render as ``a/b``, ``c/d*i`` or ``(a/b+c/d*i)``."""
    if c.imag == 0:
        return _frac_text(c.real)
    imag = "i" if c.imag == 1 else "-i" if c.imag == -1 else f"{_frac_text(c.imag)}*i"
    if c.real == 0:
        return imag
    sign = "" if imag.startswith("-") else "+"
    return f"({_frac_text(c.real)}{sign}{imag})"


def monomial_key(w: Monomial):
    return (len(w), w)


def format_monomial(w: Monomial) -> str:
    return "*".join(f"t{v}" for v in w) if w else "1"


def _format_terms(items) -> str:
    if not items:
        return "0"
    parts = []
    for body, c in items:
        if c == ONE:
            text = body
        elif c == -ONE:
            text = "-" + body
        elif body == "1":
            text = format_coefficient(c)
        else:
            text = f"{format_coefficient(c)}*{body}"
        if parts and not text.startswith("-"):
            parts.append("+ " + text)
        elif parts:
            parts.append("- " + text[1:])
        else:
            parts.append(text)
    return " ".join(parts)


def _check_nvars(a, b):
    if a.nvars != b.nvars:
        raise UsageError(f"mismatched nvars: {a.nvars} vs {b.nvars}")


def _accumulate(acc: dict, key, coeff: GaussianRational):
    cur = acc.get(key)
    new = coeff if cur is None else cur + coeff
    if new:
        acc[key] = new
    elif cur is not None:
        del acc[key]


class NCPoly:
    """Noncommutative polynomial with Gaussian-rational coefficients."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, object] | Iterable = ()):
        if nvars < 1:
            raise UsageError("nvars must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for w, c in items:
            w = tuple(int(v) for v in w)
            for v in w:
                if not 1 <= v <= nvars:
                    raise UsageError(f"variable t{v} out of range 1..{nvars}")
            _accumulate(acc, w, GaussianRational.coerce(c))
        ordered = dict(sorted(acc.items(), key=lambda kv: monomial_key(kv[0])))
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "_terms", MappingProxyType(ordered))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("NCPoly is immutable")

    @classmethod
    def _raw(cls, nvars, acc: dict) -> "NCPoly":
        # acc is already canonical (no zero coefficients, valid indices)
        obj = cls.__new__(cls)
        ordered = dict(sorted(acc.items(), key=lambda kv: monomial_key(kv[0])))
        object.__setattr__(obj, "nvars", nvars)
        object.__setattr__(obj, "_terms", MappingProxyType(ordered))
        object.__setattr__(obj, "_hash", None)
        return obj

    @classmethod
    def zero(cls, nvars):
        return cls._raw(nvars, {})

    @classmethod
    def one(cls, nvars):
        return cls._raw(nvars, {(): ONE})

    @classmethod
    def constant(cls, nvars, c):
        return cls(nvars, {(): c})

    @classmethod
    def var(cls, nvars, j, coeff=1):
        return cls(nvars, {(j,): coeff})

    @classmethod
    def monomial(cls, nvars, word, coeff=1):
        return cls(nvars, {tuple(word): coeff})

    @property
    def terms(self) -> Mapping[Monomial, GaussianRational]:
        return self._terms

    def degree(self) -> int:
        return max((len(w) for w in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def _lift(self, other) -> "NCPoly":
        if isinstance(other, NCPoly):
            _check_nvars(self, other)
            return other
        return NCPoly.constant(self.nvars, GaussianRational.coerce(other))

    def __add__(self, other):
        other = self._lift(other)
        acc = dict(self._terms)
        for w, c in other._terms.items():
            _accumulate(acc, w, c)
        return NCPoly._raw(self.nvars, acc)

    __radd__ = __add__

    def __neg__(self):
        return NCPoly._raw(self.nvars, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "NCPoly":
        c = GaussianRational.coerce(c)
        if not c:
            return NCPoly.zero(self.nvars)
        return NCPoly._raw(self.nvars, {w: c * d for w, d in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, NCPoly):
            return self.scale(other)
        _check_nvars(self, other)
        max_degree = LIMITS["max_degree"]
        max_terms = LIMITS["max_terms"]
        if self.degree() + other.degree() > max_degree:
            raise ResourceError(
                f"product degree {self.degree() + other.degree()} exceeds cap {max_degree}"
            )
        acc: dict = {}
        for u, a in self._terms.items():
            for v, b in other._terms.items():
                _accumulate(acc, u + v, a * b)
            if len(acc) > max_terms:
                raise ResourceError(f"term count exceeds cap {max_terms}")
        return NCPoly._raw(self.nvars, acc)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int):
        if k < 0:
            raise UsageError("negative powers are not polynomials")
        out = NCPoly.one(self.nvars)
        for _ in range(k):
            out = out * self
        return out

    def star(self) -> "NCPoly":
        return involution(self)

    def __eq__(self, other):
        if isinstance(other, NCPoly):
            return self.nvars == other.nvars and dict(self._terms) == dict(other._terms)
        if isinstance(other, (int, Fraction, GaussianRational)):
            return self == NCPoly.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(
                self, "_hash", hash((self.nvars, frozenset(self._terms.items())))
            )
        return self._hash

    def __str__(self):
        return _format_terms([(format_monomial(w), c) for w, c in self._terms.items()])

    def __repr__(self):
        return f"NCPoly({self.nvars}, {self})"


class TensorPoly:
    """Element of C<t> (x) C<t>, stored as (left word, right word) -> coefficient."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping | Iterable = ()):
        if nvars < 1:
            raise UsageError("nvars must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for (a, b), c in items:
            key = (tuple(int(v) for v in a), tuple(int(v) for v in b))
            for v in key[0] + key[1]:
                if not 1 <= v <= nvars:
                    raise UsageError(f"variable t{v} out of range 1..{nvars}")
            _accumulate(acc, key, GaussianRational.coerce(c))
        self._set(nvars, acc)

    def _set(self, nvars, acc):
        ordered = dict(
            sorted(acc.items(), key=lambda kv: (monomial_key(kv[0][0]), monomial_key(kv[0][1])))
        )
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "_terms", MappingProxyType(ordered))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("TensorPoly is immutable")

    @classmethod
    def _raw(cls, nvars, acc):
        obj = cls.__new__(cls)
        obj._set(nvars, acc)
        return obj

    @classmethod
    def zero(cls, nvars):
        return cls._raw(nvars, {})

    @classmethod
    def unit(cls, nvars):
        return cls._raw(nvars, {((), ()): ONE})

    @property
    def terms(self):
        return self._terms

    def is_zero(self):
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __add__(self, other):
        if not isinstance(other, TensorPoly):
            return NotImplemented
        _check_nvars(self, other)
        acc = dict(self._terms)
        for key, c in other._terms.items():
            _accumulate(acc, key, c)
        return TensorPoly._raw(self.nvars, acc)

    def __neg__(self):
        return TensorPoly._raw(self.nvars, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = GaussianRational.coerce(c)
        if not c:
            return TensorPoly.zero(self.nvars)
        return TensorPoly._raw(self.nvars, {k: c * d for k, d in self._terms.items()})

    def __mul__(self, other):
        """Factorwise product (a (x) b)(c (x) d) = ac (x) bd."""
        if not isinstance(other, TensorPoly):
            return self.scale(other)
        _check_nvars(self, other)
        acc: dict = {}
        for (a, b), x in self._terms.items():
            for (c, d), y in other._terms.items():
                _accumulate(acc, (a + c, b + d), x * y)
        return TensorPoly._raw(self.nvars, acc)

    def __rmul__(self, other):
        return self.scale(other)

    def flip(self) -> "TensorPoly":
        """Swap legs, reverse each leg and conjugate coefficients."""
        return TensorPoly._raw(
            self.nvars,
            {(b[::-1], a[::-1]): c.conjugate() for (a, b), c in self._terms.items()},
        )

    def __eq__(self, other):
        if not isinstance(other, TensorPoly):
            return NotImplemented
        return self.nvars == other.nvars and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(
                self, "_hash", hash((self.nvars, frozenset(self._terms.items())))
            )
        return self._hash

    def __str__(self):
        return _format_terms(
            [(f"[{format_monomial(a)} | {format_monomial(b)}]", c) for (a, b), c in self._terms.items()]
        )

    def __repr__(self):
        return f"TensorPoly({self.nvars}, {self})"


Scalar = Union[int, Fraction, GaussianRational]


def tensor(p: NCPoly, q: NCPoly) -> TensorPoly:
    """Elementary tensor p (x) q."""
    _check_nvars(p, q)
    acc: dict = {}
    for a, x in p.terms.items():
        for b, y in q.terms.items():
            _accumulate(acc, (a, b), x * y)
    return TensorPoly._raw(p.nvars, acc)


def involution(p: NCPoly) -> NCPoly:
    """Conjugate coefficients and reverse words; the t_j are self-adjoint."""
    acc: dict = {}
    for w, c in p.terms.items():
        _accumulate(acc, w[::-1], c.conjugate())
    return NCPoly._raw(p.nvars, acc)


def differentiate(p: NCPoly, j: int) -> TensorPoly:
    """Free difference quotient: split every occurrence of t_j into a tensor."""
    if not 1 <= j <= p.nvars:
        raise UsageError(f"variable index {j} out of range 1..{p.nvars}")
    acc: dict = {}
    for w, c in p.terms.items():
        for a, v in enumerate(w):
            if v == j:
                _accumulate(acc, (w[:a], w[a + 1 :]), c)
    return TensorPoly._raw(p.nvars, acc)


def contract(tp: TensorPoly, x: NCPoly) -> NCPoly:
    """(a (x) b) # x = a x b, extended linearly."""
    _check_nvars(tp, x)
    acc: dict = {}
    for (a, b), c in tp.terms.items():
        for w, d in x.terms.items():
            _accumulate(acc, a + w + b, c * d)
    return NCPoly._raw(tp.nvars, acc)
