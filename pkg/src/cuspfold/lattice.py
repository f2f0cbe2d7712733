"""Exact rational matrices preserving a diagonal form.

Matrices are stored as an integer numerator array with one positive common
denominator, kept in lowest terms.  Nothing here touches floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import factorial, gcd

import numpy as np

from .qforms import as_form


class DimensionError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class CuspInvariantError(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


class ExactMatrix:
    """Square matrix over Q."""

    __slots__ = ("num", "den", "dim", "_hash")

    def __init__(self, rows):
        rows = [[_frac(x) for x in r] for r in rows]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionError("matrix must be square")
        den = 1
        for r in rows:
            for x in r:
                den = _lcm(den, x.denominator)
        num = tuple(tuple(int(x * den) for x in r) for r in rows)
        self._set(num, den)

    def _set(self, num, den):
        g = den
        for r in num:
            for x in r:
                g = gcd(g, x)
                if g == 1:
                    break
            if g == 1:
                break
        if g > 1:
            num = tuple(tuple(x // g for x in r) for r in num)
            den //= g
        self.num = num
        self.den = den
        self.dim = len(num)
        self._hash = None

    @classmethod
    def _raw(cls, num, den=1) -> "ExactMatrix":
        m = cls.__new__(cls)
        if den < 0:
            num = tuple(tuple(-x for x in r) for r in num)
            den = -den
        m._set(tuple(tuple(r) for r in num), den)
        return m

    @classmethod
    def identity(cls, n: int) -> "ExactMatrix":
        return cls._raw(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @classmethod
    def zeros(cls, n: int) -> "ExactMatrix":
        return cls._raw(tuple((0,) * n for _ in range(n)))

    @classmethod
    def diag(cls, entries) -> "ExactMatrix":
        n = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def from_columns(cls, cols) -> "ExactMatrix":
        n = len(cols)
        return cls([[cols[j][i] for j in range(n)] for i in range(n)])

    def entry(self, i: int, j: int) -> Fraction:
        return Fraction(self.num[i][j], self.den)

    def rows(self) -> list[list[Fraction]]:
        return [[Fraction(x, self.den) for x in r] for r in self.num]

    def __repr__(self):
        body = "; ".join(" ".join(str(x) for x in r) for r in self.rows())
        return f"ExactMatrix([{body}])"

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.den == other.den and self.num == other.num

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, self.den))
        return self._hash

    def _check(self, other):
        if self.dim != other.dim:
            raise DimensionError(f"dimension {self.dim} vs {other.dim}")

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        self._check(other)
        a, b = self.num, other.num
        bt = tuple(zip(*b))
        out = tuple(tuple(sum(x * y for x, y in zip(r, c)) for c in bt) for r in a)
        return ExactMatrix._raw(out, self.den * other.den)

    def __mul__(self, other):
        if isinstance(other, ExactMatrix):
            return self @ other
        f = _frac(other)
        return ExactMatrix._raw(
            tuple(tuple(x * f.numerator for x in r) for r in self.num), self.den * f.denominator
        )

    __rmul__ = __mul__

    def __add__(self, other: "ExactMatrix") -> "ExactMatrix":
        self._check(other)
        d = _lcm(self.den, other.den)
        s, t = d // self.den, d // other.den
        return ExactMatrix._raw(
            tuple(tuple(x * s + y * t for x, y in zip(r, w)) for r, w in zip(self.num, other.num)), d
        )

    def __neg__(self):
        return ExactMatrix._raw(tuple(tuple(-x for x in r) for r in self.num), self.den)

    def __sub__(self, other):
        return self + (-other)

    @property
    def T(self) -> "ExactMatrix":
        return ExactMatrix._raw(tuple(zip(*self.num)), self.den)

    def is_zero(self) -> bool:
        return all(x == 0 for r in self.num for x in r)

    def is_identity(self) -> bool:
        d = self.den
        return d == 1 and all(
            x == (1 if i == j else 0) for i, r in enumerate(self.num) for j, x in enumerate(r)
        )

    def is_integral(self) -> bool:
        return self.den == 1

    def apply(self, vec) -> tuple[Fraction, ...]:
        v = [_frac(x) for x in vec]
        if len(v) != self.dim:
            raise DimensionError("vector length mismatch")
        return tuple(sum((Fraction(x) * y for x, y in zip(r, v)), Fraction(0)) / self.den for r in self.num)

    def det(self) -> Fraction:
        return _det([[Fraction(x) for x in r] for r in self.num]) / Fraction(self.den) ** self.dim

    def inverse(self) -> "ExactMatrix":
        n = self.dim
        a = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self.num)]
        for c in range(n):
            piv = next((r for r in range(c, n) if a[r][c] != 0), None)
            if piv is None:
                raise ZeroDivisionError("singular matrix")
            a[c], a[piv] = a[piv], a[c]
            inv = 1 / a[c][c]
            a[c] = [x * inv for x in a[c]]
            for r in range(n):
                if r != c and a[r][c] != 0:
                    f = a[r][c]
                    a[r] = [x - f * y for x, y in zip(a[r], a[c])]
        return ExactMatrix([[x * self.den for x in r[n:]] for r in a])

    def __pow__(self, k: int) -> "ExactMatrix":
        return matrix_power(self, k)

    def mod_array(self, P: int) -> np.ndarray:
        """Entries reduced modulo the prime P (denominator inverted mod P)."""
        if self.den % P == 0:
            raise ZeroDivisionError(f"denominator divisible by {P}")
        inv = pow(self.den, -1, P)
        return np.array([[(x * inv) % P for x in r] for r in self.num], dtype=np.int64)

    def to_json(self) -> list[list[str]]:
        return [[f"{x.numerator}/{x.denominator}" for x in r] for r in self.rows()]

    @classmethod
    def from_json(cls, data) -> "ExactMatrix":
        return cls([[_frac(x) for x in r] for r in data])


def _det(a: list[list[Fraction]]) -> Fraction:
    a = [r[:] for r in a]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            if a[r][c] != 0:
                f = a[r][c] / a[c][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def nullspace(rows) -> list[tuple[Fraction, ...]]:
    """Basis of {x : R x = 0} for a rational matrix R given by rows."""
    a = [[_frac(x) for x in r] for r in rows]
    if not a:
        return []
    m = len(a[0])
    pivots = []
    r = 0
    for c in range(m):
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == len(a):
            break
    free = [c for c in range(m) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * m
        v[f] = Fraction(1)
        for i, c in enumerate(pivots):
            v[c] = -a[i][f]
        basis.append(tuple(v))
    return basis


def primitive_integer(v) -> tuple[int, ...]:
    """Scale a rational vector to a primitive integer vector, first nonzero entry positive."""
    v = [_frac(x) for x in v]
    d = 1
    for x in v:
        d = _lcm(d, x.denominator)
    w = [int(x * d) for x in v]
    g = 0
    for x in w:
        g = gcd(g, x)
    if g == 0:
        return tuple(w)
    w = [x // g for x in w]
    lead = next(x for x in w if x != 0)
    if lead < 0:
        w = [-x for x in w]
    return tuple(w)


def gram_matrix(q) -> ExactMatrix:
    return ExactMatrix.diag(list(as_form(q).coeffs))


def preserves_form(g: ExactMatrix, q) -> bool:
    """Exact test of g^T A_q g = A_q."""
    q = as_form(q)
    if g.dim != q.rank:
        raise DimensionError(f"matrix of dim {g.dim} vs form of rank {q.rank}")
    A = gram_matrix(q)
    return g.T @ A @ g == A


def corner_embed(g: ExactMatrix) -> ExactMatrix:
    """g -> g (+) [1]."""
    return embed_block(g, tuple(range(g.dim)), g.dim + 1)


def embed_block(g: ExactMatrix, indices, n: int) -> ExactMatrix:
    """Act by g on the coordinates ``indices`` of Q^n and trivially elsewhere."""
    indices = tuple(indices)
    if len(indices) != g.dim:
        raise DimensionError("index map does not match matrix size")
    rows = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for a, i in enumerate(indices):
        for b, j in enumerate(indices):
            rows[i][j] = g.entry(a, b)
    return ExactMatrix(rows)


def eichler_transvection(q, u, v) -> ExactMatrix:
    """x -> x + B(x,u) v - B(x,v) u - q(v) B(x,u) u with B the polar form."""
    q = as_form(q)
    u = [_frac(x) for x in u]
    v = [_frac(x) for x in v]
    n = q.rank
    if len(u) != n or len(v) != n:
        raise DimensionError("vector length does not match the form")
    if all(x == 0 for x in u):
        raise PreconditionError("u must be nonzero")
    if q.value(u) != 0:
        raise PreconditionError("u is not isotropic")
    if q.polar(u, v) != 0:
        raise PreconditionError("v is not orthogonal to u")
    a = q.coeffs
    qv = q.value(v)
    rows = [
        [
            Fraction(int(i == j)) + 2 * a[j] * u[j] * v[i] - 2 * a[j] * v[j] * u[i] - qv * 2 * a[j] * u[j] * u[i]
            for j in range(n)
        ]
        for i in range(n)
    ]
    return ExactMatrix(rows)


def matrix_power(g: ExactMatrix, k: int) -> ExactMatrix:
    """Exact g**k by repeated squaring; negative k goes through the inverse."""
    k = int(k)
    if k < 0:
        g = g.inverse()
        k = -k
    out = ExactMatrix.identity(g.dim)
    base = g
    while k:
        if k & 1:
            out = out @ base
        k >>= 1
        if k:
            base = base @ base
    return out


def is_unipotent(g: ExactMatrix) -> bool:
    N = g - ExactMatrix.identity(g.dim)
    return matrix_power(N, g.dim).is_zero()


def unipotent_log(g: ExactMatrix) -> ExactMatrix:
    """Finite log series sum_{k>=1} (-1)^(k+1) (g - I)^k / k."""
    if not is_unipotent(g):
        raise PreconditionError("matrix is not unipotent")
    n = g.dim
    N = g - ExactMatrix.identity(n)
    out = ExactMatrix.zeros(n)
    P = ExactMatrix.identity(n)
    for k in range(1, n):
        P = P @ N
        if P.is_zero():
            break
        out = out + P * Fraction((-1) ** (k + 1), k)
    return out


def nilpotent_exp(N: ExactMatrix) -> ExactMatrix:
    n = N.dim
    out = ExactMatrix.identity(n)
    P = ExactMatrix.identity(n)
    for k in range(1, n + 1):
        P = P @ N
        if P.is_zero():
            break
        out = out + P * Fraction(1, factorial(k))
    return out


def is_so_plus(g: ExactMatrix, q) -> bool:
    """det 1, preserves q, and keeps the upper sheet (checked at the basepoint)."""
    q = as_form(q)
    if not preserves_form(g, q):
        return False
    if g.det() != 1:
        return False
    i = q.negative_index()
    return g.entry(i, i) > 0


@dataclass(frozen=True)
class CuspData:
    index: int
    point: tuple
    generators: tuple
    words: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(_frac(x) for x in self.point))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "words", tuple(tuple(int(x) for x in w) for w in self.words))

    @cached_property
    def logs(self) -> tuple[ExactMatrix, ...]:
        gens = self.generators
        for i, g in enumerate(gens):
            for h in gens[i + 1:]:
                if g @ h != h @ g:
                    raise CuspInvariantError(f"cusp {self.index}: generators do not commute")
        return tuple(unipotent_log(g) for g in gens)

    def validate(self, q) -> None:
        q = as_form(q)
        if q.value(self.point) != 0 or all(x == 0 for x in self.point):
            raise CuspInvariantError(f"cusp {self.index}: point is not isotropic")
        for g in self.generators:
            if not preserves_form(g, q):
                raise CuspInvariantError(f"cusp {self.index}: generator does not preserve q")
            if not is_unipotent(g):
                raise CuspInvariantError(f"cusp {self.index}: generator is not unipotent")
            if g.apply(self.point) != self.point:
                raise CuspInvariantError(f"cusp {self.index}: generator does not fix the point")
        self.logs  # commutation check

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "point": vector_to_json(self.point),
            "generators": [g.to_json() for g in self.generators],
            "words": [list(w) for w in self.words],
        }

    @classmethod
    def from_json(cls, d) -> "CuspData":
        return cls(
            int(d["index"]),
            tuple(_frac(x) for x in d["point"]),
            tuple(ExactMatrix.from_json(g) for g in d["generators"]),
            tuple(tuple(int(x) for x in w) for w in d.get("words", [])),
        )


def _solve_rational(columns, target):
    """One rational solution of sum_j k_j columns[j] = target, or None."""
    m = len(columns)
    rows = [[columns[j][i] for j in range(m)] + [target[i]] for i in range(len(target))]
    a = [r[:] for r in rows]
    pivots = []
    r = 0
    for c in range(m):
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
    for i in range(r, len(a)):
        if a[i][m] != 0:
            return None
    sol = [Fraction(0)] * m
    for i, c in enumerate(pivots):
        sol[c] = a[i][m]
    return sol


def cusp_membership(c: ExactMatrix, cusp: CuspData):
    """Integer exponents k with c = prod gen_j^k_j, or None if c is not in the cusp group."""
    logs = cusp.logs
    n = c.dim
    if c.apply(cusp.point) != cusp.point:
        return None
    if not is_unipotent(c):
        return None
    if not cusp.generators:
        return () if c.is_identity() else None
    L = unipotent_log(c)
    cols = [[x for r in lg.rows() for x in r] for lg in logs]
    target = [x for r in L.rows() for x in r]
    sol = _solve_rational(cols, target)
    if sol is None or any(x.denominator != 1 for x in sol):
        return None
    ks = tuple(int(x) for x in sol)
    prod = ExactMatrix.identity(n)
    for g, k in zip(cusp.generators, ks):
        prod = prod @ matrix_power(g, k)
    return ks if prod == c else None


def vector_to_json(v) -> list[str]:
    out = []
    for x in v:
        x = _frac(x)
        out.append(f"{x.numerator}/{x.denominator}")
    return out


def vector_from_json(v) -> tuple[Fraction, ...]:
    return tuple(_frac(x) for x in v)
