"""Independent reference computations used to check the library.

Nothing here calls into the code paths it is used to check.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from itertools import product

import numpy as np
import sympy


def strip_squares(n: int) -> int:
    sign = -1 if n < 0 else 1
    n = abs(n)
    out = 1
    for p, e in sympy.factorint(n).items():
        if e % 2:
            out *= p
    return sign * out


def hilbert_bruteforce(a: int, b: int, p) -> int:
    """(a,b)_p by searching primitive solutions of a x^2 + b y^2 = z^2 mod p^k."""
    a, b = strip_squares(a), strip_squares(b)
    if p is None:
        return -1 if a < 0 and b < 0 else 1
    k = 5 if p == 2 else 3
    M = p**k
    Z = np.arange(M, dtype=np.int64)
    sq = (Z * Z) % M
    all_sq = np.zeros(M, dtype=bool)
    all_sq[sq] = True
    unit_sq = np.zeros(M, dtype=bool)
    unit_sq[sq[Z % p != 0]] = True
    by2 = (b % M) * sq % M
    y_unit = Z % p != 0
    for x in range(M):
        vals = ((a % M) * (x * x % M) + by2) % M
        if x % p != 0:
            if all_sq[vals].any():
                return 1
        else:
            if (y_unit & all_sq[vals]).any() or (~y_unit & unit_sq[vals]).any():
                return 1
    return -1


def legendre_sympy(a: int, p: int) -> int:
    return int(sympy.legendre_symbol(a % p, p)) if a % p else 0


def hasse_by_definition(coeffs, p) -> int:
    out = 1
    for i in range(len(coeffs)):
        for j in range(i + 1, len(coeffs)):
            out *= hilbert_bruteforce(coeffs[i], coeffs[j], p)
    return out


def small_isotropic_vector(coeffs, bound: int):
    """Plain nested-loop search for a primitive zero with entries in [-bound, bound]."""
    rng = range(-bound, bound + 1)
    for v in product(rng, repeat=len(coeffs)):
        if any(v) and sum(c * x * x for c, x in zip(coeffs, v)) == 0:
            return v
    return None


# ------------------------------------------------------------ linear algebra

def sympy_matrix(g) -> sympy.Matrix:
    return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in g.rows()])


def invariant_hyperplanes_bruteforce(gens, coeffs, trials: int = 40, seed: int = 0):
    """For each sign pattern, stack (g_j - s_j I), take the sympy nullspace and
    look for q-positive vectors among random integer combinations of its basis."""
    rng = random.Random(seed)
    n = len(coeffs)
    mats = [sympy_matrix(g) for g in gens]
    eye = sympy.eye(n)
    found = []
    for signs in product((1, -1), repeat=len(mats)):
        stacked = sympy.Matrix.vstack(*[m - s * eye for m, s in zip(mats, signs)])
        basis = stacked.nullspace()
        if not basis:
            continue
        cands = list(basis)
        for _ in range(trials):
            cands.append(sum((rng.randint(-3, 3) * b for b in basis), sympy.zeros(n, 1)))
        for v in cands:
            if all(x == 0 for x in v):
                continue
            if sum(c * v[i] ** 2 for i, c in enumerate(coeffs)) > 0:
                assert all(m * v == v or m * v == -v for m in mats)
                found.append(tuple(v))
                break
    return found


# ------------------------------------------------------------------ geometry

def horosphere_param(u, s, coeffs):
    """Flat parametrization z -> x(z) of {x : b(x,x) = -1, b(x,u) = -s} for q = <-1,1,...,1>."""
    n = len(coeffs)
    u = np.array([float(x) for x in u])
    if u[0] < 0:
        u = -u
    J = np.diag([float(c) for c in coeffs])

    def b(x, y):
        return float(x @ J @ y)

    w = np.zeros(n)
    w[0] = 1.0
    c = b(w, u)
    up = -(w - b(w, w) / (2 * c) * u) / c  # b(u, up) = -1, b(up, up) = 0
    basis = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        e = e + b(e, up) * u + b(e, u) * up
        for f in basis:
            e = e - b(e, f) * f
        if b(e, e) > 1e-9:
            basis.append(e / math.sqrt(b(e, e)))
        if len(basis) == n - 2:
            break

    def point(z):
        zz = sum(t * t for t in z)
        return s * up + (1 / (2 * s) + s * zz / 2) * u + sum(s * t * e for t, e in zip(z, basis))

    return point, b, n - 2


def horoball_gap_by_sampling(uA, sA, uB, sB, coeffs, radius=8.0, steps=21, rounds=12):
    """min over points x of horosphere A of the signed distance ln(|b(x,u_B)|/s_B) to horosphere B.

    Grid search on the flat coordinates of A, zooming in around the best point.
    """
    point, b, d = horosphere_param(uA, sA, coeffs)
    uB_ = np.array([float(x) for x in uB])
    if uB_[0] < 0:
        uB_ = -uB_
    center = np.zeros(d)
    best = math.inf
    for _ in range(rounds):
        grid = np.linspace(-radius, radius, steps)
        for off in product(grid, repeat=d):
            z = center + np.array(off)
            val = math.log(abs(b(point(z), uB_)) / sB)
            if val < best:
                best, bz = val, z
        center = bz
        radius /= 3
    return best


def exact_bilinear(coeffs, x, y):
    return sum(Fraction(c) * Fraction(a) * Fraction(b) for c, a, b in zip(coeffs, x, y))
