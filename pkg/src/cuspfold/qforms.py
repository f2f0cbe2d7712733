"""Diagonal quadratic forms over Q and its completions.

A form is stored as its coefficient tuple ``(a_1, ..., a_n)`` and stands for
``a_1 x_1^2 + ... + a_n x_n^2``.  Places are the primes and infinity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import gcd, isqrt

import numpy as np

from .arith import (
    InvalidInputError,
    InvalidPlaceError,
    is_prime,
    legendre_symbol,
    prime_factors,
    squarefree_part,
    valuation,
)


class RankError(ValueError):
    pass


class ChainError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Place:
    """A place of Q: ``p`` is a prime, or ``None`` for the real place."""

    p: int | None = None

    def __post_init__(self):
        if self.p is not None:
            if not isinstance(self.p, int) or not is_prime(self.p):
                raise InvalidPlaceError(f"{self.p!r} is not a prime")

    @property
    def is_infinite(self) -> bool:
        return self.p is None

    @classmethod
    def of(cls, v) -> "Place":
        if isinstance(v, Place):
            return v
        if v is None or (isinstance(v, str) and v.lower() in ("inf", "infinity", "oo")):
            return cls(None)
        if isinstance(v, float) and v == float("inf"):
            return cls(None)
        return cls(int(v))

    def __str__(self) -> str:
        return "inf" if self.p is None else str(self.p)

    def sort_key(self):
        return (1, 0) if self.p is None else (0, self.p)


INF = Place(None)


@dataclass(frozen=True)
class DiagonalForm:
    coeffs: tuple[int, ...]

    def __post_init__(self):
        cs = tuple(int(c) for c in self.coeffs)
        if any(c == 0 for c in cs):
            raise InvalidInputError(f"degenerate form {cs}")
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def parse(cls, text: str) -> "DiagonalForm":
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t))

    @property
    def rank(self) -> int:
        return len(self.coeffs)

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]

    def __str__(self) -> str:
        return "<" + ",".join(str(c) for c in self.coeffs) + ">"

    def value(self, x) -> int:
        return sum(a * xi * xi for a, xi in zip(self.coeffs, x))

    def bil(self, x, y):
        """Symmetric bilinear form b(x, y) = sum a_i x_i y_i, so b(x, x) = q(x)."""
        return sum(a * xi * yi for a, xi, yi in zip(self.coeffs, x, y))

    def polar(self, x, y):
        """Polar form B(x, y) = q(x + y) - q(x) - q(y) = 2 b(x, y)."""
        return 2 * self.bil(x, y)

    def subform(self, indices) -> "DiagonalForm":
        return DiagonalForm(tuple(self.coeffs[i] for i in indices))

    def direct_sum(self, other: "DiagonalForm") -> "DiagonalForm":
        return DiagonalForm(self.coeffs + other.coeffs)

    def negative_index(self) -> int:
        """Index of the unique negative coefficient of a signature (n,1) form."""
        neg = [i for i, c in enumerate(self.coeffs) if c < 0]
        if len(neg) != 1:
            raise InvalidInputError(f"{self} does not have signature (n,1)")
        return neg[0]


def as_form(q) -> DiagonalForm:
    if isinstance(q, DiagonalForm):
        return q
    if isinstance(q, str):
        return DiagonalForm.parse(q)
    return DiagonalForm(tuple(q))


# ----------------------------------------------------------------- symbols

def hilbert_symbol(a: int, b: int, v) -> int:
    """Hilbert symbol (a, b)_v for nonzero integers a, b."""
    a, b = int(a), int(b)
    if a == 0 or b == 0:
        raise InvalidInputError("Hilbert symbol of zero")
    v = Place.of(v)
    if v.is_infinite:
        return -1 if (a < 0 and b < 0) else 1
    p = v.p
    alpha, u = valuation(a, p)
    beta, w = valuation(b, p)
    if p == 2:
        eps_u, eps_w = ((u - 1) // 2) % 2, ((w - 1) // 2) % 2
        om_u, om_w = ((u * u - 1) // 8) % 2, ((w * w - 1) // 8) % 2
        e = eps_u * eps_w + alpha * om_w + beta * om_u
        return -1 if e % 2 else 1
    sign = -1 if (alpha * beta * ((p - 1) // 2)) % 2 else 1
    lu = legendre_symbol(u, p) ** (beta % 2)
    lw = legendre_symbol(w, p) ** (alpha % 2)
    return sign * lu * lw


def hasse_invariant(q, v) -> int:
    """c_v(q) = product over i<j of (a_i, a_j)_v."""
    q = as_form(q)
    v = Place.of(v)
    out = 1
    for x, y in itertools.combinations(q.coeffs, 2):
        out *= hilbert_symbol(x, y, v)
    return out


def discriminant(q) -> int:
    """Squarefree class of the product of the coefficients (sign kept)."""
    q = as_form(q)
    prod = 1
    for c in q.coeffs:
        prod *= c
    return squarefree_part(prod)


def signature(q) -> tuple[int, int]:
    q = as_form(q)
    pos = sum(1 for c in q.coeffs if c > 0)
    return pos, q.rank - pos


def support_places(*forms) -> list[Place]:
    """2, the odd primes dividing some coefficient, and infinity."""
    primes = {2}
    for q in forms:
        for c in as_form(q).coeffs:
            primes.update(prime_factors(c))
    return [Place(p) for p in sorted(primes)] + [INF]


@dataclass(frozen=True)
class EquivalenceReport:
    equivalent: bool
    signature: tuple
    discriminant: tuple
    hasse: dict = field(default_factory=dict)
    mismatches: tuple = ()

    def __bool__(self):
        return self.equivalent

    def to_json(self) -> dict:
        return {
            "equivalent": self.equivalent,
            "signature": [list(map(str, s)) for s in self.signature],
            "discriminant": [str(d) for d in self.discriminant],
            "hasse": {str(k): list(v) for k, v in self.hasse.items()},
            "mismatches": list(self.mismatches),
        }


def rationally_equivalent(q1, q2) -> EquivalenceReport:
    """Hasse-Minkowski comparison of two forms of equal rank."""
    q1, q2 = as_form(q1), as_form(q2)
    if q1.rank != q2.rank:
        raise RankError(f"rank {q1.rank} vs {q2.rank}")
    sig = (signature(q1), signature(q2))
    disc = (discriminant(q1), discriminant(q2))
    mism = []
    if sig[0] != sig[1]:
        mism.append("signature")
    if disc[0] != disc[1]:
        mism.append("discriminant")
    hasse = {}
    for v in support_places(q1, q2):
        pair = (hasse_invariant(q1, v), hasse_invariant(q2, v))
        hasse[v] = pair
        if pair[0] != pair[1]:
            mism.append(f"hasse@{v}")
    return EquivalenceReport(not mism, sig, disc, hasse, tuple(mism))


# ---------------------------------------------------------------- isotropy

def is_square_padic(x: int, p: int) -> bool:
    """Whether the nonzero integer x is a square in Q_p."""
    v, u = valuation(x, p)
    if v % 2:
        return False
    if p == 2:
        return u % 8 == 1
    return legendre_symbol(u, p) == 1


def is_isotropic_local(q, v) -> bool:
    """Local isotropy by the rank-stratified discriminant/Hasse criteria."""
    q = as_form(q)
    if q.rank < 2:
        raise RankError("local isotropy needs rank >= 2")
    v = Place.of(v)
    if v.is_infinite:
        pos, neg = signature(q)
        return pos > 0 and neg > 0
    p = v.p
    n = q.rank
    d = 1
    for c in q.coeffs:
        d *= c
    eps = hasse_invariant(q, v)
    if n == 2:
        return is_square_padic(-d, p)
    if n == 3:
        return hilbert_symbol(-1, -d, v) == eps
    if n == 4:
        return (not is_square_padic(d, p)) or eps == hilbert_symbol(-1, -1, v)
    return True


_ORACLE_MAX_MODULUS = 1 << 22


def _cyclic_or_convolve(reach: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Indicator of {r + s : r in reach, s in values} in Z/M."""
    M = reach.size
    if not reach.any() or not values.any():
        return np.zeros(M, dtype=bool)
    if M <= 4096:
        out = np.zeros(M, dtype=bool)
        for s in np.flatnonzero(values):
            out |= np.roll(reach, int(s))
        return out
    f = np.fft.rfft(reach.astype(np.float64)) * np.fft.rfft(values.astype(np.float64))
    return np.fft.irfft(f, n=M) > 0.5


def _reduce_valuations(q: DiagonalForm, p: int) -> DiagonalForm:
    # a = p^(2m) b is Q_p-equivalent to b; scaling all of q by p keeps isotropy
    cs = []
    for c in q.coeffs:
        v, u = valuation(c, p)
        cs.append(u * p ** (v % 2))
    if 2 * sum(1 for c in cs if c % p == 0) > len(cs):
        cs = [c // p if c % p == 0 else c * p for c in cs]
    return DiagonalForm(tuple(cs))


def local_solvable_bruteforce(q, p: int, k: int | None = None) -> bool:
    """Oracle: does q have a primitive zero modulo p**k?

    With the default k = 1 + 2 max_i v_p(2 a_i) a primitive zero mod p**k lifts
    to Z_p by Hensel's lemma in a unit coordinate, so the answer is the exact
    local verdict.  In
    that mode the coefficients are first rescaled by even powers of p (and
    the whole form by p) to keep the modulus small; neither step changes
    isotropy over Q_p.
    The search is exhaustive over residues, organized as a reachability
    dynamic program over the coordinates.
    """
    q = as_form(q)
    if not is_prime(p):
        raise InvalidPlaceError(f"{p} is not a prime")
    if k is None:
        q = _reduce_valuations(q, p)
        k = 1 + 2 * max(valuation(2 * c, p)[0] for c in q.coeffs)
    M = p**k
    if M > _ORACLE_MAX_MODULUS:
        raise ValueError(f"oracle modulus {p}^{k} too large")
    xs = np.arange(M, dtype=np.int64)
    units = xs % p != 0
    reach_any = np.zeros(M, dtype=bool)
    reach_any[0] = True
    reach_unit = np.zeros(M, dtype=bool)
    sq = (xs * xs) % M
    for a in q.coeffs:
        vals = (sq * (a % M)) % M
        all_v = np.zeros(M, dtype=bool)
        all_v[vals] = True
        unit_v = np.zeros(M, dtype=bool)
        unit_v[vals[units]] = True
        new_unit = _cyclic_or_convolve(reach_unit, all_v) | _cyclic_or_convolve(reach_any, unit_v)
        reach_any = _cyclic_or_convolve(reach_any, all_v)
        reach_unit = new_unit
    return bool(reach_unit[0])


def _value_order(h: int) -> np.ndarray:
    out = [0]
    for t in range(1, h + 1):
        out += [t, -t]
    return np.array(out, dtype=np.int64)


def _height_hits(coeffs, h: int, chunk: int = 1 << 18):
    """First witness of height exactly h in the canonical scan order, or None.

    Order: colexicographic in the value order 0, 1, -1, 2, -2, ...; the last
    coordinate varies slowest.  Only vectors whose last nonzero entry is
    positive are considered.  For a fixed tail (x_1..x_{n-1}) the first
    coordinate is solved for directly, +r before -r.
    """
    n = len(coeffs)
    a0 = coeffs[0]
    rest = np.array(coeffs[1:], dtype=object if h * h * max(map(abs, coeffs)) * n > 2**60 else np.int64)
    vals = _value_order(h)
    base = 2 * h + 1
    total = base ** (n - 1)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        digits = np.unravel_index(idx, (base,) * (n - 1))  # first axis slowest = x_{n-1}
        tail = np.stack([vals[d] for d in digits[::-1]], axis=1)  # columns x_1..x_{n-1}
        # last nonzero coordinate positive
        sign = np.zeros(len(idx), dtype=np.int64)
        for j in range(n - 2, -1, -1):
            col = tail[:, j]
            sign = np.where(sign == 0, np.sign(col), sign)
        keep = sign > 0
        if not keep.any():
            continue
        tail = tail[keep]
        s = (tail.astype(rest.dtype) ** 2 * rest).sum(axis=1)
        num = -s
        ok = num % a0 == 0
        t = np.where(ok, num // a0, -1)
        ok &= t >= 0
        if not ok.any():
            continue
        cand = np.flatnonzero(ok)
        tmax = np.abs(tail[cand]).max(axis=1)
        for c, tm in zip(cand, tmax):
            tv = int(t[c])
            r = isqrt(tv)
            if r * r != tv:
                continue
            if max(r, int(tm)) != h:
                continue
            vec = (r,) + tuple(int(x) for x in tail[c])
            g = 0
            for x in vec:
                g = gcd(g, x)
            if g == 1:
                return vec
    return None


def find_isotropic_vector(q, bound: int = 1000, budget: int = 2_000_000):
    """Smallest-height primitive integer zero of q with max |x_i| <= bound.

    Scans heights 1, 2, ... in a fixed order and returns the first hit, or
    None.  ``budget`` caps the number of tail vectors examined.
    """
    q = as_form(q)
    if bound < 1:
        raise InvalidInputError("bound must be >= 1")
    pos, neg = signature(q)
    if pos == 0 or neg == 0:
        return None
    coeffs = q.coeffs
    n = q.rank
    if n == 1:
        return None
    spent = 0
    for h in range(1, bound + 1):
        spent += (2 * h + 1) ** (n - 1)
        if spent > budget:
            return None
        hit = _height_hits(coeffs, h)
        if hit is not None:
            return hit
    return None


@dataclass(frozen=True)
class IsotropyReport:
    isotropic: bool
    witness: tuple | None = None
    obstruction: Place | None = None
    local: dict = field(default_factory=dict)

    def __bool__(self):
        return self.isotropic

    def to_json(self) -> dict:
        return {
            "isotropic": self.isotropic,
            "witness": None if self.witness is None else [str(x) for x in self.witness],
            "obstruction": None if self.obstruction is None else str(self.obstruction),
            "local": {str(k): v for k, v in self.local.items()},
        }


def is_isotropic_global(q, bound: int = 1000, budget: int = 2_000_000) -> IsotropyReport:
    """Hasse-Minkowski isotropy test with an optional small witness."""
    q = as_form(q)
    if q.rank < 2:
        raise RankError("isotropy needs rank >= 2")
    local = {v: is_isotropic_local(q, v) for v in support_places(q)}
    bad = [v for v, ok in local.items() if not ok]
    if bad:
        return IsotropyReport(False, None, bad[0], local)
    witness = None
    if q.rank <= 5:
        witness = find_isotropic_vector(q, bound, budget)
    return IsotropyReport(True, witness, None, local)


# ---------------------------------------------------------- subform chains

@dataclass(frozen=True)
class ChainStep:
    form: DiagonalForm
    indices: tuple[int, ...]
    deleted: int
    isotropic: bool


@dataclass(frozen=True)
class SubformChain:
    source: DiagonalForm
    steps: tuple[ChainStep, ...]
    complete: bool
    failure: str | None = None

    def to_json(self) -> dict:
        return {
            "source": [str(c) for c in self.source.coeffs],
            "steps": [
                {
                    "form": [str(c) for c in s.form.coeffs],
                    "indices": list(s.indices),
                    "deleted": s.deleted,
                    "isotropic": s.isotropic,
                }
                for s in self.steps
            ],
            "complete": self.complete,
            "failure": self.failure,
        }


def subform_chain(q) -> SubformChain:
    """Delete positive coefficients one at a time down to signature (3,1).

    Every intermediate form must be isotropic; the last one is chosen
    isotropic when some deletion allows it.  Candidates are tried from the
    highest index down, and the first complete chain wins.
    """
    q = as_form(q)
    pos, neg = signature(q)
    if neg != 1 or pos < 4:
        raise ChainError(f"{q} must have signature (n,1) with n >= 4")

    def iso(indices):
        return is_isotropic_global(q.subform(indices), bound=1, budget=1).isotropic

    def search(indices):
        if len(indices) == 4:
            return []
        for i in sorted((i for i in indices if q.coeffs[i] > 0), reverse=True):
            nxt = tuple(j for j in indices if j != i)
            if not iso(nxt):
                continue
            tail = search(nxt)
            if tail is not None:
                return [(nxt, i)] + tail
        return None

    full = tuple(range(q.rank))
    found = search(full)
    if found is not None:
        steps = tuple(ChainStep(q.subform(ix), ix, d, True) for ix, d in found)
        return SubformChain(q, steps, True)
    # report the longest isotropic prefix and where it stopped
    steps = []
    cur = full
    while len(cur) > 4:
        i = max(j for j in cur if q.coeffs[j] > 0)
        nxt = tuple(j for j in cur if j != i)
        ok = iso(nxt)
        steps.append(ChainStep(q.subform(nxt), nxt, i, ok))
        cur = nxt
        if not ok:
            break
    return SubformChain(q, tuple(steps), False, f"no isotropic subform of rank {len(cur)}")
