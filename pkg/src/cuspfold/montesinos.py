"""The Montesinos family of signature (4,1) forms and prime replacement."""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

from .arith import crt_pair, is_prime, legendre_symbol, prime_factors
from .qforms import (
    INF,
    DiagonalForm,
    EquivalenceReport,
    Place,
    discriminant,
    find_isotropic_vector,
    hasse_invariant,
    rationally_equivalent,
    support_places,
)

READINGS = ("neg_a_over_p", "a_over_p", "p_over_a")
DEFAULT_READING = "neg_a_over_p"

# f sits at these coordinates of q in both cases
SUBFORM_INDICES = (0, 1, 2, 4)


class MontesinosValidationError(ValueError):
    def __init__(self, failed):
        self.failed = tuple(failed)
        super().__init__("violated: " + "; ".join(self.failed))


class SearchExhaustedError(RuntimeError):
    pass


def _condition_symbol(a: int, p: int, reading: str) -> int:
    if reading == "neg_a_over_p":
        return legendre_symbol(-a, p)
    if reading == "a_over_p":
        return legendre_symbol(a, p)
    if reading == "p_over_a":
        return legendre_symbol(p, a)
    raise ValueError(f"unknown reading {reading!r}")


@dataclass(frozen=True)
class MontesinosParams:
    S: int
    a: int
    reading: str = DEFAULT_READING

    def __post_init__(self):
        if self.reading not in READINGS:
            raise ValueError(f"unknown reading {self.reading!r}")

    @property
    def primes(self) -> list[int]:
        return prime_factors(self.S)

    @property
    def n_primes(self) -> int:
        return len(self.primes)

    @property
    def case(self) -> int:
        """S mod 4 as +1 or -1."""
        return 1 if self.S % 4 == 1 else -1

    def conditions(self) -> list[tuple[str, bool]]:
        S, a = self.S, self.a
        out = []
        s_ok = S > 1 and S % 2 == 1
        ps = prime_factors(S) if S > 1 else []
        if s_ok:
            prod = 1
            for p in ps:
                prod *= p
            s_ok = prod == S
        out.append(("S is a product of distinct odd primes", s_ok))
        a_ok = a > 2 and is_prime(a)
        out.append(("a is an odd prime", a_ok))
        out.append(("a does not divide S", a_ok and S % a != 0))
        if s_ok and a_ok and S % a:
            leg = all(_condition_symbol(a, p, self.reading) == -1 for p in ps)
        else:
            leg = False
        out.append((f"Legendre condition ({self.reading}) = -1 at every p | S", leg))
        if s_ok and a_ok:
            n = len(ps)
            e = n if S % 4 == 1 else n + 1
            want = 1 if e % 2 == 0 else 3
            out.append(("a = (-1)^n mod 4 coupling with S mod 4", a % 4 == want))
        else:
            out.append(("a = (-1)^n mod 4 coupling with S mod 4", False))
        return out

    def failed(self) -> list[str]:
        return [name for name, ok in self.conditions() if not ok]

    def is_valid(self) -> bool:
        return not self.failed()

    def validate(self) -> "MontesinosParams":
        bad = self.failed()
        if bad:
            raise MontesinosValidationError(bad)
        return self

    def with_a(self, a: int) -> "MontesinosParams":
        return MontesinosParams(self.S, a, self.reading)


def montesinos_coeffs(S: int, a: int) -> tuple[int, ...]:
    if S % 4 == 1:
        return (-1, 1, 1, a * S, a)
    return (1, 1, 1, a * S, -a)


def montesinos_form(params: MontesinosParams) -> DiagonalForm:
    """<-1,1,1,aS,a> for S = 1 mod 4, <1,1,1,aS,-a> for S = -1 mod 4."""
    params.validate()
    return DiagonalForm(montesinos_coeffs(params.S, params.a))


@dataclass(frozen=True)
class MontesinosReport:
    params: MontesinosParams
    form: DiagonalForm
    conditions: tuple
    discriminant_raw: int
    discriminant_negated: int
    hasse: dict

    def to_json(self) -> dict:
        return {
            "S": str(self.params.S),
            "a": str(self.params.a),
            "reading": self.params.reading,
            "primes": [str(p) for p in self.params.primes],
            "case": "S=1 mod 4" if self.params.case == 1 else "S=-1 mod 4",
            "form": [str(c) for c in self.form.coeffs],
            "conditions": {name: ok for name, ok in self.conditions},
            "discriminant_raw": str(self.discriminant_raw),
            "discriminant_negated": str(self.discriminant_negated),
            "hasse": {str(v): c for v, c in self.hasse.items()},
        }


def montesinos_report(params: MontesinosParams) -> MontesinosReport:
    q = montesinos_form(params)
    d = discriminant(q)
    hasse = {v: hasse_invariant(q, v) for v in support_places(q)}
    return MontesinosReport(params, q, tuple(params.conditions()), d, -d, hasse)


def montesinos_hasse_table(params: MontesinosParams, v, corrected: bool = False) -> int:
    """Closed-form Hasse invariant of the Montesinos form at the place v.

    The literal table has rows p = 2, p = a, p | S and everything else.  In
    the case S = 1, a = 3 (mod 4) the rows p = 2 and p = a disagree with the
    pairwise product; ``corrected=True`` swaps them.
    """
    v = Place.of(v)
    S, a = params.S, params.a
    s1 = S % 4 == 1
    a1 = a % 4 == 1
    if v.is_infinite:
        return 1
    p = v.p
    if p == 2:
        if s1:
            return -1 if (corrected and not a1) else 1
        return -1 if a1 else 1
    if p == a:
        if s1:
            if corrected:
                return 1
            return 1 if a1 else -1
        return 1
    if S % p == 0:
        return -1
    return 1


def _three_squares(m: int):
    for x in range(isqrt(m), -1, -1):
        r = m - x * x
        for y in range(min(x, isqrt(r)), -1, -1):
            z2 = r - y * y
            z = isqrt(z2)
            if z * z == z2 and z <= y:
                return (x, y, z)
    return None


def replacement_prime(S: int, a: int, cap: int = 10**7, reading: str = DEFAULT_READING) -> int:
    """Least prime a' = n mod 8S with n = CRT(a mod S, 3 mod 8) keeping (S, a') valid."""
    params = MontesinosParams(S, a, reading).validate()
    if S % 4 != 3:
        raise MontesinosValidationError(["S = -1 mod 4 required for replacement"])
    if a % 8 != 7:
        raise MontesinosValidationError(["a = 7 mod 8 required for replacement"])
    n0 = crt_pair(a % S, S, 3, 8)
    step = 8 * S
    cand = n0
    for _ in range(cap):
        if cand > 2 and is_prime(cand) and params.with_a(cand).is_valid():
            return cand
        cand += step
    raise SearchExhaustedError(f"no replacement prime among {cap} candidates")


@dataclass(frozen=True)
class SubformSelection:
    f: DiagonalForm
    indices: tuple[int, ...]
    witness: tuple[int, ...]
    form: DiagonalForm
    params: MontesinosParams
    replaced_from: int | None = None
    equivalence: EquivalenceReport | None = None

    def to_json(self) -> dict:
        return {
            "f": [str(c) for c in self.f.coeffs],
            "indices": list(self.indices),
            "witness": [str(x) for x in self.witness],
            "form": [str(c) for c in self.form.coeffs],
            "a": str(self.params.a),
            "replaced_from": None if self.replaced_from is None else str(self.replaced_from),
            "equivalence": None if self.equivalence is None else self.equivalence.to_json(),
        }


def select_isotropic_subform(params: MontesinosParams, cap: int = 10**7) -> SubformSelection:
    """Pick an isotropic rank-4 subform of the Montesinos form, with witness."""
    q = montesinos_form(params)
    if params.case == 1:
        f = q.subform(SUBFORM_INDICES)
        return SubformSelection(f, SUBFORM_INDICES, (1, 1, 0, 0), q, params)
    replaced_from = None
    equivalence = None
    use = params
    if params.a % 8 == 7:
        a2 = replacement_prime(params.S, params.a, cap, params.reading)
        use = params.with_a(a2)
        replaced_from = params.a
        q2 = montesinos_form(use)
        equivalence = rationally_equivalent(q, q2)
        q = q2
    f = q.subform(SUBFORM_INDICES)
    witness = find_isotropic_vector(f, bound=1000, budget=200_000)
    if witness is None:
        x, y, z = _three_squares(use.a)
        witness = (x, y, z, 1)
    assert f.value(witness) == 0
    return SubformSelection(f, SUBFORM_INDICES, tuple(witness), q, use, replaced_from, equivalence)


def _squarefree_odd(S: int) -> bool:
    if S < 3 or S % 2 == 0:
        return False
    prod = 1
    for p in prime_factors(S):
        prod *= p
    return prod == S


def search_pairs(reading: str = DEFAULT_READING, S_max: int = 2000, a_max: int = 2000,
                 max_primes: int | None = None):
    """Valid (S, a) pairs in increasing (S, a) order."""
    odd_primes = [p for p in range(3, a_max + 1, 2) if is_prime(p)]
    for S in range(3, S_max + 1, 2):
        if not _squarefree_odd(S):
            continue
        if max_primes is not None and len(prime_factors(S)) > max_primes:
            continue
        for a in odd_primes:
            params = MontesinosParams(S, a, reading)
            if params.is_valid():
                yield params


def hasse_places(params: MontesinosParams) -> list[Place]:
    return [Place(2), Place(params.a)] + [Place(p) for p in params.primes] + [INF]
