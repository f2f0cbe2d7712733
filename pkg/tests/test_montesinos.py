import itertools

import pytest

from cuspfold.arith import legendre_symbol
from cuspfold.montesinos import (
    READINGS,
    MontesinosParams,
    MontesinosValidationError,
    hasse_places,
    montesinos_form,
    montesinos_hasse_table,
    montesinos_report,
    replacement_prime,
    search_pairs,
    select_isotropic_subform,
)
from cuspfold.qforms import Place, hasse_invariant, is_isotropic_global, rationally_equivalent, signature

from oracles import hasse_by_definition

# smallest valid pair per (S mod 4, a mod 4), found by search_pairs and frozen
SMALLEST = {
    (1, 1): (21, 37, (-1, 1, 1, 777, 37)),
    (1, 3): (5, 3, (-1, 1, 1, 15, 3)),
    (3, 1): (3, 13, (1, 1, 1, 39, -13)),
    (3, 3): (15, 7, (1, 1, 1, 105, -7)),
}
REPLACEMENTS = {(15, 7): 67, (15, 103): 43, (35, 23): 163, (35, 127): 547, (39, 31): 499}


def test_smallest_pairs_per_case():
    seen = {}
    for p in search_pairs(S_max=60, a_max=60):
        seen.setdefault((p.S % 4, p.a % 4), p)
    for key, (S, a, coeffs) in SMALLEST.items():
        assert (seen[key].S, seen[key].a) == (S, a)
        assert montesinos_form(MontesinosParams(S, a)).coeffs == coeffs
        assert signature(montesinos_form(MontesinosParams(S, a))) == (4, 1)


def test_validation_errors():
    with pytest.raises(MontesinosValidationError):
        montesinos_form(MontesinosParams(4, 3))
    with pytest.raises(MontesinosValidationError):
        montesinos_form(MontesinosParams(9, 7))  # repeated prime
    with pytest.raises(ValueError):
        MontesinosParams(5, 3, "bogus")


def test_default_reading_is_neg_a_over_p():
    for p in search_pairs(S_max=80, a_max=80):
        assert all(legendre_symbol(-p.a, q) == -1 for q in p.primes)
    assert set(READINGS) >= {"neg_a_over_p", "a_over_p", "p_over_a"}


def test_hasse_examples_from_table_rows():
    S, a, _ = SMALLEST[(3, 3)]
    q = montesinos_form(MontesinosParams(S, a))
    for p in (3, 5):
        assert hasse_invariant(q, p) == -1
    S, a, _ = SMALLEST[(1, 1)]
    assert hasse_invariant(montesinos_form(MontesinosParams(S, a)), 2) == 1


def test_corrected_table_matches_pairwise_products():
    pairs = list(itertools.islice(search_pairs(S_max=150, a_max=150), 120))
    assert {(p.S % 4, p.a % 4) for p in pairs} == set(SMALLEST)
    for p in pairs:
        q = montesinos_form(p)
        for v in hasse_places(p) + [Place(x) for x in (11, 13, 17, 19) if p.S % x and p.a != x]:
            assert hasse_invariant(q, v) == montesinos_hasse_table(p, v, corrected=True)


def test_literal_table_defect_is_confined_to_one_case():
    for p in itertools.islice(search_pairs(S_max=150, a_max=150), 120):
        q = montesinos_form(p)
        bad = [v for v in hasse_places(p) if hasse_invariant(q, v) != montesinos_hasse_table(p, v)]
        if p.S % 4 == 1 and p.a % 4 == 3:
            assert bad == [Place(2), Place(p.a)]
        else:
            assert bad == []


def test_hasse_of_smallest_pair_by_definition():
    # independent check of the mismatching case with brute-force Hilbert symbols
    S, a, coeffs = SMALLEST[(1, 3)]
    assert hasse_by_definition(coeffs, 2) == -1
    assert hasse_by_definition(coeffs, 3) == 1
    assert hasse_by_definition(coeffs, 5) == -1


def test_report_records_both_discriminant_signs():
    rep = montesinos_report(MontesinosParams(15, 7))
    assert rep.discriminant_raw == -15 and rep.discriminant_negated == 15
    js = rep.to_json()
    assert js["discriminant_raw"] == "-15" and js["S"] == "15"


def test_replacement_prime_fixtures():
    for (S, a), a2 in REPLACEMENTS.items():
        assert replacement_prime(S, a) == a2
        assert a2 % 8 == 3 and a2 % S == a % S
        p2 = MontesinosParams(S, a2)
        assert p2.is_valid()
        assert all(legendre_symbol(-a2, q) == -1 for q in p2.primes)
        assert rationally_equivalent(montesinos_form(MontesinosParams(S, a)), montesinos_form(p2))


def test_replacement_rejects_a_3_mod_8():
    assert MontesinosParams(15, 43).is_valid()
    with pytest.raises(MontesinosValidationError):
        replacement_prime(15, 43)


def test_subform_cases():
    sel = select_isotropic_subform(MontesinosParams(5, 3))
    assert sel.f.coeffs == (-1, 1, 1, 3) and sel.witness == (1, 1, 0, 0)
    assert sel.indices == (0, 1, 2, 4)
    sel = select_isotropic_subform(MontesinosParams(15, 43))
    assert sel.f.coeffs == (1, 1, 1, -43)
    assert sel.f.value(sel.witness) == 0
    sel = select_isotropic_subform(MontesinosParams(15, 7))
    assert sel.f.coeffs == (1, 1, 1, -67) and sel.replaced_from == 7
    assert sel.equivalence.equivalent
    assert is_isotropic_global(sel.f, bound=1).isotropic
