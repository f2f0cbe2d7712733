import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cuspfold.grouppres import FaithfulnessViolation, count_reduced_words
from cuspfold.lattice import ExactMatrix, corner_embed, eichler_transvection
from cuspfold.pipeline import (
    StageError,
    assign_stable_letters,
    config_json,
    dumps_report,
    faithfulness_sweep,
    hyperplane_invariance_check,
    load_config,
    modp_nontriviality,
    run_pipeline,
    sample_reduced_words,
)
from cuspfold.qforms import DiagonalForm

from oracles import invariant_hyperplanes_bruteforce

Q4 = DiagonalForm((-1, 1, 1, 1))
Q5 = DiagonalForm((-1, 1, 1, 1, 1))

# frozen from a full run of the windowed engine on T1
MIN_LENGTH_MARGIN = "0.0026552817849152914011"
MIN_ANGLE_MARGIN = "1.4714361258670553437"


# ------------------------------------------------------- stable letter table

def test_assignment_examples():
    a = assign_stable_letters(5, 4)
    assert a.table == {0: (2, 0), 1: (3, 1), 2: (3, 2), 3: (2, 3)}
    assert a.flags == ("t2: p(4,2) clamped to p(3,2)",)
    a = assign_stable_letters(4, 2)
    assert a.table == {0: (2, 0), 1: (2, 1)}
    assert a.flags == ("t1: p(3,1) clamped to p(2,1)",)
    lit = assign_stable_letters(5, 4, mode="literal")
    assert lit.table[2] == (4, 2) and lit.flags
    assert lit.to_json()["table"]["t2"] == "p(4,2)"


def test_assignment_errors():
    with pytest.raises(ValueError):
        assign_stable_letters(6, 3)
    with pytest.raises(ValueError):
        assign_stable_letters(5, 4, mode="other")
    with pytest.raises(KeyError, match=r"p\(3,1\)"):
        assign_stable_letters(5, 3, chains={0: {2}, 1: {2}, 2: {2}})
    assign_stable_letters(5, 3, chains={0: {2}, 1: {3}, 2: {3}})


# ------------------------------------------------------------------ density

def _gens_4d():
    g1 = eichler_transvection(Q4, (1, 1, 0, 0), (0, 0, 1, 0))
    g2 = eichler_transvection(Q4, (1, -1, 0, 0), (0, 0, 1, 0))
    return [corner_embed(g1), corner_embed(g2)]


def test_density_corner_block():
    rep = hyperplane_invariance_check(_gens_4d(), Q5, (0, 1, 2, 3))
    assert rep.contains_corner_block and not rep.degenerate
    assert set(rep.hyperplane_vectors) == {(0, 0, 0, 0, 1), (0, 0, 0, 1, 0)}
    assert rep.to_json()["containsCornerBlock"] is True


def test_density_t1(t1):
    base = hyperplane_invariance_check(t1.base_generators, Q5, (0, 1, 2, 3))
    assert base.hyperplane_vectors == ((0, 0, 0, 0, 1),)
    full = hyperplane_invariance_check(list(t1.base_generators) + [t1.stable_letters[0]], Q5, (0, 1, 2, 3))
    assert full.hyperplane_vectors == ()


def test_density_degenerate_and_invalid():
    rep = hyperplane_invariance_check([ExactMatrix.identity(5)], Q5)
    assert rep.degenerate and len(rep.hyperplane_vectors) == 4
    with pytest.raises(ValueError):
        hyperplane_invariance_check([ExactMatrix.diag([2, 1, 1, 1, 1])], Q5)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([(1, 1, 0, 0), (1, -1, 0, 0), (1, 0, 1, 0), (1, 0, 0, 1)]),
                          st.integers(0, 2), st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=3))
def test_density_agrees_with_bruteforce_nullspaces(specs):
    gens = []
    for u, a, b, c in specs:
        # v orthogonal to u with coordinates built from (a, b, c)
        v = [0, 0, 0, 0]
        free = [k for k in range(1, 4) if u[k] == 0]
        v[free[0]], v[free[1]] = b, c
        k = next(k for k in range(1, 4) if u[k] != 0)
        v[0], v[k] = a * u[0], a * u[k]
        gens.append(corner_embed(eichler_transvection(Q4, u, tuple(v))))
    rep = hyperplane_invariance_check(gens, Q5, (0, 1, 2, 3))
    brute = invariant_hyperplanes_bruteforce(gens, Q5.coeffs)
    # the brute force finds a positive vector for every sign pattern that has one
    assert bool(rep.hyperplane_vectors) == bool(brute)
    for v in brute:
        assert _span_contains(rep.hyperplane_vectors, v)


def _span_contains(vectors, v):
    import sympy

    if not vectors:
        return False
    M = sympy.Matrix([list(w) for w in vectors]).T
    return M.rank() == M.row_join(sympy.Matrix(list(v))).rank()


# ------------------------------------------------------------------- sweeps

def test_sweep_small_bounds(t1):
    r = faithfulness_sweep(t1, 1, 1, 1)
    assert r["passed"] and r["words"] == "5" and r["certificates"]["words"] == "0"
    r = faithfulness_sweep(t1, 3, 1, 1)
    assert r["passed"] and r["words"] == "105"
    assert r["nontriviality"]["residueHits"] == "0" and r["nontriviality"]["checked"] == "104"
    assert r["certificates"]["minLengthMargin"] == MIN_LENGTH_MARGIN
    assert r["certificates"]["minAngleMargin"] == MIN_ANGLE_MARGIN
    assert r["certificates"]["sampleAgreeing"] == r["certificates"]["sampleChecked"]


@pytest.mark.parametrize("L,E,B", [(3, 1, 1), (3, 2, 1), (5, 1, 1)])
def test_literal_and_windowed_engines_agree(t1, L, E, B):
    win = faithfulness_sweep(t1, L, E, B, engine="windowed")
    lit = faithfulness_sweep(t1, L, E, B, engine="literal")
    assert win["passed"] and lit["passed"]
    assert win["words"] == lit["words"] == str(count_reduced_words(t1, L, E, B))
    assert win["nontriviality"]["checked"] == lit["nontriviality"]["checked"]
    for key in ("minLengthMargin", "minAngleMargin"):
        assert abs(float(win["certificates"][key]) - float(lit["certificates"][key])) < 1e-15


def test_modp_batch_counts(t1):
    r = modp_nontriviality(t1, 5, 1, 1)
    assert r["violations"] == [] and r["residueHits"] == 0
    # words with l = 1 are checked exactly, the batch covers l >= 2
    assert r["checked"] == count_reduced_words(t1, 5, 1, 1) - count_reduced_words(t1, 1, 1, 1)


def test_sampled_words_are_reduced_and_reproducible(t1):
    a = sample_reduced_words(t1, 5, 3, 3, 20, seed=7)
    b = sample_reduced_words(t1, 5, 3, 3, 20, seed=7)
    assert a == b and len(a) == 20
    from cuspfold.grouppres import britton_reduce

    assert all(britton_reduce(w, t1) == w for w in a)


def test_sweep_raises_on_exact_identity(t1):
    # a config whose stable letter commutes with every base letter makes t0 m t0^-1 m^-1 trivial
    data = t1.to_json()
    data["stableLetters"][0] = ExactMatrix.identity(5).to_json()
    from cuspfold.grouppres import GroupConfig

    bad = GroupConfig.from_json(data)
    with pytest.raises(FaithfulnessViolation):
        faithfulness_sweep(bad, 5, 1, 1, engine="literal")


# ----------------------------------------------------------------- pipeline

def test_run_pipeline_toy():
    rep = run_pipeline(toy="T1", L=3, E=1, B=1)
    assert rep["sweep"]["passed"]
    assert rep["powers"] == ["321", "321"]
    assert rep["density"]["withStableLetter"]["hyperplaneInvariantVectors"] == []
    assert rep["presentation"]["kind"] == "FM"
    assert set(rep) >= {"input", "config", "presentation", "stableLetters", "powers", "sweep", "density"}


def test_run_pipeline_montesinos():
    rep = run_pipeline(S=5, a=3, L=3, E=1, B=1)
    assert rep["subform"]["indices"] == [0, 1, 2, 4]
    assert rep["sweep"]["passed"]
    assert rep["input"]["reading"] == "neg_a_over_p"


def test_run_pipeline_invalid_input_is_tagged():
    with pytest.raises(StageError) as info:
        run_pipeline(S=4, a=3)
    assert info.value.stage == "montesinos"
    with pytest.raises(ValueError):
        run_pipeline()


def test_run_pipeline_is_deterministic():
    a = dumps_report(run_pipeline(toy="T1", L=3, E=1, B=1))
    b = dumps_report(run_pipeline(toy="T1", L=3, E=1, B=1))
    assert a == b


def test_word_count_grows_with_bounds(t1):
    counts = [int(faithfulness_sweep(t1, L, 1, 1)["words"]) for L in (1, 3, 5)]
    assert counts == sorted(counts) and len(set(counts)) == 3


def test_config_round_trip(t1, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_json(t1, 6.0, 256, 3, 1, 1)))
    cfg, opts = load_config(str(path))
    assert opts == {"D": 6.0, "precisionBits": 256, "L": 3, "E": 1, "B": 1}
    assert cfg.stable_letters == t1.stable_letters
    assert cfg.levels == {0: Fraction(1, 32), 1: Fraction(1, 32)}
