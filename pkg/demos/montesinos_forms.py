"""Montesinos forms: Hasse invariants, the closed-form table and prime replacement."""

import itertools

from cuspfold.montesinos import (
    MontesinosParams,
    hasse_places,
    montesinos_form,
    montesinos_hasse_table,
    replacement_prime,
    search_pairs,
    select_isotropic_subform,
)
from cuspfold.qforms import hasse_invariant, rationally_equivalent, signature

# first valid pair in each residue class of (S, a) mod 4
first = {}
for p in itertools.islice(search_pairs(S_max=60, a_max=60), 200):
    first.setdefault((p.S % 4, p.a % 4), p)

for key in sorted(first):
    p = first[key]
    q = montesinos_form(p)
    print(f"S={p.S:3d} a={p.a:3d}  (S,a) mod 4 = {key}  q = {q}  signature {signature(q)}")
    for v in hasse_places(p):
        c = hasse_invariant(q, v)
        lit = montesinos_hasse_table(p, v)
        fixed = montesinos_hasse_table(p, v, corrected=True)
        mark = "" if c == lit else "   <- literal table differs"
        print(f"    c_{str(v):4s} = {c:+d}   table {lit:+d}   corrected {fixed:+d}{mark}")

# a = 7 mod 8 is replaced by a prime a' = 3 mod 8 in the same residue class mod S
print()
for S, a in [(15, 7), (35, 23), (39, 31)]:
    a2 = replacement_prime(S, a)
    q1, q2 = montesinos_form(MontesinosParams(S, a)), montesinos_form(MontesinosParams(S, a2))
    print(f"S={S} a={a} -> a'={a2}   equivalent over Q: {bool(rationally_equivalent(q1, q2))}")

# the isotropic rank-4 subform used to build the cusp
print()
for S, a in [(5, 3), (15, 43), (15, 7)]:
    sel = select_isotropic_subform(MontesinosParams(S, a))
    print(f"S={S} a={a}: f = {sel.f} on coordinates {sel.indices}, witness {sel.witness}")
