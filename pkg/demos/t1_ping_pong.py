"""The toy configuration T1: horoball levels, stable-letter powers and one certificate.

Run with an argument ``full`` to sweep every reduced word at L=5, E=3, B=3
(about a minute).
"""

import sys

from cuspfold.grouppres import BaseSyllable, StableSyllable, Word, count_reduced_words, folded_presentation
from cuspfold.hypgeom import build_broken_geodesic, check_certificate
from cuspfold.pipeline import faithfulness_sweep, hyperplane_invariance_check
from cuspfold.toys import toy_t1

cfg = toy_t1(2)
print(f"form {cfg.form}, base letters {cfg.base_names}, subform on {cfg.subform_indices}")
print(f"horoball levels {dict((k, str(v)) for k, v in cfg.levels.items())}, stable powers {cfg.stable_powers}")

pres = folded_presentation(cfg)
print("folded double:", ", ".join(pres.generators), "with relators", ", ".join(str(r) for r in pres.relators))

# b t0 a t0^-2 b : two visits to the same cusp, separated by a letter outside its cusp group
w = Word.of([BaseSyllable((2,)), StableSyllable(0, 1), BaseSyllable((1, 2)), StableSyllable(0, -2), BaseSyllable((2,))])
bg = build_broken_geodesic(w, cfg, cfg.levels)
cert = check_certificate(bg, 6.0)
print(f"\nword {w}: l = {bg.ell}, {cert.segment_count} segments, pass = {cert.passed}")
for seg, d in zip(bg.segments, cert.lengths):
    print(f"    {seg.kind:6s} length {float(d):.6f}")
for k, a in enumerate(cert.angles):
    print(f"    joint {k} angle {float(a):.6f}")

base = hyperplane_invariance_check(cfg.base_generators, cfg.form, cfg.subform_indices)
full = hyperplane_invariance_check(list(cfg.base_generators) + [cfg.stable_letters[0]], cfg.form, cfg.subform_indices)
print(f"\ninvariant hyperplanes: base group {list(base.hyperplane_vectors)}, with t0 {list(full.hyperplane_vectors)}")

L, E, B = (5, 3, 3) if sys.argv[1:] == ["full"] else (3, 3, 2)
print(f"\nsweeping {count_reduced_words(cfg, L, E, B)} words at L={L}, E={E}, B={B}")
rep = faithfulness_sweep(cfg, L, E, B)
print("passed:", rep["passed"], " margins:", rep["certificates"]["minLengthMargin"],
      rep["certificates"]["minAngleMargin"])
