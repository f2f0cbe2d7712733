"""From Montesinos data (S, a) to a certified folded double, summarised."""

import sys

from cuspfold.pipeline import StageError, run_pipeline

S, a = (int(x) for x in sys.argv[1:3]) if len(sys.argv) > 2 else (5, 3)

try:
    rep = run_pipeline(S=S, a=a, L=3, E=1, B=1)
except StageError as exc:
    sys.exit(f"stage {exc.stage} failed: {exc.error}")

m = rep["montesinos"]
print(f"q = <{', '.join(m['form'])}>, discriminant {m['discriminant_raw']}")
print(f"subform {rep['subform']['f']} on {rep['subform']['indices']}, witness {rep['subform']['witness']}")
print(f"chain: {len(rep['chain']['steps'])} step(s), complete = {rep['chain']['complete']}")
print(f"stable-letter powers {rep['powers']}, levels {rep['sweep']['levels']}")
sw = rep["sweep"]
print(f"sweep over {sw['words']} words: passed = {sw['passed']}, "
      f"min length margin {sw['certificates']['minLengthMargin']}")
print("invariant hyperplanes with a stable letter:", rep["density"]["withStableLetter"]["hyperplaneInvariantVectors"])
