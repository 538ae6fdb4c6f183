"""
Checking hand-written gradients
===============================

Compare backprop against central finite differences for the three models,
then corrupt one gradient to watch the check fail.
"""

from nestseq.models import (
    analytic_gradients,
    finite_difference_gradients,
    relative_errors,
)
from nestseq.models.gradcheck import gradcheck_suite, random_case
from nestseq.numerics import SeededRng

rng = SeededRng(3)
p, x, y = random_case("NEST", rng, hidden=(3,), dims=(1,), max_len=4, max_hosp=3)
print("NEST patient with", len(x), "stays, labels", y)
errs = relative_errors(analytic_gradients("NEST", x, y, p), finite_difference_gradients("NEST", x, y, p))
for k, e in errs.items():
    print(f"  d{k}: relative error {e:.2e}")

res = gradcheck_suite(n_cases=20, seed=0)
for model, r in res.items():
    print(model, "worst", f"{max(r['worst'].values()):.1e}", "failures", len(r["failures"]))

# a deliberately broken backward pass is caught on every case
bad = gradcheck_suite(n_cases=5, seed=0, corrupt=True)
print({m: len(r["failures"]) for m, r in bad.items()})
