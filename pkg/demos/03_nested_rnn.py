"""
The nested RNN and its CONCAT special case
==========================================

Each stay's first step reads the previous stay's last hidden state through
its own weights R, r. Tying R = U and r = b gives back one long chain, which
is exactly the CONCAT model.
"""

import numpy as np

from nestseq.cohort import Hospitalization, Measurement, Patient
from nestseq.models import RnnParams, nest_forward, rnn_forward
from nestseq.numerics import SeededRng
from nestseq.structures import build_concat, build_nest

stays = [[1.0, 1.1, 1.3], [1.6], [1.2, 1.0]]
pat = Patient("demo", tuple(
    Hospitalization(tuple(Measurement(v) for v in vals), lab)
    for vals, lab in zip(stays, [False, True, None])))

p = RnnParams.init(SeededRng(0), 5, 1, 0.6, nested=True)
logits, trace = nest_forward(build_nest(pat), p)
print("NEST logits per stay:", np.round(logits, 4))
print("hidden state shapes:", [h.shape for h in trace.hidden])

tied = RnnParams(p.W, p.U, p.V, p.b, p.c, p.U.copy(), p.b.copy())
nest_tied, _ = nest_forward(build_nest(pat), tied)
concat = [rnn_forward(s, tied)[0] for s in build_concat(pat)]
print("tied NEST :", np.round(nest_tied[:2], 6))
print("CONCAT    :", np.round(concat, 6))
print("max gap   :", max(abs(nest_tied[i] - c) for i, c in enumerate(concat)))
