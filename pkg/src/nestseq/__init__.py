"""Next-hospitalization AKI prediction from serum-creatinine sequences.

MLP, many-to-one RNN and nested RNN models with hand-written backprop,
MARKOV/CONCAT/NEST input structures, a synthetic cohort generator and the
multi-trial training protocol.
"""
__version__ = "0.1.0"
