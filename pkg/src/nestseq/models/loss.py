import math


def bce_loss(logit, label):
    """Binary cross-entropy of ``sigmoid(logit)`` against ``label``.

    Written as ``max(y, 0) - y*l + log1p(exp(-|y|))`` so it never overflows.
    """
    y = float(logit)
    l = float(label)
    return max(y, 0.0) - y * l + math.log1p(math.exp(-abs(y)))
