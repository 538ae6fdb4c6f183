import math

import numpy as np
import pytest
from conftest import make_patient
from hypothesis import given, settings
from hypothesis import strategies as st

from nestseq.models import (
    MlpParams,
    ModelError,
    RnnParams,
    analytic_gradients,
    bce_loss,
    finite_difference_gradients,
    load_params,
    mlp_backward,
    mlp_forward,
    nest_backward,
    nest_forward,
    nest_loss,
    numerical_gradient,
    relative_errors,
    rnn_backward,
    rnn_forward,
    save_params,
)
from nestseq.models.gradcheck import gradcheck_suite, random_case
from nestseq.numerics import SeededRng
from nestseq.structures import build_concat, build_nest


def scalar_rnn(seq, W, U, b, V, c):
    """Independent H=D=1 recurrence with math.tanh."""
    h = 0.0
    for m in seq:
        h = math.tanh(W * m + U * h + b)
    return V * h + c


# -- plain RNN ---------------------------------------------------------------

def test_rnn_forward_examples():
    y, tr = rnn_forward([0.3, -1.0, 2.0], RnnParams.zeros(4))
    assert y == 0.0 and tr.probs[0] == 0.5
    p = RnnParams([[1.0]], [[0.0]], [[1.0]], [0.0], 0.0)
    assert rnn_forward([0.5], p)[0] == math.tanh(0.5)
    p = RnnParams([[1.0]], [[0.5]], [[2.0]], [0.0], 0.0)
    expected = scalar_rnn([0.5, 1.0], 1.0, 0.5, 0.0, 2.0, 0.0)
    assert expected == 2 * math.tanh(1.0 + 0.5 * math.tanh(0.5))
    assert abs(rnn_forward([0.5, 1.0], p)[0] - expected) < 1e-15


def test_rnn_forward_shape_error():
    with pytest.raises(ModelError):
        rnn_forward(np.zeros((3, 2)), RnnParams.zeros(3, D=1))


def test_rnn_backward_zero_residual():
    p = RnnParams.zeros(3)
    p.c = np.asarray(40.0)
    y, tr = rnn_forward([1.0, 2.0], p)
    g = rnn_backward(tr, [1.0, 2.0], True, p)
    assert all(np.max(np.abs(a)) < 1e-12 for a in g.arrays().values())


def test_rnn_u_gradient_zero_for_single_step():
    p = RnnParams.init(SeededRng(1), 4, 1, 0.5)
    _, tr = rnn_forward([0.7], p)
    g = rnn_backward(tr, [0.7], False, p)
    assert np.array_equal(g.U, np.zeros((4, 4)))


def test_rnn_backward_rejects_foreign_trace():
    p = RnnParams.init(SeededRng(1), 3, 1, 0.5)
    _, tr = rnn_forward([0.1, 0.2], p)
    with pytest.raises(ModelError):
        rnn_backward(tr, [0.1, 0.3], True, p)
    with pytest.raises(ModelError):
        rnn_backward(tr, [0.1, 0.2], True, RnnParams.init(SeededRng(1), 5, 1, 0.5))


@pytest.mark.parametrize("model", ["MLP", "RNN", "NEST"])
def test_gradients_match_finite_differences(model):
    rng = SeededRng(2024)
    for _ in range(10):
        p, x, y = random_case(model, rng)
        errs = relative_errors(analytic_gradients(model, x, y, p), finite_difference_gradients(model, x, y, p))
        assert max(errs.values()) < 1e-6, errs


def test_finite_differences_zero_rnn():
    p = RnnParams.zeros(3)
    fd = finite_difference_gradients("RNN", [1.0, 2.0], True, p)
    assert abs(float(fd.c) - (0.5 - 1.0)) < 1e-10
    for k in ("W", "U", "V", "b"):
        assert np.max(np.abs(fd.arrays()[k])) < 1e-10


def test_finite_differences_exact_on_quadratic():
    rng = np.random.default_rng(0)
    p = MlpParams.init(SeededRng(0), 4, 2, 1.0)
    a = {k: rng.uniform(0.5, 2.0, v.shape) for k, v in p.arrays().items()}
    b = {k: rng.normal(size=v.shape) for k, v in p.arrays().items()}

    def quad(q):
        return sum(float(np.sum(a[k] * v * v + b[k] * v)) for k, v in q.arrays().items())

    g = numerical_gradient(quad, p)
    for k, v in p.arrays().items():
        # central differences are exact on quadratics up to rounding ~ ulp(L) / eps
        assert np.max(np.abs(g.arrays()[k] - (2 * a[k] * v + b[k]))) < 1e-8


def test_finite_differences_reject_nonfinite():
    p = MlpParams.zeros(1)
    with pytest.raises(ModelError):
        numerical_gradient(lambda q: float("nan"), p)


# -- nested RNN --------------------------------------------------------------

def test_nest_zero_params():
    logits, _ = nest_forward([[1.0, 2.0], [3.0]], RnnParams.zeros(3, nested=True))
    assert np.array_equal(logits, [0.0, 0.0])


def test_nest_single_stay_reduces_to_rnn():
    p = RnnParams.init(SeededRng(3), 5, 1, 0.5, nested=True)
    logits, _ = nest_forward([[0.4, 1.1, 0.9]], p)
    # first step uses W m + r (R times the zero entry state)
    q = RnnParams(p.W, p.U, p.V, p.b, p.c)
    seq = [0.4, 1.1, 0.9]
    h = np.tanh(p.W[:, 0] * seq[0] + p.r)
    for m in seq[1:]:
        h = np.tanh(p.W[:, 0] * m + p.U @ h + p.b)
    assert abs(logits[0] - (p.V[0] @ h + p.c)) < 1e-14
    assert q.nested is False


def tie(p):
    return RnnParams(p.W, p.U, p.V, p.b, p.c, p.U.copy(), p.b.copy())


def test_nest_concat_tie_example():
    pat = make_patient("a", [[1.0, 1.2], [0.8], [1.5, 1.6, 1.4]], [True, False, True])
    p = tie(RnnParams.init(SeededRng(4), 6, 1, 0.5, nested=True))
    logits, _ = nest_forward(build_nest(pat), p)
    for s in build_concat(pat):
        y, _ = rnn_forward(s, p)
        assert abs(logits[s.hosp_index] - y) < 1e-12


def test_nest_single_stay_r_gradient_is_zero():
    p = RnnParams.init(SeededRng(5), 3, 1, 0.5, nested=True)
    _, tr = nest_forward([[0.5, 1.0]], p)
    g = nest_backward(tr, [[0.5, 1.0]], [True], p)
    assert np.array_equal(g.R, np.zeros((3, 3)))
    # with one measurement there are no t > 1 steps for U and b
    _, tr = nest_forward([[0.5]], p)
    g = nest_backward(tr, [[0.5]], [True], p)
    assert np.array_equal(g.U, np.zeros((3, 3))) and np.array_equal(g.b, np.zeros(3))


def test_nest_sum_decomposition():
    base = RnnParams.init(SeededRng(6), 4, 1, 0.6)
    p = RnnParams(base.W, base.U, base.V, base.b, base.c, np.zeros((4, 4)), base.b.copy())
    g1, g2 = [0.9, 1.3, 1.1], [2.0, 0.7]
    l1, l2 = True, False
    _, tr = nest_forward([g1, g2], p)
    gn = nest_backward(tr, [g1, g2], [l1, l2], p)
    parts = []
    for seq, lab in ((g1, l1), (g2, l2)):
        _, t = rnn_forward(seq, base)
        parts.append(rnn_backward(t, seq, lab, base))
    for k in ("W", "U", "V", "c"):
        assert np.max(np.abs(gn.arrays()[k] - parts[0].arrays()[k] - parts[1].arrays()[k])) < 1e-10
    # plain-RNN b covers every step; nested splits it into b (t > 1) and r (t = 1)
    assert np.max(np.abs(gn.b + gn.r - parts[0].b - parts[1].b)) < 1e-10


def test_nest_loss_is_sum_of_stay_losses():
    p = RnnParams.init(SeededRng(7), 5, 1, 0.5, nested=True)
    groups = [[1.0, 2.0], [0.5], [1.5, 1.2]]
    labels = [True, False, None]
    logits, _ = nest_forward(groups, p)
    assert nest_loss(groups, p, labels) == bce_loss(logits[0], True) + bce_loss(logits[1], False)


def test_nest_backward_unlabeled_stays_only_pass_gradient_back():
    p = RnnParams.init(SeededRng(8), 3, 1, 0.5, nested=True)
    _, tr = nest_forward([[1.0], [2.0]], p)
    g = nest_backward(tr, [[1.0], [2.0]], [None, None], p)
    assert all(np.max(np.abs(a)) == 0.0 for a in g.arrays().values())


def test_nest_label_count_mismatch():
    p = RnnParams.init(SeededRng(8), 3, 1, 0.5, nested=True)
    _, tr = nest_forward([[1.0], [2.0]], p)
    with pytest.raises(ModelError):
        nest_backward(tr, [[1.0], [2.0]], [True], p)
    with pytest.raises(ModelError):
        nest_forward([[1.0]], RnnParams.zeros(3))


@given(st.integers(0, 2**32), st.integers(1, 4), st.integers(1, 6))
@settings(max_examples=50, deadline=None)
def test_hidden_states_stay_inside_open_interval(seed, A, tau):
    rng = SeededRng(seed)
    p = RnnParams.init(rng, 5, 1, 0.5, nested=True)
    groups = [rng.normal(tau, 1.0, 0.5) for _ in range(A)]
    logits, tr = nest_forward(groups, p)
    assert np.all(np.isfinite(logits))
    for Hs in tr.hidden:
        assert np.all(np.abs(Hs) < 1.0)


# -- MLP ---------------------------------------------------------------------

def test_mlp_examples():
    y, tr = mlp_forward(3.0, MlpParams.zeros(4))
    assert y == 0.0 and tr.probs[0] == 0.5
    assert mlp_forward(0.5, MlpParams([[1.0]], [0.0], [[1.0]], 0.0))[0] == math.tanh(0.5)


def test_mlp_dual_evaluation():
    rng = SeededRng(9)
    for _ in range(20):
        p = MlpParams.init(rng, 7, 2, 0.8)
        x = rng.normal(2)
        loops = float(p.c)
        for j in range(7):
            a = p.b1[j] + sum(p.W1[j, d] * x[d] for d in range(2))
            loops += p.V[0, j] * math.tanh(a)
        assert abs(mlp_forward(x, p)[0] - loops) < 1e-12


def test_mlp_backward_cases():
    p = MlpParams.zeros(3)
    p.c = np.asarray(40.0)
    _, tr = mlp_forward(2.0, p)
    g = mlp_backward(tr, 2.0, True, p)
    assert all(np.max(np.abs(a)) < 1e-12 for a in g.arrays().values())
    q = MlpParams.init(SeededRng(1), 3, 1, 0.5)
    _, tr = mlp_forward(0.0, q)
    assert np.array_equal(mlp_backward(tr, 0.0, True, q).W1, np.zeros((3, 1)))


# -- loss --------------------------------------------------------------------

def test_bce_examples():
    assert bce_loss(0.0, True) == math.log(2)
    assert bce_loss(40.0, True) < 1e-12
    assert abs(bce_loss(-3.0, True) - math.log(1 + math.exp(3))) < 1e-15
    assert bce_loss(-800.0, False) == 0.0 and math.isfinite(bce_loss(800.0, False))


# -- gradcheck harness -------------------------------------------------------

def test_gradcheck_suite_passes_and_catches_fault():
    ok = gradcheck_suite(n_cases=5, seed=11)
    assert all(not r["failures"] for r in ok.values())
    bad = gradcheck_suite(n_cases=3, seed=11, corrupt=True)
    assert all(len(r["failures"]) == 3 for r in bad.values())


# -- serialization -----------------------------------------------------------

@pytest.mark.parametrize("suffix", [".json", ".npz"])
@pytest.mark.parametrize("factory", [
    lambda: MlpParams.init(SeededRng(1), 5, 2, 0.3),
    lambda: RnnParams.init(SeededRng(2), 4, 1, 0.3),
    lambda: RnnParams.init(SeededRng(3), 4, 3, 0.3, nested=True),
])
def test_params_round_trip_exact(tmp_path, suffix, factory):
    p = factory()
    path = tmp_path / f"p{suffix}"
    save_params(p, path)
    q = load_params(path)
    assert type(q) is type(p)
    for k, a in p.arrays().items():
        assert a.tobytes() == q.arrays()[k].tobytes()


def test_params_shape_validation():
    with pytest.raises(ModelError):
        RnnParams(np.zeros((3, 1)), np.zeros((3, 2)), np.zeros((1, 3)), np.zeros(3), 0.0)
    with pytest.raises(ModelError):
        RnnParams(np.zeros((3, 1)), np.zeros((3, 3)), np.zeros((1, 3)), np.zeros(3), 0.0, np.zeros((3, 3)))
