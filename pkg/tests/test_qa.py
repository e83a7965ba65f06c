import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mhgrn.encoder import EncoderConfig, ModelParams, encode
from mhgrn.errors import DimMismatch, IndexOutOfRange, ParamBudgetExceeded, ParseError
from mhgrn.numkit import Rng
from mhgrn.qa import (TOY_DIMS, QaInstance, accuracy, batch_loss, fd_gradient, fd_train_step, option_scores,
                      plausibility, predict, qa_loss, toy_task)
from mhgrn.relgraph import MultiRelGraph, NodeType

Q, A, O = NodeType.Q, NodeType.A, NodeType.O


def toy_params(seed=13):
    return ModelParams.init(**TOY_DIMS, seed=seed)


def flat_index(params, name, pos=0):
    offset = 0
    for key, a in params.arrays():
        if key == name:
            return offset + pos
        offset += a.size
    raise KeyError(name)


def test_plausibility_bias_only():
    p = toy_params()
    p.rho.W1[:] = 0.0
    p.rho.W2[:] = 0.0
    p.rho.b2[:] = 0.75
    assert plausibility(np.ones(2), np.ones(3), p) == 0.75


def test_plausibility_seed13_scalar_oracle():
    p = toy_params()
    x = [0.0] * 5
    hidden = [math.tanh(sum(p.rho.W1[h][c] * x[c] for c in range(5)) + p.rho.b1[h]) for h in range(4)]
    want = sum(p.rho.W2[0][h] * hidden[h] for h in range(4)) + p.rho.b2[0]
    assert abs(plausibility(np.zeros(2), np.zeros(3), p) - want) < 1e-15


def test_plausibility_concatenation_order():
    p = ModelParams.init(d_in=3, d=3, d_out=3, d_s=3, K=1, m=1, h_att=2, h_rho=4, seed=13)
    u, v = np.array([1.0, 0.0, -1.0]), np.array([0.2, 0.9, 0.3])
    assert plausibility(u, v, p) != plausibility(v, u, p)
    with pytest.raises(DimMismatch):
        plausibility(np.zeros(2), np.zeros(3), p)


def test_loss_examples():
    assert abs(qa_loss(np.zeros(5), 3) - math.log(5)) < 1e-12
    assert abs(qa_loss([10.0, 0.0], 0) - 4.5398899216870535e-05) < 1e-15
    assert qa_loss([1000.0, 0.0], 0) < 1e-12
    with pytest.raises(IndexOutOfRange):
        qa_loss([1.0, 2.0], 2)
    with pytest.raises(IndexOutOfRange):
        qa_loss([1.0], 0)


# dyadic grid so that shifted scores are exact and ties stay ties
DYADIC = st.integers(-240, 240).map(lambda x: x / 8)


@given(st.lists(DYADIC, min_size=2, max_size=6), st.integers(-4000, 4000).map(lambda x: x / 4), st.data())
def test_loss_shift_invariance_and_positivity(scores, c, data):
    correct = data.draw(st.integers(0, len(scores) - 1))
    base = qa_loss(scores, correct)
    assert abs(qa_loss(np.asarray(scores) + c, correct) - base) < 1e-12 * max(1.0, base)
    assert np.argmax(scores) == np.argmax(np.asarray(scores) + c)
    assert base > 0


def two_option_instance(graphs, correct=0, seed=1):
    rng = Rng(seed)
    return QaInstance([rng.uniform_array(2, -1, 1)] * 2, graphs, [rng.uniform_array((g.n, 3), -1, 1) for g in graphs],
                      correct)


def test_instance_validation():
    g = MultiRelGraph(2, (Q, A), 2)
    with pytest.raises(IndexOutOfRange):
        QaInstance([np.zeros(2)], [g], [np.zeros((2, 3))], 0)
    with pytest.raises(IndexOutOfRange):
        QaInstance([np.zeros(2)] * 2, [g] * 2, [np.zeros((2, 3))] * 2, 2)
    with pytest.raises(DimMismatch):
        QaInstance([np.zeros(2)] * 2, [g], [np.zeros((2, 3))] * 2, 0)


def test_predict_tie_goes_to_first():
    g = MultiRelGraph(2, (Q, A), 2, ((0, 1, 1),))
    H = Rng(3).uniform_array((2, 3), -1, 1)
    inst = QaInstance([np.ones(2)] * 3, [g] * 3, [H] * 3, 2)
    assert predict(inst, toy_params()) == 0


def connectivity_params():
    """Scores grow with the pooled answer embedding, which is positive only
    when a question node sends a message into the answer node."""
    p = toy_params()
    p.U[:] = 0.0
    p.b[:] = 0.0
    p.b[Q] = [1.0, 0.0, 0.0]
    p.W[:] = np.eye(3)
    p.att.f_mlp.W1[:] = 0.0
    p.att.f_mlp.W2[:] = 0.0
    p.V[:] = 0.0
    p.Vp[:] = np.eye(3)
    p.rho.W1[:] = 0.0
    p.rho.W1[0, 2] = 1.0  # reads g[0]
    p.rho.W2[:] = 0.0
    p.rho.W2[0, 0] = 1.0
    return p


def test_predict_rewards_question_answer_link():
    phi = (Q, A, O)
    linked = MultiRelGraph(3, phi, 2, ((0, 1, 1),))
    unlinked = MultiRelGraph(3, phi, 2, ((2, 1, 1),))
    p = connectivity_params()
    config = EncoderConfig(K=2, activation="identity")
    inst = two_option_instance([unlinked, linked], correct=1)
    scores = option_scores(inst, p, config)
    # the linked option's answer receives x_question = (1, 0, 0) at hop 1
    g_linked = encode(linked, inst.features[1], inst.statements[1], p, config).g_vec
    assert g_linked[0] == 1.0
    assert abs(scores[1] - math.tanh(1.0)) < 1e-15 and scores[0] == 0.0
    assert predict(inst, p, config) == 1


def test_fd_matches_analytic_single_weight():
    batch = toy_task(4, seed=3)
    p = toy_params()
    idx = flat_index(p, "rho.W2", 0)
    fd = fd_gradient(p, batch, eps=1e-5, indices=[idx])[0]
    analytic = 0.0
    for inst in batch:
        scores = option_scores(inst, p)
        probs = np.exp(scores - scores.max())
        probs /= probs.sum()
        for a in range(inst.n_options):
            g_vec = encode(inst.graphs[a], inst.features[a], inst.statements[a], p).g_vec
            x = np.concatenate([inst.statements[a], g_vec])
            h0 = math.tanh(p.rho.W1[0] @ x + p.rho.b1[0])
            analytic += (probs[a] - (a == inst.correct)) * h0
    analytic /= len(batch)
    assert abs(fd - analytic) < 1e-6


def test_fd_richardson_consistency():
    batch = toy_task(3, seed=5)
    p = toy_params()
    rng = Rng(21)
    idx = sorted({rng.randint(p.size) for _ in range(20)})
    g5 = fd_gradient(p, batch, eps=1e-5, indices=idx)
    g6 = fd_gradient(p, batch, eps=1e-6, indices=idx)
    scale = np.maximum(np.abs(g5), 1e-4)
    assert (np.abs(g5 - g6) / scale).max() < 1e-3
    assert np.array_equal(p.to_vector(), toy_params().to_vector())


def test_train_step_lr_zero_and_budget():
    batch = toy_task(2)
    p = toy_params()
    q, loss = fd_train_step(p, batch, lr=0.0)
    assert np.array_equal(q.to_vector(), p.to_vector()) and loss == batch_loss(p, batch)
    with pytest.raises(ParamBudgetExceeded):
        fd_train_step(p, batch, max_params=10)
    with pytest.raises(ValueError):
        fd_gradient(p, batch, eps=0.0)


@pytest.mark.slow
def test_train_step_reduces_loss():
    batch = toy_task(6)
    p = toy_params()
    q, before = fd_train_step(p, batch, lr=0.5)
    assert batch_loss(q, batch) < before
    assert 0.0 <= accuracy(q, batch) <= 1.0


def test_instance_load(fixtures, tmp_path):
    inst = QaInstance.load(fixtures / "instance.json")
    assert inst.n_options == 2 and inst.correct == 0
    assert inst.graphs[0].n == 3 and inst.features[0].shape == (3, 4)
    (tmp_path / "bad.json").write_text('{"options": []}')
    with pytest.raises(ParseError):
        QaInstance.load(tmp_path / "bad.json")
