import numpy as np
import pytest

from conftest import toy_document
from lsr.encoder import build_vocab
from lsr.induction import SingularStructure
from lsr.model import LSRModel, ModelConfig
from lsr.numerics import ShapeError, Tape, Tensor, grad_check, mul, sum_
from lsr.reasoner import (BlockParams, ClassifierParams, bce_loss, classify, dense_gcn_block, gcn_layer,
                          pair_targets, refine, uniform_structure)


def adjacency(rng, n):
    A = rng.uniform(0, 1, (n, n)) * (1 - np.eye(n))
    return Tensor(A / A.sum(axis=0, keepdims=True) * 0.8)


# -- gcn layer ---------------------------------------------------------------

def test_gcn_zero_weight(rng):
    b = rng.normal(size=3)
    out = gcn_layer(adjacency(rng, 4), Tensor(rng.normal(size=(4, 5))), Tensor(np.zeros((3, 5))), Tensor(b))
    assert np.allclose(out.data, np.maximum(b, 0))


def test_gcn_zero_adjacency(rng):
    b = rng.normal(size=3)
    out = gcn_layer(Tensor(np.zeros((4, 4))), Tensor(rng.normal(size=(4, 5))),
                    Tensor(rng.normal(size=(3, 5))), Tensor(b))
    assert np.allclose(out.data, np.maximum(b, 0))


def test_gcn_two_nodes_by_hand():
    A = Tensor([[0.0, 0.5], [0.0, 0.0]])
    U = np.array([[9.0, -9.0], [1.0, 2.0]])
    W = np.array([[1.0, 1.0], [-1.0, 0.0], [0.5, -2.0]])
    out = gcn_layer(A, Tensor(U), Tensor(W), Tensor(np.zeros(3))).data
    assert np.allclose(out[0], np.maximum(0.5 * W @ U[1], 0))
    assert np.allclose(out[1], 0.0)


def test_gcn_dropout_train_only(rng):
    A, U = adjacency(rng, 6), Tensor(rng.normal(size=(6, 4)))
    W, b = Tensor(rng.normal(size=(8, 4))), Tensor(np.ones(8))
    ev = gcn_layer(A, U, W, b, 0.3, train=False, rng=rng).data
    tr = gcn_layer(A, U, W, b, 0.3, train=True, rng=np.random.default_rng(0)).data
    kept = tr != 0
    assert np.allclose(tr[kept], ev[kept] / 0.7)
    assert 0 < (~kept).sum() < tr.size


def test_gcn_shape_error(rng):
    with pytest.raises(ShapeError):
        gcn_layer(adjacency(rng, 3), Tensor(np.ones((4, 2))), Tensor(np.ones((2, 2))), Tensor(np.zeros(2)))


# -- dense block ---------------------------------------------------------------

def test_dense_wiring_dims(rng):
    blk = BlockParams.init(12, 3, rng)
    assert [l.W.shape for l in blk.layers] == [(4, 12), (4, 16), (4, 20)]
    assert blk.W_comb.shape == (12, 12)
    with pytest.raises(ValueError):
        BlockParams.init(10, 3, rng)


@pytest.mark.parametrize("n", range(3, 11))
def test_block_output_shape(rng, n):
    blk = BlockParams.init(8, 2, rng)
    assert dense_gcn_block(adjacency(rng, n), Tensor(rng.normal(size=(n, 8))), blk).shape == (n, 8)


def test_single_sublayer_degenerates(rng):
    blk = BlockParams.init(6, 1, rng)
    A, U = adjacency(rng, 4), Tensor(rng.normal(size=(4, 6)))
    layer = blk.layers[0]
    h = gcn_layer(A, U, layer.W, layer.b).data
    assert np.allclose(dense_gcn_block(A, U, blk).data, (h + U.data) @ blk.W_comb.data.T)


def test_block_gradients(rng):
    blk = BlockParams.init(6, 2, rng)
    A = Tensor(adjacency(rng, 5).data, requires_grad=True)
    U = Tensor(rng.normal(size=(5, 6)), requires_grad=True)
    G = Tensor(rng.normal(size=(5, 6)))
    ps = [A, U, blk.W_comb] + [t for l in blk.layers for t in (l.W, l.b)]
    res = grad_check(lambda: sum_(mul(dense_gcn_block(A, U, blk), G)), ps, floor=1e-7)
    assert res.max_rel_err < 1e-4, res


# -- refinement --------------------------------------------------------------------

def test_refine_one_block(rng):
    blk = BlockParams.init(6, 2, rng)
    U, trace = refine(Tensor(rng.normal(size=(5, 6))), [blk])
    assert len(trace.structures) == 1 and trace.nodes[-1] is U


def test_refine_zeroed_second_block(rng):
    d = 6
    b1, b2 = BlockParams.init(d, 2, rng), BlockParams.init(d, 2, rng)
    for l in b2.layers:
        l.W.data[...] = 0.0
        l.b.data[...] = rng.normal(size=l.b.shape)
    b2.W_comb.data = np.eye(d)
    U0 = Tensor(rng.normal(size=(5, d)))
    U2, trace = refine(U0, [b1, b2])
    U1 = trace.nodes[0].data
    relu_b = np.concatenate([np.maximum(l.b.data, 0) for l in b2.layers])
    # with the residual input path the block output is ReLU(b) + U1 row by row
    assert np.allclose(U2.data, relu_b + U1)
    assert np.allclose(U2.data - U1, np.tile(relu_b, (5, 1)))
    # the second structure is induced from U1, not U0
    from lsr.induction import induce
    assert np.allclose(trace.structures[1].A.data, induce(trace.nodes[0], b2.induction).A.data)


def test_uniform_structure_is_constant():
    st = uniform_structure(4)
    assert np.allclose(st.A.data, (1 - np.eye(4)) / 4) and np.allclose(st.root.data + st.A.data.sum(0), 1)


def test_refine_attaches_block_index(rng, monkeypatch):
    import lsr.reasoner as R

    calls = []

    def fake(U, p):
        calls.append(1)
        if len(calls) == 2:
            raise SingularStructure("boom")
        return R.uniform_structure(U.shape[0])

    monkeypatch.setattr(R, "induce", fake)
    blocks = [BlockParams.init(4, 2, rng), BlockParams.init(4, 2, rng)]
    with pytest.raises(SingularStructure) as exc:
        refine(Tensor(rng.normal(size=(3, 4))), blocks)
    assert exc.value.block == 2 and "block 2" in str(exc.value)


# -- classifier and loss ---------------------------------------------------------------

def test_classifier_zero_weights(rng):
    p = ClassifierParams(Tensor(np.zeros((3, 2, 3))), Tensor(np.zeros(2)))
    assert np.allclose(classify(Tensor(rng.normal(size=(3, 3))), [(0, 1), (2, 0)], p).data, 0.5)


def test_classifier_bias_saturation(rng):
    p = ClassifierParams(Tensor(np.zeros((3, 2, 3))), Tensor([20.0, 0.0]))
    out = classify(Tensor(rng.normal(size=(2, 3))), [(0, 1)], p).data
    assert out[0, 0] > 1 - 1e-8


def test_classifier_by_hand():
    W = np.zeros((2, 1, 2))
    W[0, 0, 1] = 3.0
    out = classify(Tensor([[1.0, 0.0], [0.0, 1.0]]), [(0, 1), (1, 0)],
                   ClassifierParams(Tensor(W), Tensor(np.zeros(1)))).data
    assert np.isclose(out[0, 0], 1 / (1 + np.exp(-3.0)))
    assert np.isclose(out[0, 0], 0.9526, atol=1e-4)
    assert np.isclose(out[1, 0], 0.5)


def test_classifier_matches_loop(rng):
    E = rng.normal(size=(4, 5))
    p = ClassifierParams.init(5, 3, rng)
    p.b_e.data = rng.normal(size=3)
    pairs = [(0, 1), (3, 2), (1, 3)]
    out = classify(Tensor(E), pairs, p).data
    for row, (i, j) in zip(out, pairs):
        for r in range(3):
            assert np.isclose(row[r], 1 / (1 + np.exp(-(E[i] @ p.W_e.data[:, r, :] @ E[j] + p.b_e.data[r]))))


def test_classifier_rejects_bad_pair(rng):
    p = ClassifierParams.init(3, 1, rng)
    with pytest.raises(ValueError):
        classify(Tensor(np.ones((2, 3))), [(1, 1)], p)
    with pytest.raises(ValueError):
        classify(Tensor(np.ones((2, 3))), [(0, 2)], p)


def test_loss_limits():
    y = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert np.isclose(bce_loss(Tensor(np.full((2, 2), 0.5)), y).item(), np.log(2))
    perfect = bce_loss(Tensor(y), y).item()
    assert 0 < perfect < 1e-6


def test_loss_gradient(rng):
    E = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    p = ClassifierParams.init(4, 2, rng)
    pairs = [(i, j) for i in range(3) for j in range(3) if i != j]
    y = pair_targets(pairs, {(0, 1, 0), (2, 1, 1)}, 2)
    res = grad_check(lambda: bce_loss(classify(E, pairs, p), y), [E, p.W_e, p.b_e])
    assert res.max_rel_err < 1e-4


def test_pair_targets():
    y = pair_targets([(0, 1), (1, 0)], {(1, 0, 2), (0, 5, 1)}, 3)
    assert y.tolist() == [[0, 0, 0], [0, 0, 1]]


# -- full model ---------------------------------------------------------------------------

def small_model(doc, **kw):
    cfg = ModelConfig(**{"k": 3, "d": 6, "d_emb": 4, "blocks": 2, "l_sub": 2, "dropout": 0.0, **kw})
    return LSRModel(cfg, build_vocab([doc]), seed=3)


def test_end_to_end_gradients(toy_doc):
    model = small_model(toy_doc)
    params = list(model.params.values())
    res = grad_check(lambda: model.loss(toy_doc), params, eps=1e-5, floor=1e-6)
    assert res.max_rel_err < 1e-4, res


def test_eval_forward_is_deterministic(toy_doc):
    model = small_model(toy_doc, dropout=0.3)
    a = model.forward(toy_doc)[0].data
    b = model.forward(toy_doc)[0].data
    assert np.array_equal(a, b)


def test_permutation_equivariance(toy_doc, rng):
    """Reordering nodes permutes A on both axes and leaves pair scores unchanged."""
    model = small_model(toy_doc)
    prep = model.prepare(toy_doc)
    U0 = model.node_matrix(prep)
    perm = rng.permutation(U0.shape[0])
    U, trace = refine(U0, model.blocks)
    Up, trace_p = refine(Tensor(U0.data[perm]), model.blocks)
    assert np.allclose(trace_p.structures[0].A.data, trace.structures[0].A.data[np.ix_(perm, perm)], atol=1e-10)
    assert np.allclose(Up.data, U.data[perm], atol=1e-10)
    inv = np.argsort(perm)
    E = Tensor(U.data[prep.entity_rows])
    Ep = Tensor(Up.data[inv[prep.entity_rows]])
    assert np.allclose(classify(E, prep.pairs, model.classifier).data,
                       classify(Ep, prep.pairs, model.classifier).data, atol=1e-10)


def test_shared_induction_flag(toy_doc):
    shared = small_model(toy_doc, share_induction=True)
    assert shared.blocks[0].induction is shared.blocks[1].induction
    assert "block.ind.W_p" in shared.params and "block0.ind.W_p" not in shared.params
    assert small_model(toy_doc).blocks[0].induction is not small_model(toy_doc).blocks[1].induction


def test_uniform_model_uses_constant_structure(toy_doc):
    model = small_model(toy_doc, structure="uniform")
    _, prep, trace = model.forward(toy_doc)
    n = prep.plan.n
    for st in trace.structures:
        assert np.allclose(st.A.data, (1 - np.eye(n)) / n)


def test_model_gradients_reach_every_parameter(toy_doc):
    model = small_model(toy_doc)
    with Tape() as tape:
        loss = model.loss(toy_doc)
    grads = tape.backward(loss)
    for name, p in model.params.items():
        assert p in grads, name


def test_single_entity_document_has_no_pairs():
    from lsr.docmodel import Document, Entity, Mention, Sentence
    doc = Document("one", (Sentence(("a", "b"), (0, 1)),), (Entity(0, (Mention(0, 0, 0, 1),)),))
    model = small_model(toy_document())
    probs, _, _ = model.forward(doc)
    assert probs is None and model.loss(doc) is None
