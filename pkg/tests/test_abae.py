import numpy as np
import pytest

from abae_reviews.abae import (AbaeConfig, AbaeModel, aspect_probabilities, attention_weights,
                               backward, hinge_loss, infer_batch, infer_sentence, init_model,
                               load_checkpoint, negative_sums, objective, orthogonality_penalty,
                               orthogonality_penalty_grad, reconstruct, save_checkpoint,
                               sentence_embedding, train_abae)
from abae_reviews.numerics import finite_difference_check

from conftest import random_batch, random_model


def _two_word_model():
    E = np.array([[2.0, 0.0], [0.0, 1.0]])
    return AbaeModel(E=E, M=np.eye(2), W=np.zeros((2, 2)), b=np.zeros(2), T=np.eye(2))


def test_attention_examples(model):
    assert np.allclose(attention_weights([4], model), [1.0])
    m = _two_word_model()
    assert np.allclose(attention_weights([0, 1], m), [0.9526, 0.0474], atol=1e-4)
    m.M = np.zeros((2, 2))
    assert np.allclose(attention_weights([0, 1, 1], m), 1 / 3)


def test_sentence_embedding_examples(model):
    assert np.allclose(sentence_embedding([2], model), model.E[2])
    assert np.allclose(sentence_embedding([2, 2], model), model.E[2])
    m = _two_word_model()
    z = sentence_embedding([0, 1], m)
    assert np.allclose(z, 0.9526 * m.E[0] + 0.0474 * m.E[1], atol=1e-4)


def test_aspect_probability_examples():
    m = random_model(K=4)
    m.W[:] = 0
    m.b[:] = 0
    assert np.allclose(aspect_probabilities(np.ones(m.d), m), 0.25)
    m.b[:] = [10, -10, -10, -10]
    assert aspect_probabilities(np.ones(m.d), m)[0] > 0.9999
    m2 = random_model(K=2, d=2)
    m2.W[:] = 0
    m2.b[:] = [1, 0]
    assert np.allclose(aspect_probabilities(np.zeros(2), m2), [0.7311, 0.2689], atol=1e-4)


def test_reconstruct_examples(model):
    assert np.allclose(reconstruct([0, 1, 0], model), model.T[1])
    assert np.allclose(reconstruct(np.full(3, 1 / 3), model), model.T.mean(axis=0))
    m = random_model(K=2)
    assert np.allclose(reconstruct([0.25, 0.75], m), 0.25 * m.T[0] + 0.75 * m.T[1])


def _hinge_model(r, z_word, neg_word):
    """Model where r is fixed via T (W=0, b one-hot saturated), z is one word."""
    E = np.array([z_word, neg_word], dtype=float)
    T = np.array([r, r], dtype=float)
    return AbaeModel(E=E, M=np.eye(2), W=np.zeros((2, 2)), b=np.zeros(2), T=T)


def test_hinge_examples():
    m = _hinge_model([1, 0], [1, 0], [0, 1])
    assert hinge_loss([0], [[1]], m) == pytest.approx(0.0)
    m = _hinge_model([1, 0], [0, 1], [0, 1])
    # r perpendicular to z; negative equal to z direction is also perpendicular
    assert hinge_loss([0], [[1], [1]], m) == pytest.approx(2.0)
    c = 0.8
    m = _hinge_model([1, 0], [c, np.sqrt(1 - c * c)], [0.1, np.sqrt(1 - 0.01)])
    assert hinge_loss([0], [[1]], m) == pytest.approx(0.3)


def test_penalty_examples():
    assert orthogonality_penalty(np.eye(3)) == pytest.approx(0.0)
    assert orthogonality_penalty(np.array([[1.0, 0], [1.0, 0]])) == pytest.approx(np.sqrt(2))
    a = orthogonality_penalty(np.array([[1.0, 0], [np.cos(0.2), np.sin(0.2)]]))
    b = orthogonality_penalty(np.array([[1.0, 0], [np.cos(0.6), np.sin(0.6)]]))
    assert b < a < np.sqrt(2)
    _, g = orthogonality_penalty_grad(np.eye(3) * 2.5)
    assert np.allclose(g, 0)


def test_penalty_is_scale_invariant():
    T = random_model().T
    assert orthogonality_penalty(T) == pytest.approx(orthogonality_penalty(T * np.array([[2], [0.1], [7]])))


def test_flat_region_gives_zero_gradients():
    m = _hinge_model([1, 0], [1, 0], [0, 1])
    loss, grads = backward([[0]], negative_sums([[[1]]], m.E), m, ortho_weight=0.0)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backward_matches_reference_and_fd(seed):
    m = random_model(seed, V=15, d=5, K=4)
    rng = np.random.default_rng(seed)
    batch, negs = random_batch(rng, m.V)
    ns = negative_sums(negs, m.E)
    loss, grads = backward(batch, ns, m, 0.1)
    assert loss == pytest.approx(objective(batch, ns, m, 0.1), rel=1e-12)
    params = m.params()
    rep = finite_difference_check(lambda: objective(batch, ns, m, 0.1), params, grads,
                                  n_samples=60, rng=seed)
    assert rep.max_rel_error < 1e-4


def test_infer_batch_matches_single(model):
    sents = [[0], [1, 2, 3], [4, 4, 5, 6, 7]]
    P, Z = infer_batch(sents, model)
    for s, p, z in zip(sents, P, Z):
        p1, z1 = infer_sentence(s, model)
        assert np.allclose(p, p1) and np.allclose(z, z1)


def test_empty_sentence_rejected(model):
    with pytest.raises(ValueError, match="empty sentence"):
        infer_sentence([], model)


def test_init_model_shapes_and_errors():
    rng = np.random.default_rng(0)
    E = rng.normal(size=(10, 4))
    cfg = AbaeConfig(n_aspects=3)
    m = init_model(E, rng.normal(size=(3, 4)), cfg)
    assert m.M.shape == (4, 4) and m.W.shape == (3, 4) and m.T.shape == (3, 4)
    assert np.allclose(np.linalg.norm(m.E, axis=1), 1.0)
    with pytest.raises(ValueError, match="centroids"):
        init_model(E, rng.normal(size=(2, 4)), cfg)


def test_checkpoint_roundtrip_and_hash(tmp_path, model):
    model.vocab_digest = "ab" * 32
    save_checkpoint(model, tmp_path / "m.ckpt")
    a = load_checkpoint(tmp_path / "m.ckpt", model.E, model.vocab_digest)
    save_checkpoint(a, tmp_path / "m2.ckpt")
    b = load_checkpoint(tmp_path / "m2.ckpt", model.E, model.vocab_digest)
    for k in a.params():
        assert np.array_equal(a.params()[k], b.params()[k])
    assert (tmp_path / "m.ckpt").read_bytes() == (tmp_path / "m2.ckpt").read_bytes()
    with pytest.raises(ValueError, match="hash mismatch"):
        load_checkpoint(tmp_path / "m.ckpt", model.E, "cd" * 32)
    with pytest.raises(ValueError, match="expects"):
        load_checkpoint(tmp_path / "m.ckpt", model.E[:5], model.vocab_digest)
    (tmp_path / "junk").write_bytes(b"x" * 200)
    with pytest.raises(ValueError, match="not an ABAE"):
        load_checkpoint(tmp_path / "junk", model.E, model.vocab_digest)


def test_training_reduces_objective_and_is_deterministic():
    rng = np.random.default_rng(0)
    E = rng.normal(size=(20, 6))
    sents = [rng.integers(0, 20, size=rng.integers(2, 6)).tolist() for _ in range(120)]
    cfg = AbaeConfig(n_aspects=3, epochs=6, batch_size=20, negatives=5, lr=0.01)
    cents = rng.normal(size=(3, 6))
    h1, h2 = [], []
    m1 = train_abae(sents, E, cfg, cents, history=h1)
    m2 = train_abae(sents, E, cfg, cents, history=h2)
    assert h1 == h2 and h1[-1] < h1[0]
    assert np.array_equal(m1.T, m2.T)
