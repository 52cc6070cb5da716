import numpy as np
import pytest

from g2t import autodiff as ad
from g2t import synthetic
from g2t.config import TrainConfig
from g2t.decoder import sequence_log_probs, teacher_forced
from g2t.gradcheck import hybrid_objective, micro_model
from g2t.ie_reward import Extractor
from g2t.model import encode_inputs
from g2t.training import TrainingDiverged, cross_entropy_loss, hybrid_loss, scst_loss, train
from g2t.triples import mask_entities

TINY = dict(hidden=8, embed_dim=6, batch_size=2, lr=0.01, max_len=12)


@pytest.fixture(scope="module")
def corpus():
    types = synthetic.type_dict()
    return [mask_entities(ex, types) for ex in synthetic.make_corpus(4, seed=0, max_triples=2)]


def test_cross_entropy_hand_value():
    dists = [ad.constant(np.array([0.5, 0.25, 0.25])), ad.constant(np.array([0.1, 0.8, 0.1]))]
    loss = cross_entropy_loss(dists, [0, 1])
    assert loss.item() == pytest.approx(-(np.log(0.5) + np.log(0.8)) / 2, abs=1e-15)
    assert cross_entropy_loss(dists, [0, 1], mask=[False, True]).item() == pytest.approx(-np.log(0.8))
    with pytest.raises(ValueError):
        cross_entropy_loss(dists, [0, 1], mask=[False, False])


def test_scst_sign():
    lp = ad.parameter(np.array(-2.0))
    loss = scst_loss(lp, 3.0, 1.0)
    assert loss.item() == pytest.approx(4.0)
    ad.backward(loss)
    assert lp.grad == -2.0  # descent raises log p of a sample that beat the baseline
    with pytest.raises(ValueError):
        scst_loss(lp, -1.0, 0.0)


def test_zero_advantage_gives_zero_gradient():
    _, params, inputs, _, sample = micro_model()
    enc = encode_inputs(inputs, params)
    logp = sequence_log_probs(teacher_forced(enc, params, sample), sample)
    params.zero_grad()
    ad.backward(scst_loss(ad.sum_(logp), 2.0, 2.0))
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in params.grads().values()))
    assert norm < 1e-12


def test_hybrid_linear_in_gamma():
    _, params, inputs, target, sample = micro_model()
    vals = {g: hybrid_objective(params, inputs, target, sample, gamma=g).item() for g in (0.0, 0.5, 1.0)}
    assert abs(vals[0.5] - (vals[0.0] + vals[1.0]) / 2) < 1e-12
    with pytest.raises(ValueError):
        hybrid_loss(ad.constant(1.0), ad.constant(1.0), 1.5)


def test_training_is_deterministic(corpus):
    cfg = TrainConfig(epochs=3, ce_pretrain_epochs=2, gamma=0.3, **TINY)
    ext = Extractor(lexicon=synthetic.lexicon())
    a, ra = train(cfg, corpus, extractor=ext)
    b, rb = train(cfg, corpus, extractor=ext)
    assert ra == rb
    for name in a.params:
        np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
    assert [e.phase for e in ra.epochs] == ["ce", "ce", "hybrid"]


def test_gamma_zero_equals_ce_only(corpus):
    ce = TrainConfig(epochs=3, ce_pretrain_epochs=3, gamma=0.3, **TINY)
    g0 = TrainConfig(epochs=3, ce_pretrain_epochs=0, gamma=0.0, **TINY)
    a, _ = train(ce, corpus)
    b, _ = train(g0, corpus, extractor=Extractor(lexicon=synthetic.lexicon()))
    for name in a.params:
        assert a.params[name].data.tobytes() == b.params[name].data.tobytes()


def test_loss_decreases(corpus):
    cfg = TrainConfig(epochs=8, ce_pretrain_epochs=8, **TINY)
    _, report = train(cfg, corpus)
    assert report.epochs[-1].ce_loss < report.epochs[0].ce_loss


def test_validation_selects_best_epoch(corpus):
    cfg = TrainConfig(epochs=3, ce_pretrain_epochs=3, **TINY)
    seen = []
    ckpt, report = train(cfg, corpus[:3], corpus[3:], on_epoch=seen.append)
    assert len(seen) == 3 and all(r.valid_bleu is not None for r in seen)
    best = max(range(3), key=lambda i: (seen[i].valid_bleu, -i))
    assert report.best_epoch == best + 1
    assert ckpt.meta["best_epoch"] == report.best_epoch


def test_divergence_is_reported(corpus):
    cfg = TrainConfig(epochs=1, ce_pretrain_epochs=1, **TINY)
    from g2t.model import Dims, init_params
    from g2t.triples import build_vocab
    vocab = build_vocab(corpus)
    params = init_params(Dims(len(vocab), 6, 8, 2), np.random.default_rng(0))
    params["out.b_v"].data[:] = np.nan
    with pytest.raises(TrainingDiverged, match="non-finite"):
        train(cfg, corpus, vocab=vocab, params=params)


def test_empty_training_set():
    with pytest.raises(ValueError):
        train(TrainConfig(**TINY), [])
