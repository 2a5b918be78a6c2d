import random

import numpy as np
import pytest
import torch

from melm.corpus import Corpus, Sentence
from melm.errors import CheckpointError, LengthError, TrainingError
from melm.linearize import linearize
from melm.masking import MaskPlan, finetune_mask
from melm.mlm import (
    MASK,
    ModelConfig,
    StubBackend,
    TinyMlm,
    TrainConfig,
    build_vocab,
    check_compatible,
    finetune,
    init_label_embeddings,
    load_checkpoint,
    masked_nll,
    new_model,
    predict,
    save_checkpoint,
)

from conftest import random_sentence, sentence_of, templated_corpus

REJECTS_TOP5 = ["EU", "Greenpeace", "Amnesty", "UN", "Reuters"]


def rejects_stub(rejects):
    corpus = Corpus([rejects, sentence_of([(w, "B-ORG") for w in REJECTS_TOP5[1:]])])
    vocab = build_vocab(corpus)
    weights = {"EU": 0.30, "Greenpeace": 0.20, "Amnesty": 0.15, "UN": 0.12, "Reuters": 0.10,
               "German": 0.05, "lamb": 0.04, "call": 0.04}
    return StubBackend(vocab, {(None, "rejects", "⟨B-ORG⟩"): weights})


def test_vocab_min_freq():
    corpus = Corpus([sentence_of([("Greenpeace", "B-ORG"), ("says", "O")]),
                     sentence_of([("EU", "B-ORG"), ("says", "O")]),
                     sentence_of([("EU", "B-ORG")])])
    v1 = build_vocab(corpus, 1)
    assert {"Greenpeace", "EU", "says"} <= set(v1.tokens)
    v2 = build_vocab(corpus, 2)
    assert "Greenpeace" not in v2 and v2.id("Greenpeace") == v2.unk_id
    assert "EU" in v2 and "says" in v2


def test_vocab_declared_markers():
    vocab = build_vocab(Corpus([sentence_of([("a", "B-PER")])]), classes=["ORG"], languages=["es"])
    for tok in ("⟨B-ORG⟩", "⟨I-ORG⟩", "⟨B-PER⟩", "⟨Español⟩", "⟨English⟩", MASK):
        assert tok in vocab
    assert vocab.tokens[:3] == ["⟨unk⟩", "⟨mask⟩", "⟨pad⟩"]
    assert vocab.index[vocab.tokens[7]] == 7


def _model(corpus, **kw):
    vocab = build_vocab(corpus, extra_tokens=["organization"])
    return TinyMlm(vocab, ModelConfig(**kw), seed=1), vocab


def test_init_label_embeddings(rejects):
    model, vocab = _model(Corpus([rejects]))
    before = model.tok_emb.weight.detach().clone()
    init_label_embeddings(model, vocab, {"ORG": "organization", "PER": "personne"})
    w = model.tok_emb.weight.detach()
    org = vocab.index["organization"]
    for marker in ("⟨B-ORG⟩", "⟨I-ORG⟩"):
        assert torch.equal(w[vocab.index[marker]], w[org])
        cos = torch.nn.functional.cosine_similarity(w[vocab.index[marker]], w[org], dim=0)
        assert cos.item() == pytest.approx(1.0, abs=1e-6)
    # MISC has no mapping and PER's word is absent: left at random init
    assert torch.equal(w[vocab.index["⟨B-MISC⟩"]], before[vocab.index["⟨B-MISC⟩"]])
    again = init_label_embeddings(model, vocab, {"ORG": "organization"}).tok_emb.weight.detach().clone()
    assert torch.equal(again, w)


def test_predict_distributions_normalized():
    rng = random.Random(0)
    corpus = Corpus(random_sentence(rng) for _ in range(30))
    model, vocab = _model(corpus)
    gen = np.random.default_rng(0)
    checked = 0
    while checked < 100:
        s = random_sentence(rng)
        plan = finetune_mask(linearize(s), 0.7, gen)
        if plan is None:
            continue
        dists = predict(model, plan)
        assert len(dists) == len(plan.masked_positions)
        for d in dists:
            assert d.shape == (len(vocab),) and (d >= 0).all()
            assert abs(d.sum() - 1) < 1e-6
        checked += 1


def test_forward_is_deterministic(rejects):
    model, _ = _model(Corpus([rejects]))
    plan = MaskPlan.of(linearize(rejects), [1])
    a, b = model.predict(plan), model.predict(plan)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    clone, _ = _model(Corpus([rejects]))
    assert all(np.array_equal(x, y) for x, y in zip(a, clone.predict(plan)))


def test_length_error(rejects):
    model, _ = _model(Corpus([rejects]), max_len=8)
    with pytest.raises(LengthError):
        model.predict(MaskPlan.of(linearize(rejects), [1]))


def test_loss_only_counts_masked_positions():
    torch.manual_seed(0)
    logits = torch.randn(1, 5, 11)
    targets = torch.tensor([[-100, 3, -100, 7, -100]])
    base = masked_nll(logits, targets)
    extended = torch.cat([logits, torch.randn(1, 4, 11)], dim=1)
    ext_targets = torch.cat([targets, torch.full((1, 4), -100)], dim=1)
    assert masked_nll(extended, ext_targets).item() == pytest.approx(base.item(), rel=0, abs=1e-12)
    manual = -(logits[0, 1].log_softmax(-1)[3] + logits[0, 3].log_softmax(-1)[7]) / 2
    assert base.item() == pytest.approx(manual.item(), abs=1e-6)


def finite_difference_check(model, plans, per_tensor=6, h=1e-6, seed=0):
    """Largest relative error between autograd and central differences."""
    model.zero_grad()
    model.loss(plans).backward()
    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    for name, p in model.named_parameters():
        flat = p.data.view(-1)
        grad = p.grad.view(-1)
        # sample entries, plus the largest-gradient one so every tensor is exercised
        idx = torch.randint(0, flat.numel(), (per_tensor,), generator=gen).tolist() + [int(grad.abs().argmax())]
        for i in idx:
            old = flat[i].item()
            with torch.no_grad():
                flat[i] = old + h
                up = model.loss(plans).item()
                flat[i] = old - h
                down = model.loss(plans).item()
                flat[i] = old
            numeric = (up - down) / (2 * h)
            analytic = grad[i].item()
            denom = max(abs(numeric), abs(analytic))
            if denom < 1e-7:
                continue
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def test_gradients_match_finite_differences(rejects, resigns):
    corpus = Corpus([rejects, resigns])
    model, _ = _model(corpus, dim=16, heads=2, layers=2)
    model.double()
    gen = np.random.default_rng(0)
    plans = [finetune_mask(linearize(s), 0.7, gen) for s in corpus]
    assert finite_difference_check(model, plans) < 1e-3


def test_overfit_small_corpus():
    corpus = templated_corpus(20)
    model = new_model(corpus, seed=0)
    finetune(model, corpus, TrainConfig(epochs=200), seed=0)
    assert len(model.loss_history) == 200
    assert model.loss_history[-1] < 0.2 * model.loss_history[0]
    assert all(torch.isfinite(p).all() for p in model.parameters())


def test_finetune_rejects_entity_free_corpus():
    corpus = Corpus([sentence_of([("a", "O")])])
    with pytest.raises(TrainingError):
        finetune(new_model(corpus), corpus, TrainConfig(epochs=1))


def test_finetune_is_seeded():
    corpus = templated_corpus(8)
    a = finetune(new_model(corpus, seed=3), corpus, TrainConfig(epochs=3), seed=3)
    b = finetune(new_model(corpus, seed=3), corpus, TrainConfig(epochs=3), seed=3)
    assert a.loss_history == b.loss_history
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


def test_checkpoint_round_trip(tmp_path, rejects):
    corpus = templated_corpus(6)
    model = finetune(new_model(corpus, seed=0), corpus, TrainConfig(epochs=2), seed=0)
    path = tmp_path / "m.pt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.vocab == model.vocab and loaded.loss_history == model.loss_history
    plan = MaskPlan.of(linearize(corpus[0]), linearize(corpus[0]).entity_positions)
    assert all(np.array_equal(x, y) for x, y in zip(model.predict(plan), loaded.predict(plan)))
    path2 = tmp_path / "m2.pt"
    save_checkpoint(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_bad_checkpoint(tmp_path):
    path = tmp_path / "bad.pt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_incompatible_vocabulary(rejects):
    vocab = build_vocab(Corpus([sentence_of([("a", "B-PER")])]))
    with pytest.raises(CheckpointError):
        check_compatible(vocab, Corpus([rejects]), False)
    es = Corpus([Sentence(["Real"], ["B-PER"], "es")])
    check_compatible(vocab, es, False)
    with pytest.raises(CheckpointError):
        check_compatible(vocab, es, True)


def test_stub_rejects(rejects):
    stub = rejects_stub(rejects)
    seq = linearize(rejects)
    dist = predict(stub, MaskPlan.of(seq, [1]))[0]
    top5 = [stub.vocab.token(i) for i in np.argsort(-dist, kind="stable")[:5]]
    assert top5 == REJECTS_TOP5
    assert abs(dist.sum() - 1) < 1e-12
    # an unknown context falls back to uniform
    other = predict(stub, MaskPlan.of(seq, [seq.entity_positions[1]]))[0]
    assert np.allclose(other, 1 / len(stub.vocab))
