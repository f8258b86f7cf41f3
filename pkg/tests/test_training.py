import numpy as np
import pytest

from rubricnet.corpus import DataSplit, SyntheticSpec, generate_synthetic
from rubricnet.errors import ConfigError, ContractError, TrainingError
from rubricnet.hnn import HnnDims, backward, forward, init_hnn
from rubricnet.numeric import Rng, derive_seed
from rubricnet.registry import model_factory
from rubricnet.text import PAD_ID, TokenSequence, build_vocab, cap_text, tokenize
from rubricnet.training import (
    AdamState,
    TrainConfig,
    adam_step,
    cross_validate,
    encode_items,
    grad_check,
    sgd_step,
    train,
)


def small_corpus(n=16, seed=21):
    return generate_synthetic(SyntheticSpec(n=n, seed=seed))


def vocab_for(items):
    return build_vocab([tokenize(cap_text(it.text)) for it in items])


def make_seq(token_ids, max_len):
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[: len(token_ids)] = token_ids
    return TokenSequence(
        ids=ids, mask=np.arange(max_len) < len(token_ids), true_length=len(token_ids)
    )


class TestTrainConfig:
    def test_epochs_zero_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)

    def test_bad_optimizer_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(optimizer="rmsprop")

    def test_file_roundtrip(self, tmp_path):
        import json

        cfg = TrainConfig(epochs=7, learning_rate=0.01, seed=5, clip_norm=2.5)
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg.to_json()))
        assert TrainConfig.from_file(p) == cfg

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            TrainConfig.from_json({"epochs": 3, "bogus": 1})


class TestSgdStep:
    def test_zero_gradient_no_change(self):
        p = np.array([1.0, 2.0])
        sgd_step([("p", p)], {"p": np.zeros(2)}, lr=0.5)
        np.testing.assert_array_equal(p, [1.0, 2.0])

    def test_arithmetic(self):
        p = np.zeros(2)
        sgd_step([("p", p)], {"p": np.array([1.0, -2.0])}, lr=1.0)
        np.testing.assert_array_equal(p, [-1.0, 2.0])

    def test_two_half_steps_equal_one_full(self):
        g = {"p": np.array([0.3, -0.7, 1.1])}
        a = np.array([1.0, 2.0, 3.0])
        b = a.copy()
        sgd_step([("p", a)], g, lr=0.2)
        sgd_step([("p", b)], g, lr=0.1)
        sgd_step([("p", b)], g, lr=0.1)
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            sgd_step([("p", np.zeros(3))], {"p": np.zeros(4)}, lr=0.1)


class TestAdamStep:
    def test_first_step_magnitude_is_lr(self):
        cfg = TrainConfig(learning_rate=0.01)
        p = np.array([1.0, -1.0, 5.0])
        g = {"p": np.array([0.3, -200.0, 1e-3])}
        state = AdamState.for_params([("p", p)])
        before = p.copy()
        adam_step([("p", p)], g, state, cfg)
        # bias-corrected m/sqrt(v) is sign(g) up to eps on the first step
        np.testing.assert_allclose(
            np.abs(p - before), cfg.learning_rate, rtol=1e-5
        )
        assert state.step == 1

    def test_zero_gradient_fixed_point(self):
        cfg = TrainConfig()
        p = np.array([0.5, -0.5])
        state = AdamState.for_params([("p", p)])
        for _ in range(5):
            adam_step([("p", p)], {"p": np.zeros(2)}, state, cfg)
        np.testing.assert_array_equal(p, [0.5, -0.5])

    def test_three_step_hand_trace(self):
        # independent scalar expansion of the Adam recurrence
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        gs = [0.5, -0.2, 0.1]
        p_hand = 0.3
        m = v = 0.0
        for t, g in enumerate(gs, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p_hand -= lr * m_hat / (v_hat**0.5 + eps)

        cfg = TrainConfig(learning_rate=lr, beta1=b1, beta2=b2, eps=eps)
        p = np.array([0.3])
        state = AdamState.for_params([("p", p)])
        for g in gs:
            adam_step([("p", p)], {"p": np.array([g])}, state, cfg)
        assert abs(p[0] - p_hand) < 1e-12

    def test_state_mismatch(self):
        cfg = TrainConfig()
        p = np.zeros(2)
        state = AdamState.for_params([("other", np.zeros(2))])
        with pytest.raises(ContractError):
            adam_step([("p", p)], {"p": np.zeros(2)}, state, cfg)


class TestTrain:
    DIMS = HnnDims(d_emb=8, d_hid=8, d_att=4, max_len=24)

    def test_empty_train_split_rejected(self):
        items = small_corpus()
        m = init_hnn(vocab_for(items), self.DIMS, seed=0)
        with pytest.raises(TrainingError):
            train(m, DataSplit(train=[], validation=[], test=[]), TrainConfig())

    def test_determinism_bit_identical(self):
        items = small_corpus()
        vocab = vocab_for(items)
        cfg = TrainConfig(epochs=4, seed=11)
        out = []
        for _ in range(2):
            m = init_hnn(vocab, self.DIMS, seed=2)
            m, _ = train(m, DataSplit(train=items, validation=[], test=[]), cfg)
            out.append({name: p.copy() for name, p in m.parameters()})
        for name in out[0]:
            assert np.array_equal(out[0][name], out[1][name]), name

    def test_loss_mostly_monotone_on_overfit_fixture(self):
        items = small_corpus()
        m = init_hnn(vocab_for(items), self.DIMS, seed=0)
        _, rec = train(
            m, DataSplit(train=items, validation=[], test=[]), TrainConfig(epochs=40, seed=0)
        )
        losses = [e.train_loss for e in rec.epochs]
        drops = sum(1 for a, b in zip(losses, losses[1:]) if b <= a)
        assert drops / (len(losses) - 1) >= 0.9

    def test_validation_metrics_recorded(self):
        data = small_corpus(n=24, seed=5)
        split = DataSplit(train=data[:16], validation=data[16:], test=[])
        m = init_hnn(vocab_for(split.train), self.DIMS, seed=0)
        _, rec = train(m, split, TrainConfig(epochs=3, seed=0))
        assert all(e.val_loss is not None and e.val_accuracy is not None for e in rec.epochs)

    def test_early_stopping_restores_best(self):
        from rubricnet.training import _evaluate_encoded

        data = generate_synthetic(SyntheticSpec(n=30, seed=3))
        split = DataSplit(train=data[:20], validation=data[20:], test=[])
        m = init_hnn(vocab_for(split.train), self.DIMS, seed=1)
        m, rec = train(
            m,
            split,
            TrainConfig(epochs=60, learning_rate=0.02, seed=1, early_stop_patience=3),
        )
        assert rec.stopped_early
        assert len(rec.epochs) < 60
        best = min(e.val_loss for e in rec.epochs)
        restored, _ = _evaluate_encoded(m, encode_items(split.validation, m))
        assert restored == best  # exact: best params were restored

    def test_sgd_optimizer_path(self):
        items = small_corpus()
        m = init_hnn(vocab_for(items), self.DIMS, seed=0)
        _, rec = train(
            m,
            DataSplit(train=items, validation=[], test=[]),
            TrainConfig(epochs=2, optimizer="sgd", learning_rate=0.1, seed=0),
        )
        assert len(rec.epochs) == 2

    def test_clip_norm_changes_updates(self):
        items = small_corpus()
        vocab = vocab_for(items)
        outs = []
        for clip in (None, 1e-4):
            m = init_hnn(vocab, self.DIMS, seed=3)
            m, _ = train(
                m,
                DataSplit(train=items, validation=[], test=[]),
                TrainConfig(epochs=2, seed=3, clip_norm=clip),
            )
            outs.append(m.head.b_o.copy())
        assert not np.array_equal(outs[0], outs[1])

    def test_frozen_embeddings_unchanged_by_training(self, tmp_path):
        items = small_corpus()
        vocab = vocab_for(items)
        vec_file = tmp_path / "vec.txt"
        rows = [
            f"{tok} " + " ".join(f"{0.01 * (i + j):.4f}" for j in range(8))
            for i, tok in enumerate(vocab.id_to_token[2:])
        ]
        vec_file.write_text("\n".join(rows) + "\n")

        from rubricnet.hnn import load_pretrained_embeddings

        m = init_hnn(vocab, self.DIMS, seed=0)
        m.embedding = load_pretrained_embeddings(vec_file, vocab)
        assert not m.embedding.trainable
        table_before = m.embedding.table.copy()
        head_before = m.head.W_o.copy()
        m, _ = train(
            m, DataSplit(train=items, validation=[], test=[]), TrainConfig(epochs=1, seed=0)
        )
        np.testing.assert_array_equal(m.embedding.table, table_before)
        assert not np.array_equal(m.head.W_o, head_before)

    def test_batch_order_pure_function_of_seed_and_epoch(self):
        a = Rng(derive_seed(9, 4)).permutation(12)
        b = Rng(derive_seed(9, 4)).permutation(12)
        c = Rng(derive_seed(9, 5)).permutation(12)
        assert a == b
        assert a != c


class TestCrossValidate:
    def test_k_reports_and_partition(self):
        data = small_corpus(n=20, seed=13)
        reports = cross_validate(model_factory("nb"), data, k=5, seed=0)
        assert len(reports) == 5
        for rep in reports:
            assert rep.model_name == "nb"
            assert len(rep.per_aspect) == 5

    def test_fold_models_distinct(self):
        data = small_corpus(n=20, seed=13)
        built = []
        factory = model_factory("mlp", config={"epochs": 30})
        from rubricnet.corpus import kfold

        for fold_index, (tr, _) in enumerate(kfold(data, 4, seed=0)):
            built.append(factory(tr, 0 + fold_index))
        w = [f.model.W1 for f in built]
        assert not np.array_equal(w[0], w[1])


class TestGradCheck:
    def test_hnn_small_dims(self):
        vocab = build_vocab([[f"t{i}" for i in range(8)]])
        rng = np.random.default_rng(1)
        for seed in range(2):
            m = init_hnn(vocab, HnnDims(4, 4, 4, 8), seed=seed)
            t = int(rng.integers(2, 9))
            seq = make_seq(list(rng.integers(2, 10, size=t)), 8)
            labels = list(rng.integers(0, 2, size=5))
            assert grad_check(m, seq, labels) < 1e-4

    def test_detects_corrupted_gradient(self):
        vocab = build_vocab([[f"t{i}" for i in range(8)]])
        m = init_hnn(vocab, HnnDims(3, 3, 3, 6), seed=5)
        seq = make_seq([2, 4, 6], 6)
        labels = [1, 0, 1, 1, 0]
        _, cache = forward(seq, m)
        grads = backward(cache, labels)
        grads["attention.v"] = -grads["attention.v"]
        assert grad_check(m, seq, labels, analytic_grads=grads) > 1e-1

    def test_zero_model_no_division_blowup(self):
        from tests.test_hnn import zero_model

        vocab = build_vocab([[f"t{i}" for i in range(8)]])
        m = zero_model(vocab, HnnDims(3, 3, 3, 6))
        seq = make_seq([2, 2, 2], 6)
        assert grad_check(m, seq, [1, 0, 1, 0, 1]) < 1e-4
