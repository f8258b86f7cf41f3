import numpy as np
import pytest

from rubricnet.errors import ValidationError
from rubricnet.numeric import Rng
from rubricnet.text import (
    PAD_ID,
    UNK_ID,
    TokenSequence,
    Vocabulary,
    bow_features,
    build_vocab,
    cap_text,
    encode,
    tokenize,
)


class TestCapText:
    def test_short_unchanged(self):
        assert cap_text("ten bytes!") == "ten bytes!"

    def test_ascii_truncated_to_150_bytes(self):
        s = "x" * 200
        out = cap_text(s)
        assert out == "x" * 150
        assert len(out.encode("utf-8")) == 150

    def test_multibyte_boundary(self):
        # 1 ascii byte + 100 two-byte chars = 201 bytes; byte 150 falls in
        # the middle of a character, so the cut backs off to 149 bytes
        s = "a" + "é" * 100
        out = cap_text(s)
        assert out == "a" + "é" * 74
        assert len(out.encode("utf-8")) == 149

    def test_exact_boundary_kept(self):
        s = "é" * 75  # exactly 150 bytes
        assert cap_text(s) == s

    def test_custom_cap(self):
        assert cap_text("hello world", cap=5) == "hello"


class TestTokenize:
    def test_sentence(self):
        got = tokenize("Gas A and Gas D are flammable.")
        assert got == ["gas", "a", "and", "gas", "d", "are", "flammable"]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_runs(self):
        assert tokenize("density=0.9!") == ["density", "0", "9"]

    def test_underscore_splits(self):
        assert tokenize("a_b") == ["a", "b"]

    def test_whitespace_only(self):
        assert tokenize("  \t\n ") == []


class TestBuildVocab:
    def test_min_freq_filters(self):
        v = build_vocab([["a", "a", "b"]], min_freq=2)
        assert "a" in v and "b" not in v

    def test_empty_corpus_reserved_only(self):
        v = build_vocab([], min_freq=1)
        assert len(v) == 2
        assert v.id_for("anything") == UNK_ID

    def test_frequency_then_lexicographic_order(self):
        v = build_vocab([["b", "b", "c", "a", "a", "z"]], min_freq=1)
        # a and b tie at 2 -> lexicographic; then c and z tie at 1
        assert v.id_for("a") == 2
        assert v.id_for("b") == 3
        assert v.id_for("c") == 4
        assert v.id_for("z") == 5

    def test_ids_contiguous_and_bijective(self):
        v = build_vocab([["x", "y", "z", "x"]])
        assert sorted(v.token_to_id.values()) == list(range(len(v)))
        for tok, i in v.token_to_id.items():
            assert v.id_to_token[i] == tok


class TestEncode:
    def setup_method(self):
        self.vocab = build_vocab([["gas", "a", "d", "same"]])

    def test_pad_fill(self):
        seq = encode(["gas", "a", "d"], self.vocab, max_len=5)
        assert seq.true_length == 3
        assert list(seq.mask) == [True, True, True, False, False]
        assert seq.ids[3] == PAD_ID and seq.ids[4] == PAD_ID

    def test_truncation(self):
        seq = encode(["gas"] * 7, self.vocab, max_len=5)
        assert seq.true_length == 5
        assert seq.mask.all()

    def test_unknown_maps_to_unk(self):
        seq = encode(["quux"], self.vocab, max_len=3)
        assert seq.ids[0] == UNK_ID

    def test_empty_tokens(self):
        seq = encode([], self.vocab, max_len=4)
        assert seq.true_length == 0
        assert not seq.mask.any()
        assert (seq.ids == PAD_ID).all()

    def test_invariants_enforced(self):
        with pytest.raises(ValidationError):
            TokenSequence(
                ids=np.array([3, 0, 3]),
                mask=np.array([True, False, True]),
                true_length=2,
            )
        with pytest.raises(ValidationError):
            TokenSequence(
                ids=np.array([3, 7, 9]),
                mask=np.array([True, True, False]),
                true_length=2,
            )


class TestBowFeatures:
    def setup_method(self):
        self.vocab = build_vocab([["gas", "a"]])

    def test_counts(self):
        x = bow_features(["gas", "gas", "a"], self.vocab)
        assert x[self.vocab.id_for("gas")] == 2
        assert x[self.vocab.id_for("a")] == 1

    def test_all_oov_goes_to_unk(self):
        x = bow_features(["q", "w", "e"], self.vocab)
        assert x[UNK_ID] == 3

    def test_empty_zero_vector(self):
        assert not bow_features([], self.vocab).any()

    def test_pad_count_zero_and_sum_equals_tokens(self):
        tokens = ["gas"] * 100 + ["zzz"] * 50
        x = bow_features(tokens, self.vocab)
        assert x[PAD_ID] == 0
        assert x.sum() == 150  # no max_len truncation on the BoW path


class TestVocabularySerialization:
    def test_roundtrip(self, tmp_path):
        v = build_vocab([["gas", "a", "a", "balloon"]], min_freq=1)
        p = tmp_path / "vocab.json"
        v.save(p)
        w = Vocabulary.load(p)
        assert w.id_to_token == v.id_to_token
        assert w.min_freq == v.min_freq


class TestPipelineTotality:
    def test_fuzz_never_raises(self):
        from rubricnet.text import cap_text, encode, tokenize

        vocab = build_vocab([["gas", "a", "d"]])
        rng = Rng(77)
        for _ in range(300):
            n = rng.below(80)
            s = "".join(chr(32 + rng.below(0x2FA0)) for _ in range(n))
            seq = encode(tokenize(cap_text(s)), vocab, max_len=12)
            assert seq.true_length <= 12  # TokenSequence validated on init
