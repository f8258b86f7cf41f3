import json

import pytest

from rubricnet.corpus import (
    DEFAULT_MARKER_PHRASES,
    DEFAULT_NOISE_VOCAB,
    LabeledResponse,
    SyntheticSpec,
    dump_dataset,
    generate_synthetic,
    kfold,
    load_dataset,
    marker_labels,
    split_deep,
    split_shallow,
)
from rubricnet.errors import ParseError, SizeError, ValidationError
from rubricnet.text import cap_text


def make_items(n, start=0):
    return [
        LabeledResponse(id=f"r{start + i}", text=f"text {start + i}", labels=(i % 2, 0, 1, 0, 1))
        for i in range(n)
    ]


def ids(items):
    return sorted(r.id for r in items)


class TestLoadDataset:
    def test_three_valid_lines(self, tmp_path):
        p = tmp_path / "d.jsonl"
        dump_dataset(make_items(3), p)
        got = load_dataset(p)
        assert [r.id for r in got] == ["r0", "r1", "r2"]
        assert got[1].labels == (1, 0, 1, 0, 1)

    def test_empty_file_is_empty_list(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text("")
        assert load_dataset(p) == []

    def test_short_labels_name_the_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        lines = [
            json.dumps({"id": "a", "text": "x", "labels": [1, 0, 1, 0, 1]}),
            json.dumps({"id": "b", "text": "y", "labels": [1, 0, 1]}),
        ]
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValidationError, match=":2:"):
            load_dataset(p)

    def test_malformed_json_names_the_line(self, tmp_path):
        p = tmp_path / "d.jsonl"
        p.write_text('{"id": "a", "text": "x", "labels": [0,0,0,0,0]}\n{oops\n')
        with pytest.raises(ParseError, match=":2:"):
            load_dataset(p)

    def test_duplicate_id_rejected(self, tmp_path):
        p = tmp_path / "d.jsonl"
        rec = json.dumps({"id": "a", "text": "x", "labels": [0, 0, 0, 0, 0]})
        p.write_text(rec + "\n" + rec + "\n")
        with pytest.raises(ValidationError, match="duplicate id"):
            load_dataset(p)

    def test_roundtrip_preserves_order_and_content(self, tmp_path):
        items = make_items(10)
        p = tmp_path / "d.jsonl"
        dump_dataset(items, p)
        assert load_dataset(p) == items


class TestSplitShallow:
    def test_100_items(self):
        s = split_shallow(make_items(100), seed=1)
        assert s.sizes() == (80, 0, 20)

    def test_rounding_floor(self):
        s = split_shallow(make_items(5), seed=1)
        assert s.sizes() == (4, 0, 1)

    def test_determinism(self):
        data = make_items(37)
        a = split_shallow(data, seed=9)
        b = split_shallow(data, seed=9)
        assert [r.id for r in a.train] == [r.id for r in b.train]
        assert [r.id for r in a.test] == [r.id for r in b.test]

    def test_partition(self):
        data = make_items(41)
        s = split_shallow(data, seed=3)
        assert ids(s.train) + ids(s.test) != []
        assert sorted(ids(s.train) + ids(s.test)) == ids(data)

    def test_too_small(self):
        with pytest.raises(SizeError):
            split_shallow(make_items(4), seed=1)

    def test_stratified_keeps_ratio(self):
        data = make_items(100)  # aspect 1 positive on half the items
        s = split_shallow(data, seed=5, stratify=True)
        test_pos = sum(r.labels[0] for r in s.test)
        assert test_pos == 10
        assert sorted(ids(s.train) + ids(s.test)) == ids(data)


class TestSplitDeep:
    def test_100_items_residual_to_train(self):
        s = split_deep(make_items(100), seed=1)
        assert s.sizes() == (70, 15, 15)

    def test_20_items(self):
        s = split_deep(make_items(20), seed=1)
        assert s.sizes() == (14, 3, 3)

    def test_determinism(self):
        data = make_items(53)
        a = split_deep(data, seed=2)
        b = split_deep(data, seed=2)
        assert [r.id for r in a.validation] == [r.id for r in b.validation]
        assert [r.id for r in a.test] == [r.id for r in b.test]

    def test_partition(self):
        data = make_items(33)
        s = split_deep(data, seed=8)
        assert sorted(ids(s.train) + ids(s.validation) + ids(s.test)) == ids(data)

    def test_too_small(self):
        with pytest.raises(SizeError):
            split_deep(make_items(9), seed=1)

    def test_stratified_keeps_ratio(self):
        data = make_items(100)  # aspect 1 positive on half the items
        s = split_deep(data, seed=6, stratify=True)
        assert s.sizes() == (70, 15, 15)
        assert sum(r.labels[0] for r in s.test) in (7, 8)
        assert sum(r.labels[0] for r in s.validation) in (7, 8)
        assert sorted(ids(s.train) + ids(s.validation) + ids(s.test)) == ids(data)


class TestKfold:
    def test_ten_of_ten(self):
        folds = kfold(make_items(10), k=10, seed=1)
        assert len(folds) == 10
        assert all(len(test) == 1 for _, test in folds)

    def test_pigeonhole_sizes(self):
        folds = kfold(make_items(103), k=10, seed=1)
        sizes = {len(test) for _, test in folds}
        assert sizes == {10, 11}

    def test_each_item_in_exactly_one_test_fold(self):
        data = make_items(29)
        folds = kfold(data, k=4, seed=7)
        all_test = [r.id for _, test in folds for r in test]
        assert sorted(all_test) == ids(data)
        for train, test in folds:
            assert sorted(ids(train) + ids(test)) == ids(data)

    def test_determinism(self):
        data = make_items(20)
        a = kfold(data, k=5, seed=11)
        b = kfold(data, k=5, seed=11)
        assert [[r.id for r in t] for _, t in a] == [[r.id for r in t] for _, t in b]

    def test_size_errors(self):
        with pytest.raises(SizeError):
            kfold(make_items(3), k=4, seed=1)
        with pytest.raises(SizeError):
            kfold(make_items(3), k=1, seed=1)


class TestSyntheticSpec:
    def test_defaults_valid(self):
        spec = SyntheticSpec(n=10, seed=1)
        assert len(spec.aspect_marker_phrases) == 5

    def test_rejects_single_phrase_aspect(self):
        with pytest.raises(ValidationError, match="aspect 3"):
            SyntheticSpec(
                n=1,
                seed=1,
                aspect_marker_phrases=(
                    ("a b", "c d"), ("e f", "g h"), ("just one",),
                    ("i j", "k l"), ("m n", "o p"),
                ),
            )

    def test_rejects_bad_prior(self):
        with pytest.raises(ValidationError, match="label_prior"):
            SyntheticSpec(n=1, seed=1, label_prior=(0.5, 0.5, 1.0, 0.5, 0.5))

    def test_json_roundtrip(self):
        spec = SyntheticSpec(n=7, seed=3, label_prior=(0.2, 0.3, 0.4, 0.5, 0.6))
        again = SyntheticSpec.from_json(spec.to_json())
        assert again == spec

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError, match="unknown"):
            SyntheticSpec.from_json({"n": 1, "seed": 1, "bogus": True})


class TestDefaultMarkers:
    def test_no_cross_aspect_phrase_containment(self):
        # a phrase of aspect j must never occur as a contiguous run inside
        # a phrase of another aspect, or presence-recovery would misfire
        for i, phrases_i in enumerate(DEFAULT_MARKER_PHRASES):
            for j, phrases_j in enumerate(DEFAULT_MARKER_PHRASES):
                if i == j:
                    continue
                for pi in phrases_i:
                    ti = pi.split()
                    for pj in phrases_j:
                        tj = pj.split()
                        runs = [
                            ti[s : s + len(tj)] for s in range(len(ti) - len(tj) + 1)
                        ]
                        assert tj not in runs

    def test_noise_vocab_disjoint_from_marker_tokens(self):
        marker_tokens = {
            t for phrases in DEFAULT_MARKER_PHRASES for p in phrases for t in p.split()
        }
        assert marker_tokens.isdisjoint(DEFAULT_NOISE_VOCAB)


class TestGenerateSynthetic:
    def test_n_zero(self):
        assert generate_synthetic(SyntheticSpec(n=0, seed=1)) == []

    def test_positive_aspect_has_marker(self):
        spec = SyntheticSpec(n=200, seed=42)
        for item in generate_synthetic(spec):
            if item.labels[2] == 1:
                assert any(
                    phrase in item.text for phrase in spec.aspect_marker_phrases[2]
                )

    def test_labels_exactly_recoverable(self):
        spec = SyntheticSpec(n=500, seed=7)
        for item in generate_synthetic(spec):
            assert marker_labels(item.text, spec) == item.labels

    def test_positive_rates_near_priors(self):
        spec = SyntheticSpec(n=1000, seed=11)
        items = generate_synthetic(spec)
        for aspect in range(5):
            rate = sum(r.labels[aspect] for r in items) / len(items)
            assert 0.45 <= rate <= 0.55

    def test_determinism(self):
        a = generate_synthetic(SyntheticSpec(n=50, seed=123))
        b = generate_synthetic(SyntheticSpec(n=50, seed=123))
        assert a == b

    def test_truncation_rarely_destroys_all_markers(self):
        spec = SyntheticSpec(n=1000, seed=5)
        items = generate_synthetic(spec)
        with_markers = [r for r in items if any(r.labels)]
        survived = sum(
            1
            for r in with_markers
            if any(marker_labels(cap_text(r.text), spec))
        )
        assert survived / len(with_markers) >= 0.95

    def test_ids_unique(self):
        items = generate_synthetic(SyntheticSpec(n=300, seed=9))
        assert len({r.id for r in items}) == 300
