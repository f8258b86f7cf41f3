import json

import numpy as np
import pytest

from rubricnet.corpus import SyntheticSpec, generate_synthetic
from rubricnet.errors import FormatError, ParseError
from rubricnet.model_io import load_model, save_model
from rubricnet.registry import fit_model


def small_items(n=14, seed=31):
    return generate_synthetic(SyntheticSpec(n=n, seed=seed))


HNN_CONFIG = {"epochs": 2, "dims": {"d_emb": 6, "d_hid": 6, "d_att": 4, "max_len": 20}}
KIND_CONFIGS = {
    "hnn": HNN_CONFIG,
    "nb": None,
    "logreg": {"epochs": 50},
    "mlp": {"epochs": 50},
}


class TestRoundTrip:
    @pytest.mark.parametrize("kind", ["hnn", "nb", "logreg", "mlp"])
    def test_predictions_bit_identical(self, kind, tmp_path):
        items = small_items()
        fitted, _, _ = fit_model(kind, items, seed=1, config=KIND_CONFIGS[kind])
        texts = [it.text for it in items] + ["", "something entirely unseen"]
        before = fitted.predict_probs(texts)
        path = tmp_path / f"{kind}.json"
        save_model(fitted, path)
        again = load_model(path)
        after = again.predict_probs(texts)
        assert np.array_equal(before, after)
        assert again.kind == kind
        assert again.vocab.id_to_token == fitted.vocab.id_to_token

    def test_serialize_twice_byte_identical(self, tmp_path):
        items = small_items()
        fitted, _, _ = fit_model("hnn", items, seed=1, config=HNN_CONFIG)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_model(fitted, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestFormatErrors:
    def test_invalid_json(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{nope")
        with pytest.raises(ParseError):
            load_model(p)

    def test_wrong_format_version(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"format_version": 99, "model_kind": "nb"}))
        with pytest.raises(FormatError, match="format_version"):
            load_model(p)

    def test_unknown_kind(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"format_version": 1, "model_kind": "svm"}))
        with pytest.raises(FormatError, match="model_kind"):
            load_model(p)

    def test_inconsistent_shapes_refused(self, tmp_path):
        items = small_items()
        fitted, _, _ = fit_model("hnn", items, seed=1, config=HNN_CONFIG)
        p = tmp_path / "m.json"
        save_model(fitted, p)
        obj = json.loads(p.read_text())
        # claim a different hidden width than the tensors actually have
        obj["dims"]["d_hid"] = 12
        p.write_text(json.dumps(obj))
        with pytest.raises(FormatError, match="expected"):
            load_model(p)

    def test_vocab_tensor_mismatch_refused(self, tmp_path):
        items = small_items()
        fitted, _, _ = fit_model("logreg", items, seed=0, config={"epochs": 5})
        p = tmp_path / "m.json"
        save_model(fitted, p)
        obj = json.loads(p.read_text())
        obj["vocab"]["tokens"] = obj["vocab"]["tokens"][:-2]
        obj.pop("vocab_fingerprint")
        p.write_text(json.dumps(obj))
        with pytest.raises(FormatError, match="vocabulary"):
            load_model(p)

    def test_tensor_size_mismatch(self, tmp_path):
        items = small_items()
        fitted, _, _ = fit_model("logreg", items, seed=0, config={"epochs": 5})
        p = tmp_path / "m.json"
        save_model(fitted, p)
        obj = json.loads(p.read_text())
        obj["params"]["W"]["data"] = obj["params"]["W"]["data"][:-1]
        p.write_text(json.dumps(obj))
        with pytest.raises(FormatError, match="W"):
            load_model(p)
