import json

import numpy as np
import pytest

from adaptflow.io import FormatError, read_checkpoint, read_dump, write_checkpoint, write_dump
from adaptflow.modules import build_models


class TestDump:
    def test_round_trip(self, tmp_path, rng):
        splits = {
            "target_train": {"logits": rng.normal(size=(5, 3)), "features": rng.normal(size=(5, 4))},
            "target_val": {"logits": rng.normal(size=(2, 3)), "labels": np.array([0, 2])},
        }
        path = tmp_path / "dump.json"
        write_dump(path, splits)
        back = read_dump(path)
        assert set(back) == set(splits)
        for s in splits:
            for k, v in splits[s].items():
                np.testing.assert_array_equal(back[s][k], v)
                assert back[s][k].dtype.kind == v.dtype.kind

    def test_layout(self, tmp_path):
        path = tmp_path / "d.json"
        write_dump(path, {"target_train": {"logits": np.arange(4.0).reshape(2, 2)}})
        obj = json.loads(path.read_text())
        assert obj == {
            "format": "adaptflow-inference-dump",
            "version": 1,
            "splits": {"target_train": {"logits": {"shape": [2, 2], "data": [0.0, 1.0, 2.0, 3.0]}}},
        }

    @pytest.mark.parametrize("text", [
        "{not json",
        '{"format": "other", "version": 1, "splits": {}}',
        '{"format": "adaptflow-inference-dump", "version": 2, "splits": {}}',
        '{"format": "adaptflow-inference-dump", "version": 1, "splits": []}',
        '{"format": "adaptflow-inference-dump", "version": 1, "splits": {"a": {"logits": {"shape": [2], "data": [1.0]}}}}',
        '{"format": "adaptflow-inference-dump", "version": 1, "splits": {"a": {"logits": {"shape": [1], "data": ["x"]}}}}',
        '{"format": "adaptflow-inference-dump", "version": 1, "splits": {"a": {"logits": [1, 2]}}}',
        '{"format": "adaptflow-inference-dump", "version": 1, "splits": {"a": {"logits": {"shape": [-1], "data": []}}}}',
    ])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "bad.json"
        path.write_text(text)
        with pytest.raises(FormatError):
            read_dump(path)

    def test_json_error_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "format": ,\n}')
        with pytest.raises(FormatError, match="line 2 column"):
            read_dump(path)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        models = build_models("dann", 3, 5)
        state = {name: m.state_dict() for name, m in models.items()}
        path = tmp_path / "ckpt.txt"
        write_checkpoint(path, state, epoch=7, score=0.123456789012345)
        back, epoch, score = read_checkpoint(path)
        assert epoch == 7 and score == 0.123456789012345
        assert set(back) == {"G", "C", "D"}
        for name in state:
            assert list(back[name]) == list(state[name])
            for k, v in state[name].items():
                np.testing.assert_array_equal(back[name][k], v)
        fresh = build_models("dann", 3, 99)
        for name, m in fresh.items():
            m.load_state_dict(back[name])

    def test_header(self, tmp_path):
        path = tmp_path / "ckpt.txt"
        write_checkpoint(path, {"C": {"bias": np.array([1.5, -2.0])}}, 1, 0.5)
        assert path.read_text().splitlines() == [
            "adaptflow-checkpoint 1", "epoch 1", "score 0.5", "param C bias 2", "1.5 -2.0",
        ]

    @pytest.mark.parametrize("text", [
        "",
        "something else\n",
        "adaptflow-checkpoint 1\nepoch x\nscore 0.5\n",
        "adaptflow-checkpoint 1\nepoch 1\nscore 0.5\nparam C bias 3\n1.0 2.0\n",
        "adaptflow-checkpoint 1\nepoch 1\nscore 0.5\nweight C bias 1\n1.0\n",
        "adaptflow-checkpoint 1\nepoch 1\nscore 0.5\nparam C bias 1\n",
    ])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "ckpt.txt"
        path.write_text(text)
        with pytest.raises(FormatError):
            read_checkpoint(path)
