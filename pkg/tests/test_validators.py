import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adaptflow.errors import MissingKey, ValidationError
from adaptflow.tensor import _softmax
from adaptflow.validators import (
    AccuracyValidator,
    BNMValidator,
    accuracy,
    bnm_score,
    get_validator,
    validate_checkpoint,
)

from .oracles import nuclear_norm_oracle

finite = st.floats(-30, 30, allow_nan=False)


def logits_arrays(max_b=8, max_c=6):
    shape = st.tuples(st.integers(1, max_b), st.integers(1, max_c))
    return shape.flatmap(lambda s: arrays(np.float64, s, elements=finite))


class TestBNM:
    def test_saturated_one_hots(self):
        z = 50.0 * (2 * np.eye(4) - 1)
        assert BNMValidator()(target_train={"logits": z}) == pytest.approx(1.0, abs=1e-12)

    def test_uniform(self):
        assert BNMValidator()(target_train={"logits": np.zeros((4, 4))}) == pytest.approx(0.25, abs=1e-12)

    def test_matches_oracle(self, rng):
        for _ in range(20):
            b, c = rng.integers(1, 9), rng.integers(1, 6)
            z = rng.normal(size=(b, c)) * 3
            expected = nuclear_norm_oracle(_softmax(z)) / np.sqrt(b * min(b, c))
            assert bnm_score(z) == pytest.approx(expected, abs=1e-9)

    @settings(max_examples=80, deadline=None)
    @given(logits_arrays())
    def test_bounds(self, z):
        s = bnm_score(z)
        assert 0 < s <= 1 + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(logits_arrays(), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, z, r):
        perm = list(range(z.shape[0]))
        r.shuffle(perm)
        assert bnm_score(z[perm]) == pytest.approx(bnm_score(z), abs=1e-12)

    @pytest.mark.parametrize("b,c", [(4, 4), (6, 3), (3, 5)])
    def test_monotone_toward_one_hots(self, b, c):
        target = 20.0 * np.eye(c)[np.arange(b) % c]
        scores = [bnm_score(t * target) for t in np.linspace(0, 1, 5)]
        assert all(x < y for x, y in zip(scores, scores[1:]))

    def test_ignores_extra_splits(self):
        z = np.zeros((2, 2))
        assert BNMValidator()(target_train={"logits": z, "features": z}, src_train={"logits": z}) == pytest.approx(0.5, abs=1e-15)

    def test_missing(self):
        with pytest.raises(MissingKey) as e:
            BNMValidator()(target_val={"logits": np.zeros((2, 2))})
        assert e.value.key == "target_train"
        with pytest.raises(MissingKey) as e:
            BNMValidator()(target_train={"features": np.zeros((2, 2))})
        assert e.value.key == "target_train.logits"

    @pytest.mark.parametrize("shape", [(0, 3), (3, 0), (3,)])
    def test_empty_split(self, shape):
        with pytest.raises(ValidationError):
            BNMValidator()(target_train={"logits": np.zeros(shape)})


class TestAccuracy:
    def test_examples(self):
        assert accuracy([[0.0, 1.0], [2.0, 0.0]], [1, 0]) == 1.0
        assert accuracy([[1.0, 1.0]], [0]) == 1.0
        assert accuracy([[0.0, 1.0], [0.0, 1.0]], [1, 0]) == 0.5

    @settings(max_examples=80, deadline=None)
    @given(logits_arrays().flatmap(
        lambda z: st.tuples(st.just(z), st.lists(st.integers(0, z.shape[1] - 1), min_size=z.shape[0], max_size=z.shape[0]))
    ))
    def test_brute_force(self, args):
        z, y = args
        hits = 0
        for row, label in zip(z, y):
            best = 0
            for j in range(len(row)):
                if row[j] > row[best]:
                    best = j
            hits += best == label
        assert accuracy(z, y) == hits / len(y)

    @settings(max_examples=40, deadline=None)
    @given(logits_arrays(), st.randoms(use_true_random=False))
    def test_permutation_invariance(self, z, r):
        y = np.arange(z.shape[0]) % z.shape[1]
        perm = list(range(z.shape[0]))
        r.shuffle(perm)
        v = AccuracyValidator(split="target_train")
        assert v(target_train={"logits": z[perm], "labels": y[perm]}) == v(target_train={"logits": z, "labels": y})

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            accuracy(np.zeros((3, 2)), [0, 1])

    def test_needs_labels(self):
        with pytest.raises(MissingKey) as e:
            AccuracyValidator()(target_val={"logits": np.zeros((2, 2))})
        assert e.value.key == "target_val.labels"


def test_registry_and_checkpoint_helper():
    v = get_validator("bnm")
    assert isinstance(v, BNMValidator)
    z = np.random.default_rng(0).normal(size=(5, 3))
    assert validate_checkpoint(v, {"target_train": {"logits": z}}) == v(target_train={"logits": z})
    with pytest.raises(ValidationError):
        get_validator("entropy")
