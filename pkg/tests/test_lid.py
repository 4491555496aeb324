"""LID module: logistic-regression training, prediction, serialization."""

import numpy as np
import pytest

from diarkit.formats import EmbeddingSet, FormatError, SegmentRecord, TimeSpan
from diarkit.lid import (
    LogisticLanguageID,
    load_model,
    predict,
    predict_proba,
    predict_segments,
    save_model,
    train,
)

from conftest import speaker_blobs


def independent_loss(W, X, labels, classes, l2):
    """Oracle loss written from the definition: mean softmax cross-entropy
    plus (l2/2)||W||^2, with the bias as an appended all-ones feature."""
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    total = 0.0
    for row, label in zip(Xb, labels):
        logits = W @ row
        logZ = np.log(np.exp(logits - logits.max()).sum()) + logits.max()
        total += logZ - logits[classes.index(label)]
    return total / X.shape[0] + 0.5 * l2 * float((W * W).sum())


def fd_gradient(W, X, labels, classes, l2, h=1e-6):
    grad = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        plus = W.copy()
        plus[idx] += h
        minus = W.copy()
        minus[idx] -= h
        grad[idx] = (
            independent_loss(plus, X, labels, classes, l2)
            - independent_loss(minus, X, labels, classes, l2)
        ) / (2 * h)
    return grad


class TestTraining:
    def test_separable_blobs_high_accuracy(self, rng):
        X, y_idx = speaker_blobs(rng, 30, 2, n_speakers=2, spread=0.3, separation=4.0)
        y = [f"lang{i}" for i in y_idx]
        model = train(X, y)
        correct = sum(predict(model, x)[0] == label for x, label in zip(X, y))
        assert correct / len(y) >= 0.99

    def test_gradient_matches_finite_differences(self, rng):
        from diarkit.lid import _loss_grad

        for _ in range(50):
            n = int(rng.integers(4, 12))
            d = int(rng.integers(2, 5))
            n_classes = int(rng.integers(2, 5))
            classes = [f"c{i}" for i in range(n_classes)]
            X = rng.normal(0, 1, (n, d))
            labels = [classes[i] for i in rng.integers(0, n_classes, n)]
            l2 = float(rng.uniform(0, 0.1))
            W = rng.normal(0, 0.5, (n_classes, d + 1))

            Xb = np.hstack([X, np.ones((n, 1))])
            Y = np.zeros((n, n_classes))
            Y[np.arange(n), [classes.index(l) for l in labels]] = 1.0
            loss, grad = _loss_grad(W, Xb, Y, l2)

            assert loss == pytest.approx(independent_loss(W, X, labels, classes, l2), rel=1e-10)
            numeric = fd_gradient(W, X, labels, classes, l2)
            rel = np.linalg.norm(grad - numeric) / max(np.linalg.norm(numeric), 1e-12)
            assert rel <= 1e-5

    def test_loss_non_increasing(self, rng):
        X, y_idx = speaker_blobs(rng, 15, 3, n_speakers=3, spread=0.8, separation=2.0)
        model = train(X, [str(i) for i in y_idx])
        losses = np.array(model.losses)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_identical_points_split_probability(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0]])
        model = train(X, ["a", "b"])
        proba = predict_proba(model, X)
        assert np.allclose(proba, 0.5, atol=1e-9)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="2 distinct classes"):
            train(np.ones((3, 2)), ["a", "a", "a"])

    def test_nan_features_rejected(self):
        X = np.array([[np.nan, 1.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            train(X, ["a", "b"])

    def test_label_count_mismatch(self):
        with pytest.raises(ValueError):
            train(np.ones((3, 2)), ["a", "b"])

    def test_example_order_invariance(self, rng):
        X, y_idx = speaker_blobs(rng, 10, 3, n_speakers=2, spread=0.5, separation=3.0)
        y = [str(i) for i in y_idx]
        model = train(X, y)
        perm = rng.permutation(len(y))
        shuffled = train(X[perm], [y[i] for i in perm])
        assert model.classes == shuffled.classes
        assert np.allclose(model.weights, shuffled.weights, atol=1e-9)
        grid = rng.normal(0, 2, (20, 3))
        base = [predict(model, x)[0] for x in grid]
        assert base == [predict(shuffled, x)[0] for x in grid]


class TestPrediction:
    def test_zero_weights_uniform_first_class(self):
        from diarkit.lid import LogRegModel

        model = LogRegModel(classes=("en", "hi", "pa"), weights=np.zeros((3, 5)), l2=0.0)
        label, confidence = predict(model, np.ones(4))
        assert label == "en"
        assert confidence == pytest.approx(1 / 3)

    def test_high_confidence_inside_blob(self, rng):
        X, y_idx = speaker_blobs(rng, 30, 2, n_speakers=2, spread=0.3, separation=4.0)
        y = [f"l{i}" for i in y_idx]
        model = train(X, y)
        center = X[y_idx == 0].mean(axis=0)
        label, confidence = predict(model, center)
        assert label == "l0"
        assert confidence > 0.9

    def test_confidence_bounds(self, rng):
        X, y_idx = speaker_blobs(rng, 10, 3, n_speakers=3, spread=1.5, separation=2.0)
        model = train(X, [str(i) for i in y_idx])
        n_classes = len(model.classes)
        for x in rng.normal(0, 3, (50, 3)):
            _, confidence = predict(model, x)
            assert 1 / n_classes - 1e-12 <= confidence <= 1.0

    def test_softmax_rows_sum_to_one(self, rng):
        X, y_idx = speaker_blobs(rng, 10, 4, n_speakers=3, spread=1.0, separation=3.0)
        model = train(X, [str(i) for i in y_idx])
        proba = predict_proba(model, rng.normal(0, 2, (30, 4)))
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_logit_shift_invariance(self, rng):
        from diarkit.lid import LogRegModel

        W = rng.normal(0, 1, (3, 5))
        model = LogRegModel(classes=("a", "b", "c"), weights=W, l2=0.0)
        shifted = LogRegModel(classes=("a", "b", "c"), weights=W + 3.7, l2=0.0)
        x = rng.normal(0, 1, 4)
        assert np.allclose(predict_proba(model, x.reshape(1, -1)), predict_proba(shifted, x.reshape(1, -1)))

    def test_dim_mismatch(self, rng):
        X, y_idx = speaker_blobs(rng, 5, 4, n_speakers=2, spread=0.5, separation=3.0)
        model = train(X, [str(i) for i in y_idx])
        with pytest.raises(ValueError, match="dim"):
            predict(model, np.ones(3))


class TestPredictSegments:
    def _embeddings(self, rng, n):
        meta = tuple(
            SegmentRecord(f"ID{i % 2}", TimeSpan(float(i), float(i) + 3.0)) for i in range(n)
        )
        return EmbeddingSet(dim=4, rows=rng.normal(0, 1, (n, 4)).astype(np.float32), meta=meta)

    def test_empty(self, rng):
        X, y_idx = speaker_blobs(rng, 5, 4, n_speakers=2, spread=0.5, separation=3.0)
        model = train(X, [str(i) for i in y_idx])
        empty = EmbeddingSet(dim=4, rows=np.zeros((0, 4), dtype=np.float32), meta=())
        assert predict_segments(model, empty) == []

    def test_one_record_per_chunk_in_span_order(self, rng):
        X, y_idx = speaker_blobs(rng, 5, 4, n_speakers=2, spread=0.5, separation=3.0)
        model = train(X, [str(i) for i in y_idx])
        embeddings = self._embeddings(rng, 7)
        records = predict_segments(model, embeddings)
        assert len(records) == 7
        keys = [(r.file_id, r.span.start) for r in records]
        assert keys == sorted(keys)

    def test_labels_match_elementwise_predict(self, rng):
        X, y_idx = speaker_blobs(rng, 5, 4, n_speakers=2, spread=0.5, separation=3.0)
        model = train(X, [str(i) for i in y_idx])
        embeddings = self._embeddings(rng, 6)
        by_key = {
            (r.file_id, r.span.start): (r.language, r.confidence)
            for r in predict_segments(model, embeddings)
        }
        for row, meta in zip(embeddings.rows, embeddings.meta):
            label, confidence = predict(model, row)
            got_label, got_confidence = by_key[(meta.file_id, meta.span.start)]
            assert got_label == label
            assert got_confidence == pytest.approx(confidence)


class TestSerialization:
    def test_round_trip_bytes_stable(self, rng):
        X, y_idx = speaker_blobs(rng, 10, 6, n_speakers=3, spread=0.5, separation=3.0)
        model = train(X, [f"lang_{i}" for i in y_idx])
        payload = save_model(model)
        reloaded = load_model(payload)
        assert reloaded.classes == model.classes
        assert reloaded.dim == model.dim
        assert save_model(reloaded) == payload  # float32 fixpoint
        assert np.allclose(reloaded.weights, model.weights, atol=1e-5)

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="bad magic"):
            load_model(b"NOPE" + b"\x00" * 30)

    def test_truncated(self, rng):
        X, y_idx = speaker_blobs(rng, 6, 3, n_speakers=2, spread=0.5, separation=3.0)
        payload = save_model(train(X, [str(i) for i in y_idx]))
        with pytest.raises(FormatError, match="truncated"):
            load_model(payload[:-3])


class TestEstimatorApi:
    def test_fit_predict_proba(self, rng):
        X, y_idx = speaker_blobs(rng, 25, 3, n_speakers=3, spread=0.3, separation=4.0)
        y = np.array(["hi", "pa", "en"])[y_idx]
        clf = LogisticLanguageID().fit(X, y)
        assert set(clf.classes_) == {"hi", "pa", "en"}
        assert (clf.predict(X) == y).mean() >= 0.99
        proba = clf.predict_proba(X)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert clf.get_params()["l2"] == pytest.approx(1e-3)
