import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ogeec.embedding import EmbeddedMatrix, embed_single
from ogeec.predictor import (
    batch_predict,
    format_predictions,
    knn,
    predict,
    propagate,
    top_k_labels,
)


def matrix_of(columns: np.ndarray) -> EmbeddedMatrix:
    data = np.asfortranarray(np.asarray(columns, dtype=np.float32))
    return EmbeddedMatrix(r=data.shape[0], n=data.shape[1], data=data)


def naive_knn(data: np.ndarray, q: np.ndarray, k: int):
    """Independent reference scan: per-column float64 dots, full sort."""
    sims = [
        float(np.dot(q.astype(np.float64), data[:, i].astype(np.float64)))
        for i in range(data.shape[1])
    ]
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], i))
    return [(i, sims[i]) for i in order[: min(k, len(sims))]]


def test_knn_query_equals_training_column(small_spec, small_ds, small_embedded):
    j = 11
    q = embed_single(small_spec, small_ds.feature_row(j))
    entries = knn(q, small_embedded, 5)
    assert entries[0][0] == j
    assert abs(entries[0][1] - 1.0) < 1e-5


def test_knn_orthogonal_columns():
    train = matrix_of(np.eye(3))
    q = np.array([1.0, 0.0, 0.0], dtype=np.float32)
    assert knn(q, train, 3) == [(0, 1.0), (1, 0.0), (2, 0.0)]


def test_knn_matches_naive_scan():
    rng = np.random.default_rng(8)
    cols = rng.normal(size=(200, 500))
    cols /= np.linalg.norm(cols, axis=0)
    train = matrix_of(cols)
    for qi in range(20):
        q = rng.normal(size=200)
        q = (q / np.linalg.norm(q)).astype(np.float32)
        got = knn(q, train, 7)
        want = naive_knn(train.data, q, 7)
        assert [i for i, _ in got] == [i for i, _ in want]
        np.testing.assert_allclose(
            [s for _, s in got], [s for _, s in want], rtol=0, atol=1e-12
        )


def test_knn_tie_break_ascending_index():
    base = np.array([[0.6, 1.0, 0.6, 0.3], [0.8, 0.0, 0.8, 0.954]])
    train = matrix_of(base)
    q = np.array([0.6, 0.8], dtype=np.float32)
    entries = knn(q, train, 3)
    # columns 0 and 2 are byte-identical: exact tie, lower index first
    assert [i for i, _ in entries][:2] == [0, 2]
    assert entries[0][1] == entries[1][1]


def test_knn_k_larger_than_n():
    train = matrix_of(np.eye(2))
    q = np.array([1.0, 0.0], dtype=np.float32)
    assert len(knn(q, train, 10)) == 2


def test_knn_exclude_self():
    train = matrix_of(np.eye(3))
    q = np.array([1.0, 0.0, 0.0], dtype=np.float32)
    entries = knn(q, train, 3, exclude=0)
    assert 0 not in [i for i, _ in entries]
    assert len(entries) == 2


def test_knn_dimension_mismatch(small_embedded):
    with pytest.raises(ValueError, match="dimensionality"):
        knn(np.zeros(small_embedded.r + 1, dtype=np.float32), small_embedded, 3)


@settings(deadline=None, max_examples=50)
@given(
    cols=arrays(
        np.float64,
        st.tuples(st.integers(2, 6), st.integers(1, 12)),
        elements=st.floats(-1, 1, allow_nan=False),
    ),
    extra=arrays(np.float64, st.integers(2, 6), elements=st.floats(-1, 1, allow_nan=False)),
    k=st.integers(1, 5),
)
def test_knn_monotone_under_added_sample(cols, extra, k):
    """A new training sample can only enter the list or displace entries whose
    similarity is not above its own; survivors keep their relative order."""
    if extra.shape[0] != cols.shape[0]:
        extra = np.resize(extra, cols.shape[0])
    q = np.ones(cols.shape[0], dtype=np.float32)
    old = knn(q, matrix_of(cols), k)
    new = knn(q, matrix_of(np.column_stack([cols, extra])), k)
    n_old = cols.shape[1]
    old_ids = [i for i, _ in old]
    new_ids = [i for i, _ in new]
    assert set(new_ids) <= set(old_ids) | {n_old}
    survivors = [i for i in old_ids if i in set(new_ids)]
    assert [i for i in new_ids if i != n_old] == survivors
    if n_old in set(new_ids):
        sim_new = dict(new)[n_old]
        for i, s in old:
            if i not in set(new_ids):
                assert s <= sim_new + 1e-12


def test_propagate_single_neighbor():
    labelsets = [np.array([2, 5])]
    assert propagate([(0, 0.8)], labelsets, 6) == {2: 0.8, 5: 0.8}


def test_propagate_two_neighbors_hand_sum():
    labelsets = [np.array([1, 3]), np.array([3])]
    scores = propagate([(0, 0.9), (1, 0.4)], labelsets, 4)
    assert scores == {1: 0.9, 3: pytest.approx(1.3, abs=1e-12)}


def test_propagate_clamps_negative_similarity():
    labelsets = [np.array([0, 1])]
    assert propagate([(0, -0.2)], labelsets, 2) == {}
    assert propagate([(0, 0.0)], labelsets, 2) == {}


def test_propagate_linearity_over_disjoint_neighbors():
    rng = np.random.default_rng(0)
    labelsets = [rng.choice(20, size=3, replace=False) for _ in range(10)]
    first = [(i, float(rng.uniform(0.1, 1.0))) for i in range(5)]
    second = [(i, float(rng.uniform(0.1, 1.0))) for i in range(5, 10)]
    merged = propagate(first + second, labelsets, 20)
    a = propagate(first, labelsets, 20)
    b = propagate(second, labelsets, 20)
    summed = {w: a.get(w, 0.0) + b.get(w, 0.0) for w in set(a) | set(b)}
    assert merged.keys() == summed.keys()
    for w in merged:
        assert merged[w] == pytest.approx(summed[w], abs=1e-12)


def test_propagate_bad_index():
    with pytest.raises(IndexError):
        propagate([(3, 0.5)], [np.array([0])], 1)


def test_top_k_labels_tie_rule():
    assert top_k_labels({2: 0.8, 5: 0.8}, 1) == [2]
    assert top_k_labels({1: 0.9, 3: 1.3}, 3) == [3, 1]
    assert top_k_labels({}, 4) == []


def test_predict_is_composition(small_spec, small_ds, small_embedded):
    labelsets = small_ds.labelsets()
    query = small_ds.feature_row(3)
    direct = predict(small_spec, small_embedded, labelsets, query, 5)
    q = embed_single(small_spec, query)
    manual = propagate(knn(q, small_embedded, 5), labelsets, small_ds.L)
    assert direct == manual


def test_predict_training_point_matches_itself(small_spec, small_ds, small_embedded):
    q = embed_single(small_spec, small_ds.feature_row(17))
    entries = knn(q, small_embedded, 5)
    by_index = dict(entries)
    assert 17 in by_index
    assert abs(by_index[17] - 1.0) < 1e-5


def test_batch_predict_equals_per_query(small_spec, small_ds, small_embedded, train_test):
    train, test = train_test
    # reuse the small corpus as both train and queries to keep this quick
    labelsets = small_ds.labelsets()
    sub = small_ds
    batched = batch_predict(small_spec, small_embedded, labelsets, sub, 5, chunk=7)
    for i in range(0, sub.n, 37):
        single = predict(small_spec, small_embedded, labelsets, sub.feature_row(i), 5)
        assert batched[i] == single


def test_batch_predict_worker_invariance(small_spec, small_ds, small_embedded):
    labelsets = small_ds.labelsets()
    one = batch_predict(small_spec, small_embedded, labelsets, small_ds, 5, workers=1)
    many = batch_predict(small_spec, small_embedded, labelsets, small_ds, 5, workers=4)
    assert one == many


def test_format_predictions():
    scores = [{3: 1.25, 1: 0.5}, {}, {2: 0.75}]
    text = format_predictions(scores, 2)
    assert text == "3:1.25\t1:0.5\n\n2:0.75\n"
