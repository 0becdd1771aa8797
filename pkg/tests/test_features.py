import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pipeline_rto.dataset import EffectiveVerdict
from pipeline_rto.features import (
    FeaturePipeline, PCAModel, TestHistory, Vocabulary, assemble_features, bow_vector, duration_percentile,
    encode_history, fit_pca, project_pca, tokenize_name,
)

P, F = EffectiveVerdict.PASS, EffectiveVerdict.FAIL


def history_of(verdicts, start=0, duration=1.0):
    h = TestHistory("//t")
    for i, v in enumerate(verdicts):
        h.record(start + i, v, duration)
    return h


def test_encode_history_examples():
    assert encode_history([P, F], 4).tolist() == [1, 0, 0, 0]
    assert encode_history([], 25).tolist() == [0] * 25
    long = [F] * 5 + [P] * 25
    assert encode_history(long, 25).tolist() == [0] * 25


def test_history_ignores_outcomeless_runs():
    h = history_of([P, EffectiveVerdict.IGNORED, F])
    assert h.verdicts == [P, F]
    assert h.last_failure == 2 and h.last_execution == 2


@pytest.mark.parametrize("name, tokens", [
    ("//app/componentA/feature1:unit_tests", ["app", "componenta", "feature1", "unit", "tests"]),
    ("//a:b", ["a", "b"]),
    ("//x//y::z", ["x", "y", "z"]),
    ("lib.core-io", ["lib", "core", "io"]),
])
def test_tokenize(name, tokens):
    assert tokenize_name(name) == tokens


def test_bow_examples():
    vocab = Vocabulary({"a": 0, "b": 1, "c": 2})
    assert bow_vector("a/a:b", vocab).tolist() == [2, 1, 0]
    assert bow_vector("//x:y", vocab).tolist() == [0, 0, 0]
    assert bow_vector("//a", Vocabulary({})).shape == (0,)


def test_vocabulary_is_sorted_and_roundtrips():
    vocab = Vocabulary.fit(["//b/a:c", "//a:d"])
    assert vocab.index == {"a": 0, "b": 1, "c": 2, "d": 3}
    assert Vocabulary.from_dict(vocab.to_dict()) == vocab


def test_pca_diagonal_points():
    model = fit_pca(np.array([[1, 1], [-1, -1], [2, 2], [-2, -2]]), 1)
    assert np.allclose(model.components[0], [0.70710678, 0.70710678])
    assert model.explained_variance[0] == pytest.approx(20 / 3)
    total = np.var([[1, 1], [-1, -1], [2, 2], [-2, -2]], axis=0, ddof=1).sum()
    assert model.explained_variance.sum() / total == pytest.approx(1.0)


def test_pca_identical_rows():
    model = fit_pca(np.ones((5, 3)), 2)
    assert model.explained_variance.tolist() == [0, 0]
    assert not model.components.any()


def test_pca_lossless_reconstruction():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(8, 4))
    model = fit_pca(rows, 4)
    for row in rows:
        back = model.components.T @ project_pca(model, row) + model.mean
        assert np.allclose(back, row, atol=1e-6)


@pytest.mark.parametrize("d", [-1, 4])
def test_pca_dimension_checked(d):
    with pytest.raises(ValueError):
        fit_pca(np.eye(4), d)


def test_pca_needs_two_rows():
    with pytest.raises(ValueError):
        fit_pca(np.ones((1, 3)), 0)


def test_pca_matches_sklearn():
    from sklearn.decomposition import PCA

    rng = np.random.default_rng(4)
    rows = rng.poisson(1.0, size=(30, 9)).astype(float)
    ours = fit_pca(rows, 5)
    ref = PCA(n_components=5, svd_solver="full").fit(rows)
    assert np.allclose(ours.explained_variance, ref.explained_variance_, atol=1e-10)
    for a, b in zip(ours.components, ref.components_):
        assert np.allclose(a, b, atol=1e-8) or np.allclose(a, -b, atol=1e-8)
    assert np.allclose(np.abs(ref.transform(rows)), np.abs([project_pca(ours, r) for r in rows]), atol=1e-8)


def test_projection_examples():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(6, 3))
    model = fit_pca(rows, 2)
    assert np.allclose(project_pca(model, model.mean), 0)
    assert np.allclose(project_pca(model, model.mean + model.components[0]), [1, 0])
    v = rng.normal(size=3)
    naive = [sum(c[j] * (v[j] - model.mean[j]) for j in range(3)) for c in model.components]
    assert np.allclose(project_pca(model, v), naive)
    with pytest.raises(ValueError):
        project_pca(model, np.zeros(4))


def test_pca_model_roundtrip():
    model = fit_pca(np.random.default_rng(2).normal(size=(5, 3)), 2)
    again = PCAModel.from_dict(model.to_dict())
    assert np.array_equal(again.components, model.components)


def test_cold_start_features():
    fv = assemble_features(TestHistory("//t"), np.zeros(2), now=10, k=5)
    assert fv.result_history.tolist() == [0] * 5
    assert (fv.last_failure, fv.last_execution, fv.avg_duration) == (1.0, 1.0, 1.0)


def test_recency_and_duration_features():
    h = history_of([P, F], start=8)
    fv = assemble_features(h, np.zeros(0), now=10, k=3, horizon=100)
    assert fv.last_failure == pytest.approx(0.01)
    assert fv.last_execution == pytest.approx(0.01)
    h2 = TestHistory("//t")
    h2.record(0, P, 10.0)
    h2.record(1, P, 30.0)
    assert assemble_features(h2, np.zeros(0), 2, 3, duration_scale=40.0).avg_duration == 0.5
    assert assemble_features(h2, np.zeros(0), 2, 3, duration_scale=5.0).avg_duration == 2.0
    assert assemble_features(h2, np.zeros(0), 500, 3).last_execution == 1.0


def test_duration_percentile():
    hs = [history_of([P], duration=d) for d in (10.0, 20.0, 30.0)]
    assert duration_percentile(hs, 50) == 20.0
    assert duration_percentile([TestHistory("//x")]) is None


def test_pipeline_dimensions_and_roundtrip():
    names = [f"//app/comp{i % 3}/f{i}:unit_tests" for i in range(6)]
    pipe = FeaturePipeline.fit(names, k=5, pca_dim=16)
    # clamped to N - 1 rows
    assert pipe.embedding_dim == 5
    assert pipe.dim == 5 + 5 + 3
    vec = pipe.build(history_of([F, P]), now=3, duration_scale=1.0)
    assert vec.shape == (pipe.dim,) and np.all(np.isfinite(vec))
    again = FeaturePipeline.from_dict(pipe.to_dict())
    assert np.array_equal(again.build(history_of([F, P]), 3, 1.0), vec)
    # unseen tokens are ignored, the vector length stays fixed
    assert pipe.build(TestHistory("//brand/new:thing"), 3, None).shape == (pipe.dim,)


# --- properties -------------------------------------------------------------

verdict_lists = st.lists(st.sampled_from([P, F]), max_size=40)


@given(verdict_lists, st.sampled_from([P, F]), st.integers(1, 30))
def test_append_shifts_history(seq, new, k):
    before = encode_history(seq, k)
    after = encode_history(seq + [new], k)
    assert after[0] == (1.0 if new is F else 0.0)
    assert np.array_equal(after[1:], before[:-1])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 6)),
              elements=st.floats(-5, 5, allow_nan=False)))
def test_pca_orthonormal_and_sorted(rows):
    n, v = rows.shape
    d = min(n - 1, v)
    model = fit_pca(rows, d)
    nonzero = [c for c in model.components if np.any(c)]
    if nonzero:
        c = np.array(nonzero)
        assert np.allclose(c @ c.T, np.eye(len(c)), atol=1e-6)
    assert np.all(np.diff(model.explained_variance) <= 1e-9)
    total = np.var(rows, axis=0, ddof=1).sum()
    assert model.explained_variance.sum() <= total + 1e-6
