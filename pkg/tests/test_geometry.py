import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activegrowth.geometry import (
    DegenerateEmbeddingError,
    divergence_matrix,
    embed,
    jeffreys,
    pairwise_jeffreys,
    similarity,
    write_embedding,
)
from activegrowth.model import Factor, GenerativeModel, Modality


def model_with_columns(a):
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    f = Factor("f", np.eye(n)[:, :, None], np.ones(n), np.ones(1))
    return GenerativeModel([f], [Modality("g", a, np.zeros(a.shape[0]), ["f"])])


class TestJeffreys:
    def test_self_divergence_zero(self):
        p = np.array([0.2, 0.3, 0.5])
        assert jeffreys(p, p) == 0.0

    @pytest.mark.parametrize("eps", [0.1, 0.01, 1e-4])
    def test_closed_form(self, eps):
        p, q = np.array([1 - eps, eps]), np.array([eps, 1 - eps])
        assert jeffreys(p, q) == pytest.approx(2 * (1 - 2 * eps) * math.log((1 - eps) / eps), rel=1e-12)

    @given(st.integers(0, 2**31 - 1))
    def test_symmetric_and_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert jeffreys(p, q) == pytest.approx(jeffreys(q, p), abs=1e-12)
        assert jeffreys(p, q) >= 0

    def test_pairwise_matches_scalar(self, rng):
        cols = rng.dirichlet(np.ones(3), size=5).T
        D = pairwise_jeffreys(cols)
        for i in range(5):
            for j in range(5):
                assert D[i, j] == pytest.approx(jeffreys(cols[:, i], cols[:, j]), abs=1e-10)

    def test_zero_probability_is_finite(self):
        assert np.isfinite(jeffreys([1.0, 0.0], [0.0, 1.0]))


class TestEmbedding:
    def test_identical_states(self):
        e = embed(model_with_columns([[2.0, 2.0], [1.0, 1.0]]))
        np.testing.assert_allclose(e.similarity, 1.0)
        np.testing.assert_allclose(e.eigenvalues, [2.0, 0.0], atol=1e-12)

    def test_most_distant_pair_antipodal(self):
        e = embed(model_with_columns([[9.0, 1.0, 5.0], [1.0, 9.0, 5.0]]))
        assert e.similarity[0, 1] == pytest.approx(-1.0)
        assert np.all(e.similarity >= -1 - 1e-12) and np.all(e.similarity <= 1 + 1e-12)

    @pytest.mark.parametrize("cols", [[[9.0, 1.0], [1.0, 9.0]], [[9.0, 1.0, 9.0], [1.0, 9.0, 1.0]]])
    def test_chord_distances_reconstruct_similarity(self, cols):
        e = embed(model_with_columns(cols))
        assert e.stress == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(e.chord_distances() ** 2, 2 - 2 * e.similarity, atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 6))
    def test_similarity_range(self, seed, n):
        rng = np.random.default_rng(seed)
        e = embed(model_with_columns(rng.gamma(1.0, size=(3, n)) + 0.01))
        assert np.all(np.abs(e.similarity) <= 1 + 1e-12)
        np.testing.assert_allclose(np.diag(e.similarity), 1.0)
        assert e.stress >= 0

    def test_sign_convention(self, rng):
        e = embed(model_with_columns(rng.gamma(1.0, size=(3, 5)) + 0.01))
        vecs = e.coordinates
        for k in range(vecs.shape[1]):
            col = vecs[:, k]
            if np.abs(col).max() > 1e-9:
                assert col[np.argmax(np.abs(col))] > 0

    def test_single_state_rejected(self):
        with pytest.raises(DegenerateEmbeddingError):
            embed(model_with_columns([[1.0], [1.0]]))

    def test_subset_of_states(self, rng):
        m = model_with_columns(rng.gamma(1.0, size=(3, 5)) + 0.01)
        full = divergence_matrix(m)
        sub = divergence_matrix(m, np.array([1, 3]))
        assert sub[0, 1] == pytest.approx(full[1, 3])

    def test_two_modalities_add_in_quadrature(self):
        f = Factor("f", np.eye(2)[:, :, None], np.ones(2), np.ones(1))
        a = np.array([[3.0, 1.0], [1.0, 3.0]])
        one = GenerativeModel([f], [Modality("g", a, np.zeros(2), ["f"])])
        two = GenerativeModel([f], [Modality("g", a, np.zeros(2), ["f"]), Modality("h", a, np.zeros(2), ["f"])])
        assert divergence_matrix(two)[0, 1] == pytest.approx(math.sqrt(2) * divergence_matrix(one)[0, 1])

    def test_similarity_all_zero(self):
        np.testing.assert_array_equal(similarity(np.zeros((3, 3))), np.ones((3, 3)))

    def test_write_embedding(self, tmp_path, rng):
        e = embed(model_with_columns(rng.gamma(1.0, size=(3, 4)) + 0.01))
        path = tmp_path / "embedding.csv"
        write_embedding(e, path, labels=["a", "b", "c", "d"])
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["state", "label", "coord_1", "coord_2", "coord_3"]
        assert [r[1] for r in rows[1:]] == ["a", "b", "c", "d"]
