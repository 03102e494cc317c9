import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from activegrowth.tensor import (
    DegenerateTensorError,
    NumericDomainError,
    ShapeError,
    contract,
    contract_all,
    elog,
    entropy,
    kl_categorical,
    log_beta,
    normalize,
    outer,
    softmax,
)


def loop_contract(t, v, axis):
    """Index-loop reference for a single-axis contraction."""
    out_shape = t.shape[:axis] + t.shape[axis + 1 :]
    out = np.zeros(out_shape)
    for idx in itertools.product(*[range(n) for n in t.shape]):
        rest = idx[:axis] + idx[axis + 1 :]
        out[rest] += t[idx] * v[idx[axis]]
    return out


class TestContract:
    def test_identity(self):
        np.testing.assert_allclose(contract(np.eye(2), [0.3, 0.7], 0), [0.3, 0.7])

    def test_ones_gives_column_sums(self):
        np.testing.assert_allclose(contract(np.ones((2, 3)), [1, 1], 0), [2, 2, 2])

    def test_uniform_matches_loop(self, rng):
        t = rng.random((3, 4))
        v = np.full(3, 1 / 3)
        np.testing.assert_allclose(contract(t, v, 0), loop_contract(t, v, 0), atol=1e-12)

    @pytest.mark.parametrize("rank", [2, 3, 4, 5])
    def test_matches_loop_up_to_rank_five(self, rng, rank):
        shape = tuple(rng.integers(2, 4, size=rank))
        t = rng.random(shape)
        for axis in range(rank):
            v = rng.random(shape[axis])
            np.testing.assert_allclose(contract(t, v, axis), loop_contract(t, v, axis), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            contract(np.ones((2, 3)), [1, 1, 1], 0)

    def test_contract_all_skip(self, rng):
        t = rng.random((2, 3, 4))
        a, b = rng.random(3), rng.random(4)
        full = contract_all(t, [a, b])
        np.testing.assert_allclose(full, np.einsum("ijk,j,k->i", t, a, b))
        part = contract_all(t, [a, b], skip=(0,))
        np.testing.assert_allclose(part, np.einsum("ijk,k->ij", t, b))


class TestOuter:
    def test_single(self):
        np.testing.assert_array_equal(outer([[1, 0]]), [1, 0])

    def test_one_hot(self):
        np.testing.assert_array_equal(outer([[1, 0], [0, 1]]), [[0, 1], [0, 0]])

    def test_mass(self, rng):
        vs = [rng.dirichlet(np.ones(n)) for n in (2, 3, 4)]
        assert outer(vs).sum() == pytest.approx(1.0, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            outer([])


class TestNormalize:
    def test_columns(self):
        np.testing.assert_allclose(normalize([[2], [2]], "columns"), [[0.5], [0.5]])

    def test_joint(self):
        np.testing.assert_allclose(normalize([[1, 3], [1, 3]], "joint"), [[0.125, 0.375], [0.125, 0.375]])

    def test_zero_column(self):
        with pytest.raises(DegenerateTensorError):
            normalize([[0, 1], [0, 1]])

    @given(arrays(float, (3, 2, 2), elements=st.floats(0.01, 100)))
    def test_fibres_sum_to_one(self, t):
        np.testing.assert_allclose(normalize(t).sum(axis=0), 1.0, atol=1e-9)
        assert normalize(t, "joint").sum() == pytest.approx(1.0, abs=1e-9)


class TestElog:
    def test_unit_counts(self):
        np.testing.assert_allclose(elog([[1.0], [1.0]]), [[-1.0], [-1.0]], atol=1e-12)

    def test_large_counts_approach_log(self):
        np.testing.assert_allclose(elog([[1000.0], [1000.0]]), np.log(0.5), atol=1e-3)

    def test_nonpositive(self):
        with pytest.raises(NumericDomainError):
            elog([[0.0], [1.0]])

    @given(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(0.01, 5))
    def test_monotone_in_own_count(self, a, b, step):
        lo = elog([[a], [b]])[0, 0]
        hi = elog([[a + step], [b]])[0, 0]
        assert hi > lo

    @given(arrays(float, (3, 2), elements=st.floats(0.05, 1e4)))
    def test_exp_columns_subnormalised(self, t):
        s = np.exp(elog(t)).sum(axis=0)
        assert np.all(s > 0) and np.all(s <= 1 + 1e-12)


class TestSoftmax:
    @pytest.mark.parametrize("alpha", [1e-6, 1.0, 1e6])
    def test_symmetric(self, alpha):
        np.testing.assert_allclose(softmax([0, 0], alpha), [0.5, 0.5])

    def test_selection_limit(self):
        np.testing.assert_allclose(softmax([1, 0], 1e9), [1, 0])

    def test_exact_ratio(self):
        np.testing.assert_allclose(softmax([math.log(3), 0]), [0.75, 0.25])

    @given(
        arrays(float, st.integers(1, 6), elements=st.floats(-1e3, 1e3)),
        st.floats(1e-6, 1e6),
    )
    def test_valid_categorical(self, x, alpha):
        p = softmax(x, alpha)
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-9)

    @given(arrays(float, 4, elements=st.floats(-50, 50)), st.floats(-100, 100))
    def test_shift_invariant(self, x, c):
        np.testing.assert_allclose(softmax(x), softmax(x + c), atol=1e-12)


class TestLogBeta:
    def test_uniform(self):
        assert log_beta([1, 1]) == pytest.approx(0.0, abs=1e-14)

    def test_two_two(self):
        assert log_beta([2, 2]) == pytest.approx(math.log(1 / 6), abs=1e-12)

    def test_permutation(self, rng):
        a = rng.uniform(0.1, 5, size=4)
        assert log_beta(a) == pytest.approx(log_beta(a[::-1]), abs=1e-12)

    @pytest.mark.parametrize("a", [[0.7, 2.5], [3.0, 4.5], [1.5, 2.0, 2.5], [2.0, 3.0, 1.2]])
    def test_matches_quadrature(self, a):
        a = np.array(a)
        f = lambda *x: np.prod(np.append(x, 1 - sum(x)) ** (a - 1))  # noqa: E731
        if len(a) == 2:
            val, _ = integrate.quad(f, 0, 1, epsrel=1e-12)
        else:
            val, _ = integrate.dblquad(lambda y, x: f(x, y), 0, 1, 0, lambda x: 1 - x, epsrel=1e-11)
        assert math.exp(log_beta(a)) == pytest.approx(val, rel=1e-6)


def test_entropy_and_kl():
    assert entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert entropy([1.0, 0.0]) == 0.0
    assert kl_categorical([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_categorical([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
