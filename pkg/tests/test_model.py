import numpy as np
import pytest

from activegrowth.model import (
    Factor,
    GenerativeModel,
    Modality,
    ModelFormatError,
    VersionError,
    deserialize,
    deserialize_epochs,
    load_model,
    new_minimal,
    save_model,
    serialize,
    serialize_epochs,
    validate,
)


def models_equal(a, b):
    if a.structure() != b.structure() or len(a.modalities) != len(b.modalities):
        return False
    for f, g in zip(a.factors, b.factors):
        if f.id != g.id or f.controllable != g.controllable:
            return False
        for x, y in ((f.transition, g.transition), (f.initial, g.initial), (f.path_prior, g.path_prior)):
            if not np.array_equal(x, y):
                return False
    for m, n in zip(a.modalities, b.modalities):
        if m.id != n.id or m.parents != n.parents:
            return False
        if not (np.array_equal(m.likelihood, n.likelihood) and np.array_equal(m.preference, n.preference)):
            return False
    return (a.concentration, a.alpha, a.planning_depth) == (b.concentration, b.alpha, b.planning_depth)


class TestNewMinimal:
    def test_counts(self):
        m = new_minimal([("px", 2)], 1 / 16)
        np.testing.assert_array_equal(m.modalities[0].likelihood, [[0.0625], [0.0625]])

    def test_transition(self):
        m = new_minimal([("px", 2)], 1 / 16)
        b = m.factors[0].transition
        np.testing.assert_array_equal(b / b.sum(axis=0), [[[1.0]]])

    def test_valid(self):
        assert validate(new_minimal([("a", 2), ("b", 3)])) == []

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_bad_concentration(self, bad):
        with pytest.raises(ValueError):
            new_minimal([("px", 2)], bad)


class TestValidate:
    def test_gridworld_model(self, gridworld_learned):
        source, res = gridworld_learned
        assert validate(source) == []
        assert validate(res.model) == []

    def test_non_identity_stationary_path(self):
        m = new_minimal([("px", 2)])
        m.factors[0].transition = np.array([[[1.0], [1.0]], [[1.0], [1.0]]])
        m.factors[0].initial = np.ones(2)
        m.modalities[0].likelihood = np.ones((2, 2))
        problems = validate(m)
        assert len(problems) == 1
        assert "f0" in problems[0] and "path 0" in problems[0]

    def test_missing_parent(self):
        m = new_minimal([("px", 2)])
        m.modalities[0].parents = ["nope"]
        problems = validate(m)
        assert len(problems) == 1 and "nope" in problems[0]

    def test_zero_column(self):
        m = new_minimal([("px", 2)])
        m.modalities[0].likelihood = np.zeros((2, 1))
        assert any("all-zero column" in p for p in validate(m))


class TestSerialization:
    def test_round_trip_minimal(self):
        m = new_minimal([("a", 2), ("b", 3)], 1 / 16)
        assert models_equal(deserialize(serialize(m)), m)

    def test_round_trip_learned_hanoi(self, hanoi_learned):
        m = hanoi_learned.model
        assert m.n_states == (60,)
        assert models_equal(deserialize(serialize(m)), m)

    def test_round_trip_preserves_floats_exactly(self, rng):
        m = new_minimal([("a", 3)])
        m.modalities[0].likelihood = rng.random((3, 1)) + 1e-3
        m.modalities[0].preference = rng.normal(size=3)
        assert models_equal(deserialize(serialize(m)), m)

    def test_deterministic(self, hanoi_learned):
        assert serialize(hanoi_learned.model) == serialize(hanoi_learned.model.copy())

    def test_truncated(self):
        data = serialize(new_minimal([("a", 2)]))
        with pytest.raises(ModelFormatError):
            deserialize(data[: len(data) // 2])

    def test_wrong_version(self):
        data = serialize(new_minimal([("a", 2)])).replace(b'"version":1', b'"version":99')
        with pytest.raises(VersionError):
            deserialize(data)

    def test_not_a_model(self):
        with pytest.raises(ModelFormatError):
            deserialize(b'{"format": "something else", "version": 1}')

    def test_file_round_trip(self, tmp_path):
        m = new_minimal([("a", 2)])
        save_model(m, tmp_path / "m.json")
        assert models_equal(load_model(tmp_path / "m.json"), m)

    def test_epochs(self):
        eps = [[[np.array([1.0, 0.0])], [np.array([0.25, 0.75])]]]
        back, ids = deserialize_epochs(serialize_epochs(eps, ["px"]))
        assert ids == ["px"]
        np.testing.assert_array_equal(back[0][1][0], [0.25, 0.75])


def test_copy_is_deep():
    f = Factor("f0", np.eye(2)[:, :, None], np.ones(2), np.ones(1))
    m = GenerativeModel([f], [Modality("g", np.ones((2, 2)), np.zeros(2), ["f0"])])
    c = m.copy()
    c.modalities[0].likelihood[0, 0] = 5
    c.factors[0].transition[0, 0, 0] = 5
    assert m.modalities[0].likelihood[0, 0] == 1
    assert m.factors[0].transition[0, 0, 0] == 1
