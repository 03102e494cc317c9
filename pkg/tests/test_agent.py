import collections

import numpy as np
import pytest

from activegrowth import agent
from activegrowth import environments as env
from activegrowth.experiments import babble_gridworld, information_decay, known_locations, prepare_for_action
from activegrowth.mnist import MnistConfig, load_mnist, pixel_observation
from activegrowth.model import Factor, GenerativeModel, Modality
from activegrowth.structure import IngestConfig, ingest_stream


@pytest.fixture(scope="module")
def gridworld_ready(gridworld_learned):
    source, res = gridworld_learned
    return prepare_for_action(res.model.copy()), known_locations(source)


@pytest.fixture(scope="module")
def gridworld_babbled(gridworld_ready):
    model, known = gridworld_ready
    return babble_gridworld(model, known, 128, 2, 1.0, 0)


@pytest.fixture(scope="module")
def digits(mnist_files):
    images, labels = mnist_files
    data = load_mnist(MnistConfig(images, labels, n_train=32, n_test=16, n_pixels=64))
    m = GenerativeModel(
        [Factor("style", np.ones((1, 1, 1)), np.ones(1), np.ones(1))],
        [Modality(f"px{i}", np.full((2, 1), 1 / 16), np.zeros(2), ["style"]) for i in range(64)],
        concentration=1 / 16,
        alpha=8.0,
    )
    cfg = IngestConfig(alpha=8.0, kinds=("parent", "add_state"), labels=list(data.train_labels), hyperprior_N=128)
    res = ingest_stream(m, [[o] for o in data.observations("train")], cfg)
    return data, res


class TestPerceive:
    def test_posterior_floor(self):
        f = Factor("f", np.eye(3)[:, :, None], np.ones(3), np.ones(1))
        a = np.array([[100.0, 1e-3, 1.0], [1e-3, 100.0, 1.0]])
        m = GenerativeModel([f], [Modality("g", a, np.zeros(2), ["f"])])
        q, F = agent.perceive(m, np.full(3, 1 / 3), [np.array([1.0, 0.0])])
        assert q.sum() == pytest.approx(1.0)
        assert np.all((q == 0) | (q >= agent.BELIEF_FLOOR))
        assert np.isfinite(F)

    def test_no_floor_keeps_mass(self):
        f = Factor("f", np.eye(2)[:, :, None], np.ones(2), np.ones(1))
        m = GenerativeModel([f], [Modality("g", np.array([[1e6, 1e-6], [1e-6, 1e6]]), np.zeros(2), ["f"])])
        q, _ = agent.perceive(m, np.full(2, 0.5), [np.array([1.0, 0.0])], floor=0)
        assert q[1] > 0


class TestBabbling:
    def test_trace_rows(self, gridworld_babbled):
        _, trace, _, _ = gridworld_babbled
        assert len(trace) == 3 * 128
        for obj in range(3):
            steps = [r["step"] for r in trace.rows if r["trial"] == obj]
            assert steps == list(range(128))

    def test_full_coverage(self, gridworld_babbled):
        _, _, cover, _ = gridworld_babbled
        assert cover == [81, 81, 81]

    def test_coverage_never_decreases(self, gridworld_babbled):
        _, trace, _, _ = gridworld_babbled
        for obj in range(3):
            seen, sizes = set(), []
            for r in trace.rows:
                if r["trial"] == obj:
                    seen.add(r["location"])
                    sizes.append(len(seen))
            assert all(b >= a for a, b in zip(sizes, sizes[1:]))

    def test_even_coverage_after_saturation(self, gridworld_babbled):
        _, trace, _, raw = gridworld_babbled
        for obj in range(3):
            counts = collections.Counter(r["location"] for r in trace.rows if r["trial"] == obj)
            visits = np.array(list(counts.values()))
            assert visits.max() <= 4 * np.median(visits)

    def test_information_gain_decays(self, gridworld_babbled):
        _, trace, _, _ = gridworld_babbled
        head, tail = information_decay(trace)
        assert tail < head

    def test_deterministic(self, gridworld_ready, tmp_path):
        model, _ = gridworld_ready
        runs = []
        for k in range(2):
            _, trace = agent.run_babbling(model, env.GridWorld(1, 0, 0), 20, 2, seed=5)
            trace.write_csv(tmp_path / f"{k}.csv")
            runs.append((tmp_path / f"{k}.csv").read_bytes())
        assert runs[0] == runs[1]

    def test_input_model_untouched(self, gridworld_ready):
        model, _ = gridworld_ready
        before = model.modalities[0].likelihood.copy()
        agent.run_babbling(model, env.GridWorld(0, 0, 0), 3, 1, seed=0)
        np.testing.assert_array_equal(model.modalities[0].likelihood, before)

    def test_hanoi_rehearses_stationary_path_least(self, hanoi_learned):
        model = hanoi_learned.model.copy()
        for fac in model.factors:
            fac.controllable = True
        from activegrowth.experiments import _rng

        _, trace = agent.run_babbling(model, env.HanoiWorld(), 64, 1, int(_rng(0, 1).integers(2**31)), 1.0)
        counts = collections.Counter(a[0] for a in trace.column("action"))
        sparsest = sorted(range(1, 7), key=lambda u: counts[u])[:2]
        assert all(counts[0] < counts[u] for u in (5, 6))
        assert counts[0] <= min(counts[u] for u in sparsest)

    def test_illegal_moves_recorded(self, hanoi_learned):
        model = hanoi_learned.model.copy()
        model.factors[0].controllable = True
        _, trace = agent.run_babbling(model, env.HanoiWorld(), 40, 1, seed=3)
        assert set(trace.column("legal")) <= {True, False}
        assert len(trace.column("legal")) == 40


class TestGoal:
    def test_zero_preferences_match_babbling(self, gridworld_ready):
        model, _ = gridworld_ready
        _, babble = agent.run_babbling(model, env.GridWorld(2, 3, 3), 10, 1, mode="argmax", learn=False)
        trials = [(env.GridWorld(2, 3, 3), {}, lambda w: False, 0)]
        goal = agent.run_goal(model, trials, 1, max_moves=10)
        assert goal.trace.column("action") == babble.column("action")
        assert goal.trace.column("location") == babble.column("location")

    def test_success_statistics(self):
        res = agent.GoalResult(agent.EpisodeTrace(), [True, False, True, True], [1, 1, 2, 2])
        assert res.success_rate == 0.75
        assert res.by_difficulty() == {1: 0.5, 2: 1.0}

    def test_already_solved_trial(self, hanoi_learned):
        model = hanoi_learned.model.copy()
        model.factors[0].controllable = True
        w = env.HanoiWorld()
        trials = [(w, env.hanoi_preferences(w.arrangement), lambda x: True, 0)]
        res = agent.run_goal(model, trials, 1)
        assert res.success == [True] and len(res.trace) == 0


class TestClassify:
    def test_training_exemplar_recovered(self, digits):
        data, res = digits
        obs = data.observations("train")
        for k in range(4):
            post, _ = agent.classify(res.model, obs[k], res.state_labels, (0, 1))
            assert int(np.argmax(post)) == data.train_labels[k]

    def test_noise_has_low_evidence(self, digits):
        data, res = digits
        F_train = [agent.classify(res.model, o, res.state_labels)[1] for o in data.observations("train")]
        noise = pixel_observation(np.random.default_rng(0).uniform(size=data.train.shape[1]))
        _, F_noise = agent.classify(res.model, noise, res.state_labels)
        assert -F_noise < np.median(-np.asarray(F_train))

    def test_posterior_normalised(self, digits):
        data, res = digits
        post, _ = agent.classify(res.model, data.observations("test")[0], res.state_labels, (0, 1))
        assert post.sum() == pytest.approx(1.0)


def test_trace_csv_columns(tmp_path):
    t = agent.EpisodeTrace()
    t.append(step=0, trial=0, location=(0, (1, 2)), action=(1,), legal=True, F=1.5)
    t.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",") == list(agent.TRACE_COLUMNS)
    assert lines[1].startswith("0,,0,0;1;2,,1,True,1.5")
