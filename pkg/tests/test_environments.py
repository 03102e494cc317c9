import numpy as np
import pytest

from activegrowth import environments as env
from activegrowth.model import Factor, GenerativeModel, Modality, validate


def arrangement_key(obs):
    return tuple(int(np.argmax(o)) for o in obs)


class TestCurriculum:
    def test_two_state_model(self):
        f = Factor("f", np.eye(2)[:, :, None], np.ones(2), np.ones(1))
        m = GenerativeModel([f], [Modality("g", np.eye(2), np.zeros(2), ["f"])])
        eps = env.generate_curriculum(m)
        assert len(eps) == 2
        np.testing.assert_allclose(eps[1][0][0], [0.0, 1.0])

    def test_gridworld_epoch_count(self):
        eps = env.generate_curriculum(env.gridworld_source_model())
        assert len(eps) == 9 + 9 * 2 + 9 + 9 * 2 + 3
        assert all(len(e) == 2 for e in eps)

    def test_transitions_match_one_path(self):
        source = env.gridworld_source_model()
        for ep in env._curriculum_states(source, 2):
            a, b = ep
            if a == b:
                continue
            f = next(i for i in range(3) if a[i] != b[i])
            B = source.factors[f].transition
            assert sum(B[b[f], a[f], u] == 1 for u in range(B.shape[2])) == 1

    def test_curriculum_states(self):
        known = env.curriculum_states(env.gridworld_source_model())
        assert (0, 0, 0) in known and (0, 0, 2) in known
        assert len(known) == 9 + 8 + 2

    def test_source_model_valid(self):
        assert validate(env.gridworld_source_model()) == []


class TestGridWorld:
    def test_up_wraps(self):
        w = env.GridWorld(0, 0, 4)
        env.gridworld_step(w, "up")
        assert w.position == (8, 4)

    def test_stay(self):
        w = env.GridWorld(1, 3, 3)
        before = w.observe()
        after = env.gridworld_step(w, "stay")
        for x, y in zip(before, after):
            np.testing.assert_array_equal(x, y)

    @pytest.mark.parametrize("obj", range(3))
    def test_reward_peaks_at_target(self, obj):
        r, c = env.REWARD_TARGETS[obj]
        top = env.reward_probability(obj, r, c)
        assert top == 1.0
        assert all(env.reward_probability(obj, i, j) <= top for i in range(9) for j in range(9))

    @pytest.mark.parametrize("moves", [("up", "down"), ("left", "right"), ("stay", "up", "down")])
    def test_moves_cancel(self, moves):
        w = env.GridWorld(2, 5, 7)
        for mv in moves:
            env.gridworld_step(w, mv)
        assert w.position == (5, 7)

    def test_sprites_distinct(self):
        flat = {tuple(s.ravel()) for s in env.SPRITES}
        assert len(flat) == 3

    def test_observation_layout(self):
        obs = env.grid_observation(0, 4, 4)
        assert len(obs) == 82
        assert sum(o[1] for o in obs[:81]) == env.SPRITES[0].sum()

    def test_act_with_path_indices(self):
        w = env.GridWorld(0, 0, 0)
        _, legal = w.act((2, 2))
        assert legal and w.position == (1, 1)

    def test_torus_distance(self):
        assert env.torus_distance(0, 8) == 1
        assert env.torus_distance(2, 6) == 4


class TestHanoi:
    start = ((0, 1, 2), (), ())

    def test_move_from_empty_tower(self):
        w = env.HanoiWorld(self.start)
        _, legal = env.hanoi_step(w, (1, 0))
        assert not legal and w.arrangement == self.start
        with pytest.raises(env.IllegalMove):
            env.apply_move(self.start, (2, 1))

    def test_move_to_own_tower(self):
        assert env.apply_move(self.start, (0, 0)) == self.start

    def test_move(self):
        assert env.apply_move(self.start, (0, 2)) == ((0, 1), (), (2,))

    def test_sixty_arrangements_from_every_start(self):
        states = env.enumerate_arrangements()
        assert len(states) == 60
        for s in list(states)[::7]:
            assert len(env.enumerate_arrangements(s)) == 60

    def test_observation(self):
        obs = env.hanoi_observation(((2,), (0, 1), ()))
        assert arrangement_key(obs) == (3, 0, 0, 1, 2, 0, 0, 0, 0)

    def test_curriculum_covers_every_arrangement(self):
        eps = env.hanoi_curriculum()
        stationary = [e for e in eps if arrangement_key(e[0]) == arrangement_key(e[1])]
        assert len({arrangement_key(e[0]) for e in stationary}) == 60
        assert len(env.hanoi_stationary_arrangements()) == 162

    def test_curriculum_transitions_legal(self):
        by_key = {arrangement_key(env.hanoi_observation(a)): a for a in env.enumerate_arrangements()}
        for e in env.hanoi_curriculum():
            a, b = by_key[arrangement_key(e[0])], by_key[arrangement_key(e[1])]
            assert a == b or b in [env.apply_move(a, mv) for mv in env.legal_moves(a)]

    def test_path_actions(self):
        w = env.HanoiWorld(self.start)
        _, legal = w.act((1,))
        assert legal and w.arrangement == env.apply_move(self.start, env.legal_moves(self.start)[0])
        w = env.HanoiWorld(self.start)
        _, legal = w.act((6,))
        assert not legal and w.arrangement == self.start

    def test_preferences(self):
        target = ((0,), (1, 2), ())
        prefs = env.hanoi_preferences(target)
        assert sum(p.sum() for p in prefs) == 3.0
        assert prefs[0][1] == 1.0 and prefs[1][0] == 0.0
