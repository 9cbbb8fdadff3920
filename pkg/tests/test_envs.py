import numpy as np
import pytest

from triolab.envs import (
    BatchedEnv,
    Env,
    GRAVITY,
    Transition,
    Trajectory,
    deceleration,
    goalreacher2d_move,
    goalreacher2d_spec,
    max_speed,
    min_speed,
    minigolf_move,
    minigolf_spec,
    shot_speed,
    spec_for_family,
    velocity1d_move,
    velocity1d_spec,
)


class TestMinigolfPhysics:
    def test_deceleration_example(self):
        assert deceleration(1.0) == pytest.approx(7.0071, rel=1e-3)

    def test_min_speed_example(self):
        assert min_speed(1.0, 10.0) == pytest.approx(11.838, rel=1e-3)

    def test_failed_shot_advances_ball(self):
        # v0 = 5 from 10 m at friction 1.0: reward -1, ball moves to 8.216 m
        x_next, reward, done = minigolf_move(np.array([10.0]), np.array([5.0]),
                                             np.array([1.0]), np.array([0.0]))
        assert reward[0] == -1.0
        assert not done[0]
        assert x_next[0] == pytest.approx(8.216, rel=1e-3)

    def test_overshoot_penalty(self):
        vmax = max_speed(1.0, 2.0)
        x_next, reward, done = minigolf_move(np.array([2.0]), np.array([vmax + 0.5]),
                                             np.array([1.0]), np.array([0.0]))
        assert reward[0] == -100.0
        assert done[0]

    def test_successful_shot(self):
        x0, omega = 2.0, 0.5
        v_target = (min_speed(omega, x0) + max_speed(omega, x0)) / 2
        _, reward, done = minigolf_move(np.array([x0]), np.array([v_target]),
                                        np.array([omega]), np.array([0.0]))
        assert reward[0] == 0.0
        assert done[0]

    def test_rewards_restricted_to_three_values(self):
        rng = np.random.default_rng(0)
        n = 20_000
        x = rng.uniform(0, 20, n)
        a = rng.uniform(1e-5, 10, n)
        omega = rng.uniform(0.01, 2.0, n)
        eps = rng.standard_normal(n) * 0.3
        x_next, reward, done = minigolf_move(x, a, omega, eps)
        assert set(np.unique(reward)) <= {0.0, -1.0, -100.0}
        assert np.all(np.isfinite(x_next))
        # ball never moves away from the hole
        assert np.all(x_next <= x + 1e-12)
        assert np.all(x_next >= 0.0)

    def test_v0_strictly_increasing_in_action(self):
        actions = np.linspace(1e-5, 10, 50)
        v0 = shot_speed(actions, 0.0)
        assert np.all(np.diff(v0) > 0)

    def test_vmin_strictly_increasing_in_friction_and_distance(self):
        omegas = np.linspace(0.01, 2.0, 50)
        assert np.all(np.diff(min_speed(omegas, 10.0)) > 0)
        xs = np.linspace(0.1, 20.0, 50)
        assert np.all(np.diff(min_speed(1.0, xs)) > 0)

    def test_vmax_formula(self):
        # (2D - r)^2 g / (2r) + vmin^2, implemented verbatim
        D, r = 0.10, 0.02135
        expected = np.sqrt((2 * D - r) ** 2 * GRAVITY / (2 * r) + min_speed(1.0, 10.0) ** 2)
        assert max_speed(1.0, 10.0) == pytest.approx(expected, rel=1e-12)


class TestMinigolfEnv:
    def test_reset_range_and_shape(self):
        env = Env(minigolf_spec(), [1.0], np.random.default_rng(0))
        for _ in range(50):
            s = env.reset()
            assert s.shape == (1,)
            assert 0.0 <= s[0] <= 20.0

    def test_distractors_extend_state(self):
        env = Env(minigolf_spec(distractors=3), [1.0], np.random.default_rng(0))
        s = env.reset()
        assert s.shape == (4,)

    def test_reset_deterministic_under_seed(self):
        s1 = Env(minigolf_spec(), [1.0], np.random.default_rng(4)).reset()
        s2 = Env(minigolf_spec(), [1.0], np.random.default_rng(4)).reset()
        np.testing.assert_array_equal(s1, s2)

    def test_non_positive_friction_rejected(self):
        env = Env(minigolf_spec(), [0.0], np.random.default_rng(0))
        with pytest.raises(ValueError):
            env.reset()

    def test_episode_terminates_with_zero_or_penalty_or_limit(self):
        rng = np.random.default_rng(2)
        spec = minigolf_spec()
        for _ in range(30):
            env = Env(spec, [rng.uniform(0.05, 2.0)], rng)
            env.reset()
            steps = 0
            done = False
            while not done:
                _, reward, done = env.step([rng.uniform(1e-5, 10)])
                steps += 1
            assert reward in (0.0, -100.0) or steps == spec.max_steps
            assert steps <= spec.max_steps


class TestVelocityTracker:
    @pytest.mark.parametrize("vel,target,action,expected", [
        (0.8, 0.8, 0.0, 0.0),
        (1.5, 0.75, 0.0, -10.75),
        (1.0, 0.8, 0.0, -0.2),
    ])
    def test_reward_examples(self, vel, target, action, expected):
        # action 0 leaves the velocity unchanged, so vel' equals vel
        _, _, reward = velocity1d_move(np.array([0.0]), np.array([vel]),
                                       np.array([action]), np.array([target]))
        assert reward[0] == pytest.approx(expected, abs=1e-12)

    def test_double_integrator_update(self):
        pos, vel, _ = velocity1d_move(np.array([1.0]), np.array([0.5]),
                                      np.array([1.0]), np.array([0.0]))
        assert vel[0] == pytest.approx(0.7)
        assert pos[0] == pytest.approx(1.0 + 0.7 * 0.2)

    def test_episode_runs_to_step_limit(self):
        spec = velocity1d_spec(max_steps=10)
        env = Env(spec, [0.5], np.random.default_rng(0))
        env.reset()
        for i in range(10):
            _, _, done = env.step([0.1])
        assert done


class TestGoalReacher:
    def test_at_goal_zero_reward(self):
        _, _, reward = goalreacher2d_move(np.array([[3.0, 3.0]]), np.array([[0.0, 0.0]]),
                                          np.array([[0.0, 0.0]]), np.array([[3.0, 3.0]]))
        assert reward[0] == pytest.approx(0.0, abs=1e-12)

    def test_distance_reward(self):
        _, _, reward = goalreacher2d_move(np.array([[0.0, 0.0]]), np.array([[0.0, 0.0]]),
                                          np.array([[0.0, 0.0]]), np.array([[3.0, 3.0]]))
        assert reward[0] == pytest.approx(-np.sqrt(18.0), abs=1e-9)

    def test_control_cost_only_at_goal(self):
        # choose v so the action's velocity change cancels: v' = 0, p' = p = goal
        pos = np.array([[3.0, 3.0]])
        vel = np.array([[-0.2, -0.2]])
        _, _, reward = goalreacher2d_move(pos, vel, np.array([[1.0, 1.0]]), np.array([[3.0, 3.0]]))
        assert reward[0] == pytest.approx(-0.02, abs=1e-12)

    def test_action_clipped_to_unit_box(self):
        _, vel, _ = goalreacher2d_move(np.array([[0.0, 0.0]]), np.array([[0.0, 0.0]]),
                                       np.array([[5.0, -5.0]]), np.array([[0.0, 0.0]]))
        np.testing.assert_allclose(vel[0], [0.2, -0.2])


class TestFuzz:
    @pytest.mark.parametrize("family", ["minigolf", "velocity1d", "goalreacher2d"])
    def test_states_and_rewards_finite_under_random_actions(self, family):
        spec = spec_for_family(family)
        rng = np.random.default_rng(8)
        batch = 500
        env = BatchedEnv(spec, batch, rng)
        latents = rng.uniform(spec.latent_range.lo, spec.latent_range.hi, (batch, spec.latent_dim))
        env.reset_slots(np.arange(batch), latents)
        steps = 2_000 // spec.max_steps * spec.max_steps
        for i in range(steps):
            actions = rng.uniform(spec.action_lo, spec.action_hi, (batch, spec.action_dim))
            state, reward, done = env.step(actions)
            assert np.all(np.isfinite(state))
            assert np.all(np.isfinite(reward))
            if done.any():
                env.reset_slots(np.flatnonzero(done), latents[done])


class TestTrajectoryTypes:
    def test_done_only_on_last_transition(self):
        t_done = Transition(state=[0.0], action=[1.0], reward=-1.0, next_state=[0.0], done=True)
        t_mid = Transition(state=[0.0], action=[1.0], reward=-1.0, next_state=[0.0], done=False)
        with pytest.raises(ValueError):
            Trajectory(transitions=[t_done, t_mid], prior_used=None)
        traj = Trajectory(transitions=[t_mid, t_done], prior_used=None)
        assert traj.length == 2

    def test_transition_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Transition(state=[np.nan], action=[1.0], reward=0.0, next_state=[0.0], done=False)
        with pytest.raises(ValueError):
            Transition(state=[0.0], action=[1.0], reward=float("inf"), next_state=[0.0], done=False)
