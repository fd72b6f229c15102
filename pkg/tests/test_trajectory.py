import numpy as np
import numpy.testing as npt
import pytest

from easrn.trajectory import MotionConfig, Trajectory, generate_trajectory, rescale_trajectory, simulate_walk
from easrn.validation import ConfigurationError, rng_from


def test_single_sample_is_start_pose():
    traj = generate_trajectory(MotionConfig(num_samples=1, seed=123))
    npt.assert_array_equal(traj.samples, [[0.0, 0.0]])


def test_zero_variance_walk_stays_at_origin():
    cfg = MotionConfig(num_samples=10, step_sigma=0.0, impulse_prob=0.0, seed=5)
    traj = generate_trajectory(cfg)
    npt.assert_array_equal(traj.samples, np.zeros((10, 2)))


def test_generated_trajectory_respects_bound():
    traj = generate_trajectory(MotionConfig(num_samples=200, max_shift=30.0, seed=7))
    assert len(traj) == 200
    assert traj.max_abs_shift <= 30.0 + 1e-12
    npt.assert_array_equal(traj.samples[0], [0.0, 0.0])


@pytest.mark.parametrize("seed", range(10))
def test_determinism_bit_identical(seed):
    cfg = MotionConfig(num_samples=64, seed=seed)
    a = generate_trajectory(cfg)
    b = generate_trajectory(cfg)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_rescale_all_zero_unchanged():
    traj = Trajectory(np.zeros((5, 2)))
    out = rescale_trajectory(traj, 30.0)
    npt.assert_array_equal(out.samples, traj.samples)


def test_rescale_halves_out_of_bound():
    samples = np.array([[0.0, 0.0], [10.0, -20.0], [60.0, 5.0]])
    out = rescale_trajectory(Trajectory(samples), 30.0)
    npt.assert_allclose(out.samples, samples * 0.5)
    assert out.max_abs_shift == pytest.approx(30.0)


def test_rescale_inactive_when_bound_not_binding():
    samples = np.array([[0.0, 0.0], [12.0, -3.0]])
    out = rescale_trajectory(Trajectory(samples), 30.0)
    npt.assert_array_equal(out.samples, samples)


def test_markov_suffix_reproduction():
    # Re-running from a captured intermediate (position, velocity, rng)
    # state must reproduce the suffix of the one-shot walk.
    cfg = MotionConfig(num_samples=50, seed=99)
    rng_full = rng_from(cfg.seed)
    full, _, _ = simulate_walk(rng_full, cfg, 49)

    rng_split = rng_from(cfg.seed)
    head, p, v = simulate_walk(rng_split, cfg, 20)
    tail, _, _ = simulate_walk(rng_split, cfg, 29, p0=p, v0=v)
    npt.assert_array_equal(np.vstack([head, tail]), full)


def test_serialization_round_trip():
    traj = generate_trajectory(MotionConfig(num_samples=33, seed=4))
    again = Trajectory.from_list(traj.to_list())
    npt.assert_array_equal(again.samples, traj.samples)


@pytest.mark.parametrize(
    "kwargs",
    [dict(num_samples=0), dict(num_samples=-3), dict(step_sigma=-0.1),
     dict(max_shift=0.0), dict(impulse_prob=1.5)],
)
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        generate_trajectory(MotionConfig(**kwargs))
