"""
Tests for challenge sampling, decimation and ensemble generation
"""
import numpy as np
import pytest

from src.ensemble import (
    ChallengeSet, EnsembleSimulator, ResponseTensor, decimate, fixed_point_mask,
    generate_dataset, place_packed, sample_challenges
)
from src.errors import DatasetFormatError, ParameterError
from src.network.dynamics import Trajectory, evaluate_nodes, integrate_batch
from src.network.parameters import SimConfig, sample_instance
from src.tools.rng_streams import make_stream


# ==================== CHALLENGES ====================

def test_exhaustive_small_challenge_space():
    challenges = sample_challenges(4, 2, make_stream(0, 'challenge', 0)).challenges
    assert challenges.shape == (4, 2)
    assert {tuple(row) for row in challenges} == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_too_many_challenges():
    with pytest.raises(ParameterError):
        sample_challenges(5, 2, make_stream(0, 'challenge', 0))


def test_large_challenges_distinct_and_repeatable():
    a = sample_challenges(1000, 256, make_stream(9, 'challenge', 0)).challenges
    b = sample_challenges(1000, 256, make_stream(9, 'challenge', 0)).challenges
    np.testing.assert_array_equal(a, b)
    assert len({row.tobytes() for row in a}) == 1000


def test_challenge_hex_round_trip():
    chosen = sample_challenges(6, 20, make_stream(1, 'challenge', 0))
    back = ChallengeSet.from_hex(chosen.to_hex(), 20)
    np.testing.assert_array_equal(back.challenges, chosen.challenges)


def test_fixed_point_challenges_excluded():
    cfg = SimConfig(n_nodes=8, n_challenges=20, exclude_fixed_point_challenges=True).validate()
    simulator = EnsembleSimulator(cfg, verbose=False)
    class_spec, challenges = simulator.build_class(0)

    assert not fixed_point_mask(class_spec)(challenges.challenges).any()
    outputs = evaluate_nodes(class_spec, challenges.challenges)
    assert np.all(np.any(outputs != challenges.challenges, axis=1))
    # the all-zeros challenge is always a fixed point of an XOR network
    assert not np.any(np.all(challenges.challenges == 0, axis=1))


# ==================== DECIMATION ====================

def test_default_decimation_columns():
    cfg = SimConfig().validate()
    steps = np.arange(cfg.n_steps + 1)
    traj = Trajectory(times=steps, bits=np.zeros((len(steps), 4), dtype=np.uint8))
    out = decimate(traj, cfg)
    assert out.shape == (4, 20)
    assert not out.any()


def test_decimation_picks_grid_steps():
    cfg = SimConfig(t_int=2.0).validate()
    steps = np.arange(cfg.n_steps + 1)
    bits = (steps[:, None] % 2).astype(np.uint8).repeat(2, axis=1)
    bits[100, :] = 1
    out = decimate(Trajectory(times=steps, bits=bits), cfg)
    # samples at steps 100, 150, 200
    np.testing.assert_array_equal(out, [[1, 0, 0], [1, 0, 0]])


def test_decimation_without_samples():
    cfg = SimConfig(t_int=0.5)
    traj = Trajectory(times=np.arange(51), bits=np.zeros((51, 2), dtype=np.uint8))
    with pytest.raises(ParameterError):
        decimate(traj, cfg)


def test_decimation_short_trajectory():
    cfg = SimConfig(t_int=2.0).validate()
    traj = Trajectory(times=np.arange(120), bits=np.zeros((120, 2), dtype=np.uint8))
    with pytest.raises(ParameterError, match='too short'):
        decimate(traj, cfg)


def test_decimation_empty_trajectory():
    cfg = SimConfig(t_int=2.0).validate()
    traj = Trajectory(times=np.arange(0), bits=np.zeros((0, 2), dtype=np.uint8))
    with pytest.raises(ParameterError, match='no recorded steps'):
        decimate(traj, cfg)


# ==================== RESPONSE TENSOR ====================

def test_tensor_payload_length_checked():
    with pytest.raises(DatasetFormatError, match='payload length mismatch'):
        ResponseTensor(dims=(1, 1, 1, 1, 3, 3), packed=np.zeros(1, dtype=np.uint8),
                       sample_times=np.arange(3.0), metadata={})


def test_class_bits_matches_full_unpack():
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, size=(3, 2, 3, 2, 5, 3), dtype=np.uint8)
    tensor = ResponseTensor.from_bits(bits, [0.5, 1.0, 1.5], {'config': {'discard': 0.5}})

    assert len(tensor.packed) == (bits.size + 7) // 8
    np.testing.assert_array_equal(tensor.bits(), bits)
    for s in range(3):
        np.testing.assert_array_equal(tensor.class_bits(s), bits[s])
    np.testing.assert_allclose(tensor.simulation_times, [1.0, 1.5, 2.0])


def test_challenge_slice_matches_full_unpack():
    rng = np.random.default_rng(6)
    bits = rng.integers(0, 2, size=(2, 3, 5, 2, 3, 3), dtype=np.uint8)
    tensor = ResponseTensor.from_bits(bits, [0.5, 1.0, 1.5])
    for s in range(2):
        for start, stop in [(0, 5), (1, 2), (2, 5)]:
            np.testing.assert_array_equal(tensor.challenge_slice(s, start, stop), bits[s, :, start:stop])
    with pytest.raises(ParameterError):
        tensor.challenge_slice(0, 3, 3)
    with pytest.raises(ParameterError):
        tensor.challenge_slice(2, 0, 1)


@pytest.mark.parametrize('sizes', [[3, 5, 8, 1, 13], [40, 30, 30], [7], [9, 9, 9, 9]])
def test_place_packed_segments(sizes):
    rng = np.random.default_rng(len(sizes))
    flat = rng.integers(0, 2, size=sum(sizes), dtype=np.uint8)
    payload = np.zeros((flat.size + 7) // 8, dtype=np.uint8)
    starts = np.cumsum([0] + sizes[:-1])
    # placement order does not matter
    for start, size in reversed(list(zip(starts, sizes))):
        place_packed(payload, np.packbits(flat[start:start + size], bitorder='little'), start)
    np.testing.assert_array_equal(payload, np.packbits(flat, bitorder='little'))


# ==================== DATASETS ====================

def test_dataset_dims(tiny_cfg):
    tensor = generate_dataset(tiny_cfg)
    assert tensor.dims == (2, 2, 3, 2, 8, 5)
    np.testing.assert_allclose(tensor.sample_times, [0.5, 1.0, 1.5, 2.0, 2.5])
    assert len(tensor.metadata['classes']) == 2
    assert len(tensor.metadata['classes'][0]['challenges_hex']) == 3


def test_noise_free_repeats_identical(tiny_cfg):
    bits = generate_dataset(tiny_cfg.with_overrides(epsilon=0.0, n_repeats=3)).bits()
    assert np.all(bits == bits[:, :, :, :1])


def test_no_variation_instances_identical(tiny_cfg):
    cfg = tiny_cfg.with_overrides(epsilon=0.0, sigma=0.0, n_instances=4)
    bits = generate_dataset(cfg).bits()
    assert np.all(bits == bits[:, :1])


def test_worker_count_does_not_change_tensor(tiny_cfg):
    serial = generate_dataset(tiny_cfg, n_workers=1)
    parallel = generate_dataset(tiny_cfg, n_workers=3)
    np.testing.assert_array_equal(serial.packed, parallel.packed)
    assert serial.metadata == parallel.metadata


def test_batch_size_does_not_change_tensor(tiny_cfg):
    a = EnsembleSimulator(tiny_cfg, batch_size=1, verbose=False).generate_dataset()
    b = EnsembleSimulator(tiny_cfg, batch_size=5, verbose=False).generate_dataset()
    np.testing.assert_array_equal(a.packed, b.packed)


def test_unaligned_blocks_match_trajectory_by_trajectory(tiny_cfg):
    # 10 nodes x 3 samples: trajectories and instance blocks straddle byte edges
    cfg = tiny_cfg.with_overrides(n_nodes=10, n_repeats=3, t_int=2.0)
    sim = EnsembleSimulator(cfg, batch_size=4, verbose=False)
    tensor = sim.generate_dataset()

    seed, steps = cfg.master_seed, cfg.sample_steps()
    bits = np.zeros(tensor.dims, dtype=np.uint8)
    for class_spec, challenges in sim.classes:
        s = class_spec.class_index
        for i in range(cfg.n_instances):
            inst = sample_instance(
                class_spec, cfg, make_stream(seed, 'inst-tau', s, i), make_stream(seed, 'inst-delay', s, i), i
            )
            for c, challenge in enumerate(challenges.challenges):
                for r in range(cfg.n_repeats):
                    stream = make_stream(seed, 'noise', s, i, c, r)
                    _, out, _ = integrate_batch(inst, challenge[None, :], cfg, [stream], record_steps=steps)
                    bits[s, i, c, r] = out[0].T

    np.testing.assert_array_equal(tensor.bits(), bits)
    np.testing.assert_array_equal(tensor.packed, ResponseTensor.from_bits(bits, tensor.sample_times).packed)


def test_noise_changes_repeats(tiny_cfg):
    cfg = tiny_cfg.with_overrides(epsilon=0.3, n_nodes=16, t_int=5.0)
    bits = generate_dataset(cfg).bits()
    assert np.any(bits[:, :, :, 0] != bits[:, :, :, 1])


def test_simulator_rejects_bad_workers(tiny_cfg):
    with pytest.raises(ParameterError):
        EnsembleSimulator(tiny_cfg, n_workers=0)
