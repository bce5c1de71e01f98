"""
Tests for uniqueness, reliability, t_opt, Z-scores and sweeps
"""
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import src.analysis.statistics as statistics
from src.analysis.statistics import (
    StatsSeries, Z_CRITICAL, compute_stats, delta_and_topt, pairwise_mean_distance,
    reliability, sweep, sweep_values, uniqueness, z_compare
)
from src.ensemble import ResponseTensor, generate_dataset
from src.errors import ParameterError
from src.network.parameters import SimConfig


def _tensor(bits):
    bits = np.asarray(bits, dtype=np.uint8)
    return ResponseTensor.from_bits(bits, 0.5 * np.arange(1, bits.shape[-1] + 1))


def _oracle(bits, axis, mode):
    """Double loop over pairs along axis (1 = instances, 3 = repeats) with exact fractions"""
    n_s, n_i, n_c, n_r, n_n, n_t = bits.shape
    n = bits.shape[axis]
    pairs = n * (n - 1) // 2 if mode == 'pair-count' else n * (n + 1) // 2
    out = np.zeros((n_s, n_t))
    for s in range(n_s):
        for t in range(n_t):
            total = 0
            count = 0
            for i in range(n_i if axis == 3 else 1):
                for c in range(n_c):
                    for r in range(n_r if axis == 1 else 1):
                        for node in range(n_n):
                            if axis == 1:
                                values = bits[s, :, c, r, node, t]
                            else:
                                values = bits[s, i, c, :, node, t]
                            for j in range(n):
                                for k in range(j + 1, n):
                                    total += abs(int(values[j]) - int(values[k]))
                            count += 1
            out[s, t] = float(Fraction(total, pairs * count))
    return out


# ==================== PAIR DISTANCE ====================

@pytest.mark.parametrize('values, mode, expected', [
    ([1, 1, 1], 'pair-count', 0.0),
    ([1, 1, 1], 'paper-literal', 0.0),
    ([0, 1], 'pair-count', 1.0),
    ([0, 1], 'paper-literal', 1 / 3),
    ([0, 1, 1], 'pair-count', 2 / 3),
])
def test_pairwise_mean_distance(values, mode, expected):
    assert pairwise_mean_distance(values, mode) == pytest.approx(expected)


def test_pairwise_needs_two_values():
    with pytest.raises(ParameterError):
        pairwise_mean_distance([1])


def test_unknown_mode():
    with pytest.raises(ParameterError):
        pairwise_mean_distance([0, 1], 'average')


# ==================== UNIQUENESS / RELIABILITY ====================

def test_uniqueness_hand_example():
    bits = np.zeros((1, 2, 1, 1, 4, 1), dtype=np.uint8)
    bits[0, 0, 0, 0, :, 0] = [1, 0, 1, 0]
    bits[0, 1, 0, 0, :, 0] = [1, 1, 1, 0]
    assert uniqueness(_tensor(bits))[0, 0] == 0.25


def test_reliability_hand_example():
    bits = np.zeros((1, 1, 1, 2, 4, 1), dtype=np.uint8)
    bits[0, 0, 0, 0, :, 0] = [0, 1, 1, 0]
    bits[0, 0, 0, 1, :, 0] = [0, 1, 1, 1]
    assert reliability(_tensor(bits))[0, 0] == 0.25


def test_identical_instances_give_zero():
    rng = np.random.default_rng(0)
    one = rng.integers(0, 2, size=(2, 1, 3, 2, 5, 4), dtype=np.uint8)
    bits = np.repeat(one, 3, axis=1)
    assert np.all(uniqueness(_tensor(bits)) == 0)


def test_needs_two_instances_and_repeats():
    tensor = _tensor(np.zeros((1, 1, 1, 1, 2, 1)))
    with pytest.raises(ParameterError):
        uniqueness(tensor)
    with pytest.raises(ParameterError):
        reliability(tensor)


def test_fair_coins_near_one_half():
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, size=(1, 2, 200, 2, 64, 1), dtype=np.uint8)
    std_err = 0.5 / np.sqrt(200 * 2 * 64)
    tensor = _tensor(bits)
    assert abs(uniqueness(tensor)[0, 0] - 0.5) < 3 * std_err
    assert abs(reliability(tensor)[0, 0] - 0.5) < 3 * std_err


def test_fair_coins_paper_literal_limit():
    # pairs over N(N+1)/2 shrink the fair-coin value to 0.5 (N-1)/(N+1)
    rng = np.random.default_rng(8)
    bits = rng.integers(0, 2, size=(1, 5, 100, 5, 32, 1), dtype=np.uint8)
    tensor = _tensor(bits)
    assert uniqueness(tensor, 'pair-count')[0, 0] == pytest.approx(0.5, abs=0.01)
    assert uniqueness(tensor, 'paper-literal')[0, 0] == pytest.approx(0.5 * 4 / 6, abs=0.01)
    assert reliability(tensor, 'paper-literal')[0, 0] == pytest.approx(0.5 * 4 / 6, abs=0.01)


@st.composite
def tiny_tensors(draw):
    dims = (
        draw(st.integers(1, 3)), draw(st.integers(2, 3)), draw(st.integers(1, 4)),
        draw(st.integers(2, 4)), draw(st.integers(1, 6)), draw(st.integers(1, 5))
    )
    seed = draw(st.integers(0, 2 ** 32 - 1))
    p = draw(st.sampled_from([0.1, 0.5, 0.9]))
    return (np.random.default_rng(seed).random(dims) < p).astype(np.uint8)


@settings(max_examples=120, deadline=None)
@given(tiny_tensors(), st.sampled_from(['pair-count', 'paper-literal']))
def test_statistics_match_brute_force(bits, mode):
    tensor = _tensor(bits)
    np.testing.assert_array_equal(uniqueness(tensor, mode), _oracle(bits, 1, mode))
    np.testing.assert_array_equal(reliability(tensor, mode), _oracle(bits, 3, mode))


@pytest.mark.parametrize('chunk_bits', [1, 200, 1 << 24])
def test_challenge_chunks_match_brute_force(monkeypatch, chunk_bits):
    # 90 bits per challenge: one, two, or all seven challenges per chunk
    monkeypatch.setattr(statistics, 'STATS_CHUNK_BITS', chunk_bits)
    bits = np.random.default_rng(12).integers(0, 2, size=(2, 3, 7, 2, 5, 3), dtype=np.uint8)
    tensor = _tensor(bits)
    for mode in ('pair-count', 'paper-literal'):
        np.testing.assert_array_equal(uniqueness(tensor, mode), _oracle(bits, 1, mode))
        np.testing.assert_array_equal(reliability(tensor, mode), _oracle(bits, 3, mode))


@settings(max_examples=40, deadline=None)
@given(tiny_tensors(), st.integers(0, 2 ** 32 - 1), st.sampled_from(['pair-count', 'paper-literal']))
def test_relabeling_instances_and_repeats(bits, seed, mode):
    rng = np.random.default_rng(seed)
    shuffled = bits[:, rng.permutation(bits.shape[1])][:, :, :, rng.permutation(bits.shape[3])]
    a, b = _tensor(bits), _tensor(shuffled)
    np.testing.assert_array_equal(uniqueness(a, mode), uniqueness(b, mode))
    np.testing.assert_array_equal(reliability(a, mode), reliability(b, mode))


# ==================== t_opt ====================

def _series(mu_inter, mu_intra):
    mu_inter = np.atleast_2d(mu_inter)
    return StatsSeries(
        sample_times=0.5 * np.arange(1, mu_inter.shape[1] + 1),
        mu_inter=mu_inter,
        mu_intra=np.atleast_2d(mu_intra)
    )


def test_topt_is_argmax():
    out = delta_and_topt(_series([0.1, 0.4, 0.3], [0.0, 0.0, 0.0]))
    assert out.t_opt_index[0] == 1
    assert out.t_opt[0] == 1.0
    np.testing.assert_allclose(out.delta_mu, [[0.1, 0.4, 0.3]])


def test_topt_ties_take_earliest():
    out = delta_and_topt(_series([0.3, 0.3, 0.3], [0.1, 0.1, 0.1]))
    assert out.t_opt_index[0] == 0
    assert out.ensemble_t_opt == 0.5


def test_ensemble_std_uses_class_sample_std():
    out = delta_and_topt(_series([[0.2, 0.4], [0.4, 0.4]], [[0.0, 0.0], [0.0, 0.0]]))
    ens = out.ensemble()
    np.testing.assert_allclose(ens['mu_inter']['mean'], [0.3, 0.4])
    np.testing.assert_allclose(ens['mu_inter']['std'], [np.std([0.2, 0.4], ddof=1), 0.0])
    summary = out.summary()
    assert summary['ensemble']['t_opt_ns'] == 1.0
    assert [c['t_opt_ns'] for c in summary['classes']] == [1.0, 0.5]


def test_noise_free_reliability_is_exactly_zero():
    cfg = SimConfig(n_nodes=64, n_classes=2, n_instances=2, n_challenges=10, n_repeats=5,
                    epsilon=0.0, sigma=0.05).validate()
    series = compute_stats(generate_dataset(cfg))
    assert np.all(series.mu_intra == 0)


def test_no_variation_uniqueness_is_exactly_zero():
    cfg = SimConfig(n_nodes=64, n_classes=2, n_instances=2, n_challenges=10, n_repeats=5,
                    epsilon=0.0, sigma=0.0).validate()
    series = compute_stats(generate_dataset(cfg))
    assert np.all(series.mu_inter == 0)
    assert np.all(series.mu_intra == 0)


# ==================== Z-SCORES ====================

def test_z_of_identical_sets_is_zero():
    a = np.random.default_rng(1).random((4, 6))
    result = z_compare(a, a.copy())
    assert result.z_rms == 0.0
    assert result.consistent
    assert result.probability == pytest.approx(0.5)


def test_z_of_one_combined_std_is_one():
    b = np.random.default_rng(2).random((5, 6))
    shift = np.sqrt(2) * b.std(axis=0, ddof=1)
    result = z_compare(b + shift, b)
    np.testing.assert_allclose(result.z, 1.0, rtol=1e-9)
    assert result.z_rms == pytest.approx(1.0)
    assert result.consistent == (1.0 < Z_CRITICAL)


def test_z_undefined_times_are_flagged():
    a = np.array([[0.5, 0.4], [0.5, 0.2]])
    b = np.array([[0.5, 0.3], [0.5, 0.3]])
    with pytest.warns(UserWarning, match='undefined'):
        result = z_compare(a, b)
    assert result.undefined.tolist() == [True, False]
    assert np.isnan(result.z[0])
    assert result.z_rms == pytest.approx(abs(result.z[1]))


def test_z_all_undefined():
    a = np.full((3, 2), 0.5)
    with pytest.warns(UserWarning):
        result = z_compare(a, a)
    assert np.isnan(result.z_rms)
    assert not result.consistent


def test_z_incompatible_times():
    with pytest.raises(ParameterError, match='incompatible sample times'):
        z_compare(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ParameterError, match='incompatible sample times'):
        z_compare(np.zeros((2, 2)), np.zeros((2, 2)), [0.5, 1.0], [1.0, 1.5])


# ==================== SWEEPS ====================

def test_sweep_values():
    np.testing.assert_allclose(sweep_values(0.0, 0.1, 3), [0.0, 0.05, 0.1])
    np.testing.assert_allclose(sweep_values(0.001, 0.1, 3, log_spaced=True), [0.001, 0.01, 0.1])
    with pytest.raises(ParameterError):
        sweep_values(0.0, 0.1, 3, log_spaced=True)


def test_sigma_sweep_starts_at_zero(tiny_cfg):
    curve = sweep('sigma', [0.0, 0.05], tiny_cfg.with_overrides(epsilon=0.0), eval_time=2.0)
    assert curve.statistic == 'mu_inter'
    assert curve.ys[0] == 0.0
    assert curve.std_errs[0] == 0.0
    assert curve.fixed == 0.0
    assert [row['knob_value'] for row in curve.to_rows()] == [0.0, 0.05]


def test_epsilon_sweep_starts_at_zero(tiny_cfg):
    curve = sweep('epsilon', [0.0, 0.1], tiny_cfg, eval_time=2.5)
    assert curve.statistic == 'mu_intra'
    assert curve.ys[0] == 0.0


@pytest.mark.parametrize('knob, values, eval_time', [
    ('tau', [0.1, 0.2], 2.0),
    ('sigma', [0.2, 0.1], 2.0),
    ('sigma', [], 2.0),
    ('sigma', [0.1, 0.2], 9.0),
])
def test_sweep_rejects_bad_arguments(tiny_cfg, knob, values, eval_time):
    with pytest.raises(ParameterError):
        sweep(knob, values, tiny_cfg, eval_time=eval_time)
