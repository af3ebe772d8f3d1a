import math

import numpy as np
import pytest
from scipy import stats

from utils.biphoton import BiphotonSpec
from utils.errors import SamplingError
from utils.event_sim import (
    ChopperConfig,
    DetectorConfig,
    SourceConfig,
    TimeTagStream,
    apply_detector,
    derive_seed,
    generate,
    sample_delay,
)

IDEAL = DetectorConfig(jitter_sigma_ps=0.0, dead_time_ns=0.0, dark_rate_per_s=0.0)
ALWAYS_OPEN = ChopperConfig(period_ms=1.0, duty=1.0)


@pytest.fixture
def spec():
    return BiphotonSpec(bandwidth_mhz=20.8, contrast=4.0)


def test_derive_seed_is_stable_and_stage_specific():
    assert derive_seed(1, 'generate') == derive_seed(1, 'generate')
    assert derive_seed(1, 'generate') != derive_seed(2, 'generate')
    assert derive_seed(1, 'generate') != derive_seed(1, 'detector:signal')
    assert 0 <= derive_seed(1, 'generate') < 2 ** 64


def test_delay_distribution_is_centered(envelope_spec):
    assert abs(sample_delay(envelope_spec, 0.5)) < 2.0


def test_mean_absolute_delay_is_coherence_time(envelope_spec):
    u = np.random.default_rng(11).random(1_000_000)
    delays = sample_delay(envelope_spec, u)
    tau_c_ps = 1e12 / (2 * math.pi * 11.4e6)
    assert np.mean(np.abs(delays)) == pytest.approx(tau_c_ps, rel=0.01)


def test_delays_follow_two_sided_exponential(envelope_spec):
    n = 100_000
    delays = sample_delay(envelope_spec, np.random.default_rng(5).random(n))
    tau_c_ps = 1e12 / (2 * math.pi * 11.4e6)
    result = stats.kstest(delays, 'laplace', args=(0.0, tau_c_ps))
    assert result.statistic < 1.63 / math.sqrt(n)


def test_comb_delays_cluster_at_round_trip_multiples():
    spec = BiphotonSpec(bandwidth_mhz=11.4, contrast=1.0, mode_count=100, round_trip_ns=0.94)
    delays = sample_delay(spec, np.random.default_rng(3).random(1_000_000))
    period_ps = 940.0
    for k in range(-2, 3):
        peak = np.count_nonzero(np.abs(delays - k * period_ps) < 20.0)
        valley = np.count_nonzero(np.abs(delays - (k + 0.5) * period_ps) < 20.0)
        assert peak > valley + 5 * math.sqrt(valley + 1)


def test_chopper_gated_time_round_trip():
    gate = ChopperConfig(period_ms=1.0, duty=0.5)
    gated = np.array([0.0, 1.0, 4.99e8, 5.0e8 + 3.0, 7.3e9])
    wall = gate.to_wall_ps(gated)
    assert np.all(gate.in_window(wall))
    np.testing.assert_allclose([gate.gated_time_ps(w) for w in wall], gated)
    assert gate.live_time_s(10.0) == pytest.approx(5.0)


@pytest.mark.parametrize('gate', [ChopperConfig(duty=0.0), ChopperConfig(duty=1.5), ChopperConfig(period_ms=0.0)])
def test_invalid_chopper_rejected(gate):
    with pytest.raises(SamplingError):
        gate.validate()


def test_ideal_detector_is_identity():
    tags = np.array([100, 2000, 5000], dtype=np.int64)
    stream = apply_detector(tags, IDEAL, ALWAYS_OPEN, 1e-6)
    np.testing.assert_array_equal(stream.timestamps_ps, tags)
    assert stream.live_time_s == pytest.approx(1e-6)


def test_dead_time_drops_close_tags():
    tags = np.arange(10, dtype=np.int64) * 10_000
    config = DetectorConfig(jitter_sigma_ps=0.0, dead_time_ns=50.0, dark_rate_per_s=0.0)
    stream = apply_detector(tags, config, ALWAYS_OPEN, 1e-6)
    np.testing.assert_array_equal(stream.timestamps_ps, [0, 50_000])


def test_duplicate_tags_become_strictly_increasing():
    stream = apply_detector(np.array([100, 100, 100], dtype=np.int64), IDEAL, ALWAYS_OPEN, 1e-6)
    np.testing.assert_array_equal(stream.timestamps_ps, [100, 101, 102])


def test_dark_counts_follow_gated_poisson_rate():
    config = DetectorConfig(jitter_sigma_ps=0.0, dead_time_ns=0.0, dark_rate_per_s=1000.0)
    gate = ChopperConfig(period_ms=1.0, duty=0.5)
    stream = apply_detector(np.array([], dtype=np.int64), config, gate, 100.0, seed=4)
    mean = 1000.0 * 50.0
    assert abs(len(stream) - mean) < 4 * math.sqrt(mean)
    assert np.all(gate.in_window(stream.timestamps_ps))


def test_unsorted_detector_input_rejected():
    with pytest.raises(SamplingError):
        apply_detector(np.array([5, 1], dtype=np.int64), IDEAL, ALWAYS_OPEN, 1e-6)


def test_stream_validation_catches_bad_tags():
    with pytest.raises(SamplingError):
        TimeTagStream(0, 'signal', np.array([1.0, 2.0]), 1.0, 1.0).validate()
    with pytest.raises(SamplingError):
        TimeTagStream(0, 'signal', np.array([5, 5], dtype=np.int64), 1.0, 1.0).validate()


def test_lossless_source_gives_equal_counts(spec):
    source = SourceConfig(pair_rate_per_s=1000.0, efficiency_s=1.0, efficiency_i=1.0, spec=spec, seed=9)
    signal, idler = generate(source, (IDEAL, IDEAL), ALWAYS_OPEN, 1.0)
    assert len(signal) == len(idler) > 0


def test_gated_singles_rate(spec):
    source = SourceConfig(pair_rate_per_s=1e4, efficiency_s=0.5, efficiency_i=0.5, spec=spec, seed=2)
    detector = DetectorConfig(jitter_sigma_ps=400.0, dead_time_ns=0.0, dark_rate_per_s=0.0)
    gate = ChopperConfig(period_ms=1.0, duty=0.5)
    signal, idler = generate(source, (detector, detector), gate, 10.0)
    mean = 1e4 * 0.5 * 5.0
    for stream in (signal, idler):
        assert abs(len(stream) - mean) < 4 * math.sqrt(mean)
        assert stream.live_time_s == pytest.approx(5.0)


def test_no_tag_outside_detection_windows(spec):
    source = SourceConfig(pair_rate_per_s=5e4, efficiency_s=0.1, efficiency_i=0.1, spec=spec, seed=3)
    detector = DetectorConfig()
    gate = ChopperConfig(period_ms=0.1, duty=0.3)
    for stream in generate(source, (detector, detector), gate, 2.0):
        stream.validate()
        assert np.all(gate.in_window(stream.timestamps_ps))


def test_singles_scale_with_efficiency(spec):
    detector = DetectorConfig(jitter_sigma_ps=0.0, dead_time_ns=0.0, dark_rate_per_s=0.0)
    low = SourceConfig(pair_rate_per_s=1e4, efficiency_s=0.1, efficiency_i=0.1, spec=spec, seed=6)
    high = SourceConfig(pair_rate_per_s=1e4, efficiency_s=0.2, efficiency_i=0.1, spec=spec, seed=6)
    n_low = len(generate(low, (detector, detector), ALWAYS_OPEN, 10.0)[0])
    n_high = len(generate(high, (detector, detector), ALWAYS_OPEN, 10.0)[0])
    assert n_high / n_low == pytest.approx(2.0, rel=0.05)


def test_generation_is_deterministic(spec):
    source = SourceConfig(pair_rate_per_s=2e4, efficiency_s=0.05, efficiency_i=0.05, spec=spec, seed=12)
    detectors = (DetectorConfig(), DetectorConfig())
    first = generate(source, detectors, ChopperConfig(), 2.0, slice_s=0.5)
    second = generate(source, detectors, ChopperConfig(), 2.0, slice_s=0.5)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.timestamps_ps, b.timestamps_ps)


def test_result_does_not_depend_on_worker_count(spec):
    source = SourceConfig(pair_rate_per_s=2e4, efficiency_s=0.05, efficiency_i=0.05, spec=spec, seed=12)
    detectors = (DetectorConfig(), DetectorConfig())
    serial = generate(source, detectors, ChopperConfig(), 2.0, n_jobs=1, slice_s=0.5)
    parallel = generate(source, detectors, ChopperConfig(), 2.0, n_jobs=2, slice_s=0.5)
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.timestamps_ps, b.timestamps_ps)


def test_invalid_source_rejected(spec):
    source = SourceConfig(pair_rate_per_s=1e3, efficiency_s=0.0, efficiency_i=0.5, spec=spec)
    with pytest.raises(SamplingError):
        generate(source, (IDEAL, IDEAL), ALWAYS_OPEN, 1.0)


def test_generated_delays_follow_model_distribution(envelope_spec):
    source = SourceConfig(pair_rate_per_s=1e3, efficiency_s=1.0, efficiency_i=1.0, spec=envelope_spec, seed=31)
    signal, idler = generate(source, (IDEAL, IDEAL), ALWAYS_OPEN, 100.0)
    assert len(signal) == len(idler)
    delays = (idler.timestamps_ps - signal.timestamps_ps).astype(float)
    tau_c_ps = 1e12 / (2 * math.pi * 11.4e6)
    result = stats.kstest(delays, 'laplace', args=(0.0, tau_c_ps))
    assert result.statistic < 1.63 / math.sqrt(delays.size)
