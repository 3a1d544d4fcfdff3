"""
Test Suite for the Loud-loss engine
Sub-band MSE, weighted aggregation, analytic gradients and the ablation variants
"""

import math

import numpy as np
import pytest
import torch

from audio_io import AudioClip
from errors import (
    EmptyBand,
    InvalidAlpha,
    InvalidConfig,
    LengthMismatch,
    SampleRateMismatch,
    ShapeMismatch,
    WeightCountMismatch,
)
from loss_engine import (
    LossConfig,
    LossDomain,
    LossEvaluator,
    Weighting,
    ablation_presets,
    compressed_loss,
    compressed_loss_gradient,
    evaluate,
    evaluate_variants,
    loud_loss,
    loud_loss_gradient,
    mse_loss,
    mse_loss_gradient,
    subband_loss,
)
from melbands import Band, BandPartition, PartitionConfig, bin_membership, build_partition
from spectrum import MagnitudeSpectrum, StftConfig
from suite_runner import main
from trainer_demo import synth_clip_pair
from weights import DEFAULT_CONTOUR, FORTY_PHON_CONTOUR, WeightVector, compute_weights, per_bin_weights

ALL_CONFIGS = [
    LossConfig(domain=domain, weighting=weighting, partition=None if weighting == Weighting.PER_BIN else PartitionConfig())
    for weighting in Weighting
    for domain in LossDomain
]


def _random_pair(seed, shape=(257, 10), low=-60.0, high=20.0):
    gen = torch.Generator().manual_seed(seed)
    a = low + (high - low) * torch.rand(*shape, generator=gen, dtype=torch.float64)
    b = low + (high - low) * torch.rand(*shape, generator=gen, dtype=torch.float64)
    return a, b


def _random_magnitudes(seed, frames=4):
    gen = torch.Generator().manual_seed(seed)
    est = 0.1 + 10.0 * torch.rand(257, frames, generator=gen, dtype=torch.float64)
    ref = 0.1 + 10.0 * torch.rand(257, frames, generator=gen, dtype=torch.float64)
    return MagnitudeSpectrum(est, 16000, 512), MagnitudeSpectrum(ref, 16000, 512)


def _oracle_bands(num_bands=25):
    """Rebuild the default layout from the formulas: (start, end, center_hz) per band"""
    top = 2595.0 * math.log10(1.0 + 8000.0 / 700.0)
    hz = [700.0 * (10.0 ** (top * i / (num_bands + 1) / 2595.0) - 1.0) for i in range(num_bands + 2)]
    hz[0], hz[-1] = 0.0, 8000.0
    bins = [math.floor(f * 512 / 16000) for f in hz]
    bins[-1] = 257
    return [(bins[i], bins[i + 2], hz[i + 1]) for i in range(num_bands)]


def _oracle_weight(center_hz):
    best = min(FORTY_PHON_CONTOUR, key=lambda row: (abs(center_hz - row[0]), row[0]))
    return 40.01 / best[1]


def _naive_loss(est, ref, bands, weights):
    est_rows, ref_rows = est.tolist(), ref.tolist()
    total = 0.0
    for (start, end, _), w in zip(bands, weights):
        s = 0.0
        count = 0
        for f in range(start, end):
            for t in range(len(est_rows[0])):
                d = ref_rows[f][t] - est_rows[f][t]
                s += d * d
                count += 1
        total += w * s / count
    return total


def _autograd_gradient(evaluator, est, ref):
    """dL/dM_hat via torch.autograd on a from-scratch differentiable loss"""
    m_hat = est.values.clone().requires_grad_(True)
    m = ref.values
    if evaluator.cfg.domain == LossDomain.LOG_POWER:
        floor = evaluator.cfg.floor_db
        p_hat = (20.0 * torch.log10(m_hat + 1e-8)).clamp_min(floor)
        p = (20.0 * torch.log10(m + 1e-8)).clamp_min(floor)
    else:
        p_hat, p = m_hat, m
    total = torch.zeros((), dtype=torch.float64)
    for band, w in zip(evaluator.partition.bands, evaluator.weights.values):
        total = total + w * ((p[band.start:band.end] - p_hat[band.start:band.end]) ** 2).mean()
    total.backward()
    return m_hat.grad


def test_subband_loss_basics():
    band = Band(index=0, start=2, end=6, center_hz=100.0, lower_hz=50.0, upper_hz=150.0)
    ref, _ = _random_pair(1, shape=(8, 5))
    assert subband_loss(ref, ref.clone(), band) == 0.0
    assert subband_loss(ref + 3.0, ref, band) == pytest.approx(9.0, rel=1e-12)


def test_subband_loss_matches_double_loop():
    est, ref = _random_pair(2, shape=(8, 5))
    band = Band(index=0, start=0, end=8, center_hz=0.0, lower_hz=0.0, upper_hz=0.0)
    s = 0.0
    for f in range(8):
        for t in range(5):
            s += (ref[f, t].item() - est[f, t].item()) ** 2
    assert subband_loss(est, ref, band) == pytest.approx(s / 40, rel=1e-12)


def test_subband_loss_errors():
    est, ref = _random_pair(3, shape=(8, 5))
    with pytest.raises(ShapeMismatch):
        subband_loss(est, ref[:, :4], Band(0, 0, 4, 0.0, 0.0, 0.0))
    with pytest.raises(EmptyBand):
        subband_loss(est, ref, Band(0, 3, 3, 0.0, 0.0, 0.0))
    with pytest.raises(ShapeMismatch):
        subband_loss(est, ref, Band(0, 4, 9, 0.0, 0.0, 0.0))


def test_loud_loss_identity_and_constant_offset():
    partition = build_partition()
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    _, ref = _random_pair(4)

    report = loud_loss(ref.clone(), ref, partition, weights)
    assert report.total == 0.0
    assert all(b.loss == 0.0 for b in report.per_band)

    d = 2.5
    report = loud_loss(ref + d, ref, partition, weights)
    assert report.total == pytest.approx(d * d * sum(weights.values), rel=1e-12)
    assert [b.index for b in report.per_band] == list(range(25))


def test_default_partition_matches_oracle_layout():
    partition = build_partition()
    oracle = _oracle_bands()
    assert [(b.start, b.end) for b in partition.bands] == [(s, e) for s, e, _ in oracle]
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    for w, (_, _, center) in zip(weights.values, oracle):
        assert w == pytest.approx(_oracle_weight(center), rel=1e-12)


def test_loud_loss_matches_naive_oracle():
    partition = build_partition()
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    bands = _oracle_bands()
    oracle_weights = [_oracle_weight(center) for _, _, center in bands]

    for seed in range(5):
        est, ref = _random_pair(100 + seed)
        expected = _naive_loss(est, ref, bands, oracle_weights)
        assert loud_loss(est, ref, partition, weights).total == pytest.approx(expected, rel=1e-10)

    # Wider sweep with a per-band numpy oracle
    for seed in range(100):
        est, ref = _random_pair(200 + seed)
        e, r = est.numpy(), ref.numpy()
        expected = sum(
            w * float(np.mean((r[s:t] - e[s:t]) ** 2)) for (s, t, _), w in zip(bands, oracle_weights)
        )
        total = loud_loss(est, ref, partition, weights).total
        assert total == pytest.approx(expected, rel=1e-10)
        assert total > 0.0


def test_loud_loss_symmetry_and_weight_linearity():
    partition = build_partition()
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    est, ref = _random_pair(5)

    forward = loud_loss(est, ref, partition, weights)
    backward = loud_loss(ref, est, partition, weights)
    assert forward.total == pytest.approx(backward.total, rel=1e-15)

    scaled = loud_loss(est, ref, partition, weights.scaled(3.0))
    assert scaled.total == pytest.approx(3.0 * forward.total, rel=1e-12)
    assert [b.loss for b in scaled.per_band] == [b.loss for b in forward.per_band]


def test_overlap_decomposition_by_membership():
    partition = build_partition()
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    est, ref = _random_pair(6)
    sq = ((ref - est) ** 2).sum(dim=1).tolist()
    frames = est.shape[1]

    per_bin_total = 0.0
    for f in range(partition.num_bins):
        for i in bin_membership(partition, f):
            band = partition.bands[i]
            per_bin_total += weights.values[i] * sq[f] / (band.width * frames)

    report = loud_loss(est, ref, partition, weights)
    even = sum(b.weight * b.loss for b in report.per_band if b.index % 2 == 0)
    odd = sum(b.weight * b.loss for b in report.per_band if b.index % 2 == 1)
    assert report.total == pytest.approx(per_bin_total, rel=1e-12)
    assert report.total == pytest.approx(even + odd, rel=1e-12)


def _two_band_partition():
    bands = (Band(0, 0, 2, 100.0, 0.0, 200.0), Band(1, 2, 4, 300.0, 200.0, 400.0))
    return BandPartition(
        boundaries_hz=(0.0, 200.0, 400.0),
        boundary_bins=(0, 2, 4),
        bands=bands,
        membership=((0,), (0,), (1,), (1,)),
        num_bins=4,
    )


def test_heavier_band_is_more_sensitive():
    partition = _two_band_partition()
    weights = WeightVector((1.0, 2.0), 40.01)
    ref = torch.zeros(4, 3, dtype=torch.float64)

    low = ref.clone()
    low[0:2] += 1.0
    high = ref.clone()
    high[2:4] += 1.0
    gain_low = loud_loss(low, ref, partition, weights).total
    gain_high = loud_loss(high, ref, partition, weights).total
    assert gain_high == pytest.approx(2.0 * gain_low, rel=1e-12)


def test_weight_count_and_shape_errors():
    partition = build_partition()
    est, ref = _random_pair(7)
    with pytest.raises(WeightCountMismatch):
        loud_loss(est, ref, partition, WeightVector.uniform(24))
    with pytest.raises(ShapeMismatch):
        loud_loss(est[:200], ref[:200], partition, WeightVector.uniform(25))


def test_gradient_zero_at_target():
    partition = build_partition()
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    _, ref = _random_pair(8)
    grad = loud_loss_gradient(ref.clone(), ref, partition, weights)
    assert grad.shape == (257, 10)
    assert torch.all(grad.values == 0.0)


def test_gradient_single_band_example():
    partition = BandPartition(
        boundaries_hz=(0.0, 1.0, 2.0),
        boundary_bins=(0, 2, 4),
        bands=(Band(0, 0, 4, 1.0, 0.0, 2.0),),
        membership=((0,),) * 4,
        num_bins=4,
    )
    ref = torch.zeros(4, 1, dtype=torch.float64)
    est = ref.clone()
    est[2, 0] = 1.0
    grad = loud_loss_gradient(est, ref, partition, WeightVector((1.0,), 40.01)).values
    assert grad[2, 0].item() == 0.5
    assert torch.count_nonzero(grad).item() == 1


def test_gradient_matches_finite_differences():
    partition = build_partition()
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    est, ref = _random_pair(9)
    grad = loud_loss_gradient(est, ref, partition, weights).values

    h = 1e-3
    for f, t in [(0, 0), (3, 4), (40, 9), (128, 5), (255, 2), (256, 7)]:
        plus, minus = est.clone(), est.clone()
        plus[f, t] += h
        minus[f, t] -= h
        numeric = (loud_loss(plus, ref, partition, weights).total - loud_loss(minus, ref, partition, weights).total) / (2 * h)
        assert grad[f, t].item() == pytest.approx(numeric, rel=1e-4, abs=1e-8)


def _check_evaluator_gradient(cfg):
    evaluator = LossEvaluator(cfg)
    gen = torch.Generator().manual_seed(5)
    for instance in range(20):
        est, ref = _random_magnitudes(1000 + instance)
        analytic = evaluator.gradient(est, ref).values
        assert torch.allclose(analytic, _autograd_gradient(evaluator, est, ref), rtol=1e-9, atol=1e-15)

        f = int(torch.randint(0, 257, (1,), generator=gen).item())
        t = int(torch.randint(0, 4, (1,), generator=gen).item())
        h = 1e-6 * est.values[f, t].item()
        plus, minus = est.values.clone(), est.values.clone()
        plus[f, t] += h
        minus[f, t] -= h
        numeric = (
            evaluator.loss(MagnitudeSpectrum(plus, 16000, 512), ref).total
            - evaluator.loss(MagnitudeSpectrum(minus, 16000, 512), ref).total
        ) / (2 * h)
        assert analytic[f, t].item() == pytest.approx(numeric, rel=1e-4, abs=1e-9)


def test_evaluator_gradient_matches_autograd_and_finite_differences():
    for cfg in ALL_CONFIGS:
        _check_evaluator_gradient(cfg)


def test_evaluator_total_is_weighted_sum_for_every_config():
    est, ref = _random_magnitudes(77)
    for cfg in ALL_CONFIGS:
        report = LossEvaluator(cfg).loss(est, ref)
        assert report.total == pytest.approx(sum(b.weight * b.loss for b in report.per_band), rel=1e-12)
        assert all(b.loss >= 0.0 for b in report.per_band)
        assert report.config == cfg


def test_per_bin_weighting_is_weighted_global_mean():
    est, ref = _random_magnitudes(31)
    cfg = LossConfig(weighting=Weighting.PER_BIN, partition=None)
    evaluator = LossEvaluator(cfg)
    report = evaluator.loss(est, ref)
    assert len(report.per_band) == 257

    p_hat = (20.0 * torch.log10(est.values + 1e-8)).clamp_min(-80.0)
    p = (20.0 * torch.log10(ref.values + 1e-8)).clamp_min(-80.0)
    v = per_bin_weights(DEFAULT_CONTOUR, 257, 16000, 512).unsqueeze(1)
    expected = (v * (p - p_hat) ** 2).sum().item() / p.numel()
    assert report.total == pytest.approx(expected, rel=1e-10)


def test_uniform_weights_on_equal_bands_give_k_times_global_mse():
    bands = tuple(Band(i, 64 * i, 64 * (i + 1), 0.0, 0.0, 0.0) for i in range(4))
    partition = BandPartition(
        boundaries_hz=(0.0,) * 5,
        boundary_bins=(0, 64, 128, 192, 256),
        bands=bands,
        membership=tuple((f // 64,) for f in range(256)),
        num_bins=256,
    )
    est, ref = _random_pair(12, shape=(256, 10))
    total = loud_loss(est, ref, partition, WeightVector.uniform(4)).total
    assert total == pytest.approx(4 * mse_loss(est, ref), rel=1e-10)


def test_mse_loss_examples():
    a = torch.tensor([[1.0], [3.0]], dtype=torch.float64)
    b = torch.tensor([[1.0], [1.0]], dtype=torch.float64)
    assert mse_loss(a, a.clone()) == 0.0
    assert mse_loss(a, b) == 2.0

    est, ref = _random_pair(13, shape=(6, 7))
    s = sum((ref[f, t].item() - est[f, t].item()) ** 2 for f in range(6) for t in range(7))
    assert mse_loss(est, ref) == pytest.approx(s / 42, rel=1e-12)


def test_compressed_loss_examples():
    est, ref = _random_magnitudes(14)
    assert compressed_loss(est, ref, 1.0) == mse_loss(est, ref)
    assert compressed_loss(ref, ref, 0.3) == 0.0

    ones = torch.ones(3, 2, dtype=torch.float64)
    value = compressed_loss(4.0 * ones, ones, 0.3)
    assert value == pytest.approx((4.0 ** 0.3 - 1.0) ** 2, rel=1e-12)
    assert value == pytest.approx(0.2659, abs=1e-4)


def test_compressed_loss_rejects_bad_alpha():
    ones = torch.ones(3, 2, dtype=torch.float64)
    for alpha in (0.0, -0.3, 1.5):
        with pytest.raises(InvalidAlpha):
            compressed_loss(ones, ones, alpha)


def test_baseline_gradients_match_autograd():
    est, ref = _random_magnitudes(15)
    for alpha in (0.3, 0.7, 1.0):
        m = est.values.clone().requires_grad_(True)
        ((m.pow(alpha) - ref.values.pow(alpha)) ** 2).mean().backward()
        assert torch.allclose(compressed_loss_gradient(est, ref, alpha).values, m.grad, rtol=1e-10, atol=1e-15)

    m = est.values.clone().requires_grad_(True)
    ((m - ref.values) ** 2).mean().backward()
    assert torch.allclose(mse_loss_gradient(est, ref).values, m.grad, rtol=1e-12, atol=1e-18)


def test_loss_config_validation():
    with pytest.raises(InvalidConfig):
        LossConfig(weighting=Weighting.PER_BIN)
    with pytest.raises(InvalidConfig):
        LossConfig(weighting=Weighting.UNIFORM, partition=None)
    with pytest.raises(InvalidConfig):
        LossEvaluator(LossConfig(), StftConfig(window_length=1024, hop_length=512))


def test_ablation_presets():
    presets = ablation_presets()
    assert list(presets) == ['loud-loss', 'no-overlap', 'uniform-split', 'per-bin', 'uniform-weights', 'magnitude']
    assert presets['loud-loss'] == LossConfig()
    assert presets['per-bin'].partition is None
    assert presets['magnitude'].domain == LossDomain.LINEAR_MAGNITUDE


def test_identical_clips_score_zero_under_every_variant():
    _, ref = synth_clip_pair(seed=1, duration_s=0.25)
    for name, report in evaluate_variants(ref, ref).items():
        assert report.total == 0.0, name


def test_evaluate_rejects_length_mismatch():
    est, ref = synth_clip_pair(seed=2)
    short = AudioClip(est.samples[:8000], est.sample_rate)
    with pytest.raises(LengthMismatch, match="length mismatch"):
        evaluate(short, ref)


def test_evaluate_rejects_sample_rate_mismatch():
    est, ref = synth_clip_pair(seed=2)
    slow = AudioClip(est.samples, 8000)
    with pytest.raises(SampleRateMismatch, match="sample rate mismatch"):
        evaluate(slow, ref)
    with pytest.raises(SampleRateMismatch):
        LossEvaluator().evaluate(slow, AudioClip(ref.samples, 8000))


def _numpy_end_to_end(est_clip, ref_clip):
    n = np.arange(512)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / 512)

    def spectrum_db(x):
        frames = [x[t * 256:t * 256 + 512] * window for t in range((len(x) - 512) // 256 + 1)]
        mag = np.abs(np.fft.rfft(np.stack(frames), axis=1)).T
        return np.maximum(20.0 * np.log10(mag + 1e-8), -80.0)

    p_hat = spectrum_db(est_clip.samples.numpy())
    p = spectrum_db(ref_clip.samples.numpy())
    bands = _oracle_bands()
    return _naive_loss(torch.from_numpy(p_hat), torch.from_numpy(p), bands, [_oracle_weight(c) for _, _, c in bands])


def test_synthetic_pair_matches_end_to_end_oracle():
    est, ref = synth_clip_pair(seed=42)
    first = evaluate(est, ref)
    second = evaluate(*synth_clip_pair(seed=42))
    assert first.total == second.total
    assert first.to_dict() == second.to_dict()
    assert first.total == pytest.approx(_numpy_end_to_end(est, ref), rel=1e-9)
    assert first.total > 0.0


def test_report_serializes():
    est, ref = synth_clip_pair(seed=3, duration_s=0.1)
    data = evaluate(est, ref).to_dict()
    assert set(data) == {'total', 'bands', 'config'}
    assert set(data['bands'][0]) == {'i', 'loss', 'weight', 'center_hz'}
    assert data['config']['weighting'] == 'equal-loudness'
    assert data['config']['partition']['num_bands'] == 25


if __name__ == "__main__":
    main("LOSS ENGINE TEST SUITE", globals())
