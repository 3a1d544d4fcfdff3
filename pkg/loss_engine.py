"""
Loud-loss engine
Sub-band MSE in the log-power domain, perceptually weighted and summed,
with analytic gradients, the ablation variants and the MSE / compressed baselines
"""

from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import torch

from audio_io import AudioClip
from errors import (
    EmptyBand,
    InputError,
    InvalidAlpha,
    InvalidConfig,
    LengthMismatch,
    SampleRateMismatch,
    ShapeMismatch,
    WeightCountMismatch,
)
from melbands import Band, BandOverlap, BandPartition, BandScale, PartitionConfig, build_partition, per_bin_partition
from spectrum import (
    DEFAULT_FLOOR_DB,
    LOG_EPS,
    GradientField,
    LogPowerSpectrum,
    MagnitudeSpectrum,
    StftConfig,
    log_power_gradient_chain,
    stft_magnitude,
    to_log_power,
)
from weights import DEFAULT_CONTOUR, LoudnessContour, WeightVector, compute_weights, per_bin_weights

Spectrum = Union[MagnitudeSpectrum, LogPowerSpectrum, torch.Tensor]


class LossDomain(str, Enum):
    LOG_POWER = 'log-power'
    LINEAR_MAGNITUDE = 'linear-magnitude'


class Weighting(str, Enum):
    EQUAL_LOUDNESS = 'equal-loudness'
    UNIFORM = 'uniform'
    PER_BIN = 'per-bin'


@dataclass(frozen=True)
class LossConfig:
    """
    Which Loud-loss variant to compute

    Attributes:
        domain: Error domain (dB spectra, or linear magnitudes with the same weights)
        weighting: Band weights (equal-loudness, all ones) or per-bin weights without bands
        partition: Band layout; must be None for per-bin weighting
        floor_db: Lower clamp of the dB conversion
    """
    domain: LossDomain = LossDomain.LOG_POWER
    weighting: Weighting = Weighting.EQUAL_LOUDNESS
    partition: Optional[PartitionConfig] = field(default_factory=PartitionConfig)
    floor_db: float = DEFAULT_FLOOR_DB

    def __post_init__(self):
        if self.weighting == Weighting.PER_BIN and self.partition is not None:
            raise InvalidConfig("per-bin weighting does not use a band partition")
        if self.weighting != Weighting.PER_BIN and self.partition is None:
            raise InvalidConfig(f"{self.weighting.value} weighting needs a band partition")

    def to_dict(self) -> Dict:
        partition = None
        if self.partition is not None:
            partition = asdict(self.partition)
            partition['f_max'] = self.partition.upper_hz
            partition['scale'] = self.partition.scale.value
            partition['overlap'] = self.partition.overlap.value
        return {
            'domain': self.domain.value,
            'weighting': self.weighting.value,
            'floor_db': self.floor_db,
            'partition': partition,
        }


@dataclass(frozen=True)
class BandLoss:
    index: int
    loss: float
    weight: float
    center_hz: float


@dataclass(frozen=True)
class LossReport:
    """
    Total loss L = sum_i w^i * L_sub^i and its per-band decomposition
    """
    total: float
    per_band: Tuple[BandLoss, ...]
    config: Optional[LossConfig] = None

    def to_dict(self) -> Dict:
        return {
            'total': self.total,
            'bands': [
                {'i': b.index, 'loss': b.loss, 'weight': b.weight, 'center_hz': b.center_hz}
                for b in self.per_band
            ],
            'config': self.config.to_dict() if self.config is not None else None,
        }


def _values(spec: Spectrum) -> torch.Tensor:
    return spec if isinstance(spec, torch.Tensor) else spec.values


def _check_pair(est: Spectrum, ref: Spectrum) -> Tuple[torch.Tensor, torch.Tensor]:
    est_v, ref_v = _values(est), _values(ref)
    if est_v.shape != ref_v.shape:
        raise ShapeMismatch(f"estimate shape {tuple(est_v.shape)} != reference shape {tuple(ref_v.shape)}")
    if est_v.dim() != 2:
        raise ShapeMismatch(f"spectra must be 2-D (F, T), got shape {tuple(est_v.shape)}")
    return est_v, ref_v


def _check_band(band: Band, num_bins: int) -> None:
    if band.width <= 0:
        raise EmptyBand(f"band {band.index} [{band.start}, {band.end}) holds no bins")
    if band.start < 0 or band.end > num_bins:
        raise ShapeMismatch(f"band {band.index} [{band.start}, {band.end}) exceeds {num_bins} bins")


def _check_weights(partition: BandPartition, w: WeightVector, num_bins: int) -> None:
    if len(w) != partition.num_bands:
        raise WeightCountMismatch(f"{len(w)} weights for {partition.num_bands} bands")
    if partition.num_bins != num_bins:
        raise ShapeMismatch(f"partition covers {partition.num_bins} bins, spectra have {num_bins}")


def subband_loss(est: Spectrum, ref: Spectrum, band: Band) -> float:
    """
    Mean squared dB difference over the F_i x T entries of one band

    Raises:
        ShapeMismatch: spectra differ in shape or the band exceeds them
        EmptyBand: band holds no bins
    """
    est_v, ref_v = _check_pair(est, ref)
    _check_band(band, est_v.shape[0])
    diff = ref_v[band.start:band.end] - est_v[band.start:band.end]
    return (diff * diff).mean().item()


def loud_loss(est: Spectrum, ref: Spectrum, partition: BandPartition, w: WeightVector) -> LossReport:
    """
    Weighted sum of sub-band losses, accumulated in band order

    Raises:
        ShapeMismatch: spectra or partition disagree in shape
        WeightCountMismatch: |w| != K
    """
    est_v, ref_v = _check_pair(est, ref)
    _check_weights(partition, w, est_v.shape[0])

    total = 0.0
    per_band = []
    for band, weight in zip(partition.bands, w.values):
        band_loss = subband_loss(est_v, ref_v, band)
        total += weight * band_loss
        per_band.append(BandLoss(index=band.index, loss=band_loss, weight=weight, center_hz=band.center_hz))
    return LossReport(total=total, per_band=tuple(per_band))


def bin_coefficients(partition: BandPartition, w: WeightVector) -> torch.Tensor:
    """
    c(f) = sum over bands containing f of w^i / F_i
    """
    coeffs = torch.zeros(partition.num_bins, dtype=torch.float64)
    for band, weight in zip(partition.bands, w.values):
        coeffs[band.start:band.end] += weight / band.width
    return coeffs


def loud_loss_gradient(est: Spectrum, ref: Spectrum, partition: BandPartition, w: WeightVector) -> GradientField:
    """
    dL/dP_hat(f, t) = sum_{i: f in band i} w^i * 2 * (P_hat - P) / (F_i * T)

    Raises:
        same as loud_loss
    """
    est_v, ref_v = _check_pair(est, ref)
    _check_weights(partition, w, est_v.shape[0])
    for band in partition.bands:
        _check_band(band, est_v.shape[0])

    num_frames = est_v.shape[1]
    coeffs = bin_coefficients(partition, w).unsqueeze(1)
    return GradientField(values=coeffs * 2.0 * (est_v - ref_v) / num_frames)


def mse_loss(est: Spectrum, ref: Spectrum) -> float:
    """Global mean of (ref - est)^2 over all F x T entries"""
    est_v, ref_v = _check_pair(est, ref)
    diff = ref_v - est_v
    return (diff * diff).mean().item()


def mse_loss_gradient(est: Spectrum, ref: Spectrum) -> GradientField:
    est_v, ref_v = _check_pair(est, ref)
    return GradientField(values=2.0 * (est_v - ref_v) / est_v.numel())


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise InvalidAlpha(f"compression exponent must be in (0, 1], got {alpha}")


def _check_magnitudes(*tensors: torch.Tensor) -> None:
    for t in tensors:
        if (t < 0).any():
            raise InputError("compressed loss needs non-negative magnitudes")


def compressed_loss(est: Spectrum, ref: Spectrum, alpha: float = 0.3) -> float:
    """
    MSE(|M_hat|^alpha, |M|^alpha)

    Raises:
        InvalidAlpha: alpha outside (0, 1]
    """
    _check_alpha(alpha)
    est_v, ref_v = _check_pair(est, ref)
    _check_magnitudes(est_v, ref_v)
    return mse_loss(est_v.pow(alpha), ref_v.pow(alpha))


def compressed_loss_gradient(est: Spectrum, ref: Spectrum, alpha: float = 0.3) -> GradientField:
    """
    2 * (M_hat^a - M^a) * a * max(M_hat, eps)^(a - 1) / (F * T)
    """
    _check_alpha(alpha)
    est_v, ref_v = _check_pair(est, ref)
    _check_magnitudes(est_v, ref_v)
    slope = alpha * est_v.clamp_min(LOG_EPS).pow(alpha - 1.0)
    residual = est_v.pow(alpha) - ref_v.pow(alpha)
    return GradientField(values=2.0 * residual * slope / est_v.numel())


def ablation_presets(base: PartitionConfig = PartitionConfig()) -> Dict[str, LossConfig]:
    """
    The full method and each ablation, keyed by name
    """
    return {
        'loud-loss': LossConfig(partition=base),
        'no-overlap': LossConfig(partition=replace(base, overlap=BandOverlap.NONE)),
        'uniform-split': LossConfig(partition=replace(base, scale=BandScale.UNIFORM_HZ)),
        'per-bin': LossConfig(weighting=Weighting.PER_BIN, partition=None),
        'uniform-weights': LossConfig(weighting=Weighting.UNIFORM, partition=base),
        'magnitude': LossConfig(domain=LossDomain.LINEAR_MAGNITUDE, partition=base),
    }


class LossEvaluator:
    """
    Builds the band layout and weights for one LossConfig once, then scores
    magnitude spectra or audio clips against it
    """

    def __init__(
        self,
        cfg: LossConfig = LossConfig(),
        stft_cfg: StftConfig = StftConfig(),
        contour: LoudnessContour = DEFAULT_CONTOUR,
        sample_rate: int = 16000,
    ):
        """
        Args:
            cfg: Loss variant
            stft_cfg: Analysis parameters used for audio clips
            contour: Equal-loudness table feeding the weights
            sample_rate: Sampling rate the spectra were taken at
        """
        self.cfg = cfg
        self.stft_cfg = stft_cfg
        self.sample_rate = sample_rate
        num_bins = stft_cfg.num_bins

        if cfg.weighting == Weighting.PER_BIN:
            self.partition = per_bin_partition(num_bins, sample_rate, stft_cfg.fft_size)
            bin_weights = per_bin_weights(contour, num_bins, sample_rate, stft_cfg.fft_size) / num_bins
            self.weights = WeightVector(tuple(bin_weights.tolist()), contour.reference_spl)
            return

        if cfg.partition.fft_size != stft_cfg.fft_size or cfg.partition.sample_rate != sample_rate:
            raise InvalidConfig(
                f"partition expects {cfg.partition.sample_rate} Hz / fft {cfg.partition.fft_size}, "
                f"analysis uses {sample_rate} Hz / fft {stft_cfg.fft_size}"
            )
        self.partition = build_partition(cfg.partition)
        if cfg.weighting == Weighting.UNIFORM:
            self.weights = WeightVector.uniform(self.partition.num_bands)
        else:
            self.weights = compute_weights(contour, self.partition)

    def _domain_pair(self, est: MagnitudeSpectrum, ref: MagnitudeSpectrum) -> Tuple[Spectrum, Spectrum]:
        if self.cfg.domain == LossDomain.LOG_POWER:
            return to_log_power(est, self.cfg.floor_db), to_log_power(ref, self.cfg.floor_db)
        return est, ref

    def loss(self, est: MagnitudeSpectrum, ref: MagnitudeSpectrum) -> LossReport:
        """Score an enhanced magnitude spectrum against the clean one"""
        est_d, ref_d = self._domain_pair(est, ref)
        report = loud_loss(est_d, ref_d, self.partition, self.weights)
        return LossReport(total=report.total, per_band=report.per_band, config=self.cfg)

    def gradient(self, est: MagnitudeSpectrum, ref: MagnitudeSpectrum) -> GradientField:
        """dL/dM_hat, chained through the dB conversion in the log-power domain"""
        est_d, ref_d = self._domain_pair(est, ref)
        grad = loud_loss_gradient(est_d, ref_d, self.partition, self.weights)
        if self.cfg.domain == LossDomain.LOG_POWER:
            grad = log_power_gradient_chain(est, grad, self.cfg.floor_db)
        return grad

    def evaluate(self, est_clip: AudioClip, ref_clip: AudioClip) -> LossReport:
        """
        STFT both clips and score them

        Raises:
            LengthMismatch: clips differ in length
            SampleRateMismatch: clips differ in sample rate from each other or the analysis
        """
        if len(est_clip) != len(ref_clip):
            raise LengthMismatch(f"length mismatch: {len(est_clip)} vs {len(ref_clip)} samples")
        if est_clip.sample_rate != ref_clip.sample_rate or est_clip.sample_rate != self.sample_rate:
            raise SampleRateMismatch(
                f"sample rate mismatch: {est_clip.sample_rate} vs {ref_clip.sample_rate} Hz "
                f"(analysis at {self.sample_rate} Hz)"
            )
        est = stft_magnitude(est_clip, self.stft_cfg)
        ref = stft_magnitude(ref_clip, self.stft_cfg)
        return self.loss(est, ref)


def evaluate(
    est_clip: AudioClip,
    ref_clip: AudioClip,
    cfg: LossConfig = LossConfig(),
    stft_cfg: StftConfig = StftConfig(),
) -> LossReport:
    """End-to-end: STFT -> (dB) -> bands/weights -> loss"""
    return LossEvaluator(cfg, stft_cfg, sample_rate=ref_clip.sample_rate).evaluate(est_clip, ref_clip)


def evaluate_variants(
    est_clip: AudioClip,
    ref_clip: AudioClip,
    stft_cfg: StftConfig = StftConfig(),
    base: Optional[PartitionConfig] = None,
) -> Dict[str, LossReport]:
    """Score one clip pair under every ablation preset"""
    if base is None:
        base = PartitionConfig(sample_rate=ref_clip.sample_rate, fft_size=stft_cfg.fft_size)
    return {
        name: evaluate(est_clip, ref_clip, cfg, stft_cfg)
        for name, cfg in ablation_presets(base).items()
    }
