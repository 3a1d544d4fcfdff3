"""
Capacity-allocation demo for the Loud-loss engine
Learns one non-negative gain per frequency bin by plain gradient descent
under Loud-loss, MSE or compressed MSE, then compares per-band residuals
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from audio_io import PIPELINE_SAMPLE_RATE, AudioClip
from config import RuntimeSettings, log_info
from errors import DivergenceDetected, InvalidConfig
from loss_engine import (
    LossConfig,
    LossEvaluator,
    compressed_loss,
    compressed_loss_gradient,
    mse_loss,
    mse_loss_gradient,
)
from spectrum import MagnitudeSpectrum, StftConfig

DEFAULT_STEPS = 200
DEFAULT_LR = 0.01
DEFAULT_FRAMES = 32
DEFAULT_NOISE_LEVEL = 0.1

# Clean-speech template: harmonic comb under a falling spectral tilt
PEAK_MAGNITUDE = 40.0
TILT_DB = 30.0
COMB_FLOOR = 0.15
COMB_WIDTH_BINS = 1.0


class ObjectiveKind(str, Enum):
    LOUD = 'loud-loss'
    MSE = 'mse'
    COMPRESSED = 'compressed'


@dataclass(frozen=True)
class Objective:
    """
    Training objective for the gain model

    Attributes:
        kind: Loud-loss (any LossConfig variant), magnitude MSE or compressed MSE
        loss_cfg: Variant used when kind is LOUD
        alpha: Compression exponent used when kind is COMPRESSED
    """
    kind: ObjectiveKind = ObjectiveKind.LOUD
    loss_cfg: LossConfig = field(default_factory=LossConfig)
    alpha: float = 0.3

    @property
    def name(self) -> str:
        if self.kind == ObjectiveKind.COMPRESSED:
            return f"compressed-{self.alpha:g}"
        return self.kind.value

    @classmethod
    def loud(cls, cfg: LossConfig = LossConfig()) -> 'Objective':
        return cls(kind=ObjectiveKind.LOUD, loss_cfg=cfg)

    @classmethod
    def mse(cls) -> 'Objective':
        return cls(kind=ObjectiveKind.MSE)

    @classmethod
    def compressed(cls, alpha: float = 0.3) -> 'Objective':
        return cls(kind=ObjectiveKind.COMPRESSED, alpha=alpha)


@dataclass(frozen=True)
class GainModel:
    """One multiplicative gain per frequency bin, shared across frames"""
    gains: torch.Tensor

    @classmethod
    def ones(cls, num_bins: int) -> 'GainModel':
        return cls(gains=torch.ones(num_bins, dtype=torch.float64))

    def apply(self, noisy: MagnitudeSpectrum) -> MagnitudeSpectrum:
        return MagnitudeSpectrum(
            values=self.gains.unsqueeze(1) * noisy.values,
            sample_rate=noisy.sample_rate,
            fft_size=noisy.fft_size,
        )


@dataclass(frozen=True)
class TrainRun:
    """
    Attributes:
        objective: Name of the objective trained on
        loss_curve: Objective value before every step and after the last one
        final_gains: Trained model
        per_band_residuals: Final L_sub^i of the default Loud-loss layout
    """
    objective: str
    loss_curve: Tuple[float, ...]
    final_gains: GainModel
    per_band_residuals: Tuple[float, ...]

    def non_increasing_after(self, start: int, rel_tol: float = 1e-12) -> bool:
        curve = self.loss_curve
        return all(
            curve[i + 1] <= curve[i] + rel_tol * abs(curve[i])
            for i in range(start, len(curve) - 1)
        )

    def to_dict(self) -> Dict:
        return {
            'objective': self.objective,
            'loss_curve': list(self.loss_curve),
            'final_gains': self.final_gains.gains.tolist(),
            'per_band_residuals': list(self.per_band_residuals),
        }


@dataclass(frozen=True)
class ObjectiveComparison:
    seed: int
    loud: TrainRun
    mse: TrainRun
    band_weights: Tuple[float, ...]
    max_weight_band: int

    @property
    def loud_residual(self) -> float:
        return self.loud.per_band_residuals[self.max_weight_band]

    @property
    def mse_residual(self) -> float:
        return self.mse.per_band_residuals[self.max_weight_band]

    @property
    def residual_ratio(self) -> Optional[float]:
        """Loud / MSE residual in the maximum-weight band (None when both are zero)"""
        if self.mse_residual == 0.0:
            return None if self.loud_residual == 0.0 else math.inf
        return self.loud_residual / self.mse_residual

    @property
    def loud_wins(self) -> bool:
        return self.loud_residual <= self.mse_residual

    def to_dict(self) -> Dict:
        return {
            'seed': self.seed,
            'max_weight_band': self.max_weight_band,
            'max_weight': self.band_weights[self.max_weight_band],
            'loud_residual': self.loud_residual,
            'mse_residual': self.mse_residual,
            'residual_ratio': self.residual_ratio,
            'loud_wins': self.loud_wins,
            'runs': {'loud': self.loud.to_dict(), 'mse': self.mse.to_dict()},
        }


@dataclass(frozen=True)
class SweepSummary:
    comparisons: Tuple[ObjectiveComparison, ...]

    @property
    def wins(self) -> int:
        return sum(c.loud_wins for c in self.comparisons)

    @property
    def monotone_runs(self) -> int:
        return sum(c.loud.non_increasing_after(5) and c.mse.non_increasing_after(5) for c in self.comparisons)

    def to_dict(self) -> Dict:
        return {
            'seeds': [c.seed for c in self.comparisons],
            'loud_wins': self.wins,
            'monotone_after_step_5': self.monotone_runs,
            'total': len(self.comparisons),
            'residual_ratios': [c.residual_ratio for c in self.comparisons],
        }


def synth_dataset(
    seed: int,
    n_frames: int = DEFAULT_FRAMES,
    noise_level: float = DEFAULT_NOISE_LEVEL,
    fft_size: int = 512,
    sample_rate: int = PIPELINE_SAMPLE_RATE,
) -> Tuple[MagnitudeSpectrum, MagnitudeSpectrum]:
    """
    Deterministic (noisy, clean) magnitude spectra

    Clean frames are a harmonic comb with a random fundamental and level per
    frame, under a tilt falling by TILT_DB from bin 0 to Nyquist. Noise is
    uniform in [0, noise_level) at every bin with no tilt, added in magnitude.
    """
    if n_frames < 1:
        raise InvalidConfig(f"need at least one frame, got {n_frames}")
    if noise_level < 0:
        raise InvalidConfig(f"noise level must be >= 0, got {noise_level}")

    gen = torch.Generator().manual_seed(seed)
    num_bins = fft_size // 2 + 1
    bins = torch.arange(num_bins, dtype=torch.float64).unsqueeze(1)

    f0 = 6.0 + 4.0 * torch.rand(1, n_frames, generator=gen, dtype=torch.float64)
    frame_level = 0.6 + 0.8 * torch.rand(1, n_frames, generator=gen, dtype=torch.float64)
    noise = noise_level * torch.rand(num_bins, n_frames, generator=gen, dtype=torch.float64)

    # Distance from each bin to its nearest harmonic of the frame's fundamental
    offset = torch.remainder(bins, f0)
    distance = torch.minimum(offset, f0 - offset)
    comb = COMB_FLOOR + (1.0 - COMB_FLOOR) * torch.exp(-0.5 * (distance / COMB_WIDTH_BINS) ** 2)
    tilt = torch.pow(10.0, -TILT_DB * bins / (num_bins - 1) / 20.0)

    clean = PEAK_MAGNITUDE * tilt * comb * frame_level
    return (
        MagnitudeSpectrum(values=clean + noise, sample_rate=sample_rate, fft_size=fft_size),
        MagnitudeSpectrum(values=clean, sample_rate=sample_rate, fft_size=fft_size),
    )


def synth_clip_pair(
    seed: int = 42,
    duration_s: float = 1.0,
    tone_hz: float = 440.0,
    amplitude: float = 0.5,
    noise_std: float = 0.05,
    sample_rate: int = PIPELINE_SAMPLE_RATE,
) -> Tuple[AudioClip, AudioClip]:
    """
    (estimate, reference) pair: a sinusoid and the same sinusoid plus seeded white noise
    """
    num_samples = int(round(duration_s * sample_rate))
    t = torch.arange(num_samples, dtype=torch.float64) / sample_rate
    tone = amplitude * torch.sin(2.0 * math.pi * tone_hz * t)
    gen = torch.Generator().manual_seed(seed)
    noise = noise_std * torch.randn(num_samples, generator=gen, dtype=torch.float64)
    return AudioClip(tone + noise, sample_rate), AudioClip(tone, sample_rate)


class GainTrainer:
    """
    Plain projected gradient descent on a GainModel

    The gradient path is objective -> dL/dM_hat -> dL/dgains, with
    dL/dgains(f) = sum_t dL/dM_hat(f, t) * noisy(f, t).
    """

    def __init__(
        self,
        objective: Objective = Objective(),
        residual_cfg: LossConfig = LossConfig(),
        fft_size: int = 512,
        sample_rate: int = PIPELINE_SAMPLE_RATE,
        settings: Optional[RuntimeSettings] = None,
    ):
        """
        Args:
            objective: What to minimize
            residual_cfg: Loud-loss layout used to report per-band residuals
            fft_size: FFT size the spectra were computed with
            sample_rate: Sampling rate of the spectra
            settings: Runtime settings (verbosity)
        """
        self.objective = objective
        self.settings = settings or RuntimeSettings()
        stft_cfg = StftConfig(window_length=fft_size, hop_length=fft_size // 2)
        self.residual_evaluator = LossEvaluator(residual_cfg, stft_cfg, sample_rate=sample_rate)
        self.evaluator = None
        if objective.kind == ObjectiveKind.LOUD:
            self.evaluator = LossEvaluator(objective.loss_cfg, stft_cfg, sample_rate=sample_rate)

    def loss_and_gradient(
        self,
        model: GainModel,
        noisy: MagnitudeSpectrum,
        clean: MagnitudeSpectrum,
    ) -> Tuple[float, torch.Tensor]:
        """
        Objective value and its gradient with respect to the gains
        """
        est = model.apply(noisy)
        if self.objective.kind == ObjectiveKind.LOUD:
            loss = self.evaluator.loss(est, clean).total
            grad_mag = self.evaluator.gradient(est, clean)
        elif self.objective.kind == ObjectiveKind.MSE:
            loss = mse_loss(est, clean)
            grad_mag = mse_loss_gradient(est, clean)
        else:
            loss = compressed_loss(est, clean, self.objective.alpha)
            grad_mag = compressed_loss_gradient(est, clean, self.objective.alpha)
        return loss, (grad_mag.values * noisy.values).sum(dim=1)

    def train(
        self,
        model: GainModel,
        data: Tuple[MagnitudeSpectrum, MagnitudeSpectrum],
        steps: int = DEFAULT_STEPS,
        lr: float = DEFAULT_LR,
    ) -> TrainRun:
        """
        Run `steps` updates gains <- max(0, gains - lr * dL/dgains)

        Raises:
            InvalidConfig: lr <= 0 or steps < 1
            DivergenceDetected: objective became non-finite
        """
        if not lr > 0:
            raise InvalidConfig(f"learning rate must be > 0, got {lr}")
        if steps < 1:
            raise InvalidConfig(f"need at least one step, got {steps}")

        noisy, clean = data
        if model.gains.shape[0] != noisy.values.shape[0]:
            raise InvalidConfig(f"model has {model.gains.shape[0]} gains, spectra have {noisy.values.shape[0]} bins")

        gains = model.gains.clone()
        curve: List[float] = []
        for step in range(steps + 1):
            loss, grad = self.loss_and_gradient(GainModel(gains), noisy, clean)
            if not math.isfinite(loss) or not torch.isfinite(grad).all():
                raise DivergenceDetected(
                    f"{self.objective.name} objective became non-finite at step {step}; lower the learning rate"
                )
            curve.append(loss)
            if step == steps:
                break
            gains = (gains - lr * grad).clamp_min(0.0)
            if not torch.isfinite(gains).all():
                raise DivergenceDetected(
                    f"{self.objective.name} gains overflowed at step {step}; lower the learning rate"
                )
            if step % 50 == 0:
                log_info(f"{self.objective.name} step {step}: loss {loss:.6g}", self.settings)

        final = GainModel(gains)
        residuals = self.residual_evaluator.loss(final.apply(noisy), clean)
        log_info(f"{self.objective.name} finished: loss {curve[-1]:.6g}", self.settings)
        return TrainRun(
            objective=self.objective.name,
            loss_curve=tuple(curve),
            final_gains=final,
            per_band_residuals=tuple(b.loss for b in residuals.per_band),
        )

    @property
    def band_weights(self) -> Tuple[float, ...]:
        return self.residual_evaluator.weights.values


def train(
    model: GainModel,
    data: Tuple[MagnitudeSpectrum, MagnitudeSpectrum],
    objective: Objective = Objective(),
    steps: int = DEFAULT_STEPS,
    lr: float = DEFAULT_LR,
) -> TrainRun:
    noisy, _ = data
    return GainTrainer(objective, fft_size=noisy.fft_size, sample_rate=noisy.sample_rate).train(model, data, steps, lr)


def compare_objectives(
    seed: int,
    steps: int = DEFAULT_STEPS,
    lr: float = DEFAULT_LR,
    n_frames: int = DEFAULT_FRAMES,
    noise_level: float = DEFAULT_NOISE_LEVEL,
    loss_cfg: LossConfig = LossConfig(),
    settings: Optional[RuntimeSettings] = None,
) -> ObjectiveComparison:
    """
    Train identically initialized gain models under Loud-loss and MSE
    and compare their residuals in the maximum-weight band
    """
    data = synth_dataset(seed, n_frames, noise_level)
    num_bins = data[0].values.shape[0]

    loud_trainer = GainTrainer(Objective.loud(loss_cfg), settings=settings)
    mse_trainer = GainTrainer(Objective.mse(), settings=settings)
    loud_run = loud_trainer.train(GainModel.ones(num_bins), data, steps, lr)
    mse_run = mse_trainer.train(GainModel.ones(num_bins), data, steps, lr)

    weights = loud_trainer.band_weights
    max_band = max(range(len(weights)), key=lambda i: (weights[i], -i))
    return ObjectiveComparison(seed=seed, loud=loud_run, mse=mse_run, band_weights=weights, max_weight_band=max_band)


def sweep_seeds(
    seeds: Sequence[int],
    steps: int = DEFAULT_STEPS,
    lr: float = DEFAULT_LR,
    n_frames: int = DEFAULT_FRAMES,
    settings: Optional[RuntimeSettings] = None,
) -> SweepSummary:
    return SweepSummary(tuple(
        compare_objectives(seed, steps, lr, n_frames, settings=settings) for seed in seeds
    ))
