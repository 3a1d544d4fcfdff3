"""
Spectral analysis for the Loud-loss engine
STFT magnitude spectrograms and the dB (log-power) domain the loss is defined in
"""

import math
from dataclasses import dataclass

import torch

from audio_io import AudioClip
from errors import ClipTooShort, InputError, InvalidConfig, ShapeMismatch

LOG_EPS = 1e-8
DEFAULT_FLOOR_DB = -80.0
DEFAULT_WINDOW_LENGTH = 512
DEFAULT_HOP_LENGTH = 256

_DB_PER_NEPER = 20.0 / math.log(10.0)


@dataclass(frozen=True)
class StftConfig:
    """
    STFT analysis parameters (periodic Hann window, no center padding)

    Attributes:
        window_length: Window and FFT size in samples
        hop_length: Frame advance in samples
    """
    window_length: int = DEFAULT_WINDOW_LENGTH
    hop_length: int = DEFAULT_HOP_LENGTH

    def __post_init__(self):
        if self.window_length < 2:
            raise InvalidConfig(f"window length must be >= 2, got {self.window_length}")
        if not 0 < self.hop_length <= self.window_length:
            raise InvalidConfig(
                f"hop length must be in (0, {self.window_length}], got {self.hop_length}"
            )

    @property
    def fft_size(self) -> int:
        return self.window_length

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def window(self) -> torch.Tensor:
        return torch.hann_window(self.window_length, periodic=True, dtype=torch.float64)

    def num_frames(self, num_samples: int) -> int:
        return (num_samples - self.window_length) // self.hop_length + 1


@dataclass(frozen=True)
class MagnitudeSpectrum:
    """
    Linear magnitude |M|, shape (F, T)
    """
    values: torch.Tensor
    sample_rate: int
    fft_size: int

    def __post_init__(self):
        if self.values.dim() != 2:
            raise InputError(f"spectrum must be 2-D (F, T), got shape {tuple(self.values.shape)}")
        if self.values.shape[0] != self.fft_size // 2 + 1:
            raise ShapeMismatch(
                f"spectrum has {self.values.shape[0]} bins, fft size {self.fft_size} "
                f"needs {self.fft_size // 2 + 1}"
            )
        if not torch.isfinite(self.values).all() or (self.values < 0).any():
            raise InputError("magnitudes must be finite and non-negative")

    @property
    def shape(self):
        return tuple(self.values.shape)

    @property
    def freq_bin_hz(self) -> float:
        return self.sample_rate / self.fft_size

    def bin_frequencies(self) -> torch.Tensor:
        return torch.arange(self.values.shape[0], dtype=torch.float64) * self.freq_bin_hz


@dataclass(frozen=True)
class LogPowerSpectrum:
    """
    dB-domain spectrum P = max(20*log10(|M| + eps), floor_db), shape (F, T)
    """
    values: torch.Tensor
    floor_db: float = DEFAULT_FLOOR_DB

    @property
    def shape(self):
        return tuple(self.values.shape)


@dataclass(frozen=True)
class GradientField:
    """
    Gradient of a scalar loss with respect to an (F, T) spectrum
    """
    values: torch.Tensor

    @property
    def shape(self):
        return tuple(self.values.shape)


def stft_magnitude(clip: AudioClip, cfg: StftConfig = StftConfig()) -> MagnitudeSpectrum:
    """
    One-sided STFT magnitude without center padding

    Frame t covers samples [t*hop, t*hop + window_length), giving
    T = floor((len - window_length) / hop) + 1 frames.

    Raises:
        ClipTooShort: clip shorter than one window
    """
    if len(clip) < cfg.window_length:
        raise ClipTooShort(
            f"clip has {len(clip)} samples, need at least {cfg.window_length} for one frame"
        )

    spec = torch.stft(
        clip.samples.to(torch.float64),
        n_fft=cfg.fft_size,
        hop_length=cfg.hop_length,
        win_length=cfg.window_length,
        window=cfg.window,
        center=False,
        onesided=True,
        return_complex=True,
    )
    return MagnitudeSpectrum(values=spec.abs(), sample_rate=clip.sample_rate, fft_size=cfg.fft_size)


def _check_floor(floor_db: float) -> None:
    if not math.isfinite(floor_db):
        raise InvalidConfig(f"floor_db must be finite, got {floor_db}")


def to_log_power(mag: MagnitudeSpectrum, floor_db: float = DEFAULT_FLOOR_DB) -> LogPowerSpectrum:
    """
    Convert magnitudes to dB: max(20*log10(|M| + 1e-8), floor_db)
    """
    _check_floor(floor_db)
    values = (20.0 * torch.log10(mag.values + LOG_EPS)).clamp_min(floor_db)
    return LogPowerSpectrum(values=values, floor_db=floor_db)


def log_power_gradient_chain(
    mag: MagnitudeSpectrum,
    grad_logpower: GradientField,
    floor_db: float = DEFAULT_FLOOR_DB,
) -> GradientField:
    """
    Chain dL/dP back to dL/dM

    dP/dM = 20 / ((M + eps) * ln 10) where the dB value is above the
    floor, and 0 inside the clamp region.

    Raises:
        ShapeMismatch: gradient and spectrum shapes differ
    """
    _check_floor(floor_db)
    if grad_logpower.shape != mag.shape:
        raise ShapeMismatch(f"gradient shape {grad_logpower.shape} != spectrum shape {mag.shape}")

    shifted = mag.values + LOG_EPS
    above_floor = 20.0 * torch.log10(shifted) > floor_db
    local = torch.where(above_floor, _DB_PER_NEPER / shifted, torch.zeros_like(shifted))
    return GradientField(values=grad_logpower.values * local)
