"""
Mel-scale band split for the Loud-loss engine
K+2 Mel-equispaced boundaries mapped to STFT bins, grouped into 50%-overlapping sub-bands
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import torch

from errors import BinOutOfRange, DegenerateBand, InvalidConfig, NegativeFrequency, NegativeMel

Number = Union[float, torch.Tensor]


class BandScale(str, Enum):
    MEL = 'mel'
    UNIFORM_HZ = 'uniform-hz'


class BandOverlap(str, Enum):
    HALF = 'half'
    NONE = 'none'


def hz_to_mel(freq: Number) -> Number:
    """
    mel = 2595 * log10(1 + Hz / 700)

    Accepts a float or a tensor and returns the same kind.

    Raises:
        NegativeFrequency: any input below 0 Hz
    """
    f = torch.as_tensor(freq, dtype=torch.float64)
    if (f < 0).any():
        raise NegativeFrequency(f"frequency must be >= 0 Hz, got {f.min().item()}")
    mel = 2595.0 * torch.log10(1.0 + f / 700.0)
    return mel if isinstance(freq, torch.Tensor) else mel.item()


def mel_to_hz(mel: Number) -> Number:
    """
    Hz = 700 * (10^(mel / 2595) - 1)

    Raises:
        NegativeMel: any input below 0 mel
    """
    m = torch.as_tensor(mel, dtype=torch.float64)
    if (m < 0).any():
        raise NegativeMel(f"mel value must be >= 0, got {m.min().item()}")
    hz = 700.0 * (torch.pow(10.0, m / 2595.0) - 1.0)
    return hz if isinstance(mel, torch.Tensor) else hz.item()


@dataclass(frozen=True)
class PartitionConfig:
    """
    How the spectrum is split into sub-bands

    Attributes:
        num_bands: K, number of sub-bands
        f_min: Lowest boundary frequency in Hz
        f_max: Highest boundary frequency in Hz (None means Nyquist)
        sample_rate: Sampling rate in Hz
        fft_size: FFT length in samples
        scale: Boundary spacing (Mel or uniform Hz)
        overlap: HALF for the 50%-overlap split, NONE for contiguous bands
    """
    num_bands: int = 25
    f_min: float = 0.0
    f_max: Optional[float] = None
    sample_rate: int = 16000
    fft_size: int = 512
    scale: BandScale = BandScale.MEL
    overlap: BandOverlap = BandOverlap.HALF

    def __post_init__(self):
        if self.num_bands < 1:
            raise InvalidConfig(f"number of bands must be >= 1, got {self.num_bands}")
        if self.sample_rate <= 0 or self.fft_size < 2:
            raise InvalidConfig(
                f"invalid sample rate / fft size: {self.sample_rate} Hz / {self.fft_size}"
            )
        if not 0.0 <= self.f_min < self.upper_hz <= self.nyquist_hz:
            raise InvalidConfig(
                f"need 0 <= f_min < f_max <= {self.nyquist_hz} Hz, "
                f"got f_min={self.f_min}, f_max={self.upper_hz}"
            )

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate / 2.0

    @property
    def upper_hz(self) -> float:
        return self.nyquist_hz if self.f_max is None else float(self.f_max)

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def hz_to_bin(self, freq: float) -> int:
        return math.floor(freq * self.fft_size / self.sample_rate)


@dataclass(frozen=True)
class Band:
    """One sub-band: bins [start, end)"""
    index: int
    start: int
    end: int
    center_hz: float
    lower_hz: float
    upper_hz: float

    @property
    def width(self) -> int:
        return self.end - self.start

    def contains(self, bin_index: int) -> bool:
        return self.start <= bin_index < self.end


@dataclass(frozen=True)
class BandPartition:
    """
    Immutable band layout over F bins

    Attributes:
        boundaries_hz: Boundary frequencies f_c (K+2 for HALF, K+1 for NONE)
        boundary_bins: Boundary bin indices k_c, same length
        bands: K bands in frequency order
        membership: For every bin, the sorted indices of bands containing it
        num_bins: F
        config: Source configuration (None for the per-bin layout)
    """
    boundaries_hz: Tuple[float, ...]
    boundary_bins: Tuple[int, ...]
    bands: Tuple[Band, ...]
    membership: Tuple[Tuple[int, ...], ...]
    num_bins: int
    config: Optional[PartitionConfig] = None

    @property
    def num_bands(self) -> int:
        return len(self.bands)

    @property
    def centers_hz(self) -> Tuple[float, ...]:
        return tuple(band.center_hz for band in self.bands)


def _membership_table(bands: Sequence[Band], num_bins: int) -> Tuple[Tuple[int, ...], ...]:
    table: List[List[int]] = [[] for _ in range(num_bins)]
    for band in bands:
        for b in range(band.start, band.end):
            table[b].append(band.index)
    return tuple(tuple(entry) for entry in table)


def _boundary_frequencies(cfg: PartitionConfig, num_points: int) -> List[float]:
    if cfg.scale == BandScale.MEL:
        mels = torch.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.upper_hz), num_points, dtype=torch.float64)
        freqs = mel_to_hz(mels).tolist()
    else:
        freqs = torch.linspace(cfg.f_min, cfg.upper_hz, num_points, dtype=torch.float64).tolist()
    # Pin the endpoints so the Nyquist edge does not drift below bin F-1
    freqs[0] = float(cfg.f_min)
    freqs[-1] = cfg.upper_hz
    return freqs


def _band_center(cfg: PartitionConfig, lower: float, upper: float) -> float:
    if cfg.scale == BandScale.MEL:
        return mel_to_hz(0.5 * (hz_to_mel(lower) + hz_to_mel(upper)))
    return 0.5 * (lower + upper)


def build_partition(cfg: PartitionConfig = PartitionConfig()) -> BandPartition:
    """
    Build the sub-band layout

    HALF overlap: K+2 boundaries, band i = bins [k_c[i], k_c[i+2]) centred on f_c[i+1].
    NONE overlap: K+1 boundaries, band i = bins [k_c[i], k_c[i+1]) centred on the
    scale midpoint of its edges.

    Raises:
        DegenerateBand: a band would contain no bins
    """
    K = cfg.num_bands
    half = cfg.overlap == BandOverlap.HALF
    freqs = _boundary_frequencies(cfg, K + 2 if half else K + 1)

    bins = [cfg.hz_to_bin(f) for f in freqs]
    if cfg.upper_hz == cfg.nyquist_hz:
        bins[-1] = cfg.num_bins

    span = 2 if half else 1
    bands = []
    for i in range(K):
        lower, upper = freqs[i], freqs[i + span]
        center = freqs[i + 1] if half else _band_center(cfg, lower, upper)
        band = Band(index=i, start=bins[i], end=bins[i + span], center_hz=center, lower_hz=lower, upper_hz=upper)
        if band.width <= 0:
            raise DegenerateBand(
                f"band {i} ({lower:.1f}-{upper:.1f} Hz) maps to no bins; "
                f"reduce the number of bands ({K}) or raise the FFT size ({cfg.fft_size})"
            )
        bands.append(band)

    return BandPartition(
        boundaries_hz=tuple(freqs),
        boundary_bins=tuple(bins),
        bands=tuple(bands),
        membership=_membership_table(bands, cfg.num_bins),
        num_bins=cfg.num_bins,
        config=cfg,
    )


def per_bin_partition(num_bins: int, sample_rate: int, fft_size: int) -> BandPartition:
    """
    Layout with one single-bin band per frequency bin (no grouping)
    """
    bin_hz = sample_rate / fft_size
    bands = tuple(
        Band(index=f, start=f, end=f + 1, center_hz=f * bin_hz,
             lower_hz=(f - 0.5) * bin_hz if f else 0.0, upper_hz=(f + 0.5) * bin_hz)
        for f in range(num_bins)
    )
    return BandPartition(
        boundaries_hz=tuple(f * bin_hz for f in range(num_bins + 1)),
        boundary_bins=tuple(range(num_bins + 1)),
        bands=bands,
        membership=tuple((f,) for f in range(num_bins)),
        num_bins=num_bins,
    )


def bin_membership(partition: BandPartition, bin_index: int) -> List[int]:
    """
    Sorted indices of the bands whose range contains bin_index

    Raises:
        BinOutOfRange: bin outside [0, F)
    """
    if not 0 <= bin_index < partition.num_bins:
        raise BinOutOfRange(f"bin {bin_index} outside [0, {partition.num_bins})")
    return list(partition.membership[bin_index])
