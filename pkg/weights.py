"""
Perceptual band weights for the Loud-loss engine
40-phon equal-loudness contour and the SPL(1 kHz) / SPL(center) weighting
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import torch

from errors import InvalidConfig
from melbands import BandPartition

REFERENCE_HZ = 1000.0

# (frequency Hz, SPL dB) on the 40-phon equal-loudness contour
FORTY_PHON_CONTOUR: Tuple[Tuple[float, float], ...] = (
    (20.0, 99.85), (25.0, 93.94), (31.5, 88.17), (40.0, 82.63),
    (50.0, 77.78), (63.0, 73.08), (80.0, 68.48), (100.0, 64.37),
    (125.0, 60.59), (160.0, 56.70), (200.0, 53.41), (250.0, 50.40),
    (315.0, 47.58), (400.0, 44.98), (500.0, 43.05), (630.0, 41.34),
    (800.0, 40.06), (1000.0, 40.01), (1250.0, 41.82), (1600.0, 42.51),
    (2000.0, 39.23), (2500.0, 36.51), (3150.0, 35.61), (4000.0, 36.65),
    (5000.0, 40.01), (6300.0, 45.83), (8000.0, 51.80), (10000.0, 54.28),
    (12500.0, 51.49),
)


@dataclass(frozen=True)
class LoudnessContour:
    """
    Equal-loudness contour as ordered (frequency, SPL) rows
    """
    entries: Tuple[Tuple[float, float], ...] = FORTY_PHON_CONTOUR

    def __post_init__(self):
        freqs = self.frequencies
        if not freqs:
            raise InvalidConfig("loudness contour needs at least one entry")
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise InvalidConfig("contour frequencies must be strictly increasing")
        if any(spl <= 0 for spl in self.spls):
            raise InvalidConfig("contour SPL values must be positive")

    @property
    def frequencies(self) -> Tuple[float, ...]:
        return tuple(f for f, _ in self.entries)

    @property
    def spls(self) -> Tuple[float, ...]:
        return tuple(spl for _, spl in self.entries)

    @property
    def reference_spl(self) -> float:
        return spl_lookup(self, REFERENCE_HZ)

    def scaled(self, factor: float) -> 'LoudnessContour':
        """Same contour with every SPL multiplied by factor"""
        return LoudnessContour(tuple((f, spl * factor) for f, spl in self.entries))


DEFAULT_CONTOUR = LoudnessContour()


@dataclass(frozen=True)
class WeightVector:
    """
    Per-band weights w^i with the SPL(1 kHz) they are relative to
    """
    values: Tuple[float, ...]
    reference_spl: Optional[float]

    def __len__(self) -> int:
        return len(self.values)

    def as_tensor(self) -> torch.Tensor:
        return torch.tensor(self.values, dtype=torch.float64)

    def scaled(self, factor: float) -> 'WeightVector':
        return WeightVector(tuple(w * factor for w in self.values), self.reference_spl)

    @classmethod
    def uniform(cls, num_bands: int) -> 'WeightVector':
        return cls(values=(1.0,) * num_bands, reference_spl=None)


def nearest_entry(contour: LoudnessContour, freq: float) -> Tuple[float, float]:
    """
    Table row nearest to freq in linear Hz; ties go to the lower frequency
    """
    best = contour.entries[0]
    best_distance = abs(freq - best[0])
    for entry in contour.entries[1:]:
        distance = abs(freq - entry[0])
        if distance < best_distance:
            best, best_distance = entry, distance
    return best


def spl_lookup(contour: LoudnessContour, freq: float) -> float:
    """
    Nearest-neighbor SPL lookup; out-of-table frequencies snap to the endpoints
    """
    return nearest_entry(contour, freq)[1]


def compute_weights(
    contour: LoudnessContour,
    partition: BandPartition,
    reference_spl: Optional[float] = None,
) -> WeightVector:
    """
    w^i = SPL(1000 Hz) / SPL(center of band i)

    Args:
        contour: Equal-loudness table
        partition: Band layout whose centers are looked up
        reference_spl: Numerator override; defaults to the contour's own 1 kHz row
    """
    reference = contour.reference_spl if reference_spl is None else reference_spl
    return WeightVector(
        values=tuple(reference / spl_lookup(contour, center) for center in partition.centers_hz),
        reference_spl=reference,
    )


def interpolated_spl(contour: LoudnessContour, freqs: torch.Tensor) -> torch.Tensor:
    """
    SPL linearly interpolated in (log10 frequency, dB), clamped to the table ends
    """
    table_hz = np.asarray(contour.frequencies, dtype=np.float64)
    clamped = np.clip(freqs.detach().cpu().numpy().astype(np.float64), table_hz[0], table_hz[-1])
    spl = np.interp(np.log10(clamped), np.log10(table_hz), np.asarray(contour.spls, dtype=np.float64))
    return torch.from_numpy(spl)


def per_bin_weights(contour: LoudnessContour, num_bins: int, sample_rate: int, fft_size: int) -> torch.Tensor:
    """
    Weight for every STFT bin: SPL(1000 Hz) / interpolated SPL at the bin frequency

    Bin 0 (0 Hz) clamps to the lowest table row.
    """
    if num_bins != fft_size // 2 + 1:
        raise InvalidConfig(f"{num_bins} bins does not match fft size {fft_size}")
    freqs = torch.arange(num_bins, dtype=torch.float64) * (sample_rate / fft_size)
    return contour.reference_spl / interpolated_spl(contour, freqs)


def contour_checksum(contour: LoudnessContour) -> float:
    """Order-sensitive checksum of the table, used to pin the embedded rows"""
    return math.fsum((i + 1) * (f + 7.0 * spl) for i, (f, spl) in enumerate(contour.entries))
