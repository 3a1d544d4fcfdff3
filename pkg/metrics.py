"""
Signal-fidelity metrics: SNR and scale-invariant SNR
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Union

import torch

from audio_io import AudioClip
from errors import LengthMismatch, OrthogonalEstimate, SilentReference

PERFECT = 'perfect'
ORTHOGONAL = '-inf'
UNDEFINED = 'undefined'

# Error energy below signal energy * 1e-24 (240 dB) is float rounding, not error
PERFECT_ENERGY_RATIO = 1e-24


@dataclass(frozen=True)
class MetricReport:
    """
    SNR and SI-SNR in dB

    +inf means the estimate reproduces the reference, -inf that it has no
    component along the reference, None that the reference is silent.
    """
    snr_db: Optional[float]
    si_snr_db: Optional[float]

    def to_dict(self) -> Dict[str, Union[float, str]]:
        return {'snr_db': metric_value(self.snr_db), 'si_snr_db': metric_value(self.si_snr_db)}


def metric_value(db: Optional[float]) -> Union[float, str]:
    """JSON-safe form of a dB value: +inf, -inf and None become sentinels"""
    if db is None:
        return UNDEFINED
    if db == math.inf:
        return PERFECT
    if db == -math.inf:
        return ORTHOGONAL
    return db


def _check_lengths(est: AudioClip, ref: AudioClip) -> None:
    if len(est) != len(ref):
        raise LengthMismatch(f"length mismatch: {len(est)} vs {len(ref)} samples")


def _ratio_db(signal_energy: float, error_energy: float) -> float:
    if error_energy <= signal_energy * PERFECT_ENERGY_RATIO:
        return math.inf
    return 10.0 * math.log10(signal_energy / error_energy)


def snr(est: AudioClip, ref: AudioClip) -> float:
    """
    10 * log10(sum ref^2 / sum (ref - est)^2)

    Returns +inf when est == ref.

    Raises:
        LengthMismatch: clips differ in length
        SilentReference: reference is all zeros
    """
    _check_lengths(est, ref)
    s = ref.samples.to(torch.float64)
    signal_energy = torch.dot(s, s).item()
    if signal_energy == 0.0:
        raise SilentReference("reference signal is silent")
    error = s - est.samples.to(torch.float64)
    return _ratio_db(signal_energy, torch.dot(error, error).item())


def si_snr(est: AudioClip, ref: AudioClip) -> float:
    """
    Scale-invariant SNR after mean removal

    The estimate is projected onto the reference, s = (<e, r> / <r, r>) * r,
    and the result is 10 * log10(|s|^2 / |e - s|^2).

    Raises:
        LengthMismatch: clips differ in length
        SilentReference: reference is constant
        OrthogonalEstimate: projection of the estimate onto the reference is zero
    """
    _check_lengths(est, ref)
    r = ref.samples.to(torch.float64)
    e = est.samples.to(torch.float64)
    r = r - r.mean()
    e = e - e.mean()

    ref_energy = torch.dot(r, r).item()
    if ref_energy == 0.0:
        raise SilentReference("reference signal is silent after mean removal")

    scale = torch.dot(e, r).item() / ref_energy
    if scale == 0.0:
        raise OrthogonalEstimate("estimate is orthogonal to the reference (SI-SNR is -inf)")

    target = scale * r
    noise = e - target
    return _ratio_db(torch.dot(target, target).item(), torch.dot(noise, noise).item())


def _guarded(metric: Callable[[AudioClip, AudioClip], float], est: AudioClip, ref: AudioClip) -> Optional[float]:
    try:
        return metric(est, ref)
    except OrthogonalEstimate:
        return -math.inf
    except SilentReference:
        return None


def compute_metrics(est: AudioClip, ref: AudioClip) -> MetricReport:
    """
    SNR and SI-SNR for one clip pair

    A silent reference or an estimate orthogonal to it is reported in the
    MetricReport rather than raised, so a report can still be printed.

    Raises:
        LengthMismatch: clips differ in length
    """
    _check_lengths(est, ref)
    return MetricReport(snr_db=_guarded(snr, est, ref), si_snr_db=_guarded(si_snr, est, ref))
