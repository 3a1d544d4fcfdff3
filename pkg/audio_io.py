"""
Audio I/O for the Loud-loss engine
Reads and writes mono 16-bit PCM RIFF/WAVE files at 16 kHz
"""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import torch

from errors import (
    InputError,
    IoFailure,
    MalformedWav,
    SampleRateMismatch,
    UnsupportedFormat,
)

PIPELINE_SAMPLE_RATE = 16000
PCM16_SCALE = 32768.0

_WAVE_FORMAT_PCM = 1
_FMT_STRUCT = struct.Struct('<HHIIHH')
_CHUNK_HEADER = struct.Struct('<4sI')

PathLike = Union[str, Path]


@dataclass(frozen=True)
class AudioClip:
    """
    Mono waveform with its sample rate

    Attributes:
        samples: 1-D float64 tensor of amplitudes in [-1, 1]
        sample_rate: Sampling rate in Hz
    """
    samples: torch.Tensor
    sample_rate: int = PIPELINE_SAMPLE_RATE

    def __post_init__(self):
        if self.samples.dim() != 1:
            raise InputError(f"audio clip must be 1-D, got shape {tuple(self.samples.shape)}")
        if not torch.isfinite(self.samples).all():
            raise InputError("audio samples must be finite")
        if self.sample_rate <= 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


def _read_chunks(data: bytes, path: PathLike) -> Dict[bytes, bytes]:
    """
    Walk the RIFF chunk list and return the bodies of 'fmt ' and 'data'

    Every declared chunk size must match the bytes actually present,
    so a truncated or padded data chunk is rejected here.
    """
    if len(data) < 12:
        raise MalformedWav(f"{path}: file too short for a RIFF header ({len(data)} bytes)")

    riff_id, riff_size = _CHUNK_HEADER.unpack_from(data, 0)
    if riff_id != b'RIFF' or data[8:12] != b'WAVE':
        raise MalformedWav(f"{path}: not a RIFF/WAVE file")
    if riff_size + _CHUNK_HEADER.size != len(data):
        raise MalformedWav(
            f"{path}: RIFF header declares {riff_size + _CHUNK_HEADER.size} bytes, file has {len(data)}"
        )

    chunks = {}
    offset = 12
    while offset < len(data):
        if offset + _CHUNK_HEADER.size > len(data):
            raise MalformedWav(f"{path}: {len(data) - offset} stray bytes after last chunk")

        chunk_id, chunk_size = _CHUNK_HEADER.unpack_from(data, offset)
        if not all(0x20 <= c <= 0x7e for c in chunk_id):
            raise MalformedWav(f"{path}: unreadable chunk id {chunk_id!r} at byte {offset}")
        body_start = offset + _CHUNK_HEADER.size
        body_end = body_start + chunk_size
        if body_end > len(data):
            raise MalformedWav(
                f"{path}: chunk {chunk_id!r} declares {chunk_size} bytes "
                f"but only {len(data) - body_start} remain"
            )

        # Other chunks (LIST, fact, ...) are skipped
        if chunk_id in (b'fmt ', b'data'):
            if chunk_id in chunks:
                raise MalformedWav(f"{path}: duplicate {chunk_id!r} chunk")
            chunks[chunk_id] = data[body_start:body_end]

        # RIFF pads odd-sized chunks to an even boundary
        offset = body_end + (chunk_size & 1)

    if b'fmt ' not in chunks:
        raise MalformedWav(f"{path}: missing 'fmt ' chunk")
    if b'data' not in chunks:
        raise MalformedWav(f"{path}: missing 'data' chunk")
    return chunks


def _parse_fmt(body: bytes, path: PathLike) -> Tuple[int, int]:
    """
    Validate the fmt chunk

    Returns:
        Tuple of (sample_rate, block_align)
    """
    if len(body) < _FMT_STRUCT.size:
        raise MalformedWav(f"{path}: fmt chunk is {len(body)} bytes, need at least {_FMT_STRUCT.size}")

    audio_format, channels, sample_rate, byte_rate, block_align, bits = _FMT_STRUCT.unpack_from(body, 0)

    if audio_format != _WAVE_FORMAT_PCM:
        raise UnsupportedFormat(f"{path}: only PCM is supported, got format tag {audio_format}")
    if channels != 1:
        raise UnsupportedFormat(f"{path}: only mono is supported, got {channels} channels")
    if bits != 16:
        raise UnsupportedFormat(f"{path}: only 16-bit samples are supported, got {bits}-bit")
    if block_align != 2 or byte_rate != sample_rate * 2:
        raise MalformedWav(
            f"{path}: inconsistent fmt chunk (block_align={block_align}, byte_rate={byte_rate})"
        )
    if sample_rate != PIPELINE_SAMPLE_RATE:
        raise SampleRateMismatch(
            f"{path}: sample rate {sample_rate} Hz, pipeline requires {PIPELINE_SAMPLE_RATE} Hz"
        )
    return sample_rate, block_align


def load_wav(path: PathLike) -> AudioClip:
    """
    Load a mono PCM16 16 kHz WAV file

    Args:
        path: File to read

    Returns:
        AudioClip with samples scaled by 1/32768

    Raises:
        IoFailure: file cannot be read
        MalformedWav: bad header or chunk sizes
        UnsupportedFormat: stereo, non-PCM or bit depth other than 16
        SampleRateMismatch: rate other than 16000 Hz
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"{path}: cannot read file ({e.strerror or e})") from e

    chunks = _read_chunks(data, path)
    sample_rate, block_align = _parse_fmt(chunks[b'fmt '], path)

    payload = chunks[b'data']
    if len(payload) % block_align:
        raise MalformedWav(f"{path}: data chunk length {len(payload)} is not a multiple of {block_align}")
    if not payload:
        raise MalformedWav(f"{path}: data chunk holds no samples")

    pcm = np.frombuffer(payload, dtype='<i2').astype(np.float64)
    samples = torch.from_numpy(pcm / PCM16_SCALE)
    return AudioClip(samples=samples, sample_rate=sample_rate)


def save_wav(clip: AudioClip, path: PathLike) -> None:
    """
    Write a clip as mono PCM16

    Samples are clamped to [-1, 1), scaled by 32768 and rounded to
    the nearest integer.

    Raises:
        IoFailure: file cannot be written
    """
    samples = clip.samples.detach().to(torch.float64).cpu().numpy()
    pcm = np.clip(np.rint(samples * PCM16_SCALE), -32768, 32767).astype('<i2')
    payload = pcm.tobytes()

    fmt_body = _FMT_STRUCT.pack(_WAVE_FORMAT_PCM, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16)
    header = b''.join([
        _CHUNK_HEADER.pack(b'RIFF', 4 + (8 + len(fmt_body)) + (8 + len(payload))),
        b'WAVE',
        _CHUNK_HEADER.pack(b'fmt ', len(fmt_body)),
        fmt_body,
        _CHUNK_HEADER.pack(b'data', len(payload)),
    ])

    try:
        with open(path, 'wb') as f:
            f.write(header)
            f.write(payload)
    except OSError as e:
        raise IoFailure(f"{path}: cannot write file ({e.strerror or e})") from e
