"""
Command-line front end for the Loud-loss engine
Scores audio pairs, dumps band tables and weights, and runs the training demo
"""

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from typing import Any, Dict, Optional, Sequence

from audio_io import PIPELINE_SAMPLE_RATE, load_wav, save_wav
from config import RuntimeSettings, log_info
from errors import InputError, IoFailure
from loss_engine import (
    LossConfig,
    LossDomain,
    LossEvaluator,
    Weighting,
    compressed_loss,
    evaluate_variants,
    mse_loss,
)
from melbands import BandOverlap, BandScale, PartitionConfig, build_partition
from metrics import compute_metrics
from spectrum import DEFAULT_FLOOR_DB, StftConfig, stft_magnitude, to_log_power
from trainer_demo import (
    DEFAULT_FRAMES,
    DEFAULT_LR,
    DEFAULT_NOISE_LEVEL,
    DEFAULT_STEPS,
    compare_objectives,
    sweep_seeds,
    synth_clip_pair,
)
from weights import DEFAULT_CONTOUR, compute_weights, nearest_entry

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

DEFAULT_ALPHAS = (0.3, 0.7)
JSON_DIGITS = 9


class _ArgumentParser(argparse.ArgumentParser):
    """Turns usage errors into InputError so they share the one-line [ERROR] path"""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def json_float(x: float) -> Optional[float]:
    """Round to 9 significant digits; non-finite values become null"""
    if not math.isfinite(x):
        return None
    return float(f"{x:.{JSON_DIGITS}g}")


def _json_ready(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return json_float(obj)
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def emit_json(payload: Dict) -> None:
    print(json.dumps(_json_ready(payload), indent=2))


def _csv_writer():
    return csv.writer(sys.stdout, lineterminator='\n')


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _partition_cfg(args: argparse.Namespace) -> PartitionConfig:
    return PartitionConfig(
        num_bands=args.bands,
        f_min=args.f_min,
        f_max=args.f_max,
        sample_rate=PIPELINE_SAMPLE_RATE,
        fft_size=args.window,
        scale=BandScale(args.scale),
        overlap=BandOverlap(args.overlap),
    )


def _loss_cfg(args: argparse.Namespace) -> LossConfig:
    weighting = Weighting(args.weighting)
    partition = None if weighting == Weighting.PER_BIN else _partition_cfg(args)
    return LossConfig(
        domain=LossDomain(args.domain),
        weighting=weighting,
        partition=partition,
        floor_db=args.floor_db,
    )


def run_analyze(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    """
    Score an enhanced file against a clean reference

    Prints the configured Loud-loss report, global MSE in both domains,
    compressed MSE at every requested alpha and SNR / SI-SNR.
    """
    stft_cfg = StftConfig(window_length=args.window, hop_length=args.hop)
    cfg = _loss_cfg(args)
    alphas = args.alpha if args.alpha else list(DEFAULT_ALPHAS)

    log_info(f"loading {args.est} and {args.ref}", settings)
    est_clip = load_wav(args.est)
    ref_clip = load_wav(args.ref)

    evaluator = LossEvaluator(cfg, stft_cfg, sample_rate=PIPELINE_SAMPLE_RATE)
    report = evaluator.evaluate(est_clip, ref_clip)

    est_mag = stft_magnitude(est_clip, stft_cfg)
    ref_mag = stft_magnitude(ref_clip, stft_cfg)
    log_info(f"spectra: {est_mag.shape[0]} bins x {est_mag.shape[1]} frames", settings)

    payload = {
        'loss': report.to_dict(),
        'mse': {
            'magnitude': mse_loss(est_mag, ref_mag),
            'log_power': mse_loss(to_log_power(est_mag, cfg.floor_db), to_log_power(ref_mag, cfg.floor_db)),
        },
        'compressed': [
            {'alpha': alpha, 'loss': compressed_loss(est_mag, ref_mag, alpha)} for alpha in alphas
        ],
        'metrics': compute_metrics(est_clip, ref_clip).to_dict(),
    }
    if args.all_variants:
        variants = evaluate_variants(est_clip, ref_clip, stft_cfg, base=_partition_cfg(args))
        payload['variants'] = {name: r.total for name, r in variants.items()}

    emit_json(payload)
    return EXIT_OK


def run_partition(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    """Dump the band table"""
    partition = build_partition(_partition_cfg(args))
    log_info(f"{partition.num_bands} bands over {partition.num_bins} bins", settings)

    if args.format == 'json':
        emit_json({
            'boundaries_hz': list(partition.boundaries_hz),
            'boundary_bins': list(partition.boundary_bins),
            'bands': [
                {'band': b.index, 'start_bin': b.start, 'end_bin': b.end, 'F_i': b.width,
                 'center_hz': b.center_hz, 'lower_hz': b.lower_hz, 'upper_hz': b.upper_hz}
                for b in partition.bands
            ],
        })
        return EXIT_OK

    writer = _csv_writer()
    writer.writerow(['band', 'start_bin', 'end_bin', 'F_i', 'center_hz', 'lower_hz', 'upper_hz'])
    for b in partition.bands:
        writer.writerow([b.index, b.start, b.end, b.width, _fmt(b.center_hz), _fmt(b.lower_hz), _fmt(b.upper_hz)])
    return EXIT_OK


def run_weights(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    """Dump band centers, their nearest table rows and the resulting weights"""
    partition = build_partition(_partition_cfg(args))
    weights = compute_weights(DEFAULT_CONTOUR, partition)
    uniform = args.weighting == Weighting.UNIFORM.value

    rows = []
    for band, w in zip(partition.bands, weights.values):
        table_hz, spl = nearest_entry(DEFAULT_CONTOUR, band.center_hz)
        rows.append({
            'band': band.index,
            'center_hz': band.center_hz,
            'table_hz': table_hz,
            'spl_db': spl,
            'weight': 1.0 if uniform else w,
        })

    if args.format == 'json':
        emit_json({'reference_spl': None if uniform else weights.reference_spl, 'bands': rows})
        return EXIT_OK

    writer = _csv_writer()
    writer.writerow(['band', 'center_hz', 'table_hz', 'spl_db', 'weight'])
    for row in rows:
        writer.writerow([row['band'], _fmt(row['center_hz']), _fmt(row['table_hz']), _fmt(row['spl_db']), _fmt(row['weight'])])
    return EXIT_OK


def run_train_demo(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    """Loud-loss vs MSE gain training on the synthetic dataset"""
    if args.sweep is not None:
        if args.sweep < 1:
            raise InputError(f"--sweep needs at least one seed, got {args.sweep}")
        summary = sweep_seeds(range(args.sweep), args.steps, args.lr, args.frames, settings=settings)
        if args.format == 'json':
            emit_json(summary.to_dict())
            return EXIT_OK
        writer = _csv_writer()
        writer.writerow(['seed', 'max_weight_band', 'loud_residual', 'mse_residual', 'loud_wins'])
        for c in summary.comparisons:
            writer.writerow([c.seed, c.max_weight_band, _fmt(c.loud_residual), _fmt(c.mse_residual), int(c.loud_wins)])
        return EXIT_OK

    comparison = compare_objectives(
        args.seed, args.steps, args.lr, args.frames, args.noise_level, settings=settings
    )
    if args.format == 'json':
        emit_json(comparison.to_dict())
        return EXIT_OK

    writer = _csv_writer()
    writer.writerow(['band', 'weight', 'loud_residual', 'mse_residual'])
    for i, weight in enumerate(comparison.band_weights):
        writer.writerow([
            i, _fmt(weight),
            _fmt(comparison.loud.per_band_residuals[i]),
            _fmt(comparison.mse.per_band_residuals[i]),
        ])
    return EXIT_OK


def run_synth_pair(args: argparse.Namespace, settings: RuntimeSettings) -> int:
    """Write the seeded sinusoid / sinusoid-plus-noise pair as PCM16 files"""
    est, ref = synth_clip_pair(
        seed=args.seed, duration_s=args.duration, tone_hz=args.tone_hz, noise_std=args.noise_std
    )
    save_wav(est, args.est)
    save_wav(ref, args.ref)
    print(f"[OK] wrote {args.est} and {args.ref} ({len(ref)} samples)", file=sys.stderr)
    return EXIT_OK


def _add_partition_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--bands', type=int, default=25, help='Number of sub-bands K (default: 25)')
    parser.add_argument('--scale', choices=[s.value for s in BandScale], default=BandScale.MEL.value)
    parser.add_argument('--overlap', choices=[o.value for o in BandOverlap], default=BandOverlap.HALF.value)
    parser.add_argument('--f-min', type=float, default=0.0, help='Lowest boundary in Hz (default: 0)')
    parser.add_argument('--f-max', type=float, default=None, help='Highest boundary in Hz (default: Nyquist)')
    parser.add_argument('--window', type=int, default=512, help='Window / FFT length in samples (default: 512)')


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='loudloss', description='Perceptually weighted spectral loss engine')
    parser.add_argument('--verbose', action='store_true', help='Print progress on stderr')
    sub = parser.add_subparsers(dest='command', required=True)

    analyze = sub.add_parser('analyze', help='Score an enhanced file against a reference')
    analyze.add_argument('est', help='Enhanced / estimated WAV file')
    analyze.add_argument('ref', help='Clean reference WAV file')
    _add_partition_flags(analyze)
    analyze.add_argument('--hop', type=int, default=256, help='Hop length in samples (default: 256)')
    analyze.add_argument('--weighting', choices=[w.value for w in Weighting], default=Weighting.EQUAL_LOUDNESS.value)
    analyze.add_argument('--domain', choices=[d.value for d in LossDomain], default=LossDomain.LOG_POWER.value)
    analyze.add_argument('--floor-db', type=float, default=DEFAULT_FLOOR_DB)
    analyze.add_argument('--alpha', type=float, action='append',
                         help='Compression exponent for compressed MSE; repeatable (default: 0.3 and 0.7)')
    analyze.add_argument('--all-variants', action='store_true', help='Also report every ablation preset')
    analyze.set_defaults(handler=run_analyze)

    partition = sub.add_parser('partition', help='Dump the sub-band table')
    _add_partition_flags(partition)
    partition.add_argument('--format', choices=['csv', 'json'], default='csv')
    partition.set_defaults(handler=run_partition)

    weights = sub.add_parser('weights', help='Dump per-band equal-loudness weights')
    _add_partition_flags(weights)
    weights.add_argument('--weighting', choices=[Weighting.EQUAL_LOUDNESS.value, Weighting.UNIFORM.value],
                         default=Weighting.EQUAL_LOUDNESS.value)
    weights.add_argument('--format', choices=['csv', 'json'], default='csv')
    weights.set_defaults(handler=run_weights)

    train = sub.add_parser('train-demo', help='Compare Loud-loss and MSE gain training')
    train.add_argument('--seed', type=int, default=0)
    train.add_argument('--steps', type=int, default=DEFAULT_STEPS)
    train.add_argument('--lr', type=float, default=DEFAULT_LR)
    train.add_argument('--frames', type=int, default=DEFAULT_FRAMES)
    train.add_argument('--noise-level', type=float, default=DEFAULT_NOISE_LEVEL)
    train.add_argument('--sweep', type=int, default=None, help='Run seeds 0..N-1 and print a summary')
    train.add_argument('--format', choices=['json', 'csv'], default='json')
    train.set_defaults(handler=run_train_demo)

    synth = sub.add_parser('synth-pair', help='Write the seeded synthetic estimate/reference pair')
    synth.add_argument('--seed', type=int, default=42)
    synth.add_argument('--est', required=True, help='Output path for the noisy estimate')
    synth.add_argument('--ref', required=True, help='Output path for the clean reference')
    synth.add_argument('--duration', type=float, default=1.0, help='Seconds (default: 1.0)')
    synth.add_argument('--tone-hz', type=float, default=440.0)
    synth.add_argument('--noise-std', type=float, default=0.05)
    synth.set_defaults(handler=run_synth_pair)

    return parser


def _one_line(exc: BaseException) -> str:
    return ' '.join(str(exc).splitlines()) or type(exc).__name__


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = RuntimeSettings.from_env()
        if args.verbose:
            settings = replace(settings, verbose=True)
        settings.apply()
        return args.handler(args, settings)
    except (InputError, IoFailure) as e:
        print(f"[ERROR] {_one_line(e)}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        print(f"[ERROR] {type(e).__name__}: {_one_line(e)}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
