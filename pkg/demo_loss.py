"""
Quick Demo: Loud-loss engine
Scores the synthetic sinusoid pair under every variant, then runs the gain-training comparison
"""

from audio_io import AudioClip
from errors import LoudLossError
from loss_engine import evaluate, evaluate_variants
from metrics import compute_metrics, metric_value
from trainer_demo import compare_objectives, synth_clip_pair
from weights import DEFAULT_CONTOUR, nearest_entry


def main():
    print("=" * 70)
    print("LOUD-LOSS ENGINE - DEMO")
    print("=" * 70)
    print()
    print("This demo shows how the loss combines:")
    print("  - Log-power spectra (dB error, not energy error)")
    print("  - 25 half-overlapping Mel sub-bands")
    print("  - 40-phon equal-loudness weights per band")
    print()
    print("=" * 70)
    print()

    try:
        print("Synthesizing 440 Hz tone + white noise (seed 42)...")
        est, ref = synth_clip_pair(seed=42)
        print(f"[OK] {len(ref)} samples at {ref.sample_rate} Hz\n")

        print(f"\n{'='*70}")
        print("DEMO 1/3: Default Loud-loss report")
        print(f"{'='*70}\n")
        report = evaluate(est, ref)
        print(f"[Total] {report.total:.6f}")
        print(f"\n{'band':>4} {'center Hz':>10} {'table Hz':>9} {'weight':>8} {'L_sub':>10}")
        for band in report.per_band:
            table_hz, _ = nearest_entry(DEFAULT_CONTOUR, band.center_hz)
            print(f"{band.index:>4} {band.center_hz:>10.1f} {table_hz:>9.0f} {band.weight:>8.4f} {band.loss:>10.4f}")

        print(f"\n{'='*70}")
        print("DEMO 2/3: Ablation variants on the same pair")
        print(f"{'='*70}\n")
        for name, variant in evaluate_variants(est, ref).items():
            print(f"  {name:<16} {variant.total:>14.6f}")

        metrics = compute_metrics(est, ref)
        silent_est = AudioClip(est.samples * 0.0, est.sample_rate)
        print(f"\n[Metrics] SNR {metric_value(metrics.snr_db)} dB, SI-SNR {metric_value(metrics.si_snr_db)} dB")
        print(f"[Metrics] all-zero estimate: SNR {compute_metrics(silent_est, ref).snr_db:.2f} dB")

        print(f"\n{'='*70}")
        print("DEMO 3/3: Capacity allocation (per-bin gain, Loud-loss vs MSE)")
        print(f"{'='*70}\n")
        comparison = compare_objectives(seed=0)
        band = comparison.max_weight_band
        print(f"[Band] max-weight band {band} (w = {comparison.band_weights[band]:.4f})")
        print(f"[Loud-loss] residual {comparison.loud_residual:.6f}")
        print(f"[MSE]       residual {comparison.mse_residual:.6f}")
        print(f"[Ratio]     {comparison.residual_ratio:.4f}")

        print("\n[DONE] Demo complete! Run `python cli.py --help` for the full command set.")

    except LoudLossError as e:
        print(f"[ERROR] {e}")


if __name__ == "__main__":
    main()
