"""A full-duplex link end to end: turbo SIC and demodulation, per iteration.

Iteration 1 estimates the self-interference channel with the far-end
signal acting as extra noise and demodulates tentatively from the
residual, regressing the far channel on the pilots alone. Iteration 2
removes the reconstructed far-end signal before re-estimating the SI
channel and regresses on the re-encoded symbol decisions, so everything
improves at once: cancellation depth, channel estimates, BER.

The equivalent command line:
    fduwa sweep --preset site2 --mode fd --code 1/3 --snr 2 --seeds 0 \
                --desk-scale 0.3 --iterations 3 --out out/
"""

from fduwa import harness

spec = harness.build_experiment(
    preset="site2", mode="fd", code="1/3", combiner="rake_ic",
    desk_scale=0.3, snrs_db=(2.0,), seeds=(0,), iterations=3,
)
print(f"{spec.name}: {spec.receiver.frame.n_symbols} symbols/frame, "
      f"SIR {spec.mix.sir_db:g} dB, far SNR swept to 2 dB")

rows, traces = harness.run_experiment(spec, keep_traces=True)
for row, trace in zip(rows, traces[(2.0, 0)]):
    print(f"  iteration {row.iteration}: raw BER {trace.ber_raw:.3f}, "
          f"decoded BER {row.ber:.2e}, SIC depth {row.sic_depth_db:.1f} dB, "
          f"SI NMSE {row.si_nmse_db:.1f} dB, far NMSE {row.far_nmse_db:.1f} dB")
