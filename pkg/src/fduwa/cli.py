"""Command line front end: simulate, sweep, ingest, report."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .dsp import complex_demodulate



def _parse_list(text, cast):
    return tuple(cast(tok) for tok in text.split(",") if tok.strip())


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--preset", choices=harness.preset_names(), help="site preset")
    p.add_argument("--mode", choices=["hd", "fd"], help="half or full duplex")
    p.add_argument("--combiner", choices=["rake", "rake-ic"], help="combiner choice")
    p.add_argument("--code", choices=["1/4", "1/3", "1/2", "2/3"], help="code rate")
    p.add_argument("--snr", type=str, help="comma separated far SNR list in dB")
    p.add_argument("--seeds", type=str, help="comma separated seed list")
    p.add_argument("--iterations", type=int, help="turbo iterations")
    p.add_argument("--desk-scale", type=float, dest="desk_scale",
                   help="frame length scale relative to the 60 s experiment")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def _build_spec(args) -> harness.ExperimentSpec:
    cfg = harness.load_config(args.config) if args.config else {}
    combiner = args.combiner.replace("-", "_") if args.combiner else None
    return harness.experiment_from_config(
        cfg,
        preset=args.preset,
        mode=args.mode,
        combiner=combiner,
        code=args.code,
        snrs_db=_parse_list(args.snr, float) if args.snr else None,
        seeds=_parse_list(args.seeds, int) if args.seeds else None,
        iterations=args.iterations,
        desk_scale=args.desk_scale,
    )


def _cmd_sweep(args) -> int:
    spec = _build_spec(args)
    rows, _ = harness.run_experiment(spec)
    harness.emit_outputs(rows, None, args.out)
    expected = 0
    for snr in spec.snrs_db:
        p_far = 10.0 ** ((spec.mix.far_snr_db or 0.0) / 10.0) * spec.mix.noise_power
        intrinsic = p_far / spec.mix.noise_power
        if 10.0 ** (snr / 10.0) <= intrinsic:
            expected += len(spec.seeds) * spec.receiver.n_iterations
    print(f"{spec.name}: wrote {len(rows)} rows to {args.out / 'results.csv'}")
    if len(rows) < expected:
        print(f"warning: {expected - len(rows)} requested rows were not produced",
              file=sys.stderr)
        return 2
    return 0


def _cmd_simulate(args) -> int:
    spec = _build_spec(args)
    rows, traces = harness.run_experiment(spec, keep_traces=True)
    artifacts = harness.TraceArtifacts(rate_hz=spec.link.fd_hz)
    if traces:
        key = sorted(traces)[0]
        its = traces[key]
        # rebuild the received stream for the reference spectrum
        frame, near, mixed, _ = harness.synthesize_frame(spec, key[1])
        artifacts.streams["received"] = mixed.received
        artifacts.streams["far_true"] = mixed.far_component
        for tr in its:
            artifacts.streams[f"residual_it{tr.iteration}"] = tr.residual
            if tr.h_si is not None:
                artifacts.channels[f"si_it{tr.iteration}"] = tr.h_si
            artifacts.channels[f"far_it{tr.iteration}"] = tr.h_far
    paths = harness.emit_outputs(rows, artifacts, args.out)
    print(f"{spec.name}: wrote {len(paths)} files to {args.out}")
    for row in rows:
        print(f"  it{row.iteration} snr={row.snr_db:g} seed={row.seed} ber={row.ber:.3e}")
    return 0 if rows else 2


def _cmd_ingest(args) -> int:
    cfg = harness.load_config(args.config) if args.config else {}
    spec = harness.experiment_from_config(cfg, preset=args.preset)
    link = spec.link
    passband = harness.ingest_recording(args.file, args.format, link)
    noise = harness.noise_power_from_silence(passband, silence_s=args.silence)
    baseband = complex_demodulate(passband, link)
    args.out.mkdir(parents=True, exist_ok=True)
    out = args.out / (Path(args.file).stem + "_baseband.npz")
    np.savez(out, samples=baseband.samples, rate_hz=baseband.rate_hz,
             noise_power_passband=noise)
    dur = len(passband.samples) / link.fs_hz
    print(f"ingested {args.file}: {dur:.2f} s at {link.fs_hz:g} Hz, "
          f"silence noise power {noise:.3e}")
    print(f"baseband written to {out}")
    return 0


def _cmd_report(args) -> int:
    rows = harness.read_results(args.results)
    if not rows:
        print("no rows found", file=sys.stderr)
        return 2
    curves: dict[tuple, dict[float, list[float]]] = {}
    for row in rows:
        key = (row.mode, row.combiner, row.code_rate, row.iteration)
        curves.setdefault(key, {}).setdefault(row.snr_db, []).append(row.ber)
    print(f"{'mode':<5}{'combiner':<9}{'code':<6}{'it':<4}{'snr@1e-3':<10}points")
    for key in sorted(curves):
        pts = curves[key]
        snrs = sorted(pts)
        means = [float(np.mean(pts[s])) for s in snrs]
        crossing = harness.snr_at_ber(snrs, means, target=args.target)
        label = f"{crossing:.2f}" if np.isfinite(crossing) else "n/a"
        detail = " ".join(f"{s:g}:{b:.1e}" for s, b in zip(snrs, means))
        print(f"{key[0]:<5}{key[1]:<9}{key[2]:<6}{key[3]:<4}{label:<10}{detail}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = argparse.ArgumentParser(
        prog="fduwa",
        description="Full-duplex underwater acoustic link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a BER sweep grid and write results.csv")
    _add_experiment_flags(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("simulate", help="run one scenario and dump spectra/channels")
    _add_experiment_flags(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("ingest", help="load a recorded passband file")
    p.add_argument("--file", type=Path, required=True)
    p.add_argument("--format", choices=["wav24", "raw-float"], default="wav24")
    p.add_argument("--config", type=Path)
    p.add_argument("--preset", choices=harness.preset_names(), default="site1")
    p.add_argument("--silence", type=float, default=5.0,
                   help="leading silence length in seconds")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("report", help="aggregate a results.csv")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--target", type=float, default=1e-3, help="BER target for crossings")
    p.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
