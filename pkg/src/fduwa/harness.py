"""Experiment runner: scenario presets, BER sweeps, recordings, CSV outputs.

Sweeps follow the noise-injection methodology: the frame is mixed once at
the scenario's intrinsic component-to-noise ratios, then each target SNR is
reached by adding complex Gaussian noise with variance
``(P_s - P_n)/SNR - P_n`` where ``P_s`` is the half-duplex received power
(far signal plus background noise) and ``P_n`` the background noise power.
Everything is deterministic given the experiment seeds.
"""

from __future__ import annotations

import csv
import logging
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml
from scipy import signal as ssig

from .channel import (
    ChannelModelSpec,
    MixSpec,
    apply_channel,
    mix,
    noise_variance_for_snr,
    synthesize_channel,
)
from .coding import FrameFormat, get_code, message_bits_for_symbols, prbs
from .dsp import ComplexBaseband, LinkConfig, RealPassband
from .receiver import IterationTrace, LinkTruth, ReceiverConfig, turbo_receive

__all__ = [
    "ExperimentSpec",
    "ResultRow",
    "TraceArtifacts",
    "run_experiment",
    "synthesize_frame",
    "ingest_recording",
    "noise_power_from_silence",
    "write_wav24",
    "emit_outputs",
    "read_results",
    "build_experiment",
    "load_config",
    "preset_names",
    "snr_at_ber",
]

log = logging.getLogger("fduwa")

MIN_REPORTABLE_BITS = 10_000


@dataclass(frozen=True)
class ExperimentSpec:
    """A full sweep description: link, channels, mixing, receiver, grid."""

    name: str
    mode: str  # "hd" | "fd"
    link: LinkConfig
    si_channel: ChannelModelSpec | None
    far_channel: ChannelModelSpec
    mix: MixSpec
    receiver: ReceiverConfig
    snrs_db: tuple[float, ...]
    seeds: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in ("hd", "fd"):
            raise ValueError("mode must be 'hd' or 'fd'")
        if self.mode == "fd" and self.si_channel is None:
            raise ValueError("full-duplex mode needs an SI channel spec")
        if len(self.snrs_db) == 0:
            raise ValueError("SNR sweep must be nonempty")
        if len(self.seeds) == 0:
            raise ValueError("seed list must be nonempty")

    @property
    def effective_mix(self) -> MixSpec:
        if self.mode == "hd":
            return replace(self.mix, si_to_noise_db=None)
        return self.mix


@dataclass(frozen=True)
class ResultRow:
    """One (SNR, seed, iteration) grid point of a sweep."""

    mode: str
    combiner: str
    code_rate: str
    iteration: int
    snr_db: float
    ber: float
    bits_counted: int
    sic_depth_db: float | None
    si_nmse_db: float | None
    far_nmse_db: float | None
    seed: int

    FIELDS = (
        "mode",
        "combiner",
        "code_rate",
        "iteration",
        "snr_db",
        "ber",
        "bits_counted",
        "sic_depth_db",
        "si_nmse_db",
        "far_nmse_db",
        "seed",
    )


def _sub_seed(seed: int, role: int) -> int:
    return seed * 16 + role


def synthesize_frame(spec: ExperimentSpec, seed: int):
    fmt = spec.receiver.frame
    rng = np.random.default_rng(_sub_seed(seed, 0))
    message = rng.integers(0, 2, fmt.n_message_bits)
    frame = fmt.build(message)
    n = fmt.n_symbols

    near = prbs(_sub_seed(seed, 1), n)
    far_ch = synthesize_channel(
        replace(spec.far_channel, seed=spec.far_channel.seed + _sub_seed(seed, 3)), n
    )
    far_bb = apply_channel(frame.combined, far_ch)

    if spec.mode == "fd":
        si_ch = synthesize_channel(
            replace(spec.si_channel, seed=spec.si_channel.seed + _sub_seed(seed, 2)), n
        )
        si_bb = apply_channel(near, si_ch)
    else:
        si_ch = None
        si_bb = np.zeros(n, dtype=np.complex128)

    mixed = mix(si_bb, far_bb, spec.effective_mix, seed=_sub_seed(seed, 4))
    truth = LinkTruth(
        message_bits=message,
        data_symbols=frame.data,
        si_component=mixed.si_component if spec.mode == "fd" else None,
        far_component=mixed.far_component,
        h_si=mixed.si_gain * si_ch.taps if si_ch is not None else None,
        h_far=mixed.far_gain * far_ch.taps,
    )
    return frame, near, mixed, truth


def run_experiment(spec: ExperimentSpec, keep_traces: bool = False,
                   regressor_hook=None):
    """Run the sweep grid; returns (rows, traces).

    ``traces`` maps (snr_db, seed) to the per-iteration traces when
    ``keep_traces`` is set (empty dict otherwise). ``regressor_hook`` lets a
    caller distort the near-end regressor stream (e.g. to emulate a
    nonlinear power amplifier output) before the receiver sees it.
    """
    rows: list[ResultRow] = []
    traces: dict[tuple[float, int], list[IterationTrace]] = {}
    fmt = spec.receiver.frame
    short_rows = 0

    for seed in spec.seeds:
        frame, near, mixed, truth = synthesize_frame(spec, seed)
        p_n = mixed.noise_power
        p_far = float(np.mean(np.abs(mixed.far_component) ** 2))
        p_s = p_far + p_n  # half-duplex received power: far signal + noise

        s_near = near if spec.mode == "fd" else None
        if s_near is not None and regressor_hook is not None:
            s_near = regressor_hook(s_near)

        for snr_db in spec.snrs_db:
            try:
                extra_var = noise_variance_for_snr(p_s, p_n, 10.0 ** (snr_db / 10.0))
            except ValueError as exc:
                log.warning("skipping SNR %.1f dB seed %d: %s", snr_db, seed, exc)
                continue
            # SeedSequence entropy must be nonnegative; offset the milli-dB key
            rng = np.random.default_rng(
                (_sub_seed(seed, 5), int(round(snr_db * 1000)) + 10_000_000)
            )
            extra = np.sqrt(extra_var / 2.0) * (
                rng.standard_normal(len(mixed.received))
                + 1j * rng.standard_normal(len(mixed.received))
            ) if extra_var > 0 else 0.0
            r = mixed.received + extra

            its = turbo_receive(r, s_near, fmt.pilot(), spec.receiver, truth=truth)
            if keep_traces:
                for tr in its:
                    tr.residual_spectrum = _welch_db(tr.residual, spec.link.fd_hz)
                traces[(snr_db, seed)] = its
            for tr in its:
                if tr.bits_counted < MIN_REPORTABLE_BITS:
                    short_rows += 1
                rows.append(
                    ResultRow(
                        mode=spec.mode,
                        combiner=spec.receiver.combiner,
                        code_rate=fmt.code.name,
                        iteration=tr.iteration,
                        snr_db=float(snr_db),
                        ber=float(tr.ber_decoded),
                        bits_counted=tr.bits_counted,
                        sic_depth_db=None if spec.mode == "hd" else tr.sic_depth_db,
                        si_nmse_db=None if spec.mode == "hd" else tr.si_nmse_db,
                        far_nmse_db=tr.far_nmse_db,
                        seed=seed,
                    )
                )

    if short_rows:
        log.warning(
            "%d of %d rows count fewer than %d information bits; raise desk_scale "
            "for reportable points", short_rows, len(rows), MIN_REPORTABLE_BITS,
        )
    rows.sort(key=lambda r: (r.mode, r.combiner, r.code_rate, r.snr_db, r.seed, r.iteration))
    return rows, traces


# ---------------------------------------------------------------------------
# recordings

_FULL_SCALE_24 = float(1 << 23)


def write_wav24(path, samples, rate_hz: float) -> None:
    """Write a mono 24-bit little-endian PCM WAV (test/data-prep helper)."""
    samples = np.asarray(samples, dtype=np.float64)
    ints = np.clip(np.round(samples * _FULL_SCALE_24), -(1 << 23), (1 << 23) - 1).astype(
        np.int32
    )
    b = np.zeros((len(ints), 3), dtype=np.uint8)
    u = ints.astype(np.uint32)
    b[:, 0] = u & 0xFF
    b[:, 1] = (u >> 8) & 0xFF
    b[:, 2] = (u >> 16) & 0xFF
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(3)
        wf.setframerate(int(rate_hz))
        wf.writeframes(b.tobytes())


def ingest_recording(path, format: str, link: LinkConfig) -> RealPassband:
    """Load a recorded passband file as normalized floats in [-1, 1].

    ``wav24`` expects mono 24-bit PCM at exactly ``link.fs_hz`` (no
    resampling); ``raw-float`` reads little-endian float32 at the configured
    rate. Truncated files raise instead of returning a partial frame.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "wav24":
        with wave.open(str(path), "rb") as wf:
            if wf.getsampwidth() != 3:
                raise ValueError(f"{path}: expected 24-bit samples, got "
                                 f"{8 * wf.getsampwidth()}-bit")
            if wf.getnchannels() != 1:
                raise ValueError(f"{path}: expected mono, got {wf.getnchannels()} channels")
            if wf.getframerate() != int(link.fs_hz):
                raise ValueError(
                    f"{path}: sample rate {wf.getframerate()} does not match "
                    f"link fs {link.fs_hz:g}; resampling is refused"
                )
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
        if len(raw) != 3 * n_frames:
            raise ValueError(f"{path}: truncated data chunk")
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.uint32)
        vals = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        vals = np.where(vals & 0x800000, vals.astype(np.int64) - (1 << 24), vals).astype(
            np.float64
        )
        return RealPassband(samples=vals / _FULL_SCALE_24, rate_hz=link.fs_hz)
    if format == "raw-float":
        data = np.fromfile(path, dtype="<f4").astype(np.float64)
        if len(data) == 0:
            raise ValueError(f"{path}: empty recording")
        return RealPassband(samples=data, rate_hz=link.fs_hz)
    raise ValueError(f"unsupported format {format!r}; use 'wav24' or 'raw-float'")


def noise_power_from_silence(stream, rate_hz: float | None = None,
                             silence_s: float = 5.0, guard_s: float = 0.25) -> float:
    """Background noise power from the leading silence segment."""
    if isinstance(stream, (RealPassband, ComplexBaseband)):
        rate_hz = stream.rate_hz
        samples = stream.samples
    else:
        if rate_hz is None:
            raise ValueError("rate_hz required for plain arrays")
        samples = np.asarray(stream)
    lo = int(round(guard_s * rate_hz))
    hi = int(round((silence_s - guard_s) * rate_hz))
    if hi <= lo or hi > len(samples):
        raise ValueError("silence segment exceeds the recording")
    return float(np.mean(np.abs(samples[lo:hi]) ** 2))


# ---------------------------------------------------------------------------
# outputs


@dataclass
class TraceArtifacts:
    """Streams and channel estimates to dump alongside the result rows."""

    rate_hz: float
    streams: dict[str, np.ndarray] = field(default_factory=dict)
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    reference: str | None = "received"


def _fmt(value) -> str:
    if value is None:
        return "na"
    if isinstance(value, float):
        if np.isnan(value):
            return "na"
        return repr(float(value))  # shortest exact round-trip form
    return str(value)


def _welch_db(x: np.ndarray, rate_hz: float):
    nseg = min(1024, len(x))
    freqs, psd = ssig.welch(
        x, fs=rate_hz, nperseg=nseg, noverlap=nseg // 2,
        return_onesided=False, detrend=False,
    )
    order = np.argsort(freqs)
    psd = np.maximum(psd[order], 1e-300)
    return freqs[order], 10.0 * np.log10(psd)


def emit_outputs(rows, traces: TraceArtifacts | None, outdir) -> list[Path]:
    """Write results.csv plus spectrum_/channel_ CSVs; returns the paths.

    Spectra carry both absolute power and power normalized to the peak of
    the reference stream's spectrum; channel magnitudes are normalized to
    the strongest tap (0 dB).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    results = outdir / "results.csv"
    with results.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ResultRow.FIELDS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, name)) for name in ResultRow.FIELDS])
    written.append(results)

    if traces is None:
        return written

    ref_db = None
    if traces.reference and traces.reference in traces.streams:
        _, db = _welch_db(traces.streams[traces.reference], traces.rate_hz)
        ref_db = float(np.max(db))
    for tag, stream in traces.streams.items():
        freqs, db = _welch_db(np.asarray(stream), traces.rate_hz)
        ref = ref_db if ref_db is not None else float(np.max(db))
        path = outdir / f"spectrum_{tag}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frequency_hz", "power_db", "power_db_normalized"])
            for f, d in zip(freqs, db):
                writer.writerow([_fmt(float(f)), _fmt(float(d)), _fmt(float(d - ref))])
        written.append(path)

    for tag, taps in traces.channels.items():
        taps = np.atleast_2d(np.asarray(taps))
        mag = np.abs(taps)
        peak = mag.max()
        mag_db = 20.0 * np.log10(np.maximum(mag, 1e-300) / max(peak, 1e-300))
        path = outdir / f"channel_{tag}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_index", "tap", "magnitude_db"])
            for i in range(mag_db.shape[0]):
                for l in range(mag_db.shape[1]):
                    writer.writerow([i, l, _fmt(float(mag_db[i, l]))])
        written.append(path)
    return written


def read_results(path) -> list[ResultRow]:
    """Parse a results.csv back into rows."""
    def _opt(v):
        return None if v == "na" else float(v)

    rows = []
    with Path(path).open() as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                ResultRow(
                    mode=rec["mode"],
                    combiner=rec["combiner"],
                    code_rate=rec["code_rate"],
                    iteration=int(rec["iteration"]),
                    snr_db=float(rec["snr_db"]),
                    ber=float(rec["ber"]),
                    bits_counted=int(rec["bits_counted"]),
                    sic_depth_db=_opt(rec["sic_depth_db"]),
                    si_nmse_db=_opt(rec["si_nmse_db"]),
                    far_nmse_db=_opt(rec["far_nmse_db"]),
                    seed=int(rec["seed"]),
                )
            )
    return rows


def snr_at_ber(snrs_db, bers, target: float = 1e-3) -> float:
    """SNR where a monotonized BER curve crosses ``target`` (log-domain
    interpolation); +inf when the curve never reaches it."""
    snrs = np.asarray(snrs_db, dtype=float)
    bers = np.asarray(bers, dtype=float)
    order = np.argsort(snrs)
    snrs, bers = snrs[order], np.maximum(bers[order], 1e-12)
    bers = np.minimum.accumulate(bers)  # enforce monotone nonincreasing
    below = np.flatnonzero(bers <= target)
    if len(below) == 0:
        return float("inf")
    j = below[0]
    if j == 0:
        return float(snrs[0])
    x0, x1 = snrs[j - 1], snrs[j]
    y0, y1 = np.log10(bers[j - 1]), np.log10(bers[j])
    if y1 == y0:
        return float(x1)
    return float(x0 + (np.log10(target) - y0) * (x1 - x0) / (y1 - y0))


# ---------------------------------------------------------------------------
# presets and config files

_SITE_PRESETS = {
    "site1": {
        "link": dict(fc_hz=36e3, fs_hz=192e3, fd_hz=4e3, rolloff=0.2),
        "frame_seconds": 60.0,
        "si_channel": dict(
            length=100, delays=(0, 3, 9, 17, 34, 52),
            gains_db=(0.0, -3.0, -5.0, -8.0, -11.0, -14.0),
            variation="polynomial", poly_depth=0.15, rate_hz=4e3, seed=101,
        ),
        "far_channel": dict(
            length=20, delays=(0, 2, 5, 9, 14),
            gains_db=(0.0, -2.0, -5.0, -8.0, -11.0),
            variation="polynomial", poly_depth=0.1, rate_hz=4e3, seed=202,
        ),
        "mix": dict(si_to_noise_db=67.0, far_snr_db=16.0),
        "receiver": dict(
            si_length=100, far_length=20,
            si_windows=(1401, 1001), far_windows=(1401, 1001),
            si_estimator="hsrls_l_dcd", far_estimator="srlsd",
            bem_order=2, si_stride=420, far_stride=100,
        ),
        "snrs_db": (0.0, 2.0, 4.0, 6.0, 8.0),
    },
    "site2": {
        "link": dict(fc_hz=12e3, fs_hz=192e3, fd_hz=1e3, rolloff=0.2),
        "frame_seconds": 60.0,
        "si_channel": dict(
            length=50, delays=(0, 5, 12, 26, 40),
            gains_db=(0.0, -4.0, -8.0, -12.0, -16.0),
            variation="static", rate_hz=1e3, seed=111,
        ),
        "far_channel": dict(
            length=30, delays=(0, 4, 9, 14, 21, 28),
            gains_db=(0.0, -3.0, -6.0, -8.0, -10.0, -12.0),
            variation="polynomial", poly_depth=0.05, rate_hz=1e3, seed=222,
        ),
        "mix": dict(si_to_noise_db=60.0, far_snr_db=19.0),
        "receiver": dict(
            si_length=50, far_length=30,
            si_windows=(1201, 1001), far_windows=(1001, 801),
            si_estimator="srlsd", far_estimator="srlsd",
            bem_order=2, si_stride=100, far_stride=100,
        ),
        "snrs_db": (0.0, 2.0, 4.0, 6.0, 8.0),
    },
}

_DEFAULT_ITERATIONS = {"1/4": 3, "1/3": 3, "1/2": 4, "2/3": 5}


def preset_names() -> tuple[str, ...]:
    return tuple(_SITE_PRESETS)


def build_experiment(
    preset: str = "site1",
    mode: str = "fd",
    code: str = "1/3",
    combiner: str | None = None,
    desk_scale: float = 0.1,
    iterations: int | None = None,
    snrs_db=None,
    seeds=(0,),
    overrides: dict | None = None,
    name: str | None = None,
) -> ExperimentSpec:
    """Assemble an ExperimentSpec from a site preset plus overrides.

    ``desk_scale`` shrinks the 60 s lake frames for desk runtimes; the frame
    is sized to the largest codeword fitting the scaled symbol budget.
    ``overrides`` may replace any of the nested sections
    (link/si_channel/far_channel/mix/receiver) or scalar grid fields.
    """
    if preset not in _SITE_PRESETS:
        raise ValueError(f"unknown preset {preset!r}; available: {preset_names()}")
    base = {k: (dict(v) if isinstance(v, dict) else v) for k, v in _SITE_PRESETS[preset].items()}
    overrides = dict(overrides or {})
    for section in ("link", "si_channel", "far_channel", "mix", "receiver"):
        if section in overrides:
            patch = overrides.pop(section)
            base[section] = {**base[section], **{k: _tupled(v) for k, v in patch.items()}}
    if "snrs_db" in overrides:
        snrs_db = overrides.pop("snrs_db")
    if "frame_seconds" in overrides:
        base["frame_seconds"] = float(overrides.pop("frame_seconds"))
    if overrides:
        raise ValueError(f"unknown override keys: {sorted(overrides)}")

    link = LinkConfig(**base["link"])
    codespec = get_code(code)
    n_target = int(round(base["frame_seconds"] * link.fd_hz * desk_scale))
    n_msg = message_bits_for_symbols(codespec, n_target)
    if n_msg <= 0:
        raise ValueError("desk_scale too small: no codeword fits the frame")
    fmt = FrameFormat(code=codespec, n_message_bits=n_msg)

    recv_kwargs = dict(base["receiver"])
    recv_kwargs["si_windows"] = tuple(recv_kwargs["si_windows"])
    recv_kwargs["far_windows"] = tuple(recv_kwargs["far_windows"])
    section_combiner = recv_kwargs.pop("combiner", None)
    section_iters = recv_kwargs.pop("n_iterations", None)
    if iterations is None:
        iterations = section_iters if section_iters is not None else _DEFAULT_ITERATIONS[code]
    combiner = combiner or section_combiner or "rake_ic"
    recv = ReceiverConfig(
        frame=fmt,
        n_iterations=iterations,
        combiner=combiner,
        **recv_kwargs,
    )

    si_spec = ChannelModelSpec(**_tupled_dict(base["si_channel"]))
    far_spec = ChannelModelSpec(**_tupled_dict(base["far_channel"]))
    return ExperimentSpec(
        name=name or f"{preset}-{mode}-{combiner}-{code.replace('/', 'of')}",
        mode=mode,
        link=link,
        si_channel=si_spec,
        far_channel=far_spec,
        mix=MixSpec(**base["mix"]),
        receiver=recv,
        snrs_db=tuple(float(s) for s in (snrs_db if snrs_db is not None else base["snrs_db"])),
        seeds=tuple(int(s) for s in seeds),
    )


def _tupled(v):
    return tuple(v) if isinstance(v, list) else v


def _tupled_dict(d: dict) -> dict:
    return {k: _tupled(v) for k, v in d.items()}


def load_config(path) -> dict:
    """Read a YAML experiment config (nested key/value sections)."""
    with Path(path).open() as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    return cfg


def experiment_from_config(cfg: dict, **cli_overrides) -> ExperimentSpec:
    """Build an experiment from a config dict; CLI keys win over the file."""
    merged = dict(cfg)
    for key, value in cli_overrides.items():
        if value is not None:
            merged[key] = value
    sections = {
        k: merged.pop(k) for k in ("link", "si_channel", "far_channel", "mix", "receiver")
        if k in merged
    }
    if "frame_seconds" in merged:
        sections["frame_seconds"] = merged.pop("frame_seconds")
    return build_experiment(
        preset=merged.pop("preset", "site1"),
        mode=merged.pop("mode", "fd"),
        code=merged.pop("code", "1/3"),
        combiner=merged.pop("combiner", None),
        desk_scale=float(merged.pop("desk_scale", 0.1)),
        iterations=merged.pop("iterations", None),
        snrs_db=merged.pop("snrs_db", None),
        seeds=merged.pop("seeds", (0,)),
        name=merged.pop("name", None),
        overrides=sections | merged,
    )
