"""Time-varying multipath channels, mixing and calibrated noise injection.

Channels operate at the symbol rate: tap l (0-based) delays the input by l
symbol intervals, ``y(i) = sum_l h(i, l) * x(i - l)``. The same indexing is
used by the estimators and the combiners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import ComplexBaseband

__all__ = [
    "TimeVaryingChannel",
    "ChannelModelSpec",
    "MixSpec",
    "MixResult",
    "synthesize_channel",
    "apply_channel",
    "noise_variance_for_snr",
    "mix",
]


def _as_complex(x) -> np.ndarray:
    if isinstance(x, ComplexBaseband):
        x = x.samples
    return np.asarray(x, dtype=np.complex128)


@dataclass(frozen=True)
class TimeVaryingChannel:
    """Per-instant complex tap gains, one row per time instant."""

    taps: np.ndarray  # (n_instants, L)

    def __post_init__(self):
        taps = np.atleast_2d(np.asarray(self.taps, dtype=np.complex128))
        object.__setattr__(self, "taps", taps)
        if not np.all(np.isfinite(taps)):
            raise ValueError("channel taps must be finite")

    @property
    def length(self) -> int:
        return self.taps.shape[1]

    @property
    def n_instants(self) -> int:
        return self.taps.shape[0]

    @property
    def is_static(self) -> bool:
        return self.n_instants == 1 or bool(np.all(self.taps == self.taps[0]))


@dataclass(frozen=True)
class ChannelModelSpec:
    """Sparse multipath model with optional tap-gain time variation.

    ``delays`` are the active tap indices (symbol intervals); all other taps
    are exactly zero. Variation models:

    - ``"static"``: constant taps.
    - ``"polynomial"``: per-tap quadratic trajectories. With explicit
      ``poly_coeffs`` (one ``(c0, c1, c2)`` row per path) the trajectory is
      ``c0 + c1*k + c2*k**2`` in the raw instant index k. Otherwise random
      smooth quadratics with peak relative deviation ``poly_depth`` around
      the mean gains, spanning the synthesized record: shorter (desk-scaled)
      records therefore fade proportionally faster, which is conservative.
    - ``"sinusoidal"``: ``g*(1 + depth*sin(2*pi*rate*k/rate_hz + phase))``.
    """

    length: int
    delays: tuple[int, ...]
    gains_db: tuple[float, ...]
    variation: str = "static"
    seed: int = 0
    rate_hz: float = 4e3
    poly_coeffs: tuple[tuple[complex, complex, complex], ...] | None = None
    poly_depth: float = 0.0
    sin_rate_hz: float = 0.0
    sin_depth: float = 0.0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("channel length must be >= 1")
        if len(self.delays) == 0:
            raise ValueError("active tap set must be nonempty")
        if len(self.delays) != len(self.gains_db):
            raise ValueError("delays and gains_db must have equal length")
        if any(d < 0 or d >= self.length for d in self.delays):
            raise ValueError("path delays must lie in [0, length)")
        if len(set(self.delays)) != len(self.delays):
            raise ValueError("duplicate path delays")
        if self.variation not in ("static", "polynomial", "sinusoidal"):
            raise ValueError(f"unknown variation model {self.variation!r}")


def synthesize_channel(spec: ChannelModelSpec, n_instants: int) -> TimeVaryingChannel:
    """Realize tap trajectories; reproducible from ``spec.seed``."""
    if n_instants < 1:
        raise ValueError("n_instants must be >= 1")
    rng = np.random.default_rng(spec.seed)
    n_paths = len(spec.delays)
    amp = 10.0 ** (np.asarray(spec.gains_db, dtype=float) / 20.0)
    phases = np.exp(2j * np.pi * rng.random(n_paths))
    gains = amp * phases

    taps = np.zeros((n_instants, spec.length), dtype=np.complex128)
    k = np.arange(n_instants, dtype=float)

    if spec.variation == "static":
        for g, d in zip(gains, spec.delays):
            taps[:, d] = g
    elif spec.variation == "polynomial":
        if spec.poly_coeffs is not None:
            if len(spec.poly_coeffs) != n_paths:
                raise ValueError("poly_coeffs must have one row per path")
            for coeffs, d in zip(spec.poly_coeffs, spec.delays):
                c0, c1, c2 = coeffs
                taps[:, d] = c0 + c1 * k + c2 * k**2
        else:
            # random bounded quadratic in normalized time t in [-1, 1]
            t = 2.0 * k / max(n_instants - 1, 1) - 1.0
            for g, d in zip(gains, spec.delays):
                u1 = rng.normal() + 1j * rng.normal()
                u2 = rng.normal() + 1j * rng.normal()
                norm = abs(u1) + abs(u2)
                if norm > 0:
                    u1, u2 = u1 / norm, u2 / norm
                taps[:, d] = g * (1.0 + spec.poly_depth * (u1 * t + u2 * t**2))
    else:  # sinusoidal
        for g, d in zip(gains, spec.delays):
            psi = 2 * np.pi * rng.random()
            taps[:, d] = g * (
                1.0
                + spec.sin_depth
                * np.sin(2 * np.pi * spec.sin_rate_hz * k / spec.rate_hz + psi)
            )
    return TimeVaryingChannel(taps=taps)


def apply_channel(x, ch: TimeVaryingChannel) -> np.ndarray:
    """Time-varying convolution ``y(i) = sum_l h(i, l) x(i - l)``."""
    x = _as_complex(x)
    n = len(x)
    L = ch.length
    taps = ch.taps
    if taps.shape[0] == 1:
        taps_full = np.broadcast_to(taps, (n, L))
    elif taps.shape[0] >= n:
        taps_full = taps[:n]
    else:
        raise ValueError(
            f"channel has {taps.shape[0]} instants but the input has {n} samples"
        )
    x_pad = np.concatenate([np.zeros(L - 1, dtype=np.complex128), x])
    windows = np.lib.stride_tricks.sliding_window_view(x_pad, L)  # [i] = x(i-L+1..i)
    return np.einsum("il,il->i", taps_full, windows[:, ::-1])


def noise_variance_for_snr(p_s: float, p_n: float, snr_linear: float) -> float:
    """Extra noise variance that sets a target SNR on a recorded signal.

    ``p_s`` is the received signal power (signal plus background noise),
    ``p_n`` the background noise power. Returns
    ``(p_s - p_n)/snr - p_n``; refuses targets above the intrinsic SNR.
    """
    if p_n < 0 or p_s <= p_n:
        raise ValueError("need p_s > p_n >= 0")
    if snr_linear <= 0:
        raise ValueError("snr must be positive")
    var = (p_s - p_n) / snr_linear - p_n
    if var < 0:
        raise ValueError(
            f"requested SNR {snr_linear:.4g} exceeds the intrinsic SNR "
            f"{(p_s - p_n) / p_n:.4g}"
        )
    return var


@dataclass(frozen=True)
class MixSpec:
    """Component power targets relative to the background noise.

    ``None`` disables a component entirely (HD mode has no SI).
    """

    si_to_noise_db: float | None = 67.0
    far_snr_db: float | None = 16.0
    noise_power: float = 1.0

    def __post_init__(self):
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")

    @property
    def sir_db(self) -> float | None:
        if self.si_to_noise_db is None or self.far_snr_db is None:
            return None
        return self.far_snr_db - self.si_to_noise_db


@dataclass(frozen=True)
class MixResult:
    """Mixed stream plus the ground-truth bookkeeping of each component."""

    received: np.ndarray
    si_component: np.ndarray
    far_component: np.ndarray
    noise: np.ndarray
    si_gain: float
    far_gain: float
    noise_power: float


def mix(si, far, spec: MixSpec, seed: int) -> MixResult:
    """Scale components to the target ratios and add circular Gaussian noise.

    Powers are measured over the frame, so the realized component-to-noise
    ratios are exact by construction (up to the noise sample variance).
    """
    si = _as_complex(si)
    far = _as_complex(far)
    n = max(len(si), len(far))
    if len(si) < n:
        si = np.concatenate([si, np.zeros(n - len(si), dtype=np.complex128)])
    if len(far) < n:
        far = np.concatenate([far, np.zeros(n - len(far), dtype=np.complex128)])

    def _scaled(x, target_db):
        if target_db is None:
            return np.zeros(n, dtype=np.complex128), 0.0
        p = np.mean(np.abs(x) ** 2)
        if p == 0:
            raise ValueError("cannot scale an all-zero component to a finite ratio")
        gain = np.sqrt(10.0 ** (target_db / 10.0) * spec.noise_power / p)
        return gain * x, float(gain)

    si_scaled, si_gain = _scaled(si, spec.si_to_noise_db)
    far_scaled, far_gain = _scaled(far, spec.far_snr_db)

    rng = np.random.default_rng(seed)
    sigma = np.sqrt(spec.noise_power / 2.0)
    noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))

    return MixResult(
        received=si_scaled + far_scaled + noise,
        si_component=si_scaled,
        far_component=far_scaled,
        noise=noise,
        si_gain=si_gain,
        far_gain=far_gain,
        noise_power=spec.noise_power,
    )
