"""Sample-rate modem primitives: RRC pulse shaping, up/down conversion, decimation.

The transmitter chain is ``symbols -> upsample -> RRC -> carrier``; the front
end is the mirror image ``passband -> carrier removal -> RRC -> decimate``.
Both RRC filters together form a raised-cosine Nyquist pair, so a symbol sent
through the loop peaks at its own symbol index with unit gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinkConfig",
    "RealPassband",
    "ComplexBaseband",
    "FirTaps",
    "design_rrc",
    "shape_and_upconvert",
    "complex_demodulate",
    "fir_filter",
]


@dataclass(frozen=True)
class LinkConfig:
    """Modem parameters shared by the transmitter and the front end.

    ``fs_hz`` must be an integer multiple of the symbol rate ``fd_hz``; the
    ratio is the pulse-shaping upsampling factor. The default RRC span of 32
    symbols keeps the matched pair's truncation ISI below 1e-3 per symbol
    lag at rolloff 0.2 (shorter spans leave percent-level ISI).
    """

    fc_hz: float = 36e3
    fs_hz: float = 192e3
    fd_hz: float = 4e3
    rolloff: float = 0.2
    rrc_span_symbols: int = 32

    def __post_init__(self):
        if self.fs_hz <= 0 or self.fd_hz <= 0:
            raise ValueError("sample rates must be positive")
        if not 0.0 < self.rolloff <= 1.0:
            raise ValueError(f"rolloff must be in (0, 1], got {self.rolloff}")
        if self.rrc_span_symbols < 1:
            raise ValueError("rrc_span_symbols must be >= 1")
        ratio = self.fs_hz / self.fd_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(
                f"fs_hz ({self.fs_hz}) must be an integer multiple of fd_hz ({self.fd_hz})"
            )

    @property
    def sps(self) -> int:
        """Samples per symbol at the passband rate."""
        return int(round(self.fs_hz / self.fd_hz))


def _check_finite(samples: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class RealPassband:
    """Uniformly sampled real passband stream."""

    samples: np.ndarray
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        _check_finite(self.samples, "passband stream")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class ComplexBaseband:
    """Uniformly sampled complex baseband stream."""

    samples: np.ndarray
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.complex128))
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be positive")
        _check_finite(self.samples, "baseband stream")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FirTaps:
    """FIR coefficients plus the group delay they introduce."""

    coefficients: np.ndarray
    group_delay_samples: int

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients))
        if len(self.coefficients) == 0:
            raise ValueError("empty tap vector")
        if self.group_delay_samples < 0:
            raise ValueError("group delay must be nonnegative")


def design_rrc(rolloff: float, span_symbols: int, samples_per_symbol: int) -> FirTaps:
    """Root-raised-cosine taps, unit energy, ``span*sps + 1`` long.

    The two removable singularities of the closed form (t = 0 and
    |t| = 1/(4*rolloff) symbol periods) are evaluated by their analytic
    limits.
    """
    if not 0.0 < rolloff <= 1.0:
        raise ValueError(f"rolloff must be in (0, 1], got {rolloff}")
    if span_symbols < 1 or samples_per_symbol < 1:
        raise ValueError("span_symbols and samples_per_symbol must be >= 1")

    n_taps = span_symbols * samples_per_symbol + 1
    t = (np.arange(n_taps) - (n_taps - 1) / 2) / samples_per_symbol

    zero_mask = t == 0
    special = 1 / (4 * rolloff)
    special_mask = np.abs(np.abs(t) - special) < 8 * np.finfo(float).eps * special
    general_mask = ~zero_mask & ~special_mask

    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sin(np.pi * t * (1 - rolloff)) + 4 * rolloff * t * np.cos(np.pi * t * (1 + rolloff))
        den = np.pi * t * (1 - (4 * rolloff * t) ** 2)
        general = num / den

    at_zero = 1 + rolloff * (4 / np.pi - 1)
    at_special = (
        rolloff
        / np.sqrt(2)
        * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * rolloff))
            + (1 - 2 / np.pi) * np.cos(np.pi / (4 * rolloff))
        )
    )

    h = np.select([zero_mask, special_mask, general_mask], [at_zero, at_special, general])
    h = h / np.sqrt(np.sum(h**2))
    return FirTaps(coefficients=h, group_delay_samples=(n_taps - 1) // 2)


def shape_and_upconvert(symbols, cfg: LinkConfig) -> RealPassband:
    """Upsample, RRC-shape and mix a symbol stream up to the carrier.

    Output length is ``len(symbols) * sps + span * sps`` (the filter
    transient is kept).
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if len(symbols) == 0:
        raise ValueError("empty symbol frame")
    sps = cfg.sps
    taps = design_rrc(cfg.rolloff, cfg.rrc_span_symbols, sps)

    up = np.zeros(len(symbols) * sps, dtype=np.complex128)
    up[::sps] = symbols
    shaped = np.convolve(up, taps.coefficients)

    n = np.arange(len(shaped))
    carrier = np.exp(2j * np.pi * cfg.fc_hz / cfg.fs_hz * n)
    return RealPassband(samples=np.real(shaped * carrier), rate_hz=cfg.fs_hz)


def complex_demodulate(passband: RealPassband, cfg: LinkConfig) -> ComplexBaseband:
    """Mix down, RRC low-pass filter and decimate to the symbol rate.

    Compensates the combined group delay of the shaping and receive RRC
    filters, so output index i corresponds to transmit symbol index i.
    """
    if passband.rate_hz != cfg.fs_hz:
        raise ValueError(
            f"passband rate {passband.rate_hz} does not match cfg.fs_hz {cfg.fs_hz}"
        )
    sps = cfg.sps
    taps = design_rrc(cfg.rolloff, cfg.rrc_span_symbols, sps)

    n = np.arange(len(passband.samples))
    # Re{u e^{jwn}} e^{-jwn} = u/2 + image; the factor 2 restores unit gain.
    mixed = 2.0 * passband.samples * np.exp(-2j * np.pi * cfg.fc_hz / cfg.fs_hz * n)
    filtered = np.convolve(mixed, taps.coefficients)

    delay = 2 * taps.group_delay_samples
    n_symbols = max(0, (len(filtered) - delay + sps - 1) // sps)
    picked = filtered[delay::sps][:n_symbols]
    return ComplexBaseband(samples=picked, rate_hz=cfg.fd_hz)


def fir_filter(x, taps):
    """Linear convolution truncated to the input length (delay kept).

    Accepts a plain array or a ComplexBaseband (returned as the same type).
    """
    taps = np.asarray(taps)
    if len(taps) == 0:
        raise ValueError("empty tap vector")
    if isinstance(x, ComplexBaseband):
        y = np.convolve(x.samples, taps)[: len(x.samples)]
        return ComplexBaseband(samples=y, rate_hz=x.rate_hz)
    x = np.asarray(x)
    return np.convolve(x, taps)[: len(x)]
