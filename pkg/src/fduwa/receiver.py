"""Turbo receiver: SI cancellation, Rake combining, demodulation, iteration.

Alignment conventions (used consistently with :mod:`fduwa.channel`):

- the channel spreads symbol a(n) over received samples n .. n+L-1 (tap l
  carries a(n) at sample n+l);
- both combiners return *symbol-aligned* streams: index n of the output is
  the estimate of symbol a(n), i.e. the textbook combiner output delayed by
  L_f - 1 samples has already been shifted back;
- the first and last L_f combiner outputs lack echo support ("warm-up");
  they are erased before decoding and excluded from error counting.

The Rake-IC branch signal removes every reconstructed far-end component
from the residual and adds back only the branch's own path, carrying the
branch's naturally delayed symbol. With perfect side information the
combined output reduces to pure maximal-ratio combining,
``y(n) = a(n) * sum_l |h(n, l)|^2``, with zero multipath interference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .adaptive import (
    BemConfig,
    EstimatorOutput,
    HomotopyConfig,
    SlidingWindowConfig,
    hsrls_l_dcd_estimate,
    srls_estimate,
    srls_l_estimate,
    srlsd_estimate,
)
from .channel import TimeVaryingChannel, apply_channel
from .coding import FrameFormat
from .dsp import ComplexBaseband

__all__ = [
    "ReceiverConfig",
    "IterationTrace",
    "LinkTruth",
    "SicResult",
    "si_cancel",
    "rake_combine",
    "rake_ic_combine",
    "reconstruct_far",
    "demodulate",
    "turbo_receive",
]


def _as_complex(x) -> np.ndarray:
    if isinstance(x, ComplexBaseband):
        x = x.samples
    return np.asarray(x, dtype=np.complex128)


def _tap_matrix(h, n: int) -> np.ndarray:
    """Channel estimate/truth as an (n, L) matrix of per-instant taps."""
    if isinstance(h, TimeVaryingChannel):
        h = h.taps
    elif isinstance(h, EstimatorOutput):
        h = h.h_hat
    h = np.atleast_2d(np.asarray(h, dtype=np.complex128))
    if h.shape[0] == 1:
        return np.broadcast_to(h, (n, h.shape[1]))
    if h.shape[0] < n:
        raise ValueError(f"tap matrix covers {h.shape[0]} instants, need {n}")
    return h[:n]


@dataclass(frozen=True)
class SicResult:
    """Residual after SI cancellation plus the subtracted estimate."""

    residual: np.ndarray
    si_estimate: np.ndarray
    depth_db: float


def si_cancel(r, s_reg, est, si_truth=None) -> SicResult:
    """Subtract the reconstructed self-interference from the received stream.

    ``e(i) = r(i) - sum_l h_si(i, l) s(i - l)``; the subtraction is exact, so
    ``r == si_estimate + residual`` always holds. The reported depth is
    ``10 log10(P_SI / P_(SI - r_hat))`` when the true SI component is given,
    otherwise the observable input/residual power drop.
    """
    r = _as_complex(r)
    s_reg = _as_complex(s_reg)
    if len(r) != len(s_reg):
        raise ValueError("received and regressor streams must have equal length")
    taps = _tap_matrix(est, len(r))
    si_hat = apply_channel(s_reg, TimeVaryingChannel(taps=taps))
    e = r - si_hat
    if si_truth is not None:
        si_truth = _as_complex(si_truth)
        p_si = np.mean(np.abs(si_truth) ** 2)
        p_left = np.mean(np.abs(si_truth - si_hat) ** 2)
    else:
        p_si = np.mean(np.abs(r) ** 2)
        p_left = np.mean(np.abs(e) ** 2)
    depth = 10.0 * np.log10(p_si / p_left) if p_left > 0 and p_si > 0 else np.inf
    return SicResult(residual=e, si_estimate=si_hat, depth_db=float(depth))


def rake_combine(e, h_far) -> np.ndarray:
    """Maximal-ratio combining matched to the far channel estimate.

    Symbol-aligned output: ``y(n) = sum_l e(n + l) conj(h(n + L - 1, l))``
    with samples outside the frame treated as zero.
    """
    e = _as_complex(e)
    n = len(e)
    taps = _tap_matrix(h_far, n)
    L = taps.shape[1]
    e_pad = np.concatenate([e, np.zeros(L - 1, dtype=np.complex128)])
    windows = np.lib.stride_tricks.sliding_window_view(e_pad, L)  # [n] = e(n..n+L-1)
    coef_idx = np.minimum(np.arange(n) + L - 1, n - 1)
    return np.einsum("il,il->i", windows[:n], np.conj(taps[coef_idx]))


def rake_ic_combine(e, a_hat, h_far, f_hat) -> np.ndarray:
    """Rake combining with multipath interference cancellation.

    Each branch keeps only its own path: the reconstructed far signal is
    removed from the residual and the branch's naturally delayed component
    ``a(n) h(n + l, l)`` is added back, then branches are maximal-ratio
    combined. With ``a_hat = 0`` and ``f_hat = 0`` this degenerates to
    :func:`rake_combine` sample for sample.
    """
    e = _as_complex(e)
    a_hat = _as_complex(a_hat)
    f_hat = _as_complex(f_hat)
    n = len(e)
    if len(a_hat) != n or len(f_hat) != n:
        raise ValueError("e, a_hat and f_hat must have equal length")
    taps = _tap_matrix(h_far, n)
    L = taps.shape[1]

    base = rake_combine(e - f_hat, taps)
    # sum_l h(n+l, l) conj(h(n+L-1, l)): the synthesized target-path energy
    idx = np.minimum(np.arange(n)[:, None] + np.arange(L)[None, :], n - 1)
    h_branch = taps[idx, np.arange(L)[None, :]]
    coef_idx = np.minimum(np.arange(n) + L - 1, n - 1)
    gain = np.einsum("il,il->i", h_branch, np.conj(taps[coef_idx]))
    return base + a_hat * gain


def reconstruct_far(a_hat, h_far) -> np.ndarray:
    """Far-end signal rebuilt by filtering symbol estimates in the channel."""
    a_hat = _as_complex(a_hat)
    taps = _tap_matrix(h_far, len(a_hat))
    return apply_channel(a_hat, TimeVaryingChannel(taps=taps))


@dataclass(frozen=True)
class DemodResult:
    message_bits: np.ndarray
    soft: np.ndarray
    warmup: np.ndarray  # bool mask of erased symbol positions


def demodulate(y, frame: FrameFormat, warmup_symbols: int = 0) -> DemodResult:
    """Slice the quadrature rail, deinterleave and Viterbi-decode.

    ``warmup_symbols`` head/tail positions are erased (zero soft value)
    before decoding. Decisions are invariant to positive scaling of ``y``.
    """
    y = _as_complex(y)
    if len(y) != frame.n_symbols:
        raise ValueError(f"expected {frame.n_symbols} combiner outputs, got {len(y)}")
    soft = np.imag(y).astype(np.float64)
    warm = np.zeros(len(soft), dtype=bool)
    w = min(warmup_symbols, len(soft) // 2)
    if w > 0:
        warm[:w] = True
        warm[len(soft) - w :] = True
        soft = soft.copy()
        soft[warm] = 0.0
    bits = frame.decode(soft)
    return DemodResult(message_bits=bits, soft=soft, warmup=warm)


@dataclass(frozen=True)
class ReceiverConfig:
    """Receiver structure and per-iteration estimator schedules."""

    frame: FrameFormat
    n_iterations: int = 2
    si_length: int = 100
    far_length: int = 20
    si_windows: tuple[int, ...] = (1401, 1001)
    far_windows: tuple[int, ...] = (1401, 1001)
    combiner: str = "rake_ic"
    si_estimator: str = "hsrls_l_dcd"
    far_estimator: str = "srlsd"
    bem_order: int = 2
    si_stride: int | None = None
    far_stride: int | None = None
    regularization: float = 1e-8
    homotopy: HomotopyConfig = field(default_factory=HomotopyConfig)

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.combiner not in ("rake", "rake_ic"):
            raise ValueError("combiner must be 'rake' or 'rake_ic'")
        for name in (self.si_estimator, self.far_estimator):
            if name not in ("srls", "srlsd", "srls_l", "hsrls_l_dcd"):
                raise ValueError(f"unknown estimator {name!r}")
        for sched in (self.si_windows, self.far_windows):
            if len(sched) == 0:
                raise ValueError("window schedule must be nonempty")
            tail = sched[1:]
            if any(b > a for a, b in zip(tail, tail[1:])):
                raise ValueError("window schedule must be nonincreasing after iteration 1")

    def window_at(self, schedule: tuple[int, ...], iteration: int) -> int:
        return schedule[min(iteration, len(schedule) - 1)]

    @property
    def warmup_symbols(self) -> int:
        return self.far_length

    @property
    def message_guard_bits(self) -> int:
        """Information-equivalent of the erased warm-up symbols per frame end."""
        return ceil(self.far_length * self.frame.code.rate)


@dataclass
class IterationTrace:
    """Everything one turbo iteration produced."""

    iteration: int
    h_si: np.ndarray | None
    h_far: np.ndarray
    residual: np.ndarray
    combined: np.ndarray
    sic_depth_db: float
    decoded_bits: np.ndarray
    data_symbols: np.ndarray
    soft: np.ndarray
    ber_raw: float
    ber_decoded: float
    bit_errors: int
    bits_counted: int
    si_nmse_db: float
    far_nmse_db: float
    residual_spectrum: tuple[np.ndarray, np.ndarray] | None = None


@dataclass(frozen=True)
class LinkTruth:
    """Ground truth the harness keeps for scoring a simulated frame."""

    message_bits: np.ndarray
    data_symbols: np.ndarray
    si_component: np.ndarray | None = None
    far_component: np.ndarray | None = None
    h_si: np.ndarray | None = None   # (N, L_si), mix gain applied
    h_far: np.ndarray | None = None  # (N, L_f), mix gain applied


def _estimate(kind: str, desired, regressor, length: int, window: int,
              stride: int | None, eps: float, bem_order: int,
              homotopy: HomotopyConfig) -> EstimatorOutput:
    if kind in ("srls", "srlsd"):
        cfg = SlidingWindowConfig(
            filter_length=length, window_length=window,
            regularization=eps, stride=stride,
        )
        fn = srls_estimate if kind == "srls" else srlsd_estimate
        return fn(desired, regressor, cfg)
    bem = BemConfig(filter_length=length, order=bem_order,
                    window_length=window, stride=stride)
    if kind == "srls_l":
        return srls_l_estimate(desired, regressor, bem, eps=eps)
    return hsrls_l_dcd_estimate(desired, regressor, bem, homotopy)


def _nmse_db(h_hat: np.ndarray, h_true: np.ndarray | None, guard: int) -> float:
    if h_true is None:
        return float("nan")
    n = h_hat.shape[0]
    lo, hi = guard, n - guard
    if hi <= lo:
        lo, hi = 0, n
    num = np.sum(np.abs(h_hat[lo:hi] - h_true[lo:hi]) ** 2)
    den = np.sum(np.abs(h_true[lo:hi]) ** 2)
    return float(10 * np.log10(num / den)) if den > 0 else float("nan")


def turbo_receive(r, s_near, pilots, cfg: ReceiverConfig,
                  truth: LinkTruth | None = None,
                  genie_a_hat: np.ndarray | None = None) -> list[IterationTrace]:
    """Run the iterative SIC / demodulation receiver over one frame.

    Iteration 1 estimates the SI channel against the raw received signal
    (far end acting as noise) and uses the pilots as the far regressor.
    Later iterations first strip the reconstructed far signal from the SI
    estimator's desired signal and regress the far channel on the
    re-encoded symbol decisions. ``s_near = None`` (or all zeros) selects
    half-duplex operation: no SI stage, the residual is the input itself.

    ``genie_a_hat`` replaces the iteration-1 far regressor (testing hook).
    """
    r = _as_complex(r)
    pilots = np.asarray(pilots, dtype=np.float64)
    n = len(r)
    if n != cfg.frame.n_symbols:
        raise ValueError("received frame length does not match the frame format")
    if len(pilots) != n:
        raise ValueError("pilot length does not match the frame")

    full_duplex = s_near is not None
    if full_duplex:
        s_near = _as_complex(s_near)
        if len(s_near) != n:
            raise ValueError("near-end regressor length does not match the frame")
        if not np.any(s_near):
            full_duplex = False

    a_hat = pilots.astype(np.complex128) if genie_a_hat is None else _as_complex(genie_a_hat)
    f_hat = np.zeros(n, dtype=np.complex128)
    si_truth = truth.si_component if truth is not None else None

    traces: list[IterationTrace] = []
    for it in range(cfg.n_iterations):
        m_si = cfg.window_at(cfg.si_windows, it)
        m_far = cfg.window_at(cfg.far_windows, it)

        if full_duplex:
            desired = r if it == 0 else r - f_hat
            est_si = _estimate(
                cfg.si_estimator, desired, s_near, cfg.si_length, m_si,
                cfg.si_stride, cfg.regularization, cfg.bem_order, cfg.homotopy,
            )
            sic = si_cancel(r, s_near, est_si, si_truth=si_truth)
            e = sic.residual
            sic_depth = sic.depth_db
            h_si = est_si.h_hat
        else:
            e = r
            sic_depth = float("nan")
            h_si = None

        est_far = _estimate(
            cfg.far_estimator, e, a_hat, cfg.far_length, m_far,
            cfg.far_stride, cfg.regularization, cfg.bem_order, cfg.homotopy,
        )
        h_far = est_far.h_hat

        if cfg.combiner == "rake_ic":
            f_for_ic = reconstruct_far(a_hat, h_far)
            y = rake_ic_combine(e, a_hat, h_far, f_for_ic)
        else:
            y = rake_combine(e, h_far)

        demod = demodulate(y, cfg.frame, warmup_symbols=cfg.warmup_symbols)
        decided = cfg.frame.remodulate(demod.message_bits)

        ber_raw = float("nan")
        ber_dec = float("nan")
        errors = 0
        guard = cfg.message_guard_bits
        counted = max(1, len(demod.message_bits) - 2 * guard)
        if truth is not None:
            keep = ~demod.warmup
            hard = np.where(demod.soft > 0, 1.0, -1.0)
            ber_raw = float(np.mean(hard[keep] != truth.data_symbols[keep]))
            interior = slice(guard, len(demod.message_bits) - guard)
            errors = int(np.sum(demod.message_bits[interior] != truth.message_bits[interior]))
            ber_dec = errors / counted

        guard_n = cfg.window_at(cfg.si_windows, 0) // 2
        trace = IterationTrace(
            iteration=it + 1,
            h_si=h_si,
            h_far=h_far,
            residual=e,
            combined=y,
            sic_depth_db=sic_depth,
            decoded_bits=demod.message_bits,
            data_symbols=decided.data,
            soft=demod.soft,
            ber_raw=ber_raw,
            ber_decoded=ber_dec,
            bit_errors=errors,
            bits_counted=counted,
            si_nmse_db=_nmse_db(h_si, truth.h_si if truth else None, guard_n)
            if h_si is not None
            else float("nan"),
            far_nmse_db=_nmse_db(h_far, truth.h_far if truth else None,
                                 cfg.window_at(cfg.far_windows, 0) // 2),
        )
        traces.append(trace)

        a_hat = decided.combined
        f_hat = reconstruct_far(a_hat, h_far)

    return traces
