"""Convolutional coding, interleaving and symbol construction.

Near-end frames are plain BPSK pseudo-random symbols. Far-end frames are
QPSK with a superimposed structure: the in-phase rail carries a known
pseudo-random pilot, the quadrature rail carries the coded, interleaved
data, i.e. ``a(i) = p(i) + j d(i)``.

Bit mapping is fixed project-wide: bit 0 -> +1, bit 1 -> -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

__all__ = [
    "CodeSpec",
    "SymbolFrame",
    "FrameFormat",
    "get_code",
    "CODE_TABLE",
    "prbs",
    "conv_encode",
    "interleave",
    "deinterleave",
    "viterbi_decode",
    "build_far_frame",
    "remodulate",
    "message_bits_for_symbols",
]


@dataclass(frozen=True)
class CodeSpec:
    """One of the four supported convolutional codes.

    ``generators`` holds one row of octal polynomials per encoder input;
    single-input codes have one row, the rate-2/3 code has two.
    """

    name: str
    n_inputs: int
    n_outputs: int
    constraint_lengths: tuple[int, ...]
    generators: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.name not in CODE_TABLE_RAW or CODE_TABLE_RAW[self.name] != (
            self.n_inputs,
            self.n_outputs,
            self.constraint_lengths,
            self.generators,
        ):
            raise ValueError(f"unsupported code: {self.name}")

    @property
    def rate(self) -> float:
        return self.n_inputs / self.n_outputs

    @property
    def memory(self) -> tuple[int, ...]:
        return tuple(k - 1 for k in self.constraint_lengths)

    @property
    def tail_steps(self) -> int:
        """Zero-termination steps needed to flush every shift register."""
        return max(self.memory)


CODE_TABLE_RAW = {
    "1/4": (1, 4, (8,), ((0o235, 0o275, 0o313, 0o357),)),
    "1/3": (1, 3, (8,), ((0o225, 0o331, 0o367),)),
    "1/2": (1, 2, (6,), ((0o53, 0o75),)),
    "2/3": (2, 3, (5, 4), ((0o23, 0o35, 0o0), (0o0, 0o5, 0o13))),
}

CODE_TABLE = {
    name: CodeSpec(name, *params) for name, params in CODE_TABLE_RAW.items()
}


def get_code(name: str) -> CodeSpec:
    if name not in CODE_TABLE:
        raise ValueError(f"unknown code rate {name!r}; supported: {sorted(CODE_TABLE)}")
    return CODE_TABLE[name]


def prbs(seed: int, length: int) -> np.ndarray:
    """Reproducible pseudo-random +/-1 sequence."""
    if length <= 0:
        raise ValueError("length must be positive")
    rng = np.random.default_rng(seed)
    return 1.0 - 2.0 * rng.integers(0, 2, size=length).astype(np.float64)


def _poly_bits(poly: int, constraint_length: int) -> np.ndarray:
    """Octal polynomial -> bit vector, MSB = current input."""
    return np.array(
        [(poly >> (constraint_length - 1 - i)) & 1 for i in range(constraint_length)],
        dtype=np.int64,
    )


def conv_encode(bits, code: CodeSpec) -> np.ndarray:
    """Encode with zero termination.

    GF(2) polynomial convolution per input stream; full convolution length
    equals message steps + memory, which is exactly the zero-terminated
    output. For the 2-input code, bits are consumed in pairs.
    """
    bits = np.asarray(bits, dtype=np.int64)
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("input must be a 0/1 sequence")
    k = code.n_inputs
    if len(bits) % k:
        raise ValueError(f"input length must be a multiple of {k} for code {code.name}")

    streams = [bits[i::k] for i in range(k)]
    n_steps = (len(bits) // k) + code.tail_steps

    out = np.zeros((n_steps, code.n_outputs), dtype=np.int64)
    for i, stream in enumerate(streams):
        if len(stream) == 0:
            continue
        for j, poly in enumerate(code.generators[i]):
            if poly == 0:
                continue
            g = _poly_bits(poly, code.constraint_lengths[i])
            conv = np.convolve(stream, g)
            out[: len(conv), j] += conv
    return (out % 2).ravel()


def interleave(x, depth: int) -> np.ndarray:
    """Block interleaver: write ``depth`` rows, read columns.

    Zero-pads to a multiple of depth; index map is
    ``out[j*depth + r] = in[r*cols + j]``.
    """
    x = np.asarray(x)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = len(x)
    cols = -(-n // depth)
    padded = np.zeros(depth * cols, dtype=x.dtype)
    padded[:n] = x
    return padded.reshape(depth, cols).T.ravel()


def deinterleave(x, depth: int, length: int | None = None) -> np.ndarray:
    """Inverse of :func:`interleave`; ``length`` trims the zero padding."""
    x = np.asarray(x)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if len(x) % depth:
        raise ValueError("interleaved length must be a multiple of depth")
    cols = len(x) // depth
    out = x.reshape(cols, depth).T.ravel()
    return out[:length] if length is not None else out


@lru_cache(maxsize=None)
def _trellis(code_name: str):
    """Transition tables: next_state[s, u] and output symbol out[s, u]."""
    code = get_code(code_name)
    mem = code.memory
    n_states = 1 << sum(mem)
    n_in = 1 << code.n_inputs

    next_state = np.zeros((n_states, n_in), dtype=np.int64)
    out_sym = np.zeros((n_states, n_in), dtype=np.int64)
    for s in range(n_states):
        # unpack per-register states, register 0 in the high bits
        regs = []
        rem = s
        for m in reversed(mem):
            regs.append(rem & ((1 << m) - 1))
            rem >>= m
        regs.reverse()
        for u in range(n_in):
            ubits = [(u >> (code.n_inputs - 1 - i)) & 1 for i in range(code.n_inputs)]
            full = [(ubits[i] << mem[i]) | regs[i] for i in range(code.n_inputs)]
            sym = 0
            for j in range(code.n_outputs):
                bit = 0
                for i in range(code.n_inputs):
                    bit ^= bin(full[i] & code.generators[i][j]).count("1") & 1
                sym = (sym << 1) | bit
            ns = 0
            for i in range(code.n_inputs):
                ns = (ns << mem[i]) | (full[i] >> 1)
            next_state[s, u] = ns
            out_sym[s, u] = sym
    return next_state, out_sym


@njit(cache=True)
def _viterbi_forward(bm, next_state, out_sym, prev_input, prev_state, pm):
    """Forward pass; fills the traceback tables in place.

    bm: (T, 2^n) branch metrics (higher = better); pm: (n_states,) initial
    path metrics, updated to the final metrics.
    """
    n_steps = bm.shape[0]
    n_states, n_in = next_state.shape
    pm_next = np.empty(n_states)
    for t in range(n_steps):
        for ns in range(n_states):
            pm_next[ns] = -1e300
        for s in range(n_states):
            base = pm[s]
            if base <= -1e299:
                continue
            for u in range(n_in):
                ns = next_state[s, u]
                cand = base + bm[t, out_sym[s, u]]
                if cand > pm_next[ns]:
                    pm_next[ns] = cand
                    prev_state[t, ns] = s
                    prev_input[t, ns] = u
        for ns in range(n_states):
            pm[ns] = pm_next[ns]


def viterbi_decode(soft, code: CodeSpec) -> np.ndarray:
    """Maximum-likelihood decode of a zero-terminated codeword.

    ``soft`` follows the project mapping: positive values favour bit 0.
    Returns the message without tail bits. Metrics are linear in the input,
    so any positive scaling leaves the decision unchanged.
    """
    soft = np.asarray(soft, dtype=np.float64)
    n = code.n_outputs
    if len(soft) == 0 or len(soft) % n:
        raise ValueError(f"soft input length must be a positive multiple of {n}")
    n_steps = len(soft) // n
    if n_steps <= code.tail_steps:
        raise ValueError("input shorter than the termination tail")

    next_state, out_sym = _trellis(code.name)
    n_states, n_in = next_state.shape

    # branch metric per step and output symbol: sum(soft * (1 - 2 bit))
    signs = np.empty((n, 1 << n))
    for sym in range(1 << n):
        for j in range(n):
            signs[j, sym] = 1.0 - 2.0 * ((sym >> (n - 1 - j)) & 1)
    bm = soft.reshape(n_steps, n) @ signs

    pm = np.full(n_states, -1e300)
    pm[0] = 0.0
    prev_state = np.zeros((n_steps, n_states), dtype=np.int64)
    prev_input = np.zeros((n_steps, n_states), dtype=np.int64)
    _viterbi_forward(bm, next_state, out_sym, prev_input, prev_state, pm)

    # zero termination: trace back from state 0
    state = 0
    steps = np.empty(n_steps, dtype=np.int64)
    for t in range(n_steps - 1, -1, -1):
        steps[t] = prev_input[t, state]
        state = prev_state[t, state]

    k = code.n_inputs
    msg_steps = n_steps - code.tail_steps
    bits = np.zeros(msg_steps * k, dtype=np.int64)
    for i in range(k):
        bits[i::k] = (steps[:msg_steps] >> (k - 1 - i)) & 1
    return bits


@dataclass(frozen=True)
class SymbolFrame:
    """Far-end frame content: pilot/data rails and their superposition."""

    pilot: np.ndarray
    data: np.ndarray
    combined: np.ndarray
    seed: int
    n_message_bits: int = 0
    pad_count: int = 0
    near: np.ndarray | None = None

    def __post_init__(self):
        if not np.array_equal(np.real(self.combined), self.pilot) or not np.array_equal(
            np.imag(self.combined), self.data
        ):
            raise ValueError("combined must equal pilot + j*data")

    def __len__(self) -> int:
        return len(self.combined)


@dataclass(frozen=True)
class FrameFormat:
    """Frame protocol both ends agree on: code, interleaving, pilot seed."""

    code: CodeSpec
    n_message_bits: int
    pilot_seed: int = 0xF0
    interleaver_depth: int = 64

    def __post_init__(self):
        if self.n_message_bits < 0:
            raise ValueError("n_message_bits must be nonnegative")
        if self.n_message_bits % self.code.n_inputs:
            raise ValueError("n_message_bits must be a multiple of the code inputs")

    @property
    def n_coded_bits(self) -> int:
        steps = self.n_message_bits // self.code.n_inputs + self.code.tail_steps
        return steps * self.code.n_outputs

    @property
    def n_symbols(self) -> int:
        depth = self.interleaver_depth
        return -(-self.n_coded_bits // depth) * depth

    @property
    def pad_count(self) -> int:
        return self.n_symbols - self.n_coded_bits

    def pilot(self) -> np.ndarray:
        return prbs(self.pilot_seed, self.n_symbols)

    def build(self, message_bits) -> SymbolFrame:
        message_bits = np.asarray(message_bits, dtype=np.int64)
        if len(message_bits) != self.n_message_bits:
            raise ValueError(
                f"expected {self.n_message_bits} message bits, got {len(message_bits)}"
            )
        coded = conv_encode(message_bits, self.code)
        spread = interleave(coded, self.interleaver_depth)
        data = 1.0 - 2.0 * spread.astype(np.float64)
        pilot = self.pilot()
        return SymbolFrame(
            pilot=pilot,
            data=data,
            combined=pilot + 1j * data,
            seed=self.pilot_seed,
            n_message_bits=self.n_message_bits,
            pad_count=self.pad_count,
        )

    def remodulate(self, decoded_bits) -> SymbolFrame:
        """Re-encode decoded bits exactly like the transmitter."""
        return self.build(decoded_bits)

    def extract_soft(self, symbol_soft) -> np.ndarray:
        """Deinterleave symbol-rate soft values back to coded-bit order."""
        symbol_soft = np.asarray(symbol_soft, dtype=np.float64)
        if len(symbol_soft) != self.n_symbols:
            raise ValueError(f"expected {self.n_symbols} soft values")
        return deinterleave(symbol_soft, self.interleaver_depth, length=self.n_coded_bits)

    def decode(self, symbol_soft) -> np.ndarray:
        return viterbi_decode(self.extract_soft(symbol_soft), self.code)


def build_far_frame(message_bits, code: CodeSpec, pilot_seed: int,
                    interleaver_depth: int = 64) -> SymbolFrame:
    """Encode, interleave and superimpose pilots: ``a = p + j d``."""
    message_bits = np.asarray(message_bits, dtype=np.int64)
    fmt = FrameFormat(
        code=code,
        n_message_bits=len(message_bits),
        pilot_seed=pilot_seed,
        interleaver_depth=interleaver_depth,
    )
    return fmt.build(message_bits)


def remodulate(decoded_bits, code: CodeSpec, pilot_seed: int,
               interleaver_depth: int = 64) -> SymbolFrame:
    """Transmitter-identical pipeline applied to decoded bits."""
    return build_far_frame(decoded_bits, code, pilot_seed, interleaver_depth)


def message_bits_for_symbols(code: CodeSpec, n_symbols: int,
                             interleaver_depth: int = 64) -> int:
    """Largest message size whose frame fits in ``n_symbols`` symbols."""
    k, n = code.n_inputs, code.n_outputs
    steps_budget = (n_symbols // n) if n_symbols > 0 else 0
    msg_steps = max(0, steps_budget - code.tail_steps)
    best = msg_steps * k
    while best > 0:
        fmt = FrameFormat(code=code, n_message_bits=best,
                          interleaver_depth=interleaver_depth)
        if fmt.n_symbols <= n_symbols:
            return best
        best -= k
    return best
